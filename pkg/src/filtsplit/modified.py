"""Non-resonance certificates, CFL numbers and modified Hamiltonians.

The modified Hamiltonian of ``Phi_P^t o Phi_A0`` is ``Z(t) = sum_n t^n Z_n``
with ``Z_0 = A_0`` and the recursion

    (n+1) Z_{n+1} = sum_k B_k/k! sum_{l_1+...+l_k = n} ad_{Z_l1} ... ad_{Z_lk} P,

where ``ad_Z Q = {Z, Q}``.  Consecutive ``ad_{Z_0}`` factors act diagonally,
so for a fixed ordered choice of the nonzero indices ``(n_1, ..., n_m)`` the
sum over how many ``Z_0`` factors sit in each gap collapses to a divided
difference of ``f(x) = x/(e^x - 1)`` at the values ``i Lambda`` of the
monomials met along the chain of brackets.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .filters import LinearEigenvalues, inverse_base, sup_lambda
from .polyham import PolyHamiltonian, contract, evaluate, from_text, lambda_of, split_table, to_text, vector_field_array
from .state import SpectralState, is_real

TWO_PI = 2.0 * math.pi
RESONANCE_MARGIN = 1e-9
BERNOULLI_KMAX = 64
SCAN_LIMIT = 10 ** 7


class NonResonanceError(ValueError):
    """A multi-index violates the non-resonance condition."""

    def __init__(self, msg: str, index=None, value: float | None = None):
        super().__init__(msg)
        self.index = index
        self.value = value


class ScanTooLarge(ValueError):
    """The exact non-resonance scan exceeds the enumeration limit."""


# -- Bernoulli numbers and the generating function -------------------------------------


@lru_cache(maxsize=None)
def _bernoulli_table(kmax: int) -> tuple[Fraction, ...]:
    B = [Fraction(1)]
    for k in range(1, kmax + 1):
        s = sum(math.comb(k + 1, j) * B[j] for j in range(k))
        B.append(-s / (k + 1))
    return tuple(B)


def bernoulli(k: int, kmax: int = BERNOULLI_KMAX) -> Fraction:
    """Exact ``B_k`` (convention ``B_1 = -1/2``)."""
    if k < 0 or k > kmax:
        raise ValueError(f"bernoulli index {k} outside [0, {kmax}]")
    return _bernoulli_table(kmax)[k]


def phi(x):
    """``i x / (exp(i x) - 1)`` with ``phi(0) = 1``; Taylor branch for ``|x| < 1e-4``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    direct = 1j * safe / np.expm1(1j * safe)
    taylor = 1.0 - 0.5j * x - x ** 2 / 12.0 - x ** 4 / 720.0
    out = np.where(small, taylor, direct)
    return complex(out) if out.ndim == 0 else out


def divided_differences(points: np.ndarray) -> np.ndarray:
    """``f[x_0, ..., x_m]`` of ``f(x) = x/(e^x - 1)`` for each row of ``points``.

    Uses the bidiagonal-matrix representation: for ``J`` with the points on the
    diagonal and ones above it, ``f(J)[0, m]`` is the divided difference.
    ``f = 1/g`` with the entire function ``g(x) = (e^x - 1)/x``, and ``g(J)``
    is read off one exponential of an augmented block matrix, so coincident
    points need no special treatment.
    """
    pts = np.array(points, dtype=complex)
    # subnormal entries make the scaling step of expm overflow
    pts[np.abs(pts) < 1e-300] = 0.0
    if pts.ndim == 1:
        pts = pts[:, None]
    nb, size = pts.shape
    if size == 1:
        return phi((pts[:, 0] / 1j).real)
    J = np.zeros((nb, size, size), dtype=complex)
    idx = np.arange(size)
    J[:, idx, idx] = pts
    J[:, idx[:-1], idx[1:]] = 1.0
    aug = np.zeros((nb, 2 * size, 2 * size), dtype=complex)
    aug[:, :size, :size] = J
    aug[:, :size, size:] = np.eye(size)
    g = expm(aug)[:, :size, size:]
    f = np.linalg.inv(g)
    return f[:, 0, size - 1]


# -- non-resonance ----------------------------------------------------------------------


@dataclass(frozen=True)
class NonResReport:
    r: int
    bound_kind: str
    max_abs_lambda: float
    delta: float

    @property
    def holds(self) -> bool:
        return self.delta > 0


def _scan_items(lam: LinearEigenvalues):
    """Signed items ``(momentum contribution, Lambda contribution, balance)``."""
    modes = lam.modes
    items = []
    for a, v in zip(modes.points, lam.values.tolist()):
        for dl in (1, -1):
            if modes.kind == "torus":
                items.append((tuple(dl * c for c in a), dl * v, dl))
            else:
                for eps in (1, -1):
                    items.append(((eps * a[0],), dl * v, dl))
    return items


def nonres_check(
    lam: LinearEigenvalues,
    r: int,
    mode: str = "worst_case",
    symmetric: bool = False,
    limit: int = SCAN_LIMIT,
) -> NonResReport:
    """Largest ``|Lambda(J)|`` over multi-indices of length ``<= r``.

    ``worst_case`` uses ``r max|lambda_a|`` (``(r/2)(max - min)`` for symmetric
    monomials).  ``exact_scan`` maximises ``Lambda`` over all zero-momentum
    multi-indices on the truncation by dynamic programming over
    (length, momentum[, balance]) states.
    """
    if r < 2:
        raise ValueError("r must be at least 2")
    vals = lam.values
    if mode == "worst_case":
        if symmetric:
            top = 0.5 * r * (float(np.max(vals, initial=0.0)) - float(np.min(vals, initial=0.0)))
        else:
            top = r * float(np.max(np.abs(vals), initial=0.0))
        return NonResReport(r, mode, top, TWO_PI - top)
    if mode != "exact_scan":
        raise ValueError(f"unknown mode {mode!r}")
    items = _scan_items(lam)
    d = lam.modes.d
    K = lam.modes.K
    n_mom = (2 * r * K + 1) ** d
    size = r * n_mom * len(items) * (2 * r + 1 if symmetric else 1)
    if size > limit:
        raise ScanTooLarge(f"exact scan needs ~{size:.2e} operations (> limit {limit:.0e})")
    zero = (0,) * d
    best = {(zero, 0): 0.0}
    top = 0.0
    for n in range(1, r + 1):
        room = (r - n) * K
        nxt: dict = {}
        for (m, b), v in best.items():
            for dm, dv, db in items:
                mm = tuple(x + y for x, y in zip(m, dm))
                if any(abs(c) > room for c in mm):
                    continue
                bb = b + db if symmetric else 0
                if abs(bb) > r - n:
                    continue
                key = (mm, bb)
                cand = v + dv
                if cand > nxt.get(key, -math.inf):
                    nxt[key] = cand
        best = nxt
        hit = best.get((zero, 0))
        if hit is not None and hit > top:
            top = hit
    return NonResReport(r, mode, top, TWO_PI - top)


def cfl_number(beta_kind: str, r: int, symmetric: bool = False) -> float:
    """``beta^{-1}(2 pi / r)``, or ``beta^{-1}(4 pi / r)`` for symmetric nonlinearities."""
    if r < 3:
        raise ValueError("r must be at least 3")
    return inverse_base(beta_kind, (2 * TWO_PI if symmetric else TWO_PI) / r)


def max_order(r: int, r0: int) -> int:
    """``floor((r - 2)/(r0 - 2))``."""
    if not r >= r0 >= 3:
        raise ValueError("need r >= r0 >= 3")
    return (r - 2) // (r0 - 2)


def certified_order_range(lam: LinearEigenvalues, r0: int, r_max: int = 64, **kw) -> int:
    """Largest ``r <= r_max`` for which the worst-case certificate holds."""
    best = 0
    for r in range(2, r_max + 1):
        if nonres_check(lam, r, **kw).holds:
            best = r
        else:
            break
    return best


# -- construction of Z_n -------------------------------------------------------------------


def _lambda_checked(key, lmap, margin: float) -> float:
    v = lambda_of(key, lmap)
    if abs(v) >= TWO_PI - margin:
        raise NonResonanceError(f"|Lambda| = {abs(v):.12g} too close to 2 pi for {key}", key, v)
    return v


def build_Z1(P: PolyHamiltonian, lam: LinearEigenvalues, margin: float = RESONANCE_MARGIN) -> PolyHamiltonian:
    """Each coefficient of ``P`` multiplied by ``phi(Lambda(J))``."""
    lmap = lam.as_map
    keys = list(P)
    lams = np.array([_lambda_checked(k, lmap, margin) for k in keys])
    fac = phi(lams) if keys else np.zeros(0)
    fac = np.atleast_1d(fac)
    return P._new({k: c * f for (k, c), f in zip(P.items(), fac)})


def _compositions(n: int):
    if n == 0:
        yield ()
        return
    for first in range(1, n + 1):
        for rest in _compositions(n - first):
            yield (first,) + rest


def _chain(P: PolyHamiltonian, tables: dict, comp, lmap, margin) -> dict:
    """Weighted sum of ``ad_{Z_n1} ... ad_{Z_nm} P`` for one ordered composition.

    Terms are tracked together with the Lambda values met along the chain so
    the final divided-difference weight can be applied per path.
    """
    # (key, history of Lambda values, innermost first) -> coefficient
    cur: dict = {(k, ()): c for k, c in P.items()}
    for nj in reversed(comp):
        table = tables[nj]
        nxt: dict = defaultdict(complex)
        for (k, hist), c in cur.items():
            h2 = hist + (_lambda_checked(k, lmap, margin),)
            part: dict = defaultdict(complex)
            # {Z, m} = -{m, Z}
            contract(k, c, table, part, -1.0)
            for k2, c2 in part.items():
                nxt[(k2, h2)] += c2
        cur = nxt
    out: dict = defaultdict(complex)
    if not cur:
        return out
    entries = list(cur.items())
    width = len(comp) + 1
    pts = np.empty((len(entries), width), dtype=complex)
    for row, ((k, hist), _) in enumerate(entries):
        pts[row, 0] = 1j * _lambda_checked(k, lmap, margin)
        pts[row, 1:] = [1j * v for v in hist]
    w = divided_differences(pts)
    for ((k, _), c), wk in zip(entries, w):
        out[k] += wk * c
    return out


def _next_Z(P: PolyHamiltonian, Zs: list, n: int, lmap, margin, tol: float) -> PolyHamiltonian:
    acc: dict = defaultdict(complex)
    tables = {j: split_table(Zs[j]._terms) for j in range(1, n + 1)}
    for comp in _compositions(n):
        for k, c in _chain(P, tables, comp, lmap, margin).items():
            acc[k] += c
    Z = P._new({k: c / (n + 1) for k, c in acc.items()})
    scale = max((abs(c) for _, c in Z.items()), default=0.0)
    return Z.prune(tol * scale)


@dataclass
class ModifiedHamiltonian:
    """``H_h = Z_h(h)/h`` with ``Z_h(t) = sum_{j<=N} t^j Z_j``.

    ``Zs[0]`` is the eigenvalue map of ``A_0``; ``Zs[1:]`` are polynomials.
    """

    Zs: list
    N: int
    h: float
    series_tol: float = 1e-12
    meta: dict = field(default_factory=dict)

    @property
    def lam(self) -> LinearEigenvalues:
        return self.Zs[0]

    def polys(self) -> list[PolyHamiltonian]:
        return list(self.Zs[1:])

    def to_text(self) -> str:
        header = dict(self.meta)
        header.update(
            h=self.h,
            N=self.N,
            series_tol=self.series_tol,
            kind=self.lam.modes.kind,
            d=self.lam.modes.d,
            K=self.lam.modes.K,
            lam=self.lam.values.tolist(),
        )
        parts = ["#! " + json.dumps(header, sort_keys=True)]
        for n, Z in enumerate(self.polys(), start=1):
            parts.append(f"## Z {n}")
            parts.append(to_text(Z).rstrip("\n"))
        return "\n".join(parts) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ModifiedHamiltonian":
        from .state import ModeSet

        lines = text.splitlines()
        header = json.loads(lines[0][3:])
        modes = (
            ModeSet.torus(header["d"], header["K"])
            if header["kind"] == "torus"
            else ModeSet.dirichlet(header["K"])
        )
        lam = LinearEigenvalues.from_values(modes, header.pop("lam"), header["h"])
        blocks, cur = [], None
        for line in lines[1:]:
            if line.startswith("## Z"):
                cur = []
                blocks.append(cur)
            elif cur is not None:
                cur.append(line)
        Zs = [lam] + [from_text("\n".join(b)) for b in blocks]
        meta = {k: v for k, v in header.items() if k not in ("h", "N", "series_tol", "kind", "d", "K")}
        return cls(Zs, header["N"], header["h"], header["series_tol"], meta)


def build_Zn(
    P: PolyHamiltonian,
    lam: LinearEigenvalues,
    N: int,
    series_tol: float = 1e-12,
    margin: float = RESONANCE_MARGIN,
    r: int | None = None,
) -> ModifiedHamiltonian:
    """Build ``Z_1 .. Z_N``.

    If ``r`` is given, the worst-case certificate for order ``r`` must hold and
    ``N <= max_order(r, deg P)``. Independently, every monomial met during the
    construction is checked against ``|Lambda| < 2 pi - margin``.
    """
    if N < 0:
        raise ValueError("N must be nonnegative")
    r0 = P.degree
    if r is not None:
        rep = nonres_check(lam, r)
        if not rep.holds:
            raise NonResonanceError(f"non-resonance fails at order r={r}: max |Lambda| = {rep.max_abs_lambda}")
        if N > max_order(r, r0):
            raise ValueError(f"N={N} exceeds max_order({r}, {r0}) = {max_order(r, r0)}")
    lmap = lam.as_map
    Zs: list = [lam]
    if N >= 1:
        Zs.append(build_Z1(P, lam, margin))
    for n in range(1, N):
        Z = _next_Z(P, Zs, n, lmap, margin, series_tol)
        bound = (n + 1) * (r0 - 2) + 2
        if len(Z) and Z.degree > bound:
            raise AssertionError(f"degree law violated: deg Z_{n + 1} = {Z.degree} > {bound}")
        Zs.append(Z)
    return ModifiedHamiltonian(Zs, N, lam.h, series_tol)


# -- evaluation ----------------------------------------------------------------------------------


def _quadratic(lam: LinearEigenvalues, z: SpectralState) -> complex:
    return complex(np.sum(lam.values * z.xi * z.eta))


def eval_H1(P: PolyHamiltonian, lam: LinearEigenvalues, h: float, z: SpectralState,
            Z1: PolyHamiltonian | None = None) -> float:
    """``sum (lambda_a/h) xi_a eta_a + sum phi(Lambda(J)) c_J z_J`` for real ``z``."""
    if not is_real(z, 1e-10):
        raise ValueError("eval_H1 needs a real state")
    Z1 = build_Z1(P, lam) if Z1 is None else Z1
    return float((_quadratic(lam, z) / h + evaluate(Z1, z)).real)


def eval_Hh(M: ModifiedHamiltonian, z: SpectralState) -> float:
    """``(1/h) [A_0(z) + sum_j h^j Z_j(z)]`` for real ``z``."""
    if not is_real(z, 1e-10):
        raise ValueError("eval_Hh needs a real state")
    h = M.h
    total = _quadratic(M.lam, z) / h
    for j, Z in enumerate(M.polys(), start=1):
        total += h ** (j - 1) * evaluate(Z, z)
    return float(total.real)


def _lawson_rk4(rot, field_fn, y0: np.ndarray, t: float, n: int) -> np.ndarray:
    """Integrating-factor RK4: linear part ``y' = -i rot y`` solved exactly."""
    tau = t / n
    half = np.exp(-0.5j * tau * rot)
    full = half * half
    y = y0.copy()
    for _ in range(n):
        k1 = field_fn(y)
        k2 = field_fn(half * (y + 0.5 * tau * k1))
        # k2, k3 live in the frame rotated by tau/2; pull back through the factor
        k2 = k2 / half
        k3 = field_fn(half * (y + 0.5 * tau * k2)) / half
        k4 = field_fn(full * (y + tau * k3)) / full
        y = full * (y + tau / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
    return y


def modified_flow(M: ModifiedHamiltonian, z: SpectralState, t: float, tol: float = 1e-13,
                  n0: int = 4, max_doublings: int = 12) -> SpectralState:
    """Flow of ``H_h`` over time ``t``.

    The quadratic part ``A_0/h`` is integrated exactly; the polynomial part by
    integrating-factor RK4, doubling the substep count until two successive
    results agree to ``tol`` (relative to the state size).
    """
    if t == 0:
        return z.copy()
    modes = z.modes
    rot = M.lam.flat / M.h
    polys = [(M.h ** (j - 1), Z) for j, Z in enumerate(M.polys(), start=1)]

    def field_fn(v):
        out = np.zeros_like(v)
        for w, Z in polys:
            out += w * vector_field_array(Z, modes, v)
        return out

    scale = max(1.0, float(np.max(np.abs(z.values))))
    n = n0
    prev = _lawson_rk4(rot, field_fn, z.values, t, n)
    for _ in range(max_doublings):
        n *= 2
        cur = _lawson_rk4(rot, field_fn, z.values, t, n)
        err = float(np.max(np.abs(cur - prev))) / 15.0
        if err <= tol * scale:
            return SpectralState(modes, cur)
        prev = cur
    raise RuntimeError(f"modified_flow did not reach tol={tol} (last estimate {err:.3e})")


__all__ = [
    "NonResonanceError",
    "ScanTooLarge",
    "NonResReport",
    "ModifiedHamiltonian",
    "bernoulli",
    "phi",
    "divided_differences",
    "nonres_check",
    "cfl_number",
    "max_order",
    "build_Z1",
    "build_Zn",
    "eval_H1",
    "eval_Hh",
    "modified_flow",
    "sup_lambda",
]
