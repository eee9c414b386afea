"""Concrete PDE instances: polynomial NLS on the torus and NLW on (0, pi).

NLS: ``psi = (2 pi)^{-d/2} sum_a xi_a exp(i a.x)`` and
``P = int g(psi, conj psi) dx`` with ``g(u, v) = sum c_pq u^p v^q``.

NLW: ``q = A^{1/2} u``, ``p = A^{-1/2} v``, ``xi = (q + i p)/sqrt 2``,
``eta = (q - i p)/sqrt 2`` in the orthonormal sine basis, and
``P = int G(A^{-1/2} q) dx`` with ``G(u) = sum G_k u^k``.

Both nonlinearities are Galerkin-truncated to the retained modes, which makes
the truncated system a finite-dimensional Hamiltonian system with strictly
zero-momentum monomials.
"""
from __future__ import annotations

import functools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Mapping

import numpy as np

from .polyham import PolyHamiltonian, multiplicity
from .state import ModeIndex, ModeSet, SpectralState, analyze, is_real, make_real_state, sine_basis, synthesize

FLOW_KINDS = ("exact_gauge", "exact_kick", "rk_substep")


@dataclass(frozen=True)
class ModelSpec:
    """PDE model with a polynomial nonlinearity.

    ``terms`` holds ``((p, q), c_pq)`` pairs for NLS and ``((k,), G_k)`` pairs
    for NLW.  ``flow`` selects how the nonlinear flow is computed (``None``
    picks ``rk_substep`` for NLS and ``exact_kick`` for NLW).
    """

    kind: str
    K: int
    d: int = 1
    terms: tuple = ()
    flow: str | None = None
    max_degree: int = 8
    flow_tol: float = 1e-12

    def __post_init__(self):
        if self.kind not in ("nls_torus", "nlw_dirichlet"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "nlw_dirichlet" and self.d != 1:
            raise ValueError("NLW is one-dimensional")
        if self.flow is not None and self.flow not in FLOW_KINDS:
            raise ValueError(f"unknown flow kind {self.flow!r}")
        terms = tuple((tuple(int(v) for v in k), complex(c)) for k, c in self.terms)
        object.__setattr__(self, "terms", terms)
        coef = dict(terms)
        for k, c in terms:
            deg = sum(k)
            if deg < 3:
                raise ValueError("the nonlinearity needs a zero of order at least three")
            if deg > self.max_degree:
                raise ValueError(f"nonlinearity degree {deg} exceeds max_degree={self.max_degree}")
            if self.kind == "nls_torus":
                if len(k) != 2:
                    raise ValueError("NLS terms are keyed by (p, q)")
                if abs(coef.get((k[1], k[0]), 0j) - np.conj(c)) > 1e-14 * max(1.0, abs(c)):
                    raise ValueError("g(u, conj u) must be real: need c_qp = conj(c_pq)")
            else:
                if len(k) != 1:
                    raise ValueError("NLW terms are keyed by (k,)")
                if abs(c.imag) > 0:
                    raise ValueError("G must have real coefficients")
                if k[0] % 2:
                    raise ValueError(
                        "odd-degree terms of G break the Dirichlet selection rule; unsupported"
                    )
        if self.flow == "exact_gauge" and not self.gauge_invariant:
            raise ValueError("exact_gauge flow requires a gauge-invariant NLS nonlinearity")
        if self.flow == "exact_kick" and self.kind != "nlw_dirichlet":
            raise ValueError("exact_kick flow is only available for NLW")

    @classmethod
    def cubic_nls(cls, K: int, d: int = 1, coupling: float = 1.0, **kw) -> "ModelSpec":
        """``g = coupling |u|^4``, so ``i psi_t = -Laplace psi + 2 coupling |psi|^2 psi``."""
        return cls("nls_torus", K, d, (((2, 2), coupling),), **kw)

    @classmethod
    def nlw(cls, K: int, G: Mapping[int, float] | None = None, **kw) -> "ModelSpec":
        """NLW with ``G(u) = sum G_k u^k`` (default ``u^4 / 4``, i.e. ``g(u) = -u^3``)."""
        G = {4: 0.25} if G is None else G
        return cls("nlw_dirichlet", K, 1, tuple(((k,), v) for k, v in sorted(G.items())), **kw)

    @property
    def r0(self) -> int:
        return max((sum(k) for k, _ in self.terms), default=0)

    @property
    def gauge_invariant(self) -> bool:
        return self.kind == "nls_torus" and all(k[0] == k[1] for k, _ in self.terms)

    @property
    def flow_kind(self) -> str:
        if self.flow is not None:
            return self.flow
        return "rk_substep" if self.kind == "nls_torus" else "exact_kick"

    @property
    def selection(self) -> str:
        return "torus" if self.kind == "nls_torus" else "dirichlet"

    def quad_grid(self) -> int:
        """Grid on which every relevant product is integrated exactly."""
        r = max(self.r0, 2)
        if self.kind == "nls_torus":
            return max(2 * self.K + 2, r * self.K + 2)
        return max(2 * self.K + 2, r * self.K)

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "K": self.K,
            "d": self.d,
            "terms": [[list(k), [c.real, c.imag]] for k, c in self.terms],
            "flow": self.flow,
            "flow_tol": self.flow_tol,
        }
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        allowed = {"kind", "K", "d", "terms", "flow", "flow_tol", "max_degree"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown model keys: {sorted(unknown)}")
        terms = []
        for k, c in d.get("terms", []):
            c = complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c)
            terms.append((tuple(k), c))
        return cls(
            d["kind"],
            int(d["K"]),
            int(d.get("d", 1)),
            tuple(terms),
            d.get("flow"),
            int(d.get("max_degree", 8)),
            float(d.get("flow_tol", 1e-12)),
        )


@functools.lru_cache(maxsize=32)
def frequencies(model: ModelSpec) -> ModeSet:
    """Mode set with ``omega_a = |a|^2`` (NLS) or ``omega_a = a`` (NLW)."""
    if model.kind == "nls_torus":
        return ModeSet.torus(model.d, model.K)
    return ModeSet.dirichlet(model.K)


# -- expansion into monomials -----------------------------------------------------------


def _multisets_by_sum(points, size: int, d: int):
    groups = defaultdict(list)
    for combo in combinations_with_replacement(points, size):
        s = tuple(sum(a[k] for a in combo) for k in range(d))
        groups[s].append(combo)
    return groups


def _orderings(combo) -> int:
    return multiplicity(tuple(combo))


def _sine_integral(avals) -> float:
    """``int_0^pi prod_i sqrt(2/pi) sin(a_i x) dx`` for an even number of factors."""
    k = len(avals)
    weights = {0: 1}
    for a in avals:
        nxt = defaultdict(int)
        for s, w in weights.items():
            nxt[s + a] += w
            nxt[s - a] -= w
        weights = nxt
    signed = weights.get(0, 0)
    # (2i)^{-k} = (-1/4)^{k/2} for even k
    return (2.0 / math.pi) ** (k / 2) * math.pi * (-0.25) ** (k // 2) * signed


@functools.lru_cache(maxsize=16)
def expand_nonlinearity(model: ModelSpec) -> PolyHamiltonian:
    """Truncated ``P`` as a sparse polynomial in ``z``."""
    modes = frequencies(model)
    terms: dict = defaultdict(complex)
    if model.kind == "nls_torus":
        d = model.d
        for (p, q), c in model.terms:
            scale = c * (2 * math.pi) ** (d * (1 - (p + q) / 2))
            A = _multisets_by_sum(modes.points, p, d)
            B = A if q == p else _multisets_by_sum(modes.points, q, d)
            for s, alist in A.items():
                for acombo in alist:
                    ka = tuple(ModeIndex(1, a) for a in acombo)
                    wa = scale * _orderings(acombo)
                    for bcombo in B.get(s, ()):
                        key = tuple(ModeIndex(-1, b) for b in bcombo) + ka
                        terms[key] += wa * _orderings(bcombo)
        return PolyHamiltonian(dict(terms), "torus", check=False).prune(0.0)
    signed = sorted(ModeIndex(dl, a) for dl in (1, -1) for a in modes.points)
    for (k,), Gk in model.terms:
        for combo in combinations_with_replacement(signed, k):
            avals = [j.a[0] for j in combo]
            integral = _sine_integral(avals)
            if integral == 0:
                continue
            amp = np.prod([a ** -0.5 / math.sqrt(2.0) for a in avals])
            terms[combo] += Gk.real * multiplicity(combo) * amp * integral
    return PolyHamiltonian(dict(terms), "dirichlet", check=False).prune(0.0)


# -- grid evaluation of the nonlinearity ---------------------------------------------------


class _Grid:
    """Cached grid data for fast evaluation of ``P`` and ``X_P``."""

    def __init__(self, model: ModelSpec):
        self.model = model
        self.modes = frequencies(model)
        self.n = len(self.modes)
        self.N = model.quad_grid()
        if model.kind == "nls_torus":
            d = model.d
            self.axes = tuple(range(-d, 0))
            pts = np.array(self.modes.points, dtype=int).reshape(self.n, d)
            self.slots = tuple(np.mod(pts[:, k], self.N) for k in range(d))
            self.synth = (self.N ** d) * (2 * math.pi) ** (-d / 2)
            self.anal = (2 * math.pi / self.N) ** d * (2 * math.pi) ** (-d / 2)
            self.cell = (2 * math.pi / self.N) ** d
        else:
            _, S = sine_basis(self.modes, self.N)
            a = np.array([p[0] for p in self.modes.points], dtype=float)
            self.U = S * a ** -0.5  # u = U @ q
            self.cell = math.pi / (self.N + 1)

    # torus helpers with leading batch dimensions
    def _synth(self, c: np.ndarray) -> np.ndarray:
        shape = c.shape[:-1] + (self.N,) * self.model.d
        spec = np.zeros(shape, dtype=complex)
        spec[(...,) + self.slots] = c
        return np.fft.ifftn(spec, axes=self.axes) * self.synth

    def _anal(self, f: np.ndarray) -> np.ndarray:
        return np.fft.fftn(f, axes=self.axes)[(...,) + self.slots] * self.anal

    def fields(self, values: np.ndarray):
        xi = values[..., : self.n]
        eta = values[..., self.n:]
        psi = self._synth(xi)
        phi = np.conj(self._synth(np.conj(eta)))
        return psi, phi

    def g(self, psi, phi):
        out = 0j
        for (p, q), c in self.model.terms:
            out = out + c * psi ** p * phi ** q
        return out

    def dg(self, psi, phi):
        du = 0j
        dv = 0j
        for (p, q), c in self.model.terms:
            if p:
                du = du + p * c * psi ** (p - 1) * phi ** q
            if q:
                dv = dv + q * c * psi ** p * phi ** (q - 1)
        return du, dv

    def energy(self, values: np.ndarray) -> complex:
        if self.model.kind == "nls_torus":
            psi, phi = self.fields(values)
            return complex(np.sum(self.g(psi, phi)) * self.cell)
        q = (values[: self.n] + values[self.n:]) / math.sqrt(2.0)
        u = self.U @ q
        G = sum(c.real * u ** k[0] for k, c in self.model.terms)
        return complex(np.sum(G) * self.cell)

    def grad_q(self, q: np.ndarray) -> np.ndarray:
        """``dP/dq_a`` for NLW."""
        u = q @ self.U.T
        dG = sum(k[0] * c.real * u ** (k[0] - 1) for k, c in self.model.terms)
        return (dG @ self.U) * self.cell

    def vector_field(self, values: np.ndarray) -> np.ndarray:
        if self.model.kind == "nls_torus":
            psi, phi = self.fields(values)
            du, dv = self.dg(psi, phi)
            dP_deta = self._anal(dv)
            dP_dxi = np.conj(self._anal(np.conj(du)))
            return np.concatenate([-1j * dP_deta, 1j * dP_dxi], axis=-1)
        s2 = math.sqrt(2.0)
        q = (values[..., : self.n] + values[..., self.n:]) / s2
        gq = self.grad_q(q)
        # q' = 0, p' = -dP/dq  =>  xi' = -i gq / sqrt2, eta' = +i gq / sqrt2
        return np.concatenate([-1j * gq / s2, 1j * gq / s2], axis=-1)


@functools.lru_cache(maxsize=16)
def _grid(model: ModelSpec) -> _Grid:
    return _Grid(model)


def nonlinear_energy(model: ModelSpec, z: SpectralState) -> complex:
    """``P(z)`` by exact grid quadrature."""
    return _grid(model).energy(z.values)


def nonlinear_vector_field(model: ModelSpec, z: SpectralState) -> SpectralState:
    """``X_P(z)`` by exact grid quadrature (Galerkin projection)."""
    return SpectralState(z.modes, _grid(model).vector_field(z.values))


def full_energy(model: ModelSpec, z: SpectralState) -> float:
    """``H(z) = sum_a omega_a xi_a eta_a + P(z)`` for real ``z``."""
    if not is_real(z, 1e-10):
        raise ValueError("full_energy needs a real state")
    quad = np.sum(z.modes.omega * z.xi * z.eta)
    return float((quad + nonlinear_energy(model, z)).real)


# -- nonlinear flows ---------------------------------------------------------------------

_GL_C = math.sqrt(3.0) / 6.0
_GL_A = np.array([[0.25, 0.25 - _GL_C], [0.25 + _GL_C, 0.25]])


def gauss_legendre(f, y: np.ndarray, t: float, nsub: int, iter_tol: float = 1e-15, max_iter: int = 60):
    """Two-stage Gauss-Legendre collocation (order 4) with ``nsub`` substeps.

    The method is symplectic and conserves quadratic invariants; stages are
    solved by fixed-point iteration.
    """
    tau = t / nsub
    y = y.copy()
    for _ in range(nsub):
        k0 = f(y)
        K = np.stack([k0, k0])
        for it in range(max_iter):
            Y = y[None, :] + tau * (_GL_A @ K)
            Kn = f(Y)
            err = np.max(np.abs(Kn - K)) * abs(tau)
            K = Kn
            if not np.isfinite(err):
                break  # non-finite data is reported by the caller
            if err <= iter_tol * max(1.0, np.max(np.abs(y))):
                break
        else:
            raise RuntimeError("Gauss-Legendre stage iteration did not converge")
        y = y + tau * 0.5 * (K[0] + K[1])
    return y


def substeps_for(model: ModelSpec, values: np.ndarray, t: float, tol: float | None = None) -> int:
    """Substep count so that the local error estimate ``(tau L)^5 / 4320`` stays below ``tol``."""
    tol = model.flow_tol if tol is None else tol
    g = _grid(model)
    f = g.vector_field(values)
    y1 = np.sum(np.abs(values))
    if y1 == 0 or not np.isfinite(y1):
        return 1
    L = max(model.r0 - 1, 1) * np.sum(np.abs(f)) / y1
    target = (4320.0 * tol) ** 0.2
    if not np.isfinite(L):
        return 1
    return max(1, int(math.ceil(abs(t) * L / target)))


def gauge_kick_physical(model: ModelSpec, psi: np.ndarray, t: float) -> np.ndarray:
    """Pointwise flow ``psi -> exp(-i t Gt'(|psi|^2)) psi`` for ``g = Gt(|u|^2)``."""
    s = np.abs(psi) ** 2
    dG = 0.0
    for (p, _), c in model.terms:
        dG = dG + p * c.real * s ** (p - 1)
    return np.exp(-1j * t * dG) * psi


def nonlinear_flow(model: ModelSpec, z: SpectralState, t: float, kind: str | None = None,
                   tol: float | None = None) -> SpectralState:
    """``Phi_P^t(z)``.

    ``rk_substep`` integrates the Galerkin system to the local tolerance
    ``tol``; ``exact_kick`` is exact for NLW; ``exact_gauge`` applies the
    pointwise phase rotation on the quadrature grid and projects back onto the
    retained modes (exact for the untruncated equation, and for data whose
    kicked field stays band-limited, such as a single plane wave).
    """
    kind = kind or model.flow_kind
    if t == 0:
        return z.copy()
    g = _grid(model)
    if kind == "exact_kick":
        if model.kind != "nlw_dirichlet":
            raise ValueError("exact_kick is only available for NLW")
        n = g.n
        s2 = math.sqrt(2.0)
        xi, eta = z.values[:n], z.values[n:]
        q = (xi + eta) / s2
        p = (xi - eta) / (1j * s2)
        p = p - t * g.grad_q(q)
        return SpectralState(z.modes, np.concatenate([(q + 1j * p) / s2, (q - 1j * p) / s2]))
    if kind == "exact_gauge":
        if not model.gauge_invariant:
            raise ValueError("exact_gauge needs a gauge-invariant NLS nonlinearity")
        psi = synthesize(z.modes, z.xi, g.N)
        return make_real_state(z.modes, analyze(z.modes, gauge_kick_physical(model, psi, t), g.N))
    if kind != "rk_substep":
        raise ValueError(f"unknown flow kind {kind!r}")
    nsub = substeps_for(model, z.values, t, tol)
    return SpectralState(z.modes, gauss_legendre(g.vector_field, z.values, t, nsub))
