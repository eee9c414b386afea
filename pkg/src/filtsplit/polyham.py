"""Sparse polynomial Hamiltonians in the variables ``z_j``.

A polynomial is a map from canonical index tuples to complex coefficients.
A key ``(j_1, ..., j_l)`` is sorted by ``(delta, a)`` and may repeat indices;
the stored coefficient is the coefficient of the monomial ``z_{j_1}...z_{j_l}``
itself, i.e. the symmetric coefficient of the ordered expansion multiplied by
the number of distinct orderings (see :func:`multiplicity`).
"""
from __future__ import annotations

import itertools
import math
import re
from collections import Counter, defaultdict
from typing import Iterable, Mapping

import numpy as np

from .filters import LinearEigenvalues
from .state import Lattice, ModeIndex, ModeSet, SpectralState

Key = tuple[ModeIndex, ...]

SELECTIONS = ("torus", "dirichlet")


def canonical(indices: Iterable) -> Key:
    return tuple(sorted(ModeIndex(int(j[0]), tuple(j[1])) for j in indices))


def conjugate_key(key: Key) -> Key:
    return tuple(sorted(ModeIndex(-j.delta, j.a) for j in key))


def momentum(indices: Iterable[ModeIndex]) -> Lattice:
    """``sum_i delta_i a_i`` componentwise."""
    indices = list(indices)
    if not indices:
        return ()
    d = len(indices[0].a)
    tot = [0] * d
    for j in indices:
        for k in range(d):
            tot[k] += j.delta * j.a[k]
    return tuple(tot)


def dirichlet_admissible(indices: Iterable[ModeIndex]) -> bool:
    """True when ``+-a_1 +- ... +- a_l = 0`` for some choice of signs."""
    vals = [j.a[0] for j in indices]
    reach = {0}
    for v in vals:
        reach = {r + v for r in reach} | {r - v for r in reach}
    return 0 in reach


def admissible(key: Key, selection: str) -> bool:
    if selection == "torus":
        return not any(momentum(key))
    return dirichlet_admissible(key)


def multiplicity(key: Key) -> int:
    """Number of distinct orderings of the multiset ``key``."""
    out = math.factorial(len(key))
    for c in Counter(key).values():
        out //= math.factorial(c)
    return out


class PolyHamiltonian:
    """Immutable sparse polynomial ``sum_J c_J z_J``.

    Parameters
    ----------
    terms : mapping from index tuples to coefficients. Keys are canonicalised
        and equal keys are summed.
    selection : ``"torus"`` (every monomial has zero momentum) or
        ``"dirichlet"`` (signed sums ``+-a_1 +- ... = 0``, the Dirichlet rule).
    """

    __slots__ = ("_terms", "selection", "_compiled")

    def __init__(self, terms: Mapping | None = None, selection: str = "torus", *, check: bool = True):
        if selection not in SELECTIONS:
            raise ValueError(f"unknown selection {selection!r}")
        self.selection = selection
        self._compiled = {}
        acc: dict[Key, complex] = {}
        for k, c in (terms or {}).items():
            if c == 0:
                continue
            key = canonical(k) if check else k
            acc[key] = acc.get(key, 0j) + complex(c)
        if check:
            for key in acc:
                if len(key) < 1:
                    raise ValueError("constant terms are not allowed")
                if not admissible(key, selection):
                    raise ValueError(f"monomial {key} violates the {selection} selection rule")
        self._terms = {k: c for k, c in acc.items() if c != 0}

    # -- basic container behaviour -------------------------------------------------
    @property
    def terms(self) -> dict[Key, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __getitem__(self, key) -> complex:
        return self._terms.get(canonical(key), 0j)

    def __repr__(self) -> str:
        return f"PolyHamiltonian({len(self)} terms, degrees={self.degrees()}, {self.selection})"

    @property
    def degree(self) -> int:
        return max((len(k) for k in self._terms), default=0)

    def degrees(self) -> list[int]:
        return sorted({len(k) for k in self._terms})

    def homogeneous(self, ell: int) -> "PolyHamiltonian":
        return self._new({k: c for k, c in self._terms.items() if len(k) == ell})

    def _new(self, terms: dict) -> "PolyHamiltonian":
        return PolyHamiltonian(terms, self.selection, check=False)

    # -- linear structure -----------------------------------------------------------
    def _same(self, other: "PolyHamiltonian"):
        if other.selection != self.selection:
            raise ValueError("cannot combine polynomials with different selection rules")

    def __add__(self, other: "PolyHamiltonian") -> "PolyHamiltonian":
        self._same(other)
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, 0j) + c
        return self._new(out)

    def __sub__(self, other: "PolyHamiltonian") -> "PolyHamiltonian":
        return self + other.scale(-1.0)

    def __neg__(self) -> "PolyHamiltonian":
        return self.scale(-1.0)

    def scale(self, c: complex) -> "PolyHamiltonian":
        return self._new({k: c * v for k, v in self._terms.items()})

    def __mul__(self, c: complex) -> "PolyHamiltonian":
        return self.scale(c)

    __rmul__ = __mul__

    def map_coefficients(self, f) -> "PolyHamiltonian":
        """New polynomial with coefficients ``f(key, c)``."""
        return self._new({k: f(k, c) for k, c in self._terms.items()})

    def prune(self, tol: float) -> "PolyHamiltonian":
        return self._new({k: c for k, c in self._terms.items() if abs(c) > tol})

    def conj(self) -> "PolyHamiltonian":
        """The polynomial ``z -> conj(P(conj-swapped z))``: coefficients conjugated, keys barred."""
        return self._new({conjugate_key(k): np.conj(c) for k, c in self._terms.items()})

    # -- structural predicates ----------------------------------------------------------
    def is_real(self, tol: float = 1e-12) -> bool:
        """``c_{bar J} = conj(c_J)`` for every stored key."""
        scale = max(1.0, max((abs(c) for c in self._terms.values()), default=0.0))
        for k, c in self._terms.items():
            if abs(self._terms.get(conjugate_key(k), 0j) - np.conj(c)) > tol * scale:
                return False
        return True

    def is_symmetric(self) -> bool:
        """Every monomial has as many ``xi`` as ``eta`` factors."""
        return all(sum(j.delta for j in k) == 0 for k in self._terms)

    def zero_momentum(self) -> bool:
        return all(admissible(k, self.selection) for k in self._terms)

    # -- compiled evaluation ------------------------------------------------------------
    def compiled(self, modes: ModeSet):
        """Per-degree ``(positions, coefficients)`` arrays for fast evaluation."""
        hit = self._compiled.get(modes)
        if hit is not None:
            return hit
        groups: dict[int, tuple[list, list]] = defaultdict(lambda: ([], []))
        try:
            for k, c in self._terms.items():
                pos, coef = groups[len(k)]
                pos.append([modes.position(j) for j in k])
                coef.append(c)
        except KeyError as e:
            raise ValueError(f"monomial index outside the mode set: {e}") from None
        out = [
            (ell, np.array(pos, dtype=np.intp).reshape(len(coef), ell), np.array(coef, dtype=complex))
            for ell, (pos, coef) in sorted(groups.items())
        ]
        self._compiled[modes] = out
        return out


def distance(P: PolyHamiltonian, Q: PolyHamiltonian) -> float:
    """Largest coefficient difference over the union of keys."""
    keys = set(P._terms) | set(Q._terms)
    return max((abs(P._terms.get(k, 0j) - Q._terms.get(k, 0j)) for k in keys), default=0.0)


def ham_norm(P: PolyHamiltonian) -> float:
    """Sum over degrees of the largest symmetric coefficient ``|c_J| / multiplicity(J)``."""
    best: dict[int, float] = {}
    for k, c in P.items():
        v = abs(c) / multiplicity(k)
        if v > best.get(len(k), 0.0):
            best[len(k)] = v
    return float(sum(best.values()))


def evaluate(P: PolyHamiltonian, z: SpectralState) -> complex:
    """``P(z) = sum_J c_J z_J``."""
    v = z.values
    total = 0j
    for _, pos, coef in P.compiled(z.modes):
        total += complex(np.dot(coef, np.prod(v[pos], axis=1)))
    return total


def gradient(P: PolyHamiltonian, z: SpectralState) -> np.ndarray:
    """``dP/dz_p`` on the flat layout."""
    v = z.values
    n2 = v.size
    gre = np.zeros(n2)
    gim = np.zeros(n2)
    for ell, pos, coef in P.compiled(z.modes):
        vals = v[pos]
        # prefix/suffix products give the product of all other factors
        pre = np.ones_like(vals)
        suf = np.ones_like(vals)
        for q in range(1, ell):
            pre[:, q] = pre[:, q - 1] * vals[:, q - 1]
            suf[:, ell - 1 - q] = suf[:, ell - q] * vals[:, ell - q]
        w = coef[:, None] * pre * suf
        idx = pos.ravel()
        gre += np.bincount(idx, weights=w.real.ravel(), minlength=n2)
        gim += np.bincount(idx, weights=w.imag.ravel(), minlength=n2)
    return gre + 1j * gim


def vector_field_array(P: PolyHamiltonian, modes: ModeSet, values: np.ndarray) -> np.ndarray:
    g = gradient(P, SpectralState(modes, values))
    n = len(modes)
    return np.concatenate([-1j * g[n:], 1j * g[:n]])


def vector_field(P: PolyHamiltonian, z: SpectralState) -> SpectralState:
    """``X_P(z)``: ``-i dP/d eta_a`` at ``(a, +1)`` and ``+i dP/d xi_a`` at ``(a, -1)``."""
    return SpectralState(z.modes, vector_field_array(P, z.modes, z.values))


def split_table(terms: Mapping[Key, complex]) -> dict:
    """For each index ``j``: list of (key without one ``j``, coefficient, count of ``j``)."""
    table: dict[ModeIndex, list] = defaultdict(list)
    for k, c in terms.items():
        for j, cnt in Counter(k).items():
            i = k.index(j)
            table[j].append((k[:i] + k[i + 1:], c, cnt))
    return table


def contract(key: Key, c: complex, table: dict, out: dict, factor: complex = 1.0) -> None:
    """Accumulate ``factor * {c z_key, G}`` into ``out``, with ``G`` given by its split table."""
    for j, n1 in Counter(key).items():
        partners = table.get(ModeIndex(-j.delta, j.a))
        if not partners:
            continue
        i = key.index(j)
        rest1 = key[:i] + key[i + 1:]
        f = factor * (-1j * j.delta) * n1 * c
        for rest2, c2, n2 in partners:
            if not rest1 and not rest2:
                continue
            out[tuple(sorted(rest1 + rest2))] += f * n2 * c2


def poisson_bracket(F: PolyHamiltonian, G: PolyHamiltonian) -> PolyHamiltonian:
    """``{F, G} = i sum_a (dF/d eta_a dG/d xi_a - dF/d xi_a dG/d eta_a)``.

    Computed by pairwise contraction of conjugate indices. Degree-0 terms
    (from two quadratic monomials) are dropped.
    """
    F._same(G)
    table = split_table(G._terms)
    out: dict[Key, complex] = defaultdict(complex)
    for k, c in F._terms.items():
        contract(k, c, table, out)
    return F._new(dict(out))


def lambda_of(indices: Iterable[ModeIndex], lam: LinearEigenvalues | Mapping) -> float:
    """``Lambda(J) = sum_i delta_i lambda_{a_i}``."""
    m = lam.as_map if isinstance(lam, LinearEigenvalues) else lam
    return float(sum(j.delta * m[j.a] for j in indices))


def ad_diag(lam: LinearEigenvalues, Q: PolyHamiltonian) -> PolyHamiltonian:
    """``{A_0, Q}``: each coefficient multiplied by ``i Lambda(J)``."""
    m = lam.as_map
    return Q._new({k: 1j * lambda_of(k, m) * c for k, c in Q.items()}).prune(0.0)


def quadratic_diag(lam: LinearEigenvalues | Mapping, selection: str = "torus") -> PolyHamiltonian:
    """``A_0 = sum_a lambda_a xi_a eta_a``."""
    m = lam.as_map if isinstance(lam, LinearEigenvalues) else lam
    return PolyHamiltonian(
        {(ModeIndex(-1, a), ModeIndex(1, a)): v for a, v in m.items() if v != 0},
        selection,
        check=False,
    )


# -- text serialisation ------------------------------------------------------------------


def _fmt_index(j: ModeIndex) -> str:
    return f"({':'.join(str(v) for v in j.a)},{j.delta})"


def to_text(P: PolyHamiltonian) -> str:
    """One monomial per line: ``coeff_re coeff_im (a1,d1) (a2,d2) ...``.

    Lattice components of multi-dimensional points are joined by ``:``.
    """
    lines = [f"# selection={P.selection}"]
    for k in sorted(P._terms, key=lambda k: (len(k), k)):
        c = P._terms[k]
        lines.append(f"{c.real!r} {c.imag!r} " + " ".join(_fmt_index(j) for j in k))
    return "\n".join(lines) + "\n"


_IDX = re.compile(r"\(([-0-9:]+),([-+]?1)\)")


def from_text(text: str) -> PolyHamiltonian:
    selection = "torus"
    terms: dict[Key, complex] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = re.search(r"selection=(\w+)", line)
            if m:
                selection = m.group(1)
            continue
        re_s, im_s, rest = line.split(None, 2)
        key = tuple(
            ModeIndex(int(d), tuple(int(v) for v in a.split(":"))) for a, d in _IDX.findall(rest)
        )
        key = canonical(key)
        terms[key] = terms.get(key, 0j) + complex(float(re_s), float(im_s))
    return PolyHamiltonian(terms, selection)


# -- random generation (used by property suites and the bracket-check command) ------------


def random_real_poly(
    rng: np.random.Generator,
    modes: ModeSet,
    degrees: Iterable[int],
    n_terms: int = 6,
    symmetric: bool = False,
) -> PolyHamiltonian:
    """Random real zero-momentum polynomial with roughly ``n_terms`` monomials per degree."""
    signed = [ModeIndex(d, a) for d in (1, -1) for a in modes.points]
    selection = "torus" if modes.kind == "torus" else "dirichlet"
    terms: dict[Key, complex] = {}
    for ell in degrees:
        found = 0
        for _ in range(200 * n_terms):
            if found >= n_terms:
                break
            if symmetric:
                if ell % 2:
                    break
                half = ell // 2
                pick = [ModeIndex(1, modes.points[i]) for i in rng.integers(len(modes), size=half)]
                pick += [ModeIndex(-1, modes.points[i]) for i in rng.integers(len(modes), size=half)]
            else:
                pick = [signed[i] for i in rng.integers(len(signed), size=ell)]
            key = canonical(pick)
            if not admissible(key, selection) or key in terms:
                continue
            c = complex(rng.normal(), rng.normal())
            bar = conjugate_key(key)
            if bar == key:
                c = complex(c.real, 0.0) * 2
                terms[key] = c
            else:
                terms[key] = c
                terms[bar] = np.conj(c)
            found += 1
    return PolyHamiltonian(terms, selection)


def enumerate_zero_momentum(modes: ModeSet, ell: int) -> Iterable[Key]:
    """All canonical zero-momentum index tuples of length ``ell`` (small sets only)."""
    signed = sorted(ModeIndex(d, a) for d in (1, -1) for a in modes.points)
    selection = "torus" if modes.kind == "torus" else "dirichlet"
    for combo in itertools.combinations_with_replacement(signed, ell):
        if admissible(combo, selection):
            yield combo
