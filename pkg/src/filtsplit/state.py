"""Truncated spectral phase space.

A state ``z = (xi, eta)`` lives on a finite mode set.  Values are kept in a
flat complex array of length ``2n``: the first ``n`` entries are the ``xi``
(``delta = +1``) components, the last ``n`` the ``eta`` (``delta = -1``)
components, both ordered like ``ModeSet.points``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

Lattice = tuple[int, ...]


class ModeIndex(NamedTuple):
    """Signed spectral index ``j = (a, delta)``.

    Field order is ``(delta, a)`` so that tuple comparison gives the
    canonical ordering used for monomial keys.
    """

    delta: int
    a: Lattice

    def conjugate(self) -> "ModeIndex":
        return ModeIndex(-self.delta, self.a)

    @property
    def size(self) -> float:
        return lattice_size(self.a)


def mode(a: int | Sequence[int], delta: int) -> ModeIndex:
    """Convenience constructor accepting an int for one-dimensional lattices."""
    if delta not in (1, -1):
        raise ValueError(f"delta must be +1 or -1, got {delta}")
    return ModeIndex(int(delta), as_lattice(a))


def as_lattice(a: int | Sequence[int]) -> Lattice:
    if isinstance(a, (int, np.integer)):
        return (int(a),)
    return tuple(int(v) for v in a)


def lattice_size(a: Lattice) -> float:
    """``|a| = sqrt(max(1, sum a_i^2))``, so that ``|a| >= 1`` always."""
    return math.sqrt(max(1, sum(v * v for v in a)))


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Finite set of retained lattice points with their linear frequencies.

    ``kind`` is ``"torus"`` (points of Z^d in the ball ``|a| <= K``) or
    ``"dirichlet"`` (``a = 1..K``, d = 1).
    """

    kind: str
    d: int
    K: int
    points: tuple[Lattice, ...]
    omega: np.ndarray
    m: float
    C_omega: float
    _index: dict = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        self._index.update({a: i for i, a in enumerate(self.points)})
        self.omega.setflags(write=False)

    @classmethod
    def torus(cls, d: int, K: int) -> "ModeSet":
        """Fourier modes of T^d with ``sum a_i^2 <= K^2`` and ``omega_a = sum a_i^2``."""
        if d < 1 or K < 0:
            raise ValueError("need d >= 1 and K >= 0")
        pts = tuple(
            a for a in product(range(-K, K + 1), repeat=d) if sum(v * v for v in a) <= K * K
        )
        omega = np.array([float(sum(v * v for v in a)) for a in pts])
        return cls("torus", d, K, pts, omega, 2.0, 1.0)

    @classmethod
    def dirichlet(cls, K: int) -> "ModeSet":
        """Sine modes on (0, pi): ``a = 1..K`` and ``omega_a = a``."""
        if K < 1:
            raise ValueError("need K >= 1")
        pts = tuple((a,) for a in range(1, K + 1))
        omega = np.arange(1, K + 1, dtype=float)
        return cls("dirichlet", 1, K, pts, omega, 1.0, 1.0)

    def __len__(self) -> int:
        return len(self.points)

    def __contains__(self, a) -> bool:
        return as_lattice(a) in self._index

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ModeSet)
            and (self.kind, self.d, self.K) == (other.kind, other.d, other.K)
        )

    def __hash__(self) -> int:
        return hash((self.kind, self.d, self.K))

    def index(self, a) -> int:
        try:
            return self._index[as_lattice(a)]
        except KeyError:
            raise KeyError(f"mode {a} is not in the mode set") from None

    def position(self, j: ModeIndex) -> int:
        """Flat position of ``j`` in the state array."""
        i = self.index(j.a)
        return i if j.delta == 1 else i + len(self.points)

    def index_at(self, p: int) -> ModeIndex:
        n = len(self.points)
        return ModeIndex(1, self.points[p]) if p < n else ModeIndex(-1, self.points[p - n])

    def sizes(self) -> np.ndarray:
        """``|a|`` for every retained point."""
        return np.array([lattice_size(a) for a in self.points])

    def weights(self, s: float) -> np.ndarray:
        """``|j|^s`` over the flat layout of length ``2n``."""
        w = self.sizes() ** s
        return np.concatenate([w, w])

    def check_frequency_bound(self) -> bool:
        return bool(np.all(np.abs(self.omega) <= self.C_omega * self.sizes() ** self.m + 1e-12))


class SpectralState:
    """Complex coefficients ``z_j`` on a mode set.

    Instances are treated as immutable: every operation returns a new state.
    """

    __slots__ = ("modes", "values")

    def __init__(self, modes: ModeSet, values: np.ndarray):
        values = np.asarray(values, dtype=complex)
        if values.shape != (2 * len(modes),):
            raise ValueError(f"expected {2 * len(modes)} values, got shape {values.shape}")
        self.modes = modes
        self.values = values

    @classmethod
    def zeros(cls, modes: ModeSet) -> "SpectralState":
        return cls(modes, np.zeros(2 * len(modes), dtype=complex))

    @classmethod
    def from_dict(cls, modes: ModeSet, entries: Mapping[ModeIndex, complex]) -> "SpectralState":
        v = np.zeros(2 * len(modes), dtype=complex)
        for j, c in entries.items():
            v[modes.position(j)] = c
        return cls(modes, v)

    @property
    def xi(self) -> np.ndarray:
        return self.values[: len(self.modes)]

    @property
    def eta(self) -> np.ndarray:
        return self.values[len(self.modes):]

    def __getitem__(self, j: ModeIndex) -> complex:
        return complex(self.values[self.modes.position(j)])

    def items(self) -> Iterable[tuple[ModeIndex, complex]]:
        for p, c in enumerate(self.values):
            yield self.modes.index_at(p), complex(c)

    def copy(self) -> "SpectralState":
        return SpectralState(self.modes, self.values.copy())

    def _check(self, other: "SpectralState"):
        if other.modes != self.modes:
            raise ValueError("states live on different mode sets")

    def __add__(self, other: "SpectralState") -> "SpectralState":
        self._check(other)
        return SpectralState(self.modes, self.values + other.values)

    def __sub__(self, other: "SpectralState") -> "SpectralState":
        self._check(other)
        return SpectralState(self.modes, self.values - other.values)

    def __mul__(self, c: complex) -> "SpectralState":
        return SpectralState(self.modes, self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralState":
        return SpectralState(self.modes, -self.values)

    def __repr__(self) -> str:
        return f"SpectralState({self.modes.kind}, K={self.modes.K}, n={len(self.modes)})"


def l1s_norm(z: SpectralState, s: float = 0.0) -> float:
    """``sum_j |j|^s |z_j|``."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    return float(np.sum(z.modes.weights(s) * np.abs(z.values)))


def hs_norm(z: SpectralState, s: float = 0.0) -> float:
    """``(sum_j |j|^{2s} |z_j|^2)^{1/2}``."""
    return float(np.sqrt(np.sum(z.modes.weights(2 * s) * np.abs(z.values) ** 2)))


def is_real(z: SpectralState, tol: float = 1e-12) -> bool:
    """True when ``eta = conj(xi)`` up to ``tol`` (relative to the state size)."""
    scale = max(1.0, float(np.max(np.abs(z.values), initial=0.0)))
    return bool(np.all(np.abs(z.eta - np.conj(z.xi)) <= tol * scale))


def make_real_state(modes: ModeSet, xi: Mapping | np.ndarray) -> SpectralState:
    """Build ``z = (xi, conj(xi))`` from a map ``a -> xi_a`` (or a dense array)."""
    if isinstance(xi, Mapping):
        dense = np.zeros(len(modes), dtype=complex)
        for a, c in xi.items():
            dense[modes.index(a)] = c
    else:
        dense = np.asarray(xi, dtype=complex)
        if dense.shape != (len(modes),):
            raise ValueError("dense xi must have one entry per mode")
    return SpectralState(modes, np.concatenate([dense, np.conj(dense)]))


def symplectic_form(u: SpectralState, v: SpectralState) -> complex:
    """``omega(u, v) = i sum_a (u_xi v_eta - u_eta v_xi)``.

    With this pairing ``omega(X_H(z), v) = dH(z) v`` for the Hamiltonian
    vector fields used throughout the package.
    """
    u._check(v)
    return complex(1j * np.sum(u.xi * v.eta - u.eta * v.xi))


# -- physical space -----------------------------------------------------------


def _torus_grid_shape(modes: ModeSet, grid: int) -> tuple[int, ...]:
    return (grid,) * modes.d


def _check_grid(modes: ModeSet, grid: int):
    if grid < 2 * modes.K + 2:
        raise ValueError(f"grid {grid} too small; need at least 2K+2 = {2 * modes.K + 2}")


def _torus_slots(modes: ModeSet, grid: int) -> tuple[np.ndarray, ...]:
    pts = np.array(modes.points, dtype=int).reshape(len(modes), modes.d)
    return tuple(np.mod(pts[:, k], grid) for k in range(modes.d))


def sine_basis(modes: ModeSet, grid: int) -> tuple[np.ndarray, np.ndarray]:
    """Interior grid ``x_j = j pi / (grid + 1)`` and orthonormal sines ``sqrt(2/pi) sin(a x)``."""
    x = np.arange(1, grid + 1) * np.pi / (grid + 1)
    a = np.array([p[0] for p in modes.points], dtype=float)
    return x, np.sqrt(2.0 / np.pi) * np.sin(np.outer(x, a))


def synthesize(modes: ModeSet, coeffs: np.ndarray, grid: int) -> np.ndarray:
    """Physical values of ``sum_a c_a phi_a`` for the mode basis (no size check)."""
    if modes.kind == "torus":
        spec = np.zeros(_torus_grid_shape(modes, grid), dtype=complex)
        spec[_torus_slots(modes, grid)] = coeffs
        return np.fft.ifftn(spec) * (grid ** modes.d) * (2 * np.pi) ** (-modes.d / 2)
    _, S = sine_basis(modes, grid)
    return S @ coeffs


def analyze(modes: ModeSet, values: np.ndarray, grid: int) -> np.ndarray:
    """L^2 projection of grid values onto the retained modes."""
    if modes.kind == "torus":
        spec = np.fft.fftn(values) * (2 * np.pi / grid) ** modes.d * (2 * np.pi) ** (-modes.d / 2)
        return spec[_torus_slots(modes, grid)]
    _, S = sine_basis(modes, grid)
    return (np.pi / (grid + 1)) * (S.T @ values)


def to_physical(z: SpectralState, grid: int) -> np.ndarray:
    """Collocation values of ``psi = sum_a xi_a phi_a``.

    On the torus ``phi_a = (2 pi)^{-d/2} exp(i a.x)`` on the grid
    ``x = 2 pi k / grid``; for Dirichlet modes ``phi_a = sqrt(2/pi) sin(a x)``
    on the interior grid ``x = k pi / (grid + 1)``, ``k = 1..grid``.
    """
    _check_grid(z.modes, grid)
    return synthesize(z.modes, z.xi, grid)


def from_physical(psi: np.ndarray, modes: ModeSet) -> SpectralState:
    """Inverse of :func:`to_physical` for real states (``eta = conj(xi)``)."""
    psi = np.asarray(psi, dtype=complex)
    grid = psi.shape[0]
    _check_grid(modes, grid)
    return make_real_state(modes, analyze(modes, psi, grid))
