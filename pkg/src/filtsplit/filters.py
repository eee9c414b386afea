"""Filter functions for the linear part and the diagonal operator they define."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .state import Lattice, ModeSet

KINDS = ("identity", "identity_cfl", "midpoint", "midpoint_cfl", "new_I", "new_II")
CFL_KINDS = ("identity_cfl", "midpoint_cfl")


@dataclass(frozen=True)
class FilterSpec:
    """One of the six filter kinds.

    ``beta`` is the exponent used by ``new_I``/``new_II``; ``cfl_c`` the cutoff
    threshold of the CFL kinds (modes with ``h omega >= c`` get phase 0).
    """

    kind: str
    beta: float = 0.0
    cfl_c: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}; expected one of {KINDS}")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        if self.cfl_c is not None and self.cfl_c <= 0:
            raise ValueError("cfl_c must be positive")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "beta": self.beta, "cfl_c": self.cfl_c}

    @classmethod
    def from_dict(cls, d: dict) -> "FilterSpec":
        unknown = set(d) - {"kind", "beta", "cfl_c"}
        if unknown:
            raise ValueError(f"unknown filter keys: {sorted(unknown)}")
        return cls(d["kind"], float(d.get("beta", 0.0)), d.get("cfl_c"))


def eval_filter(spec: FilterSpec, h: float, x):
    """``alpha_h(x)`` for scalar or array ``x >= 0``."""
    if h <= 0:
        raise ValueError("h must be positive")
    if spec.kind in CFL_KINDS and spec.cfl_c is None:
        raise ValueError(f"filter {spec.kind} needs cfl_c")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("filters are defined for x >= 0 only")
    k = spec.kind
    if k in ("identity", "identity_cfl"):
        out = xa.copy()
    elif k in ("midpoint", "midpoint_cfl"):
        out = 2.0 * np.arctan(xa / 2.0)
    elif k == "new_I":
        hb = h ** spec.beta
        out = hb * np.arctan(xa / hb)
    else:
        hb = h ** spec.beta
        y = xa / hb
        # (x + x^2/h^b) / (1 + x/h^b + x^2/h^2b) written in y = x/h^b
        out = hb * (y + y * y) / (1.0 + y + y * y)
    if k in CFL_KINDS:
        out = np.where(xa < spec.cfl_c, out, 0.0)
    return float(out) if np.ndim(x) == 0 else out


def inverse_base(kind: str, y: float) -> float:
    """Inverse of the uncut filter base: ``identity`` or ``midpoint`` (``2 tan(y/2)``)."""
    if kind == "identity":
        return y
    if kind == "midpoint":
        return math.inf if y >= math.pi else 2.0 * math.tan(y / 2.0)
    raise ValueError(f"no inverse base for {kind!r}")


@dataclass(frozen=True, eq=False)
class LinearEigenvalues:
    """Phases ``lambda_a = alpha_h(h omega_a)`` aligned with ``modes.points``."""

    values: np.ndarray
    h: float
    modes: ModeSet

    def __post_init__(self):
        self.values.setflags(write=False)
        object.__setattr__(self, "_map", dict(zip(self.modes.points, self.values.tolist())))

    def of(self, a: Lattice) -> float:
        return self._map[a]

    @property
    def as_map(self) -> dict:
        return self._map

    @property
    def flat(self) -> np.ndarray:
        """Signed phases ``delta * lambda_a`` on the flat state layout."""
        return np.concatenate([self.values, -self.values])

    @classmethod
    def from_values(cls, modes: ModeSet, values, h: float = 1.0) -> "LinearEigenvalues":
        return cls(np.array(values, dtype=float), h, modes)


def linear_eigenvalues(spec: FilterSpec, h: float, modes: ModeSet) -> LinearEigenvalues:
    return LinearEigenvalues(np.asarray(eval_filter(spec, h, h * modes.omega), dtype=float), h, modes)


def defect_exponents(spec: FilterSpec) -> tuple[float, float]:
    """Analytic ``(sigma, gamma)`` with ``|alpha_h(x) - x| <= C h^{-sigma} x^gamma``."""
    if spec.kind in ("identity", "midpoint", "identity_cfl", "midpoint_cfl"):
        return 0.0, 3.0
    return 2.0 * spec.beta, 3.0


def filter_defect_bound(spec: FilterSpec, h: float, xs) -> tuple[float, float, float]:
    """Empirical ``C = max |alpha_h(x) - x| h^sigma / x^gamma`` over positive ``xs``.

    Returns ``(C_emp, sigma, gamma)``.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0 or np.any(xs <= 0):
        raise ValueError("xs must be a nonempty list of positive reals")
    sigma, gamma = defect_exponents(spec)
    defect = np.abs(eval_filter(spec, h, xs) - xs)
    return float(np.max(defect * h ** sigma / xs ** gamma)), sigma, gamma


def sup_lambda(spec: FilterSpec, h: float) -> float:
    """Supremum of ``|alpha_h|`` over ``x >= 0``.

    For ``new_II``, writing ``x = h^beta y`` gives
    ``alpha_h = h^beta (1 - 1/(1 + y + y^2))``, increasing to ``h^beta``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    k = spec.kind
    if k == "identity":
        return math.inf
    if k == "identity_cfl":
        return float(spec.cfl_c)
    if k == "midpoint":
        return math.pi
    if k == "midpoint_cfl":
        return 2.0 * math.atan(spec.cfl_c / 2.0)
    if k == "new_I":
        return math.pi / 2.0 * h ** spec.beta
    return h ** spec.beta
