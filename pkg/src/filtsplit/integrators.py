"""Split flows and their compositions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .filters import FilterSpec, LinearEigenvalues, linear_eigenvalues
from .models import ModelSpec, frequencies, nonlinear_flow
from .state import SpectralState

VARIANTS = ("lie_PA", "lie_AP", "strang")


class BlowUpError(RuntimeError):
    """Raised when a trajectory produces non-finite values."""

    def __init__(self, step: int):
        super().__init__(f"non-finite state detected at step {step}")
        self.step = step


@dataclass(frozen=True)
class SchemeConfig:
    """Model, filter, step size and composition order of one run.

    ``lie_PA`` is ``Phi_P^h o Phi_A0`` (linear flow first), ``lie_AP`` the
    reverse, ``strang`` is ``Phi_P^{h/2} o Phi_A0 o Phi_P^{h/2}``.
    """

    model: ModelSpec
    filter: FilterSpec
    h: float
    variant: str = "lie_PA"
    seed: int = 0

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")

    @property
    def modes(self):
        return frequencies(self.model)

    @property
    def lam(self) -> LinearEigenvalues:
        cached = self.__dict__.get("_lam")
        if cached is None:
            cached = linear_eigenvalues(self.filter, self.h, self.modes)
            object.__setattr__(self, "_lam", cached)
        return cached


def linear_flow(lam: LinearEigenvalues, z: SpectralState, sign: float = 1.0) -> SpectralState:
    """``xi_a -> exp(-i lambda_a) xi_a`` and ``eta_a -> exp(+i lambda_a) eta_a``.

    ``sign=-1`` gives the inverse map.
    """
    return SpectralState(z.modes, z.values * np.exp(-1j * sign * lam.flat))


def step(cfg: SchemeConfig, z: SpectralState) -> SpectralState:
    """One step of the configured composition."""
    lam, h, m = cfg.lam, cfg.h, cfg.model
    if cfg.variant == "lie_PA":
        return nonlinear_flow(m, linear_flow(lam, z), h)
    if cfg.variant == "lie_AP":
        return linear_flow(lam, nonlinear_flow(m, z, h))
    half = nonlinear_flow(m, z, h / 2)
    return nonlinear_flow(m, linear_flow(lam, half), h / 2)


def inverse_step(cfg: SchemeConfig, z: SpectralState) -> SpectralState:
    """Exact inverse of :func:`step` (sub-flows run backwards in reverse order)."""
    lam, h, m = cfg.lam, cfg.h, cfg.model
    if cfg.variant == "lie_PA":
        return linear_flow(lam, nonlinear_flow(m, z, -h), sign=-1.0)
    if cfg.variant == "lie_AP":
        return nonlinear_flow(m, linear_flow(lam, z, sign=-1.0), -h)
    half = nonlinear_flow(m, z, -h / 2)
    return nonlinear_flow(m, linear_flow(lam, half, sign=-1.0), -h / 2)


Observer = Callable[[SpectralState], dict]


def trajectory(
    cfg: SchemeConfig,
    z0: SpectralState,
    nsteps: int,
    observers: Sequence[Observer] = (),
    record_stride: int = 100,
) -> Iterator[dict]:
    """Iterate the scheme, yielding one observation every ``record_stride`` steps.

    Each observation has keys ``step``, ``time`` and ``state`` plus whatever the
    observers return. The last step is always recorded.
    """
    if nsteps < 0:
        raise ValueError("nsteps must be nonnegative")
    if record_stride < 1:
        raise ValueError("record_stride must be positive")

    def observe(n, z):
        rec = {"step": n, "time": n * cfg.h, "state": z}
        for obs in observers:
            rec.update(obs(z))
        return rec

    z = z0
    yield observe(0, z)
    for n in range(1, nsteps + 1):
        z = step(cfg, z)
        if not np.all(np.isfinite(z.values)):
            raise BlowUpError(n)
        if n % record_stride == 0 or n == nsteps:
            yield observe(n, z)


def mode_split_energies(z: SpectralState, threshold: float, m: float) -> tuple[float, float]:
    """``low = sum_{|j|<thr} |j|^m |z_j|^2`` and ``high = sum_{|j|>=thr} |z_j|^2``."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    sizes = np.concatenate([z.modes.sizes()] * 2)
    p = np.abs(z.values) ** 2
    lowmask = sizes < threshold
    low = float(np.sum(sizes[lowmask] ** m * p[lowmask]))
    high = float(np.sum(p[~lowmask]))
    return low, high
