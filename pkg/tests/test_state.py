import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from filtsplit.state import (
    ModeIndex,
    ModeSet,
    SpectralState,
    from_physical,
    hs_norm,
    is_real,
    l1s_norm,
    make_real_state,
    mode,
    symplectic_form,
    to_physical,
)


def test_torus_ball_count():
    # lattice points with a1^2 + a2^2 <= 4
    brute = sum(1 for a in range(-2, 3) for b in range(-2, 3) if a * a + b * b <= 4)
    assert len(ModeSet.torus(2, 2)) == brute == 13
    assert len(ModeSet.torus(1, 5)) == 11


def test_dirichlet_modes():
    m = ModeSet.dirichlet(6)
    assert m.points == tuple((a,) for a in range(1, 7))
    assert np.allclose(m.omega, np.arange(1, 7))


def test_sizes_floor_at_one():
    m = ModeSet.torus(1, 3)
    assert m.sizes()[m.index((0,))] == 1.0
    assert ModeIndex(1, (0,)).size == 1.0
    assert ModeIndex(-1, (3,)).size == 3.0


def test_mode_conjugate():
    j = mode(2, 1)
    assert j.conjugate() == ModeIndex(-1, (2,))
    assert j.conjugate().conjugate() == j


def test_l1s_rejects_negative_s():
    z = SpectralState.zeros(ModeSet.torus(1, 2))
    with pytest.raises(ValueError):
        l1s_norm(z, -1.0)


def test_l1s_values():
    m = ModeSet.torus(1, 2)
    z = make_real_state(m, {(2,): 1.0, (0,): 0.5})
    # both xi and eta entries count
    assert math.isclose(l1s_norm(z, 0.0), 3.0)
    assert math.isclose(l1s_norm(z, 1.0), 2 * (2.0 + 0.5))
    assert math.isclose(hs_norm(z, 0.0), math.sqrt(2 * (1.0 + 0.25)))


@given(st.integers(0, 2**31 - 1), st.floats(0, 3))
def test_l1s_monotone_in_s(seed, s):
    rng = np.random.default_rng(seed)
    m = ModeSet.torus(1, 4)
    z = make_real_state(m, rng.normal(size=len(m)) + 1j * rng.normal(size=len(m)))
    assert l1s_norm(z, s) <= l1s_norm(z, s + 0.5) + 1e-12
    assert is_real(z)


def test_is_real_detects_violation():
    m = ModeSet.torus(1, 1)
    z = make_real_state(m, {(1,): 1.0})
    z.values[len(m)] += 0.1
    assert not is_real(z)


def test_symplectic_form_antisymmetric(rng):
    m = ModeSet.torus(1, 3)
    n = 2 * len(m)
    u = SpectralState(m, rng.normal(size=n) + 1j * rng.normal(size=n))
    v = SpectralState(m, rng.normal(size=n) + 1j * rng.normal(size=n))
    assert abs(symplectic_form(u, v) + symplectic_form(v, u)) < 1e-12


@pytest.mark.parametrize("modes", [ModeSet.torus(1, 4), ModeSet.torus(2, 3), ModeSet.dirichlet(5)])
def test_physical_round_trip(modes, rng):
    z = make_real_state(modes, rng.normal(size=len(modes)) + 1j * rng.normal(size=len(modes)))
    grid = 2 * modes.K + 4
    back = from_physical(to_physical(z, grid), modes)
    assert np.max(np.abs(back.values - z.values)) < 1e-12


def test_torus_synthesis_matches_direct_sum(rng):
    modes = ModeSet.torus(1, 3)
    xi = rng.normal(size=len(modes)) + 1j * rng.normal(size=len(modes))
    z = make_real_state(modes, xi)
    grid = 10
    x = 2 * np.pi * np.arange(grid) / grid
    direct = sum(c * np.exp(1j * a[0] * x) for a, c in zip(modes.points, z.xi)) / np.sqrt(2 * np.pi)
    assert np.allclose(to_physical(z, grid), direct, atol=1e-13)


def test_to_physical_grid_too_small():
    with pytest.raises(ValueError):
        to_physical(SpectralState.zeros(ModeSet.torus(1, 4)), 5)


def test_norm_examples():
    m = ModeSet.torus(1, 3)
    assert l1s_norm(SpectralState.zeros(m), 1.0) == 0.0
    z = SpectralState.from_dict(m, {ModeIndex(1, (2,)): 0.5})
    assert l1s_norm(z, 1.0) == pytest.approx(1.0)
    w = SpectralState.from_dict(m, {ModeIndex(1, (1,)): 3.0})
    assert hs_norm(w, 0.0) == pytest.approx(3.0) and hs_norm(w, 2.5) == pytest.approx(3.0)


def test_hs_norm_parseval(rng):
    m = ModeSet.torus(2, 2)
    z = SpectralState(m, rng.normal(size=2 * len(m)) + 1j * rng.normal(size=2 * len(m)))
    assert hs_norm(z, 0.0) ** 2 == pytest.approx(np.sum(np.abs(z.values) ** 2))


def test_make_real_state_conjugates():
    m = ModeSet.torus(1, 2)
    z = make_real_state(m, {(1,): 1j})
    assert z[ModeIndex(1, (1,))] == 1j and z[ModeIndex(-1, (1,))] == -1j
    z = make_real_state(m, {(1,): 1.0})
    assert z[ModeIndex(-1, (1,))] == 1.0


def test_physical_examples():
    m = ModeSet.torus(1, 2)
    assert np.all(to_physical(SpectralState.zeros(m), 8) == 0)
    z = make_real_state(m, {(0,): 1.0})
    assert np.allclose(to_physical(z, 8), (2 * np.pi) ** -0.5, atol=1e-15)
