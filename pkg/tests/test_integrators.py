import numpy as np
import pytest
from hypothesis import given, strategies as st

from filtsplit.filters import FilterSpec
from filtsplit.integrators import (
    BlowUpError,
    SchemeConfig,
    VARIANTS,
    inverse_step,
    linear_flow,
    mode_split_energies,
    step,
    trajectory,
)
from filtsplit.models import ModelSpec, frequencies, nonlinear_flow
from filtsplit.state import l1s_norm, make_real_state, is_real


def _state(modes, rng, scale=0.3):
    return make_real_state(modes, scale * (rng.normal(size=len(modes)) + 1j * rng.normal(size=len(modes))))


@pytest.fixture
def cfg():
    return SchemeConfig(ModelSpec.cubic_nls(6), FilterSpec("midpoint"), 0.05)


@given(st.integers(0, 10**6), st.floats(0, 3))
def test_linear_flow_is_l1s_isometry(seed, s):
    rng = np.random.default_rng(seed)
    c = SchemeConfig(ModelSpec.cubic_nls(5), FilterSpec("new_I", beta=0.5), 0.01)
    z = _state(c.modes, rng)
    out = linear_flow(c.lam, z)
    assert abs(l1s_norm(out, s) - l1s_norm(z, s)) <= 1e-13 * max(1.0, l1s_norm(z, s))
    assert is_real(out)


def test_linear_flow_sign_convention(cfg):
    modes = cfg.modes
    z = make_real_state(modes, {(2,): 1.0})
    out = linear_flow(cfg.lam, z)
    lam2 = cfg.lam.of((2,))
    assert out.xi[modes.index((2,))] == pytest.approx(np.exp(-1j * lam2))
    assert out.eta[modes.index((2,))] == pytest.approx(np.exp(1j * lam2))


@pytest.mark.parametrize("variant", VARIANTS)
def test_inverse_step(variant, rng):
    c = SchemeConfig(ModelSpec.cubic_nls(5), FilterSpec("midpoint"), 0.1, variant)
    z = _state(c.modes, rng)
    assert np.max(np.abs(inverse_step(c, step(c, z)).values - z.values)) < 1e-12


def test_variant_composition_order(rng):
    m = ModelSpec.cubic_nls(4)
    f = FilterSpec("identity")
    pa = SchemeConfig(m, f, 0.1, "lie_PA")
    z = _state(pa.modes, rng)
    expect = nonlinear_flow(m, linear_flow(pa.lam, z), 0.1)
    assert np.allclose(step(pa, z).values, expect.values, atol=1e-15)
    ap = SchemeConfig(m, f, 0.1, "lie_AP")
    expect = linear_flow(ap.lam, nonlinear_flow(m, z, 0.1))
    assert np.allclose(step(ap, z).values, expect.values, atol=1e-15)


def test_zero_nonlinearity_is_linear_flow(rng):
    m = ModelSpec("nls_torus", 4, 1, (((2, 2), 0.0),))
    c = SchemeConfig(m, FilterSpec("midpoint"), 0.1)
    z = _state(c.modes, rng)
    assert np.allclose(step(c, z).values, linear_flow(c.lam, z).values, atol=1e-15)


def test_strang_is_second_order(rng):
    # local error vs a fine reference: the one-step defect scales like h^3
    m = ModelSpec.cubic_nls(3)
    modes = frequencies(m)
    z = _state(modes, rng, 0.5)

    def run(h, n, variant):
        c = SchemeConfig(m, FilterSpec("identity"), h, variant)
        y = z
        for _ in range(n):
            y = step(c, y)
        return y

    ref = run(1 / 1024, 256, "strang")
    e1 = l1s_norm(run(1 / 32, 8, "strang") - ref)
    e2 = l1s_norm(run(1 / 64, 16, "strang") - ref)
    assert 3.5 < e1 / e2 < 4.5


def test_trajectory_records(cfg, rng):
    z = _state(cfg.modes, rng)
    obs = list(trajectory(cfg, z, 25, observers=[lambda s: {"l1": l1s_norm(s)}], record_stride=10))
    assert [o["step"] for o in obs] == [0, 10, 20, 25]
    assert obs[-1]["time"] == pytest.approx(25 * cfg.h)
    assert "l1" in obs[0]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_trajectory_blowup(cfg, rng):
    z = _state(cfg.modes, rng)
    z.values[0] = np.inf
    with pytest.raises(BlowUpError):
        list(trajectory(cfg, z, 3))


def test_scheme_validation():
    m = ModelSpec.cubic_nls(2)
    with pytest.raises(ValueError):
        SchemeConfig(m, FilterSpec("midpoint"), 0.0)
    with pytest.raises(ValueError):
        SchemeConfig(m, FilterSpec("midpoint"), 0.1, "yoshida")


def test_mode_split(rng):
    modes = frequencies(ModelSpec.cubic_nls(6))
    z = make_real_state(modes, {(1,): 1.0, (5,): 0.5})
    low, high = mode_split_energies(z, 3.0, 2)
    assert low == pytest.approx(2 * 1.0)
    assert high == pytest.approx(2 * 0.25)
    low, high = mode_split_energies(z, 1e9, 2)
    assert high == 0.0
    with pytest.raises(ValueError):
        mode_split_energies(z, 0.0, 2)


def test_linear_flow_examples():
    modes = frequencies(ModelSpec.cubic_nls(3))
    z = make_real_state(modes, {(1,): 0.4 + 0.1j, (2,): 1.0})
    from filtsplit.filters import LinearEigenvalues

    zero = LinearEigenvalues.from_values(modes, np.zeros(len(modes)))
    assert np.array_equal(linear_flow(zero, z).values, z.values)
    pi = LinearEigenvalues.from_values(modes, np.full(len(modes), np.pi))
    assert np.allclose(linear_flow(pi, z).xi, -z.xi, atol=1e-15)


def test_zero_eigenvalues_step_is_nonlinear_flow(rng):
    m = ModelSpec.cubic_nls(4)
    c = SchemeConfig(m, FilterSpec("identity_cfl", cfl_c=1e-9), 0.1)
    z = _state(c.modes, rng)
    assert np.array_equal(step(c, z).values, nonlinear_flow(m, z, 0.1).values)


def test_adjoint_round_trip(rng):
    # lie_PA at h followed by lie_AP at -h, with the linear phases reversed
    m = ModelSpec.cubic_nls(5)
    c = SchemeConfig(m, FilterSpec("midpoint"), 0.05)
    z = _state(c.modes, rng, 0.2)
    y = step(c, z)
    back = linear_flow(c.lam, nonlinear_flow(m, y, -0.05), sign=-1.0)
    assert np.max(np.abs(back.values - z.values)) < 1e-10


def test_trajectory_without_nonlinearity_keeps_moduli(rng):
    m = ModelSpec("nls_torus", 4, 1, (((2, 2), 0.0),))
    c = SchemeConfig(m, FilterSpec("midpoint"), 0.1)
    z = _state(c.modes, rng)
    only = list(trajectory(c, z, 0))
    assert len(only) == 1 and only[0]["state"] is z
    for obs in trajectory(c, z, 50, record_stride=10):
        assert np.allclose(np.abs(obs["state"].values), np.abs(z.values), atol=1e-15)


def test_mode_split_examples(rng):
    from filtsplit.state import SpectralState, hs_norm

    modes = frequencies(ModelSpec.cubic_nls(6))
    assert mode_split_energies(SpectralState.zeros(modes), 2.0, 2) == (0.0, 0.0)
    z = _state(modes, rng)
    low, high = mode_split_energies(z, 3.5, 2)
    assert low <= hs_norm(z, 1.0) ** 2 + 1e-15


def test_consistency_order_of_lie_step(rng):
    """One Lie step vs. an accurate flow of H: local error O(h^2) for smooth data."""
    from filtsplit.filters import LinearEigenvalues
    from filtsplit.models import expand_nonlinearity
    from filtsplit.modified import ModifiedHamiltonian, modified_flow

    m = ModelSpec.cubic_nls(6, flow_tol=1e-15)
    modes = frequencies(m)
    a = np.abs([p[0] for p in modes.points])
    z = make_real_state(modes, 0.8 * (1 + a) ** -6.0 * np.exp(2j * np.pi * rng.random(len(modes))))
    P = expand_nonlinearity(m)
    hs = [2.0 ** -k for k in range(4, 9)]
    errs = []
    for h in hs:
        c = SchemeConfig(m, FilterSpec("midpoint"), h)
        # A_0 = h H_0 and Z_1 = P: the flow of this "modified" Hamiltonian is the exact flow of H
        H = ModifiedHamiltonian([LinearEigenvalues(h * modes.omega, h, modes), P], 1, h)
        errs.append(l1s_norm(step(c, z) - modified_flow(H, z, h, tol=1e-15)))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 1.7 <= slope <= 2.3
