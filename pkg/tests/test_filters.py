import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize_scalar

from filtsplit.filters import (
    FilterSpec,
    KINDS,
    defect_exponents,
    eval_filter,
    filter_defect_bound,
    inverse_base,
    linear_eigenvalues,
    sup_lambda,
)
from filtsplit.state import ModeSet

# below 1e-2 the defect alpha(x) - x is lost to cancellation in double precision
XS = np.logspace(-2, 3, 400)


def _spec(kind):
    if kind in ("new_I", "new_II"):
        return FilterSpec(kind, beta=0.5)
    if kind.endswith("_cfl"):
        return FilterSpec(kind, cfl_c=1.0)
    return FilterSpec(kind)


@pytest.mark.parametrize("kind", KINDS)
def test_filter_is_odd_order_perturbation_of_identity(kind):
    # alpha(x) = x + O(x^3) near 0
    spec = _spec(kind)
    x = np.array([1e-6, 2e-6])
    assert np.all(np.abs(eval_filter(spec, 0.01, x) - x) <= 1e-8 * x)


@pytest.mark.parametrize("kind", KINDS)
def test_filter_nonnegative_and_monotone_below_cut(kind):
    spec = _spec(kind)
    vals = eval_filter(spec, 0.01, XS)
    assert np.all(vals >= 0)
    keep = XS < 1.0 if kind.endswith("_cfl") else np.ones_like(XS, bool)
    assert np.all(np.diff(vals[keep]) >= -1e-15)


def test_midpoint_closed_form():
    x = np.linspace(0, 50, 101)
    assert np.allclose(eval_filter(FilterSpec("midpoint"), 0.1, x), 2 * np.arctan(x / 2))


def test_cfl_cut_is_strict():
    spec = FilterSpec("identity_cfl", cfl_c=0.5)
    assert eval_filter(spec, 0.1, 0.4999) == pytest.approx(0.4999)
    assert eval_filter(spec, 0.1, 0.5) == 0.0


def test_filter_errors():
    with pytest.raises(ValueError):
        eval_filter(FilterSpec("midpoint"), 0.1, -1.0)
    with pytest.raises(ValueError):
        eval_filter(FilterSpec("midpoint_cfl"), 0.1, 1.0)
    with pytest.raises(ValueError):
        FilterSpec("bogus")
    with pytest.raises(ValueError):
        FilterSpec("new_I", beta=1.0)
    with pytest.raises(ValueError):
        FilterSpec.from_dict({"kind": "midpoint", "colour": 1})


def test_spec_round_trip():
    s = FilterSpec("midpoint_cfl", cfl_c=0.7)
    assert FilterSpec.from_dict(s.to_dict()) == s


@pytest.mark.parametrize("h", [1e-1, 1e-2, 1e-3])
def test_midpoint_defect_bound(h):
    C, sigma, gamma = filter_defect_bound(FilterSpec("midpoint"), h, XS)
    assert (sigma, gamma) == (0.0, 3.0)
    assert C <= (1 / 12) * (1 + 1e-9)


@pytest.mark.parametrize("h", [1e-1, 1e-2, 1e-3])
def test_new_I_defect_bound(h):
    C, sigma, gamma = filter_defect_bound(FilterSpec("new_I", beta=0.5), h, XS)
    assert sigma == 1.0
    assert C <= (1 / 3) * (1 + 1e-9)


def test_new_II_defect_has_finite_constant():
    spec = FilterSpec("new_II", beta=0.5)
    C1, *_ = filter_defect_bound(spec, 1e-2, XS)
    C2, *_ = filter_defect_bound(spec, 1e-4, XS)
    assert np.isfinite(C1) and C2 <= 2 * C1
    assert defect_exponents(spec) == (1.0, 3.0)


@pytest.mark.parametrize("beta", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("h", [0.3, 0.01])
def test_new_II_sup_matches_numerical_maximum(beta, h):
    spec = FilterSpec("new_II", beta=beta)
    grid = eval_filter(spec, h, np.logspace(-8, 12, 20001))
    assert np.max(grid) <= sup_lambda(spec, h) * (1 + 1e-12)
    assert np.max(grid) >= sup_lambda(spec, h) * (1 - 1e-6)
    # the supremum is not attained: the function is increasing
    res = minimize_scalar(lambda t: -eval_filter(spec, h, math.exp(t)), bounds=(-5, 30), method="bounded")
    assert -res.fun <= sup_lambda(spec, h) * (1 + 1e-14)


@pytest.mark.parametrize("kind,expect", [("identity", math.inf), ("midpoint", math.pi)])
def test_sup_simple(kind, expect):
    assert sup_lambda(FilterSpec(kind), 0.1) == expect


def test_sup_new_I():
    assert sup_lambda(FilterSpec("new_I", beta=0.5), 0.04) == pytest.approx(0.2 * math.pi / 2)


@given(st.floats(1e-6, math.pi - 1e-6))
def test_inverse_base_inverts_midpoint(y):
    x = inverse_base("midpoint", y)
    assert eval_filter(FilterSpec("midpoint"), 1.0, x) == pytest.approx(y, rel=1e-12)


def test_inverse_base_at_pi():
    assert inverse_base("midpoint", math.pi) == math.inf


def test_linear_eigenvalues():
    modes = ModeSet.torus(1, 3)
    lam = linear_eigenvalues(FilterSpec("identity"), 0.1, modes)
    assert lam.of((3,)) == pytest.approx(0.9)
    assert lam.flat.shape == (2 * len(modes),)
    assert np.allclose(lam.flat[len(modes):], -lam.values)


def test_filter_examples():
    mid = FilterSpec("midpoint")
    assert eval_filter(mid, 0.1, 0.0) == 0.0
    assert eval_filter(mid, 0.1, 2.0) == pytest.approx(math.pi / 2)
    assert abs(eval_filter(mid, 0.1, 0.1) - 0.1) <= 0.1 ** 3 / 12
    h = 0.04
    assert eval_filter(FilterSpec("new_I", beta=0.5), h, 1e6) <= math.pi / 2 * math.sqrt(h)
    C, *_ = filter_defect_bound(FilterSpec("identity"), 0.1, XS)
    assert C == 0.0
    C, *_ = filter_defect_bound(FilterSpec("new_I", beta=0.5), 0.01, np.linspace(1e-2, 10, 1000))
    assert C <= 1 / 3


def test_eigenvalue_examples():
    modes = ModeSet.torus(1, 8)
    h = 0.05
    lam = linear_eigenvalues(FilterSpec("identity"), h, modes)
    assert np.allclose(lam.values, h * modes.omega)
    cut = linear_eigenvalues(FilterSpec("identity_cfl", cfl_c=1.0), h, modes)
    assert np.all(cut.values[h * modes.omega >= 1.0] == 0)
    n1 = linear_eigenvalues(FilterSpec("new_I", beta=0.5), h, modes)
    assert np.all(np.abs(n1.values) <= math.pi / 2 * math.sqrt(h))


def test_sup_cfl():
    assert sup_lambda(FilterSpec("identity_cfl", cfl_c=1.57), 0.1) == 1.57
