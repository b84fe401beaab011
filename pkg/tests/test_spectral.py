import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import eigvalsh_tridiagonal

from rtevans.evans import find_lambda
from rtevans.profile import PhysicalParams, l_eff_and_cap
from rtevans.spectral import (
    GridTooNarrowError,
    NoCrossingError,
    build_operator,
    eigenmode_diagnostics,
    gamma_spectral,
    make_xgrid,
    min_eigenvalue,
    sturm_count,
)

P = PhysicalParams(nu=2.0, g=1.0, L0=1.0)
CAP = l_eff_and_cap(P)[1]


@pytest.fixture(scope="module")
def grid10():
    return make_xgrid(P, 10.0)


def test_operator_is_symmetric(grid10):
    A = build_operator(grid10, 10.0, 0.3, P).to_dense()
    assert np.array_equal(A, A.T)


def test_sturm_count_matches_lapack(grid10, rng):
    op = build_operator(grid10, 10.0, 0.35, P)
    ev = eigvalsh_tridiagonal(op.diag, op.off)
    for shift in rng.uniform(ev[0] - 0.1, ev[0] + 2.0, size=6):
        assert sturm_count(op, shift) == int(np.sum(ev < shift))
    assert min_eigenvalue(op) == pytest.approx(ev[0], abs=1e-12)


def test_large_gamma_limit_bound(grid10):
    k = 10.0
    op = build_operator(grid10, k, 1e12, P)
    assert min_eigenvalue(op) >= 1.0 - np.max(np.abs(grid10.W0)) / k**2


def test_potential_floor(grid10):
    gam = 0.3
    pot = 1.0 - P.g / gam**2 * grid10.k0
    assert np.min(pot) == pytest.approx(1.0 - CAP**2 / gam**2, rel=1e-6)


def test_large_k_bracket():
    res = gamma_spectral(50.0, P)
    assert CAP / 2 < res.gamma < CAP
    assert res.eigenvalue_residual < 1e-9


def test_gamma_increases_toward_cap():
    gam = [gamma_spectral(k, P).gamma for k in (5.0, 10.0, 25.0, 50.0, 100.0)]
    assert all(b >= a - 1e-6 for a, b in zip(gam, gam[1:]))
    assert gam[-1] >= 0.9 * CAP


def test_lambda_over_k_approaches_l_eff():
    res = gamma_spectral(100.0, P)
    l_eff = l_eff_and_cap(P)[0]
    assert abs(res.lambda_value / 100.0 - l_eff) / l_eff <= 0.1


def test_agrees_with_evans_root():
    p = PhysicalParams(nu=2.0, g=1.0, L0=1e-2)
    k = 10.0
    lam = find_lambda(k * p.L0, p)
    g_evans = math.sqrt(p.g * k / lam)
    g_spec = gamma_spectral(k, p).gamma
    assert abs(g_spec - g_evans) / g_evans <= 1e-3


def test_grid_convergence_with_wider_domain():
    k = 10.0
    a = gamma_spectral(k, P, make_xgrid(P, k, ds=0.01)).gamma
    b = gamma_spectral(k, P, make_xgrid(P, k, ds=0.005, widen=1.25)).gamma
    assert abs(a - b) / b < 1e-4


@settings(max_examples=10)
@given(g1=st.floats(0.2, 0.38), g2=st.floats(0.2, 0.38))
def test_min_eigenvalue_increases_with_gamma(g1, g2):
    if abs(g1 - g2) < 1e-3:
        return
    lo, hi = sorted((g1, g2))
    grid = make_xgrid(P, 10.0, ds=0.04)
    e_lo = min_eigenvalue(build_operator(grid, 10.0, lo, P))
    e_hi = min_eigenvalue(build_operator(grid, 10.0, hi, P))
    assert e_lo < e_hi


def test_eigenmode_normalization_and_norms():
    res = gamma_spectral(10.0, P)
    diag = eigenmode_diagnostics(res)
    assert diag["u"] == pytest.approx(1.0, abs=1e-12)
    assert diag["u_at_zero"] > 0.0
    for key in ("du", "d2u", "sqrt_rho_u", "sqrt_rho_du"):
        assert math.isfinite(diag[key]) and diag[key] > 0.0


def test_rayleigh_ode_mismatch_is_second_order():
    k = 10.0
    m = []
    for ds in (0.02, 0.01):
        res = gamma_spectral(k, P, make_xgrid(P, k, ds=ds))
        m.append(eigenmode_diagnostics(res)["ode_mismatch"])
    assert m[1] < 1e-3
    assert m[0] / m[1] == pytest.approx(4.0, rel=0.3)


def test_diagnostic_norms_converge():
    k = 10.0
    a = eigenmode_diagnostics(gamma_spectral(k, P, make_xgrid(P, k, ds=0.01)))
    b = eigenmode_diagnostics(gamma_spectral(k, P, make_xgrid(P, k, ds=0.005)))
    for key in ("du", "d2u", "sqrt_rho_u", "sqrt_rho_du"):
        assert a[key] == pytest.approx(b[key], rel=1e-2)


def test_no_crossing_for_small_k():
    with pytest.raises(NoCrossingError):
        gamma_spectral(0.05, P)


def test_grid_too_narrow():
    with pytest.raises(GridTooNarrowError):
        make_xgrid(P, 10.0, x_min=-3.0)
