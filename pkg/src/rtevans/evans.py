"""Evans function of the Rayleigh equation, its root lambda(eps) and dispersion rows.

With the dense-side branch ``(U+, V+)`` and the light-side pair scaled as
``e^t u``, ``e^t w`` (``t = -eps y``) the Wronskian combination

    Ev(lam, eps) = xi U+ (e^t w) - V+ (e^t u)

is independent of the matching point.  It is evaluated at five points spread
over ``t in [1/(2 nu R), 3/(4 nu R)]`` with ``R = 15/4``; their spread is the
self-consistency diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from .lowdense import (
    T0_DEFAULT,
    NonContractionError,
    _outer,
    _ref,
    hypergeom_U0,
    make_grid,
    reconstruct_FG,
    volterra_g,
    apply_R,
    _kernel,
)
from .overdense import R_UNIFORM, BranchError, ModeContext, solve_plus
from .profile import PhysicalParams, get_profile, k0_max_scaled, l_eff_and_cap, _log_xi
from .specfun import gamma_fn

__all__ = [
    "EvansEval",
    "DispersionRow",
    "RootError",
    "InvalidEvaluation",
    "matching_points",
    "evans",
    "evans_value",
    "evans_limit",
    "b0_zero",
    "c0_one",
    "c0_one_closed_form",
    "b0_first_order",
    "second_order_coefficient",
    "r0_function",
    "r0_limit",
    "find_lambda",
    "lambda_asymptotic",
    "dispersion",
    "expansion_fit",
    "b0_matched",
    "SPREAD_TOL",
]

SPREAD_TOL = 1e-6
N_MATCH = 5


class RootError(RuntimeError):
    """No sign change of the Evans function in the search bracket."""


class InvalidEvaluation(RuntimeError):
    """An Evans evaluation failed its matching-point consistency check."""


@dataclass(frozen=True)
class EvansEval:
    """One Evans-function evaluation.

    Attributes
    ----------
    value : float
        Mean over the matching points.
    point_values : ndarray
        Value at each matching point.
    spread : float
        ``(max - min)`` of the point values over the size of the two cancelling
        terms, so it stays meaningful near a root.
    valid : bool
        ``spread <= SPREAD_TOL``.
    """

    lam: float
    epsilon: float
    value: float
    point_values: np.ndarray = field(repr=False)
    t_points: np.ndarray = field(repr=False)
    spread: float
    valid: bool


def matching_points(nu: float, n: int = N_MATCH) -> np.ndarray:
    """Equispaced ``t`` in ``[1/(2 nu R), 3/(4 nu R)]``."""
    return np.linspace(1.0 / (2.0 * nu * R_UNIFORM), 3.0 / (4.0 * nu * R_UNIFORM), n)


def _grid_for(nu: float, t0: float | None = None):
    t_first = matching_points(nu)[0]
    return make_grid(min(t0 if t0 is not None else T0_DEFAULT, t_first))


def evans_limit(lam: float, nu: float) -> float:
    """``Ev(lam, 0) = -(lam - 1) U0(0)`` from the hypergeometric branch alone."""
    return -(lam - 1.0) * hypergeom_U0(lam, nu, 0.0)[0]


def evans(ctx: ModeContext, params: PhysicalParams, *, t0: float | None = None) -> EvansEval:
    """Evaluate ``Ev(lam, eps)`` at the matching points."""
    nu, eps, lam = params.nu, ctx.epsilon, ctx.lam
    t_pts = matching_points(nu)
    if eps == 0.0:
        v = evans_limit(lam, nu)
        return EvansEval(lam, eps, v, np.full(t_pts.shape, v), t_pts, 0.0, True)
    grid = _grid_for(nu, t0)
    minus = reconstruct_FG(volterra_g(lam, eps, grid, nu=nu))
    eU, eW = minus.scaled_UW(t_pts)
    x_pts = get_profile(nu).logit_of_y(-t_pts / eps)
    plus = solve_plus(ctx, params, x_left=float(np.min(x_pts)))
    Up, Vp = plus.at_logit(x_pts)
    xi = np.exp(_log_xi(x_pts))
    first = xi * Up * eW
    second = Vp * eU
    vals = first - second
    scale = float(np.max(np.abs(first) + np.abs(second)))
    spread = float((vals.max() - vals.min()) / scale) if scale > 0 else 0.0
    return EvansEval(lam, eps, float(vals.mean()), vals, t_pts, spread, spread <= SPREAD_TOL)


def evans_value(lam: float, eps: float, nu: float, *, strict: bool = True) -> float:
    """Scalar ``Ev(lam, eps)``; raises :class:`InvalidEvaluation` on a failed spread check."""
    params = PhysicalParams(nu=nu)
    ev = evans(ModeContext.scaled(eps, lam), params)
    if strict and not ev.valid:
        raise InvalidEvaluation(f"spread {ev.spread:.2e} at lam={lam}, eps={eps}")
    return ev.value


# expansion constants -----------------------------------------------------------
def b0_zero(nu: float) -> tuple[float, float]:
    """``B0(0)`` as ``(quadrature, closed form)``: ``-2 int s**(1/nu) e^{-2s}`` and ``-2**(-1/nu) Gamma(1+1/nu)``."""
    val, _ = integrate.quad(lambda s: s ** (1.0 / nu) * math.exp(-2.0 * s), 0.0, math.inf,
                            epsabs=1e-14, epsrel=1e-13, limit=200)
    return -2.0 * val, -(2.0 ** (-1.0 / nu)) * gamma_fn(1.0 + 1.0 / nu)


def _ktilde(nu: float, t0: float):
    """``K~(t) = 1/2 int_t^inf tau R(1)`` at ``lam = 1``, ``eps = 0`` on a fine grid."""
    grid = make_grid(t0)
    ker = _kernel(float(nu), 0.0, grid)
    R, _ = apply_R(np.ones(grid.nodes.shape), 1.0, ker)
    f = ker.tau * R
    _, _, _, _, _, _, right = _ref(grid.order)
    tail = grid.t_max * float(right @ f[-1])
    K, _ = _outer(f, grid, tail)
    return grid, 0.5 * K


def r0_function(nu: float, t, t0: float = 1e-12):
    """``R0(t) = ln t/(2 nu) - K~(t) - B0(0) t**(-1/nu) / 2``."""
    grid, K = _ktilde(nu, t0)
    b0 = b0_zero(nu)[1]
    t = np.asarray(t, dtype=float)
    return np.log(t) / (2.0 * nu) - grid.interp(K, t) - 0.5 * b0 * t ** (-1.0 / nu)


def r0_limit(nu: float, t0: float = 1e-12) -> tuple[float, float]:
    """``lim_{t->0} R0`` by a least-squares fit ``L + a t**(1-1/nu) + b t``.

    Returns ``(L, fit residual)``; raises if the fit does not stabilize.
    """
    t = np.geomspace(1e-10, 1e-5, 12)
    r = r0_function(nu, t, t0)
    A = np.column_stack([np.ones_like(t), t ** (1.0 - 1.0 / nu), t])
    coef, *_ = np.linalg.lstsq(A, r, rcond=None)
    resid = float(np.max(np.abs(A @ coef - r)))
    if not np.isfinite(coef[0]) or resid > 1e-8:
        raise ArithmeticError(f"R0(t) does not stabilize as t -> 0 (fit residual {resid:.2e})")
    return float(coef[0]), resid


def c0_one(nu: float, t0: float = 1e-12) -> dict:
    """Second-order constant ``C0(1, 0)`` by its five-integral representation.

    Returns the five integrals, their sum and the ``R0`` limit used for the
    small-``t`` closure.
    """
    q = dict(epsabs=1e-14, epsrel=1e-12, limit=400)
    b0 = b0_zero(nu)[1]
    i1, _ = integrate.quad(lambda s: s ** (1.0 / nu) * math.exp(-2.0 * s), 0.0, math.inf, **q)
    # ln s e^{-2s}: split at 1 so each piece is smooth after the log endpoint
    la, _ = integrate.quad(lambda s: math.log(s) * math.exp(-2.0 * s), 0.0, 1.0, **q)
    lb, _ = integrate.quad(lambda s: math.log(s) * math.exp(-2.0 * s), 1.0, math.inf, **q)
    i2 = -(2.0 / nu) * (la + lb)
    ein, _ = integrate.quad(lambda s: -math.expm1(-2.0 * s) / s, 0.0, 1.0, **q)
    i4 = b0 / (2.0 * nu) * ein

    grid, K = _ktilde(nu, t0)
    x, w, *_ = _ref(grid.order)
    nodes = grid.nodes
    half = 0.5 * np.diff(grid.edges)[:, None]
    weights = half * w[None, :]
    c = 1.0 / nu
    # third integral over [1, t_max]; beyond t_max K~ ~ 1/t and e^{-2s} kills the rest
    far = nodes >= 1.0
    f3 = nodes ** (c - 1.0) * np.exp(-2.0 * nodes) * K
    i3 = c * float(np.sum((weights * f3)[far]))
    # fifth integral: ln s/(2 nu) - R0(s) = K~(s) + B0(0) s**(-1/nu)/2
    near = nodes <= 1.0
    h = K + 0.5 * b0 * nodes ** (-c)
    f5 = nodes ** (c - 1.0) * np.exp(-2.0 * nodes) * h
    body = float(np.sum((weights * f5)[near]))
    L, _ = r0_limit(nu, t0)
    a = grid.t0
    # int_0^a s**(c-1) (ln s/(2 nu) - L) ds, e^{-2s} ~ 1 there
    head = a**c * (math.log(a) / c - 1.0 / c**2) / (2.0 * nu) - L * a**c / c
    i5 = c * (body + head)
    total = i1 + i2 + i3 + i4 + i5
    return {"terms": (i1, i2, i3, i4, i5), "value": total, "r0_limit": L, "b0": b0}


def c0_one_closed_form(nu: float) -> float:
    """``-d/dlam [2**(-(lam+1)/(2nu)) C0(lam)]`` at ``lam = 1``, i.e. half the lam-curvature of ``Ev(lam, 0)``."""
    euler = 0.57721566490153286061
    return 2.0 ** (-1.0 / nu) * gamma_fn(1.0 + 1.0 / nu) * (euler + math.log(2.0)) / (2.0 * nu)


def b0_first_order(nu: float) -> float:
    """Coefficient ``b1`` of ``B0(eps) = B0(0) + b1 eps**(1/nu) + ...``.

    ``b1 = nu**(-1/nu) (1/(nu - 1) + 2 lim R0)``; confirmed against a fit of the
    differenced ``dEv/dlam`` at ``lam = 1`` for nu in {1.5, 2, 3, 5}.
    """
    L, _ = r0_limit(nu)
    return nu ** (-1.0 / nu) * (1.0 / (nu - 1.0) + 2.0 * L)


def second_order_coefficient(nu: float, c0: float, b1: float | None = None) -> float:
    """Coefficient of ``eps**(2/nu)`` in ``lam(eps) - 1`` predicted from ``B0(eps)`` and ``C0(1, 0)``.

    Expands ``lam - 1 = -Ev1/B0(eps) - C0 Ev1**2 / B0(0)**3`` with
    ``Ev1 = 2 (eps/nu)**(1/nu)``.
    """
    b0 = b0_zero(nu)[1]
    if b1 is None:
        b1 = b0_first_order(nu)
    return 2.0 * nu ** (-1.0 / nu) * b1 / b0**2 - 4.0 * nu ** (-2.0 / nu) * c0 / b0**3


# root finding -------------------------------------------------------------------
def lambda_asymptotic(eps: float, nu: float) -> float:
    """First-order root ``1 + 2 (2 eps/nu)**(1/nu) / Gamma(1 + 1/nu)``."""
    return 1.0 + 2.0 * (2.0 * eps / nu) ** (1.0 / nu) / gamma_fn(1.0 + 1.0 / nu)


def find_lambda(
    epsilon: float,
    params: PhysicalParams,
    bracket: tuple[float, float] | None = None,
    *,
    xtol: float = 1e-12,
    lam_max: float | None = None,
) -> float:
    """Zero of ``lam -> Ev(lam, eps)`` by bisection then one secant step.

    Without a bracket the search starts around the first-order root and widens
    geometrically inside ``[1/2, lam_max]``; the default ``lam_max`` is
    ``max(6, 3 eps/max k0)``, since admissible roots satisfy ``lam >= eps/max k0``.
    """
    nu = params.nu
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    if lam_max is None:
        lam_max = max(6.0, 3.0 * epsilon / k0_max_scaled(nu))

    def ev(lam):
        e = evans(ModeContext.scaled(epsilon, lam), params)
        if not e.valid:
            raise InvalidEvaluation(f"spread {e.spread:.2e} at lam={lam}, eps={epsilon}")
        return e.value

    if bracket is None:
        guess = lambda_asymptotic(epsilon, nu)
        half = max(0.5 * (guess - 1.0), 1e-3)
        lo, hi = max(0.5, guess - half), min(lam_max, guess + half)
        f_lo, f_hi = ev(lo), ev(hi)
        while f_lo * f_hi > 0.0:
            # Ev > 0 below the root: move up while positive, down while negative
            up = f_lo > 0.0
            if (up and hi >= lam_max) or (not up and lo <= 0.5):
                raise RootError(f"no sign change in [0.5, {lam_max}]: Ev = {f_lo:.3e}, {f_hi:.3e}")
            half *= 2.0
            if up:
                lo, f_lo = hi, f_hi
                hi = min(lam_max, hi + half)
                f_hi = ev(hi)
            else:
                hi, f_hi = lo, f_lo
                lo = max(0.5, lo - half)
                f_lo = ev(lo)
    else:
        lo, hi = bracket
        f_lo, f_hi = ev(lo), ev(hi)
        if f_lo * f_hi > 0.0:
            raise RootError(f"no sign change on [{lo}, {hi}]: Ev = {f_lo:.3e}, {f_hi:.3e}")
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        f_mid = ev(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    secant = lo - f_lo * (hi - lo) / (f_hi - f_lo)
    return secant if lo <= secant <= hi else 0.5 * (lo + hi)


def expansion_fit(nu: float, eps_list) -> dict:
    """Residual of the first-order root over ``eps_list`` and its fitted behaviour.

    ``delta = lambda(eps) - lambda_asymptotic(eps)``; the slope is that of
    ``log|delta|`` against ``log eps`` and the second-order coefficient comes from
    a least-squares fit ``delta = c2 eps + c3 eps**1.5 + c4 eps**2``.  Both
    values of ``C0(1, 0)`` (five-integral and closed form) are inserted into
    the second-order formula for comparison.
    """
    params = PhysicalParams(nu=nu)
    eps = np.asarray(eps_list, dtype=float)
    lam = np.array([find_lambda(float(e), params) for e in eps])
    delta = lam - np.array([lambda_asymptotic(float(e), nu) for e in eps])
    slope = float(np.polyfit(np.log(eps), np.log(np.abs(delta)), 1)[0])
    A = np.column_stack([eps, eps**1.5, eps**2])
    c2_fit = float(np.linalg.lstsq(A, delta, rcond=None)[0][0])
    c0_int = c0_one(nu)["value"]
    c0_cf = c0_one_closed_form(nu)
    return {
        "eps": eps,
        "lambda": lam,
        "delta": delta,
        "slope": slope,
        "c2_fit": c2_fit,
        "c0_one": c0_int,
        "c0_closed_form": c0_cf,
        "c2_from_c0_one": second_order_coefficient(nu, c0_int),
        "c2_from_closed_form": second_order_coefficient(nu, c0_cf),
    }


def b0_matched(nu: float, eps_list=(1e-12, 1e-11, 1e-10, 1e-9), h: float = 1e-4) -> dict:
    """``B0(0)`` measured from ``dEv/dlam`` at ``lam = 1`` and from the root shift.

    The derivative route central-differences ``Ev`` in ``lam``; the root route
    uses ``lambda(eps) - 1 ~ -Ev(1, eps)/B0``.  Both are extrapolated to
    ``eps -> 0`` with a fit in powers of ``eps**(1/nu)``.
    """
    params = PhysicalParams(nu=nu)
    eps = np.asarray(eps_list, dtype=float)
    d = [(evans_value(1 + h, e, nu) - evans_value(1 - h, e, nu)) / (2 * h) for e in eps]
    r = [-evans_value(1.0, e, nu) / (find_lambda(float(e), params) - 1.0) for e in eps]
    A = np.column_stack([np.ones_like(eps), eps ** (1 / nu)])
    from_derivative = float(np.linalg.lstsq(A, d, rcond=None)[0][0])
    from_root = float(np.linalg.lstsq(A, r, rcond=None)[0][0])
    return {"derivative": from_derivative, "root": from_root, "closed_form": b0_zero(nu)[1]}


# dispersion ---------------------------------------------------------------------
@dataclass(frozen=True)
class DispersionRow:
    """One dispersion-relation sample."""

    k: float
    epsilon: float
    lambda_root: float
    gamma: float
    gamma_asym: float
    gamma_cap: float
    admissible: bool
    source: str = "evans"
    error: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def gamma_asymptotic(k: float, params: PhysicalParams) -> float:
    eps = k * params.L0
    nu = params.nu
    return math.sqrt(params.g * k) / math.sqrt(1.0 + 2.0 * (2.0 * eps / nu) ** (1.0 / nu) / gamma_fn(1.0 + 1.0 / nu))


def admissible_lambda(lam: float, eps: float, nu: float) -> bool:
    return lam >= max(1.0, eps / k0_max_scaled(nu))


def dispersion(params: PhysicalParams, k_list, *, spectral_fallback: bool = True) -> list[DispersionRow]:
    """Dispersion rows in input order; failures are recorded per row."""
    _, cap, _ = l_eff_and_cap(params)
    rows = []
    for k in k_list:
        k = float(k)
        eps = k * params.L0
        g_asym = gamma_asymptotic(k, params)
        try:
            lam = find_lambda(eps, params)
            gam = math.sqrt(params.g * k / lam)
            rows.append(DispersionRow(k, eps, lam, gam, g_asym, cap, admissible_lambda(lam, eps, params.nu)))
            continue
        except (RootError, InvalidEvaluation, NonContractionError, BranchError) as exc:
            reason = f"{type(exc).__name__}: {exc}"
        if spectral_fallback:
            from .spectral import SpectralError, gamma_spectral

            try:
                res = gamma_spectral(k, params)
                lam = params.g * k / res.gamma**2
                rows.append(
                    DispersionRow(k, eps, lam, res.gamma, g_asym, cap,
                                  admissible_lambda(lam, eps, params.nu), "spectral", reason)
                )
                continue
            except SpectralError as exc:
                reason += f"; spectral: {exc}"
        rows.append(DispersionRow(k, eps, math.nan, math.nan, g_asym, cap, False, "failed", reason))
    return rows
