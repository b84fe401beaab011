"""Solution branch of the Rayleigh equation that stays bounded on the dense side.

With ``u = U e^{-eps y}`` and ``v = V e^{-eps y}`` the Rayleigh equation becomes

    dU/dy = eps (1 - lam) U + eps V / xi
    dV/dy = eps (1 + lam) V + eps (1 - lam**2) xi U

whose bounded solution tends to ``(1, lam - 1)`` as ``y -> +inf``.  The system is
integrated backward in the logit ``x = ln(xi / (1 - xi))``, where
``dx/dy = xi**nu`` and the right-hand side is scaled by ``zeta = eps / xi**nu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .profile import PhysicalParams, get_profile, _log_xi

__all__ = [
    "ModeContext",
    "PlusBranch",
    "SeriesExpansion",
    "BranchError",
    "solve_plus",
    "u1_v1_closed_form",
    "series_bound",
    "series_radius",
    "series_expansion",
    "R_UNIFORM",
]

R_UNIFORM = 15.0 / 4.0
XI_RIGHT_GAP = 1e-10
RTOL = 1e-11
ATOL = 1e-13
ZETA_MAX = 10.0


class BranchError(RuntimeError):
    """Branch construction failed (integrator stall or window outside the valid range)."""


@dataclass(frozen=True)
class ModeContext:
    """One transverse mode and trial eigen-parameter.

    Parameters
    ----------
    k : float
        Transverse wavenumber.
    epsilon : float
        ``k * L0``.
    lam : float
        ``g k / gamma**2``.
    gamma : float
        Growth rate consistent with ``lam``.
    """

    k: float
    epsilon: float
    lam: float
    gamma: float

    @classmethod
    def from_k(cls, k: float, lam: float, params: PhysicalParams) -> "ModeContext":
        return cls(k=k, epsilon=k * params.L0, lam=lam, gamma=math.sqrt(params.g * k / lam))

    @classmethod
    def scaled(cls, epsilon: float, lam: float) -> "ModeContext":
        """Context in scaled units (``L0 = g = 1``)."""
        k = float(epsilon)
        gamma = math.sqrt(k / lam) if k > 0 and lam > 0 else 0.0
        return cls(k=k, epsilon=float(epsilon), lam=float(lam), gamma=gamma)

    def __post_init__(self) -> None:
        if self.epsilon < 0.0 or not math.isfinite(self.epsilon):
            raise ValueError("epsilon must be finite and non-negative")
        if not self.lam > 0.0:
            raise ValueError("lambda must be positive")


def _rhs_factory(nu: float, eps: float, lam: float):
    a = eps * (1.0 - lam)
    b = eps * (1.0 + lam)
    c = eps * (1.0 - lam * lam)

    def rhs(x, state):
        lx = -math.log1p(math.exp(-x)) if x > -30.0 else x - math.log1p(math.exp(x))
        xi = math.exp(lx)
        w = math.exp(-nu * lx)  # xi**-nu
        U, V = state
        return [w * (a * U + eps * V / xi), w * (b * V + c * xi * U)]

    return rhs


@dataclass(frozen=True)
class PlusBranch:
    """Dense-side branch on a logit interval, normalized by ``U -> 1`` at ``+inf``.

    ``u_plus = U e^{-eps y}``, ``v_plus = V e^{-eps y}`` and
    ``du_plus/dy = -eps lam u_plus + (eps / xi) v_plus``.
    """

    nu: float
    epsilon: float
    lam: float
    x_left: float
    x_right: float
    init: tuple[float, float]
    _sol: object = field(repr=False, compare=False)

    normalization: str = "U_plus -> 1 at +inf"

    def at_logit(self, x):
        """``(U, V)`` at logit(s) ``x``."""
        x = np.asarray(x, dtype=float)
        if self._sol is None:
            U = np.full(x.shape, self.init[0])
            V = np.full(x.shape, self.init[1])
            return U, V
        if np.any(x < self.x_left - 1e-9) or np.any(x > self.x_right + 1e-9):
            raise BranchError("evaluation point outside the integrated span")
        out = self._sol(x)
        return out[0], out[1]

    def at_y(self, y):
        return self.at_logit(get_profile(self.nu).logit_of_y(y))

    def samples(self, n: int = 200):
        """``(y, U, V)`` on ``n`` logit-equispaced points."""
        x = np.linspace(self.x_left, self.x_right, n)
        y = get_profile(self.nu).y_of_logit(x)
        U, V = self.at_logit(x)
        return y, U, V

    def u_plus(self, y):
        U, _ = self.at_y(y)
        return U * np.exp(-self.epsilon * np.asarray(y, dtype=float))

    def v_plus(self, y):
        _, V = self.at_y(y)
        return V * np.exp(-self.epsilon * np.asarray(y, dtype=float))

    def du_plus(self, y):
        y = np.asarray(y, dtype=float)
        U, V = self.at_y(y)
        xi = get_profile(self.nu).xi(y)
        e = np.exp(-self.epsilon * y)
        return -self.epsilon * self.lam * U * e + self.epsilon / xi * V * e


def solve_plus(
    ctx: ModeContext,
    params: PhysicalParams,
    y_left: float | None = None,
    *,
    x_left: float | None = None,
    init: tuple[float, float] | None = None,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> PlusBranch:
    """Integrate the dense-side branch backward from ``xi = 1 - 1e-10``.

    The left end is given either in scaled ``y`` or directly as a logit.
    ``init`` overrides the asymptotic data ``(1, lam - 1)`` (used for Wronskian
    checks with a second, growing solution).
    """
    nu, eps, lam = params.nu, ctx.epsilon, ctx.lam
    prof = get_profile(nu)
    x_right = math.log((1.0 - XI_RIGHT_GAP) / XI_RIGHT_GAP)
    if x_left is None:
        if y_left is None:
            raise ValueError("give y_left or x_left")
        x_left = float(prof.logit_of_y(float(y_left)))
    if x_left >= x_right:
        raise BranchError("left end lies right of the asymptotic start")
    zeta_left = eps * math.exp(-nu * float(_log_xi(x_left)))
    if zeta_left > ZETA_MAX:
        raise BranchError(
            f"window error: eps/xi**nu = {zeta_left:.3g} at the left end exceeds {ZETA_MAX}"
        )
    y0 = (1.0, lam - 1.0) if init is None else (float(init[0]), float(init[1]))
    if eps == 0.0:
        return PlusBranch(nu, eps, lam, x_left, x_right, y0, None)
    sol = integrate.solve_ivp(
        _rhs_factory(nu, eps, lam),
        (x_right, x_left),
        list(y0),
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=True,
    )
    if sol.status != 0:
        raise BranchError(f"integrator stalled near logit {sol.t[-1]:.6g}: {sol.message}")
    return PlusBranch(nu, eps, lam, x_left, x_right, y0, sol.sol)


def u1_v1_closed_form(lam: float, nu: float, xi) -> tuple:
    """First-order coefficients of ``U = 1 + eps u1``, ``V = lam - 1 + eps v1``."""
    xi = np.asarray(xi, dtype=float)
    u1 = (1.0 - lam) / (nu + 1.0) * (1.0 - xi ** (nu + 1.0)) / xi ** (nu + 1.0)
    v1 = (1.0 - lam * lam) / nu * (1.0 - xi**nu) / xi**nu
    return u1, v1


def series_radius(lam: float) -> float:
    """``R_lam = (|lam - 1| + 1) * max(1, |lam + 1|)``."""
    return (abs(lam - 1.0) + 1.0) * max(1.0, abs(lam + 1.0))


def series_bound(lam: float, j: int) -> float:
    """``R_lam**j``, the growth bound of the order-``j`` coefficients."""
    if j < 1:
        raise ValueError("order must be >= 1")
    return series_radius(lam) ** j


@dataclass(frozen=True)
class SeriesExpansion:
    """Truncated expansion in ``zeta = eps / xi**nu`` of the dense-side branch.

    ``A_value`` and ``B_value`` are the order-1..J partial sums of ``U - 1`` and
    ``V - (lam - 1)``; ``tail_bound`` bounds the neglected terms.
    """

    zeta: float
    A_value: float
    B_value: float
    tail_bound: float
    order: int


def _order_coefficients(lam: float, nu: float, xi: float, order: int):
    """``(u_j(xi), v_j(xi))`` for ``j = 1..order`` from the first-order recurrence.

    ``u_{j+1}' = [v_j - (lam - 1) xi u_j] / (xi**(nu+2) (1 - xi))`` in ``xi`` and
    ``v_{j+1}' = (lam + 1) [v_j - (lam - 1) xi u_j] / (xi**(nu+1) (1 - xi))``,
    both vanishing at ``xi = 1``.  Order 1 is closed form, higher orders nest
    adaptive quadratures.
    """
    if order < 1:
        return []

    def uv1(eta):
        return u1_v1_closed_form(lam, nu, eta)

    funcs = [uv1]

    def make_next(prev):
        def source(eta):
            u, v = prev(eta)
            return (float(v) - (lam - 1.0) * eta * float(u)) / (1.0 - eta)

        def nxt(x):
            if x == 1.0:
                return 0.0, 0.0
            iu, _ = integrate.quad(
                lambda e: source(e) / e ** (nu + 2.0), 1.0, x, epsabs=1e-13, epsrel=1e-11
            )
            iv, _ = integrate.quad(
                lambda e: source(e) / e ** (nu + 1.0), 1.0, x, epsabs=1e-13, epsrel=1e-11
            )
            return iu, (lam + 1.0) * iv

        return nxt

    for _ in range(order - 1):
        funcs.append(make_next(funcs[-1]))
    return [tuple(float(c) for c in f(xi)) for f in funcs]


def series_expansion(lam: float, nu: float, eps: float, xi: float, order: int = 2) -> SeriesExpansion:
    """Partial sums of the zeta-series at ``xi``; refuses outside ``zeta R_lam < 1``."""
    zeta = eps / xi**nu
    r = series_radius(lam)
    if zeta * r >= 1.0:
        raise ValueError(f"series outside its validity region: zeta*R = {zeta * r:.3g} >= 1")
    coeffs = _order_coefficients(lam, nu, xi, order)
    a = [c[0] * xi ** (nu * (j + 1)) for j, c in enumerate(coeffs)]
    b = [c[1] * xi ** (nu * (j + 1)) for j, c in enumerate(coeffs)]
    A_val = sum(aj * zeta ** (j + 1) for j, aj in enumerate(a))
    B_val = sum(bj * zeta ** (j + 1) for j, bj in enumerate(b))
    # the constant in |a_j| <= A R**j is not fixed analytically: estimate it from the computed orders
    const = max([1.0] + [max(abs(aj), abs(bj)) / r ** (j + 1) for j, (aj, bj) in enumerate(zip(a, b))])
    tail = const * (r * zeta) ** (order + 1) / (1.0 - r * zeta)
    return SeriesExpansion(zeta=zeta, A_value=A_val, B_value=B_val, tail_bound=tail, order=order)
