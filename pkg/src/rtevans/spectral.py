"""Growth rate from the self-adjoint (Schrodinger) form of the Rayleigh equation.

With ``u = rho0**(-1/2) phi`` the Rayleigh equation becomes

    -(1/k**2) phi'' + [1 - (g/gamma**2) k0(x) + W0(x)/k**2] phi = 0,
    W0 = k0'/2 + k0**2/4,

so ``gamma`` is the growth rate for which the lowest eigenvalue of the operator
on the left is zero.  The lowest eigenvalue increases with ``gamma``; it is
located by bisection on Sturm counts at shift zero.

The light side decays only algebraically in ``x``, so nodes follow a sinh
map centred on the maximum of ``k0``: fine spacing in the well and
geometric spacing in both tails.  A finite-volume stencil keeps the discrete
operator symmetric after scaling by the square root of the cell widths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .profile import PhysicalParams, get_profile, _log_xi, _log_one_minus_xi, l_eff_and_cap

__all__ = [
    "XGrid",
    "TridiagonalOperator",
    "SpectralResult",
    "SpectralError",
    "GridTooNarrowError",
    "NoCrossingError",
    "make_xgrid",
    "build_operator",
    "sturm_count",
    "min_eigenvalue",
    "gamma_spectral",
    "eigenmode_diagnostics",
]

XI_LEFT = 1e-6
XI_RIGHT = 1.0 - 1e-10
DECAY_WIDTHS = 60.0
DS_DEFAULT = 0.02
K0_END_TOL = 1e-8


class SpectralError(RuntimeError):
    """Spectral growth-rate computation failed."""


class GridTooNarrowError(SpectralError):
    """``k0`` is not negligible at a grid end."""


class NoCrossingError(SpectralError):
    """The lowest eigenvalue does not cross zero inside the growth-rate bracket."""


@dataclass(frozen=True)
class XGrid:
    """Sinh-mapped grid in the physical coordinate ``x``.

    Nodes are ``x = center + scale * sinh(s)`` with ``s`` uniform (step ``ds``)
    between ``asinh((x_min - center)/scale)`` and ``asinh((x_max - center)/scale)``;
    the end nodes carry the Dirichlet condition.

    Attributes
    ----------
    x : ndarray
        All nodes, including the two boundary nodes.
    k0, W0 : ndarray
        ``k0 = rho0'/rho0`` and ``W0 = k0'/2 + k0**2/4`` at the nodes.
    rho : ndarray
        ``rho0 / rho_a = xi`` at the nodes.
    """

    x_min: float
    x_max: float
    n: int
    h: float
    center: float
    scale: float
    x: np.ndarray = field(repr=False)
    k0: np.ndarray = field(repr=False)
    W0: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)

    @property
    def interior(self) -> np.ndarray:
        return self.x[1:-1]

    @property
    def cell(self) -> np.ndarray:
        """Dual-cell widths at interior nodes (the mass weights)."""
        dx = np.diff(self.x)
        return 0.5 * (dx[:-1] + dx[1:])


def _profile_arrays(params: PhysicalParams, x: np.ndarray):
    nu, L0 = params.nu, params.L0
    s = get_profile(nu).logit_of_y(x / L0)
    lx = _log_xi(s)
    l1 = _log_one_minus_xi(s)
    k0 = np.exp(nu * lx + l1) / L0
    dk0 = np.exp(2.0 * nu * lx + l1) * (nu - (nu + 1.0) * np.exp(lx)) / L0**2
    return k0, 0.5 * dk0 + 0.25 * k0**2, np.exp(lx)


def make_xgrid(
    params: PhysicalParams,
    k: float,
    *,
    ds: float = DS_DEFAULT,
    x_min: float | None = None,
    x_max: float | None = None,
    widen: float = 1.0,
) -> XGrid:
    """Default grid for wavenumber ``k``.

    The domain covers ``[x(xi = 1e-6), x(xi = 1 - 1e-10)]`` and at least
    ``60/k`` on each side of the well (the mode decays like ``e^{-k|x|}``);
    ``widen`` scales both half-widths about the well.
    """
    if not k > 0.0:
        raise ValueError("k must be positive")
    nu, L0 = params.nu, params.L0
    prof = get_profile(nu)
    center = L0 * float(prof.y_of_xi(nu / (nu + 1.0)))
    if x_min is None:
        x_min = min(L0 * float(prof.y_of_xi(XI_LEFT)), center - DECAY_WIDTHS / k)
    if x_max is None:
        x_max = max(L0 * float(prof.y_of_xi(XI_RIGHT)), center + DECAY_WIDTHS / k)
    x_min = center - widen * (center - x_min)
    x_max = center + widen * (x_max - center)
    scale = min(L0, 1.0 / k)
    s_lo = math.asinh((x_min - center) / scale)
    s_hi = math.asinh((x_max - center) / scale)
    n = int(math.ceil((s_hi - s_lo) / ds)) + 1
    s = np.linspace(s_lo, s_hi, n)
    x = center + scale * np.sinh(s)
    k0, W0, rho = _profile_arrays(params, x)
    if max(k0[0], k0[-1]) > K0_END_TOL * float(np.max(k0)):
        raise GridTooNarrowError(
            f"k0 at the ends is {max(k0[0], k0[-1]) / np.max(k0):.1e} of its maximum (need <= {K0_END_TOL})"
        )
    h = float(np.min(np.diff(x)))
    return XGrid(float(x[0]), float(x[-1]), n, h, center, scale, x, k0, W0, rho)


@dataclass(frozen=True)
class TridiagonalOperator:
    """Symmetric tridiagonal matrix: ``diag`` (length m) and ``off`` (length m - 1)."""

    diag: np.ndarray
    off: np.ndarray

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.off * v[1:]
        out[1:] += self.off * v[:-1]
        return out


def _kinetic(grid: XGrid, k: float):
    dx = np.diff(grid.x)
    m = grid.cell
    inv = 1.0 / dx
    diag = (inv[:-1] + inv[1:]) / m / k**2
    off = -inv[1:-1] / np.sqrt(m[:-1] * m[1:]) / k**2
    return diag, off


def build_operator(grid: XGrid, k: float, gamma_trial: float, params: PhysicalParams) -> TridiagonalOperator:
    """Discrete ``-(1/k**2) d2/dx2 + 1 - (g/gamma**2) k0 + W0/k**2`` with Dirichlet ends."""
    kin_d, kin_o = _kinetic(grid, k)
    pot = 1.0 - params.g / gamma_trial**2 * grid.k0[1:-1] + grid.W0[1:-1] / k**2
    return TridiagonalOperator(kin_d + pot, kin_o)


def sturm_count(op: TridiagonalOperator, shift: float) -> int:
    """Number of eigenvalues below ``shift`` (negative pivots of ``LDL^T``)."""
    d = op.diag.tolist()
    b2 = (op.off * op.off).tolist()
    tiny = 1e-300
    count = 0
    piv = d[0] - shift
    if piv < 0.0:
        count += 1
    for i in range(1, len(d)):
        if piv == 0.0:
            piv = tiny
        piv = d[i] - shift - b2[i - 1] / piv
        if piv < 0.0:
            count += 1
    return count


def min_eigenvalue(op: TridiagonalOperator, tol: float = 1e-14) -> float:
    """Lowest eigenvalue by Sturm bisection inside the Gershgorin interval."""
    r = np.zeros_like(op.diag)
    r[:-1] += np.abs(op.off)
    r[1:] += np.abs(op.off)
    lo = float(np.min(op.diag - r))
    hi = float(np.min(op.diag + r))
    scale = max(1.0, abs(lo), abs(hi))
    while hi - lo > tol * scale:
        mid = 0.5 * (lo + hi)
        if sturm_count(op, mid) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _inverse_iteration(op: TridiagonalOperator, shift: float, iters: int = 4) -> np.ndarray:
    m = op.diag.size
    ab = np.zeros((3, m))
    ab[0, 1:] = op.off
    ab[1] = op.diag - shift
    ab[2, :-1] = op.off
    v = np.ones(m) / math.sqrt(m)
    for _ in range(iters):
        try:
            w = solve_banded((1, 1), ab, v)
        except np.linalg.LinAlgError:
            # shift landed exactly on the eigenvalue: nudge it
            ab[1] = op.diag - (shift - 1e-12 * max(1.0, abs(shift)))
            w = solve_banded((1, 1), ab, v)
        v = w / np.linalg.norm(w)
    return v


@dataclass(frozen=True)
class SpectralResult:
    """Growth rate and eigenmode at one wavenumber.

    Attributes
    ----------
    gamma : float
        Growth rate with zero lowest eigenvalue.
    eigenvalue_residual : float
        ``|mu_min|`` of the operator at ``gamma`` plus ``||B v - mu v||``.
    x : ndarray
        Interior nodes.
    u : ndarray
        Rayleigh eigenfunction, ``||u||_{L2} = 1`` and ``u(0) > 0``.
    phi : ndarray
        Schrodinger-form eigenfunction ``rho0**(1/2) u``, unit L2 norm.
    n : int
        Grid nodes used.
    """

    k: float
    gamma: float
    eigenvalue_residual: float
    x: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    n: int = 0
    params: PhysicalParams = field(default_factory=PhysicalParams, repr=False)
    grid: XGrid | None = field(default=None, repr=False)

    @property
    def lambda_value(self) -> float:
        return self.params.g * self.k / self.gamma**2


def _solve_on_grid(k: float, params: PhysicalParams, grid: XGrid, lower_fraction: float, rtol: float):
    _, cap, _ = l_eff_and_cap(params)
    kin_d, kin_o = _kinetic(grid, k)
    base = kin_d + 1.0 + grid.W0[1:-1] / k**2
    k0 = grid.k0[1:-1]

    def op_at(c):  # c = g / gamma**2
        return TridiagonalOperator(base - c * k0, kin_o)

    # bisection in c = g/gamma**2, which the lowest eigenvalue decreases with
    c_lo = params.g / cap**2 * (1.0 + 1e-12)
    c_hi = params.g / (lower_fraction * cap) ** 2
    if sturm_count(op_at(c_hi), 0.0) == 0:
        raise NoCrossingError(
            f"lowest eigenvalue positive at gamma = {lower_fraction} Lambda (k = {k}); k below the bound-state range"
        )
    if sturm_count(op_at(c_lo), 0.0) > 0:
        raise NoCrossingError(f"lowest eigenvalue negative at gamma = Lambda (k = {k})")
    while c_hi - c_lo > rtol * c_hi:
        mid = 0.5 * (c_lo + c_hi)
        if sturm_count(op_at(mid), 0.0) >= 1:
            c_hi = mid
        else:
            c_lo = mid
    c = 0.5 * (c_lo + c_hi)
    op = op_at(c)
    mu = min_eigenvalue(op)
    v = _inverse_iteration(op, mu)
    resid = abs(mu) + float(np.linalg.norm(op.matvec(v) - mu * v))
    return math.sqrt(params.g / c), v, resid


def gamma_spectral(
    k: float,
    params: PhysicalParams,
    grid: XGrid | None = None,
    *,
    converge: bool = True,
    conv_tol: float = 1e-4,
    lower_fraction: float = 0.5,
    max_refine: int = 4,
    rtol: float = 1e-13,
) -> SpectralResult:
    """Growth rate ``gamma(k)`` with zero lowest eigenvalue.

    Without a grid the default sinh grid is refined (step halved) until
    ``gamma`` changes by less than ``conv_tol`` relative.
    """
    k = float(k)
    if not k > 0.0:
        raise ValueError("k must be positive")
    if grid is not None or not converge:
        grid = grid or make_xgrid(params, k)
        gamma, v, resid = _solve_on_grid(k, params, grid, lower_fraction, rtol)
    else:
        ds = DS_DEFAULT
        grid = make_xgrid(params, k, ds=ds)
        gamma, v, resid = _solve_on_grid(k, params, grid, lower_fraction, rtol)
        for _ in range(max_refine):
            ds *= 0.5
            fine = make_xgrid(params, k, ds=ds)
            g2, v2, r2 = _solve_on_grid(k, params, fine, lower_fraction, rtol)
            change = abs(g2 - gamma) / g2
            grid, gamma, v, resid = fine, g2, v2, r2
            if change < conv_tol:
                break
        else:
            raise SpectralError(f"no grid convergence at k = {k} (last change {change:.1e})")
    return _package(k, params, grid, gamma, v, resid)


def _package(k, params, grid, gamma, v, resid) -> SpectralResult:
    m = grid.cell
    phi = v / np.sqrt(m)
    phi /= math.sqrt(float(np.sum(m * phi * phi)))
    u = phi / np.sqrt(grid.rho[1:-1])
    u /= math.sqrt(float(np.sum(m * u * u)))
    i0 = int(np.argmin(np.abs(grid.interior)))
    if u[i0] < 0.0:
        u, phi = -u, -phi
    return SpectralResult(k, gamma, resid, grid.interior.copy(), u, phi, grid.n, params, grid)


def _fd_derivatives(x: np.ndarray, f: np.ndarray):
    """First and second derivatives at the interior of ``x`` (three-point, nonuniform)."""
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    fm, f0, fp = f[:-2], f[1:-1], f[2:]
    d1 = (hm**2 * fp - hp**2 * fm + (hp**2 - hm**2) * f0) / (hm * hp * (hm + hp))
    d2 = 2.0 * (hm * fp - (hm + hp) * f0 + hp * fm) / (hm * hp * (hm + hp))
    return d1, d2


def eigenmode_diagnostics(result: SpectralResult) -> dict:
    """Discrete L2 norms of the Rayleigh mode and its ODE residual.

    Returns norms of ``u``, ``u'``, ``u''``, ``rho0**(1/2) u`` and
    ``rho0**(1/2) u'`` (``rho_a`` included), and the relative mismatch between
    the second difference of ``u`` and ``u''`` from
    ``u'' = -k0 u' + k**2 u - (g k**2/gamma**2) k0 u``.
    """
    grid = result.grid
    if grid is None:
        raise ValueError("result carries no grid")
    x = grid.x
    u = np.concatenate([[0.0], result.u, [0.0]])
    d1, d2 = _fd_derivatives(x, u)
    m = grid.cell
    k0 = grid.k0[1:-1]
    rho = result.params.rho_a * grid.rho[1:-1]
    k, g, gam = result.k, result.params.g, result.gamma
    ode = -k0 * d1 + k**2 * result.u - g * k**2 / gam**2 * k0 * result.u

    def norm(f):
        return math.sqrt(float(np.sum(m * f * f)))

    return {
        "u": norm(result.u),
        "du": norm(d1),
        "d2u": norm(d2),
        "sqrt_rho_u": norm(np.sqrt(rho) * result.u),
        "sqrt_rho_du": norm(np.sqrt(rho) * d1),
        "ode_mismatch": norm(d2 - ode) / norm(d2),
        "u_at_zero": float(result.u[int(np.argmin(np.abs(result.x)))]),
    }
