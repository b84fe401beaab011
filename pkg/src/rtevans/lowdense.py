"""Solution branch of the Rayleigh equation that stays bounded on the light side.

In the variable ``t = -eps y`` the branch is written as

    e^t G = Z g,    e^t F = Z (lam + 1)/2 R(g),    Z = (zeta / nu)**((lam + 1)/(2 nu))

with ``zeta = eps / xi**nu`` and ``g`` the fixed point of ``g = 1 + K(g)``:

    R(g)(s) = int_s^inf e^{-2(y-s)} (xi(s)/xi(y))**lam tau(y) g(y) dy
    K(g)(t) = (1 - lam**2)/4 int_t^inf tau(s) R(g)(s) ds

where ``tau(s) = -d/ds ln xi(-s/eps)`` and ``xi`` is evaluated at ``y = -s/eps``.
At ``eps = 0`` the weights freeze to ``tau = 1/(nu s)`` and ``(y/s)**(lam/nu)``.

Both nested integrals are discretized on Gauss-Legendre panels graded from
``t0``; ``R`` is accumulated right to left with panel carries so one application
of ``K`` is linear in the node count.  Beyond ``T_NEAR`` the inner integral is
evaluated by Gauss-Laguerre in the exponential weight.  The outer integral has
an algebraic tail ``~ (1 - lam**2)/(8 nu**2 t)`` and is closed beyond ``t_max``
by a two-term ``C/s**2 + D/s**3`` fit on the last panel.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import laguerre, legendre

from .profile import PhysicalParams, get_profile, _log_xi, _log_one_minus_xi
from .specfun import gamma_fn, kummer_u, kummer_u_deriv

__all__ = [
    "TGrid",
    "GSolution",
    "MinusBranch",
    "NonContractionError",
    "TailWarning",
    "make_grid",
    "tau_weight",
    "apply_K",
    "apply_R",
    "volterra_g",
    "reconstruct_FG",
    "hypergeom_F0G0",
    "hypergeom_U0",
    "c0_lambda",
]

PANEL_ORDER = 16
T_NEAR = 20.0
NEAR_RATIO = 1.6
FAR_RATIO = 2.0
N_LAGUERRE = 40
T0_DEFAULT = 0.05
T_MAX_DEFAULT = 1.0e6


class NonContractionError(RuntimeError):
    """The fixed-point iteration stopped contracting."""


class TailWarning(RuntimeWarning):
    """The tail closure of the outer integral is less accurate than requested."""


# reference panel on [-1, 1] ----------------------------------------------------
def _reference(p: int):
    x, w = legendre.leggauss(p)
    vinv = np.linalg.inv(legendre.legvander(x, p - 1))
    # column j: Legendre coefficients of the j-th Lagrange basis polynomial
    anti = legendre.legint(vinv, lbnd=1.0)
    # Q[i, j] = int_{x_i}^{1} l_j
    q = -legendre.legval(x, anti).T
    q_full = -legendre.legval(-1.0, anti)
    right = legendre.legval(1.0, vinv)
    left = legendre.legval(-1.0, vinv)
    return x, w, vinv, q, q_full, left, right


_REF = {}


def _ref(p: int):
    if p not in _REF:
        _REF[p] = _reference(p)
    return _REF[p]


@dataclass(frozen=True)
class TGrid:
    """Panelled t-grid on ``[t0, t_max]`` (``t = -eps y``).

    Panels grow geometrically from ``t0`` to 1, have unit width up to
    ``T_NEAR`` and grow geometrically again to ``t_max``.
    """

    t0: float = T0_DEFAULT
    t_max: float = T_MAX_DEFAULT
    order: int = PANEL_ORDER

    def __post_init__(self) -> None:
        if not 0.0 < self.t0 < min(1.0, self.t_max):
            raise ValueError("need 0 < t0 < min(1, t_max)")
        if self.t_max <= T_NEAR:
            raise ValueError(f"t_max must exceed {T_NEAR}")
        edges = [self.t0]
        while edges[-1] * NEAR_RATIO < 1.0:
            edges.append(edges[-1] * NEAR_RATIO)
        edges.append(1.0)
        while edges[-1] < T_NEAR - 1e-12:
            edges.append(edges[-1] + 1.0)
        while edges[-1] * FAR_RATIO < self.t_max:
            edges.append(edges[-1] * FAR_RATIO)
        edges.append(self.t_max)
        edges = np.array(edges)
        x, *_ = _ref(self.order)
        a, b = edges[:-1, None], edges[1:, None]
        nodes = 0.5 * (a + b) + 0.5 * (b - a) * x[None, :]
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "n_near", int(np.searchsorted(edges, T_NEAR - 1e-9)))

    @property
    def n_panels(self) -> int:
        return len(self.edges) - 1

    @property
    def flat(self) -> np.ndarray:
        return self.nodes.ravel()

    def locate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t0 - 1e-14) or np.any(t > self.t_max):
            raise ValueError("point outside the grid")
        return np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, self.n_panels - 1)

    def interp(self, values: np.ndarray, t) -> np.ndarray:
        """Panel-local polynomial interpolation of node ``values`` (shape panels x order)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = self.locate(t)
        a, b = self.edges[idx], self.edges[idx + 1]
        xr = (2.0 * t - a - b) / (b - a)
        _, _, vinv, *_ = _ref(self.order)
        basis = legendre.legvander(xr, self.order - 1) @ vinv
        return np.einsum("ij,ij->i", basis, values[idx])


def make_grid(t0: float = T0_DEFAULT, t_max: float = T_MAX_DEFAULT) -> TGrid:
    return _make_grid(float(t0), float(t_max))


@lru_cache(maxsize=16)
def _make_grid(t0: float, t_max: float) -> TGrid:
    return TGrid(t0=t0, t_max=t_max)


# weights ---------------------------------------------------------------------
def _weights(nu: float, eps: float, s: np.ndarray):
    """``(tau, ln xi, ln zeta)`` at ``y = -s/eps``; at eps = 0 the frozen limits."""
    s = np.asarray(s, dtype=float)
    if eps == 0.0:
        ln_zeta = np.log(nu * s)
        return 1.0 / (nu * s), -ln_zeta / nu, ln_zeta
    prof = get_profile(nu)
    x = prof.logit_of_y(-s / eps)
    lx = _log_xi(x)
    tau = np.exp(nu * lx + _log_one_minus_xi(x)) / eps
    return tau, lx, math.log(eps) - nu * lx


def tau_weight(params: PhysicalParams, s, epsilon: float):
    """``tau(s, eps) = xi**nu (1 - xi) / eps`` at ``y = -s/eps`` (``1/(nu s)`` at eps = 0)."""
    return _weights(params.nu, float(epsilon), s)[0]


class _Kernel:
    """Node weights for one ``(nu, eps)`` and grid; independent of lambda."""

    def __init__(self, nu: float, eps: float, grid: TGrid):
        self.nu, self.eps, self.grid = nu, eps, grid
        p = grid.order
        self.tau, self.lxi, self.lzeta = (
            a.reshape(grid.n_panels, p) for a in _weights(nu, eps, grid.flat)
        )
        e = grid.edges
        self.tau_edge, self.lxi_edge, self.lzeta_edge = _weights(nu, eps, e)
        # Gauss-Laguerre points for the inner integral on far nodes and at T_NEAR
        vl, wl = laguerre.laggauss(N_LAGUERRE)
        m = grid.n_near
        starts = np.concatenate([[e[m]], grid.nodes[m:].ravel()])
        pts = starts[:, None] + 0.5 * vl[None, :]
        tau_p, lxi_p, _ = _weights(nu, eps, pts.ravel())
        self.far_starts = starts
        self.far_pts = pts
        self.far_tau = tau_p.reshape(pts.shape)
        self.far_lxi = lxi_p.reshape(pts.shape)
        self.far_w = 0.5 * wl
        inside = pts <= grid.t_max
        self.far_inside = inside
        # interpolation rows for g at Laguerre points inside the grid
        flat_pts = pts[inside]
        idx = grid.locate(flat_pts)
        a, b = e[idx], e[idx + 1]
        xr = (2.0 * flat_pts - a - b) / (b - a)
        _, _, vinv, *_ = _ref(p)
        self.far_basis = legendre.legvander(xr, p - 1) @ vinv
        self.far_idx = idx
        self.t_max_basis = legendre.legval(1.0, vinv)


@lru_cache(maxsize=64)
def _kernel(nu: float, eps: float, grid: TGrid) -> _Kernel:
    return _Kernel(nu, eps, grid)


def _g_at_t_max(g: np.ndarray, ker: _Kernel) -> float:
    return float(ker.t_max_basis @ g[-1])


def apply_R(g: np.ndarray, lam: float, ker: _Kernel):
    """``R(g)`` at the nodes and at the panel edges (right-to-left accumulation)."""
    grid = ker.grid
    p = grid.order
    _, _, _, q, q_full, _, _ = _ref(p)
    # far region: Gauss-Laguerre in u = y - s, g extended by its 1/t tail model
    T = grid.t_max
    gT = _g_at_t_max(g, ker)
    g_pts = np.empty(ker.far_pts.shape)
    g_pts[ker.far_inside] = np.einsum("ij,ij->i", ker.far_basis, g[ker.far_idx])
    out = ~ker.far_inside
    g_pts[out] = 1.0 + (gT - 1.0) * T / ker.far_pts[out]
    start_lxi = np.concatenate([[ker.lxi_edge[grid.n_near]], ker.lxi[grid.n_near:].ravel()])
    ratio = np.exp(lam * (start_lxi[:, None] - ker.far_lxi))
    far_R = (ratio * ker.far_tau * g_pts) @ ker.far_w
    R = np.empty_like(g)
    R[grid.n_near:] = far_R[1:].reshape(-1, p)
    R_edge = np.empty(grid.n_panels + 1)
    R_edge[grid.n_near] = far_R[0]
    # near region, panels right to left
    for j in range(grid.n_near - 1, -1, -1):
        a, b = grid.edges[j], grid.edges[j + 1]
        half = 0.5 * (b - a)
        s = grid.nodes[j]
        h = np.exp(-2.0 * (s - b) + lam * (ker.lxi_edge[j + 1] - ker.lxi[j])) * ker.tau[j] * g[j]
        carry = R_edge[j + 1]
        f_nodes = np.exp(-2.0 * (b - s) + lam * (ker.lxi[j] - ker.lxi_edge[j + 1]))
        R[j] = f_nodes * (half * (q @ h) + carry)
        f_a = math.exp(-2.0 * (b - a) + lam * (ker.lxi_edge[j] - ker.lxi_edge[j + 1]))
        R_edge[j] = f_a * (half * float(q_full @ h) + carry)
    return R, R_edge


def _outer(f: np.ndarray, grid: TGrid, tail: float):
    """``int_t^inf f`` at nodes and edges, given the tail beyond ``t_max``."""
    _, _, _, q, q_full, _, _ = _ref(grid.order)
    out = np.empty_like(f)
    edge = np.empty(grid.n_panels + 1)
    edge[-1] = tail
    for j in range(grid.n_panels - 1, -1, -1):
        half = 0.5 * (grid.edges[j + 1] - grid.edges[j])
        out[j] = half * (q @ f[j]) + edge[j + 1]
        edge[j] = half * float(q_full @ f[j]) + edge[j + 1]
    return out, edge


def _apply_K_kernel(g, lam, ker, warn=True):
    c = 0.25 * (1.0 - lam * lam)
    R, R_edge = apply_R(g, lam, ker)
    f = ker.tau * R
    grid = ker.grid
    _, _, _, _, _, left, right = _ref(grid.order)
    T, a = grid.t_max, grid.edges[-2]
    fT, fa = float(right @ f[-1]), float(left @ f[-1])
    # beyond t_max f ~ C/s**2 + D/s**3, matched at both ends of the last panel
    D = (fT * T**2 - fa * a**2) / (1.0 / T - 1.0 / a)
    C = fT * T**2 - D / T
    tail = C / T + D / (2.0 * T**2)
    if warn:
        # size of the neglected 1/s**4 term, taken as the correction scaled once more by D/(C T)
        err = abs(c * D) / (2.0 * T**2) * abs(D / C) / T if C != 0.0 else 0.0
        if err > 1e-12:
            warnings.warn(f"outer tail closure error estimate {err:.2e}", TailWarning, stacklevel=3)
    K, K_edge = _outer(f, grid, tail)
    return c * K, c * K_edge, R, R_edge


def apply_K(g, lam: float, epsilon: float, grid: TGrid, nu: float = 2.0):
    """Apply ``K`` to node values ``g`` (array shaped like ``grid.nodes``)."""
    ker = _kernel(float(nu), float(epsilon), grid)
    g = np.asarray(g, dtype=float).reshape(grid.nodes.shape)
    return _apply_K_kernel(g, float(lam), ker)[0]


@dataclass(frozen=True)
class GSolution:
    """Fixed point of ``g = 1 + K(g)`` on a grid.

    Attributes
    ----------
    g_values, R_values : ndarray
        Node values, shaped like ``grid.nodes``.
    iterations : int
        Picard iterations used.
    contraction_factor : float
        Ratio of the last two update norms.
    residual : float
        ``max |g - 1 - K(g)|`` at the returned iterate.
    """

    nu: float
    lam: float
    epsilon: float
    grid: TGrid
    g_values: np.ndarray = field(repr=False)
    R_values: np.ndarray = field(repr=False)
    iterations: int
    contraction_factor: float
    residual: float

    def g(self, t):
        return self.grid.interp(self.g_values, t)

    def R(self, t):
        return self.grid.interp(self.R_values, t)


def volterra_g(
    lam: float,
    epsilon: float,
    grid: TGrid | None = None,
    nu: float = 2.0,
    tol: float = 1e-12,
    max_iter: int = 500,
) -> GSolution:
    """Picard iteration for ``g = 1 + K(g)`` from ``g = 1``."""
    grid = grid or make_grid()
    lam, eps, nu = float(lam), float(epsilon), float(nu)
    ker = _kernel(nu, eps, grid)
    g = np.ones(grid.nodes.shape)
    prev_update = None
    bad = 0
    ratio = 0.0
    for it in range(1, max_iter + 1):
        K, _, R, _ = _apply_K_kernel(g, lam, ker, warn=False)
        g_new = 1.0 + K
        update = float(np.max(np.abs(g_new - g)))
        g = g_new
        if prev_update is not None and prev_update > 0.0:
            ratio = update / prev_update
            bad = bad + 1 if ratio > 0.9 else 0
            if bad >= 5:
                raise NonContractionError(
                    f"update ratio {ratio:.3f} > 0.9 for 5 iterations (lam={lam}, eps={eps})"
                )
        prev_update = update
        if update < tol:
            break
    else:
        raise NonContractionError(f"no convergence after {max_iter} iterations")
    K, _, R, _ = _apply_K_kernel(g, lam, ker, warn=True)
    resid = float(np.max(np.abs(g - 1.0 - K)))
    return GSolution(nu, lam, eps, grid, g, R, it, ratio, resid)


@dataclass(frozen=True)
class MinusBranch:
    """Light-side branch, normalized by ``g -> 1`` as ``t -> inf``.

    ``u = F + G``, ``w = (lam - 1) F + (lam + 1) G``, ``v = xi w`` and
    ``du/dy = -eps (lam u - w)``.  Scaled values ``e^t F``, ``e^t G`` avoid the
    exponential factor.
    """

    gsol: GSolution
    normalization: str = "g -> 1 at t -> inf, C = 1"

    @property
    def lam(self) -> float:
        return self.gsol.lam

    def scaled_FG(self, t):
        """``(e^t F, e^t G)`` at ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        gs = self.gsol
        lam = gs.lam
        _, _, lzeta = _weights(gs.nu, gs.epsilon, t)
        Z = np.exp((lam + 1.0) / (2.0 * gs.nu) * (lzeta - math.log(gs.nu)))
        return Z * 0.5 * (lam + 1.0) * gs.R(t), Z * gs.g(t)

    def scaled_UW(self, t):
        """``(e^t u, e^t w)`` at ``t``."""
        eF, eG = self.scaled_FG(t)
        lam = self.lam
        return eF + eG, (lam - 1.0) * eF + (lam + 1.0) * eG

    def samples(self, t):
        """``(t, F, G)`` at ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        eF, eG = self.scaled_FG(t)
        return t, eF * np.exp(-t), eG * np.exp(-t)

    def u(self, y):
        y = np.asarray(y, dtype=float)
        t = -self.gsol.epsilon * y
        U, _ = self.scaled_UW(t)
        return U * np.exp(-t)

    def w(self, y):
        t = -self.gsol.epsilon * np.asarray(y, dtype=float)
        _, W = self.scaled_UW(t)
        return W * np.exp(-t)

    def du(self, y):
        y = np.asarray(y, dtype=float)
        t = -self.gsol.epsilon * y
        U, W = self.scaled_UW(t)
        return -self.gsol.epsilon * (self.lam * U - W) * np.exp(-t)


def reconstruct_FG(gsol: GSolution) -> MinusBranch:
    """Wrap a converged fixed point as the light-side branch."""
    return MinusBranch(gsol)


# eps = 0 closed forms ----------------------------------------------------------
def _ab(lam: float, nu: float):
    return -(1.0 + lam) / (2.0 * nu), -1.0 / nu


def hypergeom_U0(lam: float, nu: float, t: float) -> tuple[float, float]:
    """``U0(t) = 2**(-(lam+1)/(2 nu)) U(a, b, 2t)`` and its t-derivative."""
    a, b = _ab(lam, nu)
    c = 2.0 ** (-(lam + 1.0) / (2.0 * nu))
    return c * kummer_u(a, b, 2.0 * t), 2.0 * c * kummer_u_deriv(a, b, 2.0 * t)


def hypergeom_F0G0(lam: float, nu: float, t: float) -> tuple[float, float]:
    """Closed-form light-side pair at ``eps = 0``.

    ``G0 = (U0 - U0'/2) e^{-t}`` and ``F0 = (U0'/2) e^{-t}``, so that
    ``F0 + G0 = U0 e^{-t}``.  At ``t = 0`` this gives
    ``G0(0) = (1 - lam)/2 U0(0)`` and ``F0(0) = (1 + lam)/2 U0(0)``.
    """
    if t < 0.0:
        raise ValueError("t must be non-negative")
    if t == 0.0:
        u0 = hypergeom_U0(lam, nu, 0.0)[0]
        return 0.5 * (1.0 + lam) * u0, 0.5 * (1.0 - lam) * u0
    u0, du0 = hypergeom_U0(lam, nu, t)
    e = math.exp(-t)
    return 0.5 * du0 * e, (u0 - 0.5 * du0) * e


def c0_lambda(lam: float, nu: float) -> float:
    """``C0(lam) = Gamma(1 + 1/nu) / Gamma(1 + (1 - lam)/(2 nu))``, so ``U0(0) = 2**(-(lam+1)/(2nu)) C0``."""
    return gamma_fn(1.0 + 1.0 / nu) / gamma_fn(1.0 + (1.0 - lam) / (2.0 * nu))
