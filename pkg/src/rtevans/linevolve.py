"""Time-domain evolution of one transverse Fourier mode of the linearized system.

Per mode ``e^{iky}`` the weighted density perturbation ``tau`` and the
auxiliary vorticity-like field ``b`` obey

    d tau/dt = i k k0 psi,      d b/dt = -i k g tau,
    (d2/dx2 - k**2 - W0) psi = -b,

with Dirichlet ends on the spectral grid.  Since ``k0 >= 0`` and the
elliptic operator is positive, every discrete mode grows or decays at a
real rate, the largest of which is the spectral ``gamma(k)``; this makes the
run an independent check of the growth rate and of the ``e^{Lambda t}`` cap.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from .profile import PhysicalParams, l_eff_and_cap
from .spectral import SpectralResult, TridiagonalOperator, XGrid, _kinetic, sturm_count

__all__ = [
    "EvolveState",
    "GrowthFit",
    "Trajectory",
    "EllipticOperator",
    "PoorFitError",
    "elliptic_operator",
    "elliptic_solve_psi",
    "step",
    "evolve",
    "eigen_state",
    "random_state",
    "measure_growth",
    "pressure_diagnostic",
    "write_trajectory_csv",
]

R2_MIN = 0.999
ELLIPTIC_RTOL = 1e-10


class PoorFitError(RuntimeError):
    """Log-linear growth fit rejected (r**2 too low or degenerate trajectory)."""


@dataclass(frozen=True)
class EvolveState:
    """Per-mode fields at time ``t`` on the interior nodes of ``grid``.

    Attributes
    ----------
    t : float
        Time.
    tau_hat : ndarray of complex
        Weighted density perturbation ``rho0**(-1/2) sigma``.
    b_hat : ndarray of complex
        Auxiliary field ``rho0**(-1/2) [d_y(rho0 v1) - d_x(rho0 v2)]``.
    k : float
        Transverse wavenumber.
    """

    t: float
    tau_hat: np.ndarray = field(repr=False)
    b_hat: np.ndarray = field(repr=False)
    k: float
    grid: XGrid = field(repr=False)

    def __post_init__(self) -> None:
        m = self.grid.n - 2
        if self.tau_hat.shape != (m,) or self.b_hat.shape != (m,):
            raise ValueError(f"fields must have the interior length {m}")
        if not (np.all(np.isfinite(self.tau_hat)) and np.all(np.isfinite(self.b_hat))):
            raise ValueError("non-finite field values")

    def norm_tau(self) -> float:
        return _l2(self.grid, self.tau_hat)

    def norm_b(self) -> float:
        return _l2(self.grid, self.b_hat)

    def scaled(self, alpha: complex) -> "EvolveState":
        return replace(self, tau_hat=alpha * self.tau_hat, b_hat=alpha * self.b_hat)


@dataclass(frozen=True)
class GrowthFit:
    """Least-squares slope of ``log ||tau||`` over ``fit_window``."""

    gamma_measured: float
    fit_window: tuple[float, float]
    r_squared: float


@dataclass
class Trajectory:
    """Sampled norms of an evolution (one row per step, starting at ``t0``)."""

    t: np.ndarray
    norm_tau: np.ndarray
    norm_b: np.ndarray
    final: EvolveState = field(repr=False)

    def log_derivative(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.gradient(np.log(self.norm_tau), self.t)


def _l2(grid: XGrid, f: np.ndarray) -> float:
    return math.sqrt(float(np.sum(grid.cell * np.abs(f) ** 2)))


@dataclass(frozen=True)
class EllipticOperator:
    """``-d2/dx2 + k**2 + W0`` on the interior nodes in banded storage (unsymmetrized)."""

    grid: XGrid
    k: float
    ab: np.ndarray = field(repr=False)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = self.ab[1] * psi
        out[:-1] += self.ab[0, 1:] * psi[1:]
        out[1:] += self.ab[2, :-1] * psi[:-1]
        return out


def elliptic_operator(grid: XGrid, k: float) -> EllipticOperator:
    """Assemble ``-d2/dx2 + k**2 + W0`` and check that it is positive definite."""
    dx = np.diff(grid.x)
    m = grid.cell
    inv = 1.0 / dx
    ab = np.zeros((3, m.size))
    ab[1] = (inv[:-1] + inv[1:]) / m + k**2 + grid.W0[1:-1]
    ab[0, 1:] = -inv[1:-1] / m[:-1]
    ab[2, :-1] = -inv[1:-1] / m[1:]
    # same spectrum as the mass-symmetrized form used by the spectral solver
    kin_d, kin_o = _kinetic(grid, k)
    sym = TridiagonalOperator(k**2 * kin_d + k**2 + grid.W0[1:-1], k**2 * kin_o)
    if sturm_count(sym, 0.0) > 0:
        raise np.linalg.LinAlgError("elliptic operator is not positive definite on this grid")
    return EllipticOperator(grid, k, ab)


def elliptic_solve_psi(b_hat: np.ndarray, k: float, grid: XGrid, op: EllipticOperator | None = None) -> np.ndarray:
    """Solve ``(d2/dx2 - k**2 - W0) psi = -b`` with Dirichlet ends."""
    op = op or elliptic_operator(grid, k)
    psi = solve_banded((1, 1), op.ab, b_hat)
    scale = float(np.max(np.abs(b_hat)))
    if scale > 0.0:
        res = float(np.max(np.abs(op.apply(psi) - b_hat))) / scale
        if res > ELLIPTIC_RTOL:
            raise np.linalg.LinAlgError(f"elliptic residual {res:.1e} above {ELLIPTIC_RTOL}")
    return psi


def _rhs(tau, b, k, g, k0, op):
    psi = solve_banded((1, 1), op.ab, b)
    return 1j * k * k0 * psi, -1j * k * g * tau


def step(
    state: EvolveState,
    dt: float,
    params: PhysicalParams,
    op: EllipticOperator | None = None,
    *,
    check_dt: bool = True,
) -> EvolveState:
    """One classical RK4 step (one elliptic solve per stage)."""
    if check_dt:
        cap = l_eff_and_cap(params)[1]
        if abs(dt) > 0.1 / cap * (1.0 + 1e-12):
            raise ValueError(f"|dt| = {abs(dt)} exceeds the stability bound 0.1/Lambda = {0.1 / cap}")
    op = op or elliptic_operator(state.grid, state.k)
    k, g = state.k, params.g
    k0 = state.grid.k0[1:-1]
    t0, b0 = state.tau_hat, state.b_hat
    a1, c1 = _rhs(t0, b0, k, g, k0, op)
    a2, c2 = _rhs(t0 + 0.5 * dt * a1, b0 + 0.5 * dt * c1, k, g, k0, op)
    a3, c3 = _rhs(t0 + 0.5 * dt * a2, b0 + 0.5 * dt * c2, k, g, k0, op)
    a4, c4 = _rhs(t0 + dt * a3, b0 + dt * c3, k, g, k0, op)
    tau = t0 + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    b = b0 + dt / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
    return EvolveState(state.t + dt, tau, b, k, state.grid)


def evolve(state: EvolveState, t_end: float, params: PhysicalParams, dt: float | None = None) -> Trajectory:
    """Step from ``state.t`` to ``t_end`` with uniform steps no larger than ``dt``."""
    cap = l_eff_and_cap(params)[1]
    dt_max = 0.1 / cap if dt is None else dt
    span = t_end - state.t
    if span <= 0.0:
        raise ValueError("t_end must exceed the initial time")
    nsteps = int(math.ceil(span / dt_max - 1e-12))
    h = span / nsteps
    op = elliptic_operator(state.grid, state.k)
    ts = [state.t]
    nt = [state.norm_tau()]
    nb = [state.norm_b()]
    for _ in range(nsteps):
        state = step(state, h, params, op)
        ts.append(state.t)
        nt.append(state.norm_tau())
        nb.append(state.norm_b())
    return Trajectory(np.array(ts), np.array(nt), np.array(nb), state)


def eigen_state(result: SpectralResult) -> EvolveState:
    """Growing normal mode built from a spectral eigenmode.

    With ``psi`` the Schrodinger-form mode, ``tau = (g k**2/gamma**2) k0 psi``
    and ``b = -i (k g/gamma) tau`` grow exactly like ``e^{gamma t}`` under the
    discrete dynamics on the same grid.
    """
    grid = result.grid
    if grid is None:
        raise ValueError("result carries no grid")
    k, g, gam = result.k, result.params.g, result.gamma
    psi = result.phi.astype(complex)
    tau = g * k**2 / gam**2 * grid.k0[1:-1] * psi
    b = -1j * k * g / gam * tau
    norm = _l2(grid, tau)
    return EvolveState(0.0, tau / norm, b / norm, k, grid)


def random_state(grid: XGrid, k: float, rng: np.random.Generator, n_modes: int = 8) -> EvolveState:
    """Smooth random start: a few random bumps in the layer, unit ``||tau||``."""
    x = grid.interior
    width = grid.scale * 3.0
    tau = np.zeros(x.size, complex)
    b = np.zeros(x.size, complex)
    for _ in range(n_modes):
        c = grid.center + rng.normal(0.0, 2.0 * width)
        w = width * rng.uniform(0.5, 2.0)
        bump = np.exp(-(((x - c) / w) ** 2))
        tau += complex(*rng.normal(size=2)) * bump
        b += complex(*rng.normal(size=2)) * bump * k
    norm = _l2(grid, tau)
    return EvolveState(0.0, tau / norm, b / norm, k, grid)


def measure_growth(traj: Trajectory, *, r2_min: float = R2_MIN) -> GrowthFit:
    """Fit ``log ||tau||`` linearly over the last half of the trajectory."""
    t, n = traj.t, traj.norm_tau
    if t.size < 4 or not np.all(n > 0.0) or not np.all(np.isfinite(n)):
        raise PoorFitError("degenerate trajectory (zero or non-finite norms)")
    half = t.size // 2
    tw, lw = t[half:], np.log(n[half:])
    slope, icept = np.polyfit(tw, lw, 1)
    ss_res = float(np.sum((lw - (slope * tw + icept)) ** 2))
    ss_tot = float(np.sum((lw - lw.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 0.0
    if r2 < r2_min:
        raise PoorFitError(f"r^2 = {r2:.6f} below {r2_min}")
    return GrowthFit(float(slope), (float(tw[0]), float(tw[-1])), r2)


def pressure_diagnostic(state: EvolveState, params: PhysicalParams) -> np.ndarray:
    """Pressure mode from ``p'' - k0 p' - k**2 p = rho0**(1/2) g (tau' - k0 tau/2)``.

    Unforced case, Dirichlet ends, ``rho0`` in units of ``rho_a``.  Not used
    by the growth measurement.
    """
    grid = state.grid
    x = grid.x
    k0 = grid.k0[1:-1]
    tau = np.concatenate([[0.0], state.tau_hat, [0.0]])
    hm, hp = np.diff(x)[:-1], np.diff(x)[1:]
    dtau = (hm**2 * tau[2:] - hp**2 * tau[:-2] + (hp**2 - hm**2) * tau[1:-1]) / (hm * hp * (hm + hp))
    rhs = np.sqrt(grid.rho[1:-1]) * params.g * (dtau - 0.5 * k0 * state.tau_hat)
    den = hm * hp * (hm + hp)
    lo = 2.0 * hp / den + k0 * hp**2 / den
    up = 2.0 * hm / den - k0 * hm**2 / den
    dg = -2.0 * (hm + hp) / den - k0 * (hp**2 - hm**2) / den - state.k**2
    ab = np.zeros((3, dg.size))
    ab[0, 1:] = up[:-1]
    ab[1] = dg
    ab[2, :-1] = lo[1:]
    return solve_banded((1, 1), ab, rhs.astype(complex))


def write_trajectory_csv(traj: Trajectory, path, header_lines: list[str] | None = None) -> None:
    """Columns ``t, norm_tau, norm_b, log_derivative``."""
    dlog = traj.log_derivative()
    with open(path, "w", newline="") as fh:
        for line in header_lines or []:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["t", "norm_tau", "norm_b", "log_derivative"])
        for row in zip(traj.t, traj.norm_tau, traj.norm_b, dlog):
            w.writerow([f"{v:.17g}" for v in row])
