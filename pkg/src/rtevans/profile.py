"""Kull-Anisimov density profile.

The dimensionless density fraction solves ``xi' = xi**(nu+1) * (1 - xi)`` in the
scaled coordinate ``y = x / L0`` and is pinned by ``xi(0) = 1/2``.  The implicit
relation ``y(xi)`` is smooth in ``xi`` but stiff in ``y``, so the profile is
stored as a table of ``y`` on logit-spaced ``xi`` nodes and inverted by a
monotone cubic guess followed by a Newton polish on the closed-form ``y(xi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

__all__ = [
    "PhysicalParams",
    "ProfileEval",
    "Profile",
    "get_profile",
    "xi_of_y",
    "y_of_xi",
    "l_eff_and_cap",
    "k0_max_scaled",
]

_LN2 = math.log(2.0)
_SERIES_TERMS = 64
_TABLE_X = 40.0
_TABLE_N = 1601


class ProfileDomainError(ValueError):
    """Raised when a density fraction lies outside (0, 1)."""


@dataclass(frozen=True)
class PhysicalParams:
    """Constants of one ablation-front configuration.

    Parameters
    ----------
    nu : float
        Thermal conduction index, must exceed 1.
    g : float
        Gravity (length / time**2).
    L0 : float
        Profile length scale.
    rho_a : float
        Density of the ablated (dense) fluid.
    """

    nu: float = 2.0
    g: float = 1.0
    L0: float = 1.0
    rho_a: float = 1.0

    def __post_init__(self) -> None:
        for name in ("nu", "g", "L0", "rho_a"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.nu <= 1.0:
            raise ValueError(f"nu must be > 1, got {self.nu}")
        if self.g <= 0.0 or self.L0 <= 0.0 or self.rho_a <= 0.0:
            raise ValueError("g, L0 and rho_a must be positive")


@dataclass(frozen=True)
class ProfileEval:
    """Profile samples: ``xi``, ``xi_dot = dxi/dy`` and ``k0_scaled = xi_dot / xi``."""

    xi: np.ndarray
    xi_dot: np.ndarray
    k0_scaled: np.ndarray


def k0_max_scaled(nu: float) -> float:
    """Maximum of ``xi**nu * (1 - xi)``, reached at ``xi = nu / (nu + 1)``."""
    return nu**nu / (nu + 1.0) ** (nu + 1.0)


def _log_xi(x):
    return -np.logaddexp(0.0, -x)


def _log_one_minus_xi(x):
    return -np.logaddexp(0.0, x)


class Profile:
    """Profile for one conduction index, immutable after construction.

    All coordinates are scaled (``y = x / L0``).  The logit ``s = ln(xi/(1-xi))``
    is used internally because both tails are resolved in it.
    """

    def __init__(self, nu: float):
        if not nu > 1.0:
            raise ValueError(f"nu must be > 1, got {nu}")
        self.nu = float(nu)
        self.n_int = int(math.floor(self.nu))
        self.frac = self.nu - self.n_int
        if self.frac < 1e-12:
            self.frac = 0.0
        self._powers = [p for p in range(self.n_int + 1)]
        if self.frac > 0.0:
            m = np.arange(1, _SERIES_TERMS + 1)
            poch = np.cumprod((self.frac + m - 1.0) / m)
            self._h_coef = poch / m
            self._i_half = float(self._small_series(np.array([0.5]))[0])
            self._h_half = float(self._large_series(np.array([0.5]))[0])
        s_nodes = np.linspace(-_TABLE_X, _TABLE_X, _TABLE_N)
        self.table_s = s_nodes
        self.table_y = self._tabulate(s_nodes)
        self._guess = PchipInterpolator(self.table_y, s_nodes, extrapolate=False)

    # closed-form y(xi) ------------------------------------------------
    def _small_series(self, xi):
        c = self.frac
        j = np.arange(_SERIES_TERMS)[:, None]
        xi = np.asarray(xi, dtype=float)[None, :]
        terms = xi ** (j + 1.0 - c) / (j + 1.0 - c) - xi ** (j + 1.0) / (j + 1.0)
        return terms.sum(axis=0)

    def _large_series(self, delta):
        m = np.arange(1, _SERIES_TERMS + 1)[:, None]
        delta = np.asarray(delta, dtype=float)[None, :]
        return (self._h_coef[:, None] * delta**m).sum(axis=0)

    def _remainder(self, s):
        """Integral from 1/2 of the regular part left after removing the poles."""
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        if self.frac == 0.0:
            return out
        xi = np.exp(_log_xi(s))
        delta = np.exp(_log_one_minus_xi(s))
        low = s <= 0.0
        if np.any(low):
            out[low] = self._small_series(xi[low]) - self._i_half
        if np.any(~low):
            out[~low] = self._h_half - self._large_series(delta[~low])
        return out

    def _singular_part(self, s):
        lx = _log_xi(s)
        total = -_log_one_minus_xi(s) - _LN2
        for p in self._powers:
            e = p - self.nu
            if abs(e) < 1e-14:
                total = total + lx + _LN2
            else:
                total = total + (np.exp(e * lx) - 2.0 ** (-e)) / e
        return total

    def y_of_logit(self, s):
        """Scaled coordinate as a function of the logit of ``xi``."""
        s = np.asarray(s, dtype=float)
        return self._singular_part(s) + self._remainder(s)

    # quadrature route (table and cross-check) -------------------------
    def _regular_in_delta(self, delta):
        """Regular integrand written in ``delta = 1 - eta`` (accurate near eta = 1)."""
        if delta == 0.0:
            return self.frac
        return math.expm1(-self.frac * math.log1p(-delta)) / delta

    def _remainder_quad(self, s: float) -> float:
        xi = math.exp(float(_log_xi(s)))
        delta = math.exp(float(_log_one_minus_xi(s)))
        if s <= 0.0:
            # eta = u**(1/(1-c)) removes the eta**(-c) endpoint singularity
            e = 1.0 / (1.0 - self.frac)
            f = lambda u: e / (1.0 - u**e)
            val, _ = integrate.quad(
                f, 0.5 ** (1.0 - self.frac), xi ** (1.0 - self.frac),
                epsabs=1e-12, epsrel=1e-13, limit=200,
            )
            val += float(_log_one_minus_xi(s)) + _LN2
        else:
            val, _ = integrate.quad(
                self._regular_in_delta, delta, 0.5, epsabs=1e-12, epsrel=1e-13, limit=200
            )
        return val

    def y_of_xi_quad(self, xi: float) -> float:
        """``y(xi)`` with the regular part integrated by adaptive Gauss-Kronrod."""
        xi = float(xi)
        if not 0.0 < xi < 1.0:
            raise ProfileDomainError(f"xi must lie in (0, 1), got {xi}")
        s = math.log(xi) - math.log1p(-xi)
        return self.y_of_logit_quad(s)

    def y_of_logit_quad(self, s: float) -> float:
        total = float(self._singular_part(np.array(float(s))))
        if self.frac > 0.0:
            total += self._remainder_quad(float(s))
        return total

    def _tabulate(self, s_nodes):
        y = np.asarray(self._singular_part(s_nodes), dtype=float).copy()
        if self.frac == 0.0:
            return y
        acc = np.array([self._remainder_quad(s) for s in s_nodes])
        return y + acc

    # inversion ---------------------------------------------------------
    def _initial_logit(self, y):
        s0 = np.empty_like(y)
        inside = (y >= self.table_y[0]) & (y <= self.table_y[-1])
        s0[inside] = self._guess(y[inside])
        left = y < self.table_y[0]
        if np.any(left):
            s0[left] = -np.log(self.nu * (-y[left])) / self.nu
        right = y > self.table_y[-1]
        if np.any(right):
            s0[right] = y[right] + (self.table_s[-1] - self.table_y[-1])
        return s0

    def logit_of_y(self, y):
        """Logit of ``xi(y)``, Newton-polished on the closed-form ``y(xi)``."""
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y1 = np.atleast_1d(y)
        s = self._initial_logit(y1)
        active = np.ones(s.shape, dtype=bool)
        for _ in range(60):
            sa = s[active]
            resid = self.y_of_logit(sa) - y1[active]
            step = np.clip(resid * np.exp(self.nu * _log_xi(sa)), -4.0, 4.0)
            s[active] = sa - step
            # roundoff in y(s) floors the step near a few ulps of s
            done = np.abs(step) <= 1e-14 * (1.0 + np.abs(sa))
            active[np.flatnonzero(active)[done]] = False
            if not np.any(active):
                break
        return s[0] if scalar else s

    def xi(self, y):
        return np.exp(_log_xi(self.logit_of_y(y)))

    def evaluate(self, y) -> ProfileEval:
        s = self.logit_of_y(y)
        lx = _log_xi(s)
        xi = np.exp(lx)
        k0 = np.exp(self.nu * lx + _log_one_minus_xi(s))
        return ProfileEval(xi=xi, xi_dot=xi * k0, k0_scaled=k0)

    def y_of_xi(self, xi):
        xi = np.asarray(xi, dtype=float)
        if np.any(~((xi > 0.0) & (xi < 1.0))):
            raise ProfileDomainError("xi must lie in (0, 1)")
        s = np.log(xi) - np.log1p(-xi)
        return self.y_of_logit(s)


@lru_cache(maxsize=32)
def get_profile(nu: float) -> Profile:
    """Shared, cached profile for one conduction index."""
    return Profile(float(nu))


def xi_of_y(params: PhysicalParams, y) -> ProfileEval:
    """Profile samples at scaled coordinate(s) ``y``."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    return get_profile(params.nu).evaluate(y)


def y_of_xi(params: PhysicalParams, xi_target):
    """Scaled coordinate where the profile reaches ``xi_target``."""
    return get_profile(params.nu).y_of_xi(xi_target)


def l_eff_and_cap(params: PhysicalParams) -> tuple[float, float, float]:
    """Return ``(L_eff, Lambda, xi_star)``: effective length, growth cap and argmax of k0."""
    nu = params.nu
    l_eff = params.L0 / k0_max_scaled(nu)
    return l_eff, math.sqrt(params.g / l_eff), nu / (nu + 1.0)
