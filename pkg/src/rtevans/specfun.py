"""Gamma function and Kummer confluent hypergeometric functions (real arguments)."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from scipy import integrate

__all__ = [
    "GammaPoleError",
    "KummerParams",
    "PrecisionWarning",
    "gamma_fn",
    "rgamma",
    "kummer_m",
    "kummer_m_deriv",
    "kummer_u",
    "kummer_u_deriv",
    "Z_SWITCH",
]

# Lanczos approximation, g = 7, nine terms.
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

Z_SWITCH = 30.0
Z_CONNECTION = 1.0
M_MAX_Z = 700.0
_B_INT_TOL = 1e-6


class GammaPoleError(ValueError):
    """Gamma evaluated at a non-positive integer."""


class PrecisionWarning(RuntimeWarning):
    """A series was truncated before reaching double precision."""


@dataclass(frozen=True)
class KummerParams:
    a: float
    b: float
    z: float


def _is_nonpositive_int(x: float) -> bool:
    return x <= 0.0 and x == math.floor(x)


def _sin_pi(x: float) -> float:
    n = round(x)
    r = x - n
    s = math.sin(math.pi * r)
    return -s if n % 2 else s


def gamma_fn(x: float) -> float:
    """Gamma function, relative accuracy about 1e-14 on [-10, 30]."""
    x = float(x)
    if _is_nonpositive_int(x):
        raise GammaPoleError(f"Gamma has a pole at {x}")
    if x < 0.5:
        return math.pi / (_sin_pi(x) * gamma_fn(1.0 - x))
    x -= 1.0
    acc = _LANCZOS[0]
    for i in range(1, len(_LANCZOS)):
        acc += _LANCZOS[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return _SQRT_2PI * math.exp((x + 0.5) * math.log(t) - t) * acc


def rgamma(x: float) -> float:
    """Reciprocal Gamma, zero at the poles."""
    if _is_nonpositive_int(float(x)):
        return 0.0
    return 1.0 / gamma_fn(x)


def _check_b(b: float) -> None:
    if abs(b - round(b)) < _B_INT_TOL:
        raise ValueError(f"b = {b} is too close to an integer (logarithmic case not supported)")


def kummer_m(a, b=None, z=None) -> float:
    """Kummer's M(a, b, z) by its power series (z >= 0)."""
    a, b, z = _unpack(a, b, z)
    if _is_nonpositive_int(b):
        raise ValueError("b must not be a non-positive integer")
    if z < 0.0:
        raise ValueError("z must be non-negative")
    if z > M_MAX_Z:
        raise OverflowError(f"M series limited to z <= {M_MAX_Z}")
    term = 1.0
    total = 1.0
    n = 0
    while True:
        term *= (a + n) / (b + n) * z / (n + 1.0)
        total += term
        n += 1
        if term == 0.0:
            break
        if n > z and abs(term) <= 1e-17 * abs(total):
            break
        if n > 5000:
            warnings.warn("M series did not converge", PrecisionWarning, stacklevel=2)
            break
    return total


def kummer_m_deriv(a, b=None, z=None) -> float:
    """dM/dz = (a/b) M(a+1, b+1, z)."""
    a, b, z = _unpack(a, b, z)
    return a / b * kummer_m(a + 1.0, b + 1.0, z)


def _u_connection(a: float, b: float, z: float) -> float:
    first = kummer_m(a, b, z) * rgamma(1.0 + a - b) * rgamma(b)
    second = 0.0
    ra = rgamma(a)
    if ra != 0.0 and z > 0.0:
        second = z ** (1.0 - b) * kummer_m(1.0 + a - b, 2.0 - b, z) * ra * rgamma(2.0 - b)
    return math.pi / _sin_pi(b) * (first - second)


def _u_asymptotic(a: float, b: float, z: float, warn: bool = True) -> tuple[float, float]:
    """Asymptotic series truncated at its smallest term; returns (value, relative tail)."""
    total = 1.0
    term = 1.0
    best = math.inf
    n = 0
    while n < 200:
        nxt = term * (a + n) * (1.0 + a - b + n) / ((n + 1.0) * (-z))
        if abs(nxt) >= abs(term) and n > 0:
            break
        term = nxt
        total += term
        n += 1
        best = abs(term)
        if best <= 1e-17 * abs(total):
            break
    rel = best / abs(total) if total != 0.0 else math.inf
    if warn and rel > 1e-13:
        warnings.warn(
            f"asymptotic U series stalls at relative term {rel:.1e} (z = {z})",
            PrecisionWarning,
            stacklevel=3,
        )
    return z ** (-a) * total, rel


def _u_integral(a: float, b: float, z: float) -> float:
    """Laplace integral for a >= 1, where the integrand is bounded at the origin."""
    f = lambda t: math.exp(-z * t) * t ** (a - 1.0) * (1.0 + t) ** (b - a - 1.0)
    val, _ = integrate.quad(f, 0.0, math.inf, epsabs=0.0, epsrel=2e-14, limit=400)
    return val * rgamma(a)


def _u_recurrence(a: float, b: float, z: float) -> float:
    """U(a, b, z) from U(a+m), U(a+m+1) by downward recurrence in a (stable for U)."""
    m = max(0, math.ceil(1.0 - a))
    if m == 0:
        return _u_integral(a, b, z)
    top = a + m
    u_hi = _u_integral(top + 1.0, b, z)
    u_mid = _u_integral(top, b, z)
    for k in range(m):
        c = top - k
        u_lo = -(b - 2.0 * c - z) * u_mid - c * (c - b + 1.0) * u_hi
        u_hi, u_mid = u_mid, u_lo
    return u_mid


def _unpack(a, b, z):
    if isinstance(a, KummerParams):
        return a.a, a.b, a.z
    return float(a), float(b), float(z)


def kummer_u(a, b=None, z=None, method: str = "auto") -> float:
    """Tricomi's U(a, b, z) for real a, non-integer b and z >= 0.

    Accepts either ``(a, b, z)`` or a single :class:`KummerParams`.  With
    ``method="auto"`` the connection formula is used for ``z <= 1``, the
    asymptotic series beyond ``Z_SWITCH`` when it reaches full precision, and
    otherwise a Laplace integral followed by downward recurrence in ``a``.
    ``method="connection"`` forces the connection formula and warns past
    ``Z_SWITCH``, where it cancels like ``e**z``.
    """
    a, b, z = _unpack(a, b, z)
    _check_b(b)
    if z < 0.0:
        raise ValueError("z must be non-negative")
    if z == 0.0:
        if b >= 1.0:
            raise ValueError("U(a, b, 0) is infinite for b >= 1")
        return gamma_fn(1.0 - b) * rgamma(1.0 + a - b)
    if method == "connection":
        if z > Z_SWITCH:
            warnings.warn(
                f"connection formula at z = {z} > {Z_SWITCH} loses about {z / math.log(10):.0f} digits",
                PrecisionWarning,
                stacklevel=2,
            )
        return _u_connection(a, b, z)
    if method == "asymptotic":
        return _u_asymptotic(a, b, z)[0]
    if method == "integral":
        return _u_recurrence(a, b, z)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    if _is_nonpositive_int(a):
        # polynomial case: the asymptotic series terminates
        return _u_asymptotic(a, b, z, warn=False)[0]
    if z <= Z_CONNECTION:
        return _u_connection(a, b, z)
    if z > Z_SWITCH:
        val, rel = _u_asymptotic(a, b, z, warn=False)
        if rel <= 1e-15:
            return val
    return _u_recurrence(a, b, z)


def kummer_u_deriv(a, b=None, z=None) -> float:
    """dU/dz = -a U(a+1, b+1, z)."""
    a, b, z = _unpack(a, b, z)
    if a == 0.0:
        return 0.0
    return -a * kummer_u(a + 1.0, b + 1.0, z)
