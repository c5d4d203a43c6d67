"""Closed-form special functions and first-passage identities used as oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass

_SQRT_PI = math.sqrt(math.pi)
_TWO_OVER_SQRT_PI = 2.0 / _SQRT_PI
_SERIES_CUTOFF = 2.0

SUPPORTED_NU = (-0.5, 0.5, 1.5)


def _erf_series(x: float) -> float:
    # erf(x) = 2/sqrt(pi) e^{-x^2} sum_n x (2x^2)^n / (2n+1)!!, all terms positive
    if x == 0.0:
        return 0.0
    x2 = x * x
    term = x
    total = x
    n = 0
    while True:
        n += 1
        term *= 2.0 * x2 / (2 * n + 1)
        total += term
        if term <= 1e-17 * total:
            break
    return _TWO_OVER_SQRT_PI * math.exp(-x2) * total


def _erfcx_cf(x: float) -> float:
    # erfcx(x) = 1/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), modified Lentz
    tiny = 1e-300
    f = x
    c = x
    d = 0.0
    k = 1
    while True:
        a = 0.5 * k
        d = x + a * d
        d = tiny if d == 0.0 else d
        c = x + a / c
        c = tiny if c == 0.0 else c
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16 or k > 500:
            break
        k += 1
    return 1.0 / (_SQRT_PI * f)


def erfcx(x: float) -> float:
    """Scaled complementary error function e^{x^2} erfc(x)."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("erfcx needs a finite argument")
    if x >= _SERIES_CUTOFF:
        return _erfcx_cf(x)
    if x >= 0.0:
        return math.exp(x * x) * (1.0 - _erf_series(x))
    if x > -_SERIES_CUTOFF:
        return math.exp(x * x) * (1.0 + _erf_series(-x))
    return 2.0 * math.exp(x * x) - _erfcx_cf(-x)


def erfc(x: float) -> float:
    """Complementary error function, absolute error below 1e-12."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("erfc needs a finite argument")
    if x < 0.0:
        return 2.0 - erfc(-x)
    if x < _SERIES_CUTOFF:
        return 1.0 - _erf_series(x)
    if x > 27.3:
        return 0.0
    return math.exp(-x * x) * _erfcx_cf(x)


def erfc_inv(y: float) -> float:
    """Inverse of erfc on (0, 2), by bracketed Newton."""
    if not 0.0 < y < 2.0:
        raise ValueError("erfc_inv needs 0 < y < 2")
    if y > 1.0:
        return -erfc_inv(2.0 - y)
    lo, hi = 0.0, 1.0
    while erfc(hi) > y:
        hi *= 2.0
    x = 0.5 * (lo + hi)
    for _ in range(200):
        fx = erfc(x) - y
        if fx > 0:
            lo = x
        else:
            hi = x
        step = fx / (-_TWO_OVER_SQRT_PI * math.exp(-x * x))
        xn = x - step
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 1e-15 * max(1.0, abs(x)):
            return xn
        x = xn
    return x


def bessel_k_half(nu: float, x: float) -> float:
    """K_nu(x) for half-integer nu in {-1/2, 1/2, 3/2}."""
    if nu not in SUPPORTED_NU:
        raise ValueError(f"unsupported order nu={nu}; supported: {SUPPORTED_NU}")
    if not x > 0:
        raise ValueError("bessel_k_half needs x > 0")
    base = math.sqrt(math.pi / 2.0) * math.exp(-x) / math.sqrt(x)
    if nu == 1.5:
        return base * (1.0 + 1.0 / x)
    return base


@dataclass(frozen=True)
class PassageParams:
    rho: float
    T: float

    def __post_init__(self):
        if not (self.rho >= 0 and math.isfinite(self.rho)):
            raise ValueError(f"rho must be finite and >= 0, got {self.rho}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"T must be finite and > 0, got {self.T}")


def passage_density(t: float, rho: float) -> float:
    """Hitting-time density of level 0 from level rho for the generator d^2/dx^2."""
    if not t > 0:
        raise ValueError("passage_density needs t > 0")
    if not rho > 0:
        raise ValueError("passage_density needs rho > 0")
    return rho / math.sqrt(4.0 * math.pi * t ** 3) * math.exp(-rho * rho / (4.0 * t))


def truncated_mass(p: PassageParams) -> float:
    """Probability of hitting before time T."""
    if p.rho == 0:
        return 1.0
    return erfc(p.rho / (2.0 * math.sqrt(p.T)))


def discounted_passage(p: PassageParams) -> float:
    """int_0^T e^{-t} psi(t) dt via the two-erfc identity, cancellation-safe."""
    rho, T = p.rho, p.T
    if rho == 0:
        return 1.0
    s = math.sqrt(T)
    a = rho / (2.0 * s) - s
    b = rho / (2.0 * s) + s
    # e^{-rho-a^2} = e^{rho-b^2} = e^{-rho^2/(4T) - T}
    g = math.exp(-rho * rho / (4.0 * T) - T)
    second = 0.5 * g * erfcx(b)
    if a >= 0:
        first = 0.5 * g * erfcx(a)
    else:
        first = 0.5 * math.exp(-rho) * erfc(a)
    return first + second


def horizon_for_mass(rho: float, omega: float) -> float:
    """T with truncated_mass(rho, T) = omega (exact inversion)."""
    if not 0 < omega < 1:
        raise ValueError("omega must lie in (0, 1)")
    if not rho > 0:
        raise ValueError("rho must be positive")
    z = erfc_inv(omega)
    return (rho / (2.0 * z)) ** 2


def leading_order_log_mass(p: PassageParams) -> float:
    """log(1/omega) from the leading erfc asymptotic e^{-z^2}/(z sqrt(pi)), z = rho/(2 sqrt T)."""
    z = p.rho / (2.0 * math.sqrt(p.T))
    return z * z + math.log(z * _SQRT_PI)


def agmon_exponent_gap(rho: float, T: float) -> float:
    """rho^2/(4T) + T - rho, nonnegative with equality at T = rho/2."""
    return (rho - 2.0 * T) ** 2 / (4.0 * T)


def brownian_discount(x: float, lam: float) -> float:
    """E[e^{-lam tau}] for standard Brownian motion hitting 0 from x, via K_{-1/2}."""
    if not x > 0:
        raise ValueError("brownian_discount needs x > 0")
    if not lam > 0:
        raise ValueError("brownian_discount needs lam > 0")
    z = x * math.sqrt(2.0 * lam)
    return math.sqrt(2.0) * math.sqrt(z) / _SQRT_PI * bessel_k_half(-0.5, z)


def brownian_discount_closed(x: float, lam: float) -> float:
    if not x > 0 or not lam > 0:
        raise ValueError("brownian_discount_closed needs x > 0 and lam > 0")
    return math.exp(-x * math.sqrt(2.0 * lam))


_GAMMA_ABS = {-0.5: _SQRT_PI, 0.5: _SQRT_PI, 1.5: 0.5 * _SQRT_PI}


def bessel_discount(nu: float, x: float) -> float:
    """2^{nu+1} / (Gamma(|nu|) x^nu) K_nu(x), evaluated as displayed (may exceed 1)."""
    if nu not in SUPPORTED_NU:
        raise ValueError(f"unsupported order nu={nu}; supported: {SUPPORTED_NU}")
    if not x > 0:
        raise ValueError("bessel_discount needs x > 0")
    return 2.0 ** (nu + 1.0) / (_GAMMA_ABS[nu] * x ** nu) * bessel_k_half(nu, x)


def bessel_discount_flag(nu: float, x: float) -> bool:
    """True when the displayed formula leaves [0, 1], i.e. is not a valid discount."""
    v = bessel_discount(nu, x)
    return not (0.0 <= v <= 1.0)


# ---------------------------------------------------------------- oracles

@dataclass(frozen=True)
class OracleCheck:
    name: str
    value: float
    reference: float
    rel_error: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.rel_error <= self.tol


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def _bessel_residual(nu: float, x: float, rel_step: float = 5e-3) -> float:
    """|x^2 K'' + x K' - (x^2 + nu^2) K| / (x^2 K) with 7-point difference stencils."""
    h = rel_step * x
    f = [bessel_k_half(nu, x + k * h) for k in range(-3, 4)]
    d1 = (-f[0] + 9 * f[1] - 45 * f[2] + 45 * f[4] - 9 * f[5] + f[6]) / (60 * h)
    d2 = (2 * f[0] - 27 * f[1] + 270 * f[2] - 490 * f[3] + 270 * f[4] - 27 * f[5]
          + 2 * f[6]) / (180 * h * h)
    k = f[3]
    return abs(x * x * d2 + x * d1 - (x * x + nu * nu) * k) / (x * x * k)


def oracle_checks(tol: float = 1e-8) -> list[OracleCheck]:
    """Compare every closed form against mpmath quadrature or mpmath special functions."""
    import mpmath as mp

    mp.mp.dps = 30
    out: list[OracleCheck] = []

    def add(name, value, ref, tol_=tol):
        value, ref = float(value), float(ref)
        out.append(OracleCheck(name, float(value), ref, _rel(value, ref), tol_))

    def psi(rho):
        return lambda t: rho / mp.sqrt(4 * mp.pi * t ** 3) * mp.exp(-rho ** 2 / (4 * t))

    for rho in (0.3, 1.0, 4.0):
        peak = rho * rho / 6
        add(f"psi_mass rho={rho}", mp.quad(psi(rho), [0, peak, 10 * peak, mp.inf]), 1.0)
        lap = mp.quad(lambda t: mp.exp(-t) * psi(rho)(t), [0, peak, rho, mp.inf])
        add(f"psi_laplace rho={rho}", lap, mp.e ** (-rho))
        for T in (0.05, 0.5 * rho, 3.0):
            p = PassageParams(rho, T)
            cuts = mp.linspace(0, T, 33)
            m = mp.quad(psi(rho), cuts)
            d = mp.quad(lambda t: mp.exp(-t) * psi(rho)(t), cuts)
            add(f"truncated_mass rho={rho} T={T}", truncated_mass(p), m)
            add(f"discounted_passage rho={rho} T={T}", discounted_passage(p), d)
            if 0 < m < 1 and m > 1e-250:
                add(f"horizon_roundtrip rho={rho} T={T}", horizon_for_mass(rho, float(m)), T, 1e-6)
    for x in (-1.5, 0.0, 0.3, 1.9, 2.1, 5.0, 12.0):
        add(f"erfc x={x}", erfc(x), mp.erfc(x))
    for x in (0.0, 0.7, 2.5, 8.0, 40.0):
        add(f"erfcx x={x}", erfcx(x), mp.exp(mp.mpf(x) ** 2) * mp.erfc(x))
    for nu in SUPPORTED_NU:
        for x in (0.2, 1.0, 7.5):
            add(f"bessel_k nu={nu} x={x}", bessel_k_half(nu, x), mp.besselk(nu, x))
            r = _bessel_residual(nu, x)
            out.append(OracleCheck(f"bessel_ode nu={nu} x={x}", r, 0.0, r, tol))
    for x, lam in ((0.5, 0.5), (2.0, 0.125), (3.0, 2.0)):
        add(f"brownian_discount x={x} lam={lam}", brownian_discount(x, lam),
            brownian_discount_closed(x, lam))
    return out
