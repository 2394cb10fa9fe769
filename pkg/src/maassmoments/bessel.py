"""Bessel functions of complex (especially purely imaginary) order.

The trace-formula kernels need J_{2it}(x), I_{2it}(x) and K_{2it}(x) for real
t in windows up to ~60 and arguments up to a few hundred.  Everything here is
organised around numerically stable *rescaled* quantities:

* ``K_{it}(x)`` is exponentially small, of size e^{-pi t/2}; we compute the
  rescaled ``Kt = e^{pi t/2} K_{it}(x)`` which is O(t^{-1/3}) and double
  friendly.
* ``J_{it}(x)`` grows like e^{pi t/2}; the kernel ``J_{it}(x)/cosh(pi t/2)``
  is O(1).

Three evaluation routes are used and cross-checked:

1. power series (with automatic mpmath escalation when the alternating sum
   cancels too hard in doubles),
2. the classical integral representations on [0, pi/2] / [0, pi] for J and I
   and the real Laplace-type integral for K at x >= 1,
3. transport along the Bessel ODE in x, seeded where route 1 or 2 is benign.
   Both J (oscillatory everywhere) and the rescaled K transported towards
   smaller x (recessive direction) are stable under the transport.

Public operations carry EvalResult error estimates; the grid/array helpers
used by the trace-formula modules return plain ndarrays and are validated
against the public operations in the test-suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath as mp
import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import loggamma as _sp_loggamma

from .quadrature import integrate_line
from .result import EvalResult

__all__ = [
    "BesselOrder", "KBoundCertificate",
    "bessel_J", "bessel_I", "bessel_K_it", "bessel_K_it_scaled",
    "bessel_K_asymptotic", "phi_phase", "phi_phase_d1", "phi_phase_d2",
    "check_K_uniform_bound", "check_J_bound",
    "kbessel_scaled_grid", "jkernel_cosh_grid", "ikernel_cosh_grid",
]

GAMMA_THIRD = 2.678938534707747633  # Gamma(1/3)


class BesselDomainError(ValueError):
    pass


@dataclass(frozen=True)
class BesselOrder:
    """Order nu of a Bessel function; trace-formula use has nu = i*tau."""

    nu: complex

    def requires_series(self) -> bool:
        return complex(self.nu).real <= -0.5


# ----------------------------------------------------------------------------
# Power series with cancellation-aware escalation
# ----------------------------------------------------------------------------

_ESCALATE_RATIO = 1e9


def _series_double(nu: complex, x: float, sign: float):
    """sum_k sign^k (x/2)^(nu+2k) / (k! Gamma(nu+k+1)) in doubles.

    Returns (value, peak/|value| cancellation ratio).
    """
    q = 0.25 * x * x * sign
    t0 = np.exp(nu * np.log(x / 2.0) - _sp_loggamma(nu + 1.0))
    term = t0
    acc = t0
    peak = abs(t0)
    for k in range(420):
        term = term * q / ((k + 1.0) * (nu + k + 1.0))
        acc += term
        a = abs(term)
        peak = max(peak, a)
        if a < 1e-20 * max(peak * 1e-16, abs(acc)) and k > 3:
            break
    ratio = peak / max(abs(acc), 5e-324)
    return acc, ratio


def _series_mp(nu: complex, x: float, sign: int, dps: int):
    with mp.workdps(dps):
        nuc = mp.mpc(nu)
        q = mp.mpf(x) ** 2 / 4 * sign
        term = mp.e ** (nuc * mp.log(mp.mpf(x) / 2) - mp.loggamma(nuc + 1))
        acc = term
        k = 0
        while True:
            term = term * q / ((k + 1) * (nuc + k + 1))
            acc += term
            k += 1
            if abs(term) < mp.mpf(10) ** (-dps - 5) * (1 + abs(acc)) and k > 3:
                break
        return complex(acc)


def _series_JI(nu: complex, x: float, sign: int):
    """Series evaluation with escalation; sign=-1 for J, +1 for I."""
    val, ratio = _series_double(nu, x, float(sign))
    if ratio < _ESCALATE_RATIO:
        err = abs(val) * 1e-15 * max(1.0, ratio * 1e-7)
        return complex(val), err
    dps = int(20 + math.log10(ratio))
    val = _series_mp(nu, x, sign, dps)
    return val, abs(val) * 1e-14


def _integral_JI(nu: complex, x: float, kind: str, tol: float = 1e-12):
    """Classical real-integral representations, Re nu > -1/2.

    J: 2 (x/2)^nu / (sqrt(pi) Gamma(nu+1/2)) * int_0^{pi/2} sin^{2nu}(th) cos(x cos th) dth
    I:   (x/2)^nu / (sqrt(pi) Gamma(nu+1/2)) * int_0^{pi}  sin^{2nu}(th) e^{x cos th}  dth

    Evaluated after the substitution u = log sin(th), which turns the wild
    endpoint oscillation of sin^{2 i tau}(th) into a fixed-frequency factor
    e^{(2 nu + 1) u} with exponential decay:

        int_0^{pi/2} sin^{2nu}(th) w(cos th) dth
            = int_{-inf}^0 e^{(2nu+1)u} w(sqrt(1-e^{2u})) / sqrt(1-e^{2u}) du.
    """
    nu = complex(nu)
    if nu.real <= -0.5:
        raise BesselDomainError(f"integral route needs Re nu > -1/2, got {nu}")
    logpre = nu * np.log(x / 2.0) - _sp_loggamma(nu + 0.5) - 0.5 * math.log(math.pi)

    if kind == "J":
        logpre = logpre + math.log(2.0)

        def w(c):
            return np.cos(x * c)
    else:

        def w(c):
            # both halves of [0, pi] folded onto cos th = +-sqrt(1-e^{2u})
            return 2.0 * np.cosh(x * c)

    # main piece in the theta variable, endpoint piece in u = log sin(theta)
    theta0 = 0.6

    def f_theta(th):
        return np.exp(2.0 * nu * np.log(np.sin(th))) * w(np.cos(th))

    def f_u(u):
        e2u = np.exp(2.0 * u)
        c = np.sqrt(1.0 - e2u)
        return np.exp((2.0 * nu + 1.0) * u) * w(c) / c

    decay = 2.0 * nu.real + 1.0
    u_hi = math.log(math.sin(theta0))
    u_lo = u_hi - 42.0 / decay
    r1 = integrate_line(f_theta, theta0, 0.5 * math.pi, tol=tol)
    r2 = integrate_line(f_u, u_lo, u_hi, tol=tol)
    r_val = r1.value + r2.value
    r_err = r1.err + r2.err + math.exp(decay * u_lo) / decay
    val = np.exp(logpre) * r_val
    return complex(val), abs(np.exp(logpre)) * r_err + abs(val) * 1e-14


def bessel_J(nu, x: float, route: str = "auto") -> EvalResult:
    """J_nu(x) for complex order, x > 0.

    route: "series", "integral" (Re nu > -1/2 only), or "auto" (series with
    escalation).  |nu| <= 200 and x <= 1e4 are enforced.
    """
    nu = complex(getattr(nu, "nu", nu))
    if x <= 0:
        raise BesselDomainError("argument must be positive")
    if abs(nu) > 200 or x > 1e4:
        raise BesselDomainError("order/argument outside the validated range")
    if route == "integral":
        val, err = _integral_JI(nu, x, "J")
    else:
        val, err = _series_JI(nu, x, -1)
    return EvalResult(val, err)


def bessel_I(nu, x: float, route: str = "auto") -> EvalResult:
    """I_nu(x) for complex order, x > 0 (same ranges as bessel_J)."""
    nu = complex(getattr(nu, "nu", nu))
    if x <= 0:
        raise BesselDomainError("argument must be positive")
    if abs(nu) > 200 or x > 1e4:
        raise BesselDomainError("order/argument outside the validated range")
    if route == "integral":
        val, err = _integral_JI(nu, x, "I")
    else:
        val, err = _series_JI(nu, x, +1)
    return EvalResult(val, err)


# ----------------------------------------------------------------------------
# K_{it}(x), rescaled transport, and the uniform-bound certificate
# ----------------------------------------------------------------------------

def _k_quad_scaled(t: float, x: float, need_deriv: bool = False):
    """e^{pi t/2 - hold} quadrature of int_0^inf e^{-x cosh u} cos(t u) du.

    Only used where the integral does not cancel (x >= ~1.6 t), i.e. the
    integrand scale e^{-x} matches the value scale.  Returns Kt (and dKt/dx).
    """
    umax = math.acosh(max(720.0 / x, 2.0))

    def f(u):
        return np.exp(-x * (np.cosh(u) - 1.0)) * np.cos(t * u)

    r = integrate_line(f, 0.0, umax, tol=1e-13)
    # value = e^{pi t/2} e^{-x} * r  evaluated in log space
    lg = 0.5 * math.pi * t - x
    kt = math.exp(lg) * r.value.real
    if not need_deriv:
        return kt

    def fd(u):
        return np.exp(-x * (np.cosh(u) - 1.0)) * np.cosh(u) * np.cos(t * u)

    rd = integrate_line(fd, 0.0, umax, tol=1e-13)
    dkt = -math.exp(lg) * rd.value.real
    return kt, dkt


def _k_seed_x(t: float) -> float:
    """Start abscissa where the Laplace integral for K is cancellation-free.

    The quadrature loses ~0.43*max(0, pi t/2 - x + t acos(t/x) - sqrt(x^2-t^2))
    digits; below t ~ 45 the linear choice keeps the loss under ~7 digits.
    Larger t seeds the logarithmic (Riccati) transport at x ~ t^2/4 where the
    cosine completes less than one oscillation across the Laplace peak.
    """
    return 1.62 * t + 22.0


@lru_cache(maxsize=256)
def _kbessel_scaled_solver(t: float, x_min: float):
    """Dense rescaled-K evaluator on [x_min, quad-safe]: piecewise transport.

    w'' = -w'/x + (1 - t^2/x^2) w.  Backward transport follows the solution
    that grows toward smaller x (K is recessive at +inf), so the direction is
    numerically stable.  For t > 45 the stretch from the far seed x ~ t^2/4
    down to ~1.06 t runs on v = log Kt via the Riccati form, which needs no
    underflow headroom; the linear form takes over through the oscillatory
    range.  Returns (evaluate, x_hi): abscissae above x_hi must use direct
    quadrature.
    """
    x0 = _k_seed_x(t)
    ric = None
    if False:
        pass
    else:
        X0 = max(t * t / 21.0, x0)
        umax = math.acosh(max(720.0 / X0, 2.0))
        ra = integrate_line(lambda u: np.exp(-X0 * (np.cosh(u) - 1.0)) * np.cos(t * u),
                            0.0, umax, tol=1e-13)
        rb = integrate_line(lambda u: np.exp(-X0 * (np.cosh(u) - 1.0)) * np.cosh(u) * np.cos(t * u),
                            0.0, umax, tol=1e-13)
        v0 = 0.5 * math.pi * t - X0 + math.log(ra.value.real)
        w0 = -rb.value.real / ra.value.real
        x_sw = max(1.06 * t, x_min, 0.3)

        def riccati(x, y):
            return [y[1], -y[1] * y[1] - y[1] / x + 1.0 - (t * t) / (x * x)]

        ric = solve_ivp(riccati, (X0, x_sw), [v0, w0], method="DOP853",
                        rtol=1e-12, atol=1e-13, dense_output=True)
        if not ric.success:
            raise RuntimeError(f"log-form K transport failed at t={t}: {ric.message}")
        v_sw, w_sw = float(ric.y[0][-1]), float(ric.y[1][-1])
        k0 = math.exp(v_sw)
        dk0 = w_sw * k0
        x0 = X0

    lin = None
    if x_min < x_sw:

        def rhs(x, y):
            return [y[1], -y[1] / x + (1.0 - (t * t) / (x * x)) * y[0]]

        lin = solve_ivp(rhs, (x_sw, x_min), [k0, dk0], method="DOP853",
                        rtol=2e-13, atol=1e-280, dense_output=True)
        if not lin.success:
            raise RuntimeError(f"K-Bessel transport failed at t={t}: {lin.message}")

    def evaluate(x, deriv: bool = False):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(xs.shape)
        dout = np.empty(xs.shape)
        done = np.zeros(xs.shape, dtype=bool)
        if lin is not None:
            m = xs <= x_sw
            if np.any(m):
                vv = lin.sol(xs[m])
                out[m] = vv[0]
                dout[m] = vv[1]
                done[m] = True
        if ric is not None:
            m = (~done) & (xs <= ric.t[0])
            if np.any(m):
                vv = ric.sol(xs[m])
                out[m] = np.exp(vv[0])
                dout[m] = vv[1] * out[m]
                done[m] = True
        m = (~done) & (np.abs(xs - x_sw) < 1e-9)
        out[m] = k0
        dout[m] = dk0
        done[m] = True
        if not np.all(done):
            raise ValueError("query outside transported range")
        if deriv:
            return (out, dout) if np.ndim(x) else (float(out[0]), float(dout[0]))
        return out if np.ndim(x) else float(out[0])

    return evaluate, x0


def _k_quad_point(t: float) -> float:
    """Abscissa beyond which the Laplace quadrature keeps ~11 digits: the
    cancellation loss is t^2/(2x) nats for x past the turning point."""
    return max(_k_seed_x(t), t * t / 21.0)


@lru_cache(maxsize=8192)
def _k_seed_pair(t: float, x: float):
    """(Kt, Kt') at x >= 1.06 t + 0.5, via quadrature if benign there or a
    short log-form (Riccati) hop from the benign abscissa otherwise."""
    if x >= _k_quad_point(t):
        return _k_quad_scaled(t, x, need_deriv=True)
    X0 = max(_k_quad_point(t), x + 1.0)
    k0, dk0 = _k_quad_scaled(t, X0, need_deriv=True)
    v0, w0 = math.log(abs(k0)), dk0 / k0

    def riccati(xx, y):
        return [y[1], -y[1] * y[1] - y[1] / xx + 1.0 - (t * t) / (xx * xx)]

    ric = solve_ivp(riccati, (X0, x), [v0, w0], method="DOP853",
                    rtol=1e-11, atol=1e-12)
    if not ric.success:
        raise RuntimeError(f"seed transport failed at t={t}: {ric.message}")
    val = math.exp(float(ric.y[0][-1]))
    return val, float(ric.y[1][-1]) * val


def bessel_K_it_scaled(t: float, x: float) -> float:
    """Rescaled e^{pi t/2} K_{it}(x) for t >= 0, x > 0 (fast double path)."""
    t = float(t)
    x = float(x)
    if t < 0 or x <= 0:
        raise BesselDomainError("need t >= 0 and x > 0")
    if x >= _k_quad_point(t):
        return _k_quad_scaled(t, x)
    ev, hi = _kbessel_scaled_solver(t, min(x, 0.25))
    return ev(x)


def kbessel_scaled_grid(t: float, xs: np.ndarray) -> np.ndarray:
    """e^{pi t/2} K_{it}(x) on an array of x (shared dense ODE solution)."""
    xs = np.asarray(xs, dtype=float)
    out = np.empty_like(xs)
    ev, hi = _kbessel_scaled_solver(t, float(min(np.min(xs), 0.25)))
    inside = xs <= hi
    if np.any(inside):
        out[inside] = ev(xs[inside])
    for i in np.nonzero(~inside)[0]:
        out[i] = _k_quad_scaled(t, float(xs[i]))
    return out


def _k_identity_route(t: float, x: float):
    """K_{it}(x) via (pi/2)(I_{-it} - I_{it})/sin(i pi t) = -pi Im I_{it}/sinh(pi t).

    Valid for t > 0; series-based, so meant for small x.
    """
    w, werr = _series_JI(1j * t, x, +1)
    sh = math.sinh(math.pi * t)
    val = -math.pi * w.imag / sh
    return val, math.pi * werr / sh


def bessel_K_it(t: float, x: float) -> EvalResult:
    """Real K_{it}(x) for real t in [0, 500], 0 < x <= 1e4.

    x < 1 uses the I-difference identity (power-series route); x >= 1 uses
    the real integral, transported along the ODE through the cancelling
    oscillatory regime.  The two routes agree on the seam x in [1, 2].
    """
    t = float(t)
    x = float(x)
    if not (0 <= t <= 500) or not (0 < x <= 1e4):
        raise BesselDomainError(f"(t, x) = ({t}, {x}) outside the validated range")
    scale = math.exp(-0.5 * math.pi * t)
    if x < 1.0 and t >= 0.05:
        val, err = _k_identity_route(t, x)
        return EvalResult(val, err + abs(val) * 1e-13)
    if x < 1.0:
        # t ~ 0: the Laplace integral is cancellation-free
        umax = math.acosh(max(720.0 / x, 2.0))
        r = integrate_line(lambda u: np.exp(-x * np.cosh(u)) * np.cos(t * u),
                           0.0, umax, tol=1e-14)
        return EvalResult(r.value.real, r.err + 1e-16)
    kt = bessel_K_it_scaled(t, x)
    val = scale * kt
    return EvalResult(val, abs(val) * (2e-12 + 4e-13 * t) + 5e-300)


# -- asymptotic form for K_{2it}(X) in the bulk oscillatory regime -----------

def phi_phase(t, X: float):
    """phi_X(t) = pi/4 + 2 t arccosh(2t/X) - sqrt(4 t^2 - X^2) (needs 2t > X)."""
    t = np.asarray(t, dtype=float)
    r = np.sqrt(4.0 * t * t - X * X)
    return 0.25 * math.pi + 2.0 * t * np.arccosh(2.0 * t / X) - r


def phi_phase_d1(t, X: float):
    """d/dt phi_X = 2 log((2t + sqrt(4t^2 - X^2)) / X)."""
    t = np.asarray(t, dtype=float)
    r = np.sqrt(4.0 * t * t - X * X)
    return 2.0 * np.log((2.0 * t + r) / X)


def phi_phase_d2(t, X: float):
    """d^2/dt^2 phi_X = 4 / sqrt(4t^2 - X^2)."""
    t = np.asarray(t, dtype=float)
    return 4.0 / np.sqrt(4.0 * t * t - X * X)


# Error-constant for the O(1/t) correction in the oscillatory asymptotic,
# fitted on t in [20, 200], X <= t/2 (tools/calibrate_constants.py).
KASYM_C = 1.1


def bessel_K_asymptotic(t: float, X: float) -> EvalResult:
    """Leading oscillatory approximation to K_{2it}(X) for X = o(t):

        sqrt(2 pi) e^{-pi t} (4t^2 - X^2)^(-1/4) sin(phi_X(t)),

    with err = KASYM_C / t times the amplitude.
    """
    t = float(t)
    X = float(X)
    if t < 5 or not (0 < X <= 0.5 * t):
        raise BesselDomainError("need t >= 5 and 0 < X <= t/2")
    amp = math.sqrt(2.0 * math.pi) * math.exp(-math.pi * t) * (4 * t * t - X * X) ** -0.25
    val = amp * math.sin(float(phi_phase(t, X)))
    return EvalResult(val, KASYM_C / t * amp)


# -- uniform bound certificate ------------------------------------------------

@dataclass(frozen=True)
class KBoundCertificate:
    """One checked instance of the uniform |K_{it}(x)| bound, t > 0, x > 1."""

    t: float
    x: float
    lhs: float
    rhs: float
    branch: str
    passed: bool


def check_K_uniform_bound(t: float, x: float) -> KBoundCertificate:
    """Certificate for |K_{it}(x)| <= e^{-pi t/2} * (branch amplitude).

    Branches: for x >= t the monotone-regime bound with the smaller of the
    (x^2-t^2)^(-1/4) and Airy-scale t^(-1/3) amplitudes; for 1 <= x < t the
    bulk bound 5 (t^2-x^2)^(-1/4) away from the turning point and 4 t^(-1/3)
    in the transition zone x >= t - t^(1/3)/2.
    """
    if t <= 0 or x <= 1:
        raise BesselDomainError("certificate defined for t > 0, x > 1")
    pref = math.exp(-0.5 * math.pi * t)
    if x >= t:
        expo = math.exp(-math.sqrt(x * x - t * t) + t * math.acos(t / x))
        amp_flat = math.inf if x == t else math.sqrt(0.5 * math.pi) * (x * x - t * t) ** -0.25
        amp_airy = GAMMA_THIRD / (2 ** (2.0 / 3.0) * 3 ** (1.0 / 6.0)) * t ** (-1.0 / 3.0)
        if amp_flat <= amp_airy:
            rhs = pref * expo * amp_flat
            branch = "x>=t small-amp"
        else:
            rhs = pref * expo * amp_airy
            branch = "x>=t airy-amp"
    elif x <= t - 0.5 * t ** (1.0 / 3.0):
        rhs = pref * 5.0 * (t * t - x * x) ** -0.25
        branch = "x<t bulk"
    else:
        rhs = pref * 4.0 * t ** (-1.0 / 3.0)
        branch = "x<t transition"
    lhs = abs(pref * bessel_K_it_scaled(t, x))
    return KBoundCertificate(t=t, x=x, lhs=lhs, rhs=rhs, branch=branch,
                             passed=bool(lhs <= rhs))


# Per-sigma constants for |J_{sigma+it}(x)| <= C_sigma x^sigma max(1,|t|)^-sigma e^{pi|t|/2},
# fitted on a calibration grid (tools/calibrate_constants.py) and asserted on
# a disjoint grid in the tests.
JBOUND_C = {0.0: 1.1, 0.5: 1.3, 1.0: 1.6, 2.0: 2.6, 3.0: 5.2}


def check_J_bound(sigma: float, t: float, x: float):
    """Check |J_{sigma+it}(x)| against the calibrated envelope.

    Returns (passed, margin) with margin = rhs - |J|.
    """
    if sigma + 0.0 <= -0.5:
        raise BesselDomainError("need Re order > -1/2")
    key = min(JBOUND_C, key=lambda s: abs(s - sigma))
    if abs(key - sigma) > 1e-9:
        raise BesselDomainError(f"no calibrated constant for sigma = {sigma}")
    j = bessel_J(sigma + 1j * t, x)
    rhs = JBOUND_C[key] * x ** sigma * max(1.0, abs(t)) ** (-sigma) * math.exp(0.5 * math.pi * abs(t))
    margin = rhs - abs(j.value)
    return bool(margin >= 0.0), margin


# ----------------------------------------------------------------------------
# Oscillatory kernels for the trace-formula integrands
# ----------------------------------------------------------------------------

def _complex_ode_transport(tau: float, x0: float, y0: complex, dy0: complex,
                           x_lo: float, x_hi: float, sign_sq: float):
    """Dense transport of x^2 y'' + x y' + (sign_sq x^2 + tau^2) y = 0."""

    def rhs(x, v):
        yr, yi, dr, di = v
        f = -(sign_sq + (tau * tau) / (x * x))
        return [dr, di, -dr / x + f * yr, -di / x + f * yi]

    segs = []
    if x_hi > x0:
        segs.append(solve_ivp(rhs, (x0, x_hi), [y0.real, y0.imag, dy0.real, dy0.imag],
                              method="DOP853", rtol=2e-13, atol=1e-240,
                              dense_output=True))
    if x_lo < x0:
        segs.append(solve_ivp(rhs, (x0, x_lo), [y0.real, y0.imag, dy0.real, dy0.imag],
                              method="DOP853", rtol=2e-13, atol=1e-240,
                              dense_output=True))
    for s in segs:
        if not s.success:
            raise RuntimeError(f"Bessel transport failed: {s.message}")

    def ev(x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape, dtype=complex)
        done = np.zeros(x.shape, dtype=bool)
        for s in segs:
            lo, hi = min(s.t[0], s.t[-1]), max(s.t[0], s.t[-1])
            m = (~done) & (x >= lo - 1e-12) & (x <= hi + 1e-12)
            if np.any(m):
                v = s.sol(x[m])
                out[m] = v[0] + 1j * v[1]
                done[m] = True
        if not np.all(done):
            raise ValueError("query outside transported range")
        return out

    return ev


def _j_cosh_seed(tau: float, x: float):
    """J_{i tau}(x)/cosh(pi tau/2) and d/dx of it, via the rescaled series."""
    # terms s_k = sign^k (x/2)^{2k} * e^{i tau log(x/2)} / (k! Gamma(1+i tau) cosh(pi tau/2))
    logcosh = 0.5 * math.pi * tau + math.log1p(math.exp(-math.pi * tau)) - math.log(2.0)
    c0 = np.exp(1j * tau * math.log(0.5 * x) - _sp_loggamma(1.0 + 1j * tau) - logcosh)
    q = -0.25 * x * x
    val = c0
    dval = c0 * (1j * tau / x)
    term = c0
    for k in range(200):
        term = term * q / ((k + 1.0) * (1j * tau + k + 1.0))
        val += term
        dval += term * (1j * tau + 2.0 * (k + 1.0)) / x
        if abs(term) < 1e-19 * abs(val) and k > 2:
            break
    return val, dval


@lru_cache(maxsize=4096)
def _jkernel_solver(tau: float, x_hi: float):
    xs = 4.0
    y0, dy0 = _j_cosh_seed(tau, xs)
    return _complex_ode_transport(tau, xs, y0, dy0, xs, x_hi, sign_sq=1.0)


def jkernel_cosh_grid(tau: float, xs: np.ndarray) -> np.ndarray:
    """J_{i tau}(x) / cosh(pi tau / 2) on an array of x > 0 (complex).

    Arguments below 4 use the series directly; larger ones are read from a
    dense ODE transport whose upper end is bucketed to powers of two so the
    cached solution is shared across call sites.
    """
    xs = np.asarray(xs, dtype=float)
    if np.min(xs) <= 0:
        raise BesselDomainError("arguments must be positive")
    out = np.empty(xs.shape, dtype=complex)
    small = xs <= 4.0
    for i in np.nonzero(small)[0]:
        out[i] = _j_cosh_seed(tau, float(xs[i]))[0]
    if np.any(~small):
        hi = float(np.max(xs[~small]))
        cap = 2.0 ** math.ceil(math.log2(hi + 1e-9))
        ev = _jkernel_solver(tau, cap)
        out[~small] = ev(xs[~small])
    return out


def ikernel_cosh_grid(tau: float, xs: np.ndarray) -> np.ndarray:
    """I_{i tau}(x) / cosh(pi tau / 2) for small x (series route, complex)."""
    xs = np.asarray(xs, dtype=float)
    logcosh = 0.5 * math.pi * tau + math.log1p(math.exp(-math.pi * tau)) - math.log(2.0)
    out = np.empty(xs.shape, dtype=complex)
    for i, x in enumerate(xs):
        c0 = np.exp(1j * tau * math.log(0.5 * x) - _sp_loggamma(1.0 + 1j * tau) - logcosh)
        q = 0.25 * x * x
        val = c0
        term = c0
        for k in range(200):
            term = term * q / ((k + 1.0) * (1j * tau + k + 1.0))
            val += term
            if abs(term) < 1e-19 * abs(val) and k > 2:
                break
        out[i] = val
    return out


# ----------------------------------------------------------------------------
# batched kernel matrices (one stacked ODE per block of spectral nodes)
# ----------------------------------------------------------------------------

_BLOCK = 96


def jkernel_cosh_matrix(taus: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """J_{i tau}(x)/cosh(pi tau/2) as a (len(taus), len(xs)) complex matrix.

    All orders in a block ride one stacked Bessel ODE (the step size is set
    by the fastest component, the right-hand side is vectorised), with
    values taken at the sorted argument list; arguments <= 4 come from the
    series seed directly.
    """
    taus = np.asarray(taus, dtype=float)
    xs = np.asarray(xs, dtype=float)
    if np.min(xs) <= 0:
        raise BesselDomainError("arguments must be positive")
    uniq, inv = np.unique(xs, return_inverse=True)
    out_u = np.empty((len(taus), len(uniq)), dtype=complex)
    small = uniq <= 4.0
    for i, tau in enumerate(taus):
        for j in np.nonzero(small)[0]:
            out_u[i, j] = _j_cosh_seed(tau, float(uniq[j]))[0]
    big_idx = np.nonzero(~small)[0]
    if len(big_idx):
        targets = uniq[big_idx]
        order = np.argsort(taus)
        for blk in range(0, len(order), _BLOCK):
            sel = order[blk:blk + _BLOCK]
            nb = len(sel)
            y0 = np.empty(nb, dtype=complex)
            dy0 = np.empty(nb, dtype=complex)
            for k, i in enumerate(sel):
                y0[k], dy0[k] = _j_cosh_seed(taus[i], 4.0)
            t2 = taus[sel] ** 2
            state0 = np.concatenate([y0.real, y0.imag, dy0.real, dy0.imag])

            def rhs(x, v, t2=t2, nb=nb):
                yr, yi = v[:nb], v[nb:2 * nb]
                dr, di = v[2 * nb:3 * nb], v[3 * nb:]
                f = -(1.0 + t2 / (x * x))
                return np.concatenate([dr, di,
                                       -dr / x + f * yr,
                                       -di / x + f * yi])

            sol = solve_ivp(rhs, (4.0, targets[-1] + 1e-9), state0,
                            method="DOP853", rtol=2e-13, atol=1e-240,
                            t_eval=targets)
            if not sol.success:
                raise RuntimeError(f"batched J transport failed: {sol.message}")
            vals = sol.y[:nb, :] + 1j * sol.y[nb:2 * nb, :]
            for k, i in enumerate(sel):
                out_u[i, big_idx] = vals[k, :]
    return out_u[:, inv]


def kbessel_scaled_matrix(taus: np.ndarray, xs: np.ndarray,
                          negligible_log: float = -41.0) -> np.ndarray:
    """e^{pi tau/2} K_{i tau}(x) as a (len(taus), len(xs)) matrix.

    Backward stacked transport from a common start beyond every argument and
    turning point (the rescaled K is recessive toward +inf, so the backward
    direction is stable for every component).  Entries whose decay exponent
    -sqrt(x^2-tau^2) + tau acos(tau/x) is below ``negligible_log`` are set
    to zero rather than transported.
    """
    taus = np.asarray(taus, dtype=float)
    xs = np.asarray(xs, dtype=float)
    uniq, inv = np.unique(xs, return_inverse=True)
    out_u = np.zeros((len(taus), len(uniq)))
    order = np.argsort(taus)

    def decay_exp(tau, x):
        if x <= tau:
            return 0.0
        r = math.sqrt(x * x - tau * tau)
        return -r + tau * math.acos(min(tau / x, 1.0))

    # blocks bounded both in size and tau-spread: the solver's aggregated
    # error norm lets a component far below the block's scale drift, so
    # components sharing a block must share a decay horizon
    blocks = []
    cur = [order[0]] if len(order) else []
    for i in order[1:]:
        if len(cur) >= _BLOCK or taus[i] - taus[cur[0]] > 4.0:
            blocks.append(cur)
            cur = [i]
        else:
            cur.append(i)
    if cur:
        blocks.append(cur)
    for sel in blocks:
        sel = np.asarray(sel)
        nb = len(sel)
        tb = taus[sel]
        tau_hi = float(np.max(tb))
        # start just past the block's negligibility horizon: beyond it every
        # component of the block already rounds to zero, and starting closer
        # keeps the seed values inside double range
        x_hor = tau_hi + 2.0
        while decay_exp(tau_hi, x_hor) > negligible_log - 3.0:
            x_hor *= 1.25
        x_start = max(min(float(np.max(uniq)) + 2.0, x_hor),
                      1.06 * tau_hi + 2.0,
                      float(np.min(uniq)) + 1.0)
        y0 = np.empty(nb)
        dy0 = np.empty(nb)
        for k, t in enumerate(tb):
            y0[k], dy0[k] = _k_seed_pair(float(t), x_start)
        t2 = tb ** 2
        state0 = np.concatenate([y0, dy0])

        def rhs(x, v, t2=t2, nb=nb):
            y, dy = v[:nb], v[nb:]
            return np.concatenate([dy, -dy / x + (1.0 - t2 / (x * x)) * y])

        targets = uniq[uniq <= x_start][::-1]  # decreasing backward sweep
        sol = solve_ivp(rhs, (x_start, float(targets[-1])), state0,
                        method="DOP853", rtol=2e-13, atol=1e-280,
                        t_eval=targets)
        if not sol.success:
            raise RuntimeError(f"batched K transport failed: {sol.message}")
        cols = np.nonzero(uniq <= x_start)[0][::-1]
        # blank out the deep-decay region (value below the underflow budget)
        for k, i in enumerate(sel):
            tau = taus[i]
            for c, j in zip(cols, range(sol.y.shape[1])):
                if decay_exp(tau, uniq[c]) > negligible_log:
                    out_u[i, c] = sol.y[k, j]
    return out_u[:, inv]
