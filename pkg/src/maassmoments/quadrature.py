"""Integration machinery.

Three layers:

* ``integrate_line`` -- deterministic adaptive Gauss--Kronrod (7/15) panels on
  a real interval, with caller-declared envelopes for infinite tails.  Tails
  are cut where the envelope drops below ``tol * 1e-2``.
* ``integrate_contour`` -- vertical-line, keyhole and shifted-keyhole contour
  integrals in the complex plane, normalised by 1/(2*pi*i).
* ``oscillatory_ibp`` -- repeated integration by parts for integrals
  int f(t) e^{i g(t)} dt with a nonvanishing phase derivative.  Boundary terms
  and the g''-cross terms produced by each step are kept (evaluated), so the
  operation is an evaluator rather than an asymptotic estimator; the n-step
  main term is i^n * int f^(n)/(g')^n e^{ig}.

All integrands are called with numpy arrays of abscissae and must return
arrays (complex allowed).  Summation orders are fixed, so identical inputs
give bit-identical outputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .result import EvalResult

__all__ = [
    "QuadratureError",
    "SmallPhaseDerivativeError",
    "ContourSpec",
    "PhasePair",
    "integrate_line",
    "integrate_contour",
    "gaussian_envelope_derivative",
    "polynomial_gaussian_envelope",
    "oscillatory_ibp",
]


class QuadratureError(RuntimeError):
    """Raised when the requested tolerance was not reached.

    Carries the best estimate and the achieved error so callers can decide
    whether to accept it anyway.
    """

    def __init__(self, message, best: complex = 0.0, achieved_err: float = math.inf):
        super().__init__(message)
        self.best = best
        self.achieved_err = achieved_err


class SmallPhaseDerivativeError(ValueError):
    """Phase derivative too close to zero for the integration-by-parts route."""


# 15-point Kronrod extension of 7-point Gauss (nodes on [-1, 1]).
_XK = np.array([
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0,
    0.207784955007898, 0.405845151377397, 0.586087235467691,
    0.741531185599394, 0.864864423359769, 0.949107912342759,
    0.991455371120813,
])
_WK = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728,
    0.204432940075298, 0.190350578064785, 0.169004726639267,
    0.140653259715525, 0.104790010322250, 0.063092092629979,
    0.022935322010529,
])
_WG = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870,
])
_GAUSS_IDX = np.arange(1, 15, 2)


def _gk_panel(f, a: float, b: float):
    """One Gauss-Kronrod 7/15 panel; returns (I15, |I15-I7|)."""
    h = 0.5 * (b - a)
    c = 0.5 * (a + b)
    x = c + h * _XK
    y = np.asarray(f(x))
    i15 = h * np.dot(_WK, y)
    i7 = h * np.dot(_WG, y[_GAUSS_IDX])
    return i15, abs(i15 - i7)


def _adaptive_finite(f, a: float, b: float, tol: float, max_panels: int = 4000):
    """Deterministic adaptive bisection on [a, b]."""
    panels = [(a, b)]
    vals = {}
    i15, e = _gk_panel(f, a, b)
    vals[(a, b)] = (i15, e)
    for _ in range(max_panels):
        total_err = math.fsum(vals[p][1] for p in panels)
        if total_err <= tol:
            break
        # split the worst panel; ties broken by position for determinism
        worst = max(panels, key=lambda p: (vals[p][1], -p[0]))
        panels.remove(worst)
        lo, hi = worst
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # interval exhausted at machine resolution
            panels.append(worst)
            break
        del vals[worst]
        for sub in ((lo, mid), (mid, hi)):
            i15, e = _gk_panel(f, *sub)
            vals[sub] = (i15, e)
            panels.append(sub)
    panels.sort()
    parts = [complex(vals[p][0]) for p in panels]
    value = complex(math.fsum(v.real for v in parts), math.fsum(v.imag for v in parts))
    err = math.fsum(vals[p][1] for p in panels)
    return value, err


def _find_cut(envelope, start: float, direction: float, threshold: float,
              max_range: float = 1e9) -> float:
    """March geometrically until the envelope drops below ``threshold``."""
    r = max(1.0, abs(start))
    while r < max_range:
        x = start + direction * r
        if envelope(x) < threshold:
            return x
        r *= 1.5
    raise QuadratureError(
        f"envelope never dropped below {threshold:g} within range {max_range:g}")


def integrate_line(f, a, b, tol: float = 1e-10,
                   envelope: Optional[Callable[[float], float]] = None,
                   max_panels: int = 4000) -> EvalResult:
    """Integrate f on (a, b); either bound may be +-inf.

    For an infinite bound the caller must supply ``envelope``, a pointwise
    bound on |f| that eventually decreases; the tail is cut where the
    envelope is below tol/100 and the cut contributes to the error estimate.
    Raises QuadratureError (carrying the best value) on nonconvergence.
    """
    a = float(a)
    b = float(b)
    tail_err = 0.0
    threshold = tol * 1e-2
    if math.isinf(a) or math.isinf(b):
        if envelope is None:
            raise ValueError("infinite integration range requires an envelope bound")
        anchor = 0.0
        if not math.isinf(a):
            anchor = a
        elif not math.isinf(b):
            anchor = b
        if math.isinf(a):
            a = _find_cut(envelope, anchor, -1.0, threshold / (1.0 + abs(anchor)))
            tail_err += envelope(a) * 2.0 * (1.0 + abs(a - anchor))
        if math.isinf(b):
            b = _find_cut(envelope, anchor, +1.0, threshold / (1.0 + abs(anchor)))
            tail_err += envelope(b) * 2.0 * (1.0 + abs(b - anchor))
    if a == b:
        return EvalResult(0.0, tail_err)
    value, err = _adaptive_finite(f, a, b, tol, max_panels)
    if err > max(tol, 1e-14 * (1.0 + abs(value))) * 50:
        raise QuadratureError(
            f"adaptive quadrature stalled at err={err:g} (tol={tol:g})",
            best=value, achieved_err=err + tail_err)
    return EvalResult(value, err + tail_err)


def _adaptive_complex_segment(f, za: complex, zb: complex, tol: float,
                              max_panels: int = 4000):
    """Straight-segment complex integral via pullback to [0, 1]."""
    dz = zb - za

    def g(s):
        return f(za + s * dz) * dz

    return _adaptive_finite(g, 0.0, 1.0, tol, max_panels)


@dataclass(frozen=True)
class ContourSpec:
    """Description of an integration contour, traversed upward.

    kind:
      * "vertical": the line Re s = sigma, |Im s| <= height_cap.
      * "keyhole": the imaginary axis indented by a left semicircle of radius
        eps around the origin (enters from -i*inf, leaves to +i*inf); poles at
        the origin stay to the right of the contour.
      * "shifted": the same shape translated to the line Re s = sigma0 + eps,
        indenting around sigma0 + eps.
    """

    kind: str
    sigma: float = 0.0
    height_cap: float = 40.0
    eps: float = 1e-2
    sigma0: float = 0.0

    def __post_init__(self):
        if self.kind not in ("vertical", "keyhole", "shifted"):
            raise ValueError(f"unknown contour kind {self.kind!r}")
        if self.kind in ("keyhole", "shifted") and not (0 < self.eps < 0.5):
            raise ValueError("keyhole radius must lie in (0, 1/2)")


def integrate_contour(f, c: ContourSpec, tol: float = 1e-10,
                      envelope: Optional[Callable[[float], float]] = None,
                      max_panels: int = 4000) -> EvalResult:
    """(1/(2*pi*i)) * integral of f along the contour ``c``.

    ``envelope(v)`` bounds |f| at height v on the infinite vertical parts; if
    given, the height cap is extended until the envelope is below tol/100.
    """
    two_pi_i = 2j * math.pi
    if c.kind == "vertical":
        v_hi = c.height_cap
        if envelope is not None:
            v_hi = max(v_hi, abs(_find_cut(envelope, 0.0, 1.0, tol * 1e-2)))

        def g(v):
            return f(c.sigma + 1j * v) * 1j

        val, err = _adaptive_finite(g, -v_hi, v_hi, tol, max_panels)
        tail = envelope(v_hi) * 2 * (1 + v_hi) if envelope is not None else 0.0
        return EvalResult(val / two_pi_i, (err + tail) / (2 * math.pi))

    base = c.sigma0 + c.eps if c.kind == "shifted" else 0.0
    eps = c.eps
    v_hi = c.height_cap
    if envelope is not None:
        v_hi = max(v_hi, abs(_find_cut(envelope, 0.0, 1.0, tol * 1e-2)))

    def on_line(v):
        return f(base + 1j * v) * 1j

    # lower ray, arc (traversed from theta=3pi/2 down to pi/2, passing left),
    # then upper ray
    val_lo, err_lo = _adaptive_finite(on_line, -v_hi, -eps, tol / 3, max_panels)

    def on_arc(theta):
        s = base + eps * np.exp(1j * theta)
        return f(s) * (1j * eps * np.exp(1j * theta)) * (-1.0)

    # theta decreasing 3pi/2 -> pi/2 equals minus the increasing integral
    val_arc, err_arc = _adaptive_finite(on_arc, 0.5 * math.pi, 1.5 * math.pi,
                                        tol / 3, max_panels)
    val_hi, err_hi = _adaptive_finite(on_line, eps, v_hi, tol / 3, max_panels)
    tail = envelope(v_hi) * 4 * (1 + v_hi) if envelope is not None else 0.0
    total = (val_lo + val_arc + val_hi) / two_pi_i
    return EvalResult(total, (err_lo + err_arc + err_hi + tail) / (2 * math.pi))


# ----------------------------------------------------------------------------
# Gaussian envelope derivatives and integration by parts
# ----------------------------------------------------------------------------

_MAX_ENVELOPE_ORDER = 20


def gaussian_envelope_derivative(n: int, t, T: float, M: float):
    """Exact n-th derivative of exp(-((t-T)/M)^2).

    Closed form (double-index sum over m1 + 2*m2 = n):

        e^{-w^2} * sum (-1)^(m1+m2) / (m1! m2!) * (2w)^{m1}* n! / M^n,
        w = (t - T)/M.

    Accepts scalar or array t.  Orders above 20 are refused.
    """
    if n < 0 or n > _MAX_ENVELOPE_ORDER:
        raise ValueError(f"derivative order must be in [0, {_MAX_ENVELOPE_ORDER}]")
    t = np.asarray(t, dtype=complex if np.iscomplexobj(t) else float)
    w = (t - T) / M
    acc = np.zeros_like(w)
    nfac = math.factorial(n)
    for m2 in range(n // 2 + 1):
        m1 = n - 2 * m2
        coef = (-1.0) ** (m1 + m2) * nfac / (math.factorial(m1) * math.factorial(m2))
        acc = acc + coef * (2.0 * w) ** m1
    out = np.exp(-w * w) * acc / M ** n
    if out.ndim == 0:
        return out.item()
    return out


def polynomial_gaussian_envelope(coeffs: Sequence[float], T: float, M: float):
    """Derivative family for f(t) = P(t) * exp(-((t-T)/M)^2).

    ``coeffs`` are P's coefficients in increasing degree.  Returns a callable
    deriv(k, t) giving the exact k-th derivative via the Leibniz rule.
    """
    coeffs = [float(c) for c in coeffs]
    deg = len(coeffs) - 1

    def poly_deriv(j, t):
        t = np.asarray(t, dtype=float)
        acc = np.zeros_like(t)
        for p in range(j, deg + 1):
            acc += coeffs[p] * math.perm(p, j) * t ** (p - j)
        return acc

    def deriv(k, t):
        t = np.asarray(t, dtype=float)
        acc = np.zeros_like(t, dtype=float)
        for j in range(0, min(k, deg) + 1):
            acc += math.comb(k, j) * poly_deriv(j, t) * gaussian_envelope_derivative(k - j, t, T, M)
        return acc

    return deriv


@dataclass
class PhasePair:
    """Envelope/phase pair for oscillatory integrals int f e^{i g}.

    ``f_deriv(k, t)`` must return the exact k-th derivative of the envelope;
    ``g``, ``g1``, ``g2`` are the phase and its first two derivatives, all
    vectorised over t.  The IBP route requires g1 != 0 on the interval.
    """

    f_deriv: Callable[[int, np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    g1: Callable[[np.ndarray], np.ndarray]
    g2: Callable[[np.ndarray], np.ndarray]
    label: str = ""


_MAX_IBP_STEPS = 10


def oscillatory_ibp(pair: PhasePair, a: float, b: float, steps: int,
                    tol: float = 1e-9, min_g1: float = 1e-3) -> EvalResult:
    """Evaluate int_a^b f(t) e^{i g(t)} dt by `steps` integrations by parts.

    Each step produces a boundary term, a g''-cross term (evaluated by direct
    quadrature and kept), and hands the chain i^k f^(k)/(g')^k to the next
    step.  The final chain integral is evaluated directly, so the result
    agrees with plain quadrature up to the reported err.
    """
    if not 0 <= steps <= _MAX_IBP_STEPS:
        raise ValueError(f"steps must be in [0, {_MAX_IBP_STEPS}]")
    grid = np.linspace(a, b, 257)
    g1min = float(np.min(np.abs(pair.g1(grid))))
    if g1min < min_g1:
        raise SmallPhaseDerivativeError(
            f"min |g'| = {g1min:.3e} on [{a}, {b}] is below {min_g1:.0e}")

    def e_ig(t):
        return np.exp(1j * pair.g(t))

    total = EvalResult(0.0, 0.0)
    for k in range(steps):
        ik = 1j ** k
        # boundary term  i^(k-1) [ f^(k) e^{ig} / (g')^(k+1) ]_a^b
        ends = np.array([a, b])
        fb = pair.f_deriv(k, ends) * np.exp(1j * pair.g(ends)) / pair.g1(ends) ** (k + 1)
        total = total + ik / 1j * (fb[1] - fb[0])

        def cross(t, _k=k):
            return (pair.f_deriv(_k, t) * pair.g2(t) / pair.g1(t) ** (_k + 2)
                    * np.exp(1j * pair.g(t)))

        xk = integrate_line(cross, a, b, tol=tol / (2 * steps))
        total = total + EvalResult(-(1j ** (k + 1)) * (k + 1) * xk.value, xk.err)

    def chain(t):
        return pair.f_deriv(steps, t) / pair.g1(t) ** steps * np.exp(1j * pair.g(t))

    main = integrate_line(chain, a, b, tol=tol / 2)
    total = total + EvalResult((1j ** steps) * main.value, main.err)
    return total
