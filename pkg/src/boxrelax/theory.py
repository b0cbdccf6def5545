"""Asymptotic bit-error probability of the box relaxation decoder.

The limiting BER is Q(1/tau*), where tau* minimizes the scalar convex
objective

    F(tau) = tau/2 (delta - 1/2) + sigma^2 / (2 tau)
             + tau/2 * int_{2/tau}^inf (h - 2/tau)^2 p(h) dh

with p the standard normal density. Setting F'(tau) = 0 and multiplying by
2 tau^2 gives the fixed-point form

    delta tau^2 = sigma^2 + E[w(tau, H)^2],

where w(tau, H) = clip(tau H, -2, 0) for H < 0 and 0 otherwise is the
per-coordinate error of the decoupled problem. Both routes are implemented
and are expected to agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import special

from .errors import InvalidArgument, NumericalFailure, UnsupportedRegime

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
LOG_TAIL_CUTOFF = 8.0

with mpmath.workdps(40):
    INV_PHI = (mpmath.sqrt(5) - 1) / 2
    INV_PHI_SQ = (3 - mpmath.sqrt(5)) / 2


@dataclass(frozen=True)
class GaussKernels:
    """Standard normal tail quantities at truncation point c >= 0."""

    c: float
    pdf: float
    q: float
    m1: float
    m2: float


@dataclass(frozen=True)
class TheoryPoint:
    delta: float
    snr: float
    tau_star: float
    pe: float
    pe_high_snr: float
    pe_mfb: float
    gap_db: float
    log10_pe: float = math.nan
    log10_pe_high_snr: float = math.nan
    log10_pe_mfb: float = math.nan

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr)


def q_function(x):
    """Standard normal upper tail Q(x) = P(H > x)."""
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / SQRT2)[()]


def log_q(x: float) -> float:
    """Natural log of Q(x), accurate deep into the tail.

    Beyond x = 8 uses log Q(x) = log(erfcx(x/sqrt2) / 2) - x^2/2, which never
    underflows.
    """
    x = float(x)
    if x > LOG_TAIL_CUTOFF:
        return math.log(0.5 * special.erfcx(x / SQRT2)) - 0.5 * x * x
    return math.log(q_function(x))


def log10_q(x: float) -> float:
    return log_q(x) / math.log(10.0)


def gaussian_kernels(c: float) -> GaussKernels:
    c = float(c)
    if not math.isfinite(c):
        raise InvalidArgument(f"truncation point must be finite, got {c!r}")
    if c < 0:
        raise InvalidArgument(f"truncation point must be >= 0, got {c!r}")
    pdf = INV_SQRT_2PI * math.exp(-0.5 * c * c)
    q = float(q_function(c))
    return GaussKernels(c=c, pdf=pdf, q=q, m1=pdf, m2=q + c * pdf)


def _tail_second_moment_shifted(c: float) -> float:
    """int_c^inf (h - c)^2 p(h) dh = (1 + c^2) Q(c) - c p(c).

    Evaluated as exp(-c^2/2) * [(1 + c^2) erfcx(c/sqrt2)/2 - c/sqrt(2 pi)] so
    the bracket keeps its digits until the exponential underflows.
    """
    bracket = (1.0 + c * c) * 0.5 * special.erfcx(c / SQRT2) - c * INV_SQRT_2PI
    return max(bracket, 0.0) * math.exp(-0.5 * c * c)


def _check_regime(delta: float, sigma_sq: float) -> None:
    if not delta > 0.5:
        raise UnsupportedRegime(delta)
    if not sigma_sq >= 0 or not math.isfinite(sigma_sq):
        raise InvalidArgument(f"sigma_sq must be finite and >= 0, got {sigma_sq!r}")


def do_objective(tau: float, delta: float, sigma_sq: float) -> float:
    """Deterministic scalar objective F(tau) whose minimizer is tau*."""
    if not tau > 0:
        raise InvalidArgument(f"tau must be positive, got {tau!r}")
    _check_regime(delta, sigma_sq)
    c = 2.0 / tau
    return (
        0.5 * tau * (delta - 0.5)
        + sigma_sq / (2.0 * tau)
        + 0.5 * tau * _tail_second_moment_shifted(c)
    )


def _objective_hp(tau, delta, sigma_sq):
    # F in 40-digit arithmetic; golden-section in double precision cannot
    # resolve the minimizer much below sqrt(machine eps)
    with mpmath.workdps(40):
        tau = mpmath.mpf(tau)
        c = 2 / tau
        tail = (1 + c * c) * mpmath.ncdf(-c) - c * mpmath.npdf(c)
        return (
            tau * (mpmath.mpf(delta) - mpmath.mpf(1) / 2) / 2
            + mpmath.mpf(sigma_sq) / (2 * tau)
            + tau * tail / 2
        )


def clipped_error_second_moment(tau: float) -> float:
    """E[w^2] for w = clip(tau H, -2, 0) restricted to H < 0, H standard normal."""
    c = 2.0 / tau
    k = gaussian_kernels(c)
    return tau * tau * (0.5 - k.q) - 2.0 * tau * k.pdf + 4.0 * k.q


def fixed_point_residual(tau: float, delta: float, sigma_sq: float) -> float:
    """R(tau) = delta tau^2 - sigma^2 - E[w^2] = 2 tau^2 F'(tau)."""
    if not tau > 0:
        raise InvalidArgument(f"tau must be positive, got {tau!r}")
    _check_regime(delta, sigma_sq)
    return delta * tau * tau - sigma_sq - clipped_error_second_moment(tau)


def tau_bracket(delta: float, sigma_sq: float) -> tuple[float, float]:
    return 1e-6, max(10.0, 10.0 * math.sqrt(sigma_sq) / math.sqrt(delta - 0.5))


def golden_section(f, a: float, b: float, tol: float):
    """Golden-section search for the minimizer of a unimodal f on [a, b].

    Returns (x, fx) at the midpoint of the final bracket of width <= tol.
    """
    h = b - a
    inv_phi, inv_phi_sq = INV_PHI, INV_PHI_SQ
    if isinstance(a, float):
        inv_phi, inv_phi_sq = float(INV_PHI), float(INV_PHI_SQ)
    c = a + inv_phi_sq * h
    d = a + inv_phi * h
    fc, fd = f(c), f(d)
    while h > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + inv_phi_sq * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + inv_phi * h
            fd = f(d)
        if h <= tol or c >= d:
            break
    x = 0.5 * (a + b)
    return x, f(x)


def bisect(f, a: float, b: float, tol: float) -> float:
    fa = f(a)
    fb = f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if (fa < 0) == (fb < 0):
        raise NumericalFailure(
            f"no sign change on [{a:g}, {b:g}]: f(a)={fa:g}, f(b)={fb:g}"
        )
    while b - a > tol:
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm < 0) == (fa < 0):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def solve_tau_star(
    delta: float, sigma_sq: float, method: str = "fixed-point", tol: float = 1e-12
) -> float:
    """Solve for tau* by golden-section on F ("minimize") or bisection on R ("fixed-point").

    sigma_sq = 0 returns 0 (noiseless convention).
    """
    _check_regime(delta, sigma_sq)
    if not tol > 0:
        raise InvalidArgument("tol must be positive")
    if sigma_sq == 0:
        return 0.0
    lo, hi = tau_bracket(delta, sigma_sq)
    r_lo = fixed_point_residual(lo, delta, sigma_sq)
    r_hi = fixed_point_residual(hi, delta, sigma_sq)
    if not (r_lo < 0 < r_hi):
        raise NumericalFailure(
            f"tau* bracket [{lo:g}, {hi:g}] does not enclose a stationary point "
            f"(delta={delta}, sigma_sq={sigma_sq}; R(lo)={r_lo:g}, R(hi)={r_hi:g})"
        )
    if method == "minimize":
        with mpmath.workdps(40):
            tau, _ = golden_section(
                lambda t: _objective_hp(t, delta, sigma_sq),
                mpmath.mpf(lo),
                mpmath.mpf(hi),
                tol,
            )
        return float(tau)
    if method == "fixed-point":
        return bisect(lambda t: fixed_point_residual(t, delta, sigma_sq), lo, hi, tol)
    raise InvalidArgument(f"unknown method {method!r}")


def snr_gap_db(delta: float) -> float:
    """High-SNR loss of the box relaxation relative to the matched filter bound, in dB."""
    if not delta > 0.5:
        raise UnsupportedRegime(delta)
    return 10.0 * math.log10(delta / (delta - 0.5))


def predict_pe(
    delta: float, snr: float, method: str = "fixed-point", tol: float = 1e-12
) -> TheoryPoint:
    """Limiting BER and its high-SNR and matched-filter companions at (delta, snr)."""
    if not snr > 0:
        raise InvalidArgument(f"snr must be positive, got {snr!r}")
    sigma_sq = 0.0 if math.isinf(snr) else 1.0 / snr
    tau = solve_tau_star(delta, sigma_sq, method=method, tol=tol)
    args = (
        math.inf if tau == 0 else 1.0 / tau,
        math.sqrt((delta - 0.5) * snr),
        math.sqrt(delta * snr),
    )
    logs = [-math.inf if math.isinf(x) else log10_q(x) for x in args]
    pe, pe_high, pe_mfb = (10.0**lg if lg > -300 else _q_direct(x) for lg, x in zip(logs, args))
    return TheoryPoint(
        delta=delta,
        snr=snr,
        tau_star=tau,
        pe=pe,
        pe_high_snr=pe_high,
        pe_mfb=pe_mfb,
        gap_db=snr_gap_db(delta),
        log10_pe=logs[0],
        log10_pe_high_snr=logs[1],
        log10_pe_mfb=logs[2],
    )


def _q_direct(x: float) -> float:
    # only reached near or past double underflow
    return 0.0 if math.isinf(x) else float(q_function(x))
