"""Auxiliary optimization (AO) for the box relaxation, run as a procedure.

After the dual variables are eliminated, the AO reduces to a scalar
minimization over tau of

    tau ||g|| / (2 sqrt n) + sigma^2 ||g|| / (2 tau sqrt n) + mean_i v(tau; h_i, ||g||)

with g in R^m and h in R^n standard normal. The optimal error vector then
follows coordinate-wise in closed form. Everything here is in the
un-rescaled tau; ``AoSolution.tau_hat`` divides by sqrt(delta) to match the
units of ``theory.solve_tau_star``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, NumericalFailure
from .model import ProblemShape, Purpose, RngStream
from .theory import golden_section

BRACKET_LO = 1e-4
BRACKET_HI = 10.0
BRACKET_CAP = 1e6


@dataclass(frozen=True, eq=False)
class AoSample:
    g: np.ndarray
    h: np.ndarray
    sigma_sq: float
    delta: float
    n: int

    @property
    def g_norm(self) -> float:
        return float(np.linalg.norm(self.g))


@dataclass(frozen=True, eq=False)
class AoSolution:
    tau_hat: float
    tau_raw: float
    w_tilde: np.ndarray
    ao_objective_value: float
    ao_ber: float
    clamped: bool


def sample_ao(shape: ProblemShape, stream: RngStream) -> AoSample:
    """Draw (g, h) for one AO trial.

    The noise is folded into g, so no separate z is drawn. ``delta`` is the
    realized m/n, which is what ||g||^2 / n concentrates around.
    """
    g = stream.for_purpose(Purpose.NOISE).generator().standard_normal(shape.m)
    h = stream.for_purpose(Purpose.CHANNEL).generator().standard_normal(shape.n)
    return AoSample(g=g, h=h, sigma_sq=shape.sigma_sq, delta=shape.realized_delta, n=shape.n)


def _upsilon(tau, h, g_norm, n):
    s = g_norm / (tau * math.sqrt(n))
    return np.where(
        h >= 0.0,
        0.0,
        np.where(h >= -2.0 * s, -(h * h) / (2.0 * s), 2.0 * s + 2.0 * h),
    )


def ao_objective(tau: float, sample: AoSample) -> float:
    """Normalized scalar AO objective at tau (before the outer positive part)."""
    if not tau > 0:
        raise InvalidArgument(f"tau must be positive, got {tau!r}")
    n = sample.n
    gn = sample.g_norm
    root_n = math.sqrt(n)
    ups = _upsilon(tau, sample.h, gn, n)
    return (
        tau * gn / (2.0 * root_n)
        + sample.sigma_sq * gn / (2.0 * tau * root_n)
        + math.fsum(ups) / n
    )


def ao_w_from_tau(tau: float, g_norm: float, h) -> np.ndarray:
    """Optimal AO error vector for a given tau: 0, (tau sqrt n/||g||) h, or -2."""
    if not tau > 0 or not g_norm > 0:
        raise InvalidArgument("tau and g_norm must be positive")
    h = np.asarray(h, dtype=float)
    n = h.size
    scale = tau * math.sqrt(n) / g_norm
    thresh = -2.0 * g_norm / (tau * math.sqrt(n))
    return np.where(h >= 0.0, 0.0, np.where(h >= thresh, scale * h, -2.0))


def _bracket(f):
    lo, hi = BRACKET_LO, BRACKET_HI
    while hi <= BRACKET_CAP:
        # convexity: an interior point below f(hi) means the minimizer is left of hi
        if f(0.5 * hi) < f(hi):
            return lo, hi
        hi *= 2.0
    raise NumericalFailure(
        f"AO bracket grew past {BRACKET_CAP:g} without an interior minimum"
    )


def ao_solve(sample: AoSample, tol: float = 1e-10) -> AoSolution:
    f = lambda t: ao_objective(t, sample)
    lo, hi = _bracket(f)
    tau, val = golden_section(f, lo, hi, tol * hi)
    w = ao_w_from_tau(tau, sample.g_norm, sample.h)
    return AoSolution(
        tau_hat=tau / math.sqrt(sample.delta),
        tau_raw=tau,
        w_tilde=w,
        ao_objective_value=max(val, 0.0),
        ao_ber=float(np.count_nonzero(w <= -1.0)) / sample.n,
        clamped=val <= 0.0,
    )
