"""Independent reference computations used to freeze expected values.

Nothing here imports the package's closed-form kernels: tail integrals come
from adaptive quadrature and tau* from Brent root finding on a
quadrature-evaluated fixed-point equation.
"""

import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq


def pdf(h):
    return math.exp(-0.5 * h * h) / math.sqrt(2.0 * math.pi)


def tail(c, f):
    return quad(lambda h: f(h) * pdf(h), c, np.inf, epsabs=1e-14, epsrel=1e-13, limit=200)[0]


def q(c):
    return tail(c, lambda h: 1.0)


def objective(tau, delta, sigma_sq):
    c = 2.0 / tau
    return tau / 2 * (delta - 0.5) + sigma_sq / (2 * tau) + tau / 2 * tail(c, lambda h: (h - c) ** 2)


def clipped_sq(tau):
    """E[clip(tau H, -2, 0)^2] by quadrature over the two pieces."""
    c = 2.0 / tau
    inner = quad(lambda h: (tau * h) ** 2 * pdf(h), 0.0, c, epsabs=1e-14, epsrel=1e-13)[0]
    return inner + 4.0 * q(c)


def tau_star(delta, sigma_sq):
    return brentq(lambda t: delta * t * t - sigma_sq - clipped_sq(t), 1e-3, 100.0, xtol=1e-14)
