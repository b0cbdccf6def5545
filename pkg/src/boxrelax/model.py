"""Measurement model y = A x0 + z and seeded instance generation."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class ProblemShape:
    """Experiment coordinates.

    ``delta`` is the requested ratio (used by theory); ``m / n`` is the
    realized one (used by simulation).
    """

    n: int
    m: int
    delta: float
    sigma_sq: float
    snr_db: float = math.nan

    def __post_init__(self):
        if math.isnan(self.snr_db):
            object.__setattr__(self, "snr_db", 10.0 * math.log10(self.snr))

    @property
    def snr(self) -> float:
        return math.inf if self.sigma_sq == 0 else 1.0 / self.sigma_sq

    @property
    def realized_delta(self) -> float:
        return self.m / self.n


def make_shape(n: int, delta: float, snr_db: float) -> ProblemShape:
    """Build a shape with m = round(delta * n).

    ``snr_db = inf`` gives the noiseless model (sigma_sq = 0).
    """
    if int(n) != n or n < 1:
        raise InvalidArgument(f"n must be a positive integer, got {n!r}")
    if not delta > 0 or not math.isfinite(delta):
        raise InvalidArgument(f"delta must be a positive real, got {delta!r}")
    if math.isnan(snr_db):
        raise InvalidArgument("snr_db is NaN")
    n = int(n)
    m = max(1, int(round(delta * n)))
    sigma_sq = 10.0 ** (-snr_db / 10.0)
    return ProblemShape(n=n, m=m, delta=float(delta), sigma_sq=sigma_sq, snr_db=float(snr_db))


class Purpose(enum.IntEnum):
    CHANNEL = 0
    NOISE = 1
    SIGNAL = 2
    SUBSET = 3


@dataclass(frozen=True)
class RngStream:
    """Deterministic stream keyed by (master_seed, trial_index, purpose).

    Distinct keys map to distinct ``SeedSequence`` spawn keys, so streams
    are independent and do not depend on execution order.
    """

    master_seed: int
    trial_index: int = 0
    purpose: Purpose = Purpose.CHANNEL

    def for_purpose(self, purpose: Purpose) -> "RngStream":
        return RngStream(self.master_seed, self.trial_index, Purpose(purpose))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=int(self.master_seed) & (2**64 - 1),
            spawn_key=(int(self.trial_index), int(self.purpose)),
        )
        return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True, eq=False)
class ChannelInstance:
    A: np.ndarray
    x0: np.ndarray
    z: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def relabel(self, signs) -> "ChannelInstance":
        """Return (A D, D x0, z) for D = diag(signs); y is unchanged."""
        d = np.asarray(signs, dtype=float)
        if d.shape != (self.n,) or not np.all(np.abs(d) == 1):
            raise InvalidArgument("signs must be a length-n vector of +-1")
        return _frozen_instance(self.A * d, self.x0 * d, self.z, self.y)


def _frozen_instance(A, x0, z, y) -> ChannelInstance:
    for arr in (A, x0, z, y):
        arr.setflags(write=False)
    return ChannelInstance(A=A, x0=x0, z=z, y=y)


def sample_instance(
    shape: ProblemShape, stream: RngStream, all_ones: bool = False
) -> ChannelInstance:
    """Draw one realization (A, x0, z, y) of the measurement model.

    A, z and x0 each come from their own purpose-tagged child of ``stream``
    (its own purpose tag is ignored). ``all_ones`` forces x0 = 1.
    """
    n, m = shape.n, shape.m
    A = stream.for_purpose(Purpose.CHANNEL).generator().standard_normal((m, n))
    A *= 1.0 / math.sqrt(n)
    noise = stream.for_purpose(Purpose.NOISE).generator().standard_normal(m)
    z = math.sqrt(shape.sigma_sq) * noise
    if all_ones:
        x0 = np.ones(n)
    else:
        bits = stream.for_purpose(Purpose.SIGNAL).generator().integers(0, 2, size=n)
        x0 = 2.0 * bits - 1.0
    y = A @ x0 + z
    # exact identity is y == A @ x0 + z under this evaluation order
    return _frozen_instance(A, x0, z, y)
