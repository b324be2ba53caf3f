"""Fixed-threshold quantizer and the gain it induces on Gaussian outputs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DomainError


class Verdict(NamedTuple):
    ok: bool
    reason: str = ""


def check_identifiable(thresholds) -> Verdict:
    """Reject the single zero threshold, which only reveals the output sign.

    With ``m == 1`` and ``C_1 == 0`` the parameter is determined only up to a
    positive scale factor, with or without noise.
    """
    c = np.atleast_1d(np.asarray(thresholds, dtype=float))
    if c.size == 1 and c[0] == 0.0:
        return Verdict(False, "unidentifiable: a single threshold at zero "
                              "only observes the sign of the output")
    return Verdict(True)


@dataclass(frozen=True)
class Quantizer:
    """Map ``y`` to the level ``i`` with ``C_i < y <= C_{i+1}``.

    Levels are ascending, ``0..m``, with ``C_0 = -inf`` and
    ``C_{m+1} = +inf``. A tie ``y == C_i`` goes to the lower cell.
    """

    thresholds: tuple

    def __init__(self, thresholds):
        c = np.atleast_1d(np.asarray(thresholds, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ConfigError("at least one threshold is required")
        if not np.all(np.isfinite(c)):
            raise ConfigError("thresholds must be finite")
        if np.any(np.diff(c) <= 0):
            raise ConfigError("thresholds must be strictly increasing")
        verdict = check_identifiable(c)
        if not verdict.ok:
            raise ConfigError(verdict.reason)
        object.__setattr__(self, "thresholds", tuple(float(v) for v in c))

    @property
    def m(self) -> int:
        return len(self.thresholds)

    @property
    def c(self) -> np.ndarray:
        return np.array(self.thresholds)

    @property
    def zero_index(self) -> int | None:
        """0-based position of the zero threshold, if there is one."""
        for j, v in enumerate(self.thresholds):
            if v == 0.0:
                return j
        return None

    def __call__(self, y):
        return quantize(self, y)


def quantize(spec: Quantizer, y):
    levels = np.searchsorted(spec.c, np.asarray(y, dtype=float), side="left")
    return levels.item() if levels.ndim == 0 else levels


def rho(spec: Quantizer, delta):
    """Gain ``sum_i exp(-C_i^2 / (2 delta^2)) / (sqrt(2 pi) delta)``.

    For ``y ~ N(0, delta^2)`` jointly Gaussian with the input, the quantized
    output correlates with the input as ``rho(delta) * H theta``.
    """
    d = np.asarray(delta, dtype=float)
    if np.any(~(d > 0)):
        raise DomainError("rho requires delta > 0")
    c = spec.c
    r = np.exp(-(c ** 2) / (2.0 * d[..., None] ** 2)).sum(axis=-1) / (math.sqrt(2.0 * math.pi) * d)
    return r.item() if r.ndim == 0 else r
