"""Seeded simulators for static and output-error systems with quantized outputs.

A stream is a pure function of ``(config, seed)``: drawing it in chunks of any
size yields the same values as drawing it at once.
"""

from __future__ import annotations

import numpy as np
from scipy import signal

from .config import SimConfig
from .gauss import MvnSampler, make_rng
from .quantizer import quantize


class _Stream:
    def __init__(self, cfg: SimConfig, seed: int):
        self.cfg = cfg
        self.seed = int(seed)
        self.spec = cfg.quantizer
        n = cfg.input_dim
        self._inputs = MvnSampler(np.zeros(n), cfg.input_covariance, seed=self.seed)
        self._noise = make_rng(self.seed, stream=1)
        self.k = 0

    def _draw(self, count):
        phi = self._inputs.sample(count)
        d = self.cfg.noise_std * self._noise.standard_normal(count)
        return phi, d

    def next(self, count: int):
        """Advance ``count`` steps; returns ``(phi, y, s)``."""
        phi, d = self._draw(count)
        y = self._noise_free_output(phi) + d
        self.k += count
        return phi, y, quantize(self.spec, y)


class StaticStream(_Stream):
    """``y_k = phi_k^T theta + d_k``, ``s_k = Q(y_k)``."""

    def __init__(self, cfg: SimConfig, seed: int):
        if cfg.mode != "static":
            raise ValueError("StaticStream needs a static config")
        super().__init__(cfg, seed)
        self.theta = np.asarray(cfg.theta, dtype=float)

    def _noise_free_output(self, phi):
        return (phi * self.theta).sum(axis=-1)


class OeStream(_Stream):
    """``A(q) y0_k = phi_k^T B(q)``, ``y_k = y0_k + d_k``, zero initial conditions."""

    def __init__(self, cfg: SimConfig, seed: int):
        if cfg.mode != "oe":
            raise ValueError("OeStream needs an oe config")
        super().__init__(cfg, seed)
        model = cfg.model
        self._den = np.concatenate([[1.0], model.a])
        self._num = model.b  # (n_b + 1, n)
        order = max(len(self._den), self._num.shape[0]) - 1
        self._zi = np.zeros((model.n, order))

    def _noise_free_output(self, phi):
        y0 = np.zeros(phi.shape[0])
        for ch in range(phi.shape[1]):
            if self._zi.shape[1]:
                out, self._zi[ch] = signal.lfilter(self._num[:, ch], self._den, phi[:, ch], zi=self._zi[ch])
            else:
                out = self._num[0, ch] * phi[:, ch]
            y0 += out
        return y0


def make_stream(cfg: SimConfig, seed: int) -> _Stream:
    return StaticStream(cfg, seed) if cfg.mode == "static" else OeStream(cfg, seed)


def simulate_static(cfg: SimConfig, seed: int, steps: int | None = None):
    """``(phi, s)`` arrays for ``steps`` (default ``cfg.steps``) steps of a static system."""
    phi, _, s = StaticStream(cfg, seed).next(cfg.steps if steps is None else steps)
    return phi, s


def simulate_oe(cfg: SimConfig, seed: int, steps: int | None = None):
    phi, _, s = OeStream(cfg, seed).next(cfg.steps if steps is None else steps)
    return phi, s
