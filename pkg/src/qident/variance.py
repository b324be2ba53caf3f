"""Recursive ML-type estimation of the output standard deviation.

Each threshold ``C_j`` gives its own estimate of ``delta_y`` by inverting
the empirical distribution function at that threshold. The estimates are
combined with the sum-one weights that minimize the asymptotic variance of
the combination, computed at the previous estimate, and the result is
clamped into ``[c, 1/c]``.

Every function broadcasts over leading batch dimensions, so one estimator
object can carry many independent replicas in lockstep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RangeError, SingularMatrixError
from .gauss import std_normal_cdf, std_normal_pdf, std_normal_quantile
from .quantizer import Quantizer

DEFAULT_C = 1e-6
DEFAULT_C_STAR = 1e-6

# Cells with smaller probability make W - w w^T numerically singular.
_MIN_CELL_PROB = 1e-12


class EmpiricalHistogram:
    """Level counts after ``k`` observations; ``freq`` holds ``S_k^i``.

    Counts are stored as integers so ``k * freq`` is exact.
    """

    def __init__(self, m: int, batch_shape=()):
        self.m = int(m)
        self.k = 0
        self.counts = np.zeros(tuple(batch_shape) + (self.m + 1,), dtype=np.int64)
        self._levels = np.arange(self.m + 1)

    @property
    def freq(self) -> np.ndarray:
        if self.k == 0:
            return np.zeros(self.counts.shape)
        return self.counts / self.k

    def cumulative(self) -> np.ndarray:
        """``sum_{i<j} S_k^i`` for ``j = 1..m`` (last axis)."""
        return np.cumsum(self.counts[..., :-1], axis=-1) / self.k

    def update(self, s) -> None:
        s = np.asarray(s)
        if s.shape != self.counts.shape[:-1]:
            raise RangeError(f"expected levels of shape {self.counts.shape[:-1]}, got {s.shape}")
        if np.any((s < 0) | (s > self.m)) or not np.all(s == np.round(s)):
            raise RangeError(f"level outside 0..{self.m}")
        self.counts += s[..., None] == self._levels
        self.k += 1

    def copy(self) -> "EmpiricalHistogram":
        new = EmpiricalHistogram(self.m, self.counts.shape[:-1])
        new.counts[...] = self.counts
        new.k = self.k
        return new


def update_histogram(hist: EmpiricalHistogram, s) -> EmpiricalHistogram:
    """Return a copy of ``hist`` with one more observation."""
    new = hist.copy()
    new.update(s)
    return new


def modified_fraction(p, c_star: float = DEFAULT_C_STAR):
    """Replace the non-invertible fractions 0, 1/2 and 1 by ``c_star``."""
    if not (0.0 < c_star < 1.0) or c_star == 0.5:
        raise DomainError("c_star must lie in (0, 1) and differ from 1/2")
    p = np.asarray(p, dtype=float)
    out = np.where((p == 0.0) | (p == 0.5) | (p == 1.0), c_star, p)
    return out.item() if out.ndim == 0 else out


def per_threshold_estimates(spec: Quantizer, hist: EmpiricalHistogram,
                            c_star: float = DEFAULT_C_STAR) -> np.ndarray:
    """All ``m`` single-threshold estimates, last axis indexed by threshold."""
    if hist.k < 1:
        raise DomainError("per-threshold estimates need at least one observation")
    c = spec.c
    m = spec.m
    z = spec.zero_index
    frac = hist.cumulative()
    num = np.broadcast_to(c, frac.shape).copy()
    if z is not None:
        if z > 0:
            inner = hist.counts[..., 1:z + 1].sum(axis=-1) / hist.k
            frac[..., z] = np.clip(0.5 - inner, 0.0, 1.0)
            num[..., z] = c[0]
        else:
            inner = hist.counts[..., 1:m].sum(axis=-1) / hist.k
            frac[..., 0] = np.clip(0.5 + inner, 0.0, 1.0)
            num[..., 0] = c[m - 1]
    return num / std_normal_quantile(modified_fraction(frac, c_star))


def per_threshold_estimate(spec: Quantizer, hist: EmpiricalHistogram, j: int,
                           c_star: float = DEFAULT_C_STAR):
    """Estimate from threshold ``j`` (1-based, as ``C_j``)."""
    if not 1 <= j <= spec.m:
        raise RangeError(f"threshold index {j} outside 1..{spec.m}")
    out = per_threshold_estimates(spec, hist, c_star)[..., j - 1]
    return out.item() if np.ndim(out) == 0 else out


def project(x, c: float = DEFAULT_C):
    """Closest point of ``[c, 1/c]``."""
    out = np.clip(np.asarray(x, dtype=float), c, 1.0 / c)
    return out.item() if out.ndim == 0 else out


@dataclass
class AsymptoticBlocks:
    """Blocks of the limiting covariance of the per-threshold estimates.

    ``lim k V_k = (U + G^T)^{-1} (W - w w^T) (U + G)^{-1}``.
    """

    U: np.ndarray
    G: np.ndarray
    W: np.ndarray
    w: np.ndarray

    @property
    def cell_probs(self) -> np.ndarray:
        """``F_{i+1} - F_i`` for ``i = 0..m`` with ``F_0 = 0``, ``F_{m+1} = 1``."""
        return np.diff(self.w, prepend=0.0, append=1.0, axis=-1)


def _levels(spec: Quantizer, delta):
    d = np.asarray(delta, dtype=float)[..., None]
    x = spec.c / d
    F = np.asarray(std_normal_cdf(x))
    f = np.asarray(std_normal_pdf(x)) * spec.c / d ** 2
    return F, f


def build_blocks(spec: Quantizer, delta, c: float | None = None) -> AsymptoticBlocks:
    """Evaluate ``U``, ``G``, ``W``, ``w`` at the plug-in value ``delta``."""
    d = np.asarray(delta, dtype=float)
    lo = c if c is not None else 0.0
    hi = 1.0 / c if c is not None else np.inf
    if np.any(~((d >= lo) & (d <= hi) & (d > 0))):
        raise DomainError(f"delta must lie in [{lo}, {hi}] and be positive")
    m = spec.m
    F, f = _levels(spec, d)
    U = f[..., :, None] * np.eye(m)
    G = np.zeros(U.shape)
    z = spec.zero_index
    if z is not None and z > 0:
        G[..., 0, z] = f[..., 0]
        G[..., z, z] = -f[..., 0]
    elif z == 0:
        G[..., m - 1, 0] = f[..., m - 1]
        G[..., 0, 0] = -f[..., m - 1]
    idx = np.minimum.outer(np.arange(m), np.arange(m))
    W = F[..., idx]
    return AsymptoticBlocks(U=U, G=G, W=W, w=F)


def _weights_raw(blocks: AsymptoticBlocks):
    A = blocks.U + blocks.G
    S = blocks.W - blocks.w[..., :, None] * blocks.w[..., None, :]
    rhs = np.swapaxes(A, -1, -2).sum(axis=-1)
    x = np.linalg.solve(S, rhs[..., None])[..., 0]
    v = np.einsum("...ij,...j->...i", A, x)
    return v / v.sum(axis=-1, keepdims=True)


def compute_weights(blocks: AsymptoticBlocks) -> np.ndarray:
    """Sum-one weights minimizing ``mu^T (lim k V) mu``.

    Solves ``(W - w w^T) x = (U + G^T) 1`` and normalizes
    ``(U + G) x`` to sum to one.
    """
    try:
        with np.errstate(divide="ignore", invalid="ignore"):
            mu = _weights_raw(blocks)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("W - w w^T is singular") from exc
    if not np.all(np.isfinite(mu)):
        raise SingularMatrixError("weight solve produced non-finite values")
    return mu


def fisher_information(spec: Quantizer, delta):
    """Per-sample information ``sum_{i=0}^{m} (f~_i)^2 / F~_i`` about delta."""
    d = np.asarray(delta, dtype=float)
    if np.any(~(d > 0)):
        raise DomainError("delta must be positive")
    F, f = _levels(spec, d)
    F_cell = np.diff(F, prepend=0.0, append=1.0, axis=-1)
    f_cell = np.diff(f, prepend=0.0, append=0.0, axis=-1)
    if np.any(F_cell <= 0):
        raise DomainError("a quantizer cell has zero probability at this delta")
    info = (f_cell ** 2 / F_cell).sum(axis=-1)
    return info.item() if info.ndim == 0 else info


def cr_lower_bound(spec: Quantizer, delta, k: int):
    """Cramér–Rao bound on the variance of unbiased estimates of delta from k samples."""
    if k < 1:
        raise DomainError("k must be a positive integer")
    return 1.0 / (k * fisher_information(spec, delta))


def asymptotic_covariance_limit(spec: Quantizer, delta) -> np.ndarray:
    """``(U + G^T)^{-1} (W - w w^T) (U + G)^{-1}`` at the true delta."""
    b = build_blocks(spec, delta)
    A = b.U + b.G
    S = b.W - np.multiply.outer(b.w, b.w)
    try:
        Ainv = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("U + G is singular") from exc
    return Ainv.T @ S @ Ainv


class VarianceEstimator:
    """Recursive estimator of the output standard deviation.

    Parameters
    ----------
    spec : Quantizer
    c : float
        Projection bound; estimates stay in ``[c, 1/c]``.
    c_star : float
        Replacement for the non-invertible fractions 0, 1/2, 1.
    delta0 : float
        Initial estimate, projected into ``[c, 1/c]``.
    batch_shape : tuple
        Leading shape for lockstep replicas; ``()`` for a single stream.
    weight_every : int
        Recompute the combination weights every this many steps.
    """

    def __init__(self, spec: Quantizer, c=DEFAULT_C, c_star=DEFAULT_C_STAR,
                 delta0=1.0, batch_shape=(), weight_every=1):
        if not 0.0 < c < 1.0:
            raise DomainError("c must lie in (0, 1)")
        modified_fraction(0.25, c_star)  # validates c_star
        if weight_every < 1:
            raise DomainError("weight_every must be >= 1")
        self.spec = spec
        self.c = float(c)
        self.c_star = float(c_star)
        self.weight_every = int(weight_every)
        self.hist = EmpiricalHistogram(spec.m, batch_shape)
        shape = tuple(batch_shape)
        self.delta_hat = np.full(shape, project(delta0, self.c))
        self.per_threshold = np.full(shape + (spec.m,), np.nan)
        self.mu_hat = np.full(shape + (spec.m,), 1.0 / spec.m)

    @property
    def k(self) -> int:
        return self.hist.k

    def _refresh_weights(self) -> None:
        if self.spec.m == 1:
            self.mu_hat[...] = 1.0
            return
        blocks = build_blocks(self.spec, self.delta_hat, self.c)
        cells = blocks.cell_probs
        ok = np.all(cells >= _MIN_CELL_PROB, axis=-1)
        if not np.all(ok):
            # Degenerate plug-in (e.g. delta at the projection floor):
            # solve a harmless system there and keep the previous weights.
            eye = np.eye(self.spec.m)
            bad = ~ok
            blocks.W[bad] = eye + blocks.w[bad][..., :, None] * blocks.w[bad][..., None, :]
            blocks.U[bad] = eye
            blocks.G[bad] = 0.0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            mu = _weights_raw(blocks)
        ok &= np.all(np.isfinite(mu), axis=-1)
        self.mu_hat = np.where(ok[..., None], mu, self.mu_hat)

    def update(self, s) -> None:
        """Consume one quantized level per replica."""
        self.hist.update(s)
        if (self.hist.k - 1) % self.weight_every == 0:
            self._refresh_weights()
        with np.errstate(divide="ignore"):
            self.per_threshold = per_threshold_estimates(self.spec, self.hist, self.c_star)
        self.delta_hat = np.asarray(project((self.per_threshold * self.mu_hat).sum(axis=-1), self.c))

    def cr_bound(self, delta) -> float:
        return cr_lower_bound(self.spec, delta, max(self.k, 1))


def ml_update(state: VarianceEstimator, s) -> VarianceEstimator:
    state.update(s)
    return state
