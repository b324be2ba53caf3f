"""Identification runs, Monte Carlo aggregation and CSV export.

Replicas of one Monte Carlo experiment are advanced in lockstep: every
estimator carries a leading replica axis, and all per-replica arithmetic is
elementwise, so a replica's trajectory does not depend on which other
replicas share its batch. Replica ``r`` uses seed ``cfg.seed + r``.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig
from .oe import DurbinEstimator
from .simulate import make_stream
from .variance import VarianceEstimator, cr_lower_bound
from .wls import WlsEstimator, recover_theta

CHUNK = 2048


def checkpoint_grid(k_max: int, per_decade: int = 10, start: int = 10) -> np.ndarray:
    """Geometric grid ``start * 10**(i / per_decade)`` up to ``k_max``, plus ``k_max``.

    With the default ten points per decade (ratio about 1.26) every power of
    ten from ``start`` on is hit exactly.
    """
    if k_max < 1:
        return np.zeros(0, dtype=np.int64)
    top = math.log10(k_max / start) * per_decade if k_max >= start else -1
    raw = [round(start * 10 ** (i / per_decade)) for i in range(int(math.floor(top + 1e-9)) + 1)]
    ks = sorted({k for k in raw if k <= k_max} | {int(k_max)})
    return np.asarray(ks, dtype=np.int64)


def lil_scale(k):
    """``sqrt(k / log log k)``; NaN for ``k < 3`` where ``log log k`` is not positive."""
    k = np.asarray(k, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(k >= 3, np.sqrt(k / np.log(np.log(np.maximum(k, 3.0)))), np.nan)
    return out.item() if out.ndim == 0 else out


@dataclass
class RunRecord:
    """Error trajectory of one run at the checkpoint grid."""

    run_id: int
    k: np.ndarray
    err_theta: np.ndarray
    err_delta: np.ndarray
    theta_hat: np.ndarray
    delta_hat: np.ndarray = field(default=None)

    @property
    def scaled_err(self) -> np.ndarray:
        return lil_scale(self.k) * self.err_theta

    def running_max_scaled(self, k_lo: int, k_hi: int) -> float:
        sel = (self.k >= k_lo) & (self.k <= k_hi)
        return float(np.max(self.scaled_err[sel]))


@dataclass
class McSummary:
    """Cross-replica statistics at each checkpoint."""

    k: np.ndarray
    replicas: int
    mean_err_theta: np.ndarray
    median_err: np.ndarray
    moment_p: np.ndarray
    mean_err2_theta: np.ndarray
    mean_err2_delta: np.ndarray
    cr_ratio: np.ndarray
    p: int = 2
    err_theta: np.ndarray = field(default=None, repr=False)
    err_delta: np.ndarray = field(default=None, repr=False)

    @property
    def k_mse(self) -> np.ndarray:
        return self.k * self.mean_err2_theta

    def at(self, k: int) -> int:
        idx = np.flatnonzero(self.k == k)
        if not idx.size:
            raise KeyError(f"k={k} is not a checkpoint")
        return int(idx[0])


def _build_estimator(cfg: SimConfig, batch: int):
    shape = (batch,)
    if cfg.mode == "static":
        var = VarianceEstimator(cfg.quantizer, c=cfg.c, c_star=cfg.c_star, delta0=cfg.delta0,
                                batch_shape=shape, weight_every=cfg.weight_every)
        wls = WlsEstimator(cfg.input_dim, P0=cfg.P0_scale, beta_bounds=(cfg.beta, cfg.beta),
                           batch_shape=shape)
        return var, wls
    model = cfg.model
    return DurbinEstimator(cfg.quantizer, model.n_a, model.n_b, model.n, kappa=cfg.kappa_value,
                           c=cfg.c, c_star=cfg.c_star, delta0=cfg.delta0, P0=cfg.P0_scale,
                           beta=cfg.beta, batch_shape=shape, burn_in=cfg.burn_in,
                           weight_every=cfg.weight_every)


def _run_batch(cfg: SimConfig, seeds) -> dict:
    """Run one replica per seed in lockstep; returns per-replica checkpoint arrays."""
    seeds = list(seeds)
    B = len(seeds)
    grid = checkpoint_grid(cfg.steps, cfg.record_per_decade, cfg.record_start)
    truth = cfg.true_parameter
    delta_y = cfg.delta_y
    streams = [make_stream(cfg, s) for s in seeds]
    est = _build_estimator(cfg, B)
    n = cfg.input_dim
    theta_hat = np.zeros((B, grid.size, truth.size))
    delta_hat = np.zeros((B, grid.size))
    beta = np.full(B, cfg.beta)
    next_cp = 0
    k = 0
    while k < cfg.steps:
        T = min(CHUNK, cfg.steps - k)
        phi = np.empty((B, T, n))
        s = np.empty((B, T), dtype=np.int64)
        for r, st in enumerate(streams):
            phi[r], _, s[r] = st.next(T)
        for t in range(T):
            if cfg.mode == "static":
                var, wls = est
                var.update(s[:, t])
                wls.update(phi[:, t], s[:, t], beta)
            else:
                est.update(phi[:, t], s[:, t])
            k += 1
            if next_cp < grid.size and k == grid[next_cp]:
                if cfg.mode == "static":
                    d_hat = var.delta_hat
                    theta_hat[:, next_cp] = recover_theta(wls.gamma_hat, d_hat, cfg.quantizer)
                else:
                    d_hat = est.delta_hat
                    theta_hat[:, next_cp] = est.theta_star_hat
                delta_hat[:, next_cp] = d_hat
                next_cp += 1
    with np.errstate(invalid="ignore", over="ignore"):
        err_theta = np.linalg.norm(theta_hat - truth, axis=-1)
    return dict(k=grid, theta_hat=theta_hat, delta_hat=delta_hat,
                err_theta=err_theta, err_delta=np.abs(delta_hat - delta_y))


def run_identification(cfg: SimConfig, seed: int | None = None) -> RunRecord:
    """Simulate one stream and record the estimation errors on the checkpoint grid."""
    seed = cfg.seed if seed is None else int(seed)
    out = _run_batch(cfg, [seed])
    return RunRecord(run_id=seed, k=out["k"], err_theta=out["err_theta"][0],
                     err_delta=out["err_delta"][0], theta_hat=out["theta_hat"][0],
                     delta_hat=out["delta_hat"][0])


def default_workers() -> int:
    """Worker count from ``QIDENT_THREADS`` (0 or unset: one per CPU)."""
    raw = os.environ.get("QIDENT_THREADS", "0").strip() or "0"
    n = int(raw)
    return n if n > 0 else (os.cpu_count() or 1)


def _run_group(args):
    cfg, seeds = args
    return _run_batch(cfg, seeds)


def summarize(cfg: SimConfig, k, err_theta, err_delta, p: int = 2) -> McSummary:
    with np.errstate(invalid="ignore", over="ignore"):
        mean2_delta = np.mean(err_delta ** 2, axis=0)
        cr = np.array([cr_lower_bound(cfg.quantizer, cfg.delta_y, int(kk)) for kk in k])
        return McSummary(
            k=np.asarray(k), replicas=err_theta.shape[0], p=p,
            mean_err_theta=np.mean(err_theta, axis=0),
            median_err=np.median(err_theta, axis=0),
            moment_p=np.mean(err_theta ** p, axis=0),
            mean_err2_theta=np.mean(err_theta ** 2, axis=0),
            mean_err2_delta=mean2_delta,
            cr_ratio=mean2_delta / cr,
            err_theta=err_theta, err_delta=err_delta,
        )


def monte_carlo(cfg: SimConfig, workers: int | None = None, p: int = 2) -> McSummary:
    """Run ``cfg.replicas`` replicas with seeds ``cfg.seed + r`` and aggregate.

    Replicas are split into contiguous groups, one per worker process; results
    are reassembled in replica order, so the summary does not depend on the
    worker count.
    """
    M = cfg.replicas
    seeds = [cfg.seed + r for r in range(M)]
    workers = default_workers() if workers is None else max(1, int(workers))
    workers = min(workers, M)
    if workers == 1:
        parts = [_run_batch(cfg, seeds)]
    else:
        groups = [g.tolist() for g in np.array_split(np.asarray(seeds), workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_group, [(cfg, g) for g in groups]))
    err_theta = np.concatenate([p_["err_theta"] for p_ in parts], axis=0)
    err_delta = np.concatenate([p_["err_delta"] for p_ in parts], axis=0)
    return summarize(cfg, parts[0]["k"], err_theta, err_delta, p=p)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def export_csv(obj, path) -> None:
    """Write a :class:`RunRecord` or :class:`McSummary` as CSV (17 significant digits)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if isinstance(obj, RunRecord):
            p = obj.theta_hat.shape[-1] if obj.theta_hat.ndim == 2 else 0
            w.writerow(["run_id", "k", "err_theta", "err_delta", "scaled_err"]
                       + [f"theta_hat_{i}" for i in range(p)])
            scaled = obj.scaled_err
            for i in range(len(obj.k)):
                w.writerow([obj.run_id, int(obj.k[i]), _fmt(obj.err_theta[i]), _fmt(obj.err_delta[i]),
                            _fmt(scaled[i])] + [_fmt(v) for v in obj.theta_hat[i]])
        elif isinstance(obj, McSummary):
            w.writerow(["k", "mean_err2_theta", "k_mse", "median_err", "mean_err2_delta", "cr_ratio"])
            kmse = obj.k_mse
            for i in range(len(obj.k)):
                w.writerow([int(obj.k[i]), _fmt(obj.mean_err2_theta[i]), _fmt(kmse[i]),
                            _fmt(obj.median_err[i]), _fmt(obj.mean_err2_delta[i]), _fmt(obj.cr_ratio[i])])
        else:
            raise TypeError(f"cannot export {type(obj).__name__}")
