"""Recursive WLS-type estimation of the scaled parameter ``gamma = rho(delta_y) theta``.

The quantized level ``s_k`` is regressed on the Gaussian input as if it were
a noisy linear output. Its correlation with the input is ``rho(delta_y) H theta``,
so the least-squares solution converges to ``gamma``; dividing by
``rho(delta_hat)`` recovers ``theta``.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import DomainError, SingularMatrixError
from .gauss import MvnSampler, make_rng
from .quantizer import Quantizer, quantize, rho


class WlsEstimator:
    """Recursive weighted least squares on ``s_k ~ phi_k^T gamma``.

    Parameters
    ----------
    n : int
        Regressor dimension.
    P0 : float or array, optional
        Initial information-inverse; a scalar means ``P0 * I``.
        Defaults to ``I / 10``.
    gamma0 : array, optional
        Initial estimate, zero by default.
    beta_bounds : (float, float)
        Admissible range of the per-step weight.
    batch_shape : tuple
        Leading shape for lockstep replicas.
    """

    def __init__(self, n, P0=0.1, gamma0=None, beta_bounds=(1e-6, 1e6), batch_shape=()):
        self.n = int(n)
        lo, hi = beta_bounds
        if not 0 < lo <= hi < np.inf:
            raise DomainError("beta bounds must satisfy 0 < low <= high < inf")
        self.beta_bounds = (float(lo), float(hi))
        shape = tuple(batch_shape)
        P0 = np.asarray(P0, dtype=float)
        if P0.ndim == 0:
            P0 = P0 * np.eye(self.n)
        self.P0 = P0
        self.gamma0 = np.zeros(self.n) if gamma0 is None else np.asarray(gamma0, dtype=float)
        self.P = np.broadcast_to(P0, shape + (self.n, self.n)).copy()
        self.gamma_hat = np.broadcast_to(self.gamma0, shape + (self.n,)).copy()
        self.k = 0

    def update(self, phi, s, beta=1.0) -> None:
        lo, hi = self.beta_bounds
        beta = np.asarray(beta, dtype=float)
        if np.any((beta < lo) | (beta > hi)):
            raise DomainError(f"beta outside [{lo}, {hi}]")
        phi = np.asarray(phi, dtype=float)
        Pphi = np.einsum("...ij,...j->...i", self.P, phi)
        alpha = 1.0 / (1.0 / beta + np.einsum("...i,...i->...", phi, Pphi))
        resid = np.asarray(s, dtype=float) - np.einsum("...i,...i->...", phi, self.gamma_hat)
        self.gamma_hat = self.gamma_hat + (alpha * resid)[..., None] * Pphi
        P = self.P - alpha[..., None, None] * (Pphi[..., :, None] * Pphi[..., None, :])
        self.P = 0.5 * (P + np.swapaxes(P, -1, -2))
        self.k += 1

    def theta(self, delta_hat, spec: Quantizer) -> np.ndarray:
        return recover_theta(self.gamma_hat, delta_hat, spec)


def wls_update(state: WlsEstimator, phi, s, beta=1.0) -> WlsEstimator:
    state.update(phi, s, beta)
    return state


def recover_theta(gamma_hat, delta_hat, spec: Quantizer) -> np.ndarray:
    """``gamma_hat / rho(delta_hat)``, broadcasting over replicas."""
    r = np.asarray(rho(spec, delta_hat))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.asarray(gamma_hat, dtype=float) / r[..., None]


def batch_wls_oracle(history: Iterable, P0, gamma0) -> tuple[np.ndarray, np.ndarray]:
    """Direct solve of the penalized criterion.

    Minimizes ``sum_l beta_l (s_l - phi_l^T g)^2 + (g - gamma0)^T P0^{-1} (g - gamma0)``
    through its normal equations. Returns ``(gamma, P)``.
    """
    gamma0 = np.asarray(gamma0, dtype=float)
    n = gamma0.size
    P0 = np.asarray(P0, dtype=float)
    if P0.ndim == 0:
        P0 = P0 * np.eye(n)
    try:
        P0inv = np.linalg.inv(P0)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("P0 is singular") from exc
    info = P0inv.copy()
    rhs = P0inv @ gamma0
    count = 0
    for phi, s, beta in history:
        phi = np.asarray(phi, dtype=float)
        info += beta * np.outer(phi, phi)
        rhs += beta * s * phi
        count += 1
    if count == 0:
        raise DomainError("history must be nonempty")
    try:
        P = np.linalg.inv(info)
        gamma = np.linalg.solve(info, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("information matrix is singular") from exc
    return gamma, P


def penalized_criterion(gamma, history, P0, gamma0) -> float:
    gamma = np.asarray(gamma, dtype=float)
    d = gamma - np.asarray(gamma0, dtype=float)
    P0 = np.asarray(P0, dtype=float)
    if P0.ndim == 0:
        P0 = P0 * np.eye(gamma.size)
    total = float(d @ np.linalg.solve(P0, d))
    for phi, s, beta in history:
        total += beta * (s - np.dot(phi, gamma)) ** 2
    return total


def correlation_check(spec: Quantizer, theta, H, noise_std, sample_count, seed=0,
                      chunk=200_000) -> float:
    """Distance between ``mean(s_k phi_k)`` and ``rho(delta_y) H theta`` on a simulated stream."""
    if sample_count < 10_000:
        raise DomainError("sample_count must be at least 1e4")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    sampler = MvnSampler(np.zeros(theta.size), H, seed=seed)
    noise = make_rng(seed, stream=1)
    acc = np.zeros(theta.size)
    left = int(sample_count)
    while left > 0:
        t = min(chunk, left)
        phi = sampler.sample(t)
        y = phi @ theta + noise_std * noise.standard_normal(t)
        acc += quantize(spec, y) @ phi
        left -= t
    delta_y = np.sqrt(theta @ H @ theta + noise_std ** 2)
    if delta_y == 0:
        return float(np.linalg.norm(acc / sample_count))
    target = rho(spec, delta_y) * (H @ theta)
    return float(np.linalg.norm(acc / sample_count - target))
