"""Output-error identification by way of the impulse response.

The truncated impulse response ``h_0..h_kappa`` of ``B(q)/A(q)`` is a static
linear parameter of the stacked regressor ``[phi_k, ..., phi_{k-kappa}]``, so
the quantized WLS machinery estimates it directly. ``A`` and ``B`` are then
read off the linear recursion the impulse response satisfies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .quantizer import Quantizer
from .variance import DEFAULT_C, DEFAULT_C_STAR, VarianceEstimator
from .wls import WlsEstimator, recover_theta

STABILITY_MARGIN = 1e-9


@dataclass
class OeModel:
    """``y_k = phi_k^T B(q) / A(q) + d_k`` with ``A = 1 + a_1 q^-1 + ...``.

    ``a`` has length ``n_a`` (possibly 0 for an FIR model); ``b`` has shape
    ``(n_b + 1, n)``, row ``j`` holding ``b_j``.
    """

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float)).ravel()
        b = np.asarray(self.b, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        if b.ndim != 2 or b.shape[0] == 0:
            raise ConfigError("b must be a (n_b + 1, n) array")
        self.b = b
        if self.n_a and self.a[-1] == 0.0:
            raise ConfigError("leading denominator coefficient a_{n_a} must be nonzero")
        if not np.any(self.b[-1] != 0.0):
            raise ConfigError("trailing numerator coefficient b_{n_b} must be nonzero")
        if self.n_a and np.max(self.poles_modulus()) >= 1.0 - STABILITY_MARGIN:
            raise ConfigError("unstable model: A(q) has a pole on or outside the unit circle")

    @property
    def n_a(self) -> int:
        return self.a.size

    @property
    def n_b(self) -> int:
        return self.b.shape[0] - 1

    @property
    def n(self) -> int:
        return self.b.shape[1]

    @property
    def theta_star(self) -> np.ndarray:
        return np.concatenate([self.a, self.b.ravel()])

    def poles_modulus(self) -> np.ndarray:
        if not self.n_a:
            return np.zeros(0)
        return np.abs(np.roots(np.concatenate([[1.0], self.a])))

    def is_coprime(self, tol=1e-8) -> bool:
        """True when no pole of ``1/A`` is a common zero of every component of ``B``."""
        if not self.n_a:
            return True
        poles = np.roots(np.concatenate([[1.0], self.a]))
        scale = np.abs(self.b).max()
        for p in poles:
            # B evaluated at q^{-1} = 1/p: sum_j b_j p^{-j}
            val = sum(self.b[j] * p ** (-j) for j in range(self.n_b + 1))
            if np.max(np.abs(val)) <= tol * scale:
                return False
        return True

    def from_theta_star(self, theta_star) -> "OeModel":
        t = np.asarray(theta_star, dtype=float)
        return OeModel(t[:self.n_a], t[self.n_a:].reshape(self.n_b + 1, self.n))


def impulse_response(model: OeModel, count: int) -> np.ndarray:
    """First ``count`` impulse-response vectors, shape ``(count, n)``.

    ``h_i + a_1 h_{i-1} + ... + a_{n_a} h_{i-n_a}`` equals ``b_i`` for
    ``i <= n_b`` and zero afterwards, with ``h_i = 0`` for ``i < 0``.
    """
    h = np.zeros((int(count), model.n))
    for i in range(int(count)):
        acc = model.b[i].copy() if i <= model.n_b else np.zeros(model.n)
        for j in range(1, min(model.n_a, i) + 1):
            acc -= model.a[j - 1] * h[i - j]
        h[i] = acc
    return h


def stationary_output_variance(model: OeModel, H, noise_std, tol=1e-16, max_terms=100_000) -> float:
    """``sum_i h_i^T H h_i + noise_std^2`` summed until the tail is negligible."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    total = 0.0
    chunk = 256
    h = impulse_response(model, chunk)
    n_terms = chunk
    while True:
        terms = np.einsum("ij,jk,ik->i", h, H, h)
        total = terms.sum()
        if terms[-model.n_a - model.n_b - 1:].max() <= tol * max(total, 1.0) or n_terms >= max_terms:
            break
        n_terms *= 2
        h = impulse_response(model, n_terms)
    return float(total + noise_std ** 2)


def _check_kappa(n_a, n_b, kappa):
    if kappa < n_a + n_b:
        raise DimensionError(f"kappa={kappa} is below n_a + n_b = {n_a + n_b}")


def build_gamma_matrix(h_hat, n_a: int, n_b: int, kappa: int) -> np.ndarray:
    """Stack of lagged impulse responses, shape ``(..., n (kappa - n_b), n_a)``.

    Row block ``r`` is ``[h_{n_b+r}, h_{n_b+r-1}, ..., h_{n_b+r+1-n_a}]``.
    """
    _check_kappa(n_a, n_b, kappa)
    h = np.asarray(h_hat, dtype=float)
    if h.shape[-2] < kappa:
        raise DimensionError(f"need at least {kappa} impulse-response entries")
    n = h.shape[-1]
    pad = [(0, 0)] * (h.ndim - 2) + [(n_a, 0), (0, 0)]
    hp = np.pad(h, pad)
    rows = np.arange(kappa - n_b)[:, None]
    cols = np.arange(1, n_a + 1)[None, :]
    blocks = hp[..., n_b + rows + 1 - cols + n_a, :]  # (..., R, n_a, n)
    blocks = np.moveaxis(blocks, -1, -2)             # (..., R, n, n_a)
    return blocks.reshape(h.shape[:-2] + ((kappa - n_b) * n, n_a))


def recover(h_hat, n_a: int, n_b: int, kappa: int, rank_tol: float = 1e-8) -> np.ndarray:
    """Recover ``[a_1..a_{n_a}, b_0, ..., b_{n_b}]`` from an impulse-response estimate.

    ``a`` is the least-squares solution of ``Gamma a = -[h_{n_b+1}; ...; h_kappa]``
    (pseudo-inverse from the SVD). When ``Gamma`` is rank deficient, its
    smallest singular value not exceeding ``rank_tol`` times the largest,
    ``a`` is set to zero. Then ``b_j = h_j + sum_i a_i h_{j-i}``.
    """
    _check_kappa(n_a, n_b, kappa)
    h = np.asarray(h_hat, dtype=float)
    if h.shape[-2] < kappa + 1:
        raise DimensionError(f"need at least {kappa + 1} impulse-response entries")
    batch = h.shape[:-2]
    n = h.shape[-1]
    if n_a:
        gamma = build_gamma_matrix(h, n_a, n_b, kappa)
        rhs = -h[..., n_b + 1:kappa + 1, :].reshape(batch + (-1,))
        finite = np.all(np.isfinite(gamma), axis=(-2, -1)) & np.all(np.isfinite(rhs), axis=-1)
        gamma = np.where(finite[..., None, None], gamma, 0.0)
        rhs = np.where(finite[..., None], rhs, 0.0)
        U, sv, Vt = np.linalg.svd(gamma, full_matrices=False)
        ok = finite & (sv[..., 0] > 0) & (sv[..., -1] > rank_tol * sv[..., 0])
        safe = np.where(ok[..., None], sv, 1.0)
        coef = np.einsum("...ji,...j->...i", U, rhs) / safe
        a = np.einsum("...ij,...i->...j", Vt, coef)
        a = np.where(ok[..., None], a, 0.0)
    else:
        a = np.zeros(batch + (0,))
    b = h[..., :n_b + 1, :].copy()
    for j in range(n_b + 1):
        for i in range(1, min(n_a, j) + 1):
            b[..., j, :] += a[..., i - 1, None] * h[..., j - i, :]
    return np.concatenate([a, b.reshape(batch + ((n_b + 1) * n,))], axis=-1)


class DurbinEstimator:
    """Recursive estimator of ``theta* = [a, b_0, ..., b_{n_b}]`` for an OE system.

    Step 1 feeds the stacked regressor to a WLS-type estimator and the level to
    a variance estimator, giving ``h_hat = gamma_hat / rho(delta_hat)``.
    Step 2 (:func:`recover`) is a pure function of ``h_hat`` and is evaluated
    whenever :attr:`theta_star_hat` is read.
    """

    def __init__(self, spec: Quantizer, n_a: int, n_b: int, n: int = 1, kappa: int | None = None,
                 c=DEFAULT_C, c_star=DEFAULT_C_STAR, delta0=1.0, P0=0.1, beta=1.0,
                 batch_shape=(), burn_in=0, weight_every=1, rank_tol=1e-8):
        self.kappa = 2 * (n_a + n_b) if kappa is None else int(kappa)
        _check_kappa(n_a, n_b, self.kappa)
        self.spec = spec
        self.n_a, self.n_b, self.n = int(n_a), int(n_b), int(n)
        self.beta = float(beta)
        self.burn_in = int(burn_in)
        self.rank_tol = rank_tol
        shape = tuple(batch_shape)
        dim = (self.kappa + 1) * self.n
        self.window = np.zeros(shape + (self.kappa + 1, self.n))
        self.wls = WlsEstimator(dim, P0=P0, beta_bounds=(self.beta, self.beta), batch_shape=shape)
        self.var_est = VarianceEstimator(spec, c=c, c_star=c_star, delta0=delta0,
                                         batch_shape=shape, weight_every=weight_every)
        self.k = 0

    def build_regressor(self, phi) -> np.ndarray:
        """Push ``phi`` and return ``[phi_k, phi_{k-1}, ..., phi_{k-kappa}]`` flattened."""
        phi = np.asarray(phi, dtype=float).reshape(self.window.shape[:-2] + (self.n,))
        self.window[..., 1:, :] = self.window[..., :-1, :]
        self.window[..., 0, :] = phi
        return self.window.reshape(self.window.shape[:-2] + (-1,)).copy()

    def update(self, phi, s) -> None:
        reg = self.build_regressor(phi)
        self.wls.update(reg, s, self.beta)
        self.k += 1
        if self.k > self.burn_in:
            self.var_est.update(s)

    @property
    def delta_hat(self) -> np.ndarray:
        return self.var_est.delta_hat

    @property
    def h_hat(self) -> np.ndarray:
        flat = recover_theta(self.wls.gamma_hat, self.var_est.delta_hat, self.spec)
        return flat.reshape(flat.shape[:-1] + (self.kappa + 1, self.n))

    @property
    def theta_star_hat(self) -> np.ndarray:
        with np.errstate(invalid="ignore", over="ignore"):
            return recover(self.h_hat, self.n_a, self.n_b, self.kappa, self.rank_tol)


def build_regressor(state: DurbinEstimator, phi) -> np.ndarray:
    return state.build_regressor(phi)


def dm_update(state: DurbinEstimator, phi, s) -> DurbinEstimator:
    state.update(phi, s)
    return state
