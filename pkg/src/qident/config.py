"""Experiment configuration files.

Configs are TOML. Matrices are written as arrays of rows::

    mode = "static"

    [quantizer]
    thresholds = [0.0, 1.0]

    [system]
    theta = [0.2, -0.1, 0.5]
    H = [[2.5, -0.6, -0.4], [-0.6, 2.0, 0.6], [-0.4, 0.6, 1.5]]
    noise_std = 0.5

An OE system replaces ``theta``/``H`` by ``a``, ``b`` (one row per
``b_j``), ``input_cov`` and optionally ``kappa``. ``[estimator]`` and
``[run]`` hold the remaining knobs; see :class:`SimConfig`.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, FactorizationError
from .gauss import MvnSampler
from .oe import OeModel, stationary_output_variance
from .quantizer import Quantizer, check_identifiable

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CONFIG_DIR = Path(__file__).parent / "configs"


@dataclass
class SimConfig:
    mode: str
    thresholds: list
    noise_std: float = 0.0
    # static systems
    theta: list | None = None
    H: list | None = None
    # OE systems
    a: list | None = None
    b: list | None = None
    input_cov: list | None = None
    kappa: int | None = None
    # estimator knobs
    c: float = 1e-6
    c_star: float = 1e-6
    P0_scale: float = 0.1
    beta: float = 1.0
    delta0: float = 1.0
    weight_every: int = 1
    burn_in: int = 0
    # run knobs
    steps: int = 100_000
    replicas: int = 250
    seed: int = 0
    record_per_decade: int = 10
    record_start: int = 10
    name: str = ""
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        try:
            mode = d["mode"]
            thresholds = d["quantizer"]["thresholds"]
        except KeyError as exc:
            raise ConfigError(f"missing required key: {exc.args[0]}") from None
        kwargs = dict(mode=mode, thresholds=list(thresholds), name=d.get("name", ""))
        known = {f for f in cls.__dataclass_fields__ if not f.startswith("_")}
        for section in ("system", "estimator", "run"):
            for key, value in d.get(section, {}).items():
                if key not in known:
                    raise ConfigError(f"unknown key [{section}] {key}")
                kwargs[key] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def with_overrides(self, **kw) -> "SimConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        system = {"noise_std": self.noise_std}
        if self.mode == "static":
            system.update(theta=self.theta, H=self.H)
        else:
            system.update(a=self.a, b=self.b, input_cov=self.input_cov, kappa=self.kappa_value)
        return {
            "mode": self.mode,
            "name": self.name,
            "quantizer": {"thresholds": self.thresholds},
            "system": system,
            "estimator": dict(c=self.c, c_star=self.c_star, P0_scale=self.P0_scale, beta=self.beta,
                              delta0=self.delta0, weight_every=self.weight_every, burn_in=self.burn_in),
            "run": dict(steps=self.steps, replicas=self.replicas, seed=self.seed,
                        record_per_decade=self.record_per_decade, record_start=self.record_start),
        }

    def validate(self) -> None:
        """Raise :class:`ConfigError` with a specific diagnostic on the first problem found."""
        self._cache.clear()
        if self.mode not in ("static", "oe"):
            raise ConfigError(f"mode must be 'static' or 'oe', got {self.mode!r}")
        verdict = check_identifiable(self.thresholds)
        if not verdict.ok:
            raise ConfigError(verdict.reason)
        self.quantizer  # threshold ordering / finiteness
        if not np.isfinite(self.noise_std) or self.noise_std < 0:
            raise ConfigError(f"noise_std must be >= 0, got {self.noise_std}")
        if self.mode == "static":
            if self.theta is None or self.H is None:
                raise ConfigError("static mode needs [system] theta and H")
            n = len(self.theta)
            H = np.asarray(self.H, dtype=float)
            if H.shape != (n, n):
                raise ConfigError(f"H must be {n}x{n} to match theta, got shape {H.shape}")
            self._check_pd(H, "H")
        else:
            if self.a is None or self.b is None or self.input_cov is None:
                raise ConfigError("oe mode needs [system] a, b and input_cov")
            model = self.model
            cov = np.atleast_2d(np.asarray(self.input_cov, dtype=float))
            if cov.shape != (model.n, model.n):
                raise ConfigError(f"input_cov must be {model.n}x{model.n}, got shape {cov.shape}")
            self._check_pd(cov, "input_cov")
            if self.kappa is not None and self.kappa < model.n_a + model.n_b:
                raise ConfigError(f"kappa must be >= n_a + n_b = {model.n_a + model.n_b}")
        if not 0 < self.c < 1:
            raise ConfigError("c must lie in (0, 1)")
        if not 0 < self.c_star < 1 or self.c_star == 0.5:
            raise ConfigError("c_star must lie in (0, 1) and differ from 1/2")
        if self.P0_scale <= 0:
            raise ConfigError("P0_scale must be positive")
        if self.beta <= 0:
            raise ConfigError("beta must be positive")
        if self.steps < 1 or self.replicas < 1 or self.weight_every < 1 or self.burn_in < 0:
            raise ConfigError("steps, replicas and weight_every must be positive; burn_in >= 0")
        if self.record_per_decade < 1 or self.record_start < 1:
            raise ConfigError("record grid knobs must be positive")

    @staticmethod
    def _check_pd(M, label):
        try:
            MvnSampler(np.zeros(M.shape[0]), M)
        except FactorizationError as exc:
            raise ConfigError(f"{label} is not symmetric positive definite: {exc}") from None

    @property
    def quantizer(self) -> Quantizer:
        if "q" not in self._cache:
            self._cache["q"] = Quantizer(self.thresholds)
        return self._cache["q"]

    @property
    def model(self) -> OeModel:
        if "model" not in self._cache:
            self._cache["model"] = OeModel(self.a, self.b)
        return self._cache["model"]

    @property
    def kappa_value(self) -> int:
        m = self.model
        return 2 * (m.n_a + m.n_b) if self.kappa is None else int(self.kappa)

    @property
    def input_dim(self) -> int:
        return len(self.theta) if self.mode == "static" else self.model.n

    @property
    def input_covariance(self) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.H if self.mode == "static" else self.input_cov, dtype=float))

    @property
    def true_parameter(self) -> np.ndarray:
        """``theta`` for static systems, ``theta* = [a, b_0, ..., b_{n_b}]`` for OE."""
        if self.mode == "static":
            return np.asarray(self.theta, dtype=float)
        return self.model.theta_star

    @property
    def delta_y(self) -> float:
        """Standard deviation of the (stationary) output."""
        if "delta" not in self._cache:
            if self.mode == "static":
                th = np.asarray(self.theta, dtype=float)
                var = th @ np.asarray(self.H, dtype=float) @ th + self.noise_std ** 2
            else:
                var = stationary_output_variance(self.model, self.input_cov, self.noise_std)
            self._cache["delta"] = float(np.sqrt(var))
        return self._cache["delta"]


def load_config(path) -> SimConfig:
    path = Path(path)
    if not path.exists() and (CONFIG_DIR / path.name).exists() and not path.parent.name:
        path = CONFIG_DIR / path.name
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    data.setdefault("name", path.stem)
    return SimConfig.from_dict(data)


def builtin_config(name: str) -> SimConfig:
    """Load one of the shipped experiment files, e.g. ``"example1"``."""
    return load_config(CONFIG_DIR / f"{name}.cfg")
