"""Command-line interface: ``qident {check,simulate,identify,montecarlo,crbound}``.

Exit status is 0 on success, 1 when the configuration is invalid and 2 on
any other runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .config import load_config
from .errors import ConfigError
from .harness import export_csv, monte_carlo, run_identification
from .quantizer import Quantizer
from .simulate import make_stream
from .variance import fisher_information

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _load(args):
    if args.config is None:
        raise ConfigError("--config is required")
    cfg = load_config(args.config)
    return cfg.with_overrides(seed=getattr(args, "seed", None), steps=getattr(args, "steps", None),
                              replicas=getattr(args, "replicas", None))


def cmd_check(args) -> int:
    cfg = _load(args)
    extra = ""
    if cfg.mode == "oe":
        m = cfg.model
        extra = f", n_a={m.n_a}, n_b={m.n_b}, kappa={cfg.kappa_value}, max |pole|={m.poles_modulus().max(initial=0):.6g}"
    print(f"ok: {cfg.mode} system, m={cfg.quantizer.m}, delta_y={cfg.delta_y:.10g}{extra}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    stream = make_stream(cfg, cfg.seed)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        n = cfg.input_dim
        w.writerow(["k"] + [f"phi_{i}" for i in range(n)] + ["s"])
        k, left = 0, cfg.steps
        while left > 0:
            T = min(65536, left)
            phi, _, s = stream.next(T)
            for t in range(T):
                k += 1
                w.writerow([k] + [format(v, ".17g") for v in phi[t]] + [int(s[t])])
            left -= T
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_identify(args) -> int:
    cfg = _load(args)
    rec = run_identification(cfg)
    if args.out:
        export_csv(rec, args.out)
    print(f"k={int(rec.k[-1])} err_theta={rec.err_theta[-1]:.6g} err_delta={rec.err_delta[-1]:.6g}"
          f" theta_hat={np.array2string(rec.theta_hat[-1], precision=6)}")
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    cfg = _load(args)
    summary = monte_carlo(cfg, workers=args.workers)
    if args.out:
        export_csv(summary, args.out)
    i = len(summary.k) - 1
    print(f"replicas={summary.replicas} k={int(summary.k[i])} k_mse={summary.k_mse[i]:.6g}"
          f" cr_ratio={summary.cr_ratio[i]:.6g}")
    return EXIT_OK


def cmd_crbound(args) -> int:
    if args.thresholds is not None:
        spec = Quantizer(args.thresholds)
    else:
        spec = _load(args).quantizer
    print("delta,k_sigma_cr")
    for d in args.delta:
        print(f"{d:.10g},{1.0 / fisher_information(spec, d):.10g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qident", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_, seed=True, steps=True, replicas=False, out=True):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="experiment file (TOML); shipped names such as example1.cfg also work")
        if seed:
            p.add_argument("--seed", type=int)
        if steps:
            p.add_argument("--steps", type=int)
        if replicas:
            p.add_argument("--replicas", type=int)
        if out:
            p.add_argument("--out", help="output CSV path")
        p.set_defaults(func=func)
        return p

    add("check", cmd_check, "validate a config", seed=False, steps=False, out=False)
    add("simulate", cmd_simulate, "write the raw (phi, s) stream")
    add("identify", cmd_identify, "single identification run")
    mc = add("montecarlo", cmd_montecarlo, "Monte Carlo summary", replicas=True)
    mc.add_argument("--workers", type=int, default=None,
                    help="worker processes (default: QIDENT_THREADS, 0 = one per CPU)")
    cr = add("crbound", cmd_crbound, "print k * sigma_CR over a grid of delta",
             seed=False, steps=False, out=False)
    cr.add_argument("--thresholds", type=float, nargs="+")
    cr.add_argument("--delta", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"qident: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"qident: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
