"""Command line front end.

Exit codes: 0 success, 2 configuration error, 3 when ``selftest`` sees a
guarantee-failure rate above delta.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import spectral
from .densities import GaussianNoise, LaplaceNoise
from .harness import ConfigError, ExperimentConfig, emit_report, run_experiment, sweep
from .robust import build_grid

SELFTEST_DEFAULT = {
    "family": {"name": "Gaussian1D"},
    "truth": {"random": {"mean_range": [-5.0, 5.0], "sigma_range": [0.5, 2.0]}},
    "n": 2000,
    "epsilon": 0.2,
    "delta": 0.1,
    "trials": 10,
    "seed": 2024,
}


def _load_config(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config is required")
    try:
        obj = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    for flag in ("seed", "trials", "cap"):
        value = getattr(args, flag, None)
        if value is not None:
            obj[flag] = value
    if getattr(args, "out", None) is not None:
        obj["output"] = args.out
    return ExperimentConfig.from_dict(obj)


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    report = run_experiment(cfg)
    _write(emit_report(report, args.format), cfg.output)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("--values must be a comma separated list of numbers") from None
    reports = sweep(cfg, args.vary, values)
    if args.format == "json":
        text = json.dumps([r.to_dict() for r in reports], sort_keys=True, indent=2) + "\n"
        _write(text, cfg.output)
    else:
        for v, r in zip(values, reports):
            path = None if cfg.output is None else f"{cfg.output}.{args.vary}={v:g}.csv"
            _write(emit_report(r, "csv"), path)
    return 0


def _family_class(args):
    if args.family == "gaussian":
        return spectral.GaussianIsoClass(args.sigma0, args.d)
    if args.epsilon is None:
        raise ConfigError("uniform-mixture certificates need --epsilon")
    if args.family == "kmix1d":
        return spectral.KMixUniform1DClass(args.T, args.k, args.epsilon)
    return spectral.KMixUniformDClass(args.T, args.k, args.epsilon, args.d, args.c)


def cmd_certify(args) -> int:
    fam = _family_class(args)
    try:
        certs = [spectral.xi_certificate(fam, a) for a in args.alpha]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = {"certificates": [c.to_dict() for c in certs]}
    if args.noise is not None:
        if args.bound_eps is None:
            raise ConfigError("--noise needs --bound-eps")
        cls = GaussianNoise if args.noise == "gaussian" else LaplaceNoise
        g = cls(args.noise_scale, args.d)
        out["l2_error_bound"] = spectral.l2_error_bound(args.bound_eps, g, certs)
    _write(json.dumps(out, sort_keys=True, indent=2) + "\n", args.out)
    return 0


def cmd_waterfill(args) -> int:
    if args.envelope == "constant":
        env = spectral.ConstantOnBox(args.c, args.volume)
    else:
        env = spectral.GaussianEnvelope(args.C1, args.gamma, args.d)
    try:
        res = spectral.waterfill(env, args.epsilon)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _write(json.dumps(res.to_dict(), sort_keys=True, indent=2) + "\n", args.out)
    return 0


def _invariants() -> list[tuple[str, bool]]:
    checks = []
    grid = build_grid(1.0, 0.25)
    ys = np.linspace(-1, 1, 2001)
    cover = np.min(np.abs(ys[:, None] - np.asarray(grid.points)[None, :]), axis=1).max()
    checks.append(("grid coverage", bool(cover <= 0.25 + 1e-12)))
    hs = np.linspace(0, 50, 101)
    zs = [spectral.zeta(h) for h in hs]
    checks.append(("zeta nondecreasing", bool(np.all(np.diff(zs) >= -1e-12) and zs[-1] < 1)))
    g = GaussianNoise(1.0)
    bs = [spectral.b_lower(g, a, 1) for a in np.linspace(0, 5, 51)]
    checks.append(("B_G nonincreasing", bool(bs[0] == 1.0 and np.all(np.diff(bs) <= 0))))
    wf = spectral.waterfill(spectral.ConstantOnBox(1.0, 1.0), 0.5)
    checks.append(("waterfill equality case", abs(wf.l1_bound - 0.5) < 1e-9))
    return checks


def cmd_selftest(args) -> int:
    results = _invariants()
    for name, ok in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    if args.config is not None:
        cfg = _load_config(args)
    else:
        obj = dict(SELFTEST_DEFAULT)
        for flag in ("seed", "trials", "cap"):
            if getattr(args, flag, None) is not None:
                obj[flag] = getattr(args, flag)
        cfg = ExperimentConfig.from_dict(obj)
    report = run_experiment(cfg)
    eps = cfg.epsilon if cfg.epsilon is not None else math.inf
    bad = sum(1 for r in report.rows if not r.clique_found or r.tv_error is None or r.tv_error > eps)
    rate = bad / len(report.rows)
    print(f"guarantee failures: {bad}/{len(report.rows)} (rate {rate:.3f}, delta {cfg.delta})")
    if not all(ok for _, ok in results):
        return 1
    return 3 if rate > cfg.delta else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="compresslearn", description="Density learning by sample compression.")
    sub = p.add_subparsers(dest="command", required=True)

    def experiment_flags(sp):
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--cap", type=int)
        sp.add_argument("--out", help="output path (stdout when omitted)")
        sp.add_argument("--format", choices=("csv", "json"), default="json")

    sp = sub.add_parser("simulate", help="run one experiment")
    experiment_flags(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="run an experiment over a list of values")
    experiment_flags(sp)
    sp.add_argument("--vary", required=True, choices=("n", "s", "sigma", "C"))
    sp.add_argument("--values", required=True, help="comma separated values")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("certify", help="low-frequency certificates and the L2 error bound")
    sp.add_argument("--family", choices=("gaussian", "kmix1d", "kmixd"), required=True)
    sp.add_argument("--alpha", type=float, action="append", required=True)
    sp.add_argument("--sigma0", type=float, default=1.0)
    sp.add_argument("--d", type=int, default=1)
    sp.add_argument("--T", type=float, default=1.0)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--c", type=float, default=2.0)
    sp.add_argument("--noise", choices=("gaussian", "laplace"))
    sp.add_argument("--noise-scale", type=float, default=1.0)
    sp.add_argument("--bound-eps", type=float)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("waterfill", help="TV bound from an L2 error by water filling")
    sp.add_argument("--envelope", choices=("constant", "gaussian"), required=True)
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--c", type=float, default=1.0)
    sp.add_argument("--volume", type=float, default=1.0)
    sp.add_argument("--C1", type=float, default=1.0)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--d", type=int, default=1)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_waterfill)

    sp = sub.add_parser("selftest", help="invariant checks plus a seeded guarantee-rate run")
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--cap", type=int)
    sp.set_defaults(func=cmd_selftest, out=None)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
