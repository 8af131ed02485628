"""Seeded experiment runner: presets, regimes, per-trial records and reports."""

from __future__ import annotations

import copy
import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .compression import Family, Gaussian1DFamily, GaussianIsoFamily, MixtureFamily, UniformBoxFamily
from .densities import (
    DensityHandle,
    GaussianNoise,
    IsoGaussian,
    LaplaceNoise,
    Mixture,
    NoiseModel,
    SeededRng,
    UniformBox,
    convolve_noise,
    density_from_dict,
    distance,
)
from .robust import (
    AdversaryBudget,
    AdversaryStrategy,
    CliqueNotFound,
    corrupt_adversarial,
    epsilon_for_budget,
    learn_adversarial,
    learn_clean,
    learn_noisy,
)
from .spectral import BoundedSupport, KMixUniform1DClass, l2_error_bound, tv_from_l2, xi_certificate

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "TrialRecord",
    "Report",
    "build_family",
    "build_noise",
    "draw_truth",
    "run_experiment",
    "sweep",
    "emit_report",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("trial", "seed", "tv_error", "l2_error", "candidate_count", "truncated", "clique_found", "wall_ms")
FAMILIES = ("Gaussian1D", "GaussianIso", "UniformBox", "KMixUniform", "KMixGaussian")
REGIMES = ("clean", "noisy", "adversarial")
SWEEPABLE = {"n": REGIMES, "s": ("adversarial",), "C": ("adversarial",), "sigma": ("noisy",)}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


# ----------------------------------------------------------------------------
# Config
# ----------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Declarative scenario.

    ``family``: {"name": one of FAMILIES, "d", "k", "T", "sigma0", "r_const"}.
    ``regime``: {"kind": "clean"} | {"kind": "noisy", "noise": {"kind":
    "gaussian"|"laplace", "scale": s}} | {"kind": "adversarial", "s", "C",
    "strategy", "target"}.
    ``truth``: {"density": <density dict>} or {"random": {"mean_range",
    "sigma_range", "lower_range", "width_range"}}.
    ``epsilon=None`` picks the smallest epsilon the sample size n supports.
    """

    family: dict
    regime: dict = field(default_factory=lambda: {"kind": "clean"})
    truth: dict = field(default_factory=lambda: {"random": {}})
    n: int = 1000
    epsilon: float | None = 0.2
    delta: float = 0.1
    trials: int = 1
    seed: int = 0
    cap: int | None = 2_000_000
    mass_budget: int = 20_000
    scheffe: str = "auto"
    tv_budget: int = 100_000
    timing: bool = False
    workers: int = 1
    output: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        fam = self.family
        if not isinstance(fam, dict) or fam.get("name") not in FAMILIES:
            raise ConfigError(f"family.name must be one of {FAMILIES}")
        if int(fam.get("d", 1)) < 1 or int(fam.get("k", 1)) < 1:
            raise ConfigError("family d and k must be positive")
        kind = self.regime.get("kind") if isinstance(self.regime, dict) else None
        if kind not in REGIMES:
            raise ConfigError(f"regime.kind must be one of {REGIMES}")
        if kind == "noisy":
            noise = self.regime.get("noise")
            if not isinstance(noise, dict) or noise.get("kind") not in ("gaussian", "laplace"):
                raise ConfigError("noisy regime needs noise.kind gaussian or laplace")
            if not float(noise.get("scale", 0)) > 0:
                raise ConfigError("noise.scale must be positive")
        if kind == "adversarial":
            for key in ("s", "C"):
                if key not in self.regime:
                    raise ConfigError(f"adversarial regime needs {key!r}")
            if int(self.regime["s"]) < 0 or float(self.regime["C"]) < 0:
                raise ConfigError("adversary budget must be nonnegative")
            try:
                AdversaryStrategy(self.regime.get("strategy", "DecoyCluster"))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if not isinstance(self.truth, dict) or not ({"density", "random"} & set(self.truth)):
            raise ConfigError("truth needs 'density' or 'random'")
        if self.epsilon is not None and not 0 < self.epsilon < 1:
            raise ConfigError("epsilon must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if int(self.trials) < 1:
            raise ConfigError("trials must be at least 1")
        if int(self.n) < 4:
            raise ConfigError("n must be at least 4")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.cap is not None and int(self.cap) < 1:
            raise ConfigError("cap must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        if "family" not in obj:
            raise ConfigError("config needs a family")
        return cls(**copy.deepcopy(obj))

    def replace(self, **changes) -> "ExperimentConfig":
        d = self.to_dict()
        d.update(changes)
        return ExperimentConfig.from_dict(d)


# ----------------------------------------------------------------------------
# Records
# ----------------------------------------------------------------------------


@dataclass
class TrialRecord:
    trial: int
    seed: int
    tv_error: float | None
    l2_error: float | None
    candidate_count: int
    truncated: bool
    clique_found: bool
    wall_ms: float


@dataclass
class Report:
    config: dict
    rows: list[TrialRecord]
    summary: dict
    bounds: list[dict] | None = None

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "rows": [asdict(r) for r in self.rows],
            "summary": self.summary,
            "bounds": self.bounds,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Report":
        return cls(obj["config"], [TrialRecord(**r) for r in obj["rows"]], obj["summary"], obj.get("bounds"))


# ----------------------------------------------------------------------------
# Presets
# ----------------------------------------------------------------------------


def build_family(spec: dict) -> Family:
    name = spec["name"]
    d = int(spec.get("d", 1))
    k = int(spec.get("k", 1))
    T = float(spec.get("T", 1.0))
    s0 = float(spec.get("sigma0", 1.0))
    r = spec.get("r_const")
    kw = {} if r is None else {"r_const": float(r)}
    if name == "Gaussian1D":
        return Gaussian1DFamily(s0, **kw)
    if name == "GaussianIso":
        return GaussianIsoFamily(d, s0, **kw)
    if name == "UniformBox":
        return UniformBoxFamily(d, T, **kw)
    if name == "KMixUniform":
        return MixtureFamily(UniformBoxFamily(d, T, **kw), k)
    if name == "KMixGaussian":
        base = Gaussian1DFamily(s0, **kw) if d == 1 else GaussianIsoFamily(d, s0, **kw)
        return MixtureFamily(base, k)
    raise ConfigError(f"unknown family {name!r}")


def build_noise(spec: dict, d: int) -> NoiseModel:
    if spec["kind"] == "gaussian":
        return GaussianNoise(float(spec["scale"]), d)
    return LaplaceNoise(float(spec["scale"]), d)


def draw_truth(family_spec: dict, truth_spec: dict, rng: SeededRng) -> DensityHandle:
    """The trial's true density: fixed, or drawn uniformly from the configured ranges."""
    if "density" in truth_spec:
        return density_from_dict(truth_spec["density"])
    spec = truth_spec["random"]
    name = family_spec["name"]
    d = int(family_spec.get("d", 1))
    k = int(family_spec.get("k", 1))
    T = float(family_spec.get("T", 1.0))
    s0 = float(family_spec.get("sigma0", 1.0))
    gen = rng.generator()

    def gaussian():
        lo, hi = spec.get("mean_range", [-5.0, 5.0])
        slo, shi = spec.get("sigma_range", [s0, 2 * s0] if name != "Gaussian1D" else [0.5, 2.0])
        return IsoGaussian(gen.uniform(lo, hi, d), gen.uniform(slo, shi))

    def box():
        lo, hi = spec.get("lower_range", [-2.0, 2.0])
        wlo, whi = spec.get("width_range", [T, 2 * T])
        a = gen.uniform(lo, hi, d)
        return UniformBox(a, a + gen.uniform(wlo, whi, d), T)

    if name in ("Gaussian1D", "GaussianIso"):
        return gaussian()
    if name == "UniformBox":
        return box()
    comps = [box() if name == "KMixUniform" else gaussian() for _ in range(k)]
    w = gen.dirichlet(np.ones(k))
    w[-1] = 1.0 - w[:-1].sum()
    return comps[0] if k == 1 else Mixture(w, comps)


# ----------------------------------------------------------------------------
# Running
# ----------------------------------------------------------------------------


def _noisy_bounds(fit_density, truth, noise, tv_conv, l2) -> dict:
    """L2 bound from the measured noisy TV, using the 1D uniform-mixture certificate."""
    k = len(truth.components) if isinstance(truth, Mixture) else 1
    T = truth.min_width if isinstance(truth, UniformBox) else truth.components[0].min_width
    alphas = np.geomspace(0.05, 200.0, 120)
    certs = [xi_certificate(KMixUniform1DClass(T, k, l2), a) for a in alphas] if l2 > 0 else []
    bound = l2_error_bound(tv_conv, noise, certs) if certs else 0.0
    lo = min(float(truth.support()[0][0]), float(fit_density.support()[0][0]))
    hi = max(float(truth.support()[1][0]), float(fit_density.support()[1][0]))
    R = max(abs(lo), abs(hi))
    return {
        "tv_noisy": tv_conv,
        "l2_bound": bound,
        "l2_within_bound": bool(l2 <= bound),
        "tv_from_l2_bound": tv_from_l2(BoundedSupport(R, 1), bound) if bound > 0 else 0.0,
    }


def _run_trial(cfg: ExperimentConfig, index: int, substream: tuple[int, ...]) -> tuple[TrialRecord, dict | None]:
    rng = SeededRng(int(cfg.seed), tuple(substream) + (index,))
    start = time.perf_counter()
    family = build_family(cfg.family)
    d = family.dim
    truth = draw_truth(cfg.family, cfg.truth, rng.child(0))
    clean = truth.sample(int(cfg.n), rng.child(1))
    eps = cfg.epsilon if cfg.epsilon is not None else epsilon_for_budget(int(cfg.n), family, cfg.delta)
    common = dict(rng=rng.child(3), cap=cfg.cap, mass_budget=cfg.mass_budget, scheffe=cfg.scheffe)
    kind = cfg.regime["kind"]
    noise = None
    fit = None
    try:
        if kind == "clean":
            fit = learn_clean(clean, family, eps, cfg.delta, **common)
        elif kind == "noisy":
            noise = build_noise(cfg.regime["noise"], d)
            noisy = clean + noise._draw(len(clean), rng.child(2).generator())
            fit = learn_noisy(noisy, family, noise, eps, cfg.delta, **common)
        else:
            s, C = int(cfg.regime["s"]), float(cfg.regime["C"])
            target = cfg.regime.get("target")
            strategy = AdversaryStrategy(cfg.regime.get("strategy", "DecoyCluster"), None if target is None else tuple(target))
            rec = corrupt_adversarial(clean, AdversaryBudget(s, C), strategy, rng=rng.child(2))
            fit = learn_adversarial(rec.samples, s, family, C, eps, cfg.delta, **common)
    except CliqueNotFound:
        fit = None
    tv = l2 = None
    bounds = None
    if fit is not None:
        if d <= 2:
            tv = distance(fit.density, truth, "TV").value
            l2 = distance(fit.density, truth, "L2").value
        else:
            tv = distance(fit.density, truth, "TV", budget=cfg.tv_budget, rng=rng.child(4)).value
        if noise is not None and d == 1 and cfg.family["name"] in ("UniformBox", "KMixUniform"):
            tv_conv = distance(convolve_noise(fit.density, noise), convolve_noise(truth, noise), "TV").value
            bounds = _noisy_bounds(fit.density, truth, noise, tv_conv, l2)
    wall = (time.perf_counter() - start) * 1000.0 if cfg.timing else 0.0
    if fit is None:
        row = TrialRecord(index, int(cfg.seed), None, None, 0, False, False, wall)
    else:
        row = TrialRecord(index, int(cfg.seed), tv, l2, int(fit.candidate_count), bool(fit.truncated), True, wall)
    return row, bounds


def _percentiles(values: list[float]) -> dict:
    if not values:
        return {"median": None, "p10": None, "p90": None}
    arr = np.asarray(values, dtype=float)
    return {
        "median": float(np.median(arr)),
        "p10": float(np.percentile(arr, 10)),
        "p90": float(np.percentile(arr, 90)),
    }


def _summarize(rows: list[TrialRecord]) -> dict:
    failures = sum(1 for r in rows if not r.clique_found)
    return {
        "tv_error": _percentiles([r.tv_error for r in rows if r.tv_error is not None]),
        "l2_error": _percentiles([r.l2_error for r in rows if r.l2_error is not None]),
        "trials": len(rows),
        "failures": failures,
        "failure_rate": failures / len(rows),
    }


def run_experiment(config: ExperimentConfig | dict, substream: tuple[int, ...] = ()) -> Report:
    """Run ``config.trials`` seeded trials; trial i uses stream (seed, substream + (i,))."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    idx = range(int(cfg.trials))
    if int(cfg.workers) > 1:
        with ProcessPoolExecutor(int(cfg.workers)) as pool:
            out = list(pool.map(_run_trial, [cfg] * len(idx), idx, [substream] * len(idx)))
    else:
        out = [_run_trial(cfg, i, substream) for i in idx]
    rows = [r for r, _ in out]
    bounds = [b for _, b in out]
    return Report(cfg.to_dict(), rows, _summarize(rows), bounds if any(b is not None for b in bounds) else None)


def sweep(config: ExperimentConfig | dict, vary: str, values: list) -> list[Report]:
    """One report per value of ``vary``; point j draws from substream (j,) of the master seed."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    if vary not in SWEEPABLE:
        raise ConfigError(f"cannot vary {vary!r}; choose from {sorted(SWEEPABLE)}")
    if cfg.regime["kind"] not in SWEEPABLE[vary]:
        raise ConfigError(f"{vary!r} does not apply to the {cfg.regime['kind']} regime")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    reports = []
    for j, v in enumerate(values):
        if vary == "n":
            point = cfg.replace(n=int(v))
        elif vary == "sigma":
            regime = copy.deepcopy(cfg.regime)
            regime["noise"]["scale"] = float(v)
            point = cfg.replace(regime=regime)
        else:
            regime = copy.deepcopy(cfg.regime)
            regime[vary] = int(v) if vary == "s" else float(v)
            point = cfg.replace(regime=regime)
        reports.append(run_experiment(point, substream=(j,)))
    return reports


# ----------------------------------------------------------------------------
# Output
# ----------------------------------------------------------------------------


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _render(report: Report, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in report.rows:
            writer.writerow([_cell(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}")


def emit_report(report: Report, fmt: str = "json", path: str | Path | None = None) -> str:
    """Render the report as CSV or JSON; write it to ``path`` when given. Returns the text."""
    text = _render(report, fmt)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
