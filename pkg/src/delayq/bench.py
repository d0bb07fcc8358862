"""Experiment orchestration: protocols, run matrices, and statistics reports.

A protocol is a grid of (scenario, method, seed) cells. Each scenario
names a training world and an evaluation world; shift protocols train
under baseline conditions and evaluate under the shifted ones. Cell seeds
derive from the world parameters rather than scenario labels, so a shift
scenario with factor 1.0 reproduces the stationary cells bit for bit.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .behavior import reference_spec
from .dcm import ChoiceModel, calibrate, gen_calibration_data
from .env import EnvConfig, reset
from .learners import TrainConfig, evaluate_policy, run_training
from .seeding import derive_seed
from .stats import TostResult, cohens_d, holm_bonferroni, tost, welch_t

#: Demand-intercept multipliers of the shift protocol.
DEMAND_FACTORS = (0.5, 0.85, 1.0, 1.15, 1.5)
#: Competitor-price-sensitivity multipliers of the shift protocol.
COMPETITION_FACTORS = (0.7, 0.85, 1.0, 1.15, 1.3)
#: Quadratic price coefficients of the misspecification protocol.
QUADRATIC_LEVELS = (0.0, -0.00005, -0.0001, -0.0002)
#: Out-of-family ground-truth families.
OOF_FAMILIES = ("nested_logit", "bimodal_mixture", "dynamic_mixture")


@dataclass(frozen=True)
class WorldParams:
    """One environment configuration: behavior family plus scale factors."""

    family: str = "mnl"
    demand_scale: float = 1.0
    competition_scale: float = 1.0
    beta2: float | None = None

    def key(self) -> str:
        return f"{self.family}|ds={self.demand_scale}|cs={self.competition_scale}|b2={self.beta2}"

    def spec(self):
        if self.family == "quadratic_mnl":
            return reference_spec(self.family, beta2=self.beta2 if self.beta2 is not None else 0.0)
        return reference_spec(self.family)

    def env_config(self, episodes: int | None = None) -> EnvConfig:
        kwargs = dict(demand_scale=self.demand_scale, competition_scale=self.competition_scale)
        if episodes is not None:
            kwargs["episode_length"] = episodes
        return EnvConfig(**kwargs)


@dataclass(frozen=True)
class Scenario:
    name: str
    train: WorldParams
    eval: WorldParams


@dataclass
class Protocol:
    """Full experiment description; everything downstream derives from it."""

    name: str
    scenarios: tuple
    methods: tuple = ("mb", "ca")
    variant: str = "tabular"
    n_seeds: int = 20
    episodes: int = 82
    eval_episodes: int = 50
    calibration_obs: int = 20_000
    alpha: float = 0.05
    tost_margin_frac: float = 0.05
    base_seed: int = 42
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        names = [s.name for s in self.scenarios]
        if len(set(names)) != len(names):
            raise ValueError("scenario names must be unique")
        if self.n_seeds < 2:
            raise ValueError("statistical comparison needs at least two seeds")
        self.scenarios = tuple(self.scenarios)
        self.methods = tuple(self.methods)
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)
        self.train.episodes = self.episodes

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Protocol":
        d = dict(d)
        d["scenarios"] = tuple(
            Scenario(
                name=s["name"],
                train=WorldParams(**s["train"]),
                eval=WorldParams(**s["eval"]),
            )
            for s in d["scenarios"]
        )
        d["methods"] = tuple(d.get("methods", ("mb", "ca")))
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "Protocol":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()
        ).hexdigest()[:16]

    def seeds(self) -> list:
        return list(range(self.n_seeds))


def preset_protocol(preset: str, n_seeds: int = 20, variant: str = "tabular", **overrides) -> Protocol:
    """The four experiment families with desk-scale defaults."""
    baseline = WorldParams()
    if preset == "stationary":
        scenarios = (Scenario("stationary", baseline, baseline),)
        methods = ("mb", "ca")
    elif preset == "shift":
        scenarios = tuple(
            Scenario(f"demand-{f}", baseline, WorldParams(demand_scale=f))
            for f in DEMAND_FACTORS
        ) + tuple(
            Scenario(f"competition-{f}", baseline, WorldParams(competition_scale=f))
            for f in COMPETITION_FACTORS
        )
        methods = ("mb", "ca")
    elif preset == "misspec":
        scenarios = tuple(
            Scenario(
                f"quadratic-{abs(b2):g}",
                WorldParams(family="quadratic_mnl", beta2=b2),
                WorldParams(family="quadratic_mnl", beta2=b2),
            )
            for b2 in QUADRATIC_LEVELS
        )
        methods = ("mb", "ca")
    elif preset == "oof":
        scenarios = tuple(
            Scenario(fam, WorldParams(family=fam), WorldParams(family=fam))
            for fam in OOF_FAMILIES
        )
        methods = ("mb", "ca", "ca-dr")
    else:
        raise ValueError(f"unknown preset {preset!r}")
    return Protocol(name=preset, scenarios=scenarios, methods=methods, n_seeds=n_seeds,
                    variant=variant, **overrides)


@dataclass
class RunRecord:
    """One (seed, method, scenario) training + evaluation outcome."""

    scenario: str
    method: str
    seed: int
    learning_curve: list
    eval_mean: float
    eval_sd: float
    wall_clock: float
    error: str | None = None


def _calibration_models(protocol: Protocol) -> dict:
    """One calibrated choice model per distinct training world."""
    models = {}
    needs_model = any(m in ("ca", "ca-dr", "mpc") for m in protocol.methods)
    if not needs_model:
        return models
    for scenario in protocol.scenarios:
        key = scenario.train.key()
        if key in models:
            continue
        spec = scenario.train.spec()
        config = scenario.train.env_config(protocol.episodes)
        booking, shock = gen_calibration_data(
            spec, config, protocol.calibration_obs, seed=derive_seed(protocol.base_seed, "calib", key)
        )
        model, _, _ = calibrate(booking, shock, meta={"world": key})
        models[key] = model
    return models


def _run_cell(protocol: Protocol, scenario: Scenario, method: str, seed: int, model) -> RunRecord:
    start = time.perf_counter()
    try:
        train_world = scenario.train
        eval_world = scenario.eval
        train_cfg = train_world.env_config(protocol.episodes)
        train_spec = train_world.spec()
        eval_cfg = eval_world.env_config(protocol.episodes)
        eval_spec = eval_world.spec()
        train_factory = lambda s: reset(train_cfg, train_spec, s)
        eval_factory = lambda s: reset(eval_cfg, eval_spec, s)
        cell_seed = derive_seed(protocol.base_seed, "train", train_world.key(), method, protocol.variant, seed)
        result = run_training(train_factory, method, protocol.variant, protocol.train, cell_seed, model)
        eval_seed = derive_seed(protocol.base_seed, "eval", eval_world.key(), seed)
        stats = evaluate_policy(eval_factory, result.policy, protocol.eval_episodes, eval_seed)
        return RunRecord(
            scenario=scenario.name,
            method=method,
            seed=seed,
            learning_curve=result.learning_curve,
            eval_mean=stats.mean,
            eval_sd=stats.sd,
            wall_clock=time.perf_counter() - start,
        )
    except Exception as exc:  # cell failures must not kill siblings
        return RunRecord(
            scenario=scenario.name,
            method=method,
            seed=seed,
            learning_curve=[],
            eval_mean=float("nan"),
            eval_sd=float("nan"),
            wall_clock=time.perf_counter() - start,
            error=f"{type(exc).__name__}: {exc}",
        )


def run_protocol(protocol: Protocol, jobs: int = 1) -> list:
    """Execute every cell; output order is (scenario, method, seed)."""
    models = _calibration_models(protocol)
    cells = [
        (scenario, method, seed)
        for scenario in protocol.scenarios
        for method in protocol.methods
        for seed in protocol.seeds()
    ]
    if jobs <= 1:
        records = [
            _run_cell(protocol, sc, m, s, models.get(sc.train.key())) for sc, m, s in cells
        ]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_run_cell, protocol, sc, m, s, models.get(sc.train.key()))
                for sc, m, s in cells
            ]
            records = [f.result() for f in futures]
    order = {
        (sc.name, m, s): i
        for i, (sc, m, s) in enumerate((sc, m, s) for sc, m, s in cells)
    }
    records.sort(key=lambda r: order[(r.scenario, r.method, r.seed)])
    return records


@dataclass
class ScenarioStats:
    scenario: str
    means: dict
    relative_difference: float
    t: float
    df: float
    p_raw: float
    p_adjusted: float
    cohens_d: float
    significant: bool
    tost: TostResult | None = None


@dataclass
class StatSummary:
    rows: list
    alpha: float
    baseline_method: str
    compare_method: str


def summarize(records: list, protocol: Protocol, with_tost: bool = False) -> StatSummary:
    """Per-scenario Welch comparison with Holm correction across scenarios.

    The relative difference follows the (compare - baseline) / |baseline|
    convention with the first protocol method as baseline.
    """
    baseline, compare = protocol.methods[0], protocol.methods[1]
    by_cell: dict = {}
    for rec in records:
        if rec.error is None:
            by_cell.setdefault((rec.scenario, rec.method), []).append(rec.eval_mean)
    rows = []
    p_raws = []
    for scenario in protocol.scenarios:
        a = by_cell.get((scenario.name, compare), [])
        b = by_cell.get((scenario.name, baseline), [])
        means = {
            m: float(np.mean(by_cell.get((scenario.name, m), [float("nan")])))
            for m in protocol.methods
        }
        if len(a) >= 2 and len(b) >= 2:
            res = welch_t(a, b)
            d = cohens_d(a, b)
            rel = (means[compare] - means[baseline]) / abs(means[baseline])
            tost_res = (
                tost(a, b, margin=protocol.tost_margin_frac * abs(means[baseline]), alpha=protocol.alpha)
                if with_tost
                else None
            )
            rows.append(
                ScenarioStats(
                    scenario=scenario.name,
                    means=means,
                    relative_difference=rel,
                    t=res.t,
                    df=res.df,
                    p_raw=res.p,
                    p_adjusted=float("nan"),
                    cohens_d=d,
                    significant=False,
                    tost=tost_res,
                )
            )
            p_raws.append(res.p)
        else:
            rows.append(
                ScenarioStats(
                    scenario=scenario.name,
                    means=means,
                    relative_difference=float("nan"),
                    t=float("nan"),
                    df=float("nan"),
                    p_raw=float("nan"),
                    p_adjusted=float("nan"),
                    cohens_d=float("nan"),
                    significant=False,
                )
            )
    testable = [r for r in rows if not np.isnan(r.p_raw)]
    if testable:
        reject, adjusted = holm_bonferroni([r.p_raw for r in testable], protocol.alpha)
        for row, rej, adj in zip(testable, reject, adjusted):
            row.p_adjusted = float(adj)
            row.significant = bool(rej)
    return StatSummary(rows=rows, alpha=protocol.alpha, baseline_method=baseline, compare_method=compare)


RUNS_COLUMNS = (
    "scenario",
    "method",
    "seed",
    "eval_mean_revenue",
    "eval_sd",
    "n_train_episodes",
    "final_train_revenue",
    "wall_clock_s",
    "error",
)

SUMMARY_COLUMNS = (
    "scenario",
    "baseline_method",
    "baseline_mean",
    "compare_method",
    "compare_mean",
    "relative_difference",
    "t",
    "df",
    "p_raw",
    "p_adjusted",
    "cohens_d",
    "significant",
)


def emit_report(records: list, stats: StatSummary, out_dir, protocol: Protocol | None = None) -> dict:
    """Write runs.csv, summary.csv, and a manifest; returns the paths.

    Outputs are byte-identical across reruns with identical inputs except
    for the wall-clock column.
    """
    if not records:
        raise ValueError("no run records to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs_path = out / "runs.csv"
    with runs_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUNS_COLUMNS)
        for rec in records:
            writer.writerow(
                [
                    rec.scenario,
                    rec.method,
                    rec.seed,
                    repr(rec.eval_mean),
                    repr(rec.eval_sd),
                    len(rec.learning_curve),
                    repr(rec.learning_curve[-1]) if rec.learning_curve else "",
                    f"{rec.wall_clock:.3f}",
                    rec.error or "",
                ]
            )
    summary_path = out / "summary.csv"
    with summary_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in stats.rows:
            writer.writerow(
                [
                    row.scenario,
                    stats.baseline_method,
                    repr(row.means.get(stats.baseline_method, float("nan"))),
                    stats.compare_method,
                    repr(row.means.get(stats.compare_method, float("nan"))),
                    repr(row.relative_difference),
                    repr(row.t),
                    repr(row.df),
                    repr(row.p_raw),
                    repr(row.p_adjusted),
                    repr(row.cohens_d),
                    int(row.significant),
                ]
            )
    manifest_path = out / "manifest.json"
    manifest = {
        "protocol_hash": protocol.hash() if protocol else None,
        "protocol_name": protocol.name if protocol else None,
        "seed_list": protocol.seeds() if protocol else sorted({r.seed for r in records}),
        "n_records": len(records),
        "alpha": stats.alpha,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return {"runs": runs_path, "summary": summary_path, "manifest": manifest_path}


def read_runs_csv(path) -> list:
    """Rebuild minimal RunRecords from a runs.csv (curves are not stored)."""
    records = []
    with Path(path).open() as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(
                RunRecord(
                    scenario=row["scenario"],
                    method=row["method"],
                    seed=int(row["seed"]),
                    learning_curve=[],
                    eval_mean=float(row["eval_mean_revenue"]),
                    eval_sd=float(row["eval_sd"]),
                    wall_clock=float(row["wall_clock_s"]),
                    error=row["error"] or None,
                )
            )
    return records
