"""Command-line entry point wiring calibration, training, verification and
benchmarking into reproducible workflows.

Every run writes a manifest (version, seed, config hash) into its output
directory. Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .behavior import reference_spec
from .bench import Protocol, emit_report, preset_protocol, read_runs_csv, run_protocol, summarize
from .dcm import (
    ChoiceModel,
    calibrate,
    check_identifiability,
    gen_calibration_data,
    read_calibration_csv,
    write_calibration_csv,
)
from .env import EnvConfig, reset
from .learners import (
    DqnPolicy,
    MlpParams,
    MpcPolicy,
    TabularPolicy,
    TrainConfig,
    evaluate_policy,
    load_qtable_csv,
    run_training,
    save_curve_csv,
    save_qtable_csv,
)
from .seeding import derive_seed
from . import theory

FAMILIES = ("mnl", "nested_logit", "bimodal_mixture", "dynamic_mixture", "quadratic_mnl")


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 on usage errors (default is 2)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("DELAYQ_OUT") or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _config_hash(args) -> str:
    if getattr(args, "config", None):
        return hashlib.sha256(Path(args.config).read_bytes()).hexdigest()[:16]
    payload = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _write_manifest(args, out: Path, extra: dict | None = None) -> None:
    manifest = {
        "version": __version__,
        "command": args.command,
        "seed": getattr(args, "seed", None),
        "config_hash": _config_hash(args),
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _env_config(args, family: str) -> EnvConfig:
    kwargs = {}
    if getattr(args, "episodes_length", None):
        kwargs["episode_length"] = args.episodes_length
    if getattr(args, "demand_scale", None):
        kwargs["demand_scale"] = args.demand_scale
    if getattr(args, "competition_scale", None):
        kwargs["competition_scale"] = args.competition_scale
    return EnvConfig(**kwargs)


def cmd_gen_data(args) -> int:
    out = _out_dir(args)
    spec = reference_spec(args.family)
    config = _env_config(args, args.family)
    booking, shock = gen_calibration_data(spec, config, args.obs, seed=args.seed)
    path = out / "calibration.csv"
    write_calibration_csv(path, booking, shock)
    _write_manifest(args, out, {"n_booking": booking.n, "n_shock": shock.n})
    print(f"wrote {path} ({booking.n} booking rows, {shock.n} shock rows)")
    return 0


def cmd_calibrate(args) -> int:
    out = _out_dir(args)
    booking, shock = read_calibration_csv(args.data)
    model, booking_report, shock_report = calibrate(booking, shock)
    params_path = out / "params.json"
    model.save(params_path)
    reports = {
        "booking": vars(booking_report),
        "shock": vars(shock_report),
    }
    (out / "fit_report.json").write_text(json.dumps(reports, indent=2, sort_keys=True))
    _write_manifest(args, out)
    for name, rep in (("booking", booking_report), ("shock", shock_report)):
        print(
            f"{name}: log-likelihood {rep.final_log_likelihood:.3f}, "
            f"{rep.iterations} iterations, grad {rep.grad_norm:.2e}, "
            f"converged={rep.converged}"
        )
    print(f"wrote {params_path}")
    return 0


def cmd_audit(args) -> int:
    out = _out_dir(args)
    booking, shock = read_calibration_csv(args.data)
    results = {}
    ok = True
    for name, data in (("booking", booking), ("shock", shock)):
        report = check_identifiability(data)
        results[name] = {
            cond: {"passed": c.passed, "detail": c.detail} for cond, c in report.conditions.items()
        }
        print(f"[{name}]")
        for line in report.lines():
            print(f"  {line}")
        ok = ok and report.all_pass
    (out / "identifiability.json").write_text(json.dumps(results, indent=2, sort_keys=True))
    _write_manifest(args, out)
    return 0


def _train_config(args) -> TrainConfig:
    cfg = TrainConfig(episodes=args.episodes)
    if getattr(args, "synthetic_next_state", False):
        cfg.synthetic_next_state = True
    return cfg


def cmd_train(args) -> int:
    out = _out_dir(args)
    spec = reference_spec(args.family)
    config = _env_config(args, args.family)
    model = ChoiceModel.load(args.params) if args.params else None
    factory = lambda s: reset(config, spec, s)
    result = run_training(factory, args.method, args.variant, _train_config(args), args.seed, model)
    save_curve_csv(out / "learning_curve.csv", result.learning_curve)
    if args.variant == "tabular" and args.method != "mpc":
        save_qtable_csv(out / "policy.csv", result.diagnostics["q_table"])
        policy_file = "policy.csv"
    elif args.variant == "dqn" and args.method != "mpc":
        result.policy.params.save(out / "policy.json")
        policy_file = "policy.json"
    else:
        policy_file = None
    _write_manifest(
        args,
        out,
        {
            "method": args.method,
            "variant": args.variant,
            "episodes": args.episodes,
            "policy_file": policy_file,
        },
    )
    tail = np.mean(result.learning_curve[-10:]) if result.learning_curve else float("nan")
    print(f"trained {args.method}/{args.variant} for {args.episodes} episodes; "
          f"late-training revenue {tail:.1f}")
    return 0


def _load_policy(args, config: EnvConfig):
    if args.method == "mpc":
        model = ChoiceModel.load(args.params)
        return MpcPolicy(model, config, rollouts=args.mpc_rollouts, horizon=args.mpc_horizon)
    if args.policy is None:
        raise ValueError("--policy is required unless --method mpc")
    if args.variant == "tabular":
        return TabularPolicy(load_qtable_csv(args.policy))
    return DqnPolicy(MlpParams.load(args.policy), config.capacity)


def cmd_evaluate(args) -> int:
    out = _out_dir(args)
    spec = reference_spec(args.family)
    config = _env_config(args, args.family)
    policy = _load_policy(args, config)
    factory = lambda s: reset(config, spec, s)
    stats = evaluate_policy(factory, policy, args.episodes, args.seed)
    payload = {
        "mean_revenue": stats.mean,
        "sd": stats.sd,
        "n_episodes": args.episodes,
        "revenues": stats.revenues,
    }
    (out / "evaluation.json").write_text(json.dumps(payload, indent=2, sort_keys=True))
    _write_manifest(args, out)
    print(f"evaluated {args.episodes} episodes: mean revenue {stats.mean:.1f} (sd {stats.sd:.1f})")
    return 0


def cmd_sweep(args) -> int:
    out = _out_dir(args)
    if args.config:
        protocol = Protocol.load(args.config)
    else:
        protocol = preset_protocol(
            args.preset,
            n_seeds=args.seeds,
            variant=args.variant,
            episodes=args.episodes,
            eval_episodes=args.eval_episodes,
            base_seed=args.seed,
        )
    records = run_protocol(protocol, jobs=args.jobs)
    stats = summarize(records, protocol, with_tost=args.preset == "stationary")
    paths = emit_report(records, stats, out, protocol)
    _write_manifest(args, out, {"protocol_hash": protocol.hash(), "preset": args.preset})
    failures = [r for r in records if r.error]
    print(f"{len(records)} runs ({len(failures)} failed); summary at {paths['summary']}")
    for row in stats.rows:
        flag = "*" if row.significant else " "
        print(
            f"  {row.scenario:<22} {stats.baseline_method}={row.means.get(stats.baseline_method, float('nan')):>9.1f} "
            f"{stats.compare_method}={row.means.get(stats.compare_method, float('nan')):>9.1f} "
            f"rel={row.relative_difference:+.3%} p={row.p_raw:.3f} holm={row.p_adjusted:.3f}{flag}"
        )
    return 0


def cmd_verify(args) -> int:
    out = _out_dir(args)
    reports = []
    suites = (
        ("simulation-lemma", "maturation", "dr-moments", "lipschitz", "convergence", "extrapolation")
        if args.suite == "all"
        else (args.suite,)
    )
    rng = np.random.default_rng(args.seed)
    for suite in suites:
        if suite == "simulation-lemma":
            reports += theory.simulation_lemma_check(
                eps_r=0.1, eps_P=0.1, n_trials=args.trials, seed=args.seed
            )
        elif suite == "maturation":
            probs = np.zeros(15)
            probs[1:] = 1.0 / 14.0
            mat = theory.maturation_curve(probs, horizon=1000, n_trials=min(args.trials, 100), seed=args.seed)
            reports += mat.bound_reports
        elif suite == "dr-moments":
            for p_mat in (0.05, 0.5, 0.85):
                for ratio in (0.5, 1.0, 2.0):
                    for m in (0.0, 10.0, 50.0):
                        reports += theory.dr_moment_check(
                            p_mat, 1.0, ratio, m, model_error=0.12, seed=args.seed
                        )
        elif suite == "lipschitz":
            reports += theory.softmax_lipschitz_check(n_pairs=10_000, seed=args.seed)
        elif suite == "convergence":
            mdp = theory.random_mdp(5, 3, 0.5, np.random.default_rng(derive_seed(args.seed, "mdp")))
            trace = theory.convergence_trace(mdp, c=0.05, beta=0.0, n_steps=200_000, seed=args.seed)
            reports.append(
                theory.BoundReport(
                    name="fixed-model-floor",
                    measured=trace.floor,
                    bound=trace.floor_bound,
                    instance="c=0.05 beta=0",
                )
            )
        elif suite == "extrapolation":
            theta = rng.uniform(-0.5, 0.5, size=(3, 4))
            train = rng.uniform(0, 1, size=(200, 4))
            test = rng.uniform(-0.5, 1.5, size=(100, 4))
            revenues = np.array([0.0, 10.0, -450.0, 0.0])
            w = rng.uniform(-1, 1, size=4)
            true_reward = lambda phi: float(w @ phi)
            reports += theory.extrapolation_bound_check(
                theta, train, test, revenues, true_reward, lipschitz_true=float(np.linalg.norm(w))
            )
        else:
            raise ValueError(f"unknown suite {args.suite!r}")
    theory.write_bound_reports(out / "bound_reports.jsonl", reports)
    print(theory.format_bound_reports(reports))
    _write_manifest(args, out, {"suites": list(suites)})
    return 0 if all(r.passed for r in reports) else 2


def cmd_report(args) -> int:
    out = _out_dir(args)
    records = read_runs_csv(args.runs)
    protocol = Protocol.load(args.config) if args.config else None
    if protocol is None:
        scenarios = sorted({r.scenario for r in records})
        methods = []
        for r in records:
            if r.method not in methods:
                methods.append(r.method)
        from .bench import Scenario, WorldParams

        protocol = Protocol(
            name="from-runs",
            scenarios=tuple(Scenario(s, WorldParams(), WorldParams()) for s in scenarios),
            methods=tuple(methods),
            n_seeds=max(2, len({r.seed for r in records})),
        )
    stats = summarize(records, protocol)
    paths = emit_report(records, stats, out, protocol)
    _write_manifest(args, out)
    print(f"summary rewritten at {paths['summary']}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="delayq", description=__doc__)
    parser.add_argument("--version", action="version", version=f"delayq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_default=0):
        p.add_argument("--seed", type=int, default=seed_default, help="base random seed")
        p.add_argument("--out", type=str, default=None,
                       help="output directory (env DELAYQ_OUT overrides the default 'out')")
        p.add_argument("--config", type=str, default=None, help="config file path")

    p = sub.add_parser("gen-data", help="synthesize a calibration dataset")
    common(p)
    p.add_argument("--family", choices=FAMILIES, default="mnl")
    p.add_argument("--obs", type=int, default=20_000, help="number of customer observations")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("calibrate", help="fit the choice model by maximum likelihood")
    common(p)
    p.add_argument("--data", required=True, help="calibration CSV path")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("audit", help="identifiability report for a calibration dataset")
    common(p)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("train", help="train one agent")
    common(p)
    p.add_argument("--method", choices=("mb", "ca", "ca-dr", "mpc"), default="mb")
    p.add_argument("--variant", choices=("tabular", "dqn"), default="tabular")
    p.add_argument("--family", choices=FAMILIES, default="mnl")
    p.add_argument("--episodes", type=int, default=82)
    p.add_argument("--params", type=str, default=None, help="fitted parameter file (required for ca/ca-dr/mpc)")
    p.add_argument("--synthetic-next-state", action="store_true",
                   help="ca mode: sample the next state from the model too")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="greedy evaluation of a trained policy")
    common(p)
    p.add_argument("--method", choices=("mb", "ca", "ca-dr", "mpc"), default="mb")
    p.add_argument("--variant", choices=("tabular", "dqn"), default="tabular")
    p.add_argument("--family", choices=FAMILIES, default="mnl")
    p.add_argument("--policy", type=str, default=None, help="policy file from train")
    p.add_argument("--params", type=str, default=None)
    p.add_argument("--episodes", type=int, default=50)
    p.add_argument("--mpc-rollouts", type=int, default=30)
    p.add_argument("--mpc-horizon", type=int, default=24)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="run a benchmark protocol")
    common(p, seed_default=42)
    p.add_argument("--preset", choices=("stationary", "shift", "misspec", "oof"), default="stationary")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--variant", choices=("tabular", "dqn"), default="tabular")
    p.add_argument("--episodes", type=int, default=82)
    p.add_argument("--eval-episodes", type=int, default=50)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the theory verification suites")
    common(p)
    p.add_argument(
        "--suite",
        choices=("simulation-lemma", "maturation", "dr-moments", "lipschitz", "convergence", "extrapolation", "all"),
        default="all",
    )
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="rebuild summary files from runs.csv")
    common(p)
    p.add_argument("--runs", required=True, help="path to runs.csv")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
