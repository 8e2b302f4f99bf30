"""Command-line entry point: ``drcore <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from .ambiguity import AmbiguityConfig, TailParams, beta_from_radius, summarize_confidence
from .core import build_dr_core, build_expected_core, check_allocation, check_containment, find_allocation
from .distributions import EmpiricalDistribution, SamplingMode, SamplingPlan, TruncatedGaussianSpec, build_multisamples
from .errors import DRCoreError, EmptyCoreError
from .experiments import (
    REFERENCE_DISTRIBUTION,
    ExperimentConfig,
    run_consistency_study,
    run_radius_sweep,
    run_sample_size_sweep,
)
from .game_model import GameSpec, NormTag, coalition_label, reference_game
from .worst_case import Engine

EXIT_OK, EXIT_INPUT, EXIT_EMPTY = 0, 1, 2

ENGINES = {"dual": Engine.DUAL_LP, "closed": Engine.CLOSED_FORM, "oracle": Engine.ORACLE, "auto": Engine.AUTO}
NORMS = {"one": NormTag.ONE, "max": NormTag.MAX, "euclidean": NormTag.EUCLIDEAN}


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--game", type=Path, help="game JSON (default: the three-agent reference game)")
    p.add_argument("--grand-value", type=float, help="override the grand-coalition value u_N")
    p.add_argument("--seed", type=int, default=0, help="master seed (unsigned 64-bit)")
    p.add_argument("--plan", choices=["per-coalition", "per-agent", "shared"], default="shared")
    p.add_argument("--engine", choices=list(ENGINES), default="auto")
    p.add_argument("--norm", choices=list(NORMS), default="one", help="ground norm of the transport cost")
    p.add_argument("--c", type=float, default=1.0, help="concentration constant c (illustrative default)")
    p.add_argument("--q", type=float, default=1.0, help="concentration constant q (illustrative default)")
    p.add_argument("--a", type=float, default=2.0, help="light-tail exponent a > 1")
    p.add_argument("--allow-p2-exponent", type=float, metavar="E",
                   help="exponent to use when p = 2 (not covered by the concentration bound)")
    p.add_argument("--mu", type=float, default=REFERENCE_DISTRIBUTION.mean)
    p.add_argument("--var", type=float, default=REFERENCE_DISTRIBUTION.variance)
    p.add_argument("--lo", type=float, default=REFERENCE_DISTRIBUTION.lo)
    p.add_argument("--hi", type=float, default=REFERENCE_DISTRIBUTION.hi)


def _radius_flags(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--eps", type=float, help="Wasserstein radius for every coalition")
    g.add_argument("--beta", type=float, help="confidence parameter for every coalition")


def _game(args) -> GameSpec:
    game = GameSpec.load(args.game) if args.game else reference_game()
    if args.grand_value is not None:
        game = game.with_grand_value(args.grand_value)
    return game


def _tail(args, p: int) -> TailParams:
    return TailParams(a=args.a, c=args.c, q=args.q, p=p, p2_exponent=args.allow_p2_exponent)


def _distribution(args) -> TruncatedGaussianSpec:
    return TruncatedGaussianSpec(args.mu, args.var, args.lo, args.hi)


def _plan_mode(args) -> SamplingMode:
    return SamplingMode(args.plan.replace("-", "_"))


def _samples(args, game: GameSpec):
    if getattr(args, "samples", None):
        emp = EmpiricalDistribution.load_csv(args.samples, game.support)
        return {S: emp for S in game.coalitions}, SamplingMode.SHARED
    mode = _plan_mode(args)
    plan = SamplingPlan(mode, args.K, args.seed)
    return build_multisamples(plan, _distribution(args), game), mode


def _ambiguity(args, game: GameSpec) -> AmbiguityConfig:
    tail = _tail(args, game.dim)
    norm = NORMS[args.norm]
    if args.eps is not None:
        return AmbiguityConfig.uniform_radius(args.eps, tail=tail, norm=norm)
    return AmbiguityConfig.uniform_beta(args.beta, tail=tail, norm=norm)


def _confidence(game, samples, amb, mode) -> dict:
    betas = {S: amb.beta_for(S, samples[S].size) for S in game.coalitions}
    summary = summarize_confidence(betas, bonferroni=mode is SamplingMode.PER_AGENT)
    return {
        "aggregate_confidence": summary.value,
        "vacuous_flag": summary.vacuous,
        "aggregation": "bonferroni" if mode is SamplingMode.PER_AGENT else "product",
        "betas": {coalition_label(S): b for S, b in betas.items()},
    }


def cmd_allocate(args) -> int:
    game = _game(args)
    samples, mode = _samples(args, game)
    amb = _ambiguity(args, game)
    core = build_dr_core(game, samples, amb, ENGINES[args.engine], workers=args.workers)
    out = {
        "radii": {coalition_label(S): amb.radius_for(S, samples[S].size) for S in game.coalitions},
        "thresholds": {coalition_label(S): t for S, t in core.thresholds.items()},
        "u_N": game.grand_value,
        **_confidence(game, samples, amb, mode),
        "constants": asdict(amb.tail),
    }
    try:
        x = find_allocation(core)
    except EmptyCoreError as exc:
        out["allocation"] = None
        out["error"] = "empty DR core"
        print(json.dumps(out, indent=2))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    out["allocation"] = x.x.tolist()
    out["stable"] = check_allocation(core, x).stable
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_check(args) -> int:
    game = _game(args)
    samples, mode = _samples(args, game)
    amb = _ambiguity(args, game)
    dr = build_dr_core(game, samples, amb, ENGINES[args.engine], workers=args.workers)
    expected = build_expected_core(game, _distribution(args))
    rep = check_containment(dr, expected)
    out = {
        "contained": rep.contained,
        "vacuous": rep.vacuous,
        "max_violation": rep.max_violation,
        "dominance": {coalition_label(S): d for S, d in rep.dominance.items()},
        "W": {coalition_label(S): t for S, t in dr.thresholds.items()},
        "E": {coalition_label(S): t for S, t in expected.thresholds.items()},
        **_confidence(game, samples, amb, mode),
        "constants": asdict(amb.tail),
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _sweep_config(args, axis: str, values) -> ExperimentConfig:
    game = _game(args)
    return ExperimentConfig(
        axis=axis,
        axis_values=tuple(values),
        game=game,
        distribution=_distribution(args),
        trials=args.trials,
        sample_size=getattr(args, "K", 100),
        radius=getattr(args, "eps", 0.3) or 0.3,
        plan=_plan_mode(args),
        tail=_tail(args, game.dim),
        master_seed=args.seed,
        engine=ENGINES[args.engine],
        workers=args.workers,
    )


def _report_sweep(res, out_dir) -> None:
    paths = res.write(out_dir)
    t = res.config.tail
    print(f"constants: c={t.c} q={t.q} a={t.a} p={t.p}")
    for a, conf in res.confidence().items():
        print(f"axis={a:g} empirical_confidence={conf:.4f}")
    print("wrote " + ", ".join(str(p) for p in paths.values()))


def cmd_sweep_k(args) -> int:
    res = run_sample_size_sweep(_sweep_config(args, "sample_size", _ints(args.ks)))
    _report_sweep(res, args.out)
    return EXIT_OK


def cmd_sweep_eps(args) -> int:
    res = run_radius_sweep(_sweep_config(args, "radius", _floats(args.eps_grid)))
    _report_sweep(res, args.out)
    return EXIT_OK


def cmd_consistency(args) -> int:
    game = _game(args)
    tail = _tail(args, game.dim)
    res = run_consistency_study(
        _ints(args.ks),
        game=game,
        distribution=_distribution(args),
        tail=tail,
        trials=args.trials,
        master_seed=args.seed,
        fixed_radius=args.eps,
        plan=_plan_mode(args),
        engine=ENGINES[args.engine],
    )
    text = res.csv()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "consistency.csv").write_text(text)
    print(f"constants: c={tail.c} q={tail.q} a={tail.a} p={tail.p}")
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drcore", description="Distributionally robust cores of stochastic coalitional games")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("allocate", help="DR core thresholds and a minimum-norm allocation")
    _add_common(p)
    p.add_argument("--samples", type=Path, help="CSV of samples (header x1..xp) shared by all coalitions")
    p.add_argument("--K", type=int, default=100, help="samples per coalition (or per agent) when sampling")
    p.add_argument("--workers", type=int, default=1)
    _radius_flags(p)
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("check", help="containment of the DR core in the expected-value core")
    _add_common(p)
    p.add_argument("--samples", type=Path)
    p.add_argument("--K", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)
    _radius_flags(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("sweep-k", help="empirical confidence across sample sizes at a fixed radius")
    _add_common(p)
    p.add_argument("--eps", type=float, default=0.3)
    p.add_argument("--ks", default="5,10,30,50,100,200,500")
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("results/sweep-k"))
    p.set_defaults(func=cmd_sweep_k)

    p = sub.add_parser("sweep-eps", help="empirical confidence across radii at a fixed sample size")
    _add_common(p)
    p.add_argument("--K", type=int, default=100)
    p.add_argument("--eps-grid", default="0.01,0.03,0.1,0.3,1.0")
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("results/sweep-eps"))
    p.set_defaults(func=cmd_sweep_eps)

    p = sub.add_parser("consistency", help="gap to the expected core as K grows")
    _add_common(p)
    p.add_argument("--ks", default="10,30,100,300,1000,3000,10000")
    p.add_argument("--eps", type=float, help="hold the radius fixed instead of following the beta schedule")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--out", type=Path, default=Path("results/consistency"))
    p.set_defaults(func=cmd_consistency)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EmptyCoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (DRCoreError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
