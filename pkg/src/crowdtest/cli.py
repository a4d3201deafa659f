"""Command-line surface.

Subcommands: ``infer``, ``synth``, ``eval <experiment>``, ``static-set``,
``serve``.  Every run logs its fully resolved configuration to stderr (no
timestamps, so runs stay byte-reproducible), and every output is
deterministic given the seed.  Exit codes: 0 success, 1 validation error,
2 runtime failure.

Default priors can be overridden by environment variables:
``CROWDTEST_ABILITY_PRIOR=mean,variance``,
``CROWDTEST_DIFFICULTY_PRIOR=mean,variance``,
``CROWDTEST_PRECISION_PRIOR=shape,scale``.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from . import harness, io as cio, synth
from .baselines import static_question_set
from .data import Discrimination, ModelVariant, PriorSpec, default_priors
from .ep import EpConfig, infer
from .graph import GraphValidationError, build_graph
from .prob import GammaDist, Gaussian1D

__all__ = ["main", "build_parser"]

_ENV_PRIORS = {
    "ability": "CROWDTEST_ABILITY_PRIOR",
    "difficulty": "CROWDTEST_DIFFICULTY_PRIOR",
    "precision": "CROWDTEST_PRECISION_PRIOR",
}


def _log(message: str):
    print(f"crowdtest: {message}", file=sys.stderr)


def _parse_pair(text: str, what: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"{what} must be two comma-separated numbers, got {text!r}")
    return float(parts[0]), float(parts[1])


def _parse_discrimination(text: str) -> Discrimination:
    if text == "learned":
        return Discrimination.learned()
    if text.startswith("fixed:"):
        return Discrimination.fixed(float(text.split(":", 1)[1]))
    raise ValueError(f"--discrimination must be 'learned' or 'fixed:<tau>', got {text!r}")


def _resolve_priors(args) -> PriorSpec:
    base = default_priors()
    ability, difficulty, precision = (
        base.ability_prior,
        base.difficulty_prior,
        base.precision_prior,
    )
    if args.priors:
        doc = json.loads(Path(args.priors).read_text(encoding="utf-8"))
        if "ability" in doc:
            ability = Gaussian1D(*doc["ability"])
        if "difficulty" in doc:
            difficulty = Gaussian1D(*doc["difficulty"])
        if "precision" in doc:
            precision = GammaDist(*doc["precision"])
    for name, env in _ENV_PRIORS.items():
        raw = os.environ.get(env)
        if not raw:
            continue
        a, b = _parse_pair(raw, env)
        if name == "ability":
            ability = Gaussian1D(a, b)
        elif name == "difficulty":
            difficulty = Gaussian1D(a, b)
        else:
            precision = GammaDist(a, b)
    if getattr(args, "ability_prior", None):
        ability = Gaussian1D(*_parse_pair(args.ability_prior, "--ability-prior"))
    if getattr(args, "difficulty_prior", None):
        difficulty = Gaussian1D(*_parse_pair(args.difficulty_prior, "--difficulty-prior"))
    if getattr(args, "precision_prior", None):
        precision = GammaDist(*_parse_pair(args.precision_prior, "--precision-prior"))
    disc = _parse_discrimination(getattr(args, "discrimination", "learned"))
    return PriorSpec(
        ability_prior=ability,
        difficulty_prior=difficulty,
        precision_prior=precision,
        discrimination=disc,
    )


def _ep_config(args) -> EpConfig:
    return EpConfig(
        max_sweeps=args.ep_max_sweeps,
        convergence_eps=args.ep_eps,
        damping=args.ep_damping,
        tau_quadrature_nodes=args.ep_tau_nodes,
    )


def _add_common(parser):
    parser.add_argument("--priors", help="JSON file with prior overrides")
    parser.add_argument("--ability-prior", metavar="MEAN,VAR")
    parser.add_argument("--difficulty-prior", metavar="MEAN,VAR")
    parser.add_argument("--precision-prior", metavar="SHAPE,SCALE")
    parser.add_argument(
        "--discrimination", default="learned", metavar="learned|fixed:<tau>",
        help="precision handling (default: learned)",
    )
    parser.add_argument("--ep-max-sweeps", type=int, default=100)
    parser.add_argument("--ep-eps", type=float, default=1e-4)
    parser.add_argument("--ep-damping", type=float, default=0.8)
    parser.add_argument("--ep-tau-nodes", type=int, default=32)


def _log_config(args, priors: PriorSpec, extra: dict):
    cfg = {
        "command": args.command,
        "priors": {
            "ability": [priors.ability_prior.mean, priors.ability_prior.variance],
            "difficulty": [priors.difficulty_prior.mean, priors.difficulty_prior.variance],
            "precision": [priors.precision_prior.shape, priors.precision_prior.scale],
            "discrimination": priors.discrimination.mode
            if priors.discrimination.is_learned
            else f"fixed:{priors.discrimination.tau}",
        },
        "ep": {
            "max_sweeps": args.ep_max_sweeps,
            "eps": args.ep_eps,
            "damping": args.ep_damping,
            "tau_nodes": args.ep_tau_nodes,
        },
    }
    cfg.update(extra)
    _log("config: " + json.dumps(cfg, sort_keys=True))


def _cmd_infer(args) -> int:
    priors = _resolve_priors(args)
    variant = ModelVariant(args.variant)
    _log_config(args, priors, {
        "responses": args.responses, "questions": args.questions,
        "gold": args.gold, "out": args.out, "variant": args.variant,
    })
    data, gold = cio.load_dataset(args.responses, args.questions, args.gold)
    report = infer(build_graph(data, gold, priors, variant), _ep_config(args))
    cio.save_posteriors(report.posteriors, args.out, include_cells=not args.no_cells)
    _log(
        f"inference: converged={report.converged} sweeps={report.sweeps_used} "
        f"residual={report.max_residual:.3g}"
    )
    if not report.converged:
        _log("warning: EP did not converge within the sweep budget")
    _log(f"wrote {args.out}")
    return 0


def _cmd_synth(args) -> int:
    priors = _resolve_priors(args)
    _log_config(args, priors, {
        "participants": args.participants, "questions": args.questions,
        "options": args.options, "density": args.density,
        "seed": args.seed, "out_dir": args.out_dir,
    })
    config = synth.SynthConfig(
        num_participants=args.participants,
        num_questions=args.questions,
        num_options=args.options,
        priors=priors,
        seed=args.seed,
        response_density=args.density,
    )
    data, gold, truth = synth.sample(config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cio.save_dataset(
        data, gold, out / "responses.csv", out / "questions.csv", out / "gold.csv"
    )
    (out / "truth.json").write_text(
        json.dumps(
            {
                "abilities": truth.abilities,
                "difficulties": truth.difficulties,
                "precisions": truth.precisions,
            },
            sort_keys=True,
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    _log(f"wrote {len(data.records)} records to {out}")
    return 0


def _int_list(text: str) -> tuple:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _cmd_eval(args) -> int:
    priors = _resolve_priors(args)
    _log_config(args, priors, {
        "experiment": args.experiment, "seed": args.seed, "reps": args.reps,
        "sizes": args.sizes, "reveals": args.reveals, "budgets": args.budgets,
        "out": args.out,
    })
    if args.responses:
        if not args.questions:
            raise ValueError("--responses requires --questions")
        data, gold = cio.load_dataset(args.responses, args.questions, args.gold)
    else:
        config = harness.default_population(priors, args.seed)
        data, gold, _truth = synth.sample(config)
        _log(
            f"synthetic population: {config.num_participants} x "
            f"{config.num_questions} x {config.num_options} (seed {config.seed})"
        )
    spec = harness.ExperimentSpec(
        experiment=args.experiment,
        data=data,
        gold=gold,
        priors=priors,
        repetitions=args.reps,
        crowd_sizes=_int_list(args.sizes),
        reveal_counts=_int_list(args.reveals),
        budgets=_int_list(args.budgets),
        gold_crowd_size=args.crowd_size,
        seed=args.seed,
        ep_config=_ep_config(args),
    )
    report = harness.run_experiment(spec)
    sys.stdout.write(report.to_tsv("summary"))
    if args.out:
        prefix = Path(args.out)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        summary_path = prefix.with_suffix(".summary.tsv")
        rows_path = prefix.with_suffix(".rows.tsv")
        summary_path.write_text(report.to_tsv("summary"), encoding="utf-8")
        rows_path.write_text(report.to_tsv("rows"), encoding="utf-8")
        _log(f"wrote {summary_path} and {rows_path}")
    return 0


def _cmd_static_set(args) -> int:
    priors = _resolve_priors(args)
    _log_config(args, priors, {
        "responses": args.responses, "questions": args.questions,
        "gold": args.gold, "budget": args.budget,
    })
    data, gold = cio.load_dataset(args.responses, args.questions, args.gold)
    for qid in static_question_set(data, gold, args.budget):
        sys.stdout.write(qid + "\n")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    priors = _resolve_priors(args)
    _log_config(args, priors, {
        "data_dir": args.data_dir, "host": args.host, "port": args.port,
        "static_dir": args.static_dir,
    })
    static = Path(args.static_dir) if args.static_dir else None
    app = create_app(
        Path(args.data_dir), priors=priors, ep_config=_ep_config(args),
        static_dir=static if static and static.is_dir() else None,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdtest",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("infer", help="infer posteriors from response files")
    p.add_argument("--responses", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--gold")
    p.add_argument("--out", required=True)
    p.add_argument(
        "--variant", default="full",
        choices=[v.value for v in ModelVariant],
    )
    p.add_argument("--no-cells", action="store_true", help="omit per-cell posteriors")
    _add_common(p)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("synth", help="sample a synthetic dataset with ground truth")
    p.add_argument("--participants", type=int, required=True)
    p.add_argument("--questions", type=int, required=True)
    p.add_argument("--options", type=int, required=True)
    p.add_argument("--density", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("eval", help="run a scripted experiment")
    p.add_argument(
        "experiment",
        choices=list(harness.EXPERIMENTS),
    )
    p.add_argument("--responses", help="use file data instead of the synthetic population")
    p.add_argument("--questions")
    p.add_argument("--gold")
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--sizes", default="1,2,4,8,16,32,64,100", metavar="N,N,...")
    p.add_argument("--reveals", default="0,5,10,20,40", metavar="N,N,...")
    p.add_argument("--budgets", default="2,5,10,20", metavar="N,N,...")
    p.add_argument("--crowd-size", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="prefix for .summary.tsv / .rows.tsv outputs")
    _add_common(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("static-set", help="solve-rate partition question set")
    p.add_argument("--responses", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--budget", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_static_set)

    p = sub.add_parser("serve", help="run the live session HTTP service")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument(
        "--static-dir", default="frontend/dist",
        help="serve this directory at / when it exists (built web UI)",
    )
    _add_common(p)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (cio.DataFormatError, GraphValidationError, ValueError) as exc:
        _log(f"error: {exc}")
        return 1
    except Exception as exc:  # runtime failure
        _log(f"runtime failure: {type(exc).__name__}: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
