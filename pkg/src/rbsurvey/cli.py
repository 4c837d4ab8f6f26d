"""Command-line interface: ``rbsurvey {prob,estimate,simulate,data}``.

Exit codes: 0 success, 1 usage error, 2 validation or data failure,
3 reference-check breach. The CLI does no arithmetic of its own; every number
it prints comes straight from a library call.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import StudyConfig, StudyKind, load_config, parse_config
from .designs import (
    DesignSpec,
    OrderedSample,
    ReducedSample,
    brute_force_reduced_prob,
    ordered_sample_prob,
    reduce,
    reduced_sample_prob,
)
from .errors import RBSurveyError
from .estimators import evaluate_point
from .population import FIXTURES, DrawProbabilities, fixture_path, load_fixture, load_population
from .raoblackwell import ConditioningLevel, rb_var_estimate
from .simharness import (
    build_mixture,
    check_table1,
    check_table2,
    load_study_population,
    run_study,
)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_CHECK = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


# -- output -----------------------------------------------------------------------


def _emit(payload: dict, fmt: str, output: str | None, table_text: str | None = None) -> None:
    if fmt == "json":
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in _flatten(payload):
            w.writerow([k, v])
        text = buf.getvalue()
    else:
        text = table_text if table_text is not None else "".join(f"{k:<32} {v}\n" for k, v in _flatten(payload))
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _flatten(d, prefix=""):
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        elif isinstance(v, list):
            yield key, ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        else:
            yield key, repr(v) if isinstance(v, float) else v


# -- prob ---------------------------------------------------------------------------


def _design_from_args(args) -> DesignSpec:
    if args.design == "srswr":
        if args.N is None:
            raise UsageError("--design srswr needs --N")
        return DesignSpec.srswr(args.N, args.n)
    if args.p is None:
        raise UsageError("--design ppswr needs --p")
    if args.N is not None and args.N != len(args.p):
        raise UsageError(f"--N {args.N} disagrees with {len(args.p)} draw probabilities")
    return DesignSpec.ppswr(DrawProbabilities(np.array(args.p)), args.n)


def cmd_prob(args) -> int:
    design = _design_from_args(args)
    payload = {"design": design.describe()}
    if args.sequence is not None:
        sample = OrderedSample(args.sequence, np.zeros(len(args.sequence)))
        payload["sequence"] = [int(v) for v in sample.draws]
        payload["probability"] = ordered_sample_prob(design, sample)
    else:
        units = np.unique(args.set)
        reduced = ReducedSample(units, np.zeros(units.size))
        payload["set"] = [int(v) for v in reduced.units]
        payload["nu"] = reduced.nu
        prob = reduced_sample_prob(design, reduced)
        payload["probability"] = prob
        if args.oracle:
            oracle = brute_force_reduced_prob(design, reduced)
            payload["oracle"] = oracle
            payload["abs_diff"] = abs(prob - oracle)
    _emit(payload, args.format, args.output)
    return EXIT_OK


# -- estimate -----------------------------------------------------------------------


def _population_from_args(args):
    if args.dataset in FIXTURES and not args.size_column:
        return load_fixture(args.dataset)
    path = Path(args.dataset)
    if not path.is_file():
        raise UsageError(f"--dataset {args.dataset!r} is neither a fixture nor a file")
    schema = {"responses": {args.response: args.response}, "size": args.size_column}
    return load_population(path, schema)


def _estimate_mixture(args, pop, n_draws):
    if args.config:
        cfg = load_config(args.config)
        if cfg.study is StudyKind.RETROSPECTIVE:
            raise UsageError("estimate needs a mixture config")
        return build_mixture(cfg, pop, n_draws)
    if not (args.designs and args.estimators):
        raise UsageError("give --config, or --designs and --estimators")
    k = len(args.designs)
    priors = args.priors or [1.0 / k] * k
    data = {
        "study": "generic",
        "dataset": args.dataset,
        "response": args.response,
        "strategy_designs": args.designs,
        "strategy_estimators": args.estimators,
        "strategy_priors": priors,
        "n_draws": n_draws,
    }
    if args.names:
        data["strategy_names"] = args.names
    return build_mixture(parse_config(data), pop, n_draws)


def cmd_estimate(args) -> int:
    pop = _population_from_args(args)
    if args.sequence is not None:
        level = ConditioningLevel(args.level or "ordered_sample")
        sample = OrderedSample.from_population(args.sequence, pop, args.response)
        n_draws = sample.n
        shown = {"sequence": [int(v) for v in sample.draws]}
    else:
        if args.level == "ordered_sample":
            raise UsageError("--set input cannot be conditioned at the ordered-sample level")
        level = ConditioningLevel.REDUCED_SET
        # repeats in --set are accepted and collapsed
        sample = reduce(OrderedSample.from_population(args.set, pop, args.response))
        n_draws = args.n or len(args.set)
        shown = {"set": [int(v) for v in sample.units], "n_draws": n_draws}
    mixture = _estimate_mixture(args, pop, n_draws)
    res = rb_var_estimate(mixture, sample, level)
    strategies = {}
    for s, w, pt in zip(mixture, res.weights, res.per_strategy_points):
        entry = {"prior": float(s.prior), "weight": float(w), "estimate": float(pt)}
        if level is ConditioningLevel.ORDERED_SAMPLE:
            entry["raw_estimate"] = evaluate_point(s.estimator, sample)
        strategies[s.label] = entry
    payload = {
        "level": level.value,
        **shown,
        "strategies": strategies,
        "rb_point": res.point,
        "rb_var_hat": res.var_hat,
        "fallback_used": res.var_hat_fallback_used,
        "term_a": res.term_a,
        "term_b": res.term_b,
    }
    _emit(payload, args.format, args.output)
    return EXIT_OK


# -- simulate ------------------------------------------------------------------------


def _simulate_config(args) -> StudyConfig:
    cfg = load_config(args.config)
    if args.study and StudyKind(args.study) is not cfg.study:
        raise UsageError(f"--study {args.study} disagrees with the config's study {cfg.study.value!r}")
    return cfg.with_overrides(
        replicates=args.replicates,
        master_seed=args.seed,
        workers=args.workers,
        block_size=args.block_size,
        scatter_sample=args.scatter_sample,
        dataset=args.dataset,
    )


def cmd_simulate(args) -> int:
    cfg = _simulate_config(args)
    pop = load_study_population(cfg)
    report = run_study(cfg, pop)
    stem = Path(args.config).stem
    paths = report.write(args.out, stem)
    if args.format == "csv":
        text = report.scatter_csv()
    elif args.format == "json":
        text = report.to_json() + "\n"
    else:
        text = report.to_table()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    for kind, p in paths.items():
        print(f"wrote {kind}: {p}", file=sys.stderr)
    if args.check:
        checks = check_table1(report) if args.check == "table1" else check_table2(report)
        for c in checks:
            print(c.line(), file=sys.stderr)
        if not all(c.passed for c in checks):
            return EXIT_CHECK
    return EXIT_OK


# -- data ------------------------------------------------------------------------------


def cmd_data(args) -> int:
    if args.action == "list":
        payload = {}
        for name, spec in FIXTURES.items():
            try:
                where = str(fixture_path(name))
            except RBSurveyError as exc:
                where = f"unavailable ({exc})"
            payload[name] = {"N": spec["N"], "file": where}
        _emit(payload, args.format, args.output)
        return EXIT_OK
    names = args.names or sorted(FIXTURES)
    status = EXIT_OK
    payload = {}
    for name in names:
        if name not in FIXTURES:
            raise UsageError(f"unknown fixture {name!r}")
        try:
            pop = load_fixture(name)
            payload[name] = {"status": "ok", "N": pop.N}
        except RBSurveyError as exc:
            payload[name] = {"status": "invalid", "error": str(exc)}
            status = EXIT_INVALID
    _emit(payload, args.format, args.output)
    return status


# -- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("json", "table", "csv"), default="table")
    common.add_argument("--output", help="write the report here instead of stdout")

    parser = _Parser(prog="rbsurvey", description="Rao-Blackwellized estimation over sampling strategies.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prob", parents=[common], help="probability of an ordered sample or a distinct-unit set")
    p.add_argument("--design", choices=("srswr", "ppswr"), required=True)
    p.add_argument("--N", type=int)
    p.add_argument("--n", type=int, required=True, help="number of draws")
    p.add_argument("--p", type=_float_list, help="PPSWR draw probabilities, comma-separated")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--set", type=_int_list, help="distinct units (repeats collapse)")
    g.add_argument("--sequence", type=_int_list, help="ordered draws")
    p.add_argument("--oracle", action="store_true", help="add the brute-force value (set input only)")
    p.set_defaults(func=cmd_prob)

    e = sub.add_parser("estimate", parents=[common], help="RB estimate for one observed sample")
    e.add_argument("--dataset", required=True, help="fixture name or CSV path")
    e.add_argument("--response", required=True)
    e.add_argument("--size-column", help="size-measure column for CSV datasets")
    e.add_argument("--config", help="TOML file with the strategy mixture")
    e.add_argument("--designs", type=_str_list)
    e.add_argument("--estimators", type=_str_list)
    e.add_argument("--priors", type=_float_list)
    e.add_argument("--names", type=_str_list)
    g = e.add_mutually_exclusive_group(required=True)
    g.add_argument("--sequence", type=_int_list)
    g.add_argument("--set", type=_int_list)
    e.add_argument("--n", type=int, help="draw count for --set input (default: number of listed labels)")
    e.add_argument("--level", choices=[lv.value for lv in ConditioningLevel])
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("simulate", parents=[common], help="run a Monte Carlo study from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--study", choices=[k.value for k in StudyKind])
    s.add_argument("--replicates", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--block-size", type=int)
    s.add_argument("--scatter-sample", type=int)
    s.add_argument("--dataset")
    s.add_argument("--out", default="results", help="directory for report files")
    s.add_argument("--check", choices=("table1", "table2"))
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("data", parents=[common], help="list or validate bundled fixtures")
    d.add_argument("action", choices=("list", "validate"))
    d.add_argument("names", nargs="*")
    d.set_defaults(func=cmd_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "oracle", False) and getattr(args, "sequence", None) is not None:
            raise UsageError("--oracle applies to --set input only")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RBSurveyError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    main_entry()
