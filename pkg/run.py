# run.py
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

import config as settings
from analyze.sizes import (
    ARCHITECTURE_PRESETS,
    REFERENCE_ROWS,
    deviation,
    estimate,
    group_sizes,
    render_table,
    segment_rows,
    to_frame,
)
from blueprints.compose import NetworkSpec, compose_bnn, compose_bnn_with_ledger
from bnn.metrics import write_metrics_csv, write_metrics_json
from bnn.refbnn import Mode, loss_rate_series, misclassification_series
from db.results_db import ResultsDB
from engine.lockstep import lockstep
from engine.simulator import SchedulePolicy, Simulator, StopCondition, Terminal
from net.formats import FORMATS, FormatError, load, save
from net.model import NetError
from verify.checks import Verdict, summarize
from verify.suites import component_suite, segment_suite, system_suite

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INCONCLUSIVE = 2
EXIT_INPUT = 3

logger = logging.getLogger("petribnn")


def write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, default=str))
    return path


def use_budget(cfg: settings.Config, spec: NetworkSpec) -> bool:
    if cfg.run.budget and spec.epoch_budget is None:
        raise settings.ConfigError("run.budget is set but the spec has no epoch_budget (use --no-budget)")
    return cfg.run.budget


def cmd_generate(cfg: settings.Config, out: Path, fmt: Optional[str]) -> Tuple[int, Dict[str, Any]]:
    spec = cfg.network_spec()
    net = compose_bnn(spec, instrument=cfg.run.instrument, budget=use_budget(cfg, spec))
    written = [save(net, out / "bnn.net", "native")]
    if fmt and fmt != "native":
        written.append(save(net, out / f"bnn{FORMATS[fmt][2]}", fmt))
    places, transitions, arcs = net.size()
    print(f"places={places} transitions={transitions} arcs={arcs} total={places + transitions + arcs}")
    return EXIT_OK, {"files": [str(p) for p in written], "places": places, "transitions": transitions,
                     "arcs": arcs}


def cmd_simulate(cfg: settings.Config, out: Path) -> Tuple[int, Dict[str, Any]]:
    spec = cfg.network_spec()
    budgeted = use_budget(cfg, spec)
    net = compose_bnn(spec, instrument=True, budget=budgeted)
    max_cycles = None if budgeted else cfg.run.epochs * len(spec.dataset)
    seed = cfg.run.seeds[0] if cfg.run.seeds else 0
    run = Simulator(net).run(SchedulePolicy(cfg.run.policy, seed), StopCondition(cfg.run.max_steps, max_cycles))
    summary = {"terminal": run.terminal.value, "firings": run.firings, "cycles": run.cycles, "seed": seed}
    if run.terminal is Terminal.SAFETY_VIOLATION:
        witness = write_json(out / "witness.json", {
            "transitions": list(run.trace.transitions) if run.trace else [],
            "violation": str(run.violation),
        })
        logger.error(f"Safety violation: {run.violation} (witness in {witness})")
        return EXIT_FAILED, summary
    write_metrics_csv(run.metrics, out / "metrics.csv")
    write_metrics_json(run.metrics, out / "metrics.json")
    curve = pd.DataFrame({
        "cycle": range(1, len(run.metrics) + 1),
        "loss_rate": loss_rate_series(run.metrics),
        "misclassification": misclassification_series(run.metrics),
    })
    curve.to_csv(out / "loss_rate.csv", index=False)
    print(f"{run.terminal.value}: {run.cycles} cycles, {run.firings} firings")
    return EXIT_OK, summary


def cmd_verify(cfg: settings.Config, out: Path, tier: str) -> Tuple[int, Dict[str, Any]]:
    spec = cfg.network_spec()
    if tier == "segment":
        reports = segment_suite(spec, cfg.run.state_budget)
    elif tier == "component":
        reports = component_suite(spec, cfg.run.state_budget)
    else:
        reports = system_suite(spec, cfg.run.seeds, cfg.run.epochs, cfg.run.max_steps)
    counts = summarize(reports)
    write_json(out / f"verify_{tier}.json", [r.to_dict() for r in reports])
    for report in reports:
        if not report.as_expected:
            level = logging.WARNING if report.verdict is Verdict.INCONCLUSIVE else logging.ERROR
            logger.log(level, f"{report.subject} {report.name}: {report.verdict.value} ({report.detail})")
    print(f"{tier}: {counts['as_expected']} as expected, {counts['failed']} failed, "
          f"{counts['inconclusive']} inconclusive")
    if counts["failed"]:
        return EXIT_FAILED, counts
    return (EXIT_INCONCLUSIVE if counts["inconclusive"] else EXIT_OK), counts


def cmd_compare(cfg: settings.Config, out: Path, mode: Mode) -> Tuple[int, Dict[str, Any]]:
    spec = cfg.network_spec()
    report = lockstep(spec, cfg.run.epochs, cfg.run.seeds, mode, max_steps=cfg.run.max_steps)
    rows = [{"seed": r.seed, "cycle": d.cycle, "field": d.field, "pn": d.pn_value, "ref": d.ref_value}
            for r in report.results for d in r.diffs]
    pd.DataFrame(rows, columns=["seed", "cycle", "field", "pn", "ref"]).to_csv(out / "lockstep.csv", index=False)
    summary = report.summary()
    write_json(out / "lockstep.json", summary)
    print(f"{summary['mismatching_cycles']} mismatching cycles over seeds {summary['seeds']}")
    if mode is Mode.PN_EXACT and not report.ok:
        return EXIT_FAILED, summary
    return EXIT_OK, summary


def cmd_analyze(cfg: settings.Config, out: Path) -> Tuple[int, Dict[str, Any]]:
    spec = cfg.network_spec()
    rows = segment_rows(spec)
    print(render_table(rows))
    full = rows[-1]
    for field, value in deviation(full).items():
        print(f"  {field}: {value:+.1%} against the reference model")
    _, ledger = compose_bnn_with_ledger(spec, instrument=True)
    groups = group_sizes(ledger)
    estimates = [estimate(arch) for arch in ARCHITECTURE_PRESETS]
    print(render_table(estimates, billions=True))
    out.mkdir(parents=True, exist_ok=True)
    to_frame(rows).to_csv(out / "sizes.csv", index=False)
    to_frame(groups).to_csv(out / "groups.csv", index=False)
    to_frame(estimates, billions=True).to_csv(out / "estimates.csv", index=False)
    return EXIT_OK, {"full_model": full.to_dict(), "reference": REFERENCE_ROWS[full.name].to_dict()}


def cmd_export(path: str, out: Path, fmt: str) -> Tuple[int, Dict[str, Any]]:
    net = load(path)
    target = save(net, out / (Path(path).stem + FORMATS[fmt][2]), fmt)
    print(f"wrote {target}")
    return EXIT_OK, {"file": str(target)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Petri-net BNN toolkit")
    parser.add_argument("command", choices=["generate", "simulate", "verify", "compare", "analyze", "export"])
    parser.add_argument("path", nargs="?", help="config file (export: net file)")
    parser.add_argument("--seed", type=int, help="single schedule seed")
    parser.add_argument("--seeds", help="comma separated schedule seeds")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--tier", choices=["segment", "component", "system"], default="segment")
    parser.add_argument("--format", choices=["native", "pnml", "dot", "csv", "json"])
    parser.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.PN_EXACT.value)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--db", nargs="?", const="", help="record the invocation in the results store")
    parser.add_argument("--no-instrument", action="store_true")
    parser.add_argument("--no-budget", action="store_true")
    return parser


def apply_overrides(cfg: settings.Config, args: argparse.Namespace) -> settings.Config:
    run = cfg.run.model_copy()
    if args.seed is not None:
        run.seeds = [args.seed]
    if args.seeds:
        try:
            run.seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError:
            raise settings.ConfigError(f"--seeds must be a comma separated list of integers, got {args.seeds!r}")
    if args.epochs is not None:
        if args.epochs < 1:
            raise settings.ConfigError("--epochs must be at least 1")
        run.epochs = args.epochs
    if args.out:
        run.out = args.out
    if args.no_instrument:
        run.instrument = False
    if args.no_budget:
        run.budget = False
    return cfg.model_copy(update={"run": run})


def dispatch(args: argparse.Namespace) -> Tuple[int, Dict[str, Any], Optional[settings.Config]]:
    if args.command == "export":
        if not args.path:
            raise settings.ConfigError("export needs a net file")
        fmt = args.format or "pnml"
        if fmt not in FORMATS:
            raise settings.ConfigError(f"cannot export to {fmt}")
        code, summary = cmd_export(args.path, Path(args.out or settings.out_dir()), fmt)
        return code, summary, None
    cfg = apply_overrides(settings.load_config(args.path), args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "generate":
        if args.format in ("csv", "json"):
            raise settings.ConfigError(f"generate writes nets, not {args.format}")
        result = cmd_generate(cfg, out, args.format)
    elif args.command == "simulate":
        result = cmd_simulate(cfg, out)
    elif args.command == "verify":
        result = cmd_verify(cfg, out, args.tier)
    elif args.command == "compare":
        result = cmd_compare(cfg, out, Mode(args.mode))
    else:
        result = cmd_analyze(cfg, out)
    return result[0], result[1], cfg


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=settings.log_level(), format="%(asctime)s %(name)s %(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    cfg = None
    try:
        code, summary, cfg = dispatch(args)
    except (settings.ConfigError, FormatError, NetError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        code, summary = EXIT_INPUT, {"error": str(e)}
    if args.db is not None:
        db = ResultsDB(args.db or (cfg.run.db if cfg and cfg.run.db else None))
        db.store_run(args.command, cfg.model_dump(mode="json") if cfg else {"path": args.path}, code, summary)
    return code


if __name__ == "__main__":
    sys.exit(main())
