"""Command-line entry points: simulate, analyze, serve, protocol."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .dynamics import SimParams
from .errors import BallBowlError, ConfigurationError
from .logio import LogFormatError
from .pipeline import analyze_logs, export_analysis, load_archive, simulate_cohort
from .task import generate_protocol

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ballbowl",
        description="Ball-in-bowl coordination workbench: simulate synthetic "
                    "cohorts, analyze trial archives, run live sessions.")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a synthetic two-group cohort")
    sim.add_argument("--config", help="session config file (INI)")
    sim.add_argument("--out", required=True, help="output archive directory")
    sim.add_argument("--subjects-per-group", type=int, default=6)
    sim.add_argument("--seed", type=int, default=0)

    ana = sub.add_parser("analyze", help="metrics, spectra and ANOVA tables")
    ana.add_argument("--in", dest="in_dir", required=True,
                     help="archive directory written by simulate/serve")
    ana.add_argument("--out", required=True, help="output table directory")
    ana.add_argument("--full-spectra", action="store_true",
                     help="also export the per-trial spectra long table")
    ana.add_argument("--cell-reduction", choices=("mean", "first"),
                     default="mean", help="repeat-to-cell reduction for ANOVA")

    srv = sub.add_parser("serve", help="live session server for the browser UI")
    srv.add_argument("--config", help="session config file (INI)")
    srv.add_argument("--port", type=int, default=8777)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--out", default="live_logs",
                     help="directory for live trial logs")
    srv.add_argument("--ui", default=None,
                     help="static directory with the built browser client "
                          "(default: bundled frontend/dist if present)")

    pro = sub.add_parser("protocol", help="print a randomized 45-trial session")
    pro.add_argument("--seed", type=int, default=0)
    return p


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    if args.subjects_per_group < 1:
        raise ConfigurationError("--subjects-per-group must be >= 1")
    logs, manifest = simulate_cohort(config, args.subjects_per_group,
                                     args.seed, out_dir=args.out)
    n_invalid = sum(1 for log in logs if not log.valid)
    print(f"simulated {len(logs)} trials "
          f"({2 * args.subjects_per_group} subjects x 45) -> {args.out}")
    if n_invalid:
        print(f"warning: {n_invalid} trials marked invalid by simulation faults")
    return EXIT_OK


def cmd_analyze(args) -> int:
    logs, manifest = load_archive(args.in_dir)
    sim = SimParams(**manifest["config"]["simulation"])
    result = analyze_logs(logs, f_res=sim.resonant_freq,
                          reduction=args.cell_reduction)
    written = export_analysis(result, args.out,
                              full_spectra_logs=logs if args.full_spectra else None)
    print(f"analyzed {len(logs)} trials from {args.in_dir}")
    for metric, tables in result.anova.items():
        note = tables.get("mixed")
        if isinstance(note, str):
            print(f"warning: {metric}: mixed ANOVA {note}")
    for path in written:
        print(f"  wrote {path}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    config = load_config(args.config)
    static = args.ui
    if static is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        static = bundled if bundled.exists() else None
    app = create_app(config, out_dir=args.out, static_dir=static)
    print(f"session for subject {config.subject!r} on "
          f"ws://{args.host}:{args.port}/ws")
    if static:
        print(f"browser UI at http://{args.host}:{args.port}/")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_protocol(args) -> int:
    protocol = generate_protocol(args.seed)
    print(f"protocol seed {args.seed}: 9 sets x 5 trials")
    print(f"{'set':>3} {'trial':>5} {'load %':>6} {'distribution':>12}")
    for trials in protocol.sets():
        for t in trials:
            print(f"{t.set_index:>3} {t.trial_index:>5} "
                  f"{t.loading_level:>6} {t.distribution:>12}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"simulate": cmd_simulate, "analyze": cmd_analyze,
                "serve": cmd_serve, "protocol": cmd_protocol}
    try:
        return handlers[args.command](args)
    except ConfigurationError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (LogFormatError, BallBowlError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
