"""Command line interface.

Subcommands: analyze (trade-off tables), simulate (typist campaigns),
shuffle-demo (legend tables), replay (log verification), serve (network
service), validate (profile documents).  Exit codes: 0 success, 1
validation or replay failure, 2 usage errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import security_model as sm
from .app_profiles import build_registry
from .layout import default_shuffle_group, digit_keys, letter_keys, load_bundled_layout
from .mapping_engine import profile_from_json, validate_profile
from .session import ReplayError, replay
from .shuffle import (FullShuffle, RegionShuffle, RowShuffle, legend_render,
                      shuffle)
from .simulation import SimulatedTypist, campaign


def _parse_strategy(text: str):
    if text == "row":
        return RowShuffle()
    if text == "full":
        return FullShuffle()
    if text.startswith("region"):
        _, _, k = text.partition(":")
        return RegionShuffle(int(k or 6))
    raise argparse.ArgumentTypeError(
        f"unknown strategy {text!r}; use full, row or region:<k>")


def _parse_group(text: str) -> frozenset[str]:
    if text == "letters":
        return frozenset(letter_keys())
    if text == "digits":
        return frozenset(digit_keys())
    if text in ("letters+digits", "default"):
        return default_shuffle_group()
    return frozenset(part for part in text.split(",") if part)


def cmd_analyze(args) -> int:
    timing = sm.TimingParams(kt_s=args.kt, dt_s=args.dt)
    alphas = [float(a) for a in args.alpha.split(",") if a.strip() != ""]
    rows = sm.tradeoff_table([args.n], range(args.k_min, args.k_max + 1), alphas, timing)
    text = sm.table_to_json(rows) if args.format == "json" else sm.table_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_simulate(args) -> int:
    config = json.loads(Path(args.config).read_text(encoding="utf-8"))
    layout = load_bundled_layout(config.get("layout", "iso105"))
    strategies = [_parse_strategy(s) if isinstance(s, str)
                  else _parse_strategy(f"region:{s['region_size']}")
                  for s in config["strategies"]]
    typist = SimulatedTypist(
        timing=sm.TimingParams(
            kt_s=config.get("KT", sm.DEFAULT_KT_S),
            dt_s=config.get("DT", sm.DEFAULT_DT_S),
            alpha=config.get("alpha", 1.0),
        ),
        mode=config.get("mode", "stochastic"),
    )
    passwords = config.get("passwords")
    if not passwords:
        from .layout import assets_dir
        passwords = json.loads(
            (assets_dir() / "data" / "passwords.json").read_text(encoding="utf-8")
        )["passwords"]
    seeds = config.get("seeds") or list(range(config.get("trials", 20)))
    group = _parse_group(config.get("group", "default"))
    report = campaign(strategies, typist, passwords, seeds, layout=layout, group=group)
    if args.out:
        Path(args.out).write_text(report.to_csv(), encoding="utf-8")
    else:
        sys.stdout.write(report.to_csv())
    if args.json:
        Path(args.json).write_text(report.to_json(), encoding="utf-8")
    for label, stats in sorted(report.summary.items()):
        print(f"# {label}: wpm {stats['wpm_mean']:.2f} (sd {stats['wpm_sd']:.2f}), "
              f"duration {stats['duration_mean']:.2f}s", file=sys.stderr)
    return 0


def cmd_shuffle_demo(args) -> int:
    layout = load_bundled_layout(args.layout)
    group = _parse_group(args.group)
    shuffled = shuffle(layout, group, args.strategy, args.seed)
    legends = legend_render(shuffled)
    print(f"# layout={args.layout} strategy={args.strategy} seed={args.seed}")
    for row, keys in sorted(layout.rows().items()):
        cells = []
        for key in sorted(keys, key=lambda k: k.col):
            glyph = legends[key.id]
            marker = "*" if key.id in group and glyph != key.default_legend else " "
            if key.id in group:
                cells.append(f"[{glyph}{marker}]")
        if cells:
            print(f"row {row}: " + " ".join(cells))
    return 0


def cmd_replay(args) -> int:
    registry = build_registry(load_bundled_layout(args.layout))
    failures = 0
    for path in args.logs:
        try:
            replay(path, registry)
            print(f"{path}: ok")
        except (ReplayError, ValueError) as exc:
            print(f"{path}: FAIL {exc}", file=sys.stderr)
            failures += 1
    return 1 if failures else 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    host, _, port = args.bind.rpartition(":")
    app = create_app(layout_name=args.layout, log_dir=args.log_dir,
                     frontend_dir=args.frontend)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def cmd_validate(args) -> int:
    failures = 0
    for path in args.profiles:
        try:
            profile = profile_from_json(Path(path).read_text(encoding="utf-8"))
        except Exception as exc:
            print(f"{path}: FAIL unparsable profile: {exc}", file=sys.stderr)
            failures += 1
            continue
        diagnostics = validate_profile(profile)
        if diagnostics:
            failures += 1
            for diag in diagnostics:
                print(f"{path}: {diag}", file=sys.stderr)
        else:
            print(f"{path}: ok")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="keyreconf")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="emit the security/time trade-off table")
    analyze.add_argument("--n", type=int, default=8)
    analyze.add_argument("--k-min", type=int, default=2)
    analyze.add_argument("--k-max", type=int, default=10)
    analyze.add_argument("--alpha", default="0,1", help="comma-separated values")
    analyze.add_argument("--kt", type=float, default=sm.DEFAULT_KT_S)
    analyze.add_argument("--dt", type=float, default=sm.DEFAULT_DT_S)
    analyze.add_argument("--out", help="write here instead of stdout")
    analyze.add_argument("--format", choices=("csv", "json"), default="csv")
    analyze.set_defaults(func=cmd_analyze)

    simulate = sub.add_parser("simulate", help="run a typist campaign from a config")
    simulate.add_argument("config")
    simulate.add_argument("--out", help="CSV report path (default stdout)")
    simulate.add_argument("--json", help="also write a JSON report here")
    simulate.set_defaults(func=cmd_simulate)

    demo = sub.add_parser("shuffle-demo", help="print shuffled legends")
    demo.add_argument("--strategy", type=_parse_strategy, default=RegionShuffle(6))
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--layout", default="iso105")
    demo.add_argument("--group", default="default")
    demo.set_defaults(func=cmd_shuffle_demo)

    rep = sub.add_parser("replay", help="re-execute session logs and verify")
    rep.add_argument("logs", nargs="+")
    rep.add_argument("--layout", default="iso105")
    rep.set_defaults(func=cmd_replay)

    serve = sub.add_parser("serve", help="run the session service")
    serve.add_argument("--bind", default="127.0.0.1:8000")
    serve.add_argument("--layout", default="iso105")
    serve.add_argument("--log-dir", default=None)
    serve.add_argument("--frontend", default=None, help="static UI directory")
    serve.set_defaults(func=cmd_serve)

    validate = sub.add_parser("validate", help="validate profile documents")
    validate.add_argument("profiles", nargs="+")
    validate.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
