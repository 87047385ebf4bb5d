"""Command-line entry point: ``mgdl run | validate | spectrum | report | presets``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import config as cfgmod
from . import runner, spectrum
from .errors import ConfigError, DivergenceError, MgdlError


def _overrides(args) -> dict:
    out = {}
    for text in args.set or []:
        k, v = cfgmod.parse_assignment(text)
        out[k] = v
    for key in ("method", "grades", "epochs", "seed", "width"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    if getattr(args, "batch_size", None) is not None:
        bs = args.batch_size
        out["batch_size"] = bs if bs == "full" else int(bs)
    return out


def _run_one(target: str, overrides: dict, out: str | None) -> tuple[str, int, str]:
    try:
        cfg = cfgmod.resolve(target, overrides)
        bad = cfg.violations()
        if bad:
            return target, 2, "invalid configuration:\n  " + "\n  ".join(bad)
        out_dir = out or cfg.output_dir
        m = runner.run_experiment(cfg, out_dir)
        summary = f"{cfg.task} {cfg.method}: TrRSE={m['tr_rse']:.3e} VaRSE={m['va_rse']:.3e} " \
                  f"TeRSE={m['te_rse']:.3e} -> {out_dir}"
        if "te_psnr" in m:
            summary += f" (TePSNR={m['te_psnr']:.2f} dB)"
        return target, 0, summary
    except ConfigError as exc:
        return target, 2, f"config error: {exc}"
    except FileNotFoundError as exc:
        return target, 3, f"missing file: {exc}"
    except DivergenceError as exc:
        return target, 4, f"training diverged: {exc}"
    except MgdlError as exc:
        return target, 5, f"error: {exc}"
    except (OSError, ValueError) as exc:
        return target, 5, f"error: {type(exc).__name__}: {exc}"


def cmd_run(args) -> int:
    overrides = _overrides(args)
    targets = args.targets
    if len(targets) > 1 and args.out:
        outs = [str(Path(args.out) / Path(t).stem) for t in targets]
    else:
        outs = [args.out] * len(targets)
    if args.jobs > 1 and len(targets) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, targets, [overrides] * len(targets), outs))
    else:
        results = [_run_one(t, overrides, o) for t, o in zip(targets, outs)]
    status = 0
    for target, code, msg in results:
        print(msg, file=sys.stdout if code == 0 else sys.stderr)
        status = status or code
    return status


def cmd_validate(args) -> int:
    try:
        cfg = cfgmod.resolve(args.target, _overrides(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    bad = cfg.violations()
    if args.json:
        print(json.dumps({"violations": bad}))
    elif bad:
        for line in bad:
            print(line)
    else:
        print("ok")
    return 1 if bad else 0


def cmd_spectrum(args) -> int:
    try:
        cols = runner.read_csv_columns(args.csv)
    except (OSError, ValueError) as exc:
        print(f"cannot read {args.csv}: {exc}", file=sys.stderr)
        return 2
    name = args.column or [c for c in cols if c != "x"][-1]
    if name not in cols:
        print(f"column {name!r} not in {args.csv}", file=sys.stderr)
        return 2
    series = spectrum.one_side_spectrum(cols[name], method=args.method)
    if args.out:
        runner.write_single_spectrum_csv(args.out, series)
    else:
        print("frequency,amplitude")
        for f, a in zip(series.frequencies, series.amplitudes):
            print(f"{int(f)},{float(a)!r}")
    return 0


def cmd_report(args) -> int:
    paths = []
    for p in args.paths:
        p = Path(p)
        if p.is_dir():
            paths += sorted(p.rglob("metrics.json"))
        elif p.is_file():
            paths.append(p)
        else:
            print(f"no such file or directory: {p}", file=sys.stderr)
            return 2
    if not paths:
        print("no metrics.json files found", file=sys.stderr)
        return 2
    try:
        rows = runner.report_rows(paths)
    except (ValueError, KeyError) as exc:
        print(f"malformed metrics file: {exc}", file=sys.stderr)
        return 2
    if args.out:
        with open(args.out, "w", newline="") as fh:
            runner.write_report_csv(fh, rows)
    else:
        runner.write_report_csv(sys.stdout, rows)
    return 0


def cmd_presets(args) -> int:
    for name, values in cfgmod.PRESETS.items():
        print(f"{name:20s} {json.dumps(values)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mgdl", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--method", choices=cfgmod.METHODS)
        sp.add_argument("--grades", type=int)
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--width", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--batch-size", dest="batch_size")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any config key (repeatable)")

    r = sub.add_parser("run", help="run presets or config files")
    r.add_argument("targets", nargs="+", help="preset name or path to a .toml config")
    r.add_argument("--out", help="output directory")
    r.add_argument("--jobs", type=int, default=1, help="run several targets in parallel")
    common(r)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("target")
    v.add_argument("--json", action="store_true")
    common(v)
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("spectrum", help="one-side amplitude spectrum of a sampled function")
    s.add_argument("csv", help="CSV with a header; samples on the grid l/N")
    s.add_argument("--column", help="column to analyse (default: last non-x column)")
    s.add_argument("--method", choices=("direct", "fft"), default="direct")
    s.add_argument("--out")
    s.set_defaults(func=cmd_spectrum)

    rep = sub.add_parser("report", help="tabulate metrics.json files")
    rep.add_argument("paths", nargs="+", help="metrics.json files or directories to search")
    rep.add_argument("--out")
    rep.set_defaults(func=cmd_report)

    pr = sub.add_parser("presets", help="list built-in presets")
    pr.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
