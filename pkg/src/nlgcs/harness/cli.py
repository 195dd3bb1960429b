"""Command-line front end.

Subcommands: sweep <config>, verify-lemmas <preset> [--seed N],
preset <name> [--emit <path>], fit <csv> [--plot <png>],
dump-ensemble <config> <path>. Exit codes: 0 success, 1 acceptance
failure, 2 usage error. NLGCS_THREADS caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from ..sensing import dump_ensemble, sample_ensemble
from .config import ConfigError, emit_config, load_config
from .lemmas import LEMMA_PRESETS, lemmas_csv, verify_lemmas
from .presets import PRESET_NAMES, preset
from .sweep import (SUMMARY_CSV_HEADER, build_generator, draw_signals,
                    fit_slope, link_for_m, report_json, run_uniform_sweep,
                    summary_csv, sweep_csv)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    report = run_uniform_sweep(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(sweep_csv(report))
    (out / "summary.csv").write_text(summary_csv(report))
    (out / "report.json").write_text(report_json(report))
    from .figures import sweep_figure
    sweep_figure(report, out / "sweep.png")
    print(f"sweep {cfg.experiment_id}: slope {report.slope:.3f} "
          f"(+/- {2 * report.slope_se:.3f}), r2 {report.r2:.3f}")
    print(f"wrote {out}/sweep.csv, summary.csv, report.json, sweep.png")
    return EXIT_OK


def _cmd_verify(args) -> int:
    checks = verify_lemmas(args.preset, seed=args.seed)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "lemmas.csv").write_text(lemmas_csv(checks))
    width = max(len(c.lemma_id) for c in checks)
    for c in checks:
        mark = "PASS" if c.passed else "FAIL"
        thr = "info" if math.isinf(c.threshold) else f"{c.threshold:.6g}"
        print(f"[{mark}] {c.lemma_id:<{width}} value={c.value:.6g} threshold={thr}")
    if args.preset == "process":
        medians = [(int(c.lemma_id.split("process_median_m")[1]), c.value)
                   for c in checks if c.lemma_id.startswith("process_median_m")]
        slope_rows = [c.value for c in checks if c.lemma_id == "process_slope_value"]
        if medians and slope_rows:
            from .figures import process_figure
            medians.sort()
            process_figure([m for m, _ in medians], [v for _, v in medians],
                           slope_rows[0], out / "process_scaling.png")
            print(f"wrote {out}/process_scaling.png")
    n_fail = sum(1 for c in checks if not c.passed)
    print(f"{len(checks) - n_fail}/{len(checks)} checks passed; wrote {out}/lemmas.csv")
    return EXIT_OK if n_fail == 0 else EXIT_FAIL


def _cmd_preset(args) -> int:
    try:
        cfg = preset(args.name)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = emit_config(cfg)
    if args.emit:
        Path(args.emit).write_text(text)
        print(f"wrote {args.emit}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _read_fit_pairs(path: str) -> list[tuple[float, float]]:
    lines = Path(path).read_text().splitlines()
    pairs = []
    summary = bool(lines) and lines[0].strip() == SUMMARY_CSV_HEADER
    for i, line in enumerate(lines):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 2:
            continue
        try:
            first = float(parts[0])
        except ValueError:
            if i == 0:
                continue  # header
            raise
        if summary:
            pairs.append((first, math.exp(float(parts[4]))))
        else:
            pairs.append((first, float(parts[1])))
    return pairs


def _cmd_fit(args) -> int:
    try:
        pairs = _read_fit_pairs(args.csv)
        slope, intercept, r2 = fit_slope(pairs)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"slope {slope:.6g}")
    print(f"intercept {intercept:.6g}")
    print(f"r2 {r2:.6g}")
    if args.plot:
        from .figures import fit_figure
        fit_figure(pairs, slope, intercept, r2, args.plot)
        print(f"wrote {args.plot}")
    return EXIT_OK


def _cmd_dump_ensemble(args) -> int:
    cfg = load_config(args.config)
    gen = build_generator(cfg)
    signals = draw_signals(cfg, gen)
    import numpy as np
    radius = float(np.max(np.linalg.norm(signals, axis=1)))
    m = cfg.m_grid[0]
    link = link_for_m(cfg, m, radius)
    from ..streams import STREAM_ENSEMBLE_SEEDS, derive_seeds
    seed = int(derive_seeds(cfg.master_seed, STREAM_ENSEMBLE_SEEDS, 1)[0])
    ens = sample_ensemble(m, gen.output_dim, link, cfg.noise_sigma, seed)
    dump_ensemble(ens, args.path)
    print(f"wrote {args.path} (m={m}, n={gen.output_dim}, link={link.kind})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlgcs",
                                     description="nonlinear generative compressed sensing harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run a uniform-recovery sweep from a config file")
    p.add_argument("config")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("verify-lemmas", help="run a lemma-verification suite")
    p.add_argument("preset", choices=LEMMA_PRESETS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default="out")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("preset", help="emit a named experiment config")
    p.add_argument("name", choices=PRESET_NAMES)
    p.add_argument("--emit", default="")
    p.set_defaults(func=_cmd_preset)

    p = sub.add_parser("fit", help="fit a log-log slope to (m, err) pairs")
    p.add_argument("csv")
    p.add_argument("--plot", default="")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("dump-ensemble", help="write the first (m, trial 0) ensemble as binary")
    p.add_argument("config")
    p.add_argument("path")
    p.set_defaults(func=_cmd_dump_ensemble)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
