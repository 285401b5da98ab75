"""Command line front end.

Subcommands:
  validate     check an experiment config and report problems
  sweep        run the AIR power sweep and write the result CSV
  select       build a low-NLI sequence library and save it as NPZ
  optimize-sc  search per-subcarrier power tilts at one launch power
  plotdata     plot AIR vs power from a sweep CSV and print the peaks

Exit codes: 0 success, 1 operation failed (including partially failed
sweeps), 2 bad usage or invalid config.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ConfigError, load_config
from .experiments import (
    emit_csv,
    optimize_subcarrier_powers,
    parse_csv,
    resolve_libraries,
    run_sweep,
    selection_spec_for,
    derive_seed,
    DOMAIN_SELECTION,
)
from .selection import save_library, select_sequences

__all__ = ["main"]


def _log(message: str) -> None:
    print(message, file=sys.stderr, flush=True)


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    scen = cfg.scenario
    print(f"OK: {args.config}")
    print(f"  scenario: {scen.n_channels} channel(s) x {scen.symbol_rate / 1e9:g} GBd, "
          f"{scen.fiber.length_km:g} km, step {scen.fiber.step_km:g} km")
    print(f"  sweep: {len(cfg.sweep.powers_dbm)} power(s) x {len(cfg.combos)} combo(s), "
          f"{cfg.sweep.blocks_per_point} blocks of {cfg.sweep.n_symbols} symbols")
    print(f"  combos: {', '.join(c.label for c in cfg.combos)}")
    return 0


def _print_peaks(rows) -> None:
    from .config import LINEAR_REFERENCE_LABEL

    best = {}
    for row in rows:
        if row.config == LINEAR_REFERENCE_LABEL or row.status != "ok":
            continue
        if row.config not in best or row.air_bits > best[row.config].air_bits:
            best[row.config] = row
    if not best:
        print("no successful rows")
        return
    width = max(len(label) for label in best)
    print(f"{'config':<{width}}  peak AIR (bits/sym/pol)  at power")
    for label in sorted(best):
        row = best[label]
        print(f"{label:<{width}}  {row.air_bits:7.4f} +- {row.std_err:.4f}      "
              f"{row.power_dbm:+.1f} dBm")


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    log = None if args.quiet else _log
    result = run_sweep(cfg, workers=args.workers, log=log)
    out = args.output or cfg.output_csv
    emit_csv(result, out)
    print(f"wrote {out} ({len(result.rows)} rows, {result.runtime_s:.0f} s)")
    _print_peaks(result.rows)
    failed = [r for r in result.rows if r.status != "ok"]
    if failed:
        for row in failed:
            _log(f"FAILED: {row.power_dbm:+.1f} dBm {row.config}: {row.status}")
        return 1
    return 0


def _cmd_select(args) -> int:
    cfg = load_config(args.config)
    if cfg.selection is None:
        raise ConfigError(["config has no selection section"])
    out = args.output or cfg.selection.library
    if not out:
        raise ConfigError(["give -o or set selection.library in the config"])
    spec = selection_spec_for(cfg)
    seed = derive_seed(cfg.sweep.master_seed, DOMAIN_SELECTION)
    if not args.quiet:
        _log(f"selecting {cfg.selection.n_keep} blocks from "
             f"{cfg.selection.n_keep * spec.candidates_per_keep} candidates...")
    library = select_sequences(spec, cfg.selection.n_keep, seed)
    save_library(library, out)
    stats = library.stats()
    print(f"wrote {out}")
    print(f"  kept {stats['n_kept']} of {stats['n_candidates']} candidates "
          f"(rate {cfg.selection.selection_rate:g})")
    print(f"  kept/population cost ratio: {stats['kept_over_population_mean']:.3f}")
    print(f"  rate penalty: {library.penalty_bits:.5f} bits/sym/pol")
    return 0


def _cmd_optimize_sc(args) -> int:
    cfg = load_config(args.config)
    log = None if args.quiet else _log
    result = optimize_subcarrier_powers(
        cfg,
        combo_label=args.combo,
        power_dbm=args.power,
        opt_blocks=args.blocks,
        log=log,
    )
    print(f"combo {result.combo_label} at {result.power_dbm:+.1f} dBm")
    print(f"  tilts (dB per subcarrier): {list(result.tilts_db)}")
    print(f"  best AIR:    {result.best.air_bits:.4f} +- {result.best.std_err:.4f}")
    print(f"  uniform AIR: {result.uniform.air_bits:.4f} +- {result.uniform.std_err:.4f}")
    print(f"  gain: {result.gain_bits:+.4f} bits/sym/pol")
    if args.output:
        payload = {
            "combo": result.combo_label,
            "power_dbm": result.power_dbm,
            "tilts_db": list(result.tilts_db),
            "air_best": result.best.air_bits,
            "std_err_best": result.best.std_err,
            "air_uniform": result.uniform.air_bits,
            "std_err_uniform": result.uniform.std_err,
            "gain_bits": result.gain_bits,
            "evaluations": [
                {"tilts_db": list(t), "air_bits": a, "std_err": s}
                for t, a, s in result.evaluations
            ],
        }
        with open(args.output, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        print(f"wrote {args.output}")
    return 0


def _cmd_plotdata(args) -> int:
    rows = parse_csv(args.csv)
    if not rows:
        _log(f"{args.csv} has no data rows")
        return 1
    out = args.output
    if out is None:
        stem, _ = os.path.splitext(args.csv)
        out = stem + ".png"

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .config import LINEAR_REFERENCE_LABEL

    series: dict[str, list] = {}
    for row in rows:
        if row.status == "ok":
            series.setdefault(row.config, []).append(row)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for label in sorted(series):
        pts = sorted(series[label], key=lambda r: r.power_dbm)
        x = [r.power_dbm for r in pts]
        y = [r.air_bits for r in pts]
        if label == LINEAR_REFERENCE_LABEL:
            ax.plot(x, y, "k--", linewidth=1.0, label=label)
        else:
            err = [r.std_err for r in pts]
            ax.errorbar(x, y, yerr=err, marker="o", markersize=4,
                        capsize=2, linewidth=1.2, label=label)
    ax.set_xlabel("launch power per channel per polarization (dBm)")
    ax.set_ylabel("AIR (bits/symbol/polarization)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    print(f"wrote {out}")
    _print_peaks(rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fiberair",
        description="AIR power sweeps over a nonlinear fiber simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an experiment config")
    p.add_argument("config")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("sweep", help="run the AIR power sweep")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="CSV path (default: config output_csv)")
    p.add_argument("--workers", type=int, default=None,
                   help="processes for sweep points (default: FIBERAIR_WORKERS or 1)")
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("select", help="build a low-NLI sequence library")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="NPZ path (default: selection.library)")
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("optimize-sc", help="search per-subcarrier power tilts")
    p.add_argument("config")
    p.add_argument("--combo", help="combo label (default: first multi-subcarrier combo)")
    p.add_argument("--power", type=float, default=None,
                   help="launch power dBm (default: middle of the sweep grid)")
    p.add_argument("--blocks", type=int, default=4,
                   help="blocks per tilt evaluation during the search")
    p.add_argument("-o", "--output", help="write the result as JSON")
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=_cmd_optimize_sc)

    p = sub.add_parser("plotdata", help="plot a sweep CSV and print the peaks")
    p.add_argument("csv")
    p.add_argument("-o", "--output", help="PNG path (default: CSV name with .png)")
    p.set_defaults(func=_cmd_plotdata)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        for problem in err.errors:
            _log(f"config error: {problem}")
        return 2
    except (OSError, ValueError, RuntimeError) as err:
        _log(f"error: {err}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
