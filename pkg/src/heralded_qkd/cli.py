"""Command-line front end.

    heralded-qkd sweep       --config FILE [--config FILE ...] [--out DIR] [--svg] [--jobs N]
    heralded-qkd optimize    --config FILE [--loss DB ...]
    heralded-qkd validate-mc --config FILE [--seed N] [--jobs N]
    heralded-qkd compare     --config A --config B [...] [--out DIR] [--svg]

Exit status: 0 success, 2 configuration error, 3 validation failure,
4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace
from pathlib import Path

from .config import ExperimentConfig, Run, load_config
from .errors import ConfigError, GridMismatch, QKDModelError
from .montecarlo import simulate, total_variation
from .optimizer import SweepRecord, optimize_mu, sweep
from .sources import Branch, p_noclick, pmf, pmf_conditional
from .svgplot import line_plot_svg

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_IO = 0, 2, 3, 4

# conditional TVs are only gated when the branch has this many samples
MIN_BRANCH_SAMPLES = 100_000

CSV_COLUMNS = ("loss_db", "mu_opt", "rate", "gain", "qber", "delta", "p_click", "y0_l", "y1_l", "e1_u")


def format_number(x) -> str:
    """Locale-independent scientific notation, 12 significant digits; None -> ''."""
    if x is None:
        return ""
    return f"{float(x):.11e}"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buf.getvalue()


def sweep_csv(records: list[SweepRecord]) -> str:
    return _csv_text(CSV_COLUMNS, ([getattr(r, c) for c in CSV_COLUMNS] for r in records))


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    return Path(args.out) if args.out else cfg.out_dir


def _run_sweep(cfg: ExperimentConfig, run: Run, jobs: int) -> list[SweepRecord]:
    return sweep(run.source, run.protocol, cfg.channel, cfg.losses, cfg.f_ec, cfg.search, jobs=jobs, fixed_mu=cfg.fixed_mu)


def _warn_flags(run: Run, records) -> None:
    for r in records:
        if r.flag.startswith("error:"):
            print(f"warning: {run.label} at {r.loss_db:g} dB: {r.flag}", file=sys.stderr)


def cmd_sweep(args, configs) -> int:
    for cfg in configs:
        out = _out_dir(args, cfg)
        series = {}
        for run in cfg.runs:
            records = _run_sweep(cfg, run, args.jobs)
            _warn_flags(run, records)
            path = out / f"{run.label}.csv"
            _write(path, sweep_csv(records))
            print(f"wrote {path}")
            series[run.label] = ([r.loss_db for r in records], [r.rate for r in records])
        if args.svg or cfg.svg:
            path = out / f"{cfg.label}.svg"
            _write(path, line_plot_svg(series, title=cfg.label))
            print(f"wrote {path}")
    return EXIT_OK


def cmd_optimize(args, configs) -> int:
    rows = []
    for cfg in configs:
        losses = args.loss if args.loss else cfg.losses
        for run in cfg.runs:
            for loss in losses:
                opt = optimize_mu(run.source, run.protocol, cfg.channel.at_loss(loss), cfg.f_ec, cfg.search)
                rows.append((run.label, loss, opt.mu_opt, opt.rate))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("label", "loss_db", "mu_opt", "rate"))
    for label, loss, mu, rate in rows:
        writer.writerow((label, format_number(loss), format_number(mu), format_number(rate)))
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def validate_mc_report(cfg: ExperimentConfig, workers: int = 1) -> tuple[str, bool]:
    """Monte Carlo vs analytic statistics for every multiplexed run.

    The report depends only on the config (seed included), never on timing
    or ``workers``.
    """
    if cfg.fixed_mu is None:
        raise ConfigError("validate-mc needs a fixed 'mu' in [source]")
    mc = cfg.mc
    lines, ok = [], True
    seen = set()
    for run in cfg.runs:
        spec = run.source
        if not spec.kind.multiplexed or spec in seen:
            continue
        seen.add(spec)
        res = simulate(spec, mc.trials, mc.seed, workers=workers)
        tv = total_variation(res.empirical_pmf, pmf(spec).probs)
        checks = [("tv", tv, mc.tv_tol)]
        notes = []
        if spec.kind.heralded:
            p_click = 1.0 - p_noclick(spec)
            for name, branch, counts, emp in (
                ("tv_click", Branch.CLICK, res.counts_click, res.empirical_pmf_click),
                ("tv_noclick", Branch.NOCLICK, res.counts_noclick, res.empirical_pmf_noclick),
            ):
                n = int(counts.sum())
                if n == 0:
                    continue
                v = total_variation(emp, pmf_conditional(spec, branch).probs)
                if n >= MIN_BRANCH_SAMPLES:
                    checks.append((name, v, mc.tv_tol))
                else:
                    notes.append(f"{name}={v:.3e}(n={n},unchecked)")
            checks.append(("click_delta", abs(res.click_fraction - p_click), mc.click_tol))
        passed = all(v < tol for _, v, tol in checks)
        ok &= passed
        detail = " ".join([f"{name}={v:.3e}{'<' if v < tol else '>='}{tol:g}" for name, v, tol in checks] + notes)
        lines.append(f"{run.label}: {'PASS' if passed else 'FAIL'}, trials={res.trials} seed={res.seed} {detail}")
    if not lines:
        raise ConfigError("validate-mc needs at least one multiplexed source (mhps/smhps/amhps)")
    return "\n".join(lines) + "\n", ok


def cmd_validate_mc(args, configs) -> int:
    ok = True
    for cfg in configs:
        if args.seed is not None:
            cfg = replace(cfg, mc=replace(cfg.mc, seed=args.seed))
        report, passed = validate_mc_report(cfg, workers=args.jobs)
        sys.stdout.write(report)
        ok &= passed
    return EXIT_OK if ok else EXIT_VALIDATION


def compare_csv(configs, jobs: int = 1) -> tuple[str, dict]:
    if len(configs) < 2:
        raise GridMismatch("compare needs at least two configs")
    grid = configs[0].losses
    for cfg in configs[1:]:
        if cfg.losses != grid:
            raise GridMismatch(f"loss grid of '{cfg.label}' differs from '{configs[0].label}'")
    columns = {}
    for cfg in configs:
        for run in cfg.runs:
            if run.label in columns:
                raise ConfigError(f"duplicate run label {run.label!r} across configs")
            records = _run_sweep(cfg, run, jobs)
            _warn_flags(run, records)
            columns[run.label] = [r.rate for r in records]
    header = ("loss_db", *columns)
    rows = ([loss, *(col[i] for col in columns.values())] for i, loss in enumerate(grid))
    series = {label: (list(grid), col) for label, col in columns.items()}
    return _csv_text(header, rows), series


def cmd_compare(args, configs) -> int:
    text, series = compare_csv(configs, args.jobs)
    out = _out_dir(args, configs[0])
    name = "compare_" + "_vs_".join(cfg.label for cfg in configs)
    _write(out / f"{name}.csv", text)
    print(f"wrote {out / f'{name}.csv'}")
    if args.svg:
        _write(out / f"{name}.svg", line_plot_svg(series, title=name))
        print(f"wrote {out / f'{name}.svg'}")
    return EXIT_OK


COMMANDS = {
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "validate-mc": cmd_validate_mc,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heralded-qkd", description="Key rates of multiplexed heralded sources.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", action="append", required=True, metavar="PATH", help="config file (repeatable)")
    parser.add_argument("--out", metavar="DIR", help="output directory (overrides [output] dir)")
    parser.add_argument("--seed", type=int, help="Monte Carlo seed (overrides [mc] seed)")
    parser.add_argument("--svg", action="store_true", help="also write an SVG plot")
    parser.add_argument("--jobs", type=int, default=1, help="worker count for sweeps and Monte Carlo")
    parser.add_argument("--loss", type=float, action="append", metavar="DB", help="loss point for 'optimize' (repeatable)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        configs = [load_config(p) for p in args.config]
        return COMMANDS[args.command](args, configs)
    except (ConfigError, GridMismatch) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except QKDModelError as exc:
        # model-level input errors (e.g. INVALID_TRIALS) are configuration problems
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
