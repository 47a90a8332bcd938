"""Command-line driver.

Subcommands::

    sphlab run       run convergence studies, write CSVs, table and plots
    sphlab diagnose  per-particle consistency reports along the ladder
    sphlab table     slope matrix from existing results CSVs
    sphlab plot      figures from existing results CSVs

Every option can also be given in a ``key = value`` config file
(``--config``); command-line flags win over the file.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numba

from .consistency import discrete_moments, m0_convergence_trend
from .experiments import (Distribution, parse_ladder, read_results_csv, run_studies,
                          write_results_csv)
from .io import atomic_write_text, fmt_float
from .kernels import CUBIC_SPLINE, WENDLAND_C4
from .particles import EmptyInteriorError, mean_interior_neighbors
from .report import emit_slope_table, study_plots
from .schemes import SCHEME_NAMES, SchemeConfig, smoothing_length_for

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

OUT_ENV = "SPHLAB_OUT"
COMMANDS = ("run", "diagnose", "table", "plot")
FIELD_NAMES = ("f1", "f2")

log = logging.getLogger("sphlab")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class CliConfig:
    command: str = "run"
    scheme: tuple[str, ...] = SCHEME_NAMES
    field: tuple[str, ...] = FIELD_NAMES
    distribution: str = "regular"
    jitter: float = 0.45
    seed: int = 42
    ladder: str = "table1"
    out: str = "sphlab_out"
    plots: bool = False
    threads: int = 0
    interior_only: bool = False
    inputs: tuple[str, ...] = ()

    @property
    def ladder_values(self) -> tuple[int, ...]:
        return parse_ladder(self.ladder)

    @property
    def dist(self) -> Distribution:
        return Distribution(self.distribution, self.jitter, self.seed)

    def to_text(self) -> str:
        lines = [f"# sphlab {self.command} configuration"]
        for key in FILE_KEYS:
            lines.append(f"{key} = {_render(getattr(self, key))}")
        return "\n".join(lines) + "\n"


FILE_KEYS = ("scheme", "field", "distribution", "jitter", "seed", "ladder", "out", "plots",
             "threads", "interior_only")


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(value)
    return str(value)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def _names(text: str, allowed: tuple[str, ...], what: str) -> tuple[str, ...]:
    items = [t.strip().lower() for t in text.split(",") if t.strip()]
    if not items:
        raise UsageError(f"empty {what} list")
    out = []
    for item in items:
        if item == "all":
            out.extend(allowed)
        elif item in allowed:
            out.append(item)
        else:
            hint = " (MSPH has no scaled-neighbour mode)" if item == "msphn" else ""
            raise UsageError(f"invalid {what} {item!r}{hint}; choose from {', '.join(allowed)}, all")
    return tuple(dict.fromkeys(out))


def _convert(key: str, raw: str):
    try:
        if key == "scheme":
            return _names(raw, SCHEME_NAMES, "scheme")
        if key == "field":
            return _names(raw, FIELD_NAMES, "field")
        if key == "distribution":
            v = raw.strip().lower()
            if v not in ("regular", "irregular"):
                raise UsageError(f"invalid distribution {raw!r}")
            return v
        if key == "jitter":
            v = float(raw)
            if not 0.0 <= v < 0.5:
                raise UsageError(f"jitter must lie in [0, 0.5): {raw!r}")
            return v
        if key == "seed":
            v = int(raw)
            if not 0 <= v < 2 ** 64:
                raise UsageError(f"seed must be an unsigned 64-bit integer: {raw!r}")
            return v
        if key == "threads":
            v = int(raw)
            if v < 0:
                raise UsageError(f"threads must be >= 0: {raw!r}")
            return v
        if key == "ladder":
            parse_ladder(raw)
            return raw.strip()
        if key in ("plots", "interior_only"):
            return _bool(raw)
        if key == "out":
            return raw.strip()
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {exc}") from None
    raise UsageError(f"unknown config key {key!r}")


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        if key not in FILE_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _convert(key, raw)
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sphlab", description="SPH kernel/particle consistency laboratory")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--scheme", action="append",
                        help="sph,cspm,fpm,msph,sphn,cspmn,fpmn or all (repeatable, comma lists ok)")
        sp.add_argument("--field", action="append", help="f1, f2 or all")
        sp.add_argument("--distribution", help="regular or irregular")
        sp.add_argument("--jitter", help="jitter amplitude as a fraction of the spacing")
        sp.add_argument("--seed", help="RNG seed for irregular sets")
        sp.add_argument("--ladder", help="table1, table1:all, table1:A-B or N1,N2,...")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./sphlab_out)")
        sp.add_argument("--plots", action="store_const", const="true", help="write SVG figures")
        sp.add_argument("--threads", help="numba worker threads (0 = numba default)")
        sp.add_argument("--interior-only", dest="interior_only", action="store_const", const="true",
                        help="fit slopes on interior-particle RMSE")
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--print-config", action="store_true",
                        help="print the resolved configuration and exit")
        if name in ("table", "plot"):
            sp.add_argument("inputs", nargs="*", help="results CSV files")
    return p


def parse_config(argv, config_path=None) -> tuple[CliConfig, bool]:
    """Resolve defaults < config file < flags.  Returns (config, print_only)."""
    args = build_parser().parse_args(argv)
    if args.command is None:
        raise UsageError("missing subcommand; choose from " + ", ".join(COMMANDS))
    values = {"out": os.environ.get(OUT_ENV, CliConfig.out)}
    path = args.config or config_path
    if path:
        values.update(read_config_file(path))
    for key in FILE_KEYS:
        raw = getattr(args, key, None)
        if raw is None:
            continue
        if isinstance(raw, list):
            raw = ",".join(raw)
        values[key] = _convert(key, raw)
    cfg = replace(CliConfig(), command=args.command, **values,
                  inputs=tuple(getattr(args, "inputs", ()) or ()))
    return cfg, bool(args.print_config)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _metric(cfg: CliConfig) -> str:
    return "interior_rmse" if cfg.interior_only else "rmse"


def _write_outputs(results, cfg: CliConfig, out: Path, write_results: bool) -> None:
    if write_results:
        write_results_csv(results, out / "results.csv")
    table, slopes_csv = emit_slope_table(results, metric=_metric(cfg))
    atomic_write_text(out / "slopes.csv", slopes_csv)
    atomic_write_text(out / "table.txt", table)
    print(table, end="")
    if cfg.plots:
        for path in study_plots(results, out, metric=_metric(cfg)):
            log.info("wrote %s", path)


def cmd_run(cfg: CliConfig) -> None:
    out = Path(cfg.out)
    results = run_studies(cfg.scheme, cfg.field, cfg.dist, cfg.ladder_values)
    _write_outputs(results, cfg, out, write_results=True)


def cmd_table(cfg: CliConfig, plots: bool = False) -> None:
    out = Path(cfg.out)
    inputs = cfg.inputs or (str(out / "results.csv"),)
    results = []
    for path in inputs:
        results.extend(read_results_csv(path))
    if not results:
        raise RuntimeError("no study rows found in " + ", ".join(inputs))
    _write_outputs(results, replace(cfg, plots=plots or cfg.plots), out, write_results=False)


def cmd_plot(cfg: CliConfig) -> None:
    out = Path(cfg.out)
    inputs = cfg.inputs or (str(out / "results.csv"),)
    results = []
    for path in inputs:
        results.extend(read_results_csv(path))
    if not results:
        raise RuntimeError("no study rows found in " + ", ".join(inputs))
    for path in study_plots(results, out, metric=_metric(cfg)):
        print(path)


def cmd_diagnose(cfg: CliConfig) -> None:
    out = Path(cfg.out)
    modes = {}
    for name in cfg.scheme:
        sc = SchemeConfig.from_name(name)
        modes.setdefault("scaled" if sc.scaled else "fixed", sc)
    summary = ["mode,N,h,n_interior,interior_mean_m0_err,mean_m0_err,max_m0_err,"
               "interior_mean_grad_moment_err,mean_sigma2"]
    for mode, sc in modes.items():
        kernel = WENDLAND_C4 if sc.scaled else CUBIC_SPLINE
        trend = []
        for N in cfg.ladder_values:
            particles = cfg.dist.generate(N)
            h = smoothing_length_for(N, sc)
            rep = discrete_moments(particles, None, kernel, h)
            rep.to_csv(out / f"consistency_{mode}_{cfg.distribution}_N{N}.csv")
            s = rep.summary()
            try:
                n_int = mean_interior_neighbors(particles, min(kernel.support_radius(h), 1.0))
            except EmptyInteriorError:
                n_int = float("nan")
            summary.append(",".join([mode, str(N)] + [fmt_float(v) for v in (
                h, n_int, s["interior_mean_m0_err"], s["mean_m0_err"], s["max_m0_err"],
                s["interior_mean_grad_moment_err"], float(rep.sigma2.mean()))]))
            if n_int == n_int and s["interior_mean_m0_err"] > 0:
                trend.append((n_int, s["interior_mean_m0_err"]))
        # fixed-n ladders keep n constant, so a trend is only defined for scaled n
        if len({round(n) for n, _ in trend}) >= 4:
            fit = m0_convergence_trend(trend)
            print(f"{mode}: interior |m0-1| ~ n^{fit.slope:.3f} (r2={fit.r2:.4f})")
    text = "\n".join(summary) + "\n"
    atomic_write_text(out / f"consistency_summary_{cfg.distribution}.csv", text)
    print(text, end="")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        cfg, print_only = parse_config(argv)
    except UsageError as exc:
        print(f"sphlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if print_only:
        print(cfg.to_text(), end="")
        return EXIT_OK
    try:
        if cfg.threads:
            numba.set_num_threads(min(cfg.threads, numba.config.NUMBA_NUM_THREADS))
        if cfg.command == "run":
            cmd_run(cfg)
        elif cfg.command == "diagnose":
            cmd_diagnose(cfg)
        elif cfg.command == "table":
            cmd_table(cfg)
        else:
            cmd_plot(cfg)
    except Exception as exc:  # runtime failure, distinct exit code
        print(f"sphlab: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
