"""Analytic test fields, resolution-ladder studies and convergence fits."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .io import atomic_write_text, fmt_float, parse_float
from .particles import (DEFAULT_JITTER, EmptyInteriorError, ParticleSet, generate_irregular,
                        generate_regular, lattice_side, mean_interior_neighbors)
from .schemes import SchemeConfig, Variant, estimate_many, smoothing_length_for
from .stats import SlopeFit, error_std, fit_loglog_slope, rmse

log = logging.getLogger(__name__)

QUANTITIES = ("f", "fx", "fy", "fxx", "fxy", "fyy")
FIRST_ORDER = QUANTITIES[:3]

# N, neighbours n, smoothing length h (ScaledN runs)
TABLE1 = (
    (625, 213, 0.342),
    (2500, 556, 0.271),
    (5625, 973, 0.237),
    (10000, 1436, 0.215),
    (15625, 1933, 0.200),
    (22500, 2472, 0.188),
    (30625, 3041, 0.179),
    (40000, 3648, 0.170),
    (62500, 4880, 0.158),
    (90000, 6288, 0.149),
    (160000, 9216, 0.136),
    (250000, 12416, 0.126),
    (562500, 21328, 0.110),
)
DEFAULT_LADDER = tuple(row[0] for row in TABLE1[:10])
FULL_LADDER = tuple(row[0] for row in TABLE1)

DEGRADED_FALLBACK_FRACTION = 0.01


class StudyError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# test fields
# ---------------------------------------------------------------------------


def _f1(q, x, y):
    px, py = np.pi * x, np.pi * y
    if q == "f":
        return np.sin(px) * np.sin(py)
    if q == "fx":
        return np.pi * np.cos(px) * np.sin(py)
    if q == "fy":
        return np.pi * np.sin(px) * np.cos(py)
    if q in ("fxx", "fyy"):
        return -np.pi ** 2 * np.sin(px) * np.sin(py)
    return np.pi ** 2 * np.cos(px) * np.cos(py)


def _f2(q, x, y):
    # x^(5/2) (20 y^5 + 8 x y^3 + x^2 y^2 + 1), expanded term by term
    s = np.sqrt(x)
    x2 = x * x
    if q == "f":
        return s * x2 * (20 * y**5 + 8 * x * y**3 + x2 * y**2 + 1)
    if q == "fx":
        return s * x * (50 * y**5 + 28 * x * y**3 + 4.5 * x2 * y**2 + 2.5)
    if q == "fy":
        return s * x2 * (100 * y**4 + 24 * x * y**2 + 2 * x2 * y)
    if q == "fxx":
        return s * (75 * y**5 + 70 * x * y**3 + 15.75 * x2 * y**2 + 3.75)
    if q == "fxy":
        return s * x * (250 * y**4 + 84 * x * y**2 + 9 * x2 * y)
    return s * x2 * (400 * y**3 + 48 * x * y + 2 * x2)


@dataclass(frozen=True)
class TestField:
    """``F1 = sin(pi x) sin(pi y)``; ``F2 = x^(5/2) (20y^5 + 8xy^3 + x^2y^2 + 1)``."""

    __test__ = False  # not a pytest class
    id: str

    def __post_init__(self):
        if self.id not in ("f1", "f2"):
            raise ValueError(f"unknown field {self.id!r}")

    def evaluate(self, which: str, x, y):
        if which not in QUANTITIES:
            raise ValueError(f"unknown quantity {which!r}")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any(x < 0) or np.any(x > 1) or np.any(y < 0) or np.any(y > 1):
            raise ValueError("test fields are defined on [0, 1]^2 only")
        fn = _f1 if self.id == "f1" else _f2
        out = fn(which, x, y)
        return float(out) if out.ndim == 0 else out


F1 = TestField("f1")
F2 = TestField("f2")
FIELDS = {"f1": F1, "f2": F2}


def exact_field(field: TestField | str, which: str, x, y):
    if isinstance(field, str):
        field = FIELDS[field]
    return field.evaluate(which, x, y)


# ---------------------------------------------------------------------------
# study configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Distribution:
    kind: str = "regular"  # "regular" or "irregular"
    amplitude_fraction: float = DEFAULT_JITTER
    seed: int = 42

    def __post_init__(self):
        if self.kind not in ("regular", "irregular"):
            raise ValueError(f"unknown distribution {self.kind!r}")

    def generate(self, N: int) -> ParticleSet:
        if self.kind == "regular":
            return generate_regular(N)
        return generate_irregular(N, self.amplitude_fraction, self.seed)

    @property
    def seed_label(self) -> str:
        return "" if self.kind == "regular" else str(self.seed)


def parse_ladder(spec: str) -> tuple[int, ...]:
    """``table1`` (rows 1-10), ``table1:all``, ``table1:3-7`` or ``625,2500,...``."""
    text = spec.strip().lower()
    if text.startswith("table1"):
        rest = text[len("table1"):]
        if rest == "":
            return DEFAULT_LADDER
        if not rest.startswith(":"):
            raise ValueError(f"bad ladder spec {spec!r}")
        rng = rest[1:]
        if rng == "all":
            return FULL_LADDER
        try:
            lo, _, hi = rng.partition("-")
            lo = int(lo)
            hi = int(hi) if hi else lo
        except ValueError:
            raise ValueError(f"bad ladder spec {spec!r}") from None
        if not 1 <= lo <= hi <= len(TABLE1):
            raise ValueError(f"table1 rows must lie in 1-{len(TABLE1)}: {spec!r}")
        return tuple(r[0] for r in TABLE1[lo - 1:hi])
    try:
        ladder = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ValueError(f"bad ladder spec {spec!r}") from None
    validate_ladder(ladder)
    return ladder


def validate_ladder(ladder: Sequence[int]) -> None:
    if len(ladder) == 0:
        raise ValueError("empty ladder")
    for N in ladder:
        lattice_side(N)
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("ladder must be strictly increasing")


@dataclass(frozen=True)
class StudyConfig:
    scheme: SchemeConfig
    field: TestField
    distribution: Distribution = field(default_factory=Distribution)
    ladder: tuple[int, ...] = DEFAULT_LADDER
    conditioning: bool = True

    def __post_init__(self):
        validate_ladder(self.ladder)


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


@dataclass
class StudyRow:
    N: int
    h: float
    n_interior: float
    rmse: dict
    std: dict
    interior_rmse: dict
    fallbacks: int
    cond_max: float = float("nan")
    wall_time: float = 0.0

    @property
    def degraded(self) -> bool:
        return self.fallbacks > DEGRADED_FALLBACK_FRACTION * self.N


@dataclass
class StudyResult:
    scheme: str
    field: str
    distribution: str
    seed: str
    rows: list = field(default_factory=list)

    @property
    def quantities(self) -> tuple[str, ...]:
        return QUANTITIES if self.scheme == "msph" else FIRST_ORDER

    def column(self, metric: str, quantity: str) -> np.ndarray:
        return np.array([getattr(r, metric)[quantity] for r in self.rows])

    def slope(self, quantity: str = "f", metric: str = "rmse", rows: slice | None = None) -> SlopeFit:
        sel = self.rows if rows is None else self.rows[rows]
        return fit_loglog_slope([(r.N, getattr(r, metric)[quantity]) for r in sel])

    @property
    def slopes(self) -> dict:
        """RMSE-vs-N fits for every computed quantity."""
        out = {}
        if len(self.rows) < 2:
            return out
        for q in self.quantities:
            try:
                out[q] = self.slope(q)
            except ValueError:
                continue
        return out

    def std_vs_n_slope(self, quantity: str = "f") -> SlopeFit:
        return fit_loglog_slope([(r.n_interior, r.std[quantity]) for r in self.rows])

    @property
    def degraded_rows(self) -> list:
        return [r for r in self.rows if r.degraded]


def _metrics(est, particles, fld: TestField, interior):
    x, y = particles.x, particles.y
    rm, sd, irm = {}, {}, {}
    for q in QUANTITIES:
        values = est.quantity(q)
        if values is None:
            rm[q] = sd[q] = irm[q] = float("nan")
            continue
        err = values - fld.evaluate(q, x, y)
        rm[q] = rmse(err)
        sd[q] = error_std(err)
        irm[q] = rmse(err[interior]) if np.any(interior) else float("nan")
    return rm, sd, irm


def _as_config(s) -> SchemeConfig:
    return s if isinstance(s, SchemeConfig) else SchemeConfig.from_name(s)


def run_studies(schemes: Iterable, fields: Iterable, distribution: Distribution = Distribution(),
                ladder: Sequence[int] = DEFAULT_LADDER, conditioning: bool = True,
                max_pairs: int = 20_000_000) -> list[StudyResult]:
    """Run every (scheme, field) pair over the ladder.

    Schemes that share a kernel and neighbour mode share one neighbour sweep
    per ladder point.  Results come back ordered by scheme, then field.
    """
    configs = [_as_config(s) for s in schemes]
    flds = [FIELDS[f] if isinstance(f, str) else f for f in fields]
    if not configs or not flds:
        raise ValueError("need at least one scheme and one field")
    validate_ladder(ladder)
    results = {(c.name, f.id): StudyResult(c.name, f.id, distribution.kind, distribution.seed_label)
               for c in configs for f in flds}

    groups: dict = {}
    for c in configs:
        groups.setdefault((c.kernel, c.scaled, getattr(c.neighbor_mode, "target", None),
                           c.pivot_tolerance), []).append(c)

    for N in ladder:
        try:
            particles = distribution.generate(N)
        except Exception as exc:
            raise StudyError(f"ladder row N={N}: particle generation failed: {exc}") from exc
        samples = np.vstack([f.evaluate("f", particles.x, particles.y) for f in flds])
        for (kernel, _scaled, _target, tol), members in groups.items():
            t0 = time.perf_counter()
            try:
                h = smoothing_length_for(N, members[0])
                radius = kernel.support_radius(h)
                try:
                    n_int = mean_interior_neighbors(particles, min(radius, 1.0))
                except EmptyInteriorError:
                    n_int = float("nan")
                ests = estimate_many([c.variant for c in members], samples, particles, h, kernel,
                                     pivot_tolerance=tol, max_pairs=max_pairs,
                                     conditioning=conditioning)
            except Exception as exc:
                raise StudyError(f"ladder row N={N} ({', '.join(c.name for c in members)}): {exc}") from exc
            elapsed = time.perf_counter() - t0
            interior = particles.interior_mask(radius)
            for c in members:
                for k, fld in enumerate(flds):
                    est = ests[c.variant][k]
                    rm, sd, irm = _metrics(est, particles, fld, interior)
                    cond = float("nan")
                    if est.condition is not None and c.variant in (Variant.FPM, Variant.MSPH):
                        cond = float(np.max(est.condition))
                    results[(c.name, fld.id)].rows.append(StudyRow(
                        N=N, h=h, n_interior=n_int, rmse=rm, std=sd, interior_rmse=irm,
                        fallbacks=est.fallback_count, cond_max=cond,
                        wall_time=elapsed / len(members)))
            log.info("N=%d %s done in %.2fs", N, "/".join(c.name for c in members), elapsed)
    return [results[(c.name, f.id)] for c in configs for f in flds]


def run_study(config: StudyConfig) -> StudyResult:
    return run_studies([config.scheme], [config.field], config.distribution, config.ladder,
                       conditioning=config.conditioning)[0]


def msph_mse_vs_rmse_demo(study: StudyResult | float) -> tuple[float, float]:
    """Slopes of RMSE and of MSE = RMSE^2 versus N.

    Squaring the error doubles the log-log slope, which is how an RMSE
    rate near -1.76 turns into an MSE rate near -3.52.
    """
    if isinstance(study, (int, float)):
        return float(study), 2.0 * float(study)
    pts = [(r.N, r.rmse["f"]) for r in study.rows]
    rmse_fit = fit_loglog_slope(pts)
    mse_fit = fit_loglog_slope([(n, e * e) for n, e in pts])
    return rmse_fit.slope, mse_fit.slope


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

RESULTS_HEADER = ("scheme,field,distribution,seed,N,h,n_interior,rmse_f,rmse_fx,rmse_fy,"
                  "rmse_fxx,rmse_fxy,rmse_fyy,std_f,std_fx,std_fy,fallbacks,interior_rmse_f").split(",")
EXTRA_HEADER = ["std_fxx", "std_fxy", "std_fyy", "interior_rmse_fx", "interior_rmse_fy",
                "interior_rmse_fxx", "interior_rmse_fxy", "interior_rmse_fyy", "cond_max",
                "wall_time"]
SLOPES_HEADER = "scheme,field,distribution,quantity,slope,intercept,r2,points".split(",")


def results_to_csv(results: Iterable[StudyResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULTS_HEADER + EXTRA_HEADER)
    for res in results:
        for r in res.rows:
            row = [res.scheme, res.field, res.distribution, res.seed, str(r.N), fmt_float(r.h),
                   fmt_float(r.n_interior)]
            row += [fmt_float(r.rmse[q]) for q in QUANTITIES]
            row += [fmt_float(r.std[q]) for q in FIRST_ORDER]
            row += [str(r.fallbacks), fmt_float(r.interior_rmse["f"])]
            row += [fmt_float(r.std[q]) for q in QUANTITIES[3:]]
            row += [fmt_float(r.interior_rmse[q]) for q in QUANTITIES[1:]]
            row += [fmt_float(r.cond_max), fmt_float(r.wall_time)]
            w.writerow(row)
    return buf.getvalue()


def write_results_csv(results: Iterable[StudyResult], path) -> None:
    atomic_write_text(Path(path), results_to_csv(results))


def read_results_csv(path) -> list[StudyResult]:
    """Inverse of :func:`write_results_csv`; columns are looked up by name."""
    out: dict = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(RESULTS_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for rec in reader:
            key = (rec["scheme"], rec["field"], rec["distribution"], rec["seed"])
            res = out.setdefault(key, StudyResult(*key))

            def get(name):
                return parse_float(rec.get(name, "") or "")

            res.rows.append(StudyRow(
                N=int(rec["N"]), h=get("h"), n_interior=get("n_interior"),
                rmse={q: get(f"rmse_{q}") for q in QUANTITIES},
                std={q: get(f"std_{q}") for q in QUANTITIES},
                interior_rmse={q: get(f"interior_rmse_{q}") for q in QUANTITIES},
                fallbacks=int(rec["fallbacks"]), cond_max=get("cond_max"),
                wall_time=get("wall_time") if rec.get("wall_time") else 0.0))
    return list(out.values())


def slopes_to_csv(results: Iterable[StudyResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SLOPES_HEADER)
    for res in results:
        for q, fit in res.slopes.items():
            w.writerow([res.scheme, res.field, res.distribution, q, fmt_float(fit.slope),
                        fmt_float(fit.intercept), fmt_float(fit.r2), str(fit.points)])
    return buf.getvalue()


def write_slopes_csv(results: Iterable[StudyResult], path) -> None:
    atomic_write_text(Path(path), slopes_to_csv(results))
