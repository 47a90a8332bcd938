"""Standard SPH and the corrective schemes CSPM, FPM and MSPH in 2D.

All schemes share one per-particle accumulation.  For particle ``a`` and
each neighbour ``b`` (with ``d = x_b - x_a``) we form the test functions

    phi = (W, W_x, W_y, W_xx, W_xy, W_yy)_ab * dV_b     (derivatives w.r.t. x_a)

and the Taylor basis ``P = (1, dx, dy, dx^2/2, dx dy, dy^2/2)`` and sum

    A[r, c] = sum_b phi_r P_c          B[r] = sum_b phi_r f_b
    D[r]    = sum_b phi_r (f_b - f_a)  (r in {W_x, W_y}, used by CSPM)

Standard SPH reads the estimate straight off ``B``; CSPM divides by the
Shepard sum ``A[0, 0]`` and solves the 2x2 gradient block against ``D``;
FPM solves the leading 3x3 block and MSPH the full 6x6 system.  Fallbacks
on singular systems: CSPM gradient -> standard gradient, FPM -> standard,
MSPH -> FPM (second derivatives zeroed) -> standard.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit, prange

from .kernels import CUBIC_SPLINE, WENDLAND_C4, SmoothingKernel, w_derivs_scalar
from .linalg import gauss_solve
from .particles import NeighborList, ParticleSet, build_neighbor_list, iter_neighbor_chunks

DEFAULT_TARGET_N = 13.0
DEFAULT_PIVOT_TOLERANCE = 1e-12

# total derivative order of each test function / Taylor basis entry
_ORDERS = np.array([0, 1, 1, 2, 2, 2])
_ORD = (0, 1, 1, 2, 2, 2)


class Variant(enum.Enum):
    STANDARD = "standard"
    CSPM = "cspm"
    FPM = "fpm"
    MSPH = "msph"


@dataclass(frozen=True)
class FixedN:
    """Keep the interior neighbour count near ``target`` as N grows."""

    target: float = DEFAULT_TARGET_N


@dataclass(frozen=True)
class ScaledN:
    """``h = N^(-1/6)``: the neighbour count grows with N."""


@dataclass(frozen=True)
class SchemeConfig:
    variant: Variant
    kernel: SmoothingKernel | None = None
    neighbor_mode: FixedN | ScaledN = field(default_factory=FixedN)
    pivot_tolerance: float = DEFAULT_PIVOT_TOLERANCE

    def __post_init__(self):
        if self.kernel is None:
            default = WENDLAND_C4 if isinstance(self.neighbor_mode, ScaledN) else CUBIC_SPLINE
            object.__setattr__(self, "kernel", default)
        if self.variant is Variant.MSPH and isinstance(self.neighbor_mode, ScaledN):
            raise ValueError("MSPH is only run with a fixed neighbour count")
        if not self.pivot_tolerance > 0.0:
            raise ValueError("pivot_tolerance must be positive")

    @property
    def scaled(self) -> bool:
        return isinstance(self.neighbor_mode, ScaledN)

    @property
    def name(self) -> str:
        base = {"standard": "sph"}.get(self.variant.value, self.variant.value)
        return base + ("n" if self.scaled else "")

    @property
    def label(self) -> str:
        return LABELS[self.name]

    @classmethod
    def from_name(cls, name: str) -> "SchemeConfig":
        key = name.strip().lower()
        if key not in SCHEME_NAMES:
            raise ValueError(f"unknown scheme {name!r}; choose from {', '.join(SCHEME_NAMES)}")
        scaled = key.endswith("n")
        base = key[:-1] if scaled else key
        variant = Variant.STANDARD if base == "sph" else Variant(base)
        return cls(variant, neighbor_mode=ScaledN() if scaled else FixedN())


SCHEME_NAMES = ("sph", "cspm", "fpm", "msph", "sphn", "cspmn", "fpmn")
LABELS = {"sph": "SPH", "cspm": "CSPM", "fpm": "FPM", "msph": "MSPH",
          "sphn": "SPHn", "cspmn": "CSPMn", "fpmn": "FPMn"}


@dataclass
class SchemeEstimate:
    """Per-particle estimates; second derivatives are ``None`` except for MSPH."""

    f: np.ndarray
    fx: np.ndarray
    fy: np.ndarray
    fxx: np.ndarray | None = None
    fxy: np.ndarray | None = None
    fyy: np.ndarray | None = None
    fallback: np.ndarray | None = None
    condition: np.ndarray | None = None

    def __post_init__(self):
        if self.fallback is None:
            self.fallback = np.zeros(self.f.shape, dtype=bool)

    @property
    def fallback_count(self) -> int:
        return int(np.count_nonzero(self.fallback))

    def quantity(self, name: str) -> np.ndarray | None:
        return getattr(self, name)


def smoothing_length_for(N: int, config: SchemeConfig) -> float:
    """``N^(-1/6)`` for ScaledN; for FixedN the ``h`` whose support disk
    holds ``target`` particles at density N: ``sqrt(target / (pi N)) / k``."""
    if N < 4:
        raise ValueError("N must be at least 4")
    if config.scaled:
        return float(N) ** (-1.0 / 6.0)
    target = config.neighbor_mode.target
    if not target > 0:
        raise ValueError("target neighbour count must be positive")
    return math.sqrt(target / (math.pi * N)) / config.kernel.support_factor


# ---------------------------------------------------------------------------
# compiled cores
# ---------------------------------------------------------------------------


@njit(cache=True, parallel=True)
def _assemble(px, py, vol, fields, queries, offsets, nbr, h, code, nt):
    nq = queries.size
    m = fields.shape[0]
    A = np.zeros((nq, nt, nt))
    B = np.zeros((nq, nt, m))
    D = np.zeros((nq, 2, m))
    for i in prange(nq):
        a = queries[i]
        xa = px[a]
        ya = py[a]
        phi = np.empty(6)
        P = np.empty(6)
        for p in range(offsets[i], offsets[i + 1]):
            b = nbr[p]
            dx = px[b] - xa
            dy = py[b] - ya
            w, wx, wy, wxx, wxy, wyy = w_derivs_scalar(code, -dx, -dy, h)
            v = vol[b]
            phi[0] = w * v
            phi[1] = wx * v
            phi[2] = wy * v
            phi[3] = wxx * v
            phi[4] = wxy * v
            phi[5] = wyy * v
            P[0] = 1.0
            P[1] = dx
            P[2] = dy
            P[3] = 0.5 * dx * dx
            P[4] = dx * dy
            P[5] = 0.5 * dy * dy
            for r in range(nt):
                pr = phi[r]
                for c in range(nt):
                    A[i, r, c] += pr * P[c]
                for k in range(m):
                    B[i, r, k] += pr * fields[k, b]
            for k in range(m):
                df = fields[k, b] - fields[k, a]
                D[i, 0, k] += phi[1] * df
                D[i, 1, k] += phi[2] * df
    return A, B, D


@njit(cache=True)
def _equilibrated_solve(A, B, h, tol, lo, n):
    """Solve the block ``A[lo:lo+n, lo:lo+n] X = B[lo:lo+n]`` after scaling
    rows by ``h^ord`` and unknowns by ``h^-ord``, which makes every entry
    O(1) so the relative pivot test only fires on genuine rank loss."""
    M = np.empty((n, n))
    R = np.empty((n, B.shape[1]))
    for r in range(n):
        sr = h ** _ORD[lo + r]
        for c in range(n):
            M[r, c] = A[lo + r, lo + c] * sr / h ** _ORD[lo + c]
        for k in range(B.shape[1]):
            R[r, k] = B[r, k] * sr
    X, ok = gauss_solve(M, R, tol)
    if ok:
        for c in range(n):
            sc = h ** _ORD[lo + c]
            for k in range(B.shape[1]):
                X[c, k] /= sc
    return X, ok


@njit(cache=True, parallel=True)
def _solve_all(A, B, D, h, tol):
    nq = A.shape[0]
    nt = A.shape[1]
    m = B.shape[2]
    cspm = np.zeros((nq, 2, m))
    cspm_ok = np.zeros(nq, dtype=np.bool_)
    fpm = np.zeros((nq, 3, m))
    fpm_ok = np.zeros(nq, dtype=np.bool_)
    msph = np.zeros((nq, 6, m))
    msph_ok = np.zeros(nq, dtype=np.bool_)
    for i in prange(nq):
        x, ok = _equilibrated_solve(A[i], D[i], h, tol, 1, 2)
        cspm_ok[i] = ok
        if ok:
            cspm[i] = x
        x, ok = _equilibrated_solve(A[i], B[i], h, tol, 0, 3)
        fpm_ok[i] = ok
        if ok:
            fpm[i] = x
        if nt == 6:
            x, ok = _equilibrated_solve(A[i], B[i], h, tol, 0, 6)
            msph_ok[i] = ok
            if ok:
                msph[i] = x
    return cspm, cspm_ok, fpm, fpm_ok, msph, msph_ok


def scaled_condition(A: np.ndarray, h: float) -> np.ndarray:
    """2-norm condition numbers of the dimensionless systems.

    ``A[r, c]`` carries units ``h^(ord c - ord r)``; rescaling by
    ``h^(ord r - ord c)`` removes the trivial dependence on ``h``.
    """
    n = A.shape[-1]
    o = _ORDERS[:n]
    S = float(h) ** (o[:, None] - o[None, :])
    with np.errstate(all="ignore"):
        c = np.linalg.cond(A * S)
    return np.where(np.isfinite(c), c, np.inf)


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


@dataclass
class _Blocks:
    """Per-chunk solutions, later stitched into full-length arrays."""

    queries: np.ndarray
    std: np.ndarray
    shepard: np.ndarray
    cspm: np.ndarray
    cspm_ok: np.ndarray
    fpm: np.ndarray
    fpm_ok: np.ndarray
    msph: np.ndarray
    msph_ok: np.ndarray
    cond3: np.ndarray
    cond6: np.ndarray | None


def _run_blocks(particles, fields, h, kernel, nt, tol, neighbors, max_pairs, conditioning):
    px = np.ascontiguousarray(particles.x)
    py = np.ascontiguousarray(particles.y)
    vol = particles.volume
    radius = kernel.support_radius(h)
    if neighbors is None:
        chunks = iter_neighbor_chunks(particles, min(radius, 1.0), max_pairs)
    else:
        if neighbors.radius < radius * (1.0 - 1e-12) and neighbors.radius < 1.0:
            raise ValueError("neighbour radius is smaller than the kernel support")
        chunks = [neighbors]
    for nl in chunks:
        A, B, D = _assemble(px, py, vol, fields, nl.queries, nl.offsets, nl.indices,
                            float(h), kernel.code, nt)
        cspm, cspm_ok, fpm, fpm_ok, msph, msph_ok = _solve_all(A, B, D, float(h), float(tol))
        cond3 = scaled_condition(A[:, :3, :3], h) if conditioning else np.full(nl.queries.size, np.nan)
        cond6 = None
        if nt == 6:
            cond6 = scaled_condition(A, h) if conditioning else np.full(nl.queries.size, np.nan)
        yield _Blocks(nl.queries, B[:, :3, :], A[:, 0, 0], cspm, cspm_ok, fpm, fpm_ok,
                      msph, msph_ok, cond3, cond6)


def estimate_many(variants: Sequence[Variant], fields: np.ndarray, particles: ParticleSet,
                  h: float, kernel: SmoothingKernel, neighbors: NeighborList | None = None,
                  pivot_tolerance: float = DEFAULT_PIVOT_TOLERANCE,
                  max_pairs: int = 20_000_000, conditioning: bool = True):
    """Run several schemes on several sampled fields in one neighbour sweep.

    ``fields`` has shape ``(m, N)``.  Returns ``{variant: [SchemeEstimate] * m}``.
    Without ``neighbors`` the sweep is chunked so memory stays bounded.
    """
    variants = [Variant(v) for v in variants]
    fields = np.ascontiguousarray(np.atleast_2d(np.asarray(fields, dtype=float)))
    N = particles.count
    if fields.shape[1] != N:
        raise ValueError("each field must be sampled at every particle")
    if not np.all(np.isfinite(fields)):
        raise ValueError("sampled field values must be finite")
    m = fields.shape[0]
    nt = 6 if Variant.MSPH in variants else 3

    std = np.zeros((N, 3, m))
    shep = np.zeros(N)
    cspm = np.zeros((N, 2, m))
    fpm = np.zeros((N, 3, m))
    msph = np.zeros((N, 6, m))
    ok = {k: np.zeros(N, dtype=bool) for k in ("cspm", "fpm", "msph")}
    cond3 = np.zeros(N)
    cond6 = np.zeros(N)
    for blk in _run_blocks(particles, fields, h, kernel, nt, pivot_tolerance, neighbors,
                           max_pairs, conditioning):
        q = blk.queries
        std[q] = blk.std
        shep[q] = blk.shepard
        cspm[q] = blk.cspm
        fpm[q] = blk.fpm
        msph[q] = blk.msph
        ok["cspm"][q] = blk.cspm_ok
        ok["fpm"][q] = blk.fpm_ok
        ok["msph"][q] = blk.msph_ok
        cond3[q] = blk.cond3
        if blk.cond6 is not None:
            cond6[q] = blk.cond6

    out = {}
    for v in variants:
        ests = []
        for k in range(m):
            s = std[:, :, k]
            if v is Variant.STANDARD:
                est = SchemeEstimate(s[:, 0].copy(), s[:, 1].copy(), s[:, 2].copy())
            elif v is Variant.CSPM:
                good = ok["cspm"]
                grad = np.where(good[:, None], cspm[:, :, k], s[:, 1:3])
                est = SchemeEstimate(s[:, 0] / shep, grad[:, 0].copy(), grad[:, 1].copy(),
                                     fallback=~good)
            elif v is Variant.FPM:
                good = ok["fpm"]
                sol = np.where(good[:, None], fpm[:, :, k], s)
                est = SchemeEstimate(sol[:, 0].copy(), sol[:, 1].copy(), sol[:, 2].copy(),
                                     fallback=~good, condition=cond3.copy())
            else:
                good = ok["msph"]
                first = np.where(ok["fpm"][:, None], fpm[:, :, k], s)
                sec = msph[:, :, k]
                sol = np.where(good[:, None], sec[:, :3], first)
                second = np.where(good[:, None], sec[:, 3:], 0.0)
                est = SchemeEstimate(sol[:, 0].copy(), sol[:, 1].copy(), sol[:, 2].copy(),
                                     second[:, 0].copy(), second[:, 1].copy(), second[:, 2].copy(),
                                     fallback=~good, condition=cond6.copy())
            ests.append(est)
        out[v] = ests
    return out


def _single(variant, field, particles, neighbors, h, kernel, pivot_tolerance):
    return estimate_many([variant], field, particles, h, kernel, neighbors,
                         pivot_tolerance=pivot_tolerance)[variant][0]


def _default_neighbors(particles, h, kernel, neighbors):
    if neighbors is None:
        neighbors = build_neighbor_list(particles, min(kernel.support_radius(h), 1.0))
    return neighbors


def estimate_standard(field, particles: ParticleSet, neighbors: NeighborList | None, h: float,
                      kernel: SmoothingKernel = CUBIC_SPLINE) -> SchemeEstimate:
    """``f_a = sum_b f_b W_ab dV_b`` and ``grad f_a = sum_b f_b grad_a W_ab dV_b``."""
    neighbors = _default_neighbors(particles, h, kernel, neighbors)
    return _single(Variant.STANDARD, field, particles, neighbors, h, kernel,
                   DEFAULT_PIVOT_TOLERANCE)


def estimate_cspm(field, particles: ParticleSet, neighbors: NeighborList | None, h: float,
                  kernel: SmoothingKernel = CUBIC_SPLINE,
                  pivot_tolerance: float = DEFAULT_PIVOT_TOLERANCE) -> SchemeEstimate:
    """Shepard-normalised value plus a coupled 2x2 first-order gradient system."""
    neighbors = _default_neighbors(particles, h, kernel, neighbors)
    return _single(Variant.CSPM, field, particles, neighbors, h, kernel, pivot_tolerance)


def estimate_fpm(field, particles: ParticleSet, neighbors: NeighborList | None, h: float,
                 kernel: SmoothingKernel = CUBIC_SPLINE,
                 pivot_tolerance: float = DEFAULT_PIVOT_TOLERANCE) -> SchemeEstimate:
    """Value and gradient from the simultaneous 3x3 first-order system."""
    neighbors = _default_neighbors(particles, h, kernel, neighbors)
    return _single(Variant.FPM, field, particles, neighbors, h, kernel, pivot_tolerance)


def estimate_msph(field, particles: ParticleSet, neighbors: NeighborList | None, h: float,
                  kernel: SmoothingKernel = CUBIC_SPLINE,
                  pivot_tolerance: float = DEFAULT_PIVOT_TOLERANCE) -> SchemeEstimate:
    """Value, gradient and Hessian from the 6x6 second-order system."""
    neighbors = _default_neighbors(particles, h, kernel, neighbors)
    return _single(Variant.MSPH, field, particles, neighbors, h, kernel, pivot_tolerance)


def estimate(config: SchemeConfig, field, particles: ParticleSet, h: float,
             neighbors: NeighborList | None = None) -> SchemeEstimate:
    neighbors = _default_neighbors(particles, h, config.kernel, neighbors)
    return _single(config.variant, field, particles, neighbors, h, config.kernel,
                   config.pivot_tolerance)
