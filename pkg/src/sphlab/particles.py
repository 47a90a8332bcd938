"""Particle distributions on the unit square and fixed-radius neighbour search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from numba import njit

DEFAULT_JITTER = 0.45


class EmptyInteriorError(ValueError):
    """No particle is farther than the radius from every edge."""


@dataclass(frozen=True)
class Provenance:
    kind: str  # "regular" or "jittered"
    seed: int | None = None
    amplitude_fraction: float = 0.0

    def label(self) -> str:
        if self.kind == "regular":
            return "regular"
        return f"jittered(a={self.amplitude_fraction:g},seed={self.seed})"


@dataclass(frozen=True, eq=False)
class ParticleSet:
    """Particle positions in ``[0, 1]^2`` with uniform volume ``1 / N``."""

    positions: np.ndarray
    provenance: Provenance = field(default_factory=lambda: Provenance("regular"))

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] == 0:
            raise ValueError("positions must have shape (N, 2) with N >= 1")
        if np.any(pos < 0.0) or np.any(pos > 1.0):
            raise ValueError("positions must lie in the unit square")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.positions[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.positions[:, 1]

    @property
    def volume(self) -> np.ndarray:
        return np.full(self.count, 1.0 / self.count)

    @property
    def spacing(self) -> float:
        return 1.0 / math.sqrt(self.count)

    def edge_distance(self) -> np.ndarray:
        p = self.positions
        return np.minimum(np.minimum(p[:, 0], 1.0 - p[:, 0]), np.minimum(p[:, 1], 1.0 - p[:, 1]))

    def interior_mask(self, radius: float) -> np.ndarray:
        return self.edge_distance() > radius

    def to_csv(self, path) -> None:
        """Write an ``x,y`` CSV with 17 significant digits."""
        from .io import atomic_write_text

        lines = ["x,y"]
        lines += [f"{x:.17g},{y:.17g}" for x, y in self.positions]
        atomic_write_text(Path(path), "\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "ParticleSet":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data, Provenance("file"))


def lattice_side(N: int) -> int:
    s = math.isqrt(int(N))
    if N != int(N) or s * s != N or s < 2:
        raise ValueError(f"N={N} is not a perfect square s^2 with s >= 2")
    return s


def generate_regular(N: int) -> ParticleSet:
    """``s x s`` lattice of cell centres, ``s = sqrt(N)``."""
    s = lattice_side(N)
    c = (np.arange(s) + 0.5) / s
    xx, yy = np.meshgrid(c, c, indexing="xy")
    return ParticleSet(np.column_stack([xx.ravel(), yy.ravel()]), Provenance("regular"))


def generate_irregular(N: int, amplitude_fraction: float = DEFAULT_JITTER,
                       seed: int = 42) -> ParticleSet:
    """Lattice perturbed by uniform offsets in ``[-a d, a d]`` per axis.

    ``d = 1 / sqrt(N)`` is the lattice spacing, so the same
    ``amplitude_fraction`` gives the same degree of disorder at every
    resolution.  Uses numpy's PCG64 generator seeded with ``seed``.
    """
    if not 0.0 <= amplitude_fraction < 0.5:
        raise ValueError("amplitude_fraction must lie in [0, 0.5)")
    base = generate_regular(N)
    if amplitude_fraction == 0.0:
        return ParticleSet(base.positions, Provenance("jittered", seed, 0.0))
    rng = np.random.default_rng(seed)
    amp = amplitude_fraction * base.spacing
    pos = base.positions + rng.uniform(-amp, amp, size=base.positions.shape)
    np.clip(pos, 0.0, 1.0, out=pos)
    return ParticleSet(pos, Provenance("jittered", int(seed), float(amplitude_fraction)))


# ---------------------------------------------------------------------------
# cell grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CellGrid:
    ncell: int
    order: np.ndarray       # particle indices sorted by cell id
    cell_start: np.ndarray  # CSR offsets into ``order``, length ncell^2 + 1


def build_cell_grid(particles: ParticleSet, radius: float) -> CellGrid:
    if not radius > 0.0:
        raise ValueError("radius must be positive")
    # cells may be wider than the radius but never narrower
    cap = max(1, 2 * math.isqrt(particles.count) + 1)
    ncell = max(1, min(int(math.floor(1.0 / radius)), cap))
    pos = particles.positions
    ix = np.minimum((pos[:, 0] * ncell).astype(np.int64), ncell - 1)
    iy = np.minimum((pos[:, 1] * ncell).astype(np.int64), ncell - 1)
    cid = iy * ncell + ix
    order = np.argsort(cid, kind="stable").astype(np.int64)
    counts = np.bincount(cid, minlength=ncell * ncell)
    cell_start = np.zeros(ncell * ncell + 1, dtype=np.int64)
    np.cumsum(counts, out=cell_start[1:])
    return CellGrid(ncell, order, cell_start)


@njit(cache=True)
def _count_rows(px, py, order, cell_start, ncell, radius, queries):
    r2 = radius * radius
    counts = np.zeros(queries.size, dtype=np.int64)
    for i in range(queries.size):
        a = queries[i]
        cx = min(int(px[a] * ncell), ncell - 1)
        cy = min(int(py[a] * ncell), ncell - 1)
        c = 0
        for jy in range(max(cy - 1, 0), min(cy + 2, ncell)):
            for jx in range(max(cx - 1, 0), min(cx + 2, ncell)):
                cell = jy * ncell + jx
                for p in range(cell_start[cell], cell_start[cell + 1]):
                    b = order[p]
                    dx = px[b] - px[a]
                    dy = py[b] - py[a]
                    if dx * dx + dy * dy < r2:
                        c += 1
        counts[i] = c
    return counts


@njit(cache=True)
def _fill_rows(px, py, order, cell_start, ncell, radius, queries, offsets, out):
    r2 = radius * radius
    for i in range(queries.size):
        a = queries[i]
        cx = min(int(px[a] * ncell), ncell - 1)
        cy = min(int(py[a] * ncell), ncell - 1)
        k = offsets[i]
        for jy in range(max(cy - 1, 0), min(cy + 2, ncell)):
            for jx in range(max(cx - 1, 0), min(cx + 2, ncell)):
                cell = jy * ncell + jx
                for p in range(cell_start[cell], cell_start[cell + 1]):
                    b = order[p]
                    dx = px[b] - px[a]
                    dy = py[b] - py[a]
                    if dx * dx + dy * dy < r2:
                        out[k] = b
                        k += 1
        # ascending particle index inside each row
        out[offsets[i]:k].sort()


@dataclass(frozen=True, eq=False)
class NeighborList:
    """CSR adjacency: neighbours of ``queries[i]`` are ``indices[offsets[i]:offsets[i+1]]``.

    A full list has ``queries == arange(N)``.  Rows are sorted by particle
    index and every particle is its own neighbour.
    """

    radius: float
    offsets: np.ndarray
    indices: np.ndarray
    queries: np.ndarray

    @property
    def total_pairs(self) -> int:
        return int(self.offsets[-1])

    @property
    def mean_neighbors(self) -> float:
        return self.total_pairs / self.queries.size

    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    def neighbors_of(self, i: int) -> np.ndarray:
        return self.indices[self.offsets[i]:self.offsets[i + 1]]


def _build_rows(particles: ParticleSet, grid: CellGrid, radius: float,
                queries: np.ndarray) -> NeighborList:
    px = np.ascontiguousarray(particles.x)
    py = np.ascontiguousarray(particles.y)
    counts = _count_rows(px, py, grid.order, grid.cell_start, grid.ncell, radius, queries)
    offsets = np.zeros(queries.size + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    out = np.empty(offsets[-1], dtype=np.int64)
    _fill_rows(px, py, grid.order, grid.cell_start, grid.ncell, radius, queries, offsets, out)
    return NeighborList(float(radius), offsets, out, queries)


def build_neighbor_list(particles: ParticleSet, radius: float) -> NeighborList:
    """All pairs with ``|x_a - x_b| < radius`` via a uniform cell grid."""
    if not (0.0 < radius <= 1.0):
        raise ValueError("radius must lie in (0, 1]")
    grid = build_cell_grid(particles, radius)
    return _build_rows(particles, grid, radius, np.arange(particles.count, dtype=np.int64))


def iter_neighbor_chunks(particles: ParticleSet, radius: float,
                         max_pairs: int = 20_000_000) -> Iterator[NeighborList]:
    """Partial neighbour lists over consecutive particle ranges.

    Keeps memory bounded when the neighbour count is in the thousands.
    """
    if not (0.0 < radius <= 1.0):
        raise ValueError("radius must lie in (0, 1]")
    grid = build_cell_grid(particles, radius)
    n_est = max(1.0, math.pi * radius * radius * particles.count)
    step = max(1, int(max_pairs // n_est))
    for start in range(0, particles.count, step):
        stop = min(particles.count, start + step)
        yield _build_rows(particles, grid, radius, np.arange(start, stop, dtype=np.int64))


def mean_interior_neighbors(particles: ParticleSet, radius: float) -> float:
    """Mean neighbour count (self included) over particles farther than
    ``radius`` from every edge.

    Raises :class:`EmptyInteriorError` when no particle qualifies.
    """
    if not (0.0 < radius <= 1.0):
        raise ValueError("radius must lie in (0, 1]")
    interior = np.flatnonzero(particles.interior_mask(radius)).astype(np.int64)
    if interior.size == 0:
        raise EmptyInteriorError(f"no interior particles for radius {radius}")
    grid = build_cell_grid(particles, radius)
    counts = _count_rows(np.ascontiguousarray(particles.x), np.ascontiguousarray(particles.y),
                         grid.order, grid.cell_start, grid.ncell, radius, interior)
    return float(counts.mean())
