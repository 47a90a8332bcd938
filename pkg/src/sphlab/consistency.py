"""Discrete consistency diagnostics of a particle set under a kernel.

For particle ``a`` with neighbours ``b`` and ``d = x_b - x_a``:

* ``m0 = sum W_ab dV_b``                       (should be 1)
* ``m1 = sum d W_ab dV_b``                     (should be 0)
* ``gradient_moment[i, j] = sum d_i (grad_a W_ab)_j dV_b``   (should be I)
* ``gradient_zeroth = sum grad_a W_ab dV_b``    (should be 0)
* ``sigma2 = sum |d|^2 W_ab dV_b - |m1|^2``    (intrinsic diffusion, > 0)

With these conventions the standard SPH gradient of ``g . x`` is exactly
``gradient_moment^T g + (g . x_a) gradient_zeroth``; the second term
vanishes wherever the support is not truncated.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from numba import njit, prange

from .io import atomic_write_text, fmt_float
from .kernels import SmoothingKernel, w_derivs_scalar
from .particles import NeighborList, ParticleSet, iter_neighbor_chunks
from .stats import SlopeFit, fit_loglog_slope

REPORT_HEADER = "particle,x,y,m0,m1x,m1y,g11,g12,g21,g22,sigma2"


class EmptySupportError(ValueError):
    """All kernel weights of a particle are zero."""


@dataclass(eq=False)
class ConsistencyReport:
    x: np.ndarray
    y: np.ndarray
    m0: np.ndarray
    m1: np.ndarray               # (N, 2)
    gradient_moment: np.ndarray  # (N, 2, 2)
    gradient_zeroth: np.ndarray  # (N, 2)
    sigma2: np.ndarray
    interior: np.ndarray         # bool mask, edge distance > k h

    @property
    def count(self) -> int:
        return self.m0.size

    def _stats(self, values, mask=None):
        v = values if mask is None else values[mask]
        if v.size == 0:
            return float("nan"), float("nan")
        return float(v.mean()), float(v.max())

    def summary(self) -> dict:
        m0_err = np.abs(self.m0 - 1.0)
        m1_norm = np.hypot(self.m1[:, 0], self.m1[:, 1])
        g_err = np.linalg.norm(self.gradient_moment - np.eye(2), ord=2, axis=(1, 2))
        out = {}
        for name, vals in (("m0_err", m0_err), ("m1", m1_norm), ("grad_moment_err", g_err)):
            out[f"mean_{name}"], out[f"max_{name}"] = self._stats(vals)
            out[f"interior_mean_{name}"], out[f"interior_max_{name}"] = self._stats(vals, self.interior)
        return out

    def to_csv(self, path) -> None:
        lines = [REPORT_HEADER]
        g = self.gradient_moment
        for a in range(self.count):
            row = [str(a), self.x[a], self.y[a], self.m0[a], self.m1[a, 0], self.m1[a, 1],
                   g[a, 0, 0], g[a, 0, 1], g[a, 1, 0], g[a, 1, 1], self.sigma2[a]]
            lines.append(",".join([row[0]] + [fmt_float(v) for v in row[1:]]))
        atomic_write_text(Path(path), "\n".join(lines) + "\n")


@njit(cache=True, parallel=True)
def _moments(px, py, vol, queries, offsets, nbr, h, code):
    nq = queries.size
    out = np.zeros((nq, 10))
    for i in prange(nq):
        a = queries[i]
        m0 = 0.0
        m1x = 0.0
        m1y = 0.0
        g11 = 0.0
        g12 = 0.0
        g21 = 0.0
        g22 = 0.0
        z1 = 0.0
        z2 = 0.0
        s2 = 0.0
        for p in range(offsets[i], offsets[i + 1]):
            b = nbr[p]
            dx = px[b] - px[a]
            dy = py[b] - py[a]
            w, wx, wy, _, _, _ = w_derivs_scalar(code, -dx, -dy, h)
            v = vol[b]
            m0 += w * v
            m1x += dx * w * v
            m1y += dy * w * v
            g11 += dx * wx * v
            g12 += dx * wy * v
            g21 += dy * wx * v
            g22 += dy * wy * v
            z1 += wx * v
            z2 += wy * v
            s2 += (dx * dx + dy * dy) * w * v
        out[i, 0] = m0
        out[i, 1] = m1x
        out[i, 2] = m1y
        out[i, 3] = g11
        out[i, 4] = g12
        out[i, 5] = g21
        out[i, 6] = g22
        out[i, 7] = z1
        out[i, 8] = z2
        out[i, 9] = s2 - (m1x * m1x + m1y * m1y)
    return out


def discrete_moments(particles: ParticleSet, neighbors: NeighborList | None,
                     kernel: SmoothingKernel, h: float) -> ConsistencyReport:
    """Per-particle normalisation, first and gradient moments and sigma^2."""
    radius = kernel.support_radius(h)
    if neighbors is None:
        chunks = iter_neighbor_chunks(particles, min(radius, 1.0))
    else:
        if neighbors.radius < radius * (1.0 - 1e-12) and neighbors.radius < 1.0:
            raise ValueError("neighbour radius is smaller than the kernel support")
        chunks = [neighbors]
    px = np.ascontiguousarray(particles.x)
    py = np.ascontiguousarray(particles.y)
    vol = particles.volume
    res = np.zeros((particles.count, 10))
    for nl in chunks:
        res[nl.queries] = _moments(px, py, vol, nl.queries, nl.offsets, nl.indices,
                                   float(h), kernel.code)
    return ConsistencyReport(
        x=px.copy(), y=py.copy(), m0=res[:, 0], m1=res[:, 1:3].copy(),
        gradient_moment=res[:, 3:7].reshape(-1, 2, 2).copy(),
        gradient_zeroth=res[:, 7:9].copy(), sigma2=res[:, 9].copy(),
        interior=particles.interior_mask(radius),
    )


def m0_convergence_trend(points: Iterable[tuple[float, float]]) -> SlopeFit:
    """Log-log fit of mean interior ``|m0 - 1|`` against neighbour count."""
    pts = list(points)
    if len(pts) < 4:
        raise ValueError("need at least four ladder points")
    return fit_loglog_slope(pts)


def shepard_normalize(weights, volumes) -> np.ndarray:
    """Scale ``weights`` so that ``sum(weights * volumes) == 1``."""
    w = np.asarray(weights, dtype=float)
    v = np.broadcast_to(np.asarray(volumes, dtype=float), w.shape)
    total = float(np.sum(w * v))
    if not total > 0.0:
        raise EmptySupportError("kernel weights sum to zero")
    return w / total
