"""2D smoothing kernels and their derivatives.

Two families are provided:

* ``CUBIC_SPLINE``: the cubic B-spline, support radius ``2h``,
  normalised with ``15 / (7 pi h^2)``.
* ``WENDLAND_C4``: the Wendland C4 function, support radius ``h``,
  normalised with ``9 / (pi h^2)``.

Both are written as ``W(r, h) = C / h^2 * w(r / h)``.  The scalar
evaluators are compiled with numba so the particle loops in
:mod:`sphlab.schemes` and :mod:`sphlab.consistency` can call them
directly; the public functions accept numpy arrays and broadcast.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

CUBIC_CODE = 0
WENDLAND_CODE = 1

_CUBIC_NORM = 15.0 / (7.0 * math.pi)
_WENDLAND_NORM = 9.0 / math.pi

SUPPORTED_MOMENTS = (0, 1, 2, 3, 4)


class KernelFamily(enum.Enum):
    CUBIC_SPLINE = CUBIC_CODE
    WENDLAND_C4 = WENDLAND_CODE


@dataclass(frozen=True)
class SmoothingKernel:
    """A kernel family together with its support factor ``k``.

    The kernel vanishes for ``r >= k * h``.
    """

    family: KernelFamily

    @property
    def code(self) -> int:
        return self.family.value

    @property
    def support_factor(self) -> float:
        return 2.0 if self.family is KernelFamily.CUBIC_SPLINE else 1.0

    @property
    def name(self) -> str:
        return "cubic_spline" if self.family is KernelFamily.CUBIC_SPLINE else "wendland_c4"

    def support_radius(self, h: float) -> float:
        return self.support_factor * h

    def __call__(self, r, h):
        return kernel_value(self, r, h)


CUBIC_SPLINE = SmoothingKernel(KernelFamily.CUBIC_SPLINE)
WENDLAND_C4 = SmoothingKernel(KernelFamily.WENDLAND_C4)


def kernel_by_name(name: str) -> SmoothingKernel:
    key = name.strip().lower().replace("-", "_")
    if key in ("cubic_spline", "cubic", "b_spline"):
        return CUBIC_SPLINE
    if key in ("wendland_c4", "wendland", "c4"):
        return WENDLAND_C4
    raise ValueError(f"unknown kernel {name!r}")


# ---------------------------------------------------------------------------
# compiled scalar evaluators
# ---------------------------------------------------------------------------
# Dimensionless shape functions in q = r / h:
#   w(q), w'(q) / q and w''(q).
# w'(q)/q is written out explicitly so that the r -> 0 limit is exact.


@njit(cache=True)
def _shape(code, q):
    """Return (w, w'/q, w'') at dimensionless radius q >= 0."""
    if code == CUBIC_CODE:
        if q < 1.0:
            w = 2.0 / 3.0 - q * q + 0.5 * q * q * q
            dw_q = -2.0 + 1.5 * q
            d2w = -2.0 + 3.0 * q
        elif q < 2.0:
            t = 2.0 - q
            w = t * t * t / 6.0
            dw_q = -0.5 * t * t / q
            d2w = t
        else:
            return 0.0, 0.0, 0.0
        return _CUBIC_NORM * w, _CUBIC_NORM * dw_q, _CUBIC_NORM * d2w
    if q < 1.0:
        t = 1.0 - q
        t4 = t * t * t * t
        t5 = t4 * t
        w = t5 * t * (1.0 + 6.0 * q + 35.0 / 3.0 * q * q)
        dw_q = -56.0 / 3.0 * t5 * (1.0 + 5.0 * q)
        d2w = -56.0 / 3.0 * t4 * (1.0 + 4.0 * q - 35.0 * q * q)
        return _WENDLAND_NORM * w, _WENDLAND_NORM * dw_q, _WENDLAND_NORM * d2w
    return 0.0, 0.0, 0.0


@njit(cache=True)
def w_scalar(code, r, h):
    w, _, _ = _shape(code, r / h)
    return w / (h * h)


@njit(cache=True)
def w_derivs_scalar(code, dx, dy, h):
    """Kernel value and derivatives with respect to ``dx, dy``.

    ``(dx, dy)`` is the separation ``x_eval - x_particle``, so the first
    derivatives are the gradient with respect to the evaluation point.
    """
    r2 = dx * dx + dy * dy
    r = math.sqrt(r2)
    w, dw_q, d2w = _shape(code, r / h)
    if w == 0.0 and dw_q == 0.0 and d2w == 0.0:
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    ih2 = 1.0 / (h * h)
    ih4 = ih2 * ih2
    g = dw_q * ih4  # W'(r) / r
    wx = g * dx
    wy = g * dy
    if r2 > 0.0:
        c = (d2w * ih4 - g) / r2
        wxx = g + c * dx * dx
        wyy = g + c * dy * dy
        wxy = c * dx * dy
    else:
        # W'' - W'/r -> 0 at the origin for both families
        wxx = g
        wyy = g
        wxy = 0.0
    return w * ih2, wx, wy, wxx, wxy, wyy


@njit(cache=True)
def _value_loop(code, r, h, out):
    for i in range(r.size):
        out[i] = w_scalar(code, r[i], h[i])


@njit(cache=True)
def _derivs_loop(code, dx, dy, h, out):
    for i in range(dx.size):
        out[0, i], out[1, i], out[2, i], out[3, i], out[4, i], out[5, i] = w_derivs_scalar(
            code, dx[i], dy[i], h[i]
        )


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelDerivatives:
    w: np.ndarray | float
    wx: np.ndarray | float
    wy: np.ndarray | float
    wxx: np.ndarray | float
    wxy: np.ndarray | float
    wyy: np.ndarray | float

    def as_tuple(self):
        return (self.w, self.wx, self.wy, self.wxx, self.wxy, self.wyy)


def _check_h(h):
    h = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(h)) or np.any(h <= 0.0):
        raise ValueError("smoothing length must be finite and positive")
    return h


def _unwrap(arr, scalar):
    return float(arr.reshape(-1)[0]) if scalar else arr


def kernel_value(kernel: SmoothingKernel, r, h):
    """Kernel value ``W(r, h)`` in 1/length^2 (exactly 0 for ``r >= k h``)."""
    h = _check_h(h)
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)) or np.any(r < 0.0):
        raise ValueError("r must be finite and non-negative")
    scalar = r.ndim == 0 and h.ndim == 0
    rb, hb = np.broadcast_arrays(r, h)
    out = np.empty(rb.shape)
    _value_loop(kernel.code, np.ascontiguousarray(rb).ravel(), np.ascontiguousarray(hb).ravel(),
                out.reshape(-1))
    return _unwrap(out, scalar)


def kernel_derivatives(kernel: SmoothingKernel, dx, dy, h) -> KernelDerivatives:
    """Value, gradient and Hessian of ``W`` at separation ``(dx, dy)``.

    The r -> 0 limits are analytic: zero gradient, ``wxx = wyy = W''(0)``
    and ``wxy = 0``.
    """
    h = _check_h(h)
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dy))):
        raise ValueError("separation must be finite")
    scalar = dx.ndim == 0 and dy.ndim == 0 and h.ndim == 0
    xb, yb, hb = np.broadcast_arrays(dx, dy, h)
    out = np.empty((6,) + xb.shape)
    _derivs_loop(kernel.code, np.ascontiguousarray(xb).ravel(), np.ascontiguousarray(yb).ravel(),
                 np.ascontiguousarray(hb).ravel(), out.reshape(6, -1))
    return KernelDerivatives(*(_unwrap(out[i], scalar) for i in range(6)))


def continuous_moment(kernel: SmoothingKernel, l: int, h: float, panels: int = 100_000,
                      angles: int = 64) -> float:
    """Continuous moment ``integral (x - x')^l W(|x - x'|, h) dA'``.

    Evaluated in polar coordinates around the evaluation point: a composite
    midpoint rule with ``panels`` radial panels on ``[0, k h]`` and a
    periodic trapezoid rule with ``angles`` nodes in the angle.  Only the
    x-component is returned; by radial symmetry the y-moment is identical.
    """
    if l not in SUPPORTED_MOMENTS:
        raise ValueError(f"unsupported moment order {l}; expected one of {SUPPORTED_MOMENTS}")
    h = float(_check_h(h))
    if panels < 10_000:
        raise ValueError("at least 10^4 radial panels are required")
    R = kernel.support_radius(h)
    dr = R / panels
    r = (np.arange(panels) + 0.5) * dr
    radial = r ** (l + 1) * kernel_value(kernel, r, h)
    theta = 2.0 * np.pi * np.arange(angles) / angles
    angular = np.cos(theta) ** l
    # (x' - x) = -r cos(theta); sign matters only for odd l, which vanish
    return float((-1.0) ** l * radial.sum() * dr * angular.sum() * (2.0 * np.pi / angles))


def scaling_relation_check(kernel: SmoothingKernel, r: float, h: float) -> float:
    """Defect ``|W(h r, h) - W(r, 1) / h^2|`` of the 2D scaling relation."""
    h = float(_check_h(h))
    if not math.isfinite(r) or r < 0.0:
        raise ValueError("r must be finite and non-negative")
    return abs(kernel_value(kernel, h * r, h) - kernel_value(kernel, r, 1.0) / (h * h))
