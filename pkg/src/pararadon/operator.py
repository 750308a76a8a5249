"""Convolution with the parabolic surface measure on R^d.

The forward map is Tf(x) = int_{R^{d-1}} f(x' - t, x_d - |t|^2) dt; the
adjoint is T*g(y) = int g(y' + t, y_d + |t|^2) dt.  The t integral is a
midpoint rule over the box of shifts that can move output points into
the input box (exact truncation for compactly supported f), and f is
sampled multilinearly.  For a fixed shift the sample points form a
translated tensor grid, so every t term factors into one-dimensional
interpolation passes along each axis; the discrete adjoint transposes
exactly those passes, making <g, Tf> = <T*g, f> hold to rounding.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .grid import GridFunction, GridSpec
from .norms import ExponentPair, lp_norm

ADJOINT_MODES = ("discrete", "continuum")


def _resolve_mode(mode: str) -> str:
    if mode == "discrete-transpose":
        return "discrete"
    if mode not in ADJOINT_MODES:
        raise ValueError(f"adjoint_mode must be one of {ADJOINT_MODES}")
    return mode


@dataclass(frozen=True)
class TransformPlan:
    """Quadrature plan tying an input grid, an output grid, and a t-grid.

    The t-box per x'-axis i is [out_lo'_i - in_hi'_i, out_hi'_i - in_lo'_i],
    capped by |t_i| <= sqrt(out_hi_d - in_lo_d) since larger shifts drop
    below the input box in the last coordinate.
    """

    input: GridSpec
    output: GridSpec = None
    t_step: float | tuple = None
    adjoint_mode: str = "discrete"
    t_axes: tuple[np.ndarray, ...] = field(init=False)
    t_weight: float = field(init=False)

    def __post_init__(self):
        if self.output is None:
            object.__setattr__(self, "output", self.input)
        if self.input.dim != self.output.dim:
            raise ValueError("input and output grids must share the dimension")
        object.__setattr__(self, "adjoint_mode", _resolve_mode(self.adjoint_mode))
        d = self.input.dim
        steps = self.t_step
        if steps is None:
            steps = tuple(self.input.widths[:-1])
        elif np.isscalar(steps):
            steps = (float(steps),) * (d - 1)
        else:
            steps = tuple(float(s) for s in steps)
        if len(steps) != d - 1:
            raise ValueError("need one t step per x' axis")
        for s, h in zip(steps, self.input.widths[:-1]):
            if not (0 < s <= h * (1 + 1e-12)):
                raise ValueError(
                    f"t step {s} must be positive and at most the input cell width {h}"
                )
        object.__setattr__(self, "t_step", steps)

        in_lo, in_hi = self.input.lo, self.input.hi
        out_lo, out_hi = self.output.lo, self.output.hi
        smax = out_hi[-1] - in_lo[-1]
        axes = []
        weight = 1.0
        for i in range(d - 1):
            lo_t = out_lo[i] - in_hi[i]
            hi_t = out_hi[i] - in_lo[i]
            if smax > 0:
                lo_t = max(lo_t, -np.sqrt(smax))
                hi_t = min(hi_t, np.sqrt(smax))
            if smax <= 0 or hi_t <= lo_t:
                axes = [np.empty(0) for _ in range(d - 1)]
                weight = 0.0
                break
            n = int(np.ceil((hi_t - lo_t) / steps[i]))
            h = (hi_t - lo_t) / n
            axes.append(lo_t + (np.arange(n) + 0.5) * h)
            weight *= h
        object.__setattr__(self, "t_axes", tuple(axes))
        object.__setattr__(self, "t_weight", weight)

    @property
    def dim(self) -> int:
        return self.input.dim

    def t_count(self) -> int:
        if self.t_weight == 0.0:
            return 0
        return int(np.prod([len(a) for a in self.t_axes]))


# -- one-dimensional interpolation passes ------------------------------

def _axis_stencil(src: GridSpec, axis: int, targets: np.ndarray):
    """Two-point interpolation stencil of the axis samples at `targets`.

    Returns (i0, w1): value(c) = (1 - w1) v[i0] + w1 v[i0 + 1], indices
    outside [0, n) contributing zero (ghost cells).
    """
    lo, hi = src.bounds[axis]
    h = src.widths[axis]
    pos = (targets - lo) / h - 0.5
    i0 = np.floor(pos).astype(np.int64)
    return i0, pos - i0


def _is_unit_progression(i0: np.ndarray, w1: np.ndarray) -> bool:
    """True when the stencil is a constant offset (targets on the source
    spacing), which unlocks slice arithmetic instead of gather/scatter."""
    if len(i0) < 2:
        return False
    return bool(np.all(np.diff(i0) == 1) and np.ptp(w1) == 0.0)


def _overlap(m: int, n_in: int, start: int):
    """Index window [a, b) of targets j with 0 <= j + start < n_in."""
    a = max(0, -start)
    b = min(m, n_in - start)
    return a, max(a, b)


def _apply_axis(values: np.ndarray, axis: int, i0: np.ndarray, w1: np.ndarray,
                n_in: int) -> np.ndarray:
    v = np.moveaxis(values, axis, 0)
    flat = v.reshape(n_in, -1)
    m = len(i0)
    out = np.zeros((m, flat.shape[1]))
    if _is_unit_progression(i0, w1):
        s = int(i0[0])
        c0, c1 = 1.0 - w1[0], w1[0]
        a, b = _overlap(m, n_in, s)
        if b > a:
            out[a:b] = c0 * flat[a + s:b + s]
        a, b = _overlap(m, n_in, s + 1)
        if b > a:
            out[a:b] += c1 * flat[a + s + 1:b + s + 1]
    else:
        ok0 = (i0 >= 0) & (i0 < n_in)
        ok1 = (i0 + 1 >= 0) & (i0 + 1 < n_in)
        if np.any(ok0):
            out[ok0] = ((1.0 - w1)[ok0, None]) * flat[i0[ok0]]
        if np.any(ok1):
            out[ok1] += (w1[ok1, None]) * flat[i0[ok1] + 1]
    shape = list(v.shape)
    shape[0] = m
    return np.moveaxis(out.reshape(shape), 0, axis)


def _apply_axis_transpose(values: np.ndarray, axis: int, i0: np.ndarray,
                          w1: np.ndarray, n_in: int) -> np.ndarray:
    """Exact transpose of `_apply_axis` (scatter with the same weights)."""
    g = np.moveaxis(values, axis, 0)
    flat = g.reshape(g.shape[0], -1)
    m = flat.shape[0]
    out = np.zeros((n_in, flat.shape[1]))
    if _is_unit_progression(i0, w1):
        s = int(i0[0])
        c0, c1 = 1.0 - w1[0], w1[0]
        a, b = _overlap(m, n_in, s)
        if b > a:
            out[a + s:b + s] += c0 * flat[a:b]
        a, b = _overlap(m, n_in, s + 1)
        if b > a:
            out[a + s + 1:b + s + 1] += c1 * flat[a:b]
    else:
        ok0 = (i0 >= 0) & (i0 < n_in)
        ok1 = (i0 + 1 >= 0) & (i0 + 1 < n_in)
        if np.any(ok0):
            np.add.at(out, i0[ok0], ((1.0 - w1)[ok0, None]) * flat[ok0])
        if np.any(ok1):
            np.add.at(out, i0[ok1] + 1, (w1[ok1, None]) * flat[ok1])
    shape = list(g.shape)
    shape[0] = n_in
    return np.moveaxis(out.reshape(shape), 0, axis)


def _iter_shifts(plan: TransformPlan):
    """Yield (t vector, |t|^2) over the plan's t-grid."""
    for combo in itertools.product(*plan.t_axes):
        t = np.array(combo)
        yield t, float(t @ t)


# -- the transform ------------------------------------------------------

def forward_transform(f: GridFunction, plan: TransformPlan) -> GridFunction:
    """Tf on the plan's output grid."""
    if f.spec != plan.input:
        raise ValueError("function grid does not match the plan input grid")
    d = plan.dim
    out_spec = plan.output
    acc = np.zeros(out_spec.shape)
    if plan.t_weight == 0.0:
        return GridFunction(out_spec, acc)
    out_mids = [out_spec.axis_midpoints(i) for i in range(d)]
    counts_in = plan.input.counts
    for t, tsq in _iter_shifts(plan):
        g = f.values
        for i in range(d - 1):
            i0, w1 = _axis_stencil(plan.input, i, out_mids[i] - t[i])
            g = _apply_axis(g, i, i0, w1, counts_in[i])
        i0, w1 = _axis_stencil(plan.input, d - 1, out_mids[d - 1] - tsq)
        g = _apply_axis(g, d - 1, i0, w1, counts_in[d - 1])
        acc += g
    acc *= plan.t_weight
    # sums of products of nonnegative terms stay nonnegative, so signedness
    # only ever comes in through a signed input
    return GridFunction(out_spec, acc, allow_negative=bool(np.any(f.values < 0)))


def forward_at_points(f: GridFunction, points: np.ndarray, plan: TransformPlan) -> np.ndarray:
    """Tf evaluated at arbitrary points with the plan's t-quadrature."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(len(pts))
    if plan.t_weight == 0.0:
        return out
    for t, tsq in _iter_shifts(plan):
        shifted = pts.copy()
        shifted[:, :-1] -= t
        shifted[:, -1] -= tsq
        out += f.sample_at(shifted)
    return out * plan.t_weight


def adjoint_transform(g: GridFunction, plan: TransformPlan, mode: str | None = None) -> GridFunction:
    """T*g on the plan's input grid.

    ``discrete`` applies the exact matrix transpose of the forward
    quadrature (default); ``continuum`` discretizes the integral
    T*g(y) = int g(y' + t, y_d + |t|^2) dt directly.
    """
    if g.spec != plan.output:
        raise ValueError("function grid does not match the plan output grid")
    mode = _resolve_mode(mode if mode is not None else plan.adjoint_mode)
    d = plan.dim
    in_spec = plan.input
    acc = np.zeros(in_spec.shape)
    if plan.t_weight == 0.0:
        return GridFunction(in_spec, acc)
    if mode == "discrete":
        out_mids = [plan.output.axis_midpoints(i) for i in range(d)]
        counts_in = in_spec.counts
        for t, tsq in _iter_shifts(plan):
            h = g.values
            i0, w1 = _axis_stencil(in_spec, d - 1, out_mids[d - 1] - tsq)
            h = _apply_axis_transpose(h, d - 1, i0, w1, counts_in[d - 1])
            for i in range(d - 2, -1, -1):
                i0, w1 = _axis_stencil(in_spec, i, out_mids[i] - t[i])
                h = _apply_axis_transpose(h, i, i0, w1, counts_in[i])
            acc += h
        # transpose of the L^2(out) -> L^2(in) pairing, not the bare matrix
        acc *= plan.t_weight * (plan.output.cell_volume / in_spec.cell_volume)
    else:
        in_mids = [in_spec.axis_midpoints(i) for i in range(d)]
        counts_out = plan.output.counts
        for t, tsq in _iter_shifts(plan):
            h = g.values
            for i in range(d - 1):
                i0, w1 = _axis_stencil(plan.output, i, in_mids[i] + t[i])
                h = _apply_axis(h, i, i0, w1, counts_out[i])
            i0, w1 = _axis_stencil(plan.output, d - 1, in_mids[d - 1] + tsq)
            h = _apply_axis(h, d - 1, i0, w1, counts_out[d - 1])
            acc += h
        acc *= plan.t_weight
    return GridFunction(in_spec, acc, allow_negative=bool(np.any(g.values < 0)))


def bilinear_form(g: GridFunction, f: GridFunction, plan: TransformPlan) -> float:
    """<g, Tf> with the output grid's quadrature."""
    tf = forward_transform(f, plan)
    return float(np.sum(g.values * tf.values)) * plan.output.cell_volume


def inner(a: GridFunction, b: GridFunction) -> float:
    """Grid L^2 pairing on a shared grid."""
    if a.spec != b.spec:
        raise ValueError("functions live on different grids")
    return float(np.sum(a.values * b.values)) * a.spec.cell_volume


def rayleigh_ratio(f: GridFunction, plan: TransformPlan) -> float:
    """||Tf||_q / ||f||_p at the scale-invariant exponents p = (d+1)/d,
    q = d+1; any value is a lower bound for the discrete operator norm."""
    exps = ExponentPair(plan.dim)
    denom = lp_norm(f, exps.p)
    if denom == 0.0:
        raise ZeroDivisionError("rayleigh ratio of the zero function")
    return lp_norm(forward_transform(f, plan), exps.q) / denom
