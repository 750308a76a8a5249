"""Built-in acceptance checks at desk scale, one PASS/FAIL line each.

These mirror the full pytest acceptance suite with smaller grids and
budgets so the whole battery runs in well under a minute; the pytest
module is the authoritative gate.
"""

from __future__ import annotations

import math
import time

import numpy as np

from . import paraball as pb
from .affine import (affine_invariance_defect, arclength_density, circle_chart, measure,
                     parabola_chart, paraboloid_chart, surface_density)
from .extremizer import extremize, frequency_split, gaussian_init, positivity_profile
from .grid import GridFunction, box_spec
from .norms import entropy_refine, lorentz_quasinorm, lp_norm
from .operator import (TransformPlan, adjoint_transform, bilinear_form, forward_at_points,
                       inner)
from .symmetry import (apply_point, compose, general_position, incidence,
                       incidence_defect, interpolate_points, inverse, pullback)
from .testing import random_element, random_function, random_paraball_pair, smooth_bump


def _check_adjointness(rng) -> bool:
    spec = box_spec([-2, -2], [2, 2], [48, 48])
    plan = TransformPlan(spec)
    for _ in range(20):
        f = random_function(spec, rng)
        g = random_function(spec, rng)
        lhs = bilinear_form(g, f, plan)
        rhs = inner(adjoint_transform(g, plan), f)
        if abs(lhs - rhs) > 1e-12 * (1 + abs(lhs)):
            return False
    return True


def _check_forward_oracle(rng) -> bool:
    spec = box_spec([-2, -2], [2, 2], [256, 256])
    chi = GridFunction.box_indicator(spec, [-1, -1], [1, 1])
    plan = TransformPlan(spec, t_step=1 / 128)
    vals = forward_at_points(chi, np.array([[0.0, 0.0], [0.0, 2.0]]), plan)
    return abs(vals[0] - 2.0) <= 0.02 and vals[1] <= 0.02


def _check_incidence(rng) -> bool:
    for d in (2, 3):
        for _ in range(100):
            el = random_element(rng, d)
            x = rng.standard_normal(d) * 2
            y = rng.standard_normal(d) * 2
            if abs(incidence_defect(el, x, y)) > 1e-9 * (1 + abs(incidence(x, y))):
                return False
    return True


def _check_group_laws(rng) -> bool:
    for _ in range(25):
        e1 = random_element(rng, 3)
        e2 = random_element(rng, 3)
        x = rng.standard_normal((10, 3))
        if np.abs(apply_point(compose(e2, e1), x)
                  - apply_point(e2, apply_point(e1, x))).max() > 1e-9:
            return False
        if np.abs(apply_point(compose(e1, inverse(e1)), x) - x).max() > 1e-9:
            return False
    return True


def _check_transitivity(rng) -> bool:
    el = interpolate_points([[0, 0], [1, 1]], [[0, 0], [2, 0]], 1.0)
    if np.abs(apply_point(el, [1.0, 1.0]) - np.array([2.0, 0.0])).max() > 1e-12:
        return False
    for _ in range(25):
        xs = rng.standard_normal((3, 3)) * 2
        ys = rng.standard_normal((3, 3)) * 2
        if not (general_position(xs) and general_position(ys)):
            continue
        el = interpolate_points(xs, ys, 1.3)
        if np.abs(apply_point(el, xs) - ys).max() > 1e-9:
            return False
    return True


def _check_pullback(rng) -> bool:
    spec = box_spec([-1.5, -1.5], [1.5, 1.5], [128, 128])
    f = smooth_bump(spec)
    base = lp_norm(f, 1.5)
    for _ in range(4):
        el = random_element(rng, 2)
        if abs(lp_norm(pullback(el, f), 1.5) - base) / base > 0.02:
            return False
    return True


def _check_quasidistance(rng) -> bool:
    for _ in range(40):
        a, b = random_paraball_pair(rng, 3)
        q = pb.quasidistance(a, b)
        if not (q >= 1.0 and q == pb.quasidistance(b, a)):
            return False
        if abs(pb.quasidistance(pb.dual(a), pb.dual(b)) - q) > 1e-9 * q:
            return False
        el = random_element(rng, 3)
        qt = pb.quasidistance(pb.transform_paraball(el, a), pb.transform_paraball(el, b))
        if abs(qt - q) > 1e-9 * q:
            return False
    u = pb.unit_paraball(2)
    return pb.quasidistance(u, u) == 3.0


def _check_entropy(rng) -> bool:
    spec = box_spec([0, 0], [2, 2], [24, 24])
    p, r = 1.5, 2.0
    for eta in (0.01, 0.1, 0.5):
        f = random_function(spec, rng)
        refined, kept = entropy_refine(f, eta, p, r)
        dropped = f.with_values(f.values - refined.values)
        if lorentz_quasinorm(dropped, p, r) ** r > eta ** (r - p) * lp_norm(f, p) ** p:
            return False
        if len(kept) * eta**p > lp_norm(f, p) ** p:
            return False
    return True


def _check_partition(rng) -> bool:
    spec = box_spec([-2.5, -2.5], [9.5, 3.0], [96, 44])
    plan = TransformPlan(spec)
    a = pb.unit_paraball(2)
    b = pb.from_incidence([7.0], 0.0, [7.0], np.eye(1), [1.0], 1.0)
    mids = spec.midpoints()
    mask = (pb.expanded_contains(a, 2.0, mids) | pb.expanded_contains(b, 2.0, mids)).reshape(spec.shape)
    part = pb.partition_by_interaction(mask, [a, b], 0.1, plan)
    cv = spec.cell_volume
    measure_f = mask.sum() * cv
    for i, t in enumerate(part.transforms):
        if np.any(part.parts[i] & ~(t.values > part.gammas[i])):
            return False
        if np.any(part.remainder & (t.values > part.gammas[i])):
            return False
        pairing = float((part.remainder * t.values).sum()) * cv
        if pairing > (0.1 / 3) * measure_f ** (2 / 3) * pb.volume([a, b][i]) ** (2 / 3):
            return False
    return True


def _check_affine(rng) -> bool:
    if abs(arclength_density(parabola_chart(), 0.5) - 2 ** (1 / 3)) > 1e-8:
        return False
    for d in (2, 3):
        chart = paraboloid_chart(d)
        t = np.full(d - 1, 0.3)
        if abs(surface_density(chart, t) - 2 ** ((d - 1) / (d + 1))) > 1e-8:
            return False
    if abs(measure(circle_chart(), step=1e-3) - 2 * math.pi) > 1e-6:
        return False
    A = np.array([[1.1, 0.3], [-0.2, 0.9]])
    return affine_invariance_defect(parabola_chart(), A, step=1e-3) <= 1e-6


def _check_extremizer(rng) -> bool:
    spec = box_spec([-3, -3], [3, 3], [48, 48])
    plan = TransformPlan(spec)
    trace = extremize(gaussian_init(spec), plan, max_iters=200, tol=1e-5, theta=0.5)
    phis = trace.phis()
    if len(phis) > 200 or np.min(np.diff(phis)) < -1e-10 * phis.max():
        return False
    if positivity_profile(trace.final, [((-1.5, -1.5), (1.5, 1.5))])[0][1] <= 0:
        return False
    return trace.steps[-1].residual <= 1e-2


def _check_cover(rng) -> bool:
    spec = box_spec([-1.6, -1.6], [1.6, 2.6], [48, 60])
    f = pb.rasterize(pb.unit_paraball(2), spec)
    pieces = pb.greedy_cover(f, eta=0.05, budget=300)
    if not pieces:
        return False
    return lp_norm(pieces[0][1], 1.5) >= 0.9 * lp_norm(f, 1.5)


def _check_frequency_split(rng) -> bool:
    spec = box_spec([-2, -2], [2, 2], [64, 64])
    x = spec.midpoints()
    wave = GridFunction(spec, (1.0 + 0.5 * np.cos(math.pi * x[:, 0])).reshape(spec.shape))
    g_sharp, g_flat = frequency_split(wave, 4.0)
    if lp_norm(g_flat, 2.0) > 1e-12:
        return False
    bump = smooth_bump(spec)
    g_sharp, g_flat = frequency_split(bump, 2.0)
    return np.array_equal(g_sharp.values, bump.values - g_flat.values)


CHECKS = [
    ("discrete adjointness", _check_adjointness),
    ("forward transform oracle", _check_forward_oracle),
    ("incidence preservation", _check_incidence),
    ("group laws", _check_group_laws),
    ("d-fold transitivity", _check_transitivity),
    ("pullback isometry", _check_pullback),
    ("quasidistance properties", _check_quasidistance),
    ("entropy refinement", _check_entropy),
    ("interaction partition", _check_partition),
    ("affine measures", _check_affine),
    ("extremizer iteration", _check_extremizer),
    ("greedy cover", _check_cover),
    ("frequency split", _check_frequency_split),
]


def run_selftest(seed: int = 0) -> int:
    failures = 0
    for name, fn in CHECKS:
        rng = np.random.default_rng(seed)
        t0 = time.time()
        try:
            ok = fn(rng)
        except Exception as exc:  # a crash is a failure, not an abort
            ok = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        status = "PASS" if ok else "FAIL"
        print(f"{status}  {name}  [{time.time() - t0:.2f}s]")
        failures += not ok
    print(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return 1 if failures else 0
