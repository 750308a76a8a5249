"""Lebesgue norms, rough level-set decomposition, Lorentz quasinorms,
and entropy refinement of grid functions.

The rough decomposition writes f = sum_j 2^j f_j with 1 <= f_j < 2 on
pairwise disjoint sets E_j covering the support; every quantity below is
evaluated with the grid's own midpoint quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridFunction


@dataclass(frozen=True)
class ExponentPair:
    """The scale-invariant exponent pair p = (d+1)/d, q = d+1."""

    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dimension must be at least 2")

    @property
    def p(self) -> float:
        return (self.dim + 1) / self.dim

    @property
    def q(self) -> float:
        return float(self.dim + 1)

    def conjugacy_defect(self) -> float:
        """|1/p + 1/q - 1|; q is the exponent conjugate to p."""
        return abs(1.0 / self.p + 1.0 / self.q - 1.0)


def _check_exponent(p: float) -> float:
    p = float(p)
    if not (np.isfinite(p) and p >= 1):
        raise ValueError(f"invalid exponent p = {p}; need p >= 1")
    return p


def lp_norm(f: GridFunction, p: float) -> float:
    """Midpoint-rule L^p norm, (sum |f|^p * cellvol)^(1/p)."""
    p = _check_exponent(p)
    total = float(np.sum(np.abs(f.values) ** p)) * f.spec.cell_volume
    return total ** (1.0 / p)


def tail_mass(f: GridFunction, R: float, p: float) -> float:
    """Integral of |f|^p over the cells whose midpoint has |x| >= R."""
    p = _check_exponent(p)
    R = float(R)
    if R < 0:
        raise ValueError("R must be nonnegative")
    radii = np.linalg.norm(f.spec.midpoints(), axis=1)
    outside = (radii >= R).reshape(f.spec.shape)
    return float(np.sum(np.abs(f.values[outside]) ** p)) * f.spec.cell_volume


def psi_integral(f: GridFunction, psi) -> float:
    """Integral of psi(f); psi must vanish at 0 so empty cells contribute 0."""
    if psi(0.0) != 0.0:
        raise ValueError("psi(0) must be 0 (integral over an unbounded domain)")
    try:
        vals = np.asarray(psi(f.values), dtype=float)
        if vals.shape != f.values.shape:
            raise TypeError
    except (TypeError, ValueError):
        vals = np.vectorize(psi)(f.values).astype(float)
    return float(np.sum(vals)) * f.spec.cell_volume


@dataclass(frozen=True)
class Level:
    """One dyadic level: f = 2^j * residual on `cells`, residual in [1, 2)."""

    j: int
    cells: np.ndarray  # flat row-major cell indices, sorted
    residuals: np.ndarray

    def measure(self, cell_volume: float) -> float:
        return len(self.cells) * cell_volume

    def score(self, p: float, cell_volume: float) -> float:
        """The level weight 2^j |E_j|^(1/p)."""
        return math.ldexp(1.0, self.j) * self.measure(cell_volume) ** (1.0 / p)


@dataclass(frozen=True)
class RoughDecomposition:
    """Level-indexed family {(j, E_j, f_j)} reconstructing f exactly."""

    f: GridFunction
    levels: tuple[Level, ...]

    def level_index(self) -> dict[int, Level]:
        return {lv.j: lv for lv in self.levels}

    def scores(self, p: float) -> dict[int, float]:
        cv = self.f.spec.cell_volume
        return {lv.j: lv.score(p, cv) for lv in self.levels}

    def reconstruct(self) -> GridFunction:
        out = np.zeros(self.f.spec.size)
        for lv in self.levels:
            out[lv.cells] = np.ldexp(lv.residuals, lv.j)
        return GridFunction(self.f.spec, out.reshape(self.f.spec.shape))

    def restrict_to_levels(self, keep) -> GridFunction:
        """f restricted to the cells of the levels in `keep`."""
        keep = set(keep)
        out = np.zeros(self.f.spec.size)
        flat = self.f.values.ravel()
        for lv in self.levels:
            if lv.j in keep:
                out[lv.cells] = flat[lv.cells]
        return GridFunction(self.f.spec, out.reshape(self.f.spec.shape))


def rough_decompose(f: GridFunction) -> RoughDecomposition:
    """Split f by dyadic value bands: level j holds the cells with
    2^j <= f < 2^(j+1); exact powers of two sit at the lower residual 1."""
    flat = f.values.ravel()
    nz = np.flatnonzero(flat > 0)
    if nz.size == 0:
        return RoughDecomposition(f, ())
    # frexp is exact: w = m * 2^e with m in [0.5, 1), so w = (2m) * 2^(e-1).
    mant, expo = np.frexp(flat[nz])
    js = expo.astype(np.int64) - 1
    residuals = 2.0 * mant
    levels = []
    for j in np.unique(js):
        sel = js == j
        levels.append(Level(int(j), nz[sel], residuals[sel]))
    return RoughDecomposition(f, tuple(levels))


def lorentz_quasinorm(f: GridFunction, p: float, r: float) -> float:
    """Level-sum Lorentz quasinorm (sum_j (2^j |E_j|^(1/p))^r)^(1/r);
    r = inf takes the sup of the level scores."""
    p = float(p)
    if not (np.isfinite(p) and p > 1):
        raise ValueError(f"invalid exponent p = {p}; need p > 1")
    r = float(r)
    if not (r >= 1):
        raise ValueError(f"invalid exponent r = {r}; need r in [1, inf]")
    dec = rough_decompose(f)
    if not dec.levels:
        return 0.0
    scores = np.array(list(dec.scores(p).values()))
    if math.isinf(r):
        return float(scores.max())
    return float(np.sum(scores**r) ** (1.0 / r))


def entropy_refine(
    f: GridFunction, eta: float, p: float, r: float
) -> tuple[GridFunction, set[int]]:
    """Drop the levels with score 2^j |E_j|^(1/p) <= eta.

    Returns (refined, kept_levels).  Two bounds hold by the exclusion
    rule and are re-checked here: the discarded part has
    ||f - refined||_{p,r}^r <= eta^(r-p) ||f||_p^p, and the kept set has
    at most eta^(-p) ||f||_p^p levels.
    """
    eta = float(eta)
    if eta <= 0:
        raise ValueError("eta must be positive")
    if f.is_zero():
        raise ValueError("entropy refinement needs a nonzero function")
    p = float(p)
    r = float(r)
    if not (1 < p < r < math.inf):
        raise ValueError("need 1 < p < r < inf for the refinement bounds")
    dec = rough_decompose(f)
    scores = dec.scores(p)
    kept = {j for j, s in scores.items() if s > eta}
    refined = dec.restrict_to_levels(kept)

    fpp = lp_norm(f, p) ** p
    dropped_r = sum(s**r for j, s in scores.items() if j not in kept)
    if dropped_r > eta ** (r - p) * fpp * (1 + 1e-12):
        raise AssertionError("entropy refinement bound violated")
    if len(kept) * eta**p > fpp * (1 + 1e-12):
        raise AssertionError("kept-level cardinality bound violated")
    return refined, kept


def trim_small_levels(f: GridFunction, eta: float, p: float) -> GridFunction:
    """Return the discarded part sum over {j: 2^j |E_j|^(1/p) < eta ||f||_p}
    of 2^j f_j; callers compare its L^p norm against their threshold."""
    eta = float(eta)
    if eta <= 0:
        raise ValueError("eta must be positive")
    if f.is_zero():
        raise ValueError("trim needs a nonzero function")
    p = _check_exponent(p)
    dec = rough_decompose(f)
    cutoff = eta * lp_norm(f, p)
    small = {j for j, s in dec.scores(p).items() if s < cutoff}
    return dec.restrict_to_levels(small)
