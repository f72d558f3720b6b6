"""Box-dimension regression, Hausdorff content bounds and discrete energies.

Counting is exact (see :mod:`dimlab.packing`); everything in this module
that touches logarithms, least squares or energy sums is deliberately
floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import packing
from .spaces import ResolutionNet, SpaceDescriptor, build_net, fraction_sqrt

DIVERGENCE_RATIO = 1.05
DIVERGENCE_LOOKBACK = 3


@dataclass(frozen=True)
class ScaleSeries:
    """Counts indexed by strictly increasing scale indices.

    ``log_base`` is the base of the scale family the counts came from:
    2 for packing/grid counts at scales 2**-n, 9 for mesh-square counts
    at scales 9**-n.
    """

    entries: tuple[tuple[int, int], ...]
    log_base: int = 2

    def __post_init__(self):
        ns = [n for n, _ in self.entries]
        if any(a >= b for a, b in zip(ns, ns[1:])):
            raise ValueError("scale indices must be strictly increasing")
        if any(c < 1 for _, c in self.entries):
            raise ValueError("counts must be >= 1")


@dataclass(frozen=True)
class DimensionEstimate:
    slope: float
    intercept: float
    fit_r2: float
    range: tuple[int, int]
    variant: str

    def __post_init__(self):
        if not math.isfinite(self.slope):
            raise ValueError("slope must be finite")
        if self.range[0] >= self.range[1]:
            raise ValueError("scale range must be nondegenerate")


def _least_squares(xs, ys):
    n = len(xs)
    xbar = sum(xs) / n
    ybar = sum(ys) / n
    sxx = sum((x - xbar) ** 2 for x in xs)
    sxy = sum((x - xbar) * (y - ybar) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = ybar - slope * xbar
    ss_res = sum((y - (slope * x + intercept)) ** 2 for x, y in zip(xs, ys))
    ss_tot = sum((y - ybar) ** 2 for y in ys)
    r2 = 1.0 if ss_tot == 0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return slope, intercept, r2


def box_dim_estimate(series: ScaleSeries, variant: str) -> DimensionEstimate:
    """Dimension estimate from a scale series.

    full-fit is the least-squares slope of log(count) against
    n*log(base).  The liminf/limsup variants take the min/max of the
    per-step slopes over the trailing half of the steps, since early
    scales are pre-asymptotic on finite nets.  Fit diagnostics
    (intercept, r^2) always refer to the full-range fit.
    """
    if variant not in ("liminf", "limsup", "full-fit"):
        raise ValueError(f"unknown variant {variant!r}")
    if len(series.entries) < 3:
        raise ValueError("need at least 3 series entries")
    lb = math.log(series.log_base)
    xs = [n * lb for n, _ in series.entries]
    ys = [math.log(c) for _, c in series.entries]
    slope, intercept, r2 = _least_squares(xs, ys)
    n_min, n_max = series.entries[0][0], series.entries[-1][0]
    if variant == "full-fit":
        return DimensionEstimate(slope, intercept, r2, (n_min, n_max), variant)
    steps = [
        (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
        for i in range(len(xs) - 1)
    ]
    trailing = steps[len(steps) // 2:]
    value = min(trailing) if variant == "liminf" else max(trailing)
    return DimensionEstimate(value, intercept, r2, (n_min, n_max), variant)


def packing_count_series(
    space: SpaceDescriptor,
    scales: Sequence[int],
    net_scale: Callable[[int], int] | None = None,
    method: str = "greedy",
) -> ScaleSeries:
    """Packing counts of a space over the given scale indices.

    Each count is taken on the canonical net one scale index finer than
    the packing scale (overridable), so the net resolves the packing.
    """
    net_scale = net_scale or (lambda n: n + 1)
    entries = []
    for n in scales:
        net = build_net(space, net_scale(n))
        if method == "exact":
            res = packing.max_packing_exact(net, n)
        else:
            res = packing.max_packing_greedy(net, n)
        entries.append((n, res.count))
    return ScaleSeries(tuple(entries), log_base=2)


def cell_count_series(
    space: SpaceDescriptor,
    scales: Sequence[int],
    net_scale: Callable[[int], int] | None = None,
) -> ScaleSeries:
    """Occupied 2**-n grid-cell counts of a space's nets."""
    net_scale = net_scale or (lambda n: n)
    entries = []
    for n in scales:
        net = build_net(space, net_scale(n))
        entries.append((n, packing.occupied_cell_count(net, n)))
    return ScaleSeries(tuple(entries), log_base=2)


# ---------------------------------------------------------------------------
# covers and Hausdorff content


@dataclass(frozen=True)
class CoverFamily:
    """Point-set pieces with their exact recorded diameters."""

    pieces: tuple[tuple, ...]
    coords: tuple[tuple[tuple[Fraction, ...], ...], ...]
    diameters: tuple

    @classmethod
    def from_pieces(cls, net: ResolutionNet, pieces) -> "CoverFamily":
        pieces = tuple(tuple(p) for p in pieces)
        coords = tuple(
            tuple(net.coords(pt) for pt in piece) for piece in pieces
        )
        diameters = tuple(_exact_diameter(c) for c in coords)
        return cls(pieces, coords, diameters)

    @classmethod
    def split_net(cls, net: ResolutionNet, key: Callable) -> "CoverFamily":
        groups: dict = {}
        for pt in net.point_list():
            groups.setdefault(key(pt), []).append(pt)
        return cls.from_pieces(net, [groups[k] for k in sorted(groups)])


def _exact_diameter(coord_rows) -> Fraction | float:
    if not coord_rows:
        return Fraction(0)
    if len(coord_rows[0]) == 1:
        vals = [r[0] for r in coord_rows]
        return max(vals) - min(vals)
    best = Fraction(0)
    for i, a in enumerate(coord_rows):
        for b in coord_rows[i + 1:]:
            d2 = sum(((u - v) ** 2 for u, v in zip(a, b)), Fraction(0))
            if d2 > best:
                best = d2
    root = fraction_sqrt(best)
    return root if root is not None else math.sqrt(best)


def hausdorff_content_upper(cover: CoverFamily, s) -> float:
    """sum(diam(A_i)**s) for the given cover, an upper content bound."""
    if s < 0:
        raise ValueError("exponent must be nonnegative")
    if not cover.pieces:
        raise ValueError("empty cover")
    return float(sum(float(d) ** float(s) for d in cover.diameters))


@dataclass(frozen=True)
class LocalizedBoxResult:
    value: float
    per_piece: tuple[float, ...]
    skipped_empty: int


def localized_upper_box(
    net: ResolutionNet,
    cover: CoverFamily,
    scales: Sequence[int],
) -> LocalizedBoxResult:
    """Minimum over cover pieces of the piece's full-fit box estimate.

    A small value certifies that some open patch of the net scales with
    a low exponent; on a self-similar net all pieces should agree.
    Empty pieces are skipped and counted in the result.
    """
    per_piece = []
    skipped = 0
    for rows in cover.coords:
        if not rows:
            skipped += 1
            continue
        entries = []
        for n in scales:
            chosen = packing.greedy_packing_coords(rows, Fraction(1, 2 ** n))
            entries.append((n, len(chosen)))
        est = box_dim_estimate(ScaleSeries(tuple(entries)), "full-fit")
        per_piece.append(est.slope)
    if not per_piece:
        raise ValueError("cover has no nonempty pieces")
    return LocalizedBoxResult(min(per_piece), tuple(per_piece), skipped)


# ---------------------------------------------------------------------------
# discrete measures and energies


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported probability measure with exact weights."""

    points: tuple
    weights: tuple[Fraction, ...]
    coords: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        if sum(self.weights, Fraction(0)) != 1:
            raise ValueError("weights must sum to exactly 1")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive")
        if len(set(self.coords)) != len(self.coords):
            raise ValueError("atoms must be distinct")

    @classmethod
    def uniform_on_net(cls, net: ResolutionNet) -> "DiscreteMeasure":
        pts = net.point_list()
        w = Fraction(1, len(pts))
        return cls(pts, (w,) * len(pts), tuple(net.coords(p) for p in pts))

    @classmethod
    def from_atoms(cls, atoms, coords_fn) -> "DiscreteMeasure":
        pts = tuple(p for p, _ in atoms)
        ws = tuple(Fraction(w) for _, w in atoms)
        return cls(pts, ws, tuple(coords_fn(p) for p in pts))

    def float_coords(self) -> np.ndarray:
        return np.array([[float(c) for c in row] for row in self.coords])

    def float_weights(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])


def _energy_grid(measure: DiscreteMeasure, s_list: Sequence[float]) -> list[float]:
    """Energies of one measure at several exponents, sharing distances."""
    if any(s <= 0 for s in s_list):
        raise ValueError("energy exponent must be positive")
    xs = measure.float_coords()
    w = measure.float_weights()
    k = len(w)
    if k < 2:
        return [0.0] * len(s_list)
    totals = [0.0] * len(s_list)
    block = 512
    for start in range(0, k, block):
        chunk = xs[start:start + block]
        diff = chunk[:, None, :] - xs[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=2))
        mask = dist > 0
        wprod = w[start:start + block, None] * w[None, :]
        for j, s in enumerate(s_list):
            inv = np.zeros_like(dist)
            inv[mask] = dist[mask] ** (-s)
            totals[j] += float((wprod * inv).sum())
    return totals


def discrete_energy(measure: DiscreteMeasure, s: float) -> float:
    """Off-diagonal double sum of w_x * w_y / dist(x, y)**s.

    The diagonal is excluded: atoms carry positive mass, and divergence
    of the underlying continuous energy is recovered by watching the
    growth of this sum across refinement depths instead.
    """
    return _energy_grid(measure, [s])[0]


@dataclass(frozen=True)
class EnergyProfile:
    critical: float
    bracket: tuple[float, float]
    flag: str
    verdicts: tuple[str, ...]
    energies: tuple[tuple[float, ...], ...]


def _is_divergent(values: Sequence[float]) -> bool:
    """Divergence test on an energy-by-depth sequence.

    The growth of the sequence at depth m is the increment E_{m+1} - E_m,
    and the growth ratio compares successive increments; its limit is
    the per-depth mass factor of the finest scale, above 1 exactly for a
    geometrically divergent energy.  A sequence is flagged divergent
    when the last three growth ratios all exceed 1.05.  (The ratio of
    the energy values themselves cannot work at desk depths: it stays
    above any fixed threshold for slowly converging sequences and sinks
    to 1 for logarithmically divergent ones.)
    """
    growths = [b - a for a, b in zip(values, values[1:])]
    ratios = []
    for a, b in zip(growths, growths[1:]):
        if a <= 0 or b <= 0:
            ratios.append(0.0)  # non-increasing energy: converged
        else:
            ratios.append(b / a)
    tail = ratios[-DIVERGENCE_LOOKBACK:]
    return len(tail) == DIVERGENCE_LOOKBACK and all(
        r > DIVERGENCE_RATIO for r in tail
    )


def energy_dimension_profile(
    measures_by_depth: Sequence[DiscreteMeasure],
    s_grid: Sequence[float],
) -> EnergyProfile:
    """Largest grid exponent whose energies stay bounded across depths.

    A sequence counts as divergent when its last three successive-depth
    growth ratios all exceed 1.05, which is robust to the bounded
    oscillation a converging energy still shows at small depth.  The
    bracket pairs the reported exponent with the next grid value.
    """
    if len(measures_by_depth) < 4:
        raise ValueError("need at least 4 depths")
    s_grid = sorted(float(s) for s in s_grid)
    if len(s_grid) < 5:
        raise ValueError("need at least 5 grid exponents")
    by_depth = [_energy_grid(m, s_grid) for m in measures_by_depth]
    energies = tuple(
        tuple(row[j] for row in by_depth) for j in range(len(s_grid))
    )
    if all(all(e == 0.0 for e in row) for row in energies):
        return EnergyProfile(0.0, (0.0, 0.0), "degenerate",
                             ("bounded",) * len(s_grid), energies)
    verdicts = tuple(
        "divergent" if _is_divergent(row) else "bounded" for row in energies
    )
    bounded = [s for s, v in zip(s_grid, verdicts) if v == "bounded"]
    divergent = [s for s, v in zip(s_grid, verdicts) if v == "divergent"]
    if not bounded:
        return EnergyProfile(s_grid[0], (s_grid[0], s_grid[0]),
                             "all_divergent", verdicts, energies)
    if not divergent:
        return EnergyProfile(s_grid[-1], (s_grid[-1], s_grid[-1]),
                             "all_bounded", verdicts, energies)
    critical = max(bounded)
    above = [s for s in s_grid if s > critical]
    bracket = (critical, above[0] if above else critical)
    return EnergyProfile(critical, bracket, "ok", verdicts, energies)
