"""Layered random-function construction and its Monte Carlo checks.

Layer n places a value grid

    S_n = 2**(-n+3) * {0, ..., floor(2**n / n**2)}**d

over a 2**-n packing {x_k} of the base space.  Around each packing
point, ell_n nearby "satellite" points receive shared random grid
values (the same value X_i goes to the i-th satellite of every ball),
and the values are spread to the rest of the space by a triangular bump
of radius r_n, giving a continuous layer function that vanishes on all
earlier layers' satellites and stays inside 8 * n**-2 * [0,1]**d.

The two probabilistic checks:

* ``simulate_saturation_failure``: how often do ell_n grid draws,
  shifted by an adversary that sees only the past, fail to contain a
  full-size 2**-n packing of values;
* ``check_event`` / ``event_fraction``: how often does the graph of the
  summed layers plus a drift carry at least N_n(K) * 2**(n d) * n**-2d
  packing points at scale 2**-n.
"""

from __future__ import annotations

import itertools
import math
import random
from bisect import bisect_left
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from . import packing
from .rng import stable_index
from .spaces import (
    DigitVector,
    NetDepthError,
    SpaceDescriptor,
    TRIADIC_CANTOR,
    UNIT_INTERVAL,
    build_net,
)

SATELLITE_DEPTH_CAP = 64


@dataclass(frozen=True)
class LayerSpec:
    """Geometry and sizes of one randomization layer."""

    space: SpaceDescriptor
    n: int
    d: int
    grid: tuple[tuple[Fraction, ...], ...]
    s_n: int
    k_n: int
    k_n_method: str
    m_n: int
    ell_n: int
    packing_points: tuple
    eps_n: Fraction
    satellites: tuple[tuple, ...]          # [k][i] -> point
    bump_radius: Fraction
    sat_values: tuple[tuple[Fraction, int], ...]  # sorted (coordinate, i)

    def all_satellites(self):
        return [p for ball in self.satellites for p in ball]


@dataclass(frozen=True)
class WitnessSample:
    """One sampled assignment of grid values to all layers."""

    layers: tuple[LayerSpec, ...]
    rng_seed: object
    values: tuple[tuple[tuple[Fraction, ...], ...], ...]  # [layer][i] -> grid pt


@dataclass(frozen=True)
class EventReport:
    n: int
    graph_count: int
    threshold: Fraction
    holds: bool
    method: str


def value_grid(n: int, d: int) -> tuple[tuple[Fraction, ...], ...]:
    """The layer-n value grid, a 2**(-n+2) packing of size >= 2**(nd)/n**2d."""
    step = Fraction(8, 2 ** n)
    top = (2 ** n) // (n * n)
    axis = [step * j for j in range(top + 1)]
    return tuple(itertools.product(axis, repeat=d))


def replication_exponent(s_n: int, k_n: int, n: int) -> int:
    """Minimal m >= 1 with (1 - 1/s_n)**m <= 1 / (s_n * k_n * 2**n)."""
    if s_n == 1:
        return 1
    base = 1 - Fraction(1, s_n)
    bound = Fraction(1, s_n * k_n * 2 ** n)
    m, power = 1, base
    while power > bound:
        m += 1
        power *= base
    return m


def _point_value(space: SpaceDescriptor, point) -> Fraction:
    if isinstance(point, DigitVector):
        return point.value
    return Fraction(point)


def _base_packing(space: SpaceDescriptor, n: int):
    """Packing count and witness of the base space at scale 2**-n.

    Exact search when the net is small enough, greedy otherwise.  The
    greedy witness is preferred whenever it matches the exact count,
    because its min gap comes out structurally clean on these families
    (the ascending sweep is optimal on one-dimensional point sets).
    """
    net = build_net(space, n + 1)
    greedy = packing.max_packing_greedy(net, n)
    if net.size() <= packing.EXACT_SEARCH_LIMIT:
        exact = packing.max_packing_exact(net, n)
        if greedy.count == exact.count:
            return greedy.count, greedy.witness, "exact"
        return exact.count, exact.witness, "exact"
    return greedy.count, greedy.witness, "greedy"


def _cantor_satellites(center: DigitVector, eps: Fraction, need: int,
                       excluded: set[Fraction]) -> list[DigitVector]:
    # cylinder depth t with tail spread 3**-t / 2 <= eps
    t = center.depth
    while Fraction(1, 3 ** t) > 2 * eps:
        t += 1
    pad = center.extend((0,) * (t - center.depth))
    depth = t + max(1, (need + len(excluded) + 1).bit_length())
    while depth <= SATELLITE_DEPTH_CAP:
        ext_bits = depth - t
        out = []
        for bits in range(1 << ext_bits):
            cand = pad.extend(
                tuple((bits >> (ext_bits - 1 - j)) & 1 for j in range(ext_bits))
            )
            if cand.value not in excluded:
                out.append(cand)
                if len(out) == need:
                    return out
        depth += 1
    raise NetDepthError(
        f"cannot place {need} satellites within eps={eps} below depth "
        f"{SATELLITE_DEPTH_CAP}; a deeper net is required"
    )


def _interval_satellites(center: Fraction, eps: Fraction, need: int,
                         excluded: set[Fraction]) -> list[Fraction]:
    sign = 1 if center + eps <= 1 else -1
    t = 1
    while Fraction(1, 2 ** t) * (need + len(excluded) + 1) > eps:
        t += 1
        if t > SATELLITE_DEPTH_CAP:
            raise NetDepthError(
                f"cannot place {need} satellites within eps={eps}; "
                "a deeper dyadic net is required"
            )
    h = Fraction(1, 2 ** t)
    out = []
    j = 0
    while len(out) < need:
        cand = center + sign * j * h
        j += 1
        if cand < 0 or cand > 1 or abs(cand - center) > eps:
            raise NetDepthError("satellite ladder left the eps ball")
        if cand not in excluded:
            out.append(cand)
    return out


def build_layer(space: SpaceDescriptor, n: int, d: int,
                earlier: Sequence[LayerSpec] = ()) -> LayerSpec:
    """Construct layer n over a perfect base family.

    ``earlier`` must contain the already-built lower layers so the new
    satellites avoid every previous satellite set exactly.
    """
    if space.kind not in (TRIADIC_CANTOR, UNIT_INTERVAL):
        raise ValueError("layers are built over the Cantor set or the interval")
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    grid = value_grid(n, d)
    s_n = len(grid)
    k_n, witness, method = _base_packing(space, n)
    m_n = replication_exponent(s_n, k_n, n)
    ell_n = s_n * m_n

    delta = Fraction(1, 2 ** n)
    centers = sorted(witness, key=lambda p: _point_value(space, p))
    vals = [_point_value(space, p) for p in centers]
    if k_n == 1:
        eps = delta  # no separation constraint with a single ball
    else:
        gap = min(b - a for a, b in zip(vals, vals[1:]))
        eps = (gap - delta) / 3
        if eps <= 0:
            raise NetDepthError("packing witness has no separation slack")

    excluded: set[Fraction] = set()
    for lay in earlier:
        for p in lay.all_satellites():
            excluded.add(_point_value(space, p))

    satellites = []
    for center in centers:
        if space.kind == TRIADIC_CANTOR:
            ball = _cantor_satellites(center, eps, ell_n, excluded)
        else:
            ball = _interval_satellites(center, eps, ell_n, excluded)
        satellites.append(tuple(ball))
        excluded.update(_point_value(space, p) for p in ball)

    flat = [(float(_point_value(space, p)), _point_value(space, p), i)
            for ball in satellites for i, p in enumerate(ball)]
    flat.sort(key=lambda t: t[1])
    sat_values = tuple((v, i) for _, v, i in flat)

    sorted_vals = [v for v, _ in sat_values]
    gaps = [b - a for a, b in zip(sorted_vals, sorted_vals[1:])]
    r_candidates = [eps] + ([min(gaps)] if gaps else [])
    if earlier:
        prev = sorted(excluded - {v for v, _ in sat_values})
        # min distance from the new satellites to every earlier satellite
        best = None
        for v in sorted_vals:
            pos = bisect_left(prev, v)
            for q in (pos - 1, pos):
                if 0 <= q < len(prev):
                    dist = abs(v - prev[q])
                    if best is None or dist < best:
                        best = dist
        if best is not None:
            r_candidates.append(best)
    bump_radius = min(r_candidates) / 4

    return LayerSpec(space, n, d, grid, s_n, k_n, method, m_n, ell_n,
                     tuple(centers), eps, tuple(satellites), bump_radius,
                     sat_values)


def build_layers(space: SpaceDescriptor, d: int, n_max: int) -> tuple[LayerSpec, ...]:
    layers: list[LayerSpec] = []
    for n in range(1, n_max + 1):
        layers.append(build_layer(space, n, d, layers))
    return tuple(layers)


def sample_witness(layers: Sequence[LayerSpec], seed) -> WitnessSample:
    """Draw the shared grid values X_i for every layer, uniformly on S_n.

    The value at index (n, i) is a pure function of (seed, n, i), so two
    samples with the same seed agree entry for entry.
    """
    if len({l.space for l in layers}) > 1 or len({l.d for l in layers}) > 1:
        raise ValueError("layers must share one space and one dimension")
    values = tuple(
        tuple(
            lay.grid[stable_index(lay.s_n, seed, "witness", lay.n, i)]
            for i in range(lay.ell_n)
        )
        for lay in layers
    )
    return WitnessSample(tuple(layers), seed, values)


def _bump_terms(layer: LayerSpec, x_value: Fraction):
    """(i, weight) of the at most one layer bump reaching x."""
    vals = layer.sat_values
    pos = bisect_left(vals, (x_value, -1))
    best = None
    for q in (pos - 1, pos, pos + 1):
        if 0 <= q < len(vals):
            dist = abs(vals[q][0] - x_value)
            if best is None or dist < best[0]:
                best = (dist, vals[q][1])
    if best is None or best[0] >= layer.bump_radius:
        return None
    weight = 1 - best[0] / layer.bump_radius
    return best[1], weight


def eval_witness(sample: WitnessSample, x, depth: int) -> tuple[Fraction, ...]:
    """Sum of the first ``depth`` layer functions at a base point.

    Bump radii never overlap inside a layer, and never reach an earlier
    layer's satellites, so at most one satellite per layer contributes.
    """
    if depth > len(sample.layers):
        raise ValueError("sample has fewer layers than requested depth")
    d = sample.layers[0].d if sample.layers else 0
    total = [Fraction(0)] * d
    xv = _point_value(sample.layers[0].space, x) if sample.layers else None
    for lay, vals in zip(sample.layers[:depth], sample.values):
        term = _bump_terms(lay, xv)
        if term is None:
            continue
        i, weight = term
        for c in range(d):
            total[c] += vals[i][c] * weight
    return tuple(total)


def event_threshold(layer: LayerSpec) -> Fraction:
    return Fraction(layer.k_n * 2 ** (layer.n * layer.d),
                    layer.n ** (2 * layer.d))


class EventChecker:
    """Reusable graph-packing event check for one layer and drift.

    Precomputes, per evaluation point, which bumps of layers <= n reach
    it and with what weight; a per-sample check is then a cheap linear
    assembly followed by one greedy packing run.
    """

    def __init__(self, layers: Sequence[LayerSpec], n: int,
                 drift: Callable | None = None):
        if n < 1 or n > len(layers):
            raise ValueError("layer n not built")
        self.layers = tuple(layers[:n])
        self.layer = self.layers[-1]
        self.n = n
        self.d = self.layer.d
        self.delta = Fraction(1, 2 ** n)
        self.threshold = event_threshold(self.layer)
        self.points = list(self.layer.all_satellites())
        space = self.layer.space
        self.x_values = [_point_value(space, p) for p in self.points]
        zero = tuple(Fraction(0) for _ in range(self.d))
        self.drift_values = [
            tuple(Fraction(c) for c in drift(p)) if drift else zero
            for p in self.points
        ]
        self.terms = [
            [
                (li, *term)
                for li, lay in enumerate(self.layers)
                if (term := _bump_terms(lay, xv)) is not None
            ]
            for xv in self.x_values
        ]

    def check(self, sample: WitnessSample) -> EventReport:
        if sample.layers[:self.n] != self.layers:
            raise ValueError("sample was drawn over different layers")
        rows = []
        for xv, gv, terms in zip(self.x_values, self.drift_values, self.terms):
            h = list(gv)
            for li, i, weight in terms:
                vals = sample.values[li][i]
                for c in range(self.d):
                    h[c] += vals[c] * weight
            rows.append((xv, *h))
        if len(rows) <= packing.EXACT_SEARCH_LIMIT:
            chosen = packing.exact_packing_coords(rows, self.delta)
            method = "exact"
        else:
            chosen = packing.greedy_packing_coords(rows, self.delta)
            method = "greedy"
        count = len(chosen)
        return EventReport(self.n, count, self.threshold,
                           count >= self.threshold, method)


def check_event(sample: WitnessSample, drift: Callable | None,
                n: int) -> EventReport:
    """Does the drifted sample graph reach the layer-n packing threshold?

    Evaluation runs over the layer's satellite set, where the layer
    values live exactly; more evaluation points could only increase the
    count, so this is the conservative side of the event.
    """
    return EventChecker(sample.layers, n, drift).check(sample)


def event_fraction(layers: Sequence[LayerSpec], n: int,
                   drift: Callable | None, trials: int, seed) -> float:
    """Fraction of sampled witnesses for which the event holds."""
    checker = EventChecker(layers, n, drift)
    holds = 0
    for t in range(trials):
        sample = sample_witness(layers, (seed, t))
        if checker.check(sample).holds:
            holds += 1
    return holds / trials


# ---------------------------------------------------------------------------
# translated-grid saturation Monte Carlo


@dataclass(frozen=True)
class SaturationReport:
    n: int
    trials: int
    failures: int
    failure_rate: float
    wilson_upper: float
    bound: float
    passed: bool


def wilson_upper_bound(failures: int, trials: int,
                       z: float = 1.959963984540054) -> float:
    """Upper end of the Wilson 95% score interval for a proportion."""
    if trials < 1:
        raise ValueError("need at least one trial")
    p = failures / trials
    denom = 1 + z * z / trials
    center = p + z * z / (2 * trials)
    spread = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials ** 2))
    return (center + spread) / denom


def zero_adversary(d: int) -> Callable:
    return lambda history: (0.0,) * d


def colliding_adversary(d: int) -> Callable:
    """Shifts each draw by the negated previous one, hunting collisions."""
    def strategy(history):
        if not history:
            return (0.0,) * d
        return tuple(-c for c in history[-1])
    return strategy


def _value_packing_count(points: list[tuple[float, ...]], delta: float,
                         d: int) -> int:
    if d == 1:
        count = 0
        last = None
        for (v,) in sorted(points):
            if last is None or v - last > delta:
                count += 1
                last = v
        return count
    chosen: list[tuple[float, ...]] = []
    for p in sorted(points):
        if all(math.dist(p, q) > delta for q in chosen):
            chosen.append(p)
    return len(chosen)


def simulate_saturation_failure(layer: LayerSpec, adversary: Callable,
                                trials: int, seed) -> SaturationReport:
    """Monte Carlo for the adversarially translated grid saturation event.

    Per trial, ell_n values are drawn uniformly from the layer grid; the
    adversary produces each shift y_i from the history X_1..X_{i-1} only
    (it is handed nothing else, which enforces the measurability
    contract structurally).  A trial fails when the translated points
    contain no s_n-element 2**-n packing.  The sweep count is exact for
    d = 1 and greedy otherwise.

    Pass condition: the Wilson 95% upper bound on the failure rate stays
    within 1.5x of 1 / (k_n * 2**n).
    """
    grid = [tuple(float(c) for c in g) for g in layer.grid]
    delta = 0.5 ** layer.n
    failures = 0
    for t in range(trials):
        rng = random.Random(f"{seed}:{t}")
        history: list[tuple[float, ...]] = []
        points = []
        for _ in range(layer.ell_n):
            y = adversary(tuple(history))
            x = grid[rng.randrange(layer.s_n)]
            history.append(x)
            points.append(tuple(a + b for a, b in zip(x, y)))
        if _value_packing_count(points, delta, layer.d) < layer.s_n:
            failures += 1
    bound = 1.0 / (layer.k_n * 2 ** layer.n)
    upper = wilson_upper_bound(failures, trials)
    return SaturationReport(layer.n, trials, failures, failures / trials,
                            upper, bound, upper <= 1.5 * bound)


def tail_sup_bound(depth: int, d: int, terms: int = 4000) -> float:
    """Upper bound for the sup norm of the layers beyond ``depth``.

    Each coordinate of layer n is at most 8 / n**2, so the euclidean
    tail is below 8 * sqrt(d) * sum(n**-2, n > depth); the integral
    remainder bounds the unsummed part.
    """
    partial = sum(1.0 / (n * n) for n in range(depth + 1, depth + 1 + terms))
    return 8.0 * math.sqrt(d) * (partial + 1.0 / (depth + terms))
