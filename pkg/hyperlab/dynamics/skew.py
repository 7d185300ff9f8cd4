"""Center foliations of skew products and of the Katok suspension.

For the Katok family, gamma_t = h_t^-1 o L o h_t on every fiber, so the center
leaf through a point z of the linear model is {(h_t^-1(z), t)} and the
holonomy between fibers t1 and t2 is h_t2^-1 o h_t1. For T^2 x S^1 skew
products center leaves are traced as graphs over the fiber coordinate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from hyperlab.config.settings import VerdictThresholds, get_settings
from hyperlab.dynamics.algebra import nearest_lift, reduce_mod1, torus_distance
from hyperlab.dynamics.cocycle import bundle_field
from hyperlab.dynamics.conjugacy import ConjugacySolution, solve_conjugacy
from hyperlab.dynamics.errors import ConeCollapse, PreconditionError
from hyperlab.dynamics.maps import FIBER, KatokFamily, SkewProductMap
from hyperlab.dynamics.parallel import parallel_map, uniform_points
from hyperlab.dynamics.profiles import TrigObservable
from hyperlab.dynamics.stats import batch_means_stderr

LOGGER = logging.getLogger(__name__)

LEAF_STREAM = 13
JACOBIAN_STREAM = 17
JACOBIAN_POINTS = 64
CENTER_STEPS = 16

ACVerdict = Literal["AC-LIKE", "SINGULAR-LIKE", "INCONCLUSIVE"]


@dataclass(frozen=True, eq=False)
class CenterLeaf:
    """Center leaves through a batch of points; ``points[k]`` lies over ``parameters[k]``."""

    kind: Literal["katok", "skew"]
    parameters: np.ndarray
    points: np.ndarray

    def rows(self) -> list[list[float]]:
        return [
            [leaf, float(t), *map(float, p)]
            for k, t in enumerate(self.parameters)
            for leaf, p in enumerate(self.points[k])
        ]


@dataclass(frozen=True, eq=False)
class HolonomyMap:
    """Center holonomy from fiber ``source`` to fiber ``target`` acting on base points of T^2."""

    source: float
    target: float
    forward: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    residual: float = 0.0
    kind: Literal["katok", "skew"] = "katok"

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        shape = np.shape(x)
        pts = reduce_mod1(np.asarray(x, dtype=float)).reshape(-1, 2)
        return reduce_mod1(self.forward(pts)).reshape(shape)


# ---------------------------------------------------------------------------
# Katok suspension


def _solve_member(args: tuple) -> ConjugacySolution:
    member, base, test_set_size, seed = args
    return solve_conjugacy(member, base, test_set_size=test_set_size, seed=seed)


def solve_family(family: KatokFamily, *, test_set_size: int = 200, seed: int = 0, workers: int = 1) -> list[ConjugacySolution]:
    """Conjugacy of every member with the base automorphism."""
    jobs = [(member, family.base, test_set_size, seed) for member in family.members]
    return parallel_map(_solve_member, jobs, workers)


def center_holonomy(
    family: KatokFamily,
    source: int,
    target: int,
    solutions: Sequence[ConjugacySolution] | None = None,
) -> HolonomyMap:
    """H_{t1,t2} = h_t2^-1 o h_t1 between members ``source`` and ``target``."""
    sols = list(solutions) if solutions is not None else solve_family(family)
    h_source, h_target = sols[source], sols[target]

    def forward(x: np.ndarray) -> np.ndarray:
        return h_target.inverse_evaluate(h_source.evaluate(x))

    return HolonomyMap(
        float(family.t_grid[source]),
        float(family.t_grid[target]),
        forward,
        max(h_source.residual, h_target.residual),
        "katok",
    )


def holonomy_cocycle_defect(first: HolonomyMap, second: HolonomyMap, direct: HolonomyMap, points: np.ndarray) -> float:
    """sup |H_{t2,t3} o H_{t1,t2} - H_{t1,t3}| on the given points."""
    return float(torus_distance(second.evaluate(first.evaluate(points)), direct.evaluate(points)).max())


def katok_center_leaf(family: KatokFamily, solutions: Sequence[ConjugacySolution], z: np.ndarray) -> CenterLeaf:
    """Center leaves {(h_t^-1(z), t)} through linear-model points z."""
    base = reduce_mod1(np.asarray(z, dtype=float)).reshape(-1, 2)
    points = np.stack([sol.inverse_evaluate(base) for sol in solutions])
    return CenterLeaf("katok", np.asarray(family.t_grid, dtype=float), points)


def center_leaf_invariance(family: KatokFamily, solutions: Sequence[ConjugacySolution], z: np.ndarray) -> float:
    """Distance between gamma_t of the leaf through z and the leaf through L z."""
    leaf = katok_center_leaf(family, solutions, z)
    image = katok_center_leaf(family, solutions, reduce_mod1(np.asarray(z, dtype=float).reshape(-1, 2) @ family.base.matrix.T.astype(float)))
    moved = np.stack([member.evaluate(pts) for member, pts in zip(family.members, leaf.points)])
    return float(torus_distance(moved, image.points).max())


# ---------------------------------------------------------------------------
# T^2 x S^1 skew products


def _fiber_velocity(skew: SkewProductMap, points: np.ndarray, transient: int) -> np.ndarray:
    e = bundle_field(skew.map, reduce_mod1(points), skew.center_index, transient)
    lift = e[:, FIBER]
    if np.any(np.abs(lift) < 0.5):
        raise ConeCollapse("center direction is not transverse to the horizontal slices")
    return e / lift[:, None]


def trace_center_leaf(
    skew: SkewProductMap,
    points: np.ndarray,
    rise: float,
    steps: int = CENTER_STEPS,
    *,
    transient: int = 60,
) -> CenterLeaf:
    """Center leaves through ``points`` as graphs over the fiber, followed for a fiber rise ``rise``."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    dy = rise / steps
    path = [p.copy()]
    for _ in range(steps):
        v0 = _fiber_velocity(skew, p, transient)
        v1 = _fiber_velocity(skew, p + dy * v0, transient)
        p = p + 0.5 * dy * (v0 + v1)
        path.append(p.copy())
    return CenterLeaf("skew", np.linspace(0.0, rise, steps + 1), np.stack(path))


def skew_center_holonomy(skew: SkewProductMap, y1: float, y2: float, *, steps: int = CENTER_STEPS, transient: int = 60) -> HolonomyMap:
    """Holonomy along center leaves from the slice T^2 x {y1} to T^2 x {y2}."""
    rise = float(nearest_lift(np.array([y1]), np.array([y2]))[0])

    def follow(x: np.ndarray, count: int) -> np.ndarray:
        start = np.column_stack([x, np.full(len(x), y1)])
        return trace_center_leaf(skew, start, rise, count, transient=transient).points[-1, :, :2]

    def forward(x: np.ndarray) -> np.ndarray:
        return follow(x, steps) if rise else x

    probe = uniform_points(0, 8, 2, stream=LEAF_STREAM)
    residual = float(torus_distance(follow(probe, steps), follow(probe, 2 * steps)).max()) if rise else 0.0
    return HolonomyMap(y1, y2, forward, residual, "skew")


# ---------------------------------------------------------------------------
# absolute continuity


@dataclass(frozen=True, eq=False)
class ACProbe:
    grids: list[int]
    concentration: list[float]
    scales: list[float]
    spreads: list[float]
    verdict: ACVerdict
    counts: np.ndarray = field(repr=False)

    def summary(self) -> dict[str, object]:
        return {
            "grids": self.grids,
            "c_q": self.concentration,
            "scales": self.scales,
            "jacobian_spread": self.spreads,
            "verdict": self.verdict,
        }

    def rows(self) -> list[list[float]]:
        m = self.counts.shape[0]
        total = float(self.counts.sum())
        return [[i, j, float(self.counts[i, j]) / total] for i in range(m) for j in range(m)]


def _cell_centers(m: int) -> np.ndarray:
    c = (np.arange(m) + 0.5) / m
    return np.stack(np.meshgrid(c, c, indexing="ij"), axis=-1).reshape(-1, 2)


def _concentration(images: np.ndarray, m: int, q: float) -> tuple[float, np.ndarray]:
    cells = np.minimum((reduce_mod1(images) * m).astype(int), m - 1)
    counts = np.zeros((m, m))
    np.add.at(counts, (cells[:, 0], cells[:, 1]), 1.0)
    ordered = np.sort(counts.ravel())[::-1]
    needed = int(np.searchsorted(np.cumsum(ordered), q * ordered.sum() - 1e-9)) + 1
    return needed / (m * m), counts


def _area_ratios(H: HolonomyMap, points: np.ndarray, r: float) -> np.ndarray:
    corners = [points, points + [r, 0.0], points + [r, r], points + [0.0, r]]
    images = [H.evaluate(reduce_mod1(c)) for c in corners]
    v1, v2, v3 = (nearest_lift(images[0], img) for img in images[1:])
    cross = (v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]) + (v2[:, 0] * v3[:, 1] - v2[:, 1] * v3[:, 0])
    return 0.5 * np.abs(cross) / r**2


def absolute_continuity_probe(
    H: HolonomyMap,
    grid: int = 64,
    refinements: int = 2,
    seed: int = 0,
    *,
    thresholds: VerdictThresholds | None = None,
) -> ACProbe:
    """Mass concentration under grid refinement and multi-scale area-ratio spread of H."""
    limits = thresholds or get_settings().thresholds
    grids = [grid * 2**k for k in range(refinements + 1)]
    concentration = []
    counts = np.zeros((grid, grid))
    for m in grids:
        c_q, hist = _concentration(H.evaluate(_cell_centers(m)), m, limits.cq_mass_fraction)
        concentration.append(c_q)
        if m == grid:
            counts = hist
    scales = [1.0 / m for m in grids]
    sample = uniform_points(seed, JACOBIAN_POINTS, 2, stream=JACOBIAN_STREAM)
    spreads = []
    for r in scales:
        ratios = _area_ratios(H, sample, r)
        spreads.append(float(ratios.max() / ratios.min()) if ratios.min() > 0 else float("inf"))
    drops = [concentration[k] / concentration[k + 1] for k in range(len(concentration) - 1)]
    if drops and all(d >= limits.cq_drop_factor for d in drops[-2:]):
        verdict: ACVerdict = "SINGULAR-LIKE"
    elif len(spreads) >= 2 and spreads[-1] / spreads[-2] <= limits.ac_spread_ratio:
        verdict = "AC-LIKE"
    else:
        verdict = "INCONCLUSIVE"
    LOGGER.info("AC probe %.3f -> %.3f: c_q %s, spreads %s -> %s", H.source, H.target, np.round(concentration, 4).tolist(), np.round(spreads, 3).tolist(), verdict)
    return ACProbe(grids, concentration, scales, spreads, verdict, counts)


# ---------------------------------------------------------------------------
# unique intersection


@dataclass(frozen=True, eq=False)
class IntersectionIndicator:
    averages: np.ndarray
    stderr: np.ndarray
    spreads: np.ndarray
    fraction: float
    t_grid: np.ndarray

    def summary(self) -> dict[str, object]:
        return {
            "leaves": int(self.averages.shape[0]),
            "members": int(self.averages.shape[1]),
            "fraction_above_noise": self.fraction,
            "median_spread": float(np.median(self.spreads)),
            "median_stderr": float(np.median(self.stderr)),
        }

    def rows(self) -> list[list[float]]:
        return [[leaf, float(t), float(v)] for leaf, row in enumerate(self.averages) for t, v in zip(self.t_grid, row)]


def unique_intersection_indicator(
    family: KatokFamily,
    solutions: Sequence[ConjugacySolution],
    leaves: int = 20,
    observable: TrigObservable | None = None,
    length: int = 4000,
    seed: int = 0,
    *,
    noise_multiplier: float = 3.0,
) -> IntersectionIndicator:
    """Fraction of center leaves whose Birkhoff averages differ across members beyond noise.

    Member t sees phi o h_t^-1 along the L-orbit of the leaf's base point.
    """
    if family.profile != "varying":
        LOGGER.info("unique-intersection indicator on a %s family (control run)", family.profile)
    if length < 2:
        raise PreconditionError("Birkhoff length must be at least 2")
    phi = observable or TrigObservable.default(2)
    starts = uniform_points(seed, leaves, 2, stream=LEAF_STREAM)
    averages = np.empty((leaves, len(solutions)))
    errors = np.empty((leaves, len(solutions)))
    for k, sol in enumerate(solutions):
        values = phi(sol.inverse_orbit(starts, length)).T
        averages[:, k] = values.mean(axis=0)
        errors[:, k] = batch_means_stderr(values, get_settings().batch_blocks)
    spreads = averages.max(axis=1) - averages.min(axis=1)
    stderr = errors.mean(axis=1)
    fraction = float(np.mean(spreads > noise_multiplier * stderr)) if len(solutions) > 1 else 0.0
    return IntersectionIndicator(averages, stderr, spreads, fraction, np.asarray(family.t_grid, dtype=float))
