"""One-dimensional invariant foliations: traced leaves, density products and dynamical balls."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from math import ceil, log

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline

from hyperlab.config.settings import get_settings
from hyperlab.dynamics.algebra import eigen_frame, nearest_lift, reduce_mod1
from hyperlab.dynamics.cocycle import bundle_field, leafwise_jacobian
from hyperlab.dynamics.errors import PreconditionError, StepRejected, TraceTooShort
from hyperlab.dynamics.maps import SmoothTorusMap

LOGGER = logging.getLogger(__name__)

MAX_TURN = 0.05
BALL_SUBNODES = 64
BALL_BISECTIONS = 80
BALL_RELATIVE = 1e-10
MAX_DEPTH = 400
LINEAR_SNAP = 1e-6
NEUTRAL_BAND = 1e-9


@dataclass(frozen=True, eq=False)
class LeafSegment:
    """Arclength-parameterized polyline through ``anchor`` tangent to E_index.

    ``lifts`` are unwrapped coordinates ordered by ``arclength``, which is
    zero at the anchor and negative before it.
    """

    index: int
    anchor: np.ndarray
    lifts: np.ndarray
    arclength: np.ndarray
    step: float
    half_length: float

    @property
    def nodes(self) -> np.ndarray:
        return reduce_mod1(self.lifts)

    @property
    def anchor_position(self) -> int:
        return int(np.argmin(np.abs(self.arclength)))

    @property
    def length(self) -> float:
        return float(self.arclength[-1] - self.arclength[0])

    def point_at(self, s: np.ndarray | float) -> np.ndarray:
        """Lifted point(s) at signed arclength ``s`` from the anchor."""
        return CubicSpline(self.arclength, self.lifts, axis=0)(s)

    def tangent_at(self, s: np.ndarray | float) -> np.ndarray:
        spline = CubicSpline(self.arclength, self.lifts, axis=0)
        d = np.atleast_2d(spline(s, 1))
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def rows(self) -> list[list[float]]:
        return [[float(s), *map(float, p)] for s, p in zip(self.arclength, self.nodes)]


def expanding_view(f: SmoothTorusMap, index: int) -> tuple[SmoothTorusMap, int]:
    """The map (f or f^-1) along which bundle ``index`` expands, with its index there."""
    values = f.linear_part.eigenvalues if f.linear_part is not None else eigen_frame(f.linear_matrix)[0]
    modulus = abs(float(values[index]))
    if modulus > 1.0 + NEUTRAL_BAND:
        return f, index
    if modulus < 1.0 - NEUTRAL_BAND:
        return f.inverse(), f.dim - 1 - index
    raise PreconditionError(f"bundle {index} is neutral for the linear part")


def _aligned(vectors: np.ndarray, reference: np.ndarray) -> np.ndarray:
    sign = np.where(np.sum(vectors * reference, axis=-1) < 0, -1.0, 1.0)
    return vectors * sign[:, None]


def _advance(
    f: SmoothTorusMap, index: int, p: np.ndarray, dirs: np.ndarray, h: float, min_step: float, transient: int
) -> tuple[np.ndarray, np.ndarray, float]:
    """Heun step of length h; halves the step while the field turns too fast."""
    predicted = p + h * dirs
    e_pred = _aligned(bundle_field(f, reduce_mod1(predicted), index, transient), dirs)
    turn = float(np.max(np.arccos(np.clip(np.sum(e_pred * dirs, axis=-1), -1.0, 1.0))))
    if turn > MAX_TURN:
        if h / 2 < min_step:
            raise StepRejected(f"leaf turns by {turn:.3f} rad over step {h:.2e}")
        p1, d1, l1 = _advance(f, index, p, dirs, h / 2, min_step, transient)
        p2, d2, l2 = _advance(f, index, p1, d1, h / 2, min_step, transient)
        return p2, d2, l1 + l2
    chord = dirs + e_pred
    chord /= np.linalg.norm(chord, axis=-1, keepdims=True)
    moved = p + h * chord
    e_new = _aligned(bundle_field(f, reduce_mod1(moved), index, transient), e_pred)
    return moved, e_new, h


def trace_leaf(
    f: SmoothTorusMap,
    index: int,
    x: np.ndarray,
    step: float | None = None,
    half_length: float = 0.3,
    *,
    transient: int = 60,
    min_step: float | None = None,
) -> LeafSegment:
    """Trace the leaf of E_index through x in both directions up to ``half_length``."""
    settings = get_settings()
    if half_length > settings.leaf_max_half_length:
        raise PreconditionError(f"leaf half-length {half_length} above cap {settings.leaf_max_half_length}")
    h = settings.leaf_step if step is None else step
    floor = settings.leaf_min_step if min_step is None else min_step
    count = max(1, int(ceil(half_length / h)))
    h = half_length / count
    anchor = reduce_mod1(np.asarray(x, dtype=float))
    e0 = bundle_field(f, anchor[None, :], index, transient)[0]
    p = np.stack([anchor, anchor])
    dirs = np.stack([e0, -e0])
    forward, backward = [anchor.copy()], [anchor.copy()]
    s = [0.0]
    for _ in range(count):
        p, dirs, ds = _advance(f, index, p, dirs, h, floor, transient)
        forward.append(p[0].copy())
        backward.append(p[1].copy())
        s.append(s[-1] + ds)
    lifts = np.array(backward[:0:-1] + forward)
    arc = np.array([-v for v in s[:0:-1]] + s)
    LOGGER.debug("traced leaf %d through %s: %d nodes", index, np.round(anchor, 4), len(arc))
    return LeafSegment(index, anchor, lifts, arc, h, half_length)


def _polyline_distance(points: np.ndarray, polyline: np.ndarray) -> np.ndarray:
    a = polyline[:-1]
    ab = polyline[1:] - a
    ap = points[:, None, :] - a[None, :, :]
    t = np.clip(np.sum(ap * ab, axis=-1) / np.maximum(np.sum(ab * ab, axis=-1), 1e-300), 0.0, 1.0)
    closest = a[None] + t[..., None] * ab[None]
    return np.linalg.norm(points[:, None, :] - closest, axis=-1).min(axis=1)


def leaf_invariance_defect(f: SmoothTorusMap, segment: LeafSegment, transient: int = 60) -> float:
    """Max distance from f(nodes) to the traced leaf through f(anchor)."""
    image = f.lift_evaluate(segment.lifts)
    pos = segment.anchor_position
    chord = np.linalg.norm(np.diff(image, axis=0), axis=-1)
    reach = max(float(chord[:pos].sum()), float(chord[pos:].sum()))
    target = trace_leaf(
        f,
        segment.index,
        image[pos],
        segment.step,
        min(get_settings().leaf_max_half_length, 1.1 * reach + segment.step),
        transient=transient,
    )
    shift = np.round(image[pos] - target.anchor)
    return float(_polyline_distance(image - shift, target.lifts).max())


# ---------------------------------------------------------------------------
# density products


@dataclass(frozen=True)
class DeltaProduct:
    """Truncated Delta_n(x, z) with its geometric tail bound."""

    value: float
    log_value: float
    depth: int
    theta: float
    tail_bound: float


def _require_expanding(f: SmoothTorusMap, index: int) -> None:
    g, _ = expanding_view(f, index)
    if g is not f:
        raise PreconditionError(f"bundle {index} is not expanding for this map; use expanding_view")


def _pulled_back(f: SmoothTorusMap, index: int, x: np.ndarray, zs: np.ndarray, depth: int, transient: int) -> tuple[np.ndarray, np.ndarray]:
    """Backward orbits of x and of leaf points zs, shapes (depth, d) and (depth, K, d).

    Each pulled-back point is put back on the leaf through f^-i x at its
    along-leaf offset; the transverse error otherwise grows under f^-1.
    """
    back = f.inverse()
    step = get_settings().leaf_step
    xs = np.empty((depth, f.dim))
    orbit = np.empty((depth,) + zs.shape)
    xi, zi = x, zs
    for i in range(depth):
        xi = back.evaluate(xi)
        offset = nearest_lift(xi[None, :], back.evaluate(zi))
        e = bundle_field(f, xi[None, :], index, transient)[0]
        s = np.sign(offset @ e) * np.linalg.norm(offset, axis=-1)
        reach = float(np.abs(s).max())
        if reach <= LINEAR_SNAP:
            zi = reduce_mod1(xi[None, :] + s[:, None] * e[None, :])
        else:
            leaf = trace_leaf(f, index, xi, step=min(step, reach), half_length=1.05 * reach, transient=transient)
            for _ in range(2):
                miss = offset - (leaf.point_at(s) - leaf.lifts[leaf.anchor_position])
                s = s + np.sum(miss * leaf.tangent_at(s), axis=-1)
            zi = reduce_mod1(leaf.point_at(s))
        xs[i] = xi
        orbit[i] = zi
    return xs, orbit


def _log_ratio_terms(f: SmoothTorusMap, index: int, x: np.ndarray, zs: np.ndarray, depth: int, transient: int) -> tuple[np.ndarray, float]:
    """Terms log J(f^-i x) - log J(f^-i z) for i = 1..depth, shape (depth, K), and theta."""
    xs, orbit = _pulled_back(f, index, x, zs, depth, transient)
    flat = np.concatenate([xs, orbit.reshape(-1, f.dim)])
    jac = leafwise_jacobian(f, flat, index, bundle_field(f, flat, index, transient))
    theta = float(1.0 / jac.min())
    logs = np.log(jac)
    return logs[:depth, None] - logs[depth:].reshape(depth, -1), theta


def _tail(terms: np.ndarray, theta: float) -> np.ndarray:
    return np.abs(terms[-1]) * theta / (1.0 - theta) if theta < 1.0 else np.full(terms.shape[1], np.inf)


def delta_products(f: SmoothTorusMap, index: int, x: np.ndarray, zs: np.ndarray, depth: int, transient: int = 60) -> list[DeltaProduct]:
    """Delta_depth(x, z) for each z on the leaf of x."""
    _require_expanding(f, index)
    x = reduce_mod1(np.asarray(x, dtype=float))
    zs = reduce_mod1(np.asarray(zs, dtype=float).reshape(-1, f.dim))
    if depth == 0:
        return [DeltaProduct(1.0, 0.0, 0, 0.0, np.inf) for _ in zs]
    terms, theta = _log_ratio_terms(f, index, x, zs, depth, transient)
    logs = terms.sum(axis=0)
    tails = _tail(terms, theta)
    return [DeltaProduct(float(np.exp(v)), float(v), depth, theta, float(t)) for v, t in zip(logs, tails)]


def delta_n(f: SmoothTorusMap, index: int, x: np.ndarray, z: np.ndarray, n: int, transient: int = 60) -> DeltaProduct:
    """Delta_n(x, z) = prod_{i=1..n} J(f^-i x) / J(f^-i z)."""
    return delta_products(f, index, x, np.asarray(z)[None, :], n, transient)[0]


@dataclass(frozen=True, eq=False)
class GibbsDensityProfile:
    """Normalized leaf density rho at the nodes of a traced segment."""

    segment: LeafSegment
    anchor: np.ndarray
    values: np.ndarray
    depth: int
    cauchy_gaps: np.ndarray
    theta: float
    tail_bound: float

    @property
    def cauchy_gap(self) -> float:
        return float(self.cauchy_gaps[-1]) if self.cauchy_gaps.size else 0.0

    def integral(self) -> float:
        return float(trapezoid(self.values, self.segment.arclength))

    def rows(self) -> list[list[float]]:
        return [row + [float(v)] for row, v in zip(self.segment.rows(), self.values)]


def _normalized(log_delta: np.ndarray, arclength: np.ndarray) -> np.ndarray:
    weights = np.exp(log_delta - log_delta.max(axis=-1, keepdims=True))
    return weights / trapezoid(weights, arclength, axis=-1)[..., None]


def gibbs_density(
    f: SmoothTorusMap,
    index: int,
    segment: LeafSegment,
    n: int | None = None,
    *,
    tail: float | None = None,
    transient: int = 60,
) -> GibbsDensityProfile:
    """rho(z) = Delta_n(x, z) / integral of Delta_n over the segment.

    Without an explicit depth, n grows until the product tail bound drops
    below ``tail``.
    """
    _require_expanding(f, index)
    tol = get_settings().density_tail if tail is None else tail
    if n is None:
        contraction = 1.0 / abs(float(eigen_frame(f.linear_matrix)[0][index]))
        depth = int(ceil(log(tol) / log(contraction))) + 2
    else:
        depth = n
    while True:
        terms, theta = _log_ratio_terms(f, index, segment.anchor, segment.nodes, max(depth, 1), transient)
        bound = float(_tail(terms, theta).max())
        if n is not None or bound <= tol or depth >= MAX_DEPTH:
            break
        depth = min(MAX_DEPTH, 2 * depth)
    if bound > tol:
        LOGGER.warning("density tail bound %.2e above %.1e at depth %d", bound, tol, depth)
    cumulative = np.cumsum(terms, axis=0)
    profiles = _normalized(np.vstack([np.zeros((1, cumulative.shape[1])), cumulative]), segment.arclength)
    gaps = np.abs(np.diff(profiles, axis=0)).max(axis=1)
    values = profiles[depth] if depth > 0 else profiles[0]
    return GibbsDensityProfile(segment, segment.anchor, values, depth, gaps[:depth], theta, bound)


def density_equivariance_defect(f: SmoothTorusMap, index: int, segment: LeafSegment, n: int, transient: int = 60) -> float:
    """Relative max defect of Delta_{n+1}(fx, fz) J(z) / J(x) = Delta_n(x, z) over the nodes."""
    _require_expanding(f, index)
    x = segment.anchor
    zs = segment.nodes
    here = np.array([d.log_value for d in delta_products(f, index, x, zs, n, transient)])
    fx = f.evaluate(x)
    fz = f.evaluate(zs)
    there = np.array([d.log_value for d in delta_products(f, index, fx, fz, n + 1, transient)])
    pts = np.vstack([x[None, :], zs])
    logs = np.log(leafwise_jacobian(f, pts, index, transient=transient))
    predicted = there + logs[1:] - logs[0]
    return float(np.max(np.abs(np.expm1(predicted - here))))


# ---------------------------------------------------------------------------
# dynamical balls


def _pushed_lengths(f: SmoothTorusMap, nodes: np.ndarray, n: int, delta: float) -> bool:
    """True when every forward image up to n keeps polyline length <= delta."""
    pts = reduce_mod1(nodes)
    for i in range(n + 1):
        if i:
            pts = f.evaluate(pts)
        length = float(np.linalg.norm(nearest_lift(pts[:-1], pts[1:]), axis=-1).sum())
        if length > delta:
            return False
    return True


def _side_extent(f: SmoothTorusMap, segment: LeafSegment, sign: float, delta: float, n: int, upper: float | None = None) -> float:
    limit = segment.half_length

    def inside(s: float) -> bool:
        return _pushed_lengths(f, segment.point_at(sign * np.linspace(0.0, s, BALL_SUBNODES)), n, delta)

    if inside(limit):
        raise TraceTooShort(f"ball boundary beyond traced half-length {limit}")
    lo, hi = 0.0, limit
    if upper is not None and upper < limit:
        if inside(upper):
            return upper
        hi = upper
    for _ in range(BALL_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= BALL_RELATIVE * hi:
            break
    return lo


def ball_segment(f: SmoothTorusMap, index: int, x: np.ndarray, delta: float, transient: int = 60) -> LeafSegment:
    """Leaf segment long enough to hold the n = 0 ball of radius delta."""
    half = min(2.0 * delta, get_settings().leaf_max_half_length)
    return trace_leaf(f, index, x, step=min(get_settings().leaf_step, half / 8.0), half_length=half, transient=transient)


def leaf_dynamical_ball(
    f: SmoothTorusMap,
    index: int,
    x: np.ndarray,
    delta: float,
    n: int,
    segment: LeafSegment | None = None,
    *,
    transient: int = 60,
) -> float:
    """Arclength of {y on the leaf of x : leaf distance of f^i x, f^i y <= delta, 0 <= i <= n}."""
    if segment is None:
        segment = ball_segment(f, index, x, delta, transient)
    return _side_extent(f, segment, 1.0, delta, n) + _side_extent(f, segment, -1.0, delta, n)


def ball_profile(
    f: SmoothTorusMap,
    index: int,
    x: np.ndarray,
    delta: float,
    n_values: list[int],
    segment: LeafSegment | None = None,
    *,
    transient: int = 60,
) -> np.ndarray:
    """Ball lengths for several n, bracketing each search by the previous (larger) ball."""
    if segment is None:
        segment = ball_segment(f, index, x, delta, transient)
    order = np.argsort(n_values)
    lengths = np.empty(len(n_values))
    right = left = None
    for k in order:
        right = _side_extent(f, segment, 1.0, delta, int(n_values[k]), right)
        left = _side_extent(f, segment, -1.0, delta, int(n_values[k]), left)
        lengths[k] = right + left
    return lengths
