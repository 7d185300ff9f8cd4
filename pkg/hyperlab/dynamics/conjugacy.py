"""Conjugacy with the linear model and the rigidity diagnostics built on it.

The conjugacy solves ``h o f = L o h`` with ``h = id + u`` isotopic to the
identity. Writing ``f(x) = L x + p(x)`` on lifts, ``u`` is the unique bounded
solution of ``L u(x) - u(f(x)) = p(x)``, summed spectrally:
unstable components along forward orbits, stable components along backward
orbits. The inverse is the f-orbit shadowing the L-orbit of a point, found
by Newton on the sparse block system of orbit equations.
"""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from math import ceil, log
from typing import Literal

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve

from hyperlab.config.settings import VerdictThresholds, get_settings
from hyperlab.dynamics.algebra import ToralAutomorphism, TorusPoint, nearest_lift, periodic_points, reduce_mod1, torus_distance
from hyperlab.dynamics.cocycle import ExponentEstimate, bundle_field, leafwise_jacobian, volume_average_exponents
from hyperlab.dynamics.errors import FitUnstable, NewtonDiverged, NoConvergence, PreconditionError
from hyperlab.dynamics.foliation import expanding_view, trace_leaf
from hyperlab.dynamics.maps import SmoothTorusMap
from hyperlab.dynamics.parallel import parallel_map, uniform_points
from hyperlab.dynamics.stats import AffineFit, affine_fit, batch_means_stderr, sample_stderr

LOGGER = logging.getLogger(__name__)

MEMO_BITS = 40
MEMO_LIMIT = 200_000
SHADOW_UNKNOWNS = 1 << 17
DAMPING_STEPS = 30
TEST_STREAM = 7
PROBE_STREAM = 3
CONSISTENCY_FLOOR = 1e-12

Verdict = Literal["SMOOTH-CONSISTENT", "SINGULAR-CONSISTENT", "INCONCLUSIVE"]
B1_NOTE = "implied by equivalence with B2-B4; not measured directly"


@dataclass(eq=False)
class ConjugacySolution:
    """Evaluable h = id + u with a certified residual on a seeded test set."""

    f: SmoothTorusMap
    L: ToralAutomorphism
    depth: int
    tail_bound: float
    residual: float = 0.0
    test_points: int = 0
    memo_limit: int = MEMO_LIMIT
    _memo: OrderedDict[tuple[int, ...], np.ndarray] = field(default_factory=OrderedDict, repr=False)

    def __post_init__(self) -> None:
        self._basis = self.L.eigenvectors
        self._dual = np.linalg.inv(self._basis)
        self._matrix = self.L.matrix.astype(float)
        values = self.L.eigenvalues
        unstable = np.abs(values) > 1.0
        n = np.arange(self.depth + 1)[:, None]
        self._forward = np.where(unstable, values[None, :] ** (-(n + 1.0)), 0.0)
        self._backward = np.where(unstable, 0.0, -(values[None, :] ** (n - 1.0)))
        self._backward[0] = 0.0
        # end conditions: stable coordinates vanish at -N, unstable ones at +N
        self._pins = np.concatenate([self._dual[~unstable], self._dual[unstable]])
        self._stable_count = int(np.count_nonzero(~unstable))
        self._shadow_depth: int | None = None

    def _offset(self, x: np.ndarray) -> np.ndarray:
        return self.f.lift_evaluate(x) - x @ self._matrix.T

    def _series(self, x: np.ndarray) -> np.ndarray:
        acc = np.zeros_like(x)
        y = x
        for n in range(self.depth + 1):
            acc += self._forward[n] * (self._offset(y) @ self._dual.T)
            if n < self.depth:
                y = self.f.evaluate(y)
        back = self.f.inverse()
        y = x
        for n in range(1, self.depth + 1):
            y = back.evaluate(y)
            acc += self._backward[n] * (self._offset(y) @ self._dual.T)
        return acc @ self._basis.T

    def displacement(self, x: np.ndarray, *, memo: bool = True) -> np.ndarray:
        """u(x) for a batch of points."""
        pts = reduce_mod1(np.asarray(x, dtype=float)).reshape(-1, self.f.dim)
        if not memo:
            return self._series(pts)
        keys = [tuple(np.round(p * 2.0**MEMO_BITS).astype(np.int64).tolist()) for p in pts]
        missing = [i for i, k in enumerate(keys) if k not in self._memo]
        computed = self._series(pts[missing]) if missing else np.empty((0, self.f.dim))
        fresh = dict(zip((keys[i] for i in missing), computed))
        out = np.array([fresh[k] if k in fresh else self._memo[k] for k in keys]).reshape(pts.shape)
        for key in keys:
            if key in self._memo:
                self._memo.move_to_end(key)
        self._memo.update(fresh)
        while len(self._memo) > self.memo_limit:
            self._memo.popitem(last=False)
        return out

    @property
    def memo_size(self) -> int:
        return len(self._memo)

    def evaluate(self, x: np.ndarray) -> TorusPoint:
        shape = np.shape(x)
        pts = reduce_mod1(np.asarray(x, dtype=float)).reshape(-1, self.f.dim)
        return reduce_mod1(pts + self.displacement(pts)).reshape(shape)

    @property
    def shadow_depth(self) -> int:
        """Half-length N of the shadowing window used by ``inverse_evaluate``."""
        if self._shadow_depth is None:
            settings = get_settings()
            depth, _ = series_depth(self.f, self.L, settings.inverse_tolerance, settings.conjugacy_max_terms)
            self._shadow_depth = depth + 1
        return self._shadow_depth

    def _base_orbit(self, y: np.ndarray, ahead: int = 0) -> np.ndarray:
        """L^k y reduced mod 1 for k = -N..ahead+N, shape (points, 2N + ahead + 1, d)."""
        n = self.shadow_depth
        back = self.L.inverse().matrix.astype(float)
        base = np.empty((len(y), 2 * n + ahead + 1, self.f.dim))
        base[:, n] = y
        for k in range(n):
            base[:, n - k - 1] = reduce_mod1(base[:, n - k] @ back.T)
        for k in range(n, base.shape[1] - 1):
            base[:, k + 1] = reduce_mod1(base[:, k] @ self._matrix.T)
        return base

    def _orbit_residual(self, base: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        out[:, :-1] = v[:, 1:] - v[:, :-1] @ self._matrix.T - self._offset(base[:, :-1] + v[:, :-1])
        s = self._stable_count
        out[:, -1, :s] = v[:, 0] @ self._pins[:s].T
        out[:, -1, s:] = v[:, -1] @ self._pins[s:].T
        return out

    def _orbit_matrix(self, jac: np.ndarray) -> coo_matrix:
        """Block-bidiagonal Jacobian of the orbit equations, one diagonal block per point."""
        points, steps, d = jac.shape[0], jac.shape[1] + 1, self.f.dim
        k, a, b = np.meshgrid(np.arange(steps - 1), np.arange(d), np.arange(d), indexing="ij")
        jac_rows, jac_cols = (k * d + a).ravel(), (k * d + b).ravel()
        eye_rows = np.arange((steps - 1) * d)
        r, c = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
        ends = np.where(r < self._stable_count, 0, steps - 1)
        pin_rows, pin_cols = ((steps - 1) * d + r).ravel(), (ends * d + c).ravel()
        rows = np.concatenate([jac_rows, eye_rows, pin_rows])
        cols = np.concatenate([jac_cols, eye_rows + d, pin_cols])
        data = np.concatenate(
            [
                -jac.reshape(points, -1),
                np.ones((points, eye_rows.size)),
                np.broadcast_to(self._pins.ravel(), (points, d * d)),
            ],
            axis=1,
        )
        offsets = (np.arange(points) * steps * d)[:, None]
        size = points * steps * d
        return coo_matrix((data.ravel(), ((rows + offsets).ravel(), (cols + offsets).ravel())), shape=(size, size))

    def _shadow(self, y: np.ndarray, ahead: int = 0) -> np.ndarray:
        """Shadowing points h^-1(L^k y) for k = 0..ahead, shape (points, ahead + 1, d)."""
        settings = get_settings()
        base = self._base_orbit(y, ahead)
        v = np.zeros_like(base)
        residual = self._orbit_residual(base, v)
        norm = np.linalg.norm(residual.reshape(len(y), -1), axis=1)
        for _ in range(settings.newton_max_iter):
            active = norm > settings.inverse_tolerance
            if not active.any():
                break
            jac = self.f.jacobian(base[:, :-1] + v[:, :-1])
            step = spsolve(self._orbit_matrix(jac).tocsc(), -residual.ravel()).reshape(v.shape)
            lam = np.ones(len(y))
            pending = active.copy()
            for _ in range(DAMPING_STEPS):
                trial = v + lam[:, None, None] * step
                trial_residual = self._orbit_residual(base, trial)
                trial_norm = np.linalg.norm(trial_residual.reshape(len(y), -1), axis=1)
                accept = pending & (trial_norm <= (1.0 - 1e-4 * lam) * norm)
                v[accept], residual[accept], norm[accept] = trial[accept], trial_residual[accept], trial_norm[accept]
                pending &= ~accept
                if not pending.any():
                    break
                lam = np.where(pending, 0.5 * lam, lam)
        if norm.max(initial=0.0) > settings.inverse_tolerance:
            raise NoConvergence(f"shadowing orbit for h^-1 did not converge (residual {norm.max():.2e})")
        n = self.shadow_depth
        return reduce_mod1(base[:, n : n + ahead + 1] + v[:, n : n + ahead + 1])

    def _chunk(self, ahead: int) -> int:
        return max(1, SHADOW_UNKNOWNS // ((2 * self.shadow_depth + ahead + 1) * self.f.dim))

    def inverse_evaluate(self, y: TorusPoint) -> TorusPoint:
        """Solve h(x) = y: x is the center of the f-orbit shadowing the L-orbit of y.

        Newton starts from the linear model (the L-orbit itself) with a
        per-point backtracking line search.
        """
        shape = np.shape(y)
        target = reduce_mod1(np.asarray(y, dtype=float)).reshape(-1, self.f.dim)
        out = np.empty_like(target)
        chunk = self._chunk(0)
        for start in range(0, len(target), chunk):
            out[start : start + chunk] = self._shadow(target[start : start + chunk])[:, 0]
        return out.reshape(shape)

    def inverse_orbit(self, y: TorusPoint, length: int) -> np.ndarray:
        """h^-1(L^k y) for k < length in one shadowing solve per point, shape (points, length, d).

        Equals ``inverse_evaluate`` along the L-orbit, since h^-1 o L = f o h^-1.
        """
        if length < 1:
            raise PreconditionError("orbit length must be positive")
        target = reduce_mod1(np.asarray(y, dtype=float)).reshape(-1, self.f.dim)
        out = np.empty((len(target), length, self.f.dim))
        chunk = self._chunk(length - 1)
        for start in range(0, len(target), chunk):
            out[start : start + chunk] = self._shadow(target[start : start + chunk], length - 1)
        return out

    def residual_on(self, points: np.ndarray) -> np.ndarray:
        """torus-distance(h(f(x)), L(h(x)))."""
        hx = self.evaluate(points)
        return torus_distance(self.evaluate(self.f.evaluate(points)), reduce_mod1(hx @ self.L.matrix.T.astype(float)))

    def summary(self) -> dict[str, object]:
        return {
            "depth": self.depth,
            "tail_bound": self.tail_bound,
            "residual": self.residual,
            "test_points": self.test_points,
        }


def series_depth(f: SmoothTorusMap, L: ToralAutomorphism, tol: float, max_terms: int) -> tuple[int, float]:
    """Smallest N whose geometric tail bound is below ``tol``, and that bound."""
    values = np.abs(L.eigenvalues)
    mu = float(np.max(np.where(values > 1.0, 1.0 / values, values)))
    scale = 2.0 * float(np.linalg.cond(L.eigenvectors)) * f.c0_distance_bound * np.sqrt(f.dim)
    if scale == 0.0:
        return 0, 0.0
    depth = max(0, int(ceil(log(tol * (1.0 - mu) / scale) / log(mu))) - 1)
    if depth > max_terms:
        raise NoConvergence(f"conjugacy series needs {depth} terms (> {max_terms})")
    return depth, scale * mu ** (depth + 1) / (1.0 - mu)


def solve_conjugacy(
    f: SmoothTorusMap,
    L: ToralAutomorphism | None = None,
    tol: float | None = None,
    test_set_size: int = 1000,
    seed: int = 0,
) -> ConjugacySolution:
    """Conjugacy h with h o f = L o h, certified on ``test_set_size`` seeded points."""
    settings = get_settings()
    L = f.linear_part if L is None else L
    if L is None:
        raise PreconditionError("conjugacy needs a hyperbolic linear part")
    if not np.array_equal(np.asarray(L.matrix), np.asarray(f.linear_matrix)):
        raise PreconditionError("map is not isotopic to the given automorphism")
    if not L.simple_real_distinct:
        raise PreconditionError("spectral projections need simple real eigenvalues of distinct modulus")
    tol = settings.conjugacy_tolerance if tol is None else tol
    norm = float(np.linalg.norm(L.matrix.astype(float), 2))
    depth, tail = series_depth(f, L, tol / (norm + 1.0), settings.conjugacy_max_terms)
    solution = ConjugacySolution(f, L, depth, tail)
    points = uniform_points(seed, test_set_size, f.dim, stream=TEST_STREAM)
    residual = float(solution.residual_on(points).max()) if test_set_size else 0.0
    solution.residual = residual
    solution.test_points = test_set_size
    LOGGER.info("conjugacy: depth %d, tail %.2e, residual %.2e on %d points", depth, tail, residual, test_set_size)
    if residual > tol:
        raise NoConvergence(f"conjugacy residual {residual:.2e} above tolerance {tol:.1e}")
    return solution


# ---------------------------------------------------------------------------
# B3: cocycle ratios along matched orbits


@dataclass(frozen=True, eq=False)
class RatioSeries:
    index: int
    anchor: np.ndarray
    values: np.ndarray
    fit: AffineFit
    slope_stderr: float
    bound: float

    def rows(self) -> list[list[float]]:
        return [[n + 1, float(v)] for n, v in enumerate(self.values)]


def _linear_rate(L: ToralAutomorphism, index: int) -> float:
    return float(np.log(abs(L.eigenvalues[index])))


def b3_ratio_series(
    f: SmoothTorusMap,
    L: ToralAutomorphism,
    h: ConjugacySolution | None,
    index: int,
    x: np.ndarray,
    n_max: int = 1000,
    *,
    transient: int = 60,
) -> RatioSeries:
    """log of prod J_f(f^i x) / prod J_L(L^i h(x)) for n = 1..n_max.

    Contracting bundles are handled through f^-1 and L^-1, so the slope is
    in the expanding-view convention. J_L is the constant |lambda_index| on
    every L-orbit, so the matched orbit of h(x) never has to be evaluated;
    ``h`` is kept in the signature for that matching and may be None.
    """
    g, j = expanding_view(f, index)
    lin = L if g is f else L.inverse()
    anchor = reduce_mod1(np.asarray(x, dtype=float))
    orbit = g.orbit(anchor, n_max - 1)
    jac = leafwise_jacobian(g, orbit, j, bundle_field(g, orbit, j, transient))
    increments = np.log(jac) - _linear_rate(lin, j)
    values = np.cumsum(increments)
    n = np.arange(1, n_max + 1, dtype=float)
    fit = affine_fit(n, values)
    stderr = float(batch_means_stderr(increments, get_settings().batch_blocks))
    return RatioSeries(index, anchor, values, fit, stderr, float(np.max(np.abs(values))))


# ---------------------------------------------------------------------------
# B5': multi-scale leafwise derivative of h


@dataclass(frozen=True, eq=False)
class DerivativeProbe:
    index: int
    anchor: np.ndarray
    scales: np.ndarray
    leaf_distances: np.ndarray
    ratios: np.ndarray
    holder: float
    stabilized: bool

    def rows(self) -> list[list[float]]:
        return [[float(s), float(d), float(r)] for s, d, r in zip(self.scales, self.leaf_distances, self.ratios)]


def probe_scales(coarsest: float, count: int) -> np.ndarray:
    return coarsest * 2.0 ** -np.arange(count, dtype=float)


def leafwise_derivative_probe(
    f: SmoothTorusMap,
    L: ToralAutomorphism,
    h: ConjugacySolution,
    index: int,
    x: np.ndarray,
    scales: np.ndarray,
    *,
    stabilization: float | None = None,
    transient: int = 60,
) -> DerivativeProbe:
    """Ratios of L-leaf distance between h-images to f-leaf arclength at shrinking scales."""
    tol = get_settings().thresholds.ratio_stabilization if stabilization is None else stabilization
    scales = np.asarray(scales, dtype=float)
    anchor = reduce_mod1(np.asarray(x, dtype=float))
    segment = trace_leaf(f, index, anchor, half_length=1.05 * float(scales.max()), transient=transient)
    ys = reduce_mod1(segment.point_at(scales))
    hx = h.evaluate(anchor)
    hy = h.evaluate(ys)
    coords = nearest_lift(hx[None, :], hy) @ np.linalg.inv(L.eigenvectors).T
    distances = np.abs(coords[:, index])
    ratios = distances / scales
    fit = affine_fit(np.log(scales), np.log(distances))
    drift = np.abs(ratios[1:] / ratios[:-1] - 1.0)
    stabilized = bool(np.all(drift[-3:] <= tol))
    return DerivativeProbe(index, anchor, scales, distances, ratios, fit.slope, stabilized)


# ---------------------------------------------------------------------------
# periodic data


@dataclass(frozen=True, eq=False)
class PeriodicRecord:
    point: np.ndarray
    period: int
    multipliers_f: np.ndarray
    multipliers_L: np.ndarray

    @property
    def relative_gaps(self) -> np.ndarray:
        return np.abs(np.abs(self.multipliers_f) - np.abs(self.multipliers_L)) / np.abs(self.multipliers_L)

    @property
    def leafwise_rates(self) -> np.ndarray:
        return np.log(np.abs(self.multipliers_f)) / self.period


@dataclass(frozen=True, eq=False)
class PeriodicData:
    records: list[PeriodicRecord]
    diverged: int

    @property
    def max_gap(self) -> float:
        return max((float(r.relative_gaps.max()) for r in self.records), default=0.0)

    def summary(self) -> dict[str, object]:
        return {"orbits": len(self.records), "diverged": self.diverged, "max_relative_gap": self.max_gap}

    def rows(self) -> list[list[float]]:
        return [[r.period, *map(float, r.point), *map(float, r.relative_gaps)] for r in self.records]


def _power_jacobian(f: SmoothTorusMap, x: np.ndarray, period: int) -> tuple[np.ndarray, np.ndarray]:
    """Lift of f^period and its Jacobian at a batch of points."""
    y = x
    jac = np.broadcast_to(np.eye(f.dim), x.shape[:-1] + (f.dim, f.dim)).copy()
    for _ in range(period):
        jac = f.jacobian(y) @ jac
        y = f.lift_evaluate(y)
    return y, jac


def _newton_periodic(f: SmoothTorusMap, seeds: np.ndarray, period: int) -> tuple[np.ndarray, np.ndarray]:
    """Newton on f^p(x) - x - k = 0; returns points and a convergence mask."""
    settings = get_settings()
    image, _ = _power_jacobian(f, seeds, period)
    shift = np.round(image - seeds)
    x = seeds.copy()
    done = np.zeros(len(x), dtype=bool)
    for _ in range(settings.newton_max_iter):
        image, jac = _power_jacobian(f, x, period)
        residual = image - x - shift
        done = np.linalg.norm(residual, axis=-1) <= settings.newton_tolerance
        if done.all():
            break
        step = np.linalg.solve(jac - np.eye(f.dim), residual[..., None])[..., 0]
        x = np.where(done[:, None], x, x - step)
    converged = done & np.all(np.isfinite(x), axis=-1)
    return x, converged


def periodic_data(
    f: SmoothTorusMap,
    L: ToralAutomorphism,
    h: ConjugacySolution | None,
    period_max: int = 6,
    *,
    max_points: int = 5000,
) -> PeriodicData:
    """Periodic orbits of f seeded at h^-1 of L's periodic points, with multiplier comparison."""
    if period_max > 12:
        raise PreconditionError("periods above 12 are not supported")
    records: list[PeriodicRecord] = []
    diverged = 0
    for p in range(1, period_max + 1):
        try:
            targets = periodic_points(L.matrix, p, max_points=max_points)
        except PreconditionError as exc:
            LOGGER.warning("skipping period %d: %s", p, exc)
            continue
        if not len(targets):
            continue
        seeds = h.inverse_evaluate(targets) if h is not None else targets
        points, ok = _newton_periodic(f, seeds, p)
        for k in np.flatnonzero(~ok):
            diverged += 1
            LOGGER.warning("%s", NewtonDiverged(f"Newton diverged for period {p} seed {np.round(targets[k], 6).tolist()}"))
        reference = np.sort(np.abs(L.eigenvalues)) ** p
        for point in points[ok]:
            _, jac = _power_jacobian(f, point[None, :], p)
            multipliers = np.linalg.eigvals(jac[0])
            multipliers = multipliers[np.argsort(np.abs(multipliers))]
            records.append(PeriodicRecord(reduce_mod1(point), p, np.abs(multipliers.real), reference))
    LOGGER.info("periodic data: %d orbits up to period %d, %d diverged", len(records), period_max, diverged)
    return PeriodicData(records, diverged)


# ---------------------------------------------------------------------------
# diagnostics suite


@dataclass(frozen=True, eq=False)
class RigidityDiagnostics:
    """B2-B5' measurements for one foliation index, with per-condition verdicts."""

    index: int
    b3_slope: float
    b3_slope_stderr: float
    b3_bound: float
    b2_jacobian_min: float
    b2_jacobian_max: float
    b5_holder: float
    b5_holder_stderr: float
    b5_stabilized_fraction: float
    b4_gap: float
    b4_stderr: float
    verdicts: dict[str, str]
    verdict: Verdict
    b2_drift: float = 0.0
    series: list[RatioSeries] = field(default_factory=list, repr=False)
    probes: list[DerivativeProbe] = field(default_factory=list, repr=False)

    @property
    def b2_oscillation(self) -> float:
        return self.b2_jacobian_max / self.b2_jacobian_min if self.b2_jacobian_min > 0 else float("inf")

    @property
    def b3_b4_difference(self) -> float:
        return self.b3_slope - self.b4_gap

    @property
    def b3_b4_stderr(self) -> float:
        return float(np.hypot(self.b3_slope_stderr, self.b4_stderr))

    def summary(self) -> dict[str, object]:
        return {
            "index": self.index,
            "b1": B1_NOTE,
            "b2": {
                "jacobian_min": self.b2_jacobian_min,
                "jacobian_max": self.b2_jacobian_max,
                "oscillation": self.b2_oscillation,
                "oscillation_drift": self.b2_drift,
            },
            "b3": {"slope": self.b3_slope, "slope_stderr": self.b3_slope_stderr, "bound": self.b3_bound},
            "b4": {"exponent_gap": self.b4_gap, "stderr": self.b4_stderr},
            "b3_b4": {"difference": self.b3_b4_difference, "stderr": self.b3_b4_stderr},
            "b5": {"holder": self.b5_holder, "holder_stderr": self.b5_holder_stderr, "stabilized_fraction": self.b5_stabilized_fraction},
            "verdicts": self.verdicts,
            "verdict": self.verdict,
        }


def _probe_point(args: tuple) -> tuple[RatioSeries, DerivativeProbe]:
    f, L, h, index, x, steps, scales = args
    series = b3_ratio_series(f, L, h, index, x, steps)
    try:
        probe = leafwise_derivative_probe(f, L, h, index, x, scales)
    except FitUnstable:
        probe = DerivativeProbe(index, x, scales, np.zeros_like(scales), np.zeros_like(scales), float("nan"), False)
    return series, probe


def oscillation_drift(probes: list[DerivativeProbe]) -> float:
    """Largest change of the across-point log-ratio oscillation over the three finest scale steps.

    A continuous positive leafwise Jacobian of h makes the oscillation settle
    to its own (finite) limit; infinite when any ratio vanishes.
    """
    table = np.array([p.ratios for p in probes])
    if not np.all(table > 0):
        return float("inf")
    logs = np.log(table)
    spread = logs.max(axis=0) - logs.min(axis=0)
    return float(np.abs(np.diff(spread))[-3:].max())


def rigidity_diagnostics(
    f: SmoothTorusMap,
    L: ToralAutomorphism,
    h: ConjugacySolution,
    index: int,
    *,
    points: int = 16,
    b3_steps: int = 1000,
    scales: np.ndarray | None = None,
    exponents: ExponentEstimate | None = None,
    thresholds: VerdictThresholds | None = None,
    seed: int = 0,
    workers: int = 1,
) -> RigidityDiagnostics:
    """Sweep uniformly sampled points (volume has full support) and decide smooth vs singular.

    B3 and B4 are both reported in the expanding-view convention: for a
    contracting bundle they measure f^-1 against L^-1. The ``b3_b4`` verdict
    checks that the two estimates of the same exponent gap agree; a
    disagreement makes the overall verdict INCONCLUSIVE.
    """
    limits = thresholds or get_settings().thresholds
    scales = probe_scales(0.1, 12) if scales is None else np.asarray(scales, dtype=float)
    sample = uniform_points(seed, points, f.dim, stream=PROBE_STREAM)
    results = parallel_map(_probe_point, [(f, L, h, index, x, b3_steps, scales) for x in sample], workers)
    series = [r[0] for r in results]
    probes = [r[1] for r in results]

    slopes = np.array([s.fit.slope for s in series])
    slope = float(slopes.mean())
    slope_err = float(np.sqrt(np.mean([s.slope_stderr**2 for s in series]) / len(series) + sample_stderr(slopes) ** 2))
    finest = np.array([p.ratios[-1] for p in probes])
    holders = np.array([p.holder for p in probes])
    holders = holders[np.isfinite(holders)]
    holder = float(np.median(holders)) if holders.size else float("nan")
    holder_err = float(sample_stderr(holders)) if holders.size else float("nan")
    stabilized = float(np.mean([p.stabilized for p in probes]))
    drift = oscillation_drift(probes)

    if exponents is None:
        exponents = volume_average_exponents(f, samples=10, orbit_length=4000, seed=seed, workers=workers)
    rate = _linear_rate(L, index)
    # exponents of f^-1 are the negated exponents of f
    sign = 1.0 if expanding_view(f, index)[0] is f else -1.0
    gap = sign * float(exponents.exponents[index] - rate)
    gap_err = float(exponents.stderr[index])
    mismatch = abs(slope - gap)
    mismatch_err = float(np.hypot(slope_err, gap_err))

    scale = limits.b3_slope_relative * abs(rate)
    verdicts = {
        "b1": "IMPLIED",
        "b2": "SMOOTH" if finest.min() > 0 and drift <= np.log1p(limits.ratio_stabilization) else "SINGULAR",
        "b3": "SMOOTH" if abs(slope) <= max(scale, limits.stderr_multiplier * slope_err) else "SINGULAR",
        "b4": "SMOOTH" if abs(gap) <= max(scale, limits.stderr_multiplier * gap_err) else "SINGULAR",
        "b5": "SMOOTH" if stabilized == 1.0 and abs(holder - 1.0) <= limits.holder_margin else "SINGULAR",
        "b3_b4": "AGREE" if mismatch <= max(CONSISTENCY_FLOOR, limits.stderr_multiplier * mismatch_err) else "DISAGREE",
    }
    measured = [verdicts[k] for k in ("b2", "b3", "b4", "b5")]
    if verdicts["b3_b4"] == "DISAGREE":
        verdict: Verdict = "INCONCLUSIVE"
    elif all(v == "SMOOTH" for v in measured):
        verdict = "SMOOTH-CONSISTENT"
    elif all(v == "SINGULAR" for v in measured):
        verdict = "SINGULAR-CONSISTENT"
    else:
        verdict = "INCONCLUSIVE"
    LOGGER.info("bundle %d: b3 slope %.4g, b4 gap %.4g (%s), holder %.3f -> %s", index, slope, gap, verdicts["b3_b4"], holder, verdict)
    return RigidityDiagnostics(
        index=index,
        b3_slope=slope,
        b3_slope_stderr=slope_err,
        b3_bound=float(max(s.bound for s in series)),
        b2_jacobian_min=float(finest.min()),
        b2_jacobian_max=float(finest.max()),
        b5_holder=holder,
        b5_holder_stderr=holder_err,
        b5_stabilized_fraction=stabilized,
        b4_gap=gap,
        b4_stderr=gap_err,
        verdicts=verdicts,
        verdict=verdict,
        b2_drift=drift,
        series=series,
        probes=probes,
    )
