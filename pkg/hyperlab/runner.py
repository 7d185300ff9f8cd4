"""Experiment orchestration: one block plan per experiment kind."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from functools import cached_property
from importlib.metadata import PackageNotFoundError, version
from typing import Any, Callable

import numpy as np

from hyperlab import __version__
from hyperlab.config.settings import AppSettings, get_settings
from hyperlab.dynamics.algebra import (
    ToralAutomorphism,
    analyze_matrix,
    characteristic_polynomial,
    eigen_frame,
    is_irreducible,
)
from hyperlab.dynamics.cocycle import ExponentEstimate, invariant_splitting, volume_average_exponents
from hyperlab.dynamics.conjugacy import (
    B1_NOTE,
    ConjugacySolution,
    periodic_data,
    probe_scales,
    rigidity_diagnostics,
    solve_conjugacy,
)
from hyperlab.dynamics.entropy import conditional_entropy, partial_entropy_gap, pesin_report
from hyperlab.dynamics.errors import HyperlabError, PreconditionError
from hyperlab.dynamics.foliation import (
    density_equivariance_defect,
    expanding_view,
    gibbs_density,
    leaf_invariance_defect,
    trace_leaf,
)
from hyperlab.dynamics.maps import KatokFamily, SkewProductMap, SmoothTorusMap, build_map
from hyperlab.dynamics.parallel import uniform_points
from hyperlab.dynamics.skew import (
    absolute_continuity_probe,
    center_holonomy,
    center_leaf_invariance,
    holonomy_cocycle_defect,
    skew_center_holonomy,
    solve_family,
    trace_center_leaf,
    unique_intersection_indicator,
)
from hyperlab.models.documents import ExperimentConfig
from hyperlab.models.report import Report, ResultBlock
from hyperlab.storage.cache import ResultCache

LOGGER = logging.getLogger(__name__)

ANCHOR_STREAM = 5
NORMALIZATION_TOLERANCE = 1e-8
INVARIANCE_TOLERANCE = 1e-5
PERIODIC_MATCH = 1e-6


def _plain(value: Any) -> Any:
    """numpy values to JSON-ready Python values."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _block(payload: dict[str, Any], verdicts: dict[str, str] | None = None, notes: list[str] | None = None, tables: dict[str, list] | None = None) -> ResultBlock:
    return ResultBlock(
        name="",
        payload=_plain(payload),
        verdicts=verdicts or {},
        notes=notes or [],
        tables={k: _plain(v) for k, v in (tables or {}).items()},
    )


@dataclass
class ExperimentContext:
    """Lazily built shared objects; blocks served from cache never build them."""

    config: ExperimentConfig
    settings: AppSettings
    workers: int

    @property
    def params(self):
        return self.config.params

    @cached_property
    def built(self) -> SmoothTorusMap | SkewProductMap | KatokFamily:
        return build_map(self.config.map)

    @cached_property
    def torus_map(self) -> SmoothTorusMap:
        built = self.built
        if isinstance(built, SkewProductMap):
            return built.map
        if isinstance(built, KatokFamily):
            raise PreconditionError("a Katok family has no single map; use the katok experiment")
        return built

    @cached_property
    def linear(self) -> ToralAutomorphism:
        f = self.torus_map
        if f.linear_part is None:
            raise PreconditionError("map has no hyperbolic linear part")
        return f.linear_part

    @cached_property
    def exponents(self) -> ExponentEstimate:
        return volume_average_exponents(
            self.torus_map,
            samples=self.params.samples,
            orbit_length=self.params.orbit_length,
            seed=self.config.seed,
            blocks=self.settings.batch_blocks,
            workers=self.workers,
        )

    @cached_property
    def solution(self) -> ConjugacySolution:
        return solve_conjugacy(
            self.torus_map, self.linear, self.settings.conjugacy_tolerance, self.params.test_set_size, self.config.seed
        )

    @cached_property
    def family(self) -> KatokFamily:
        if not isinstance(self.built, KatokFamily):
            raise PreconditionError("katok experiments need a katok map document")
        return self.built

    @cached_property
    def family_solutions(self) -> list[ConjugacySolution]:
        return solve_family(self.family, test_set_size=min(200, self.params.test_set_size), seed=self.config.seed, workers=self.workers)

    def expanding_bundle(self) -> int:
        if self.params.bundle is not None:
            return self.params.bundle
        return self.torus_map.dim - 1


# ---------------------------------------------------------------------------
# blocks


def spectrum_block(ctx: ExperimentContext) -> ResultBlock:
    matrix = np.asarray(ctx.config.map.matrix, dtype=np.int64)
    L = analyze_matrix(matrix)
    payload = L.summary()
    payload["characteristic_polynomial"] = characteristic_polynomial(matrix)
    payload["irreducible"] = is_irreducible(matrix)
    payload["top_exponent"] = float(L.exponents.max())
    return _block(payload)


def exponents_block(ctx: ExperimentContext) -> ResultBlock:
    est = ctx.exponents
    linear = np.log(np.abs(eigen_frame(ctx.torus_map.linear_matrix)[0]))
    payload = est.summary()
    payload["linear_exponents"] = linear
    payload["gaps"] = est.exponents - linear
    payload["c1_distance_bound"] = ctx.torus_map.c1_distance_bound
    rows = [[k, i, float(v)] for k, sample in enumerate(est.per_sample) for i, v in enumerate(sample)]
    return _block(payload, tables={"exponents": rows})


def duality_block(ctx: ExperimentContext) -> ResultBlock:
    inverse = volume_average_exponents(
        ctx.torus_map.inverse(), samples=ctx.params.samples, orbit_length=ctx.params.orbit_length, seed=ctx.config.seed, workers=ctx.workers
    )
    defect = ctx.exponents.exponents + inverse.exponents[::-1]
    return _block({"inverse_exponents": inverse.exponents, "duality_defect": float(np.max(np.abs(defect)))})


def splitting_block(ctx: ExperimentContext) -> ResultBlock:
    points = uniform_points(ctx.config.seed, ctx.params.diagnostic_points, ctx.torus_map.dim, stream=ANCHOR_STREAM)
    frames = invariant_splitting(
        ctx.torus_map,
        points,
        ctx.params.transient,
        tolerance=ctx.settings.splitting_residual,
        min_margin=ctx.settings.min_domination_margin,
    )
    return _block(frames.summary())


def conjugacy_block(ctx: ExperimentContext) -> ResultBlock:
    return _block(ctx.solution.summary(), notes=["h solves h o f = L o h and is isotopic to the identity"])


def periodic_block(ctx: ExperimentContext) -> ResultBlock:
    data = periodic_data(ctx.torus_map, ctx.linear, ctx.solution, ctx.params.period_max)
    verdict = "SMOOTH-CONSISTENT" if data.max_gap <= PERIODIC_MATCH else "SINGULAR-CONSISTENT"
    return _block(data.summary(), {"periodic": verdict}, tables={"periodic": data.rows()})


def gibbs_block(ctx: ExperimentContext) -> ResultBlock:
    f, index = expanding_view(ctx.torus_map, ctx.expanding_bundle())
    anchor = uniform_points(ctx.config.seed, 1, f.dim, stream=ANCHOR_STREAM)[0]
    segment = trace_leaf(f, index, anchor, ctx.params.leaf_step, ctx.params.leaf_half_length, transient=ctx.params.transient)
    profile = gibbs_density(f, index, segment, transient=ctx.params.transient)
    invariance = leaf_invariance_defect(f, segment, ctx.params.transient)
    equivariance = density_equivariance_defect(f, index, segment, profile.depth, ctx.params.transient)
    payload = {
        "bundle": index,
        "nodes": len(segment.arclength),
        "length": segment.length,
        "depth": profile.depth,
        "theta": profile.theta,
        "tail_bound": profile.tail_bound,
        "cauchy_gap": profile.cauchy_gap,
        "integral": profile.integral(),
        "rho_min": float(profile.values.min()),
        "rho_max": float(profile.values.max()),
        "leaf_invariance_defect": invariance,
        "density_equivariance_defect": equivariance,
    }
    verdicts = {
        "normalization": "PASS" if abs(profile.integral() - 1.0) <= NORMALIZATION_TOLERANCE else "FAIL",
        "leaf_invariance": "PASS" if invariance <= INVARIANCE_TOLERANCE else "FAIL",
        "density_equivariance": "PASS" if equivariance <= INVARIANCE_TOLERANCE else "FAIL",
    }
    return _block(payload, verdicts, tables={"leaf": segment.rows(), "density": profile.rows()})


def _entropy(ctx: ExperimentContext, sampling: str) -> ResultBlock:
    index = ctx.expanding_bundle()
    estimate = conditional_entropy(
        ctx.torus_map,
        index,
        ctx.params.delta,
        range(ctx.params.n_max + 1),
        ctx.params.samples,
        ctx.config.seed,
        sampling=sampling,  # type: ignore[arg-type]
        exponents=ctx.exponents,
        period_max=min(ctx.params.period_max, 4),
        workers=ctx.workers,
    )
    report = pesin_report(ctx.torus_map, index, estimate, ctx.exponents, ctx.config.thresholds, seed=ctx.config.seed)
    payload = {**estimate.summary(), "pesin": report.summary()}
    return _block(payload, {"pesin": report.verdict}, list(report.notes), {"balls": estimate.rows()})


def entropy_block(ctx: ExperimentContext) -> ResultBlock:
    return _entropy(ctx, "volume")


def entropy_control_block(ctx: ExperimentContext) -> ResultBlock:
    return _entropy(ctx, "periodic")


def _diagnostics(ctx: ExperimentContext, index: int) -> ResultBlock:
    diag = rigidity_diagnostics(
        ctx.torus_map,
        ctx.linear,
        ctx.solution,
        index,
        points=ctx.params.diagnostic_points,
        b3_steps=ctx.params.b3_steps,
        scales=probe_scales(ctx.params.coarsest_scale, ctx.params.scales),
        exponents=ctx.exponents,
        thresholds=ctx.config.thresholds,
        seed=ctx.config.seed,
        workers=ctx.workers,
    )
    tables = {
        "ratio_series": [[k, *row] for k, s in enumerate(diag.series) for row in s.rows()],
        "derivative_probe": [[k, *row] for k, p in enumerate(diag.probes) for row in p.rows()],
    }
    verdicts = {**diag.verdicts, "overall": diag.verdict}
    return _block(diag.summary(), verdicts, [B1_NOTE], tables)


def skew_exponents_block(ctx: ExperimentContext) -> ResultBlock:
    skew = ctx.built
    assert isinstance(skew, SkewProductMap)
    est = ctx.exponents
    center = float(est.exponents[skew.center_index])
    err = float(est.stderr[skew.center_index])
    neutral = abs(center) <= max(ctx.config.thresholds.stderr_multiplier * err, 1e-3)
    payload = {**est.summary(), "center_exponent": center, "epsilon_c": skew.epsilon_c}
    return _block(payload, {"center": "NEUTRAL" if neutral else "NON-NEUTRAL"})


def skew_entropy_block(ctx: ExperimentContext) -> ResultBlock:
    skew = ctx.built
    assert isinstance(skew, SkewProductMap)
    gap = partial_entropy_gap(
        skew, ctx.params.delta, range(ctx.params.n_max + 1), ctx.params.samples, ctx.config.seed, thresholds=ctx.config.thresholds, workers=ctx.workers
    )
    return _block(gap.summary(), {"partial_entropy": gap.verdict}, tables={"balls": gap.above.rows()})


def skew_holonomy_block(ctx: ExperimentContext) -> ResultBlock:
    skew = ctx.built
    assert isinstance(skew, SkewProductMap)
    H = skew_center_holonomy(skew, 0.0, 0.5, transient=ctx.params.transient)
    probe = absolute_continuity_probe(H, ctx.params.skew_grid, 1, ctx.config.seed, thresholds=ctx.config.thresholds)
    start = np.column_stack([uniform_points(ctx.config.seed, 4, 2, stream=ANCHOR_STREAM), np.zeros(4)])
    leaf = trace_center_leaf(skew, start, 0.5, transient=ctx.params.transient)
    payload = {**probe.summary(), "holonomy_residual": H.residual}
    notes = ["rotation normal form of center fibers is not extracted"]
    return _block(payload, {"absolute_continuity": probe.verdict}, notes, {"pushed_mass": probe.rows(), "center_leaf": leaf.rows()})


def katok_holonomy_block(ctx: ExperimentContext) -> ResultBlock:
    family = ctx.family
    sols = ctx.family_solutions
    i, j = (k % family.size for k in ctx.params.holonomy_pair)
    H = center_holonomy(family, i, j, sols)
    probe = absolute_continuity_probe(H, ctx.params.grid, ctx.params.refinements, ctx.config.seed, thresholds=ctx.config.thresholds)
    points = uniform_points(ctx.config.seed, 64, 2, stream=ANCHOR_STREAM)
    identity = float(np.max(np.abs(center_holonomy(family, i, i, sols).evaluate(points) - points)))
    payload: dict[str, Any] = {
        **probe.summary(),
        "t_source": H.source,
        "t_target": H.target,
        "holonomy_residual": H.residual,
        "identity_defect": identity,
        "leaf_invariance_defect": center_leaf_invariance(family, sols, points),
    }
    if family.size >= 3:
        mid = family.size // 2
        payload["cocycle_defect"] = holonomy_cocycle_defect(
            center_holonomy(family, 0, mid, sols), center_holonomy(family, mid, family.size - 1, sols), center_holonomy(family, 0, family.size - 1, sols), points
        )
    if family.unstable_sums is not None:
        payload["unstable_exponent_sums"] = family.unstable_sums
    return _block(payload, {"absolute_continuity": probe.verdict}, tables={"pushed_mass": probe.rows()})


def katok_intersection_block(ctx: ExperimentContext) -> ResultBlock:
    indicator = unique_intersection_indicator(
        ctx.family, ctx.family_solutions, ctx.params.leaves, length=ctx.params.birkhoff_length, seed=ctx.config.seed
    )
    if indicator.fraction >= 0.95:
        verdict = "UNIQUE-INTERSECTION-LIKE"
    elif indicator.fraction <= 0.05:
        verdict = "SHARED-AVERAGES"
    else:
        verdict = "INCONCLUSIVE"
    return _block(indicator.summary(), {"unique_intersection": verdict}, tables={"birkhoff": indicator.rows()})


BlockFn = Callable[[ExperimentContext], ResultBlock]


def _plan(config: ExperimentConfig) -> list[tuple[str, BlockFn]]:
    kind = config.kind
    if kind == "spectrum":
        return [("spectrum", spectrum_block)]
    if kind == "exponents":
        return [("exponents", exponents_block), ("duality", duality_block), ("splitting", splitting_block)]
    if kind == "conjugacy":
        return [("conjugacy", conjugacy_block), ("periodic", periodic_block)]
    if kind == "gibbs":
        return [("gibbs", gibbs_block)]
    if kind == "entropy":
        return [("exponents", exponents_block), ("entropy", entropy_block), ("entropy-periodic-control", entropy_control_block)]
    if kind == "skew":
        return [("exponents", skew_exponents_block), ("partial-entropy", skew_entropy_block), ("center-holonomy", skew_holonomy_block)]
    if kind == "katok":
        return [("holonomy", katok_holonomy_block), ("unique-intersection", katok_intersection_block)]
    dim = np.asarray(config.map.matrix).shape[0]
    diagnostics = [(f"diagnostics-{i}", (lambda ctx, i=i: _diagnostics(ctx, i))) for i in range(dim)]
    return [("exponents", exponents_block), ("conjugacy", conjugacy_block), *diagnostics, ("periodic", periodic_block)]


def _overall(config: ExperimentConfig, blocks: list[ResultBlock]) -> dict[str, str]:
    verdicts = {f"{b.name}.{k}": v for b in blocks for k, v in b.verdicts.items()}
    if config.kind == "full-rigidity":
        rigidity = [v for k, v in verdicts.items() if k.endswith(".overall") or k == "periodic.periodic"]
        if any(b.status == "error" for b in blocks) or not rigidity:
            verdicts["rigidity"] = "INCONCLUSIVE"
        elif all(v == "SMOOTH-CONSISTENT" for v in rigidity):
            verdicts["rigidity"] = "SMOOTH-CONSISTENT"
        elif all(v == "SINGULAR-CONSISTENT" for v in rigidity):
            verdicts["rigidity"] = "SINGULAR-CONSISTENT"
        else:
            verdicts["rigidity"] = "INCONCLUSIVE"
    return verdicts


def _versions() -> dict[str, str]:
    found = {"hyperlab": __version__}
    for package in ("numpy", "scipy", "pydantic", "typer", "PyYAML"):
        try:
            found[package] = version(package)
        except PackageNotFoundError:
            found[package] = "unknown"
    return found


def run_experiment(config: ExperimentConfig, *, use_cache: bool = True, settings: AppSettings | None = None) -> Report:
    """Run every block of the experiment; failing blocks are embedded, independent ones still run."""
    settings = settings or get_settings()
    workers = config.workers or settings.workers
    input_hash = config.content_hash()
    cache = ResultCache(settings.cache_dir, enabled=use_cache)
    ctx = ExperimentContext(config, settings, workers)
    started = time.perf_counter()
    blocks: list[ResultBlock] = []
    for name, fn in _plan(config):
        cached = cache.get(input_hash, name)
        if cached is not None:
            LOGGER.info("block %s served from cache", name)
            blocks.append(cached)
            continue
        LOGGER.info("running block %s", name)
        try:
            block = fn(ctx)
            block.name = name
        except (HyperlabError, np.linalg.LinAlgError) as exc:
            LOGGER.warning("block %s failed: %s: %s", name, type(exc).__name__, exc)
            block = ResultBlock(name=name, status="error", error=f"{type(exc).__name__}: {exc}")
        cache.put(input_hash, block)
        blocks.append(block)
    return Report(
        kind=config.kind,
        config=config.model_dump(mode="json"),
        input_hash=input_hash,
        blocks=blocks,
        verdicts=_overall(config, blocks),
        wall_clock_seconds=time.perf_counter() - started,
        versions=_versions(),
    )
