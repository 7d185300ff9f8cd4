"""Lyapunov exponents and invariant one-dimensional line fields.

Bundle index ``i`` follows the linear spectrum ordered by |eigenvalue|
ascending (index 0 is the strongest stable direction). Line fields are the
intersection of two dominated flags: pushing the linear eigen-flag forward
along a backward orbit gives ``E_i + ... + E_{d-1}``, pushing it backward
along a forward orbit gives ``E_0 + ... + E_i``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from math import ceil, log

import numpy as np

from hyperlab.dynamics.algebra import eigen_frame
from hyperlab.dynamics.errors import ConeCollapse, OrbitEscapedPrecision, PreconditionError
from hyperlab.dynamics.maps import SmoothTorusMap
from hyperlab.dynamics.parallel import chunked, parallel_map, uniform_points
from hyperlab.dynamics.stats import batch_means_stderr, sample_stderr

LOGGER = logging.getLogger(__name__)

MIN_ORBIT = 1000
CONDITIONING_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class ExponentEstimate:
    """Exponents sorted ascending with standard errors."""

    exponents: np.ndarray
    stderr: np.ndarray
    orbit_length: int
    initial_points: np.ndarray
    volume_averaged: bool
    log_det_average: float
    per_sample: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.exponents))

    def summary(self) -> dict[str, object]:
        return {
            "exponents": self.exponents.tolist(),
            "stderr": self.stderr.tolist(),
            "orbit_length": self.orbit_length,
            "samples": int(self.initial_points.shape[0]),
            "volume_averaged": self.volume_averaged,
            "log_det_average": self.log_det_average,
        }


def linear_seed(f: SmoothTorusMap) -> np.ndarray:
    """Eigenvectors of the linear part as columns, |eigenvalue| ascending."""
    if f.linear_part is not None:
        return f.linear_part.eigenvectors
    return eigen_frame(f.linear_matrix)[1]


def _orthonormal(columns: np.ndarray, count: int) -> np.ndarray:
    q, _ = np.linalg.qr(columns)
    return np.broadcast_to(q, (count,) + q.shape).copy()


def _qr_sweep(f: SmoothTorusMap, x0: np.ndarray, steps: int, blocks: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-block mean log stretch (blocks, M, d) in QR column order, and log|det| sums."""
    m, d = x0.shape
    q = _orthonormal(linear_seed(f)[:, ::-1], m)
    block_sums = np.zeros((blocks, m, d))
    block_sizes = np.zeros(blocks)
    logdet = np.zeros(m)
    x = x0
    for k in range(steps):
        x, jac = f.step(x)
        q, r = np.linalg.qr(jac @ q)
        diag = np.abs(np.diagonal(r, axis1=-2, axis2=-1))
        if not np.all(np.isfinite(diag)) or np.any(diag.min(axis=-1) <= CONDITIONING_FLOOR * diag.max(axis=-1)):
            raise OrbitEscapedPrecision(f"QR conditioning lost at step {k}")
        b = k * blocks // steps
        block_sums[b] += np.log(diag)
        block_sizes[b] += 1
        logdet += np.linalg.slogdet(jac)[1]
    return block_sums / block_sizes[:, None, None], block_sums.sum(axis=0) / steps, logdet / steps


def _sweep_chunk(args: tuple[SmoothTorusMap, np.ndarray, int, int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    f, points, steps, blocks = args
    return _qr_sweep(f, points, steps, blocks)


def lyapunov_exponents(
    f: SmoothTorusMap,
    x0: np.ndarray | None = None,
    orbit_length: int = 10_000,
    seed: int = 0,
    blocks: int = 20,
) -> ExponentEstimate:
    """Full exponent spectrum along one orbit by QR re-orthonormalization at every step."""
    if orbit_length < MIN_ORBIT:
        raise PreconditionError(f"orbit length must be at least {MIN_ORBIT}")
    start = uniform_points(seed, 1, f.dim) if x0 is None else np.asarray(x0, dtype=float).reshape(1, f.dim)
    block_means, totals, logdet = _qr_sweep(f, start, orbit_length, blocks)
    exponents = totals[0][::-1]
    stderr = batch_means_stderr(block_means[:, 0, :], blocks)[::-1]
    return ExponentEstimate(exponents, stderr, orbit_length, start, False, float(logdet[0]), exponents[None, :])


def volume_average_exponents(
    f: SmoothTorusMap,
    samples: int = 16,
    orbit_length: int = 10_000,
    seed: int = 0,
    blocks: int = 20,
    workers: int = 1,
) -> ExponentEstimate:
    """Mean exponents over uniformly drawn initial points with across-sample errors."""
    if orbit_length < MIN_ORBIT:
        raise PreconditionError(f"orbit length must be at least {MIN_ORBIT}")
    if not f.is_volume_preserving():
        raise PreconditionError(f"volume averages need a volume-preserving map (defect {f.volume_defect():.2e})")
    points = uniform_points(seed, samples, f.dim)
    parts = chunked(range(samples), workers)
    results = parallel_map(_sweep_chunk, [(f, points[idx], orbit_length, blocks) for idx in parts], workers)
    per_sample = np.concatenate([totals for _, totals, _ in results])[:, ::-1]
    logdet = np.concatenate([ld for _, _, ld in results])
    LOGGER.debug("volume average over %d samples of length %d", samples, orbit_length)
    return ExponentEstimate(
        exponents=per_sample.mean(axis=0),
        stderr=sample_stderr(per_sample),
        orbit_length=orbit_length,
        initial_points=points,
        volume_averaged=True,
        log_det_average=float(logdet.mean()),
        per_sample=per_sample,
    )


# ---------------------------------------------------------------------------
# invariant splitting


@dataclass(frozen=True, eq=False)
class BundleFrame:
    """Line fields at one base point; ``vectors[:, i]`` spans E_i."""

    point: np.ndarray
    vectors: np.ndarray
    residual: float
    margins: np.ndarray


@dataclass(frozen=True, eq=False)
class BundleFrames:
    """Line fields at a batch of points."""

    points: np.ndarray
    vectors: np.ndarray
    residual: np.ndarray
    rates: np.ndarray
    margins: np.ndarray
    transient: int

    def frame(self, k: int) -> BundleFrame:
        return BundleFrame(self.points[k], self.vectors[k], float(self.residual[k]), self.margins[k])

    def bundle(self, index: int) -> np.ndarray:
        return self.vectors[:, :, index]

    def summary(self) -> dict[str, object]:
        return {
            "points": int(self.points.shape[0]),
            "transient": self.transient,
            "max_residual": float(self.residual.max()),
            "min_margin": float(self.margins.min()) if self.margins.size else None,
            "mean_rates": self.rates.mean(axis=0).tolist(),
        }


def transient_length(f: SmoothTorusMap, tolerance: float, minimum: int) -> int:
    """Iterations needed for the linear domination gap to shrink errors below tolerance."""
    if f.linear_part is not None:
        values = f.linear_part.eigenvalues
    else:
        values = eigen_frame(f.linear_matrix)[0]
    gaps = np.diff(np.log(np.abs(values)))
    gap = float(gaps.min()) if gaps.size else 1.0
    return max(minimum, int(ceil(log(1.0 / tolerance) / gap)) + 10)


def _pushed_flags(g: SmoothTorusMap, x: np.ndarray, seed: np.ndarray, steps: int, with_restart: bool) -> tuple[np.ndarray, np.ndarray | None, np.ndarray]:
    """Push an orthonormal flag along g^-steps(x) ... x with Dg.

    Returns the flag at x, the flag from one fewer step (for the residual),
    and the finite-time log rates of the columns.
    """
    back = g.inverse()
    orbit = [x]
    for _ in range(steps):
        orbit.append(back.evaluate(orbit[-1]))
    m = x.shape[0]
    qa = _orthonormal(seed, m)
    qb = None
    rates = np.zeros((m, x.shape[1]))
    for k in range(steps, 0, -1):
        jac = g.jacobian(orbit[k])
        qa, r = np.linalg.qr(jac @ qa)
        rates += np.log(np.abs(np.diagonal(r, axis1=-2, axis2=-1)))
        if with_restart and k < steps:
            if qb is None:
                qb = _orthonormal(seed, m)
            qb, _ = np.linalg.qr(jac @ qb)
    return qa, qb, rates / steps


def _intersect(upper: np.ndarray | None, lower: np.ndarray | None) -> np.ndarray:
    """Unit vector spanning the 1-d intersection of two batches of subspaces."""
    if upper is None:
        return lower[..., 0]
    if lower is None:
        return upper[..., 0]
    overlap = np.swapaxes(upper, -1, -2) @ lower
    u, _, _ = np.linalg.svd(overlap)
    vec = np.einsum("mij,mj->mi", upper, u[..., 0])
    return vec / np.linalg.norm(vec, axis=-1, keepdims=True)


def _orient(vectors: np.ndarray, reference: np.ndarray) -> np.ndarray:
    sign = np.where(vectors @ reference < 0, -1.0, 1.0)
    return vectors * sign[:, None]


def _angle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    cos = np.clip(np.abs(np.sum(a * b, axis=-1)), 0.0, 1.0)
    return np.sqrt(np.maximum(0.0, 1.0 - cos**2))


def _line_fields(
    f: SmoothTorusMap, points: np.ndarray, indices: list[int], steps: int, with_residual: bool
) -> tuple[dict[int, np.ndarray], np.ndarray, np.ndarray | None]:
    d = f.dim
    seed = linear_seed(f)
    need_forward = any(i > 0 for i in indices)
    need_backward = any(i < d - 1 for i in indices)
    fwd = _pushed_flags(f, points, seed[:, ::-1], steps, with_residual) if need_forward else (None, None, None)
    bwd = _pushed_flags(f.inverse(), points, seed, steps, with_residual) if need_backward else (None, None, None)
    vectors: dict[int, np.ndarray] = {}
    residual = np.zeros(points.shape[0])
    for i in indices:
        upper = fwd[0][..., : d - i] if need_forward and i > 0 else None
        lower = bwd[0][..., : i + 1] if need_backward and i < d - 1 else None
        vec = _orient(_intersect(upper, lower), seed[:, i])
        vectors[i] = vec
        if with_residual:
            upper_b = fwd[1][..., : d - i] if upper is not None else None
            lower_b = bwd[1][..., : i + 1] if lower is not None else None
            residual = np.maximum(residual, _angle(vec, _intersect(upper_b, lower_b)))
    rates = fwd[2][..., ::-1] if need_forward else None
    return vectors, residual, rates


def bundle_field(
    f: SmoothTorusMap,
    points: np.ndarray,
    index: int,
    transient: int = 60,
    tolerance: float = 1e-8,
) -> np.ndarray:
    """Unit vectors of E_index at a batch of points (no residual bookkeeping)."""
    pts = np.asarray(points, dtype=float).reshape(-1, f.dim)
    steps = transient_length(f, tolerance, transient)
    vectors, _, _ = _line_fields(f, pts, [index], steps, with_residual=False)
    return vectors[index]


def invariant_splitting(
    f: SmoothTorusMap,
    points: np.ndarray,
    n_transient: int = 60,
    *,
    tolerance: float = 1e-8,
    min_margin: float = 1e-3,
    fail_residual: float = 1e-6,
) -> BundleFrames:
    """All one-dimensional line fields at the given points, with residuals and domination margins."""
    pts = np.asarray(points, dtype=float).reshape(-1, f.dim)
    steps = transient_length(f, tolerance, n_transient)
    d = f.dim
    vectors, residual, rates = _line_fields(f, pts, list(range(d)), steps, with_residual=True)
    if rates is None:
        rates = np.zeros((pts.shape[0], d))
    margins = np.diff(rates, axis=-1)
    if margins.size and float(margins.min()) < min_margin:
        raise ConeCollapse(f"domination margin {float(margins.min()):.3e} below {min_margin}")
    worst = float(residual.max())
    if worst > fail_residual:
        raise ConeCollapse(f"line fields did not converge: residual {worst:.3e} after {steps} iterations")
    if worst > tolerance:
        LOGGER.warning("splitting residual %.3e above tolerance %.1e", worst, tolerance)
    stacked = np.stack([vectors[i] for i in range(d)], axis=-1)
    return BundleFrames(pts, stacked, residual, rates, margins, steps)


def leafwise_jacobian(f: SmoothTorusMap, points: np.ndarray, index: int, vectors: np.ndarray | None = None, transient: int = 60) -> np.ndarray:
    """J(w) = |Df(w) e_index(w)| at a batch of points."""
    pts = np.asarray(points, dtype=float).reshape(-1, f.dim)
    if vectors is None:
        vectors = bundle_field(f, pts, index, transient)
    return np.linalg.norm(np.einsum("mij,mj->mi", f.jacobian(pts), vectors), axis=-1)
