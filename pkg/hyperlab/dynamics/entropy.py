"""Entropy along expanding foliations from leafwise dynamical balls.

Balls stand in for subordinate partitions: the conditional entropy is the
growth rate of -log(length of the n-th leafwise dynamical ball).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from hyperlab.config.settings import VerdictThresholds, get_settings
from hyperlab.dynamics.cocycle import ExponentEstimate, volume_average_exponents
from hyperlab.dynamics.conjugacy import periodic_data
from hyperlab.dynamics.errors import PreconditionError
from hyperlab.dynamics.foliation import ball_profile, expanding_view
from hyperlab.dynamics.maps import SkewProductMap, SmoothTorusMap, linear_map
from hyperlab.dynamics.parallel import parallel_map, uniform_points
from hyperlab.dynamics.stats import AffineFit, affine_fit, best_window_fit, sample_stderr

LOGGER = logging.getLogger(__name__)

ENTROPY_STREAM = 11
BALLS_NOTE = "conditional entropy measured from leafwise dynamical balls in place of subordinate partitions"

Sampling = Literal["volume", "periodic"]


@dataclass(frozen=True, eq=False)
class EntropyEstimate:
    """Entropy of one expanding foliation with its companion exponent."""

    index: int
    delta: float
    n_values: np.ndarray
    points: np.ndarray
    lengths: np.ndarray
    entropy: float
    stderr: float
    fit: AffineFit
    exponent: float | None = None
    exponent_stderr: float = 0.0
    sampling: Sampling = "volume"
    notes: list[str] = field(default_factory=lambda: [BALLS_NOTE])

    @property
    def gap(self) -> float | None:
        return None if self.exponent is None else self.entropy - self.exponent

    def summary(self) -> dict[str, object]:
        return {
            "index": self.index,
            "delta": self.delta,
            "n_range": [int(self.n_values.min()), int(self.n_values.max())],
            "window": [int(self.n_values[self.fit.start]), int(self.n_values[self.fit.stop - 1])],
            "entropy": self.entropy,
            "stderr": self.stderr,
            "r_squared": self.fit.r_squared,
            "exponent": self.exponent,
            "gap": self.gap,
            "sampling": self.sampling,
            "notes": self.notes,
        }

    def rows(self) -> list[list[float]]:
        return [[k, int(n), float(v)] for k, row in enumerate(self.lengths) for n, v in zip(self.n_values, row)]


def _sample_balls(args: tuple) -> np.ndarray:
    g, index, x, delta, n_values = args
    return ball_profile(g, index, x, delta, n_values)


def lowest_multiplier_orbit(f: SmoothTorusMap, index: int, period_max: int = 4) -> tuple[np.ndarray, float]:
    """Orbit of the periodic point whose multiplier along bundle ``index`` grows slowest."""
    g, j = expanding_view(f, index)
    if g.linear_part is None:
        raise PreconditionError("periodic sampling needs a hyperbolic linear part")
    data = periodic_data(g, g.linear_part, None, period_max)
    if not data.records:
        raise PreconditionError("no periodic orbits found for the periodic sampling control")
    best = min(data.records, key=lambda r: r.leafwise_rates[j])
    return g.orbit(best.point, best.period - 1), float(best.leafwise_rates[j])


def conditional_entropy(
    f: SmoothTorusMap,
    index: int,
    delta: float = 0.05,
    n_values: Sequence[int] = tuple(range(26)),
    samples: int = 16,
    seed: int = 0,
    *,
    sampling: Sampling = "volume",
    points: np.ndarray | None = None,
    exponents: ExponentEstimate | None = None,
    period_max: int = 4,
    workers: int = 1,
) -> EntropyEstimate:
    """h(f, F_index) from the slope of -log(ball length) against n.

    Contracting bundles route through f^-1. ``sampling="periodic"`` places
    every base point on the periodic orbit with the lowest leafwise rate.
    """
    settings = get_settings()
    g, j = expanding_view(f, index)
    n_arr = np.asarray(sorted(set(int(n) for n in n_values)), dtype=int)
    if points is None:
        if sampling == "periodic":
            points, rate = lowest_multiplier_orbit(f, index, period_max)
            LOGGER.info("periodic control: orbit of length %d with leafwise rate %.5f", len(points), rate)
        else:
            if not f.is_volume_preserving():
                raise PreconditionError("volume sampling needs a volume-preserving map")
            points = uniform_points(seed, samples, f.dim, stream=ENTROPY_STREAM)
    points = np.asarray(points, dtype=float).reshape(-1, f.dim)
    rows = parallel_map(_sample_balls, [(g, j, x, delta, list(n_arr)) for x in points], workers)
    lengths = np.array(rows)
    logs = -np.log(lengths)
    fit = best_window_fit(n_arr, logs.mean(axis=0), settings.entropy_min_window, settings.entropy_min_r2)
    window = slice(fit.start, fit.stop)
    slopes = np.array([affine_fit(n_arr[window], row[window]).slope for row in logs])
    stderr = float(sample_stderr(slopes)) if len(slopes) > 1 else fit.slope_stderr
    exponent = None
    exponent_err = 0.0
    if exponents is not None:
        exponent = abs(float(exponents.exponents[index]))
        exponent_err = float(exponents.stderr[index])
    LOGGER.info("entropy along bundle %d: %.5f +/- %.5f (window n=%d..%d)", index, fit.slope, stderr, n_arr[fit.start], n_arr[fit.stop - 1])
    return EntropyEstimate(
        index=index,
        delta=delta,
        n_values=n_arr,
        points=points,
        lengths=lengths,
        entropy=float(fit.slope),
        stderr=stderr,
        fit=fit,
        exponent=exponent,
        exponent_stderr=exponent_err,
        sampling=sampling,
    )


PesinVerdict = Literal["PESIN_EQUAL", "RUELLE_STRICT", "RUELLE_VIOLATED"]


@dataclass(frozen=True)
class PesinReport:
    index: int
    entropy: float
    exponent: float
    deficit: float
    tolerance: float
    verdict: PesinVerdict
    sampling: str
    notes: tuple[str, ...]

    def summary(self) -> dict[str, object]:
        return {
            "index": self.index,
            "entropy": self.entropy,
            "exponent": self.exponent,
            "deficit": self.deficit,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "sampling": self.sampling,
            "notes": list(self.notes),
        }


def _gate(deficit: float, stderr: float, scale: float, limits: VerdictThresholds) -> tuple[float, str]:
    tolerance = max(limits.stderr_multiplier * stderr, limits.pesin_relative_floor * abs(scale))
    if abs(deficit) <= tolerance:
        return tolerance, "EQUAL"
    return tolerance, "STRICT" if deficit > 0 else "VIOLATED"


def pesin_report(
    f: SmoothTorusMap,
    index: int,
    estimate: EntropyEstimate,
    exponents: ExponentEstimate | None = None,
    thresholds: VerdictThresholds | None = None,
    *,
    seed: int = 0,
) -> PesinReport:
    """Compare the entropy estimate with the volume exponent: deficit = lambda - h."""
    limits = thresholds or get_settings().thresholds
    if exponents is None:
        exponents = volume_average_exponents(f, samples=10, orbit_length=4000, seed=seed)
    lam = abs(float(exponents.exponents[index]))
    lam_err = float(exponents.stderr[index])
    deficit = lam - estimate.entropy
    tolerance, outcome = _gate(deficit, float(np.hypot(estimate.stderr, lam_err)), lam, limits)
    verdict: PesinVerdict = {"EQUAL": "PESIN_EQUAL", "STRICT": "RUELLE_STRICT", "VIOLATED": "RUELLE_VIOLATED"}[outcome]  # type: ignore[assignment]
    notes = [BALLS_NOTE]
    if estimate.sampling == "volume":
        notes.append("volume is smooth along the foliation, so equality is expected (see the Gibbs density profile)")
    else:
        notes.append("sampling concentrated on a periodic orbit: strict Ruelle inequality expected")
    LOGGER.info("Pesin check bundle %d: lambda %.5f, h %.5f -> %s", index, lam, estimate.entropy, verdict)
    return PesinReport(index, estimate.entropy, lam, deficit, tolerance, verdict, estimate.sampling, tuple(notes))


GapVerdict = Literal["EQUAL", "DROP", "VIOLATED"]


@dataclass(frozen=True, eq=False)
class PartialEntropyGap:
    above: EntropyEstimate
    below: EntropyEstimate
    gap: float
    stderr: float
    tolerance: float
    verdict: GapVerdict

    def summary(self) -> dict[str, object]:
        return {
            "h_above": self.above.entropy,
            "h_below": self.below.entropy,
            "gap": self.gap,
            "stderr": self.stderr,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "notes": [
                BALLS_NOTE,
                "c-invariance of conditional measures is tested through this gap only",
            ],
        }


def partial_entropy_gap(
    skew: SkewProductMap,
    delta: float = 0.05,
    n_values: Sequence[int] = tuple(range(21)),
    samples: int = 12,
    seed: int = 0,
    *,
    thresholds: VerdictThresholds | None = None,
    workers: int = 1,
) -> PartialEntropyGap:
    """Strong-unstable entropy of the skew against the unstable entropy of its base automorphism."""
    limits = thresholds or get_settings().thresholds
    above = conditional_entropy(skew.map, skew.strong_unstable_index, delta, n_values, samples, seed, workers=workers)
    base = linear_map(skew.base)
    below = conditional_entropy(base, skew.base.dim - 1, delta, n_values, samples, seed, workers=workers)
    gap = below.entropy - above.entropy
    stderr = float(np.hypot(above.stderr, below.stderr))
    tolerance, outcome = _gate(gap, stderr, below.entropy, limits)
    verdict: GapVerdict = {"EQUAL": "EQUAL", "STRICT": "DROP", "VIOLATED": "VIOLATED"}[outcome]  # type: ignore[assignment]
    LOGGER.info("partial entropy: above %.5f, below %.5f, gap %.5f -> %s", above.entropy, below.entropy, gap, verdict)
    return PartialEntropyGap(above, below, gap, stderr, tolerance, verdict)
