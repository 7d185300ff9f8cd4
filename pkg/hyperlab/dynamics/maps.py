"""The map zoo: smooth torus maps built from exact factors.

Every map is a composition of integer linear factors and shears
``x_i += eps * phi(x_j)`` with trigonometric-polynomial profiles. Shears have
unit-triangular Jacobians, so every composition preserves volume exactly,
has a closed-form inverse and an exact chain-rule Jacobian.

Points are numpy arrays of shape ``(..., d)``; all evaluations are batched
over the leading axes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Sequence, Union

import numpy as np

from hyperlab.config.settings import get_settings
from hyperlab.dynamics.algebra import (
    ToralAutomorphism,
    TorusPoint,
    analyze_matrix,
    integer_inverse,
    reduce_mod1,
    torus_distance,
)
from hyperlab.dynamics.errors import PerturbationTooLarge, PreconditionError, ProfileNotAchieved
from hyperlab.dynamics.parallel import uniform_points
from hyperlab.dynamics.profiles import TrigProfile
from hyperlab.models.documents import MapDocument, ShearSpec

LOGGER = logging.getLogger(__name__)

FIBER = 2
VOLUME_STREAM = 19


@dataclass(frozen=True, eq=False)
class LinearFactor:
    """x -> M x for an integer unimodular matrix M."""

    matrix: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return x @ self.matrix.T.astype(float)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.matrix.astype(float), x.shape[:-1] + self.matrix.shape).copy()

    def inverse(self) -> "LinearFactor":
        return LinearFactor(integer_inverse(self.matrix))

    def embed(self, dim: int) -> "LinearFactor":
        out = np.eye(dim, dtype=np.int64)
        k = self.matrix.shape[0]
        out[:k, :k] = self.matrix
        return LinearFactor(out)

    def describe(self) -> dict[str, object]:
        return {"type": "linear", "matrix": self.matrix.tolist()}


@dataclass(frozen=True, eq=False)
class ShearFactor:
    """x_direction += amplitude * profile(x_driver); Jacobian determinant is exactly 1."""

    direction: int
    driver: int
    profile: TrigProfile
    amplitude: float

    def __post_init__(self) -> None:
        if self.direction == self.driver:
            raise PreconditionError("shear direction and driver must differ")

    def apply(self, x: np.ndarray) -> np.ndarray:
        y = np.array(x, dtype=float, copy=True)
        y[..., self.direction] += self.amplitude * self.profile.value(x[..., self.driver])
        return y

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        d = x.shape[-1]
        jac = np.broadcast_to(np.eye(d), x.shape[:-1] + (d, d)).copy()
        jac[..., self.direction, self.driver] += self.amplitude * self.profile.derivative(x[..., self.driver])
        return jac

    def inverse(self) -> "ShearFactor":
        return ShearFactor(self.direction, self.driver, self.profile, -self.amplitude)

    def scaled(self, factor: float) -> "ShearFactor":
        return ShearFactor(self.direction, self.driver, self.profile, self.amplitude * factor)

    @property
    def derivative_excess(self) -> float:
        return abs(self.amplitude) * self.profile.derivative_sup_norm

    @property
    def displacement(self) -> float:
        return abs(self.amplitude) * self.profile.sup_norm

    def embed(self, dim: int) -> "ShearFactor":
        return self

    def describe(self) -> dict[str, object]:
        return {
            "type": "shear",
            "direction": self.direction,
            "driver": self.driver,
            "amplitude": self.amplitude,
            "profile": self.profile.as_dict(),
        }


Factor = Union[LinearFactor, ShearFactor]


@dataclass(frozen=True, eq=False)
class SmoothTorusMap:
    """Evaluable map of T^d with exact Jacobian and inverse.

    ``factors`` are stored in application order. ``linear_part`` is the
    isotopy class when it is hyperbolic, ``None`` for partially hyperbolic
    maps whose linear part (e.g. ``L x id``) is only recorded as
    ``linear_matrix``.
    """

    factors: tuple[Factor, ...]
    linear_matrix: np.ndarray
    linear_part: ToralAutomorphism | None
    c1_distance_bound: float
    c0_distance_bound: float
    label: str = ""
    generator: "SmoothTorusMap | None" = None
    _inverse: list = field(default_factory=list, repr=False)

    @property
    def dim(self) -> int:
        return int(self.linear_matrix.shape[0])

    def lift_evaluate(self, x: np.ndarray) -> np.ndarray:
        y = np.asarray(x, dtype=float)
        for factor in self.factors:
            y = factor.apply(y)
        return y

    def evaluate(self, x: np.ndarray) -> TorusPoint:
        return reduce_mod1(self.lift_evaluate(x))

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        y = np.asarray(x, dtype=float)
        jac = np.broadcast_to(np.eye(self.dim), y.shape[:-1] + (self.dim, self.dim)).copy()
        for factor in self.factors:
            jac = factor.jacobian(y) @ jac
            y = factor.apply(y)
        return jac

    def step(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Image (mod 1) and Jacobian in one pass."""
        y = np.asarray(x, dtype=float)
        jac = np.broadcast_to(np.eye(self.dim), y.shape[:-1] + (self.dim, self.dim)).copy()
        for factor in self.factors:
            jac = factor.jacobian(y) @ jac
            y = factor.apply(y)
        return reduce_mod1(y), jac

    def inverse(self) -> "SmoothTorusMap":
        if not self._inverse:
            inv = compose(
                [factor.inverse() for factor in reversed(self.factors)],
                linear_part=self.linear_part.inverse() if self.linear_part is not None else None,
                label=f"{self.label}^-1" if self.label else "",
                generator=self.generator,
            )
            inv._inverse.append(self)
            self._inverse.append(inv)
        return self._inverse[0]

    def inverse_evaluate(self, x: np.ndarray) -> TorusPoint:
        return self.inverse().evaluate(x)

    def orbit(self, x: np.ndarray, steps: int) -> np.ndarray:
        """Points x, f(x), ..., f^steps(x) stacked on a new leading axis."""
        out = np.empty((steps + 1,) + np.shape(x))
        out[0] = reduce_mod1(x)
        for k in range(steps):
            out[k + 1] = self.evaluate(out[k])
        return out

    def iterate_lift(self, x: np.ndarray, steps: int) -> np.ndarray:
        y = np.asarray(x, dtype=float)
        for _ in range(steps):
            y = self.lift_evaluate(y)
        return y

    def volume_defect(self, samples: int = 256, seed: int = 0) -> float:
        """max | |det Df| - 1 | over seeded uniform points."""
        x = uniform_points(seed, samples, self.dim, stream=VOLUME_STREAM)
        return float(np.abs(np.abs(np.linalg.det(self.jacobian(x))) - 1.0).max())

    def is_volume_preserving(self, tol: float = 1e-9) -> bool:
        return self.volume_defect() <= tol

    def describe(self) -> dict[str, object]:
        return {
            "label": self.label,
            "dim": self.dim,
            "linear_matrix": self.linear_matrix.tolist(),
            "c1_distance_bound": self.c1_distance_bound,
            "c0_distance_bound": self.c0_distance_bound,
            "factors": [factor.describe() for factor in self.factors],
        }


def compose(
    factors: Sequence[Factor],
    *,
    linear_part: ToralAutomorphism | None = None,
    label: str = "",
    generator: SmoothTorusMap | None = None,
    dim: int | None = None,
) -> SmoothTorusMap:
    """Compose factors (application order) with certified distance bounds to the linear part.

    With ``L_k`` the product of the linear factors seen so far, the bounds
    follow the recurrences ``E_k = |A| E`` / ``E + e (|L_{k-1}| + E)`` for the
    derivative and ``D_k = |A| D`` / ``D + disp`` for the displacement.
    """
    if dim is None:
        linear = [f for f in factors if isinstance(f, LinearFactor)]
        dim = linear[0].matrix.shape[0] if linear else max(max(f.direction, f.driver) for f in factors) + 1
    matrix = np.eye(dim, dtype=np.int64)
    norm_bound = 1.0
    c1 = 0.0
    c0 = 0.0
    for factor in factors:
        if isinstance(factor, LinearFactor):
            a_norm = float(np.linalg.norm(factor.matrix.astype(float), 2))
            matrix = factor.matrix @ matrix
            c1 *= a_norm
            c0 *= a_norm
            norm_bound *= a_norm
        else:
            c1 += factor.derivative_excess * (norm_bound + c1)
            c0 += factor.displacement
    return SmoothTorusMap(
        factors=tuple(factors),
        linear_matrix=matrix,
        linear_part=linear_part,
        c1_distance_bound=c1,
        c0_distance_bound=c0,
        label=label,
        generator=generator,
    )


def _check_threshold(f: SmoothTorusMap, threshold: float | None) -> SmoothTorusMap:
    limit = get_settings().perturbation_threshold if threshold is None else threshold
    if f.c1_distance_bound > limit:
        raise PerturbationTooLarge(f"certified C1 bound {f.c1_distance_bound:.4g} exceeds threshold {limit:.4g}")
    return f


def linear_map(L: ToralAutomorphism) -> SmoothTorusMap:
    return compose([LinearFactor(L.matrix)], linear_part=L, label="L")


def shear_map(shears: Sequence[ShearFactor], dim: int) -> SmoothTorusMap:
    """g = S_1 o ... o S_m as a map isotopic to the identity."""
    return compose(list(reversed(shears)), label="g", dim=dim)


def make_shear_perturbation(L: ToralAutomorphism, shears: Sequence[ShearFactor], threshold: float | None = None) -> SmoothTorusMap:
    """f = L o S_1 o ... o S_m."""
    f = compose([*reversed(shears), LinearFactor(L.matrix)], linear_part=L, label="L.S")
    LOGGER.debug("shear perturbation with C1 bound %.4g", f.c1_distance_bound)
    return _check_threshold(f, threshold)


def conjugate_by(f0: SmoothTorusMap, shears: Sequence[ShearFactor], threshold: float | None = None, label: str = "g.f.g^-1") -> SmoothTorusMap:
    """g o f0 o g^-1 for g = S_1 o ... o S_m; requires g(0) = 0."""
    g = shear_map(shears, f0.dim) if shears else compose([], dim=f0.dim, label="id")
    origin = np.zeros(f0.dim)
    if shears and float(torus_distance(g.evaluate(origin), origin)) > 1e-12:
        raise PreconditionError("generator must fix the origin: g(0) != 0")
    g_inv = [s.inverse() for s in shears]
    factors = [*g_inv, *f0.factors, *reversed(shears)]
    f = compose(factors, linear_part=f0.linear_part, label=label, generator=g, dim=f0.dim)
    return _check_threshold(f, threshold)


def make_conjugated_linear(L: ToralAutomorphism, shears: Sequence[ShearFactor], threshold: float | None = None) -> SmoothTorusMap:
    """f = g o L o g^-1, smoothly conjugate to L; the conjugacy solving h o f = L o h is g^-1."""
    return conjugate_by(linear_map(L), shears, threshold, label="g.L.g^-1")


@dataclass(frozen=True, eq=False)
class SkewProductMap:
    """f(x, y) = (base(x), y + alpha(x)) followed by eps_c-scaled perturbation shears."""

    base: ToralAutomorphism
    base_map: SmoothTorusMap
    map: SmoothTorusMap
    rotation: float
    fiber_shift: tuple[ShearFactor, ...]
    fiber_perturbation: tuple[ShearFactor, ...]
    epsilon_c: float

    @property
    def strong_unstable_index(self) -> int:
        return 2

    @property
    def center_index(self) -> int:
        return 1

    @property
    def strong_stable_index(self) -> int:
        return 0


def make_skew_product(
    base: ToralAutomorphism | SmoothTorusMap,
    *,
    rotation: float = 0.0,
    fiber_shift: Sequence[ShearFactor] = (),
    fiber_perturbation: Sequence[ShearFactor] = (),
    epsilon_c: float = 0.0,
    conjugating_shears: Sequence[ShearFactor] = (),
    threshold: float | None = None,
) -> SkewProductMap:
    """Skew product over T^2 with circle fiber (coordinate 2)."""
    base_map = linear_map(base) if isinstance(base, ToralAutomorphism) else base
    if base_map.dim != 2 or base_map.linear_part is None:
        raise PreconditionError("skew products are built over an Anosov map of T^2")
    for shear in fiber_shift:
        if shear.direction != FIBER or shear.driver == FIBER:
            raise PreconditionError("fiber shift shears must move the fiber coordinate driven by a base coordinate")
    factors: list[Factor] = [*fiber_shift]
    if rotation:
        factors.append(ShearFactor(FIBER, 0, TrigProfile(constant=1.0), rotation))
    factors += [factor.embed(3) for factor in base_map.factors]
    factors += [shear.scaled(epsilon_c) for shear in fiber_perturbation]
    f = compose(factors, label="skew", dim=3)
    if conjugating_shears:
        f = conjugate_by(f, conjugating_shears, threshold=np.inf, label="g.skew.g^-1")
    _check_threshold(f, threshold)
    return SkewProductMap(
        base=base_map.linear_part,
        base_map=base_map,
        map=f,
        rotation=rotation,
        fiber_shift=tuple(fiber_shift),
        fiber_perturbation=tuple(fiber_perturbation),
        epsilon_c=epsilon_c,
    )


@dataclass(frozen=True, eq=False)
class KatokFamily:
    """Members gamma_t on a parameter grid; gamma(x, t) = (gamma_t(x), t)."""

    base: ToralAutomorphism
    template: tuple[ShearFactor, ...]
    profile: Literal["constant", "varying"]
    t_grid: np.ndarray
    members: tuple[SmoothTorusMap, ...]
    unstable_sums: np.ndarray | None = None
    unstable_stderr: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.members)

    def suspension(self, x: np.ndarray, index: int) -> tuple[np.ndarray, float]:
        """gamma(x, t_index): the fiber coordinate t is preserved."""
        return self.members[index].evaluate(x), float(self.t_grid[index])

    def generator(self, index: int) -> SmoothTorusMap | None:
        return self.members[index].generator


def make_katok_family(
    L: ToralAutomorphism,
    template: Sequence[ShearFactor],
    profile: Literal["constant", "varying"] = "constant",
    *,
    members: int = 4,
    t_grid: Sequence[float] | None = None,
    margin: float = 0.0,
    threshold: float | None = None,
    samples: int = 12,
    orbit_length: int = 4000,
    seed: int = 0,
) -> KatokFamily:
    """Build gamma_t with amplitudes scaled linearly in t.

    ``constant``: gamma_t = g_t o L o g_t^-1 (exponents of L for every t).
    ``varying``: gamma_t = L o S_t, whose volume exponents move with t; when
    ``margin > 0`` the measured spread of unstable exponent sums must reach it.
    """
    grid = np.asarray(t_grid, dtype=float) if t_grid is not None else (
        np.linspace(0.0, 1.0, members + 1) if members > 0 else np.array([0.0])
    )
    built: list[SmoothTorusMap] = []
    for t in grid:
        scaled = [shear.scaled(float(t)) for shear in template]
        if profile == "constant":
            built.append(make_conjugated_linear(L, scaled, threshold))
        else:
            built.append(make_shear_perturbation(L, scaled, threshold))
    family = KatokFamily(L, tuple(template), profile, grid, tuple(built))
    if profile == "varying" and margin > 0:
        from hyperlab.dynamics.cocycle import volume_average_exponents

        sums, errs = [], []
        for member in built:
            estimate = volume_average_exponents(member, samples=samples, orbit_length=orbit_length, seed=seed)
            unstable = estimate.exponents[L.stable_count :]
            sums.append(float(np.sum(unstable)))
            errs.append(float(np.sqrt(np.sum(estimate.stderr[L.stable_count :] ** 2))))
        spread = max(sums) - min(sums)
        LOGGER.info("Katok varying family: unstable exponent spread %.5f (margin %.5f)", spread, margin)
        if spread < margin:
            raise ProfileNotAchieved(f"exponent spread {spread:.5f} below requested margin {margin:.5f}")
        family = KatokFamily(L, tuple(template), profile, grid, tuple(built), np.array(sums), np.array(errs))
    return family


# ---------------------------------------------------------------------------
# documents


def shear_from_spec(spec: ShearSpec) -> ShearFactor:
    profile = TrigProfile(tuple(spec.profile.sin), tuple(spec.profile.cos), spec.profile.constant)
    return ShearFactor(spec.direction, spec.driver, profile, spec.amplitude)


def build_map(document: MapDocument) -> SmoothTorusMap | SkewProductMap | KatokFamily:
    """Instantiate the map described by a document."""
    shears = [shear_from_spec(s) for s in document.shears]
    if document.kind == "skew":
        spec = document.skew
        if spec is None:
            raise PreconditionError("skew document needs a 'skew' block")
        L = analyze_matrix(document.matrix)
        base: ToralAutomorphism | SmoothTorusMap = L
        if spec.base_shears:
            base = make_shear_perturbation(L, [shear_from_spec(s) for s in spec.base_shears], document.threshold)
        return make_skew_product(
            base,
            rotation=spec.rotation,
            fiber_shift=[shear_from_spec(s) for s in spec.fiber_shift],
            fiber_perturbation=[shear_from_spec(s) for s in spec.fiber_perturbation],
            epsilon_c=spec.epsilon_c,
            conjugating_shears=[shear_from_spec(s) for s in spec.conjugating_shears],
            threshold=document.threshold,
        )
    L = analyze_matrix(document.matrix)
    if document.kind == "linear":
        return linear_map(L)
    if document.kind == "perturbation":
        return make_shear_perturbation(L, shears, document.threshold)
    if document.kind == "conjugated":
        return make_conjugated_linear(L, shears, document.threshold)
    spec_k = document.katok
    if spec_k is None:
        raise PreconditionError("katok document needs a 'katok' block")
    return make_katok_family(
        L, shears, spec_k.profile, members=spec_k.members, margin=spec_k.margin, threshold=document.threshold
    )
