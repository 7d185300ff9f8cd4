"""Pydantic documents: map descriptions and experiment configuration."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from hyperlab.config.settings import VerdictThresholds
from hyperlab.dynamics.algebra import as_integer_matrix, parse_matrix

ExperimentKind = Literal["spectrum", "exponents", "conjugacy", "gibbs", "entropy", "skew", "katok", "full-rigidity"]


class ProfileSpec(BaseModel):
    """Fourier coefficients of a shear profile."""

    sin: list[float] = Field(default_factory=lambda: [0.15915494309189535])
    cos: list[float] = Field(default_factory=list)
    constant: float = 0.0


class ShearSpec(BaseModel):
    """x_direction += amplitude * profile(x_driver)."""

    direction: int = Field(ge=0)
    driver: int = Field(ge=0)
    amplitude: float
    profile: ProfileSpec = Field(default_factory=ProfileSpec)

    @model_validator(mode="after")
    def _distinct_axes(self) -> "ShearSpec":
        if self.direction == self.driver:
            raise ValueError("direction and driver must differ")
        return self


class SkewSpec(BaseModel):
    """Fiber data of a skew product over T^2 (fiber coordinate index 2)."""

    rotation: float = 0.1
    fiber_shift: list[ShearSpec] = Field(default_factory=list)
    fiber_perturbation: list[ShearSpec] = Field(default_factory=list)
    epsilon_c: float = 0.0
    base_shears: list[ShearSpec] = Field(default_factory=list)
    conjugating_shears: list[ShearSpec] = Field(default_factory=list)


class KatokSpec(BaseModel):
    """One-parameter family gamma_t built from a shear template."""

    profile: Literal["constant", "varying"] = "constant"
    members: int = Field(default=4, ge=0)
    margin: float = Field(default=0.0, ge=0.0)


class MapDocument(BaseModel):
    """Canonical experiment input describing a torus map."""

    kind: Literal["linear", "perturbation", "conjugated", "skew", "katok"] = "linear"
    matrix: list[list[int]]
    shears: list[ShearSpec] = Field(default_factory=list)
    skew: Optional[SkewSpec] = None
    katok: Optional[KatokSpec] = None
    threshold: Optional[float] = None

    @field_validator("matrix", mode="before")
    @classmethod
    def _parse_matrix(cls, value: object) -> list[list[int]]:
        if isinstance(value, str):
            return parse_matrix(value).tolist()
        return as_integer_matrix(value).tolist()  # type: ignore[arg-type]

    def content_hash(self) -> str:
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


class NumericParams(BaseModel):
    """Numeric knobs of an experiment; every field is echoed into the report."""

    orbit_length: int = Field(default=10_000, ge=1000)
    samples: int = Field(default=16, ge=1)
    delta: float = Field(default=0.05, gt=0)
    n_max: int = Field(default=25, ge=1)
    scales: int = Field(default=12, ge=3)
    coarsest_scale: float = 0.1
    b3_steps: int = Field(default=1000, ge=10)
    diagnostic_points: int = Field(default=16, ge=1)
    test_set_size: int = Field(default=1000, ge=1)
    grid: int = Field(default=64, ge=8)
    refinements: int = Field(default=2, ge=1)
    leaves: int = Field(default=20, ge=1)
    birkhoff_length: int = Field(default=4000, ge=100)
    period_max: int = Field(default=6, ge=1, le=12)
    leaf_half_length: float = Field(default=0.3, gt=0)
    leaf_step: float = Field(default=5e-3, gt=0)
    transient: int = Field(default=60, ge=1)
    bundle: Optional[int] = Field(default=None, ge=0)
    skew_grid: int = Field(default=16, ge=4)
    holonomy_pair: tuple[int, int] = (0, -1)


class ExperimentConfig(BaseModel):
    """Validated experiment configuration."""

    kind: ExperimentKind
    map: MapDocument
    params: NumericParams = Field(default_factory=NumericParams)
    thresholds: VerdictThresholds = Field(default_factory=VerdictThresholds)
    seed: int = 0
    output_dir: Optional[Path] = None
    workers: Optional[int] = Field(default=None, ge=1)

    def content_hash(self) -> str:
        """Git-style blob hash of the canonical config (output location excluded)."""
        body = self.model_dump(mode="json", exclude={"output_dir", "workers"})
        payload = json.dumps(body, sort_keys=True).encode("utf-8")
        return hashlib.sha1(b"blob %d\0" % len(payload) + payload).hexdigest()
