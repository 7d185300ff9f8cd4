"""Trigonometric polynomials: shear profiles on S^1 and observables on T^d."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import pi
from typing import Sequence

import numpy as np

TWOPI = 2 * pi


@dataclass(frozen=True, eq=False)
class TrigProfile:
    """phi(s) = c + sum_k a_k sin(2 pi k s) + b_k cos(2 pi k s), k = 1, 2, ..."""

    sin_coeffs: tuple[float, ...] = ()
    cos_coeffs: tuple[float, ...] = ()
    constant: float = 0.0

    @classmethod
    def unit_sine(cls) -> "TrigProfile":
        """sin(2 pi s) / 2 pi: derivative sup-norm exactly 1."""
        return cls(sin_coeffs=(1.0 / TWOPI,))

    def value(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.full_like(s, self.constant)
        for k, a in enumerate(self.sin_coeffs, start=1):
            out = out + a * np.sin(TWOPI * k * s)
        for k, b in enumerate(self.cos_coeffs, start=1):
            out = out + b * np.cos(TWOPI * k * s)
        return out

    def derivative(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for k, a in enumerate(self.sin_coeffs, start=1):
            out = out + TWOPI * k * a * np.cos(TWOPI * k * s)
        for k, b in enumerate(self.cos_coeffs, start=1):
            out = out - TWOPI * k * b * np.sin(TWOPI * k * s)
        return out

    @property
    def sup_norm(self) -> float:
        return abs(self.constant) + sum(abs(a) for a in self.sin_coeffs) + sum(abs(b) for b in self.cos_coeffs)

    @property
    def derivative_sup_norm(self) -> float:
        terms = [TWOPI * k * abs(a) for k, a in enumerate(self.sin_coeffs, start=1)]
        terms += [TWOPI * k * abs(b) for k, b in enumerate(self.cos_coeffs, start=1)]
        return float(sum(terms))

    def as_dict(self) -> dict[str, object]:
        return {"sin": list(self.sin_coeffs), "cos": list(self.cos_coeffs), "constant": self.constant}


@dataclass(frozen=True, eq=False)
class TrigObservable:
    """Real trigonometric polynomial on T^d: sum of c cos(2 pi k.x) + s sin(2 pi k.x)."""

    frequencies: np.ndarray
    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def from_terms(cls, terms: Sequence[tuple[Sequence[int], float, float]]) -> "TrigObservable":
        freqs = np.array([t[0] for t in terms], dtype=float)
        return cls(freqs, np.array([t[1] for t in terms], dtype=float), np.array([t[2] for t in terms], dtype=float))

    @classmethod
    def default(cls, dim: int) -> "TrigObservable":
        first = [1] + [0] * (dim - 1)
        diagonal = [1] * dim
        return cls.from_terms([(first, 1.0, 0.0), (diagonal, 0.0, 0.5)])

    def __call__(self, x: np.ndarray) -> np.ndarray:
        phase = TWOPI * np.asarray(x, dtype=float) @ self.frequencies.T
        return np.cos(phase) @ self.cos_coeffs + np.sin(phase) @ self.sin_coeffs
