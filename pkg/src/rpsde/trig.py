"""Trigonometric polynomials: the closed coefficient family for periodic models.

p(t) = constant + sum_j sin_coeffs[j-1] * sin(j w t) + cos_coeffs[j-1] * cos(j w t)

is 2*pi/w periodic, serializable, and has a closed-form antiderivative, which
the oracle module uses to evaluate exponent integrals exactly.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpecError

__all__ = ["TrigPoly"]


@dataclass(frozen=True)
class TrigPoly:
    constant: float = 0.0
    sin_coeffs: tuple[float, ...] = field(default_factory=tuple)
    cos_coeffs: tuple[float, ...] = field(default_factory=tuple)
    base_frequency: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "sin_coeffs", tuple(float(c) for c in self.sin_coeffs))
        object.__setattr__(self, "cos_coeffs", tuple(float(c) for c in self.cos_coeffs))
        if self.base_frequency <= 0.0:
            raise InvalidSpecError("base_frequency must be positive")

    @property
    def is_constant(self) -> bool:
        return not any(self.sin_coeffs) and not any(self.cos_coeffs)

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.base_frequency

    def __call__(self, t):
        w = self.base_frequency
        out = self.constant + 0.0 * np.asarray(t, dtype=float)
        for j, a in enumerate(self.sin_coeffs, start=1):
            if a:
                out = out + a * np.sin(j * w * np.asarray(t, dtype=float))
        for j, b in enumerate(self.cos_coeffs, start=1):
            if b:
                out = out + b * np.cos(j * w * np.asarray(t, dtype=float))
        return out if np.ndim(t) else float(out)

    def antiderivative(self, t):
        """A(t) = integral of p over [0, t], in closed form."""
        w = self.base_frequency
        tt = np.asarray(t, dtype=float)
        out = self.constant * tt
        for j, a in enumerate(self.sin_coeffs, start=1):
            if a:
                out = out + a * (1.0 - np.cos(j * w * tt)) / (j * w)
        for j, b in enumerate(self.cos_coeffs, start=1):
            if b:
                out = out + b * np.sin(j * w * tt) / (j * w)
        return out if np.ndim(t) else float(out)

    @property
    def mean(self) -> float:
        """Average over one period (= the constant term)."""
        return self.constant

    def scaled(self, factor: float) -> "TrigPoly":
        return TrigPoly(
            constant=factor * self.constant,
            sin_coeffs=tuple(factor * a for a in self.sin_coeffs),
            cos_coeffs=tuple(factor * b for b in self.cos_coeffs),
            base_frequency=self.base_frequency,
        )

    def to_dict(self) -> dict:
        return {
            "constant": self.constant,
            "sin": list(self.sin_coeffs),
            "cos": list(self.cos_coeffs),
            "base_frequency": self.base_frequency,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrigPoly":
        unknown = set(d) - {"constant", "sin", "cos", "base_frequency"}
        if unknown:
            raise InvalidSpecError(f"unknown TrigPoly keys: {sorted(unknown)}")
        return cls(
            constant=float(d.get("constant", 0.0)),
            sin_coeffs=tuple(d.get("sin", ())),
            cos_coeffs=tuple(d.get("cos", ())),
            base_frequency=float(d.get("base_frequency", 1.0)),
        )
