"""SDE models with time-periodic coefficients and Lyapunov test functions.

State convention: states are float arrays of shape ``(..., d)``; coefficient
callbacks accept any batch shape.  ``drift(t, x) -> (..., d)``,
``diffusion(t, x) -> (..., d, m)``, ``drift_jacobian(t, x) -> (..., d, d)``,
``diffusion_jacobians(t, x) -> (..., m, d, d)`` and
``diffusion_right_inverse(t, x) -> (..., m, d)``.

Built-in models are scalar polynomials in x with trigonometric-polynomial
coefficients in t.  That closed family is what the CLI can configure, what
the fast integration kernels consume, and the callbacks are generated from
the same coefficients so there is a single source of truth.
"""

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import InvalidSpecError, SingularityError
from .noise import GridSpec
from .trig import TrigPoly

__all__ = [
    "SdeModel",
    "LyapunovSpec",
    "LinearPeriodicSpec",
    "CubicScalarSpec",
    "build_linear_periodic",
    "build_cubic_scalar",
    "build_polynomial_scalar",
    "quadratic_lyapunov",
]


@dataclass(frozen=True)
class SdeModel:
    dim: int
    noise_dim: int
    period: float
    drift: Callable
    diffusion: Callable
    drift_jacobian: Optional[Callable] = None
    diffusion_jacobians: Optional[Callable] = None
    diffusion_right_inverse: Optional[Callable] = None
    name: str = "custom"
    # scalar polynomial representation (degree -> coefficient), when it exists;
    # enables the fused integration kernels
    drift_polys: Optional[tuple] = None
    diffusion_polys: Optional[tuple] = None

    def __post_init__(self):
        if self.dim < 1 or self.noise_dim < 1:
            raise InvalidSpecError("dim and noise_dim must be >= 1")
        if not (self.period > 0.0):
            raise InvalidSpecError("period must be positive")

    @property
    def is_scalar_poly(self) -> bool:
        return self.drift_polys is not None and self.diffusion_polys is not None

    def grid_for(self, dt_nominal: float) -> GridSpec:
        """Grid aligned with this model's period, step closest to ``dt_nominal``."""
        return GridSpec.for_period(self.period, dt_nominal)


@dataclass(frozen=True)
class LyapunovSpec:
    """Test function V with derivatives, growth exponent p and rate lambda(t)."""

    value: Callable          # (t, x) -> nonnegative scalar
    gradient: Callable       # (t, x) -> (d,)
    hessian: Callable        # (t, x) -> (d, d)
    p: float
    lambda_rate: Optional[Callable] = None   # t -> scalar
    time_derivative: Optional[Callable] = None  # None means dV/dt = 0

    def __post_init__(self):
        if self.p < 1.0:
            raise InvalidSpecError(f"exponent p must be >= 1, got {self.p}")

    def with_rate(self, lambda_rate: Callable) -> "LyapunovSpec":
        return replace(self, lambda_rate=lambda_rate)


@dataclass(frozen=True)
class LinearPeriodicSpec:
    """dX = -alpha(t) X dt + noise_scale dW."""

    alpha: TrigPoly
    noise_scale: float = 1.0
    period: Optional[float] = None  # used only when alpha is constant

    def resolved_period(self) -> float:
        if not self.alpha.is_constant:
            return self.alpha.period
        return self.period if self.period is not None else 2.0 * np.pi


@dataclass(frozen=True)
class CubicScalarSpec:
    """dX = [(-1 + gamma sin t) X - delta X^3] dt + dW."""

    gamma: float
    delta: float


def _horner(coeff_values, x):
    """Evaluate sum_deg coeff_values[deg] * x**deg, highest degree first.

    The fused kernels use the same evaluation order, so callback and kernel
    agree to the last bit at grid times.
    """
    acc = coeff_values[-1]
    for c in coeff_values[-2::-1]:
        acc = acc * x + c
    return acc


def _poly_callbacks(drift_polys, diff_polys):
    ddrift = _derivative_polys(drift_polys)
    ddiff = _derivative_polys(diff_polys)

    def drift(t, x):
        xs = np.asarray(x, dtype=float)[..., 0]
        vals = [p(t) for p in drift_polys]
        return np.asarray(_horner(vals, xs))[..., None] + np.zeros_like(xs)[..., None]

    def diffusion(t, x):
        xs = np.asarray(x, dtype=float)[..., 0]
        vals = [p(t) for p in diff_polys]
        out = np.asarray(_horner(vals, xs)) + np.zeros_like(xs)
        return out[..., None, None]

    def drift_jacobian(t, x):
        xs = np.asarray(x, dtype=float)[..., 0]
        vals = [p(t) for p in ddrift]
        out = np.asarray(_horner(vals, xs)) + np.zeros_like(xs)
        return out[..., None, None]

    def diffusion_jacobians(t, x):
        xs = np.asarray(x, dtype=float)[..., 0]
        vals = [p(t) for p in ddiff]
        out = np.asarray(_horner(vals, xs)) + np.zeros_like(xs)
        return out[..., None, None, None]

    return drift, diffusion, drift_jacobian, diffusion_jacobians


def _derivative_polys(polys):
    """d/dx of sum_deg polys[deg] x^deg, again as a degree-indexed tuple."""
    if len(polys) <= 1:
        return (TrigPoly(0.0),)
    return tuple(p.scaled(deg) for deg, p in enumerate(polys) if deg >= 1)


def _constant_right_inverse(diff_polys, period):
    """Pointwise 1/sigma when sigma does not depend on x and never vanishes."""
    state_dependent = any(
        not (p.is_constant and p.constant == 0.0) for p in diff_polys[1:]
    )
    if state_dependent:
        return None
    c0 = diff_polys[0]
    tt = np.linspace(0.0, period, 4097)
    if np.min(np.abs(c0(tt))) <= 0.0:
        return None

    def right_inverse(t, x):
        xs = np.asarray(x, dtype=float)[..., 0]
        out = 1.0 / (c0(t) + np.zeros_like(xs))
        return out[..., None, None]

    return right_inverse


def build_polynomial_scalar(
    drift_table: dict[int, TrigPoly],
    diffusion_table: dict[int, TrigPoly],
    period: float,
    name: str = "poly1d",
) -> SdeModel:
    """Scalar model from degree -> coefficient tables (the CLI model family)."""
    if not drift_table:
        raise InvalidSpecError("drift table must have at least one entry")
    if not diffusion_table:
        raise InvalidSpecError("diffusion table must have at least one entry")

    def as_tuple(table):
        top = max(table)
        return tuple(table.get(deg, TrigPoly(0.0)) for deg in range(top + 1))

    drift_polys = as_tuple(drift_table)
    diff_polys = as_tuple(diffusion_table)
    for poly in (*drift_polys, *diff_polys):
        if not poly.is_constant and abs(poly.period - period) > 1e-9 * period:
            raise InvalidSpecError(
                f"coefficient period {poly.period} does not match model period {period}"
            )
    drift, diffusion, djac, sjac = _poly_callbacks(drift_polys, diff_polys)
    return SdeModel(
        dim=1,
        noise_dim=1,
        period=period,
        drift=drift,
        diffusion=diffusion,
        drift_jacobian=djac,
        diffusion_jacobians=sjac,
        diffusion_right_inverse=_constant_right_inverse(diff_polys, period),
        name=name,
        drift_polys=drift_polys,
        diffusion_polys=diff_polys,
    )


def build_linear_periodic(spec: LinearPeriodicSpec) -> SdeModel:
    """dX = -alpha(t) X dt + noise_scale dW with all derivatives populated."""
    if spec.noise_scale < 0.0:
        raise InvalidSpecError(f"noise_scale must be >= 0, got {spec.noise_scale}")
    period = spec.resolved_period()
    drift_table = {1: spec.alpha.scaled(-1.0)}
    diff_table = {0: TrigPoly(spec.noise_scale, base_frequency=spec.alpha.base_frequency)}
    model = build_polynomial_scalar(drift_table, diff_table, period, name="linear_periodic")
    if spec.noise_scale == 0.0:
        model = replace(model, diffusion_right_inverse=None)
    return model


def build_cubic_scalar(spec: CubicScalarSpec) -> SdeModel:
    """The dissipative cubic benchmark; period 2*pi, unit additive noise."""
    if spec.delta < 0.0:
        raise InvalidSpecError(f"delta must be >= 0, got {spec.delta}")
    drift_table = {
        1: TrigPoly(constant=-1.0, sin_coeffs=(spec.gamma,)),
        3: TrigPoly(constant=-spec.delta),
    }
    diff_table = {0: TrigPoly(1.0)}
    return build_polynomial_scalar(drift_table, diff_table, 2.0 * np.pi, name="cubic_scalar")


def quadratic_lyapunov(p: float = 2.0) -> LyapunovSpec:
    """V(t, x) = |x|^p with its gradient and Hessian.

    gradient = p x |x|^(p-2);
    hessian  = p (p - 2) x x^T |x|^(p-4) + p |x|^(p-2) I
    (differentiating the gradient; the cross-term coefficient is what makes
    the diffusion part of the two-point bound close with (p-1)/2 m L^2).

    p = 2 is handled exactly everywhere; for p < 2 the Hessian is singular at
    x = 0 and evaluation there raises SingularityError.
    """
    if p < 1.0:
        raise InvalidSpecError(f"exponent p must be >= 1, got {p}")

    if p == 2.0:

        def value(t, x):
            x = np.asarray(x, dtype=float)
            return float(np.dot(x, x))

        def gradient(t, x):
            return 2.0 * np.asarray(x, dtype=float)

        def hessian(t, x):
            d = np.asarray(x, dtype=float).shape[-1]
            return 2.0 * np.eye(d)

        return LyapunovSpec(value=value, gradient=gradient, hessian=hessian, p=2.0)

    def value(t, x):
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x) ** p)

    def gradient(t, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x)
        if r == 0.0:
            if p > 1.0:
                return np.zeros_like(x)  # |grad| = p r^(p-1) -> 0
            raise SingularityError(f"gradient of |x|^{p} undefined at x = 0")
        return p * x * r ** (p - 2.0)

    def hessian(t, x):
        x = np.asarray(x, dtype=float)
        d = x.shape[-1]
        r = np.linalg.norm(x)
        if r == 0.0:
            if p > 2.0:
                return np.zeros((d, d))  # both terms scale like r^(p-2)
            raise SingularityError(f"Hessian of |x|^{p} singular at x = 0")
        return p * (p - 2.0) * np.outer(x, x) * r ** (p - 4.0) + p * r ** (
            p - 2.0
        ) * np.eye(d)

    return LyapunovSpec(value=value, gradient=gradient, hessian=hessian, p=p)


def coefficient_tables(model: SdeModel, grid: GridSpec):
    """Per-phase coefficient values for the fused kernels.

    Returns (drift_tab, diff_tab, drift_dtab, diff_dtab), each of shape
    (degree+1, steps_per_period), evaluated at the phase times k*dt with the
    same TrigPoly code the callbacks use.
    """
    if not model.is_scalar_poly:
        raise InvalidSpecError("model has no scalar polynomial representation")
    phases = np.arange(grid.steps_per_period) * grid.dt

    def table(polys):
        return np.vstack([np.asarray(p(phases), dtype=float) + np.zeros_like(phases) for p in polys])

    return (
        table(model.drift_polys),
        table(model.diffusion_polys),
        table(_derivative_polys(model.drift_polys)),
        table(_derivative_polys(model.diffusion_polys)),
    )


def periodicity_defect(model: SdeModel, n_samples: int = 100, seed: int = 0, box: float = 5.0):
    """max |coef(t + period, x) - coef(t, x)| over sampled points (drift and diffusion)."""
    rng = np.random.default_rng(seed)
    ts = rng.uniform(0.0, model.period, n_samples)
    xs = rng.uniform(-box, box, (n_samples, model.dim))
    worst = 0.0
    for t, x in zip(ts, xs):
        worst = max(worst, float(np.max(np.abs(model.drift(t + model.period, x) - model.drift(t, x)))))
        worst = max(
            worst,
            float(np.max(np.abs(model.diffusion(t + model.period, x) - model.diffusion(t, x)))),
        )
    return worst
