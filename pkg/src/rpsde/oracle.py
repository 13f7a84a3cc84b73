"""Closed-form references for the linear periodic model.

For dX = -alpha(t) X dt + sigma dW with alpha a positive-mean trigonometric
polynomial, the pullback limit is the stochastic convolution

    S(s) = sigma * integral_{-infty}^{s} exp(-integral_r^s alpha(u) du) dW_r,

whose discretization on the grid (left-point weights, mirroring the Euler
integrator) is computable to any accuracy from the closed-form antiderivative
of alpha.  These values anchor the pullback, measure and Markov modules.

The exponent integrals are evaluated through the periodic decomposition
A(t) = mean(alpha) * t + P(t) with P periodic, reading P only at phase times
k mod steps_per_period — so the computed weights, and therefore the whole
sum, are invariant bit for bit under the substitution (path, s) ->
(shifted path, s + tau).
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import InvalidSpecError
from .models import LinearPeriodicSpec
from .noise import NoisePath
from .trig import TrigPoly

__all__ = ["LinearOracle", "linear_rps_exact", "linear_phase_variance", "ou_transition"]


@dataclass(frozen=True)
class LinearOracle:
    spec: LinearPeriodicSpec
    quadrature_limit: int = 200   # subdivision cap for the variance quadrature

    def __post_init__(self):
        if self.spec.alpha.mean <= 0.0:
            raise InvalidSpecError(
                "oracle needs integral of alpha over one period > 0 "
                f"(got mean {self.spec.alpha.mean})"
            )

    @property
    def period(self) -> float:
        return self.spec.resolved_period()

    def exponent(self, t):
        """A(t) = integral_0^t alpha(u) du (closed form)."""
        return self.spec.alpha.antiderivative(t)


def _periodic_part(alpha: TrigPoly, times):
    return alpha.antiderivative(times) - alpha.mean * times


def linear_rps_exact(oracle: LinearOracle, path: NoisePath, s, truncation_T) -> float:
    """Left-point discretization of the stochastic convolution at phase s.

    The truncation error is bounded by exp(-mean(alpha) * truncation_T) times
    the local path scale; truncation_T must be at least five periods.
    """
    tau = oracle.period
    if truncation_T < 5.0 * tau:
        raise InvalidSpecError("truncation_T must be >= 5 periods")
    grid = path.grid
    if abs(grid.period - tau) > 1e-9 * tau:
        raise InvalidSpecError("path grid period does not match the oracle period")
    alpha = oracle.spec.alpha
    dt = grid.dt
    ntau = grid.steps_per_period
    k_s = grid.index_of(s)
    K = round(truncation_T / dt)

    ks = np.arange(k_s - K, k_s)
    phase = np.mod(ks, ntau)
    p_table = _periodic_part(alpha, np.arange(ntau) * dt)
    p_s = float(_periodic_part(alpha, (k_s % ntau) * dt))
    exponents = alpha.mean * (dt * (k_s - ks)) + (p_s - p_table[phase])
    weights = np.exp(-exponents)
    incs = path.increments(k_s - K, k_s)[:, 0]
    return oracle.spec.noise_scale * float(np.dot(weights, incs))


def linear_phase_variance(oracle: LinearOracle, s) -> float:
    """v(s) = Var S(s): one-period quadrature plus the exact geometric tail.

    v(s) = sigma^2 * I1(s) / (1 - q),  I1(s) = integral_{s-tau}^{s}
    exp(-2 (A(s) - A(r))) dr,  q = exp(-2 mean(alpha) tau).
    """
    alpha = oracle.spec.alpha
    tau = oracle.period
    a_s = oracle.exponent(s)

    def integrand(r):
        return np.exp(-2.0 * (a_s - oracle.exponent(r)))

    val, _err = quad(
        integrand, s - tau, s, epsabs=1e-13, epsrel=1e-13, limit=oracle.quadrature_limit
    )
    q = np.exp(-2.0 * alpha.mean * tau)
    return oracle.spec.noise_scale**2 * float(val / (1.0 - q))


def ou_transition(alpha_const, t0, t1, x, noise_scale=1.0):
    """Mean and variance of the linear transition from (t0, x) to t1.

    Constant rate:  mean = x e^{-a (t1-t0)}, var = (1 - e^{-2a(t1-t0)})/(2a).
    A TrigPoly rate is handled by quadrature of the same formulas.
    """
    if isinstance(alpha_const, TrigPoly):
        alpha = alpha_const
        a0 = alpha.antiderivative(t0)
        a1 = alpha.antiderivative(t1)
        mean = x * np.exp(-(a1 - a0))

        def integrand(r):
            return np.exp(-2.0 * (a1 - alpha.antiderivative(r)))

        var, _ = quad(integrand, t0, t1, epsabs=1e-13, epsrel=1e-13, limit=200)
        return float(mean), float(noise_scale**2 * var)
    a = float(alpha_const)
    if a <= 0.0:
        raise InvalidSpecError("constant rate must be positive")
    dt = t1 - t0
    if dt < 0.0:
        raise InvalidSpecError("t1 must be >= t0")
    mean = x * np.exp(-a * dt)
    var = noise_scale**2 * (1.0 - np.exp(-2.0 * a * dt)) / (2.0 * a)
    return float(mean), float(var)
