"""Monte-Carlo analysis of the Markov evolution at period multiples.

Transition probabilities, the Krylov-Bogolyubov average that certifies the
phase-s law as the invariant measure of the period skeleton, single-path
(Birkhoff) time averages, geometric mixing estimates and the
derivative-of-the-evolution estimator based on the pay-in integral of the
derivative flow against the driving noise:

    D_x E[h(X_T)] . v = (1/T) E[ h(X_T) * integral_0^T sigma^{-1}(r, X_r)
                                  (D_x X_r v) dW_r ]

with the integral discretized at the left endpoints (non-anticipating — the
identity is a Gaussian integration by parts and holds exactly for the
discrete recursion, up to Monte-Carlo error).

Every estimator derives replica i's seed from (master_seed, i), so estimates
are reproducible and independent of worker count, and two estimators called
with the same master seed share replicas exactly (common random numbers).
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import CapabilityError, InvalidSpecError
from .integrate import ensemble_recorded, ensemble_tangent
from .measures import EmpiricalMeasure, ensemble_slice, sample_periodic_measure
from .models import LyapunovSpec, SdeModel
from .noise import GridSpec, NoisePath
from .philox import splitmix64
from .util import run_blocks

__all__ = [
    "Interval",
    "transition_probability",
    "kb_average",
    "ergodic_time_average",
    "mixing_report",
    "bel_gradient",
    "mollified_indicator",
]


@dataclass(frozen=True)
class Interval:
    """Half-open interval (lo, hi]; lo = -inf / hi = +inf are allowed.

    Half-openness makes an interval and its complement partition the line
    exactly, so indicator masses of A and A^c sum to exactly one on shared
    replicas.
    """

    lo: float
    hi: float

    def __post_init__(self):
        if not (self.hi >= self.lo):
            raise InvalidSpecError("interval needs hi >= lo")

    def contains(self, x):
        x = np.asarray(x)
        return (x > self.lo) & (x <= self.hi)

    def complement_upper(self) -> "Interval":
        return Interval(self.hi, np.inf)

    @classmethod
    def whole_line(cls) -> "Interval":
        return cls(-np.inf, np.inf)


def mollified_indicator(interval: Interval, width: float):
    """Continuous stand-in for an indicator: 1 inside, linear ramp of the
    given width outside each edge.  Accepts (..., d) states (d = 1) and
    returns (...,) values; the sup-norm bound is 1."""
    lo, hi = interval.lo, interval.hi

    def h(x):
        x = np.asarray(x, dtype=float)
        if x.ndim >= 1 and x.shape[-1] == 1:
            x = x[..., 0]
        inside = np.ones_like(x)
        if np.isfinite(lo):
            inside = np.minimum(inside, np.clip((x - lo) / width, 0.0, 1.0))
        if np.isfinite(hi):
            inside = np.minimum(inside, np.clip((hi + width - x) / width, 0.0, 1.0))
        return inside

    return h, 1.0


@dataclass(frozen=True)
class TransitionEstimate:
    estimate: float
    se: float
    n_replicas: int
    horizon: float


def _final_states(model, grid, master_seed, k0, nsteps, x, n, workers, block_size, scheme):
    x0 = np.atleast_1d(np.asarray(x, dtype=float))

    def block(lo, hi):
        paths = ensemble_slice(master_seed, lo, hi, model.noise_dim, grid)
        x0s = np.broadcast_to(x0, (hi - lo, x0.shape[0]))
        rec = ensemble_recorded(
            model, paths, k0, nsteps, x0s, rec_start=nsteps, stride=max(nsteps, 1),
            nrec=1, scheme=scheme,
        )
        return rec[:, 0, :]

    return run_blocks(n, workers, block_size, block)


def transition_probability(
    model: SdeModel,
    grid: GridSpec,
    master_seed: int,
    s: float,
    x,
    interval: Interval,
    n_replicas: int,
    n_periods: Optional[int] = None,
    horizon: Optional[float] = None,
    scheme: str = "euler",
    workers: int = 1,
    block_size: int = 8192,
) -> TransitionEstimate:
    """P(s, x; s + n tau, A) (or an arbitrary aligned horizon) by Monte Carlo."""
    if n_replicas < 100:
        raise InvalidSpecError("need at least 100 replicas")
    if (n_periods is None) == (horizon is None):
        raise InvalidSpecError("give exactly one of n_periods / horizon")
    k0 = grid.index_of(s)
    if n_periods is not None:
        if n_periods < 1:
            raise InvalidSpecError("n_periods must be >= 1")
        nsteps = n_periods * grid.steps_per_period
    else:
        nsteps = grid.index_of(s + horizon) - k0
        if nsteps < 1:
            raise InvalidSpecError("horizon must be positive")
    finals = _final_states(
        model, grid, master_seed, k0, nsteps, x, n_replicas, workers, block_size, scheme
    )
    hits = interval.contains(finals[:, 0])
    p = float(np.mean(hits))
    se = float(np.sqrt(p * (1.0 - p) / n_replicas))
    return TransitionEstimate(
        estimate=p, se=se, n_replicas=n_replicas, horizon=nsteps * grid.dt
    )


@dataclass(frozen=True)
class KbReport:
    """Krylov-Bogolyubov average vs the empirical phase-t mass."""

    per_period: np.ndarray      # estimate of P(s, x; t + n tau, A), n = 1..N
    n_mc: int
    average: float
    average_se: float
    measure_mass: float
    measure_se: float
    difference: float
    combined_se: float

    def to_csv(self, fname) -> None:
        with open(fname, "w") as fh:
            fh.write("n,estimate,se\n")
            for nn, est in enumerate(self.per_period, start=1):
                se = np.sqrt(max(est * (1.0 - est), 0.0) / self.n_mc)
                fh.write(f"{nn},{est:.17g},{se:.17g}\n")


def kb_average(
    model: SdeModel,
    grid: GridSpec,
    master_seed: int,
    s: float,
    x,
    t: float,
    interval: Interval,
    n_periods: int,
    n_mc: int,
    measure: Optional[EmpiricalMeasure] = None,
    scheme: str = "euler",
    workers: int = 1,
    block_size: int = 4096,
    measure_kwargs: Optional[dict] = None,
) -> KbReport:
    """(1/N) sum_{n=1..N} P(s, x; t + n tau, A) against the phase-t mass.

    Observations sit at t + tau, ..., t + N tau so that every term is a
    genuine transition estimate (with N = 1 and t = s this is exactly
    transition_probability over one period, replica for replica).  All N
    observations reuse one trajectory set; the replica-level means give an
    honest SE for the average.  When no measure is supplied, one is sampled
    at phase t from an independent seed domain.
    """
    ntau = grid.steps_per_period
    k_s = grid.index_of(s)
    k_t = grid.index_of(t)
    if not (0 <= k_t - k_s < ntau):
        raise InvalidSpecError("t must lie in [s, s + period)")
    if n_periods < 1:
        raise InvalidSpecError("n_periods must be >= 1")
    x0 = np.atleast_1d(np.asarray(x, dtype=float))
    nsteps = (k_t - k_s) + n_periods * ntau

    def block(lo, hi):
        paths = ensemble_slice(master_seed, lo, hi, model.noise_dim, grid)
        x0s = np.broadcast_to(x0, (hi - lo, x0.shape[0]))
        states = ensemble_recorded(
            model, paths, k_s, nsteps, x0s,
            rec_start=(k_t - k_s) + ntau, stride=ntau, nrec=n_periods, scheme=scheme,
        )
        return interval.contains(states[:, :, 0]).astype(float)

    hits = run_blocks(n_mc, workers, block_size, block)  # (n_mc, n_periods)
    per_period = hits.mean(axis=0)
    replica_means = hits.mean(axis=1)
    average = float(replica_means.mean())
    average_se = float(replica_means.std(ddof=1) / np.sqrt(n_mc))

    if measure is None:
        mkw = dict(measure_kwargs or {})
        mkw.setdefault("tol", 1e-6)
        phase_t = (k_t % ntau) * grid.dt
        measure = sample_periodic_measure(
            model, grid, splitmix64(master_seed ^ 0x6B62A17A), phase_t, n_mc,
            workers=workers, scheme=scheme, **mkw,
        )
    mass = measure.indicator_mean(interval)
    measure_se = float(np.sqrt(max(mass * (1.0 - mass), 1e-300) / measure.n))
    diff = abs(average - mass)
    return KbReport(
        per_period=per_period,
        n_mc=n_mc,
        average=average,
        average_se=average_se,
        measure_mass=mass,
        measure_se=measure_se,
        difference=diff,
        combined_se=float(np.sqrt(average_se**2 + measure_se**2)),
    )


@dataclass(frozen=True)
class ErgodicReport:
    """Single-path period-skeleton average vs the ensemble average."""

    time_average: float
    time_se: float              # batch-means standard error
    n_periods: int
    measure_average: float
    measure_se: float
    difference: float
    combined_se: float


def ergodic_time_average(
    model: SdeModel,
    path: NoisePath,
    s: float,
    x,
    h: Callable,
    n_periods: int,
    measure: Optional[EmpiricalMeasure] = None,
    scheme: str = "euler",
) -> ErgodicReport:
    """(1/N) sum_{n=1..N} h(X(s + n tau)) along one path.

    The batch-means SE accounts for serial correlation along the skeleton.
    ``h`` must accept an (N, d) array and return (N,) values.
    """
    if n_periods < 10:
        raise InvalidSpecError("need at least 10 periods")
    grid = path.grid
    ntau = grid.steps_per_period
    k_s = grid.index_of(s)
    x0 = np.atleast_1d(np.asarray(x, dtype=float))
    rec = ensemble_recorded(
        model, [path], k_s, n_periods * ntau, x0[None, :],
        rec_start=ntau, stride=ntau, nrec=n_periods, scheme=scheme,
    )
    values = np.asarray(h(rec[0]), dtype=float)
    time_avg = float(values.mean())
    n_batches = max(2, int(np.sqrt(n_periods)))
    length = n_periods // n_batches
    batches = values[: n_batches * length].reshape(n_batches, length).mean(axis=1)
    time_se = float(batches.std(ddof=1) / np.sqrt(n_batches))

    if measure is not None:
        mv = np.asarray(h(measure.samples), dtype=float)
        m_avg = float(mv.mean())
        m_se = float(mv.std(ddof=1) / np.sqrt(measure.n))
    else:
        m_avg = float("nan")
        m_se = float("nan")
    return ErgodicReport(
        time_average=time_avg,
        time_se=time_se,
        n_periods=n_periods,
        measure_average=m_avg,
        measure_se=m_se,
        difference=abs(time_avg - m_avg),
        combined_se=float(np.sqrt(time_se**2 + m_se**2)),
    )


@dataclass(frozen=True)
class MixingReport:
    """Geometric decay of the evolution's dependence on the initial point."""

    n_values: np.ndarray
    pair_estimates: np.ndarray   # |T h(x) - T h(y)|, common random numbers
    pair_ses: np.ndarray
    measure_estimates: np.ndarray  # |T h(x) - int h dmu_s|
    measure_ses: np.ndarray
    ratio: Optional[float]       # fitted per-period geometric ratio (pair family)
    ratio_se: Optional[float]
    ratio_target: Optional[float]
    passed: Optional[bool]

    def to_csv(self, fname) -> None:
        with open(fname, "w") as fh:
            fh.write("n,estimate,se\n")
            for n, e, se in zip(self.n_values, self.pair_estimates, self.pair_ses):
                fh.write(f"{n},{e:.17g},{se:.17g}\n")


def _wls_ratio(ns, values, ses):
    """Weighted LS fit of log(values) vs n; returns per-step ratio and SE."""
    ok = values > 0.0
    if ok.sum() < 2:
        return None, None
    n = np.asarray(ns, dtype=float)[ok]
    y = np.log(values[ok])
    sig = np.clip(ses[ok] / values[ok], 1e-12, None)  # delta method on log
    w = 1.0 / sig**2
    W = w.sum()
    nbar = (w * n).sum() / W
    ybar = (w * y).sum() / W
    sxx = (w * (n - nbar) ** 2).sum()
    slope = float((w * (n - nbar) * (y - ybar)).sum() / sxx)
    slope_se = float(np.sqrt(1.0 / sxx))
    ratio = float(np.exp(slope))
    return ratio, float(ratio * slope_se)


def mixing_report(
    model: SdeModel,
    grid: GridSpec,
    master_seed: int,
    s: float,
    x,
    y,
    h,
    n_list: Sequence[int],
    n_replicas: int,
    h_bound: Optional[float] = None,
    lyap: Optional[LyapunovSpec] = None,
    measure: Optional[EmpiricalMeasure] = None,
    scheme: str = "euler",
    workers: int = 1,
    block_size: int = 8192,
) -> MixingReport:
    """Decay of |T_{s+n tau,s}h(x) - T_{s+n tau,s}h(y)| and of the distance
    to the phase-s average, with a geometric-ratio fit.

    ``h`` may be an Interval — it is then mollified into a continuous ramp of
    one grid cell (bounded continuous observables are what the decay theory
    covers; raw indicators belong to kb_average).  When a rate function is
    attached (via ``lyap``), pass/fail compares the fitted per-period ratio
    against exp(integral of lambda over one period / p) + 3 fit SEs.
    """
    if isinstance(h, Interval):
        h, h_bound = mollified_indicator(h, grid.dt)
    if h_bound is None:
        raise InvalidSpecError("supply the sup-norm bound of h")
    n_list = sorted(set(int(n) for n in n_list))
    if not n_list or n_list[0] < 1:
        raise InvalidSpecError("n_list must contain positive period counts")
    ntau = grid.steps_per_period
    k_s = grid.index_of(s)
    n_max = n_list[-1]
    x0 = np.atleast_1d(np.asarray(x, dtype=float))
    y0 = np.atleast_1d(np.asarray(y, dtype=float))

    def block(lo, hi):
        paths = ensemble_slice(master_seed, lo, hi, model.noise_dim, grid)
        xs = ensemble_recorded(
            model, paths, k_s, n_max * ntau, np.broadcast_to(x0, (hi - lo, x0.shape[0])),
            rec_start=ntau, stride=ntau, nrec=n_max, scheme=scheme,
        )
        ys = ensemble_recorded(
            model, paths, k_s, n_max * ntau, np.broadcast_to(y0, (hi - lo, y0.shape[0])),
            rec_start=ntau, stride=ntau, nrec=n_max, scheme=scheme,
        )
        cols = [n - 1 for n in n_list]
        hx = np.stack([np.asarray(h(xs[:, c, :]), dtype=float) for c in cols], axis=1)
        hy = np.stack([np.asarray(h(ys[:, c, :]), dtype=float) for c in cols], axis=1)
        return np.stack([hx, hy], axis=2)  # (R, len(n_list), 2)

    both = run_blocks(n_replicas, workers, block_size, block)
    hx = both[:, :, 0]
    hy = both[:, :, 1]
    diff = hx - hy
    pair_est = np.abs(diff.mean(axis=0))
    pair_se = diff.std(axis=0, ddof=1) / np.sqrt(n_replicas)

    if measure is not None:
        mv = np.asarray(h(measure.samples), dtype=float)
        m_avg = mv.mean()
        m_se = mv.std(ddof=1) / np.sqrt(measure.n)
        meas_est = np.abs(hx.mean(axis=0) - m_avg)
        meas_se = np.sqrt(hx.std(axis=0, ddof=1) ** 2 / n_replicas + m_se**2)
    else:
        meas_est = np.full(len(n_list), np.nan)
        meas_se = np.full(len(n_list), np.nan)

    ratio, ratio_se = _wls_ratio(np.asarray(n_list), pair_est, pair_se)
    target = None
    passed = None
    if lyap is not None and lyap.lambda_rate is not None and ratio is not None:
        lam_int, _ = quad(lyap.lambda_rate, 0.0, grid.period, limit=200)
        target = float(np.exp(lam_int / lyap.p))
        passed = ratio <= target + 3.0 * ratio_se
    return MixingReport(
        n_values=np.asarray(n_list),
        pair_estimates=pair_est,
        pair_ses=pair_se,
        measure_estimates=meas_est,
        measure_ses=meas_se,
        ratio=ratio,
        ratio_se=ratio_se,
        ratio_target=target,
        passed=passed,
    )


@dataclass(frozen=True)
class BelEstimate:
    estimate: float
    se: float
    n_replicas: int
    horizon: float


def bel_gradient(
    model: SdeModel,
    grid: GridSpec,
    master_seed: int,
    s: float,
    x,
    v,
    h: Callable,
    horizon: float,
    n_replicas: int,
    workers: int = 1,
    block_size: int = 8192,
) -> BelEstimate:
    """Directional derivative of x -> E[h(X(s + T, s, x))] via the pay-in
    integral of the derivative flow (1/T scaling for arbitrary horizons)."""
    if model.diffusion_right_inverse is None:
        raise CapabilityError("estimator needs the diffusion right inverse")
    if not (horizon > 0.0):
        raise InvalidSpecError("horizon must be positive")
    k_s = grid.index_of(s)
    nsteps = grid.index_of(s + horizon) - k_s
    if nsteps < 1:
        raise InvalidSpecError("horizon shorter than one grid step")
    T = nsteps * grid.dt
    x0 = np.atleast_1d(np.asarray(x, dtype=float))
    v0 = np.atleast_1d(np.asarray(v, dtype=float))

    def block(lo, hi):
        paths = ensemble_slice(master_seed, lo, hi, model.noise_dim, grid)
        xs, _vs, bel = ensemble_tangent(
            model, paths, k_s, nsteps,
            np.broadcast_to(x0, (hi - lo, x0.shape[0])),
            np.broadcast_to(v0, (hi - lo, v0.shape[0])),
        )
        payoff = np.asarray(h(xs[:, -1, :]), dtype=float)
        return payoff * bel / T

    vals = run_blocks(n_replicas, workers, block_size, block)
    return BelEstimate(
        estimate=float(vals.mean()),
        se=float(vals.std(ddof=1) / np.sqrt(n_replicas)),
        n_replicas=n_replicas,
        horizon=T,
    )
