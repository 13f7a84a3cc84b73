"""Time stepping: trajectories, shared-noise pairs and the derivative flow.

Schemes are fixed-step Euler-Maruyama and (for scalar state and noise)
Milstein.  Times must be grid-aligned; coefficients are evaluated at the
phase-reduced time ``(k mod steps_per_period) * dt``, which is what makes the
discrete flow identities exact:

* cocycle: splitting an integration at any aligned intermediate time
  reproduces the one-shot result bit for bit (the recursion is identical);
* shift conjugacy: integrating against the period-shifted path over
  ``[t - n tau, t]`` equals integrating against the base path over
  ``[t + tau - n tau, t + tau]`` bit for bit, because both the increments and
  the coefficient values coincide exactly.

Scalar polynomial models run through the fused kernels in ``_kernels``;
everything else takes a generic (slower) numpy route with identical
semantics.  A non-finite state raises DivergenceError immediately — silent
NaN propagation would poison every Monte-Carlo average downstream.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import AlignmentError, CapabilityError, DivergenceError, InvalidSpecError
from .models import SdeModel, coefficient_tables
from .noise import GridSpec, NoisePath
from .philox import U64, WORD_OFFSET

__all__ = ["Trajectory", "integrate", "integrate_pair", "derivative_flow"]

SCHEMES = ("euler", "milstein")


@dataclass(frozen=True)
class Trajectory:
    """States on the grid nodes of [t0, t1]; states[0] is the initial condition."""

    grid: GridSpec
    k0: int
    k1: int
    states: np.ndarray  # (k1 - k0 + 1, d)
    model_name: str
    path_descriptor: str
    scheme: str

    @property
    def t0(self) -> float:
        return self.grid.time_of(self.k0)

    @property
    def t1(self) -> float:
        return self.grid.time_of(self.k1)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.k0, self.k1 + 1) * self.grid.dt

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, fname) -> None:
        d = self.states.shape[1]
        header = "t," + ",".join(f"x{i + 1}" for i in range(d))
        with open(fname, "w") as fh:
            fh.write(header + "\n")
            for k, row in zip(range(self.k0, self.k1 + 1), self.states):
                vals = ",".join(f"{v:.17g}" for v in row)
                fh.write(f"{k * self.grid.dt:.17g},{vals}\n")


def _check_model_grid(model: SdeModel, grid: GridSpec) -> None:
    if abs(grid.period - model.period) > 1e-9 * model.period:
        raise AlignmentError(
            f"grid period {grid.period!r} does not match model period {model.period!r}; "
            "build the grid with model.grid_for(dt)"
        )


def _check_scheme(model: SdeModel, scheme: str) -> None:
    if scheme not in SCHEMES:
        raise InvalidSpecError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if scheme == "milstein":
        if model.dim != 1 or model.noise_dim != 1:
            raise CapabilityError("milstein is implemented for d = m = 1 only")
        if model.diffusion_jacobians is None:
            raise CapabilityError("milstein needs the diffusion Jacobian")


def _as_state(x0, d) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    if x.shape != (d,):
        raise InvalidSpecError(f"initial state must have shape ({d},), got {x.shape}")
    return x


def _use_fused(model: SdeModel, paths) -> bool:
    return model.is_scalar_poly and all(isinstance(p, NoisePath) for p in paths)


def _fused_args(model, grid, paths, k0s):
    key0s = np.array([p._key0 for p in paths], dtype=np.uint64)
    key1s = np.array([p._key1 for p in paths], dtype=np.uint64)
    wstarts = np.array(
        [U64(k0 + p.offset + WORD_OFFSET) for k0, p in zip(k0s, paths)], dtype=np.uint64
    )
    drift_tab, diff_tab, _, diff_dtab = coefficient_tables(model, grid)
    return key0s, key1s, wstarts, drift_tab, diff_tab, diff_dtab


def _raise_divergence(bad):
    hits = np.nonzero(bad >= 0)[0]
    if hits.size:
        i = int(hits[0])
        raise DivergenceError(int(bad[i]), f"replica {i}: non-finite state at step index {int(bad[i])}")


# ---------------------------------------------------------------------------
# ensemble primitives (shared by pullback / measures / markov)
# ---------------------------------------------------------------------------


def ensemble_windows(model, paths, k0s, nsteps, x0s, win, scheme="euler"):
    """Evolve replica i from node k0s[i] for nsteps[i] steps; return the last
    win+1 states of each, shape (R, win+1, d)."""
    grid = paths[0].grid
    _check_model_grid(model, grid)
    _check_scheme(model, scheme)
    k0s = np.asarray(k0s, dtype=np.int64)
    nsteps = np.asarray(nsteps, dtype=np.int64)
    if np.any(nsteps < win):
        raise InvalidSpecError("window longer than the integration range")
    R = len(paths)
    if _use_fused(model, paths):
        key0s, key1s, wstarts, dtab, stab, sdtab = _fused_args(model, grid, paths, k0s)
        out = np.empty((R, win + 1))
        bad = np.empty(R, dtype=np.int64)
        _kernels.evolve_window(
            key0s, key1s, wstarts, k0s, nsteps,
            np.ascontiguousarray(np.asarray(x0s, dtype=float)[:, 0]),
            grid.steps_per_period, dtab, stab, sdtab,
            grid.dt, np.sqrt(grid.dt), scheme == "milstein",
            win, out, bad,
        )
        _raise_divergence(bad)
        return out[:, :, None]
    out = np.empty((R, win + 1, model.dim))
    for i, p in enumerate(paths):
        states = _numpy_evolve(
            model, p, int(k0s[i]), int(nsteps[i]), np.asarray(x0s, dtype=float)[i][None, :],
            scheme, record=("window", win),
        )
        out[i] = states[:, 0, :]
    return out


def ensemble_recorded(model, paths, k0, nsteps, x0s, rec_start, stride, nrec, scheme="euler"):
    """Evolve all replicas from node k0; record states after steps
    rec_start + j*stride (j < nrec).  Returns (R, nrec, d)."""
    grid = paths[0].grid
    _check_model_grid(model, grid)
    _check_scheme(model, scheme)
    R = len(paths)
    k0s = np.full(R, k0, dtype=np.int64)
    if _use_fused(model, paths):
        key0s, key1s, wstarts, dtab, stab, sdtab = _fused_args(model, grid, paths, k0s)
        out = np.empty((R, nrec))
        bad = np.empty(R, dtype=np.int64)
        _kernels.evolve_stride(
            key0s, key1s, wstarts, k0s, nsteps,
            np.ascontiguousarray(np.asarray(x0s, dtype=float)[:, 0]),
            grid.steps_per_period, dtab, stab, sdtab,
            grid.dt, np.sqrt(grid.dt), scheme == "milstein",
            rec_start, stride, nrec, out, bad,
        )
        _raise_divergence(bad)
        return out[:, :, None]
    out = np.empty((R, nrec, model.dim))
    for i, p in enumerate(paths):
        states = _numpy_evolve(
            model, p, k0, nsteps, np.asarray(x0s, dtype=float)[i][None, :],
            scheme, record=("stride", rec_start, stride, nrec),
        )
        out[i] = states[:, 0, :]
    return out


def ensemble_tangent(model, paths, k0, nsteps, x0s, v0s, stride=0, nrec=0):
    """State + tangent evolution (Euler), with the left-point integral of
    (sigma^-1 v) against the driving increments accumulated per replica.

    Returns (xs, vs, bel) where xs, vs have shape (R, max(nrec,0)+1, d) — the
    recorded points plus the final state — and bel has shape (R,).
    """
    grid = paths[0].grid
    _check_model_grid(model, grid)
    if model.drift_jacobian is None or model.diffusion_jacobians is None:
        raise CapabilityError("derivative flow needs drift and diffusion Jacobians")
    R = len(paths)
    k0s = np.full(R, k0, dtype=np.int64)
    if _use_fused(model, paths):
        key0s, key1s, wstarts, dtab, stab, sdtab = _fused_args(model, grid, paths, k0s)
        ddtab = coefficient_tables(model, grid)[2]
        ncols = nrec + 1
        out_x = np.empty((R, ncols))
        out_v = np.empty((R, ncols))
        bel = np.empty(R)
        bad = np.empty(R, dtype=np.int64)
        _kernels.evolve_tangent(
            key0s, key1s, wstarts, k0s, nsteps,
            np.ascontiguousarray(np.asarray(x0s, dtype=float)[:, 0]),
            np.ascontiguousarray(np.asarray(v0s, dtype=float)[:, 0]),
            grid.steps_per_period, dtab, stab, ddtab, sdtab,
            grid.dt, np.sqrt(grid.dt), stride, nrec, out_x, out_v, bel, bad,
        )
        _raise_divergence(bad)
        return out_x[:, :, None], out_v[:, :, None], bel
    return _numpy_tangent(model, paths, k0, nsteps, x0s, v0s, stride, nrec)


# ---------------------------------------------------------------------------
# generic numpy route
# ---------------------------------------------------------------------------

_CHUNK = 65536


def _numpy_evolve(model, path, k0, nsteps, x0s, scheme, record):
    """Reference integrator for arbitrary models.

    x0s: (S, d) states sharing this path's increments (S = 2 gives the
    two-point motion).  record is ("window", win) or
    ("stride", rec_start, stride, nrec).  Returns (slots, S, d).
    """
    grid = path.grid
    ntau = grid.steps_per_period
    dt = grid.dt
    x = np.array(x0s, dtype=float)
    S, d = x.shape
    milstein = scheme == "milstein"

    if record[0] == "window":
        win = record[1]
        out = np.empty((win + 1, S, d))
        rec_from = nsteps - win
        if rec_from <= 0:
            out[-rec_from] = x

        def maybe_record(s_done, xcur):
            if s_done >= rec_from:
                out[s_done - rec_from] = xcur

    else:
        _, rec_start, stride, nrec = record
        out = np.empty((nrec, S, d))
        if rec_start == 0 and nrec > 0:
            out[0] = x

        def maybe_record(s_done, xcur):
            if s_done >= max(rec_start, 1) and (s_done - rec_start) % stride == 0:
                j = (s_done - rec_start) // stride
                if j < nrec:
                    out[j] = xcur

    s = 0
    while s < nsteps:
        n = min(_CHUNK, nsteps - s)
        dws = path.increments(k0 + s, k0 + s + n)
        for i in range(n):
            k = k0 + s + i
            t = (k % ntau) * dt
            dw = dws[i]
            drift = np.asarray(model.drift(t, x), dtype=float)
            diff = np.asarray(model.diffusion(t, x), dtype=float)
            xn = x + drift * dt + np.einsum("...dm,m->...d", diff, dw)
            if milstein:
                sj = np.asarray(model.diffusion_jacobians(t, x), dtype=float)
                xn = xn + 0.5 * diff[..., 0, 0:1] * sj[..., 0, 0, 0:1] * (dw[0] ** 2 - dt)
            x = xn
            if not np.all(np.isfinite(x)):
                raise DivergenceError(k)
            maybe_record(s + i + 1, x)
        s += n
    return out


def _numpy_tangent(model, paths, k0, nsteps, x0s, v0s, stride, nrec):
    grid = paths[0].grid
    ntau = grid.steps_per_period
    dt = grid.dt
    # the integral accumulator is only meaningful when sigma has a right
    # inverse; derivative-flow callers ignore it
    has_inv = model.diffusion_right_inverse is not None
    R = len(paths)
    d = model.dim
    ncols = nrec + 1
    out_x = np.empty((R, ncols, d))
    out_v = np.empty((R, ncols, d))
    bel = np.empty(R)
    for i, p in enumerate(paths):
        x = np.asarray(x0s, dtype=float)[i].copy()
        v = np.asarray(v0s, dtype=float)[i].copy()
        acc = 0.0
        j = 0
        if stride > 0 and nrec > 0:
            out_x[i, 0] = x
            out_v[i, 0] = v
            j = 1
        s = 0
        while s < nsteps:
            n = min(_CHUNK, nsteps - s)
            dws = p.increments(k0 + s, k0 + s + n)
            for ii in range(n):
                k = k0 + s + ii
                t = (k % ntau) * dt
                dw = dws[ii]
                if has_inv:
                    sinv = np.asarray(model.diffusion_right_inverse(t, x), dtype=float)
                    acc += float(np.dot(sinv @ v, dw))
                jd = np.asarray(model.drift_jacobian(t, x), dtype=float)
                js = np.asarray(model.diffusion_jacobians(t, x), dtype=float)
                vn = v + (jd @ v) * dt + np.einsum("mab,b,m->a", js, v, dw)
                drift = np.asarray(model.drift(t, x), dtype=float)
                diff = np.asarray(model.diffusion(t, x), dtype=float)
                x = x + drift * dt + diff @ dw
                v = vn
                if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
                    raise DivergenceError(k)
                if stride > 0 and j < nrec and (s + ii + 1) % stride == 0:
                    out_x[i, j] = x
                    out_v[i, j] = v
                    j += 1
            s += n
        out_x[i, ncols - 1] = x
        out_v[i, ncols - 1] = v
        bel[i] = acc
    return out_x, out_v, bel


# ---------------------------------------------------------------------------
# public single-path operations
# ---------------------------------------------------------------------------


def _aligned_range(grid, t0, t1):
    k0 = grid.index_of(t0)
    k1 = grid.index_of(t1)
    if k0 > k1:
        raise InvalidSpecError(f"t0={t0} must not exceed t1={t1}")
    return k0, k1


def integrate(model, path, t0, t1, x0, scheme="euler") -> Trajectory:
    """Trajectory of the model on [t0, t1] driven by this path's increments."""
    grid = path.grid
    _check_model_grid(model, grid)
    _check_scheme(model, scheme)
    k0, k1 = _aligned_range(grid, t0, t1)
    x = _as_state(x0, model.dim)
    n = k1 - k0
    states = _traj_states(model, path, k0, n, x[None, :], scheme)[:, 0, :]
    return Trajectory(
        grid=grid, k0=k0, k1=k1, states=states,
        model_name=model.name, path_descriptor=path.descriptor(), scheme=scheme,
    )


def _traj_states(model, path, k0, nsteps, x0s, scheme):
    """(nsteps+1, S, d) states; fused kernel when available."""
    grid = path.grid
    if _use_fused(model, [path]) and x0s.shape[1] == 1:
        S = x0s.shape[0]
        paths = [path] * S
        rec = ensemble_recorded(
            model, paths, k0, nsteps, x0s, rec_start=0, stride=1, nrec=nsteps + 1,
            scheme=scheme,
        )
        return np.swapaxes(rec, 0, 1)
    return _numpy_evolve(model, path, k0, nsteps, x0s, scheme, record=("stride", 0, 1, nsteps + 1))


def integrate_pair(model, path, t0, t1, x0, y0, scheme="euler"):
    """Two trajectories driven by identical increments (the two-point motion).

    Each component is bit-identical to running ``integrate`` on it alone.
    """
    grid = path.grid
    _check_model_grid(model, grid)
    _check_scheme(model, scheme)
    k0, k1 = _aligned_range(grid, t0, t1)
    x = _as_state(x0, model.dim)
    y = _as_state(y0, model.dim)
    states = _traj_states(model, path, k0, k1 - k0, np.stack([x, y]), scheme)
    mk = lambda s: Trajectory(
        grid=grid, k0=k0, k1=k1, states=s,
        model_name=model.name, path_descriptor=path.descriptor(), scheme=scheme,
    )
    return mk(states[:, 0, :].copy()), mk(states[:, 1, :].copy())


def derivative_flow(model, path, t0, t1, x0, v, scheme="euler") -> Trajectory:
    """Tangent trajectory v_k = D_x X(t_k, t0) v along the base trajectory.

    Euler only; integrates the variational recursion
    v <- v + J_drift v dt + sum_j J_diff_j v dW^j with left-point coefficients.
    """
    if scheme != "euler":
        raise CapabilityError("derivative_flow supports the euler scheme only")
    grid = path.grid
    _check_model_grid(model, grid)
    if model.drift_jacobian is None or model.diffusion_jacobians is None:
        raise CapabilityError("derivative flow needs drift and diffusion Jacobians")
    k0, k1 = _aligned_range(grid, t0, t1)
    x = _as_state(x0, model.dim)
    vv = _as_state(v, model.dim)
    n = k1 - k0
    if model.is_scalar_poly and isinstance(path, NoisePath):
        _, vs, _ = ensemble_tangent(
            model, [path], k0, n, x[None, :], vv[None, :], stride=1, nrec=n + 1
        )
    else:
        _, vs, _ = _numpy_tangent(model, [path], k0, n, x[None, :], vv[None, :], 1, n + 1)
    # the tangent routines always append the final state in a trailing slot;
    # slots 0..n already hold it for a stride-1 recording
    states = vs[0][: n + 1]
    return Trajectory(
        grid=grid, k0=k0, k1=k1, states=states,
        model_name=model.name, path_descriptor=path.descriptor(), scheme="euler",
    )
