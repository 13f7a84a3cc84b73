"""Fused integration kernels for scalar polynomial models.

Noise generation (Philox word -> Gaussian), coefficient lookup and the Euler
or Milstein update run in a single jitted loop per replica, so ensembles of
10^4+ paths over 10^5+ steps stay cheap and no increment buffers are ever
materialized.

Conventions shared by every kernel:

* one noise word per step (m = 1); the word index of step ``s`` of replica
  ``i`` is ``wstarts[i] + s`` (absolute: grid index + path offset + WORD_OFFSET);
* coefficients are read from per-phase tables ``tab[deg, kphi]`` with
  ``kphi = (k0 + s) mod steps_per_period`` — the periodic reduction that makes
  the discrete shift conjugacy exact;
* the state update is
  ``x + drift*dt + sigma*dw  [+ 0.5*sigma*dsigma*(dw*dw - dt) for Milstein]``
  evaluated in exactly this order, replica by replica, so values never depend
  on how replicas are batched;
* a non-finite state stops the replica and its (absolute) step index is
  written to ``bad[i]``; ``bad[i] = -1`` means the replica ran clean.

The Philox block-caching boilerplate is spelled out inside each loop rather
than shared through a helper: threading the four block words through a tuple
return costs a factor two in throughput on this hot path.
"""

import numpy as np
from numba import njit

from .philox import U64, _philox_block, gauss_from_word

I64 = np.int64


@njit(cache=True, inline="always")
def _poly(tab, kphi, x):
    """Horner evaluation of sum_deg tab[deg, kphi] * x**deg."""
    acc = tab[tab.shape[0] - 1, kphi]
    for deg in range(tab.shape[0] - 2, -1, -1):
        acc = acc * x + tab[deg, kphi]
    return acc


@njit(cache=True, nogil=True)
def evolve_window(
    key0s, key1s, wstarts, k0s, nsteps, x0, ntau,
    drift_tab, diff_tab, diff_dtab, dt, sqdt, milstein,
    win, out, bad,
):
    """Evolve each replica and record its last ``win + 1`` states.

    out[i, j] = state after step nsteps[i] - win + j (j = 0 corresponds to the
    initial condition when nsteps[i] == win).  Serves pullback windows
    (win = steps_per_period) and plain final states (win = 0).
    """
    R = x0.shape[0]
    for i in range(R):
        x = x0[i]
        w = wstarts[i]
        blk = ~(w >> U64(2))
        b0 = U64(0)
        b1 = U64(0)
        b2 = U64(0)
        b3 = U64(0)
        key0 = key0s[i]
        key1 = key1s[i]
        kphi = k0s[i] % ntau
        if kphi < 0:
            kphi += ntau
        rec_from = nsteps[i] - win
        if rec_from <= 0:
            out[i, -rec_from] = x  # initial state lands in the window
        bad[i] = I64(-1)
        for s in range(nsteps[i]):
            nb = w >> U64(2)
            if nb != blk:
                blk = nb
                b0, b1, b2, b3 = _philox_block(blk, key0, key1)
            pos = w & U64(3)
            if pos == U64(0):
                word = b0
            elif pos == U64(1):
                word = b1
            elif pos == U64(2):
                word = b2
            else:
                word = b3
            dw = gauss_from_word(word, sqdt)
            x = x + _poly(drift_tab, kphi, x) * dt + _poly(diff_tab, kphi, x) * dw
            if milstein:
                sig = _poly(diff_tab, kphi, x)
                dsig = _poly(diff_dtab, kphi, x)
                x = x + 0.5 * sig * dsig * (dw * dw - dt)
            if not np.isfinite(x):
                bad[i] = k0s[i] + s
                break
            w += U64(1)
            kphi += 1
            if kphi == ntau:
                kphi = 0
            if s + 1 >= rec_from:
                out[i, s + 1 - rec_from] = x


@njit(cache=True, nogil=True)
def evolve_stride(
    key0s, key1s, wstarts, k0s, nsteps, x0, ntau,
    drift_tab, diff_tab, diff_dtab, dt, sqdt, milstein,
    rec_start, stride, nrec, out, bad,
):
    """Evolve each replica, recording the state after steps
    rec_start, rec_start + stride, ... (nrec records; step 0 = initial state).
    """
    R = x0.shape[0]
    for i in range(R):
        x = x0[i]
        w = wstarts[i]
        blk = ~(w >> U64(2))
        b0 = U64(0)
        b1 = U64(0)
        b2 = U64(0)
        b3 = U64(0)
        key0 = key0s[i]
        key1 = key1s[i]
        kphi = k0s[i] % ntau
        if kphi < 0:
            kphi += ntau
        bad[i] = I64(-1)
        j = 0
        if rec_start == 0:
            out[i, 0] = x
            j = 1
        nxt = rec_start + j * stride
        for s in range(nsteps):
            nb = w >> U64(2)
            if nb != blk:
                blk = nb
                b0, b1, b2, b3 = _philox_block(blk, key0, key1)
            pos = w & U64(3)
            if pos == U64(0):
                word = b0
            elif pos == U64(1):
                word = b1
            elif pos == U64(2):
                word = b2
            else:
                word = b3
            dw = gauss_from_word(word, sqdt)
            x = x + _poly(drift_tab, kphi, x) * dt + _poly(diff_tab, kphi, x) * dw
            if milstein:
                sig = _poly(diff_tab, kphi, x)
                dsig = _poly(diff_dtab, kphi, x)
                x = x + 0.5 * sig * dsig * (dw * dw - dt)
            if not np.isfinite(x):
                bad[i] = k0s[i] + s
                break
            w += U64(1)
            kphi += 1
            if kphi == ntau:
                kphi = 0
            if s + 1 == nxt and j < nrec:
                out[i, j] = x
                j += 1
                nxt = rec_start + j * stride


@njit(cache=True, nogil=True)
def evolve_tangent(
    key0s, key1s, wstarts, k0s, nsteps, x0, v0, ntau,
    drift_tab, diff_tab, drift_dtab, diff_dtab, dt, sqdt,
    stride, nrec, out_x, out_v, bel_acc, bad,
):
    """Joint state / tangent evolution with the left-point pay-in integral.

    Tangent recursion: v <- v + J_drift(t, x) v dt + J_diff(t, x) v dw.
    ``bel_acc[i]`` accumulates sum_k (v_k / sigma(t_k, x_k)) * dw_k with all
    factors evaluated before the step (non-anticipating), which is what the
    gradient representation formula requires.  Euler only.
    """
    R = x0.shape[0]
    for i in range(R):
        x = x0[i]
        v = v0[i]
        acc = 0.0
        w = wstarts[i]
        blk = ~(w >> U64(2))
        b0 = U64(0)
        b1 = U64(0)
        b2 = U64(0)
        b3 = U64(0)
        key0 = key0s[i]
        key1 = key1s[i]
        kphi = k0s[i] % ntau
        if kphi < 0:
            kphi += ntau
        bad[i] = I64(-1)
        j = 0
        if stride > 0 and nrec > 0:
            out_x[i, 0] = x
            out_v[i, 0] = v
            j = 1
        for s in range(nsteps):
            nb = w >> U64(2)
            if nb != blk:
                blk = nb
                b0, b1, b2, b3 = _philox_block(blk, key0, key1)
            pos = w & U64(3)
            if pos == U64(0):
                word = b0
            elif pos == U64(1):
                word = b1
            elif pos == U64(2):
                word = b2
            else:
                word = b3
            dw = gauss_from_word(word, sqdt)
            sig = _poly(diff_tab, kphi, x)
            acc = acc + (v / sig) * dw
            vnew = v + _poly(drift_dtab, kphi, x) * v * dt + _poly(diff_dtab, kphi, x) * v * dw
            x = x + _poly(drift_tab, kphi, x) * dt + sig * dw
            v = vnew
            if not (np.isfinite(x) and np.isfinite(v)):
                bad[i] = k0s[i] + s
                break
            w += U64(1)
            kphi += 1
            if kphi == ntau:
                kphi = 0
            if stride > 0 and j < nrec and (s + 1) % stride == 0:
                out_x[i, j] = x
                out_v[i, j] = v
                j += 1
        out_x[i, out_x.shape[1] - 1] = x
        out_v[i, out_v.shape[1] - 1] = v
        bel_acc[i] = acc
