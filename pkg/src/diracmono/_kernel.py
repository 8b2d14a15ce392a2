"""Optional compiled inner loop for the radial propagator.

The propagation arithmetic lives twice: here as a scalar loop that numba
compiles to native code, and in propagation.py as the vectorized numpy
reference used when numba is unavailable. Both implement the same stepping
(4th-order Magnus step, scaled traceless-2x2 exponential, per-step
renormalization, optional phase tracking and recording); the test suite
cross-checks the two paths against each other.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn

        return deco


_SQRT3 = math.sqrt(3.0)
_TWO_PI = 2.0 * math.pi


@njit(cache=True)
def propagate_flat(hs, rm1, rm2, w, fam_idx, k, m, E, y1, y2,
                   i_from, i_to, do_phase, do_record,
                   rec1, rec2, logs, th_cont):  # pragma: no cover - compiled
    """Advance (y1, y2) in place across steps i_from..i_to (either direction).

    All batch arrays are flat (B,). rec1/rec2/logs have shape (n_steps+1, B)
    when do_record, else (1, 1); th_cont has shape (B,) when do_phase. The
    return value is 0 on success, or 1 + the step index if an oscillatory
    step rotated too fast for crossing-based phase unwrapping.
    """
    outward = i_to >= i_from
    n = i_to - i_from if outward else i_from - i_to
    bsz = E.shape[0]
    cross = math.pi if outward else -math.pi

    L = np.zeros(bsz)
    th_raw = np.empty(bsz)
    if do_phase:
        for b in range(bsz):
            th_raw[b] = math.atan2(y2[b], y1[b])
    if do_record:
        for b in range(bsz):
            rec1[0, b] = y1[b]
            rec2[0, b] = y2[b]
            logs[0, b] = 0.0

    for jj in range(n):
        i = i_from + jj if outward else i_from - 1 - jj
        hh = hs[i]
        r1 = rm1[i]
        r2 = rm2[i]
        cc = _SQRT3 * hh * hh / 12.0
        kh = -k * hh
        k2cc = 2.0 * k * cc
        hh2 = 0.5 * hh
        for b in range(bsz):
            e = E[b]
            em = e + m
            me = m - e
            f = fam_idx[b]
            w1 = w[i, 0, f]
            w2 = w[i, 1, f]
            b1 = r1 * em - w1
            b2 = r2 * em - w2
            c1 = w1 + r1 * me
            c2 = w2 + r2 * me
            oa = kh - cc * (b1 * c2 - b2 * c1)
            ob = hh2 * (b1 + b2) + k2cc * (b2 - b1)
            oc = hh2 * (c1 + c2) + k2cc * (c1 - c2)
            if not outward:
                oa = -oa
                ob = -ob
                oc = -oc
            q = oa * oa + ob * oc
            if q >= 1e-6:
                s = math.sqrt(q)
                e2 = math.exp(-2.0 * s)
                ch = 0.5 * (1.0 + e2)
                sh = 0.5 * (1.0 - e2) / s
                logf = s
            elif q <= -1e-6:
                wq = math.sqrt(-q)
                if do_phase and wq > 2.95:
                    return 1 + i
                ch = math.cos(wq)
                sh = math.sin(wq) / wq
                logf = 0.0
            else:
                ch = 1.0 + q * (0.5 + q * (1.0 / 24.0 + q / 720.0))
                sh = 1.0 + q * (1.0 / 6.0 + q * (1.0 / 120.0 + q / 5040.0))
                logf = 0.0
            ny1 = (ch + sh * oa) * y1[b] + sh * ob * y2[b]
            ny2 = sh * oc * y1[b] + (ch - sh * oa) * y2[b]
            if do_phase:
                corr = cross if y1[b] * ny1 < 0.0 else 0.0
                th_new = math.atan2(ny2, ny1)
                d = th_new - th_raw[b] + corr
                d -= _TWO_PI * math.floor((d + math.pi) / _TWO_PI)
                th_cont[b] += d - corr
                th_raw[b] = th_new
            nrm = abs(ny1)
            if abs(ny2) > nrm:
                nrm = abs(ny2)
            if nrm < 1e-300:
                nrm = 1e-300
            y1[b] = ny1 / nrm
            y2[b] = ny2 / nrm
            if do_record:
                L[b] += logf + math.log(nrm)
                rec1[jj + 1, b] = y1[b]
                rec2[jj + 1, b] = y2[b]
                logs[jj + 1, b] = L[b]
    return 0
