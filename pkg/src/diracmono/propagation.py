"""Batched propagation engine for the coupled first-order radial system.

The radial equations are linear in (psi1, psi2), so a whole batch of energies
(and of potential-family variants) is advanced through the same radial step
sequence with vectorized numpy arithmetic. Each step applies a 4th-order
Magnus propagator (two-point Gauss quadrature of the coefficient matrix plus
its commutator correction), evaluated in closed form through the traceless
2x2 exponential. The propagator entries are kept scaled, and the state is
renormalized per element after every step, so traversing hundreds of
exponential e-folds is overflow-free.

Radial steps are parametrized either in x = ln r ("log", used for d > 1,
where the 1/r channel term becomes a constant and the origin power-law layer
costs a handful of steps) or in x = r ("lin", used on the d = 1 half-line).

Nothing in this module knows about eigenvalue search policy; it provides
match values, batched bisection, and recorded two-sided sweeps that the
solver layer assembles into bound states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernel
from .numerics import expm_traceless_2x2

_SQRT3 = np.sqrt(3.0)
_TINY = 1e-300


# ---------------------------------------------------------------------------
# step tables
# ---------------------------------------------------------------------------

@dataclass
class StepTable:
    """Precomputed per-step data for one radial grid and a family batch.

    r_nodes has S+1 entries; step i advances from r_nodes[i] to r_nodes[i+1].
    w[i, g, f] = (dr/dx at gauss node g) * V_f(r at gauss node g), the only
    family-dependent ingredient of the coefficient matrix.
    """

    param: str              # "log" or "lin"
    k: float
    m: float
    r_nodes: np.ndarray     # (S+1,)
    h: np.ndarray           # (S,)
    rmul: np.ndarray        # (S, 2) dr/dx at the two gauss nodes
    w: np.ndarray           # (S, 2, F)
    i_match: int
    n_fam: int

    @property
    def n_steps(self) -> int:
        return self.h.size

    @property
    def r_match(self) -> float:
        return float(self.r_nodes[self.i_match])


def march_nodes(x_lo: float, x_hi: float, h_of_x, x_breaks=()) -> np.ndarray:
    """Step-size-controlled node positions covering [x_lo, x_hi].

    h_of_x(x) proposes a local step; nodes are marched and then each segment
    between consecutive break points (always including the endpoints) is
    rescaled so breaks land exactly on nodes.
    """
    breaks = sorted({float(x_lo), float(x_hi), *map(float, x_breaks)})
    nodes = [breaks[0]]
    for left, right in zip(breaks[:-1], breaks[1:]):
        xs = [left]
        x = left
        while x < right:
            x = x + max(h_of_x(x), 1e-12)
            xs.append(min(x, right))
        # rescale interior spacing so the segment end is hit exactly
        xs = np.asarray(xs)
        if xs.size > 2 and xs[-1] - xs[-2] < 0.25 * (xs[-2] - xs[-3]):
            xs = np.delete(xs, -2)  # avoid a sliver step at the end
        span = right - left
        rel = (xs - left) / (xs[-1] - left)
        nodes.extend((left + rel[1:] * span).tolist())
    return np.asarray(nodes)


def uniform_nodes(x_lo: float, x_hi: float, n_total: int, x_breaks=()) -> np.ndarray:
    """Piecewise-uniform nodes with n_total points, breaks landing on nodes."""
    breaks = sorted({float(x_lo), float(x_hi), *map(float, x_breaks)})
    span = breaks[-1] - breaks[0]
    nodes = [breaks[0]]
    remaining = n_total - 1
    for seg, (left, right) in enumerate(zip(breaks[:-1], breaks[1:])):
        if seg == len(breaks) - 2:
            n_seg = remaining
        else:
            n_seg = max(2, round((n_total - 1) * (right - left) / span))
            remaining -= n_seg
        nodes.extend(np.linspace(left, right, n_seg + 1)[1:].tolist())
    return np.asarray(nodes)


def build_step_table(param: str, k: float, m: float, families,
                     x_nodes: np.ndarray, i_match: int) -> StepTable:
    """Evaluate the family potentials at the Gauss nodes of every step."""
    x_nodes = np.asarray(x_nodes, dtype=float)
    if np.any(np.diff(x_nodes) <= 0):
        raise ValueError("step nodes must be strictly increasing")
    if param == "log":
        r_nodes = np.exp(x_nodes)
    elif param == "lin":
        r_nodes = x_nodes
        if k != 0.0:
            raise ValueError("linear parametrization requires k = 0")
    else:
        raise ValueError(f"unknown parametrization {param!r}")

    h = np.diff(x_nodes)
    off = h * (0.5 / _SQRT3)
    xc = 0.5 * (x_nodes[:-1] + x_nodes[1:])
    xg = np.stack([xc - off, xc + off], axis=1)      # (S, 2)
    if param == "log":
        rg = np.exp(xg)
        rmul = rg
    else:
        rg = xg
        rmul = np.ones_like(rg)

    w = np.empty((h.size, 2, len(families)))
    flat = rg.reshape(-1)
    for f, fam in enumerate(families):
        w[:, :, f] = (rmul * fam.evaluate(flat).reshape(rg.shape))
    return StepTable(param=param, k=float(k), m=float(m), r_nodes=r_nodes,
                     h=h, rmul=rmul, w=w, i_match=int(i_match),
                     n_fam=len(families))


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def _step_omega(table: StepTable, i: int, w_sel, em, me):
    """Magnus matrix entries (oa, ob, oc) for step i and batch energies.

    em = E + m and me = m - E, broadcast against the selected potential data.
    """
    h = table.h[i]
    r1, r2 = table.rmul[i]
    w1, w2 = w_sel
    b1 = r1 * em - w1
    b2 = r2 * em - w2
    c1 = w1 + r1 * me
    c2 = w2 + r2 * me
    cc = _SQRT3 * h * h / 12.0
    k = table.k
    oa = (-k) * h - cc * (b1 * c2 - b2 * c1)
    ob = 0.5 * h * (b1 + b2) + cc * (2.0 * k) * (b2 - b1)
    oc = 0.5 * h * (c1 + c2) + cc * (2.0 * k) * (c1 - c2)
    return oa, ob, oc


def _select(table: StepTable, i: int, fam_idx):
    wi = table.w[i]
    if fam_idx is None:
        # scan layout: batch shaped (F, nE), potentials broadcast over energies
        return wi[0][:, None], wi[1][:, None]
    return wi[0][fam_idx], wi[1][fam_idx]


def _wrap_pi(x):
    """Map angles to [-pi, pi)."""
    return (x + np.pi) % (2.0 * np.pi) - np.pi


def propagate(table: StepTable, fam_idx, E, y0, i_from: int, i_to: int,
              record: bool = False, phase: bool = False):
    """Advance y0 from node i_from to node i_to (either direction).

    E is the batch of energies; fam_idx maps batch elements to table families
    (None means the (F, nE) scan layout). The state is renormalized after
    every step. With record=True, returns the per-node history and the
    accumulated log-magnitudes needed to undo the renormalization.

    With phase=True, additionally tracks the continuous polar angle
    theta = atan2(psi2, psi1) of the solution direction along the traversal.
    For attractive potentials the coefficient of psi2 in psi1' is positive
    throughout the gap, so the direction crosses the psi1 = 0 axis only
    clockwise along increasing r (counter-clockwise along the inward
    traversal); each step rotates by less than pi beyond its axis crossings,
    which makes the per-step unwrapping exact. This angle is what eigenvalue
    counting is built on.

    Dispatches to the compiled kernel when numba is present; the numpy loop
    below is the reference implementation of the same arithmetic.
    """
    if record and phase:
        raise ValueError("record and phase modes are mutually exclusive")
    E = np.asarray(E, dtype=float)
    if _kernel.HAVE_NUMBA:
        return _propagate_kernel(table, fam_idx, E, y0, i_from, i_to, record, phase)
    return _propagate_numpy(table, fam_idx, E, y0, i_from, i_to, record, phase)


def _propagate_kernel(table, fam_idx, E, y0, i_from, i_to, record, phase):
    shape = E.shape
    if fam_idx is None:
        flat_idx = np.repeat(np.arange(table.n_fam, dtype=np.int64),
                             E.size // max(table.n_fam, 1))
    else:
        flat_idx = np.asarray(fam_idx, dtype=np.int64).ravel()
    e_flat = E.ravel().copy()
    y1 = np.array(np.broadcast_to(y0[0], shape), dtype=float).ravel()
    y2 = np.array(np.broadcast_to(y0[1], shape), dtype=float).ravel()
    n_rec = abs(i_to - i_from) + 1
    if record:
        rec1 = np.empty((n_rec, e_flat.size))
        rec2 = np.empty((n_rec, e_flat.size))
        logs = np.empty((n_rec, e_flat.size))
    else:
        rec1 = rec2 = logs = np.empty((1, 1))
    th = np.zeros(e_flat.size) if phase else np.empty(0)
    if phase:
        th[:] = np.arctan2(y2, y1)
    status = _kernel.propagate_flat(
        table.h, table.rmul[:, 0], table.rmul[:, 1], table.w, flat_idx,
        table.k, table.m, e_flat, y1, y2, i_from, i_to, phase, record,
        rec1, rec2, logs, th)
    if status:
        raise RuntimeError(
            f"step {status - 1} rotates the solution too fast for phase "
            f"tracking; the step rule is too coarse"
        )
    out = (y1.reshape(shape), y2.reshape(shape))
    if record:
        if i_to < i_from:
            rec1, rec2, logs = rec1[::-1], rec2[::-1], logs[::-1]
        full = (n_rec, *shape)
        return out, rec1.reshape(full), rec2.reshape(full), logs.reshape(full)
    if phase:
        return out, th.reshape(shape)
    return out


def _propagate_numpy(table, fam_idx, E, y0, i_from, i_to, record, phase):
    em = E + table.m
    me = table.m - E
    y1 = np.array(np.broadcast_to(y0[0], E.shape), dtype=float)
    y2 = np.array(np.broadcast_to(y0[1], E.shape), dtype=float)

    outward = i_to >= i_from
    steps = range(i_from, i_to) if outward else range(i_from - 1, i_to - 1, -1)
    n_rec = abs(i_to - i_from) + 1
    if record:
        rec1 = np.empty((n_rec, *E.shape))
        rec2 = np.empty((n_rec, *E.shape))
        logs = np.zeros((n_rec, *E.shape))
        rec1[0], rec2[0] = y1, y2
        L = np.zeros(E.shape)
    if phase:
        th_raw = np.arctan2(y2, y1)
        th_cont = th_raw.copy()
        cross_sign = np.pi if outward else -np.pi

    for jj, i in enumerate(steps):
        w_sel = _select(table, i, fam_idx)
        oa, ob, oc = _step_omega(table, i, w_sel, em, me)
        if not outward:
            oa, ob, oc = -oa, -ob, -oc
        m11, m12, m21, m22, logf = expm_traceless_2x2(oa, ob, oc)
        y1_new = m11 * y1 + m12 * y2
        y2_new = m21 * y1 + m22 * y2
        if phase:
            q = oa * oa + ob * oc
            wosc = np.max(-q)
            if wosc > 8.7:  # 2.95^2: a step rotated too far to unwrap
                raise RuntimeError(
                    f"step {i} rotates the solution too fast for phase "
                    f"tracking (w^2 = {wosc:.3f}); the step rule is too coarse"
                )
            n_c = (y1 * y1_new < 0.0).astype(float)
            th_new = np.arctan2(y2_new, y1_new)
            corr = n_c * cross_sign
            th_cont = th_cont + _wrap_pi(th_new - th_raw + corr) - corr
            th_raw = th_new
        y1, y2 = y1_new, y2_new
        nrm = np.maximum(np.maximum(np.abs(y1), np.abs(y2)), _TINY)
        y1 /= nrm
        y2 /= nrm
        if record:
            L = L + logf + np.log(nrm)
            rec1[jj + 1], rec2[jj + 1] = y1, y2
            logs[jj + 1] = L

    if record:
        if not outward:
            rec1, rec2, logs = rec1[::-1], rec2[::-1], logs[::-1]
        return (y1, y2), rec1, rec2, logs
    if phase:
        return (y1, y2), th_cont
    return y1, y2


def match_values(table: StepTable, fam_idx, E, seed_origin, seed_tail,
                 phase: bool = False):
    """Scale-invariant mismatch of the two-sided shooting at the match node.

    seed_origin/seed_tail are callables (E, fam_idx) -> (y1, y2) producing
    start values for the energy batch. The mismatch is the cross product of
    the two unit directions, so it lies in [-2, 2] and vanishes exactly at
    eigenvalues.

    With phase=True also returns the matching angle
    theta_out(r_match) - theta_in(r_match), continuous and strictly
    decreasing in E; it passes a multiple of pi exactly at each eigenvalue,
    which is what makes eigenvalue indexing alias-free.
    """
    y0 = seed_origin(E, fam_idx)
    yt = seed_tail(E, fam_idx)
    if phase:
        (o1, o2), th_out = propagate(table, fam_idx, E, y0, 0, table.i_match,
                                     phase=True)
        (t1, t2), th_in = propagate(table, fam_idx, E, yt, table.n_steps,
                                    table.i_match, phase=True)
    else:
        o1, o2 = propagate(table, fam_idx, E, y0, 0, table.i_match)
        t1, t2 = propagate(table, fam_idx, E, yt, table.n_steps, table.i_match)
    no = np.sqrt(o1 * o1 + o2 * o2)
    ni = np.sqrt(t1 * t1 + t2 * t2)
    mval = (o1 * t2 - o2 * t1) / np.maximum(no * ni, _TINY)
    if phase:
        return mval, th_out - th_in
    return mval


def count_below(dtheta, dtheta_bottom):
    """Number of eigenvalues between the reference energy and E.

    dtheta is the matching angle at E, dtheta_bottom at the bottom reference
    energy; the count is the number of pi-multiples the (monotone) matching
    angle crossed in between.
    """
    return (np.floor(dtheta_bottom / np.pi) - np.floor(dtheta / np.pi)).astype(int)


def count_bisect(table: StepTable, fam_idx, lo, hi, targets, dtheta_bottom,
                 tol: float, seed_origin, seed_tail, max_iter: int = 200):
    """Locate the eigenvalue of index targets[b] within the bracket [lo, hi].

    Preconditions (checked by the caller): count(lo) <= target and
    count(hi) >= target + 1. The eigenvalue is the unique point in the
    bracket where the matching angle crosses K*pi with
    K = floor(dtheta_bottom/pi) - target; since the angle is smooth and
    strictly decreasing, the bracket is narrowed by regula falsi with the
    Illinois weighting, falling back to plain midpoints whenever the bracket
    is slow to shrink. The bracket is maintained at every iteration, so the
    search is as safe as pure bisection. Returns (E, |M|, final width).
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    targets = np.asarray(targets)
    k_pi = (np.floor(dtheta_bottom / np.pi) - targets) * np.pi

    def g_at(e):
        m_val, dth = match_values(table, fam_idx, e, seed_origin, seed_tail,
                                  phase=True)
        return m_val, dth - k_pi

    _, g_lo = g_at(lo)
    _, g_hi = g_at(hi)
    m_mid = np.zeros_like(lo)
    stale_lo = np.zeros(lo.shape, dtype=int)
    stale_hi = np.zeros(lo.shape, dtype=int)
    for it in range(max_iter):
        width = hi - lo
        if float(np.max(width)) <= tol:
            break
        denom = g_lo - g_hi
        frac = np.where(np.abs(denom) > 0, g_lo / np.where(denom == 0, 1.0, denom), 0.5)
        mid = lo + np.clip(frac, 0.12, 0.88) * width
        if it % 4 == 3:  # periodic plain bisection keeps worst-case logarithmic
            mid = 0.5 * (lo + hi)
        m_mid, g_mid = g_at(mid)
        up = g_mid > 0  # still above the target multiple: move lo
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
        # Illinois weighting: halve the retained endpoint value when the same
        # side survives twice, which forces the secant to cross over
        stale_hi = np.where(up, stale_hi + 1, 0)
        stale_lo = np.where(up, 0, stale_lo + 1)
        g_lo = np.where(up, g_mid, np.where(stale_lo >= 2, 0.5 * g_lo, g_lo))
        g_hi = np.where(up, np.where(stale_hi >= 2, 0.5 * g_hi, g_hi), g_mid)
    return 0.5 * (lo + hi), np.abs(m_mid), hi - lo


def assemble_two_sided(table: StepTable, fam_idx, E, seed_origin, seed_tail):
    """Recorded two-sided sweep joined at the match node.

    Returns (psi1, psi2) with shape (S+1, batch) in a common (arbitrary)
    normalization: the outward piece is kept below the match node, the inward
    piece above it, scaled by the projection of the outward vector on the
    inward direction so both sides agree at the match node when E is an
    eigenvalue. Magnitudes are reconstructed from the renormalization logs;
    amplitudes more than ~700 e-folds below the match point flush to zero.
    """
    im = table.i_match
    y0 = seed_origin(E, fam_idx)
    (_, _), o1, o2, lo = propagate(table, fam_idx, E, y0, 0, im, record=True)
    yt = seed_tail(E, fam_idx)
    (_, _), t1, t2, lt = propagate(table, fam_idx, E, yt, table.n_steps, im, record=True)

    # outward piece, gauged so its match-node value has log-magnitude 0
    ref_o = lo[-1]
    psi1_out = o1 * np.exp(lo - ref_o)
    psi2_out = o2 * np.exp(lo - ref_o)

    # inward piece scaled onto the outward direction at the match node
    a1, a2 = o1[-1], o2[-1]
    b1, b2 = t1[0], t2[0]
    proj = (a1 * b1 + a2 * b2) / np.maximum(b1 * b1 + b2 * b2, _TINY)
    ref_t = lt[0]
    scale = np.exp(lt - ref_t)
    psi1_in = t1 * scale * proj
    psi2_in = t2 * scale * proj

    psi1 = np.concatenate([psi1_out, psi1_in[1:]], axis=0)
    psi2 = np.concatenate([psi2_out, psi2_in[1:]], axis=0)
    return psi1, psi2


def count_sign_changes(values: np.ndarray, dead_band_rel: float = 1e-12) -> int:
    """Strict sign changes of a sampled function, ignoring a relative dead band."""
    v = np.asarray(values, dtype=float)
    peak = np.max(np.abs(v))
    if peak == 0.0:
        return 0
    live = v[np.abs(v) > dead_band_rel * peak]
    if live.size < 2:
        return 0
    s = np.sign(live)
    return int(np.sum(s[1:] * s[:-1] < 0))
