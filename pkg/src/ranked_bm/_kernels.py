"""Compiled inner loops for the time-stepping schemes.

All kernels advance state in place over a block of pre-drawn noise and
release the GIL, so replicas can run on a thread pool.
"""
import numpy as np
from numba import njit

LCP_OK = 0
LCP_FAIL = 1


@njit(cache=True, nogil=True)
def lcp_solve(m, lower, upper, dl, active, cp, dp, max_sweeps, tol):
    """Solve ``z = m + R dl >= 0, dl >= 0, z.dl = 0`` for unit-diagonal
    tridiagonal ``R`` with bands ``lower`` (``R[k+1,k]``) and ``upper``
    (``R[k,k+1]``).  Writes ``dl``; returns (status, residual).

    Projected Gauss-Seidel first, then an active-set polish that solves the
    restricted system exactly and repairs the active set until the KKT
    conditions hold.
    """
    d = m.shape[0]
    for k in range(d):
        dl[k] = 0.0
    neg = False
    for k in range(d):
        if m[k] < 0.0:
            neg = True
            break
    if not neg:
        return LCP_OK, 0.0

    for sweep in range(max_sweeps):
        change = 0.0
        for k in range(d):
            r = m[k]
            if k > 0:
                r += lower[k - 1] * dl[k - 1]
            if k < d - 1:
                r += upper[k] * dl[k + 1]
            new = -r if r < 0.0 else 0.0
            diff = abs(new - dl[k])
            if diff > change:
                change = diff
            dl[k] = new
        if change <= 1e-15:
            break

    for k in range(d):
        active[k] = dl[k] > 0.0
    for it in range(2 * d + 2):
        # Thomas solve of R_SS x = -m_S over runs of consecutive active indices
        prev = -2
        for k in range(d):
            if not active[k]:
                continue
            linked = prev == k - 1
            a = lower[k - 1] if linked else 0.0
            piv = 1.0 - (a * cp[prev] if linked else 0.0)
            cp[k] = (upper[k] / piv) if k < d - 1 else 0.0
            dp[k] = (-m[k] - (a * dp[prev] if linked else 0.0)) / piv
            prev = k
        nxt = -2
        for k in range(d - 1, -1, -1):
            if not active[k]:
                dl[k] = 0.0
                continue
            if nxt == k + 1:
                dl[k] = dp[k] - cp[k] * dl[k + 1]
            else:
                dl[k] = dp[k]
            nxt = k
        changed = False
        for k in range(d):
            if active[k] and dl[k] < 0.0:
                active[k] = False
                dl[k] = 0.0
                changed = True
        if changed:
            continue
        for k in range(d):
            if active[k]:
                continue
            z = m[k]
            if k > 0:
                z += lower[k - 1] * dl[k - 1]
            if k < d - 1:
                z += upper[k] * dl[k + 1]
            if z < -tol:
                active[k] = True
                changed = True
        if not changed:
            break

    res = 0.0
    for k in range(d):
        z = m[k] + dl[k]
        if k > 0:
            z += lower[k - 1] * dl[k - 1]
        if k < d - 1:
            z += upper[k] * dl[k + 1]
        r = max(-z, -dl[k], abs(z * dl[k]))
        if r > res:
            res = r
    if res > tol:
        return LCP_FAIL, res
    return LCP_OK, res


@njit(cache=True, nogil=True)
def gap_block(z, y1, L, xi, u, mu, sig, avar, lower, upper, g1, qm1, dt, bridge,
              out_z, out_l, out_y1, step0, stride, slot0, max_sweeps, tol, dl, m,
              active, cp, dp):
    """Advance the reflected gap scheme over ``xi.shape[0]`` steps.

    ``xi[n, k]`` is the standard normal for rank channel ``k`` at step ``n``.
    In bridge mode the LCP is posed on the per-coordinate Brownian-bridge
    minimum of the step (driven by ``u``) and the push is applied to the
    free endpoint.  Stores every ``stride``-th global step.

    Returns (status, failing step, max residual, next output slot).
    """
    n_steps, N = xi.shape
    d = N - 1
    sqdt = np.sqrt(dt)
    worst = 0.0
    slot = slot0
    w = np.empty(d)
    for n in range(n_steps):
        for k in range(d):
            w[k] = z[k] + mu[k] * dt + sqdt * (sig[k + 1] * xi[n, k + 1] - sig[k] * xi[n, k])
        if bridge:
            for k in range(d):
                diff = w[k] - z[k]
                lu = np.log1p(-u[n, k])
                m[k] = 0.5 * (z[k] + w[k] - np.sqrt(diff * diff - 2.0 * avar[k] * dt * lu))
        else:
            for k in range(d):
                m[k] = w[k]
        status, res = lcp_solve(m, lower, upper, dl, active, cp, dp, max_sweeps, tol)
        if status != LCP_OK:
            return status, step0 + n + 1, res, slot
        if res > worst:
            worst = res
        for k in range(d):
            push = dl[k]
            if k > 0:
                push += lower[k - 1] * dl[k - 1]
            if k < d - 1:
                push += upper[k] * dl[k + 1]
            zk = w[k] + push
            if not bridge and dl[k] > 0.0:
                zk = 0.0
            z[k] = zk if zk > 0.0 else 0.0
            L[k] += dl[k]
        y1[0] += g1 * dt + sig[0] * sqdt * xi[n, 0] - qm1 * dl[0]
        if (step0 + n + 1) % stride == 0:
            for k in range(d):
                out_z[slot, k] = z[k]
                out_l[slot, k] = L[k]
            out_y1[slot] = y1[0]
            slot += 1
    return LCP_OK, 0, worst, slot


@njit(cache=True, nogil=True)
def rank_inplace(x, order):
    """Stable insertion sort of ``order`` by ``(x[i], i)``."""
    for i in range(1, order.shape[0]):
        cur = order[i]
        j = i - 1
        while j >= 0 and (x[order[j]] > x[cur] or (x[order[j]] == x[cur] and order[j] > cur)):
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = cur


@njit(cache=True, nogil=True)
def named_block(x, order, xi, g, sig, dt, out_x, out_perm, step0, stride, slot0):
    """Advance named particles: rank by (position, index), then move each
    particle with its rank's drift and diffusion.  ``order`` holds the
    previous ranking and is re-sorted in place (insertion sort, nearly
    sorted between steps).  Returns the next output slot."""
    n_steps, N = xi.shape
    sqdt = np.sqrt(dt)
    slot = slot0
    for n in range(n_steps):
        rank_inplace(x, order)
        for k in range(N):
            i = order[k]
            x[i] += g[k] * dt + sig[k] * sqdt * xi[n, i]
        if (step0 + n + 1) % stride == 0:
            for k in range(N):
                out_x[slot, k] = x[k]
            rank_inplace(x, order)
            for k in range(N):
                out_perm[slot, k] = order[k]
            slot += 1
    return slot
