"""Numba kernels for disk-plane kernel sums: direct and Barnes-Hut treecode.

Both routes compute, for each target zeta,

    V(zeta) = sum_j G_j (zeta - s_j) / (|zeta - s_j|^2 + d_j^2)

which for d_j = 0 equals conj(sum_j G_j / (zeta - s_j)).  The treecode
sorts sources along a Morton curve, so every quadtree box is a contiguous
slice, and stores the Cauchy moments a_k = sum_j G_j (s_j - c)^k about the
box center c.  A box is summed through

    sum_j G_j / (zeta - s_j) = sum_k a_k / (zeta - c)^(k+1)

when its radius r and the target distance d satisfy r < opening_angle * (d - r),
truncated at the lowest order whose tail bound matches the full order at the
acceptance limit.  Boxes holding blobs additionally need their largest core
to be negligible at that distance.  Targets are grouped by a second quadtree
and each group walks the source tree once.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_BITS = 16


@njit(cache=True, fastmath=True)
def _direct_kernel(tz, sr, si, gamma, d2):
    out = np.zeros(tz.shape[0], dtype=np.complex128)
    for i in range(tz.shape[0]):
        zr = tz[i].real
        zi = tz[i].imag
        acc_r = 0.0
        acc_i = 0.0
        for j in range(sr.shape[0]):
            dr = zr - sr[j]
            di = zi - si[j]
            den = dr * dr + di * di + d2[j]
            # exact coincidence with a point source contributes nothing
            f = gamma[j] / den if den > 0.0 else 0.0
            acc_r += f * dr
            acc_i += f * di
        out[i] = complex(acc_r, acc_i)
    return out


def direct_sum(tz, sz, gamma, delta):
    sz = np.asarray(sz, dtype=np.complex128)
    delta = np.asarray(delta, dtype=np.float64)
    return _direct_kernel(
        np.ascontiguousarray(tz, dtype=np.complex128),
        np.ascontiguousarray(sz.real),
        np.ascontiguousarray(sz.imag),
        np.ascontiguousarray(gamma, dtype=np.float64),
        delta * delta,
    )


@njit(cache=True)
def _spread(v):
    v = v & 0xFFFF
    v = (v | (v << 16)) & 0x0000FFFF0000FFFF
    v = (v | (v << 8)) & 0x00FF00FF00FF00FF
    v = (v | (v << 4)) & 0x0F0F0F0F0F0F0F0F
    v = (v | (v << 2)) & 0x3333333333333333
    v = (v | (v << 1)) & 0x5555555555555555
    return v


@njit(cache=True)
def _radix_argsort(keys, nbits):
    """Stable LSD radix argsort of nonnegative integer keys, 11 bits per pass."""
    n = keys.shape[0]
    perm = np.arange(n)
    tmp = np.empty(n, dtype=np.int64)
    counts = np.empty(2049, dtype=np.int64)
    shift = 0
    while shift < nbits:
        counts[:] = 0
        for j in range(n):
            counts[((keys[perm[j]] >> shift) & 2047) + 1] += 1
        for b in range(2048):
            counts[b + 1] += counts[b]
        for j in range(n):
            p = perm[j]
            b = (keys[p] >> shift) & 2047
            tmp[counts[b]] = p
            counts[b] += 1
        perm, tmp = tmp, perm
        shift += 11
    return perm


@njit(cache=True)
def _grow(a, cap, fill):
    out = np.full(cap, fill, dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


@njit(cache=True)
def _binom(p):
    b = np.zeros((p + 1, p + 1))
    for k in range(p + 1):
        b[k, 0] = 1.0
        for m in range(1, k + 1):
            b[k, m] = b[k - 1, m - 1] + (b[k - 1, m] if m <= k - 1 else 0.0)
    return b


@njit(cache=True)
def build_structure(sz, leaf_size):
    """Morton order of the sources and the box hierarchy over it.

    Returns (perm, start, stop, children); box ``k`` holds sorted sources
    ``start[k]:stop[k]`` and children always follow their parent.
    """
    n = sz.shape[0]
    x0 = sz.real.min()
    y0 = sz.imag.min()
    span = max(sz.real.max() - x0, sz.imag.max() - y0)
    if span <= 0.0:
        span = 1.0
    span *= 1.0 + 1e-12
    scale = (1 << _BITS) / span
    keys = np.empty(n, dtype=np.int64)
    for j in range(n):
        ix = min(int((sz[j].real - x0) * scale), (1 << _BITS) - 1)
        iy = min(int((sz[j].imag - y0) * scale), (1 << _BITS) - 1)
        keys[j] = _spread(ix) | (_spread(iy) << 1)
    perm = _radix_argsort(keys, 2 * _BITS)
    keys = keys[perm]

    cap = 8 * (n // max(leaf_size, 1)) + 64
    start = np.zeros(cap, dtype=np.int64)
    stop = np.zeros(cap, dtype=np.int64)
    level = np.zeros(cap, dtype=np.int64)
    prefix = np.zeros(cap, dtype=np.int64)
    children = -np.ones((cap, 4), dtype=np.int64)
    start[0] = 0
    stop[0] = n
    n_nodes = 1
    head = 0
    # breadth-first, so children always follow their parent
    while head < n_nodes:
        node = head
        head += 1
        s = start[node]
        e = stop[node]
        lev = level[node]
        if e - s <= leaf_size or lev >= _BITS:
            continue
        if n_nodes + 4 > cap:
            cap *= 2
            start = _grow(start, cap, 0)
            stop = _grow(stop, cap, 0)
            level = _grow(level, cap, 0)
            prefix = _grow(prefix, cap, 0)
            wider = -np.ones((cap, 4), dtype=np.int64)
            wider[:n_nodes] = children[:n_nodes]
            children = wider
        shift = 2 * (_BITS - lev - 1)
        base = prefix[node] << 2
        lo = s
        for q in range(4):
            bound = (base + q + 1) << shift
            hi = lo + np.searchsorted(keys[lo:e], bound)
            if hi > lo:
                c = n_nodes
                n_nodes += 1
                start[c] = lo
                stop[c] = hi
                level[c] = lev + 1
                prefix[c] = base + q
                children[node, q] = c
            lo = hi

    return perm, start[:n_nodes].copy(), stop[:n_nodes].copy(), children[:n_nodes].copy()


@njit(cache=True)
def _gather(sz, gamma, delta, perm):
    n = perm.shape[0]
    sr = np.empty(n)
    si = np.empty(n)
    sg = np.empty(n)
    sd = np.empty(n)
    for j in range(n):
        p = perm[j]
        sr[j] = sz[p].real
        si[j] = sz[p].imag
        sg[j] = gamma[p]
        sd[j] = delta[p]
    return sr, si, sg, sd


@njit(cache=True, fastmath=True)
def _leaf_moments(sr, si, sg, sd, s, e, c_r, c_i, out, dr, di, pr, pi):
    """Radius, largest core and moments of one leaf; powers advance for all
    sources at once, one order at a time."""
    n = e - s
    r2max = 0.0
    dmax = 0.0
    for j in range(n):
        dr[j] = sr[s + j] - c_r
        di[j] = si[s + j] - c_i
        r2max = max(r2max, dr[j] * dr[j] + di[j] * di[j])
        dmax = max(dmax, sd[s + j])
        pr[j] = sg[s + j]
        pi[j] = 0.0
    for m in range(out.shape[0]):
        acc_r = 0.0
        acc_i = 0.0
        for j in range(n):
            acc_r += pr[j]
            acc_i += pi[j]
            t = pr[j] * dr[j] - pi[j] * di[j]
            pi[j] = pr[j] * di[j] + pi[j] * dr[j]
            pr[j] = t
        out[m] = complex(acc_r, acc_i)
    return math.sqrt(r2max), dmax


@njit(cache=True)
def build_moments(sr, si, sg, sd, start, stop, children, order):
    """Centers, radii, largest core size and Cauchy moments of every box,
    for sources already in tree order."""
    n_nodes = start.shape[0]
    # expansion centers sit at the middle of each box's source bounding box
    bx0 = np.empty(n_nodes)
    bx1 = np.empty(n_nodes)
    by0 = np.empty(n_nodes)
    by1 = np.empty(n_nodes)
    center = np.empty(n_nodes, dtype=np.complex128)
    moments = np.zeros((n_nodes, order + 1), dtype=np.complex128)
    radius = np.zeros(n_nodes)
    dmax = np.zeros(n_nodes)
    binom = _binom(order)
    shifted = np.empty(order + 1, dtype=np.complex128)
    width = 1
    for node in range(n_nodes):
        width = max(width, stop[node] - start[node]) if children[node, 0] < 0 else width
    buf_dr = np.empty(width)
    buf_di = np.empty(width)
    buf_pr = np.empty(width)
    buf_pi = np.empty(width)
    for node in range(n_nodes - 1, -1, -1):
        leaf = True
        for q in range(4):
            if children[node, q] >= 0:
                leaf = False
        if leaf:
            s = start[node]
            e = stop[node]
            xl = sr[s]
            xh = xl
            yl = si[s]
            yh = yl
            for j in range(s + 1, e):
                x = sr[j]
                y = si[j]
                xl = min(xl, x)
                xh = max(xh, x)
                yl = min(yl, y)
                yh = max(yh, y)
            bx0[node] = xl
            bx1[node] = xh
            by0[node] = yl
            by1[node] = yh
            c0 = complex(0.5 * (xl + xh), 0.5 * (yl + yh))
            center[node] = c0
            radius[node], dmax[node] = _leaf_moments(
                sr, si, sg, sd, s, e, c0.real, c0.imag, moments[node], buf_dr, buf_di, buf_pr, buf_pi
            )
            continue
        first = True
        for q in range(4):
            ch = children[node, q]
            if ch < 0:
                continue
            if first:
                bx0[node] = bx0[ch]
                bx1[node] = bx1[ch]
                by0[node] = by0[ch]
                by1[node] = by1[ch]
                first = False
            else:
                bx0[node] = min(bx0[node], bx0[ch])
                bx1[node] = max(bx1[node], bx1[ch])
                by0[node] = min(by0[node], by0[ch])
                by1[node] = max(by1[node], by1[ch])
        c0 = complex(0.5 * (bx0[node] + bx1[node]), 0.5 * (by0[node] + by1[node]))
        center[node] = c0
        rbox = 0.5 * math.hypot(bx1[node] - bx0[node], by1[node] - by0[node])
        for q in range(4):
            ch = children[node, q]
            if ch < 0:
                continue
            t = center[ch] - c0
            r = radius[ch] + abs(t)
            if r > radius[node]:
                radius[node] = r
            if dmax[ch] > dmax[node]:
                dmax[node] = dmax[ch]
            # a_k(c0) = sum_m C(k, m) a_m(c) t^(k - m)
            shifted[0] = 1.0
            for m in range(1, order + 1):
                shifted[m] = shifted[m - 1] * t
            for k in range(order + 1):
                acc = 0j
                for m in range(k + 1):
                    acc += binom[k, m] * moments[ch, m] * shifted[k - m]
                moments[node, k] += acc
        radius[node] = min(radius[node], rbox)
    return center, radius, dmax, moments


@njit(cache=True, fastmath=True)
def _group_far(zr, zi, out_r, out_i, cr, ci, mr, mi, nodes, degree, n_far, ir, ii, s_r, s_i):
    """Add sum_k a_k / (z - c)^(k+1) over listed boxes, for all targets of a group.

    Targets form the inner loop so the Horner recurrences run side by side.
    """
    nt = zr.shape[0]
    for k in range(n_far):
        node = nodes[k]
        p = degree[k]
        c_r = cr[node]
        c_i = ci[node]
        top_r = mr[node, p]
        top_i = mi[node, p]
        for i in range(nt):
            dr = zr[i] - c_r
            di = zi[i] - c_i
            d2 = dr * dr + di * di
            ir[i] = dr / d2
            ii[i] = -di / d2
            s_r[i] = top_r
            s_i[i] = top_i
        for m in range(p - 1, -1, -1):
            a_r = mr[node, m]
            a_i = mi[node, m]
            for i in range(nt):
                t = s_r[i] * ir[i] - s_i[i] * ii[i] + a_r
                s_i[i] = s_r[i] * ii[i] + s_i[i] * ir[i] + a_i
                s_r[i] = t
        for i in range(nt):
            out_r[i] += s_r[i] * ir[i] - s_i[i] * ii[i]
            # the far series gives conj of the near-field convention
            out_i[i] -= s_r[i] * ii[i] + s_i[i] * ir[i]


@njit(cache=True, fastmath=True)
def _near_sum(zr, zi, sr, si, sg, sd2, a, b):
    acc_r = 0.0
    acc_i = 0.0
    for j in range(a, b):
        dr = zr - sr[j]
        di = zi - si[j]
        den = dr * dr + di * di + sd2[j]
        f = sg[j] / den if den > 0.0 else 0.0
        acc_r += f * dr
        acc_i += f * di
    return acc_r, acc_i


@njit(cache=True, fastmath=True)
def _leaf_split(zr, zi, out_r, out_i, sr, si, sg, sd2, node, a, b, cr, ci, mr, mi,
                rad, reach2, q2_cut, idx, ir, ii, s_r, s_i):
    """A leaf that failed the group test, decided again target by target;
    targets that accept it share one vectorized series evaluation.

    ``reach2`` is the squared distance beyond which the leaf counts as far.
    """
    p_max = mr.shape[1] - 1
    c_r = cr[node]
    c_i = ci[node]
    nf = 0
    d2min = np.inf
    for i in range(zr.shape[0]):
        dr = zr[i] - c_r
        di = zi[i] - c_i
        d2 = dr * dr + di * di
        if d2 > reach2:
            idx[nf] = i
            ir[nf] = dr / d2
            ii[nf] = -di / d2
            d2min = min(d2min, d2)
            nf += 1
        else:
            acc_r, acc_i = _near_sum(zr[i], zi[i], sr, si, sg, sd2, a, b)
            out_r[i] += acc_r
            out_i[i] += acc_i
    if nf == 0:
        return
    q2 = rad * rad / d2min
    p = 0
    while p < p_max and q2 > q2_cut[p]:
        p += 1
    for k in range(nf):
        s_r[k] = mr[node, p]
        s_i[k] = mi[node, p]
    for m in range(p - 1, -1, -1):
        a_r = mr[node, m]
        a_i = mi[node, m]
        for k in range(nf):
            t = s_r[k] * ir[k] - s_i[k] * ii[k] + a_r
            s_i[k] = s_r[k] * ii[k] + s_i[k] * ir[k] + a_i
            s_r[k] = t
    for k in range(nf):
        i = idx[k]
        out_r[i] += s_r[k] * ir[k] - s_i[k] * ii[k]
        out_i[i] -= s_r[k] * ii[k] + s_i[k] * ir[k]


@njit(cache=True)
def _bounds(tr, ti, a, b):
    lo_r = tr[a:b].min()
    hi_r = tr[a:b].max()
    lo_i = ti[a:b].min()
    hi_i = ti[a:b].max()
    return 0.5 * (lo_r + hi_r), 0.5 * (lo_i + hi_i), 0.5 * math.sqrt((hi_r - lo_r) ** 2 + (hi_i - lo_i) ** 2)


@njit(cache=True)
def eval_tree(tz, tree, opening_angle, blob_tol, group_size):
    """Targets are sorted along a Morton curve and cut into groups that share
    one traversal; a box is far for the group when it is far for every member."""
    sr, si, sg, sd2, start, stop, children, center, radius, dmax, moments = tree
    scale = (1.0 + opening_angle) / opening_angle
    n_nodes = start.shape[0]
    cr = center.real.copy()
    ci = center.imag.copy()
    mr = moments.real.copy()
    mi = moments.imag.copy()
    # a box is far from a point at distance d when r < theta (d - r) and, for
    # blobs, dmax^2 < blob_tol (d - r)^2; both read d > reach
    reach = np.empty(n_nodes)
    for k in range(n_nodes):
        reach[k] = radius[k] * scale
        if stop[k] - start[k] <= mr.shape[1]:
            # summing a handful of sources directly is cheaper and exact
            reach[k] = np.inf
        elif dmax[k] > 0.0:
            reach[k] = max(reach[k], radius[k] + dmax[k] / math.sqrt(blob_tol))
    nt = tz.shape[0]
    # groups are the leaves of a quadtree over the targets
    perm, t_start, t_stop, t_children = build_structure(tz, group_size)
    tr = np.empty(nt)
    ti = np.empty(nt)
    for i in range(nt):
        tr[i] = tz[perm[i]].real
        ti[i] = tz[perm[i]].imag
    res_r = np.zeros(nt)
    res_i = np.zeros(nt)
    stack = np.zeros(4 * (_BITS + 2) + 8, dtype=np.int64)
    far_list = np.empty(n_nodes, dtype=np.int64)
    far_deg = np.empty(n_nodes, dtype=np.int64)
    leaf_list = np.empty(n_nodes, dtype=np.int64)
    # coincident targets can overfill a leaf at the depth limit
    width = max(group_size, np.max(t_stop - t_start))
    b_ir = np.empty(width)
    b_ii = np.empty(width)
    b_sr = np.empty(width)
    b_si = np.empty(width)
    b_idx = np.empty(width, dtype=np.int64)
    # truncation: the tail of the series for a box seen at ratio q = r / d is
    # bounded by q^(p+1) / (1 - q); keep the bound at the order-p_max, q_max level
    p_max = mr.shape[1] - 1
    q_max = opening_angle / (1.0 + opening_angle)
    target = q_max ** (p_max + 1) / (1.0 - q_max)
    q2_cut = np.empty(p_max + 1)
    for p in range(p_max + 1):
        lo = 0.0
        hi = q_max
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            if mid ** (p + 1) / (1.0 - mid) <= target:
                lo = mid
            else:
                hi = mid
        q2_cut[p] = lo * lo
    for tg in range(t_start.shape[0]):
        if t_children[tg, 0] >= 0 or t_children[tg, 1] >= 0 or t_children[tg, 2] >= 0 or t_children[tg, 3] >= 0:
            continue
        g0 = t_start[tg]
        g1 = t_stop[tg]
        gr, gi, grad = _bounds(tr, ti, g0, g1)
        n_far = 0
        n_leaf = 0
        top = 1
        stack[0] = 0
        while top > 0:
            top -= 1
            node = stack[top]
            dr = gr - cr[node]
            di = gi - ci[node]
            d = math.sqrt(dr * dr + di * di) - grad
            if d > reach[node]:
                q2 = (radius[node] / d) ** 2
                p = 0
                while p < p_max and q2 > q2_cut[p]:
                    p += 1
                far_list[n_far] = node
                far_deg[n_far] = p
                n_far += 1
                continue
            leaf = True
            for q in range(4):
                ch = children[node, q]
                if ch >= 0:
                    leaf = False
                    stack[top] = ch
                    top += 1
            if leaf:
                leaf_list[n_leaf] = node
                n_leaf += 1
        zr = tr[g0:g1]
        zi = ti[g0:g1]
        out_r = res_r[g0:g1]
        out_i = res_i[g0:g1]
        _group_far(zr, zi, out_r, out_i, cr, ci, mr, mi, far_list, far_deg, n_far, b_ir, b_ii, b_sr, b_si)
        for k in range(n_leaf):
            node = leaf_list[k]
            _leaf_split(zr, zi, out_r, out_i, sr, si, sg, sd2, node, start[node], stop[node],
                        cr, ci, mr, mi, radius[node], reach[node] ** 2, q2_cut,
                        b_idx, b_ir, b_ii, b_sr, b_si)
    out = np.empty(nt, dtype=np.complex128)
    for i in range(nt):
        out[perm[i]] = complex(res_r[i], res_i[i])
    return out


class Tree:
    """Box hierarchy over source points with precomputed Cauchy moments.

    ``like`` reuses the ordering and boxes of another tree over the same
    number of sources, which is cheap and stays efficient when the new points
    are a smooth image of the old ones (the reflected blob images).
    """

    def __init__(self, sz, gamma, delta, order: int = 8, leaf_size: int = 96, like: "Tree | None" = None):
        sz = np.ascontiguousarray(sz, dtype=np.complex128)
        self.order = order
        self.n = sz.size
        self.arrays = None
        if not self.n:
            return
        if like is not None and like.n == self.n:
            perm, start, stop, children = like.structure
        else:
            perm, start, stop, children = build_structure(sz, leaf_size)
        self.structure = (perm, start, stop, children)
        sr, si, sg, sd = _gather(
            sz, np.ascontiguousarray(gamma, dtype=np.float64), np.ascontiguousarray(delta, dtype=np.float64), perm
        )
        center, radius, dmax, moments = build_moments(sr, si, sg, sd, start, stop, children, order)
        self.arrays = (sr, si, sg, sd * sd, start, stop, children, center, radius, dmax, moments)

    def evaluate(self, tz, opening_angle: float = 0.5, blob_tol: float = 1e-8, group_size: int = 32):
        tz = np.ascontiguousarray(tz, dtype=np.complex128)
        if not (opening_angle > 0 and blob_tol > 0):
            raise ValueError("opening_angle and blob_tol must be positive")
        if self.arrays is None or tz.size == 0:
            return np.zeros(tz.shape, dtype=np.complex128)
        return eval_tree(tz.ravel(), self.arrays, opening_angle, blob_tol, group_size).reshape(tz.shape)
