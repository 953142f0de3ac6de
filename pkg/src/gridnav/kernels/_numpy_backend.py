"""NumPy implementations of the hot kernels.

All geometry kernels work in continuous array-index space: ``x`` runs along
columns, ``y`` along rows, and ``y`` increases with the row index (downward).
Callers translate world or robot coordinates into this space. Distances are
in cell units.

The compiled backend in ``_ckernels.pyx`` implements the same contracts; the
equivalence tests in the suite hold both to identical outputs.
"""

import numpy as np

_EPS = 1e-9


def raycast(occ, x0, y0, dir_x, dir_y, max_dist, occupied=1):
    """Cast rays from (x0, y0) and return the entry distance into the first
    cell whose value equals ``occupied``, or ``max_dist`` when nothing is hit
    within range or the ray leaves the array.

    Uses Amanatides-Woo grid traversal, advanced in lockstep across all rays.
    """
    occ = np.ascontiguousarray(occ)
    h, w = occ.shape
    dir_x = np.asarray(dir_x, dtype=np.float64)
    dir_y = np.asarray(dir_y, dtype=np.float64)
    n = dir_x.shape[0]

    cx = np.full(n, int(np.floor(x0)), dtype=np.int64)
    cy = np.full(n, int(np.floor(y0)), dtype=np.int64)

    step_x = np.where(dir_x > 0, 1, -1).astype(np.int64)
    step_y = np.where(dir_y > 0, 1, -1).astype(np.int64)

    with np.errstate(divide="ignore", invalid="ignore"):
        tdelta_x = np.where(dir_x != 0, np.abs(1.0 / dir_x), np.inf)
        tdelta_y = np.where(dir_y != 0, np.abs(1.0 / dir_y), np.inf)
        tmax_x = np.where(
            dir_x > 0, (cx + 1 - x0) / dir_x,
            np.where(dir_x < 0, (cx - x0) / dir_x, np.inf),
        )
        tmax_y = np.where(
            dir_y > 0, (cy + 1 - y0) / dir_y,
            np.where(dir_y < 0, (cy - y0) / dir_y, np.inf),
        )

    ranges = np.full(n, max_dist, dtype=np.float64)
    active = np.ones(n, dtype=bool)

    # The start cell never counts as a hit; callers reject occupied starts.
    while active.any():
        idx = np.flatnonzero(active)
        use_x = tmax_x[idx] <= tmax_y[idx]
        t_enter = np.where(use_x, tmax_x[idx], tmax_y[idx])

        over = t_enter > max_dist
        active[idx[over]] = False
        idx = idx[~over]
        if idx.size == 0:
            break
        use_x = use_x[~over]
        t_enter = t_enter[~over]

        ix = idx[use_x]
        iy = idx[~use_x]
        cx[ix] += step_x[ix]
        tmax_x[ix] += tdelta_x[ix]
        cy[iy] += step_y[iy]
        tmax_y[iy] += tdelta_y[iy]

        oob = (cx[idx] < 0) | (cx[idx] >= w) | (cy[idx] < 0) | (cy[idx] >= h)
        active[idx[oob]] = False
        idx = idx[~oob]
        t_enter = t_enter[~oob]
        if idx.size == 0:
            continue

        hit = occ[cy[idx], cx[idx]] == occupied
        ranges[idx[hit]] = t_enter[hit]
        active[idx[hit]] = False

    return ranges


def _beam_cells(x0, y0, end_x, end_y, h, w):
    """Collect the cells each beam traverses from (x0, y0) to its endpoint.

    Returns ``(trav_y, trav_x)`` for every cell strictly before the endpoint
    cell (the start cell included), plus ``(end_ok, end_cy, end_cx)`` for the
    in-bounds endpoint cells. A beam whose endpoint lies exactly on a cell
    boundary resolves to the cell entered at that boundary.
    """
    end_x = np.asarray(end_x, dtype=np.float64)
    end_y = np.asarray(end_y, dtype=np.float64)
    n = end_x.shape[0]

    dx = end_x - x0
    dy = end_y - y0
    t_end = np.hypot(dx, dy)
    safe = np.maximum(t_end, _EPS)
    dir_x = dx / safe
    dir_y = dy / safe

    cx = np.full(n, int(np.floor(x0)), dtype=np.int64)
    cy = np.full(n, int(np.floor(y0)), dtype=np.int64)
    step_x = np.where(dir_x > 0, 1, -1).astype(np.int64)
    step_y = np.where(dir_y > 0, 1, -1).astype(np.int64)

    with np.errstate(divide="ignore", invalid="ignore"):
        tdelta_x = np.where(dir_x != 0, np.abs(1.0 / dir_x), np.inf)
        tdelta_y = np.where(dir_y != 0, np.abs(1.0 / dir_y), np.inf)
        tmax_x = np.where(
            dir_x > 0, (cx + 1 - x0) / dir_x,
            np.where(dir_x < 0, (cx - x0) / dir_x, np.inf),
        )
        tmax_y = np.where(
            dir_y > 0, (cy + 1 - y0) / dir_y,
            np.where(dir_y < 0, (cy - y0) / dir_y, np.inf),
        )

    trav_y = []
    trav_x = []
    active = np.ones(n, dtype=bool)
    end_ok = np.zeros(n, dtype=bool)
    end_cy = np.zeros(n, dtype=np.int64)
    end_cx = np.zeros(n, dtype=np.int64)

    while active.any():
        idx = np.flatnonzero(active)
        in_b = (cx[idx] >= 0) & (cx[idx] < w) & (cy[idx] >= 0) & (cy[idx] < h)
        active[idx[~in_b]] = False
        idx = idx[in_b]
        if idx.size == 0:
            break

        t_exit = np.minimum(tmax_x[idx], tmax_y[idx])
        done = t_exit > t_end[idx] + _EPS
        fin = idx[done]
        end_ok[fin] = True
        end_cy[fin] = cy[fin]
        end_cx[fin] = cx[fin]
        active[fin] = False

        idx = idx[~done]
        if idx.size == 0:
            continue
        trav_y.append(cy[idx].copy())
        trav_x.append(cx[idx].copy())

        use_x = tmax_x[idx] <= tmax_y[idx]
        ix = idx[use_x]
        iy = idx[~use_x]
        cx[ix] += step_x[ix]
        tmax_x[ix] += tdelta_x[ix]
        cy[iy] += step_y[iy]
        tmax_y[iy] += tdelta_y[iy]

    if trav_y:
        trav_y = np.concatenate(trav_y)
        trav_x = np.concatenate(trav_x)
    else:
        trav_y = np.empty(0, dtype=np.int64)
        trav_x = np.empty(0, dtype=np.int64)
    return trav_y, trav_x, end_ok, end_cy, end_cx


def accumulate_beams(acc, x0, y0, end_x, end_y, hit, miss_delta, hit_delta):
    """Add ``miss_delta`` to every cell a beam traverses before its endpoint
    cell, and ``hit_delta`` (or ``miss_delta`` for non-hits) to the endpoint
    cell itself. Accumulation is in place; cells shared by several beams
    receive one contribution per beam.
    """
    hit = np.asarray(hit, dtype=bool)
    trav_y, trav_x, end_ok, end_cy, end_cx = _beam_cells(
        x0, y0, end_x, end_y, acc.shape[0], acc.shape[1]
    )
    np.add.at(acc, (trav_y, trav_x), miss_delta)
    mh = end_ok & hit
    mm = end_ok & ~hit
    np.add.at(acc, (end_cy[mh], end_cx[mh]), hit_delta)
    np.add.at(acc, (end_cy[mm], end_cx[mm]), miss_delta)


def paint_beams(img, x0, y0, end_x, end_y, hit, value):
    """Set every cell a beam traverses before its endpoint to ``value``.

    Endpoint cells of non-hit beams are painted too; endpoint cells of hit
    beams are left untouched so the caller can mark them separately.
    """
    hit = np.asarray(hit, dtype=bool)
    trav_y, trav_x, end_ok, end_cy, end_cx = _beam_cells(
        x0, y0, end_x, end_y, img.shape[0], img.shape[1]
    )
    img[trav_y, trav_x] = value
    mm = end_ok & ~hit
    img[end_cy[mm], end_cx[mm]] = value


def im2col(x, kh, kw, stride, pad):
    """Unfold (N, C, H, W) into (N, C*kh*kw, OH*OW) patches."""
    n, c, h, w = x.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    if pad:
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    else:
        xp = x
    cols = np.empty((n, c, kh, kw, oh, ow), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i:i + stride * oh:stride,
                                  j:j + stride * ow:stride]
    return cols.reshape(n, c * kh * kw, oh * ow)


def col2im(cols, x_shape, kh, kw, stride, pad):
    """Fold patch gradients back onto the (N, C, H, W) input; adjoint of
    :func:`im2col` (overlapping patches accumulate)."""
    n, c, h, w = x_shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    c6 = cols.reshape(n, c, kh, kw, oh, ow)
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i:i + stride * oh:stride,
               j:j + stride * ow:stride] += c6[:, :, i, j]
    if pad:
        return xp[:, :, pad:pad + h, pad:pad + w].copy()
    return xp
