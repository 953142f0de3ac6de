# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot kernels.

Contracts match ``_numpy_backend`` exactly; see that module for semantics.
"""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport fabs, floor, sqrt

cnp.import_array()

ctypedef fused floating:
    float
    double

cdef double EPS = 1e-9
cdef double INF = float("inf")


def raycast(cnp.uint8_t[:, ::1] occ, double x0, double y0,
            double[::1] dir_x, double[::1] dir_y,
            double max_dist, int occupied=1):
    cdef Py_ssize_t h = occ.shape[0]
    cdef Py_ssize_t w = occ.shape[1]
    cdef Py_ssize_t n = dir_x.shape[0]
    out = np.full(n, max_dist, dtype=np.float64)
    cdef double[::1] ranges = out

    cdef Py_ssize_t i, cx, cy
    cdef long step_x, step_y
    cdef double dx, dy, tmax_x, tmax_y, tdelta_x, tdelta_y, t_enter
    for i in range(n):
        dx = dir_x[i]
        dy = dir_y[i]
        cx = <Py_ssize_t>floor(x0)
        cy = <Py_ssize_t>floor(y0)
        step_x = 1 if dx > 0 else -1
        step_y = 1 if dy > 0 else -1
        tdelta_x = fabs(1.0 / dx) if dx != 0 else INF
        tdelta_y = fabs(1.0 / dy) if dy != 0 else INF
        if dx > 0:
            tmax_x = (cx + 1 - x0) / dx
        elif dx < 0:
            tmax_x = (cx - x0) / dx
        else:
            tmax_x = INF
        if dy > 0:
            tmax_y = (cy + 1 - y0) / dy
        elif dy < 0:
            tmax_y = (cy - y0) / dy
        else:
            tmax_y = INF

        while True:
            if tmax_x <= tmax_y:
                t_enter = tmax_x
                cx += step_x
                tmax_x += tdelta_x
            else:
                t_enter = tmax_y
                cy += step_y
                tmax_y += tdelta_y
            if t_enter > max_dist:
                break
            if cx < 0 or cx >= w or cy < 0 or cy >= h:
                break
            if occ[cy, cx] == occupied:
                ranges[i] = t_enter
                break
    return out


def accumulate_beams(cnp.float32_t[:, ::1] acc, double x0, double y0,
                     double[::1] end_x, double[::1] end_y,
                     cnp.uint8_t[::1] hit, double miss_delta, double hit_delta):
    cdef Py_ssize_t h = acc.shape[0]
    cdef Py_ssize_t w = acc.shape[1]
    cdef Py_ssize_t n = end_x.shape[0]
    cdef Py_ssize_t i, cx, cy
    cdef long step_x, step_y
    cdef double dx, dy, t_end, dxu, dyu
    cdef double tmax_x, tmax_y, tdelta_x, tdelta_y, t_exit
    for i in range(n):
        dx = end_x[i] - x0
        dy = end_y[i] - y0
        t_end = sqrt(dx * dx + dy * dy)
        dxu = dx / t_end if t_end > EPS else 0.0
        dyu = dy / t_end if t_end > EPS else 0.0
        cx = <Py_ssize_t>floor(x0)
        cy = <Py_ssize_t>floor(y0)
        step_x = 1 if dxu > 0 else -1
        step_y = 1 if dyu > 0 else -1
        tdelta_x = fabs(1.0 / dxu) if dxu != 0 else INF
        tdelta_y = fabs(1.0 / dyu) if dyu != 0 else INF
        if dxu > 0:
            tmax_x = (cx + 1 - x0) / dxu
        elif dxu < 0:
            tmax_x = (cx - x0) / dxu
        else:
            tmax_x = INF
        if dyu > 0:
            tmax_y = (cy + 1 - y0) / dyu
        elif dyu < 0:
            tmax_y = (cy - y0) / dyu
        else:
            tmax_y = INF

        while True:
            if cx < 0 or cx >= w or cy < 0 or cy >= h:
                break
            t_exit = tmax_x if tmax_x < tmax_y else tmax_y
            if t_exit > t_end + EPS:
                # endpoint cell
                if hit[i]:
                    acc[cy, cx] += hit_delta
                else:
                    acc[cy, cx] += miss_delta
                break
            acc[cy, cx] += miss_delta
            if tmax_x <= tmax_y:
                cx += step_x
                tmax_x += tdelta_x
            else:
                cy += step_y
                tmax_y += tdelta_y


def paint_beams(cnp.uint8_t[:, ::1] img, double x0, double y0,
                double[::1] end_x, double[::1] end_y,
                cnp.uint8_t[::1] hit, int value):
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef Py_ssize_t n = end_x.shape[0]
    cdef cnp.uint8_t val = <cnp.uint8_t>value
    cdef Py_ssize_t i, cx, cy
    cdef long step_x, step_y
    cdef double dx, dy, t_end, dxu, dyu
    cdef double tmax_x, tmax_y, tdelta_x, tdelta_y, t_exit
    for i in range(n):
        dx = end_x[i] - x0
        dy = end_y[i] - y0
        t_end = sqrt(dx * dx + dy * dy)
        dxu = dx / t_end if t_end > EPS else 0.0
        dyu = dy / t_end if t_end > EPS else 0.0
        cx = <Py_ssize_t>floor(x0)
        cy = <Py_ssize_t>floor(y0)
        step_x = 1 if dxu > 0 else -1
        step_y = 1 if dyu > 0 else -1
        tdelta_x = fabs(1.0 / dxu) if dxu != 0 else INF
        tdelta_y = fabs(1.0 / dyu) if dyu != 0 else INF
        if dxu > 0:
            tmax_x = (cx + 1 - x0) / dxu
        elif dxu < 0:
            tmax_x = (cx - x0) / dxu
        else:
            tmax_x = INF
        if dyu > 0:
            tmax_y = (cy + 1 - y0) / dyu
        elif dyu < 0:
            tmax_y = (cy - y0) / dyu
        else:
            tmax_y = INF

        while True:
            if cx < 0 or cx >= w or cy < 0 or cy >= h:
                break
            t_exit = tmax_x if tmax_x < tmax_y else tmax_y
            if t_exit > t_end + EPS:
                if not hit[i]:
                    img[cy, cx] = val
                break
            img[cy, cx] = val
            if tmax_x <= tmax_y:
                cx += step_x
                tmax_x += tdelta_x
            else:
                cy += step_y
                tmax_y += tdelta_y


def im2col(floating[:, :, :, ::1] x, int kh, int kw, int stride, int pad):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t c = x.shape[1]
    cdef Py_ssize_t h = x.shape[2]
    cdef Py_ssize_t w = x.shape[3]
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (w + 2 * pad - kw) // stride + 1

    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out = np.zeros((n, c * kh * kw, oh * ow), dtype=dtype)
    cdef floating[:, :, ::1] cols = out

    cdef Py_ssize_t b, ch, i, j, oy, ox, iy, ix, row
    for b in range(n):
        for ch in range(c):
            for i in range(kh):
                for j in range(kw):
                    row = (ch * kh + i) * kw + j
                    for oy in range(oh):
                        iy = oy * stride + i - pad
                        if iy < 0 or iy >= h:
                            continue
                        for ox in range(ow):
                            ix = ox * stride + j - pad
                            if ix < 0 or ix >= w:
                                continue
                            cols[b, row, oy * ow + ox] = x[b, ch, iy, ix]
    return out


def col2im(floating[:, :, ::1] cols, x_shape, int kh, int kw, int stride, int pad):
    cdef Py_ssize_t n = x_shape[0]
    cdef Py_ssize_t c = x_shape[1]
    cdef Py_ssize_t h = x_shape[2]
    cdef Py_ssize_t w = x_shape[3]
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (w + 2 * pad - kw) // stride + 1

    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out = np.zeros((n, c, h, w), dtype=dtype)
    cdef floating[:, :, :, ::1] dx = out

    cdef Py_ssize_t b, ch, i, j, oy, ox, iy, ix, row
    for b in range(n):
        for ch in range(c):
            for i in range(kh):
                for j in range(kw):
                    row = (ch * kh + i) * kw + j
                    for oy in range(oh):
                        iy = oy * stride + i - pad
                        if iy < 0 or iy >= h:
                            continue
                        for ox in range(ow):
                            ix = ox * stride + j - pad
                            if ix < 0 or ix >= w:
                                continue
                            dx[b, ch, iy, ix] += cols[b, row, oy * ow + ox]
    return out
