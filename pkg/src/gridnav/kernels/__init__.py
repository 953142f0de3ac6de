"""Hot-loop kernels with a compiled core and a NumPy fallback.

The Cython extension ``_ckernels`` is preferred when it was built; otherwise
the pure-NumPy backend is used. Both expose identical functions, and
``use_backend`` switches between them explicitly (the benchmark suite and the
equivalence tests rely on that).
"""

from gridnav.kernels import _numpy_backend

try:
    from gridnav.kernels import _ckernels
except ImportError:  # extension not built; fallback stays active
    _ckernels = None

_BACKENDS = {"python": _numpy_backend}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

_active = _BACKENDS.get("compiled", _numpy_backend)


def available_backends():
    return tuple(sorted(_BACKENDS))


def active_backend():
    return "compiled" if _active is _ckernels else "python"


def use_backend(name):
    """Select the kernel backend ("compiled" or "python") process-wide."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(
            f"unknown backend {name!r}; available: {available_backends()}"
        )
    _active = _BACKENDS[name]


def raycast(occ, x0, y0, dir_x, dir_y, max_dist, occupied=1):
    return _active.raycast(occ, x0, y0, dir_x, dir_y, max_dist, occupied)


def accumulate_beams(acc, x0, y0, end_x, end_y, hit, miss_delta, hit_delta):
    return _active.accumulate_beams(acc, x0, y0, end_x, end_y, hit,
                                    miss_delta, hit_delta)


def paint_beams(img, x0, y0, end_x, end_y, hit, value):
    return _active.paint_beams(img, x0, y0, end_x, end_y, hit, value)


def im2col(x, kh, kw, stride, pad):
    return _active.im2col(x, kh, kw, stride, pad)


def col2im(cols, x_shape, kh, kw, stride, pad):
    return _active.col2im(cols, x_shape, kh, kw, stride, pad)
