# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Every routine here has a twin in ``_kernels_py`` that performs the same
floating-point operations in the same order; the two must stay bit-identical.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def resample_axis(const double[:, ::1] src, const cnp.intp_t[:, ::1] idx,
                  const double[:, ::1] w, const cnp.intp_t[::1] count):
    """Apply per-output tap weights along axis 0 of ``src``.

    Taps are summed as outside-in pairs (first+last, second+second-to-last,
    ...), middle tap last. The pairing makes the result exactly mirror
    symmetric whenever the tap table is.
    """
    cdef Py_ssize_t n_out = idx.shape[0]
    cdef Py_ssize_t m = src.shape[1]
    cdef Py_ssize_t o, c, lo, hi
    cdef double acc, wl, wh
    cdef Py_ssize_t il, ih
    out = np.empty((n_out, m), dtype=np.float64)
    cdef double[:, ::1] dst = out

    with nogil:
        for o in range(n_out):
            for c in range(m):
                dst[o, c] = 0.0
            lo = 0
            hi = count[o] - 1
            while lo < hi:
                wl = w[o, lo]
                wh = w[o, hi]
                il = idx[o, lo]
                ih = idx[o, hi]
                for c in range(m):
                    acc = wl * src[il, c]
                    acc = acc + wh * src[ih, c]
                    dst[o, c] = dst[o, c] + acc
                lo += 1
                hi -= 1
            if lo == hi:
                wl = w[o, lo]
                il = idx[o, lo]
                for c in range(m):
                    dst[o, c] = dst[o, c] + wl * src[il, c]
    return out


def patch_moments(const float[:, :, ::1] img, Py_ssize_t s):
    """Mean and population variance of luma over each full s-by-s tile.

    Sums run sequentially in row-major pixel order; variance is two-pass.
    """
    cdef Py_ssize_t ph = img.shape[0] // s
    cdef Py_ssize_t pw = img.shape[1] // s
    cdef Py_ssize_t nch = img.shape[2]
    cdef Py_ssize_t py, px, y, x, y0, x0
    cdef double total, mu, d, v
    cdef double n = <double>(s * s)
    cdef float lv

    means = np.empty((ph, pw), dtype=np.float64)
    variances = np.empty((ph, pw), dtype=np.float64)
    cdef double[:, ::1] mv = means
    cdef double[:, ::1] vv = variances

    with nogil:
        for py in range(ph):
            y0 = py * s
            for px in range(pw):
                x0 = px * s
                total = 0.0
                for y in range(y0, y0 + s):
                    for x in range(x0, x0 + s):
                        total = total + _luma(img, y, x, nch)
                mu = total / n
                total = 0.0
                for y in range(y0, y0 + s):
                    for x in range(x0, x0 + s):
                        d = _luma(img, y, x, nch) - mu
                        d = d * d
                        total = total + d
                mv[py, px] = mu
                vv[py, px] = total / n
    return means, variances


cdef inline double _luma(const float[:, :, ::1] img, Py_ssize_t y, Py_ssize_t x,
                         Py_ssize_t nch) noexcept nogil:
    cdef double v
    cdef float lv
    if nch == 1:
        return <double>img[y, x, 0]
    v = 0.299 * <double>img[y, x, 0]
    v = v + 0.587 * <double>img[y, x, 1]
    v = v + 0.114 * <double>img[y, x, 2]
    if v < 0.0:
        v = 0.0
    elif v > 1.0:
        v = 1.0
    lv = <float>v
    return <double>lv
