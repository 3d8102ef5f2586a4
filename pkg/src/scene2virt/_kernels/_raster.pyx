# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled triangle fill with z-buffer.

Arithmetic mirrors ``scene2virt._kernels.pure`` operation for operation;
both must produce bit-identical buffers.
"""
from libc.math cimport floor, ceil


def fill_triangles(const double[:, :, ::1] xy, const double[:, ::1] invz,
                   const unsigned char[:, ::1] rgb, unsigned char[:, :, ::1] pixels,
                   double[:, ::1] zbuf, unsigned char[:, ::1] cover):
    cdef Py_ssize_t n = xy.shape[0]
    cdef int height = pixels.shape[0]
    cdef int width = pixels.shape[1]
    cdef Py_ssize_t t
    cdef int i, j, xmin, xmax, ymin, ymax
    cdef double x0, y0, x1, y1, x2, y2, area, w0, w1, w2, px, py, iz
    cdef double lo, hi
    with nogil:
        for t in range(n):
            x0 = xy[t, 0, 0]; y0 = xy[t, 0, 1]
            x1 = xy[t, 1, 0]; y1 = xy[t, 1, 1]
            x2 = xy[t, 2, 0]; y2 = xy[t, 2, 1]
            area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
            if area == 0.0:
                continue
            lo = x0
            if x1 < lo: lo = x1
            if x2 < lo: lo = x2
            hi = x0
            if x1 > hi: hi = x1
            if x2 > hi: hi = x2
            if lo > width or hi < 0:
                continue
            xmin = 0 if lo < 0.0 else <int>floor(lo)
            xmax = width - 1 if hi > width - 1 else <int>ceil(hi)
            lo = y0
            if y1 < lo: lo = y1
            if y2 < lo: lo = y2
            hi = y0
            if y1 > hi: hi = y1
            if y2 > hi: hi = y2
            if lo > height or hi < 0:
                continue
            ymin = 0 if lo < 0.0 else <int>floor(lo)
            ymax = height - 1 if hi > height - 1 else <int>ceil(hi)
            for j in range(ymin, ymax + 1):
                py = j + 0.5
                for i in range(xmin, xmax + 1):
                    px = i + 0.5
                    w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
                    w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
                    w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
                    if area < 0.0:
                        if w0 > 0.0 or w1 > 0.0 or w2 > 0.0:
                            continue
                    else:
                        if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                            continue
                    iz = (w0 * invz[t, 0] + w1 * invz[t, 1] + w2 * invz[t, 2]) / area
                    if iz > zbuf[j, i]:
                        zbuf[j, i] = iz
                        pixels[j, i, 0] = rgb[t, 0]
                        pixels[j, i, 1] = rgb[t, 1]
                        pixels[j, i, 2] = rgb[t, 2]
                        cover[j, i] = 1
