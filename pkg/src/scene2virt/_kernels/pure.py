"""numpy fallback for the triangle fill kernel (same arithmetic as ``_raster.pyx``)."""
import math

import numpy as np


def fill_triangles(xy, invz, rgb, pixels, zbuf, cover):
    height, width = zbuf.shape
    for t in range(xy.shape[0]):
        (x0, y0), (x1, y1), (x2, y2) = xy[t].tolist()
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        lo, hi = min(x0, x1, x2), max(x0, x1, x2)
        if lo > width or hi < 0:
            continue
        xmin, xmax = max(math.floor(lo), 0), min(math.ceil(hi), width - 1)
        lo, hi = min(y0, y1, y2), max(y0, y1, y2)
        if lo > height or hi < 0:
            continue
        ymin, ymax = max(math.floor(lo), 0), min(math.ceil(hi), height - 1)
        if xmin > xmax or ymin > ymax:
            continue
        px = np.arange(xmin, xmax + 1, dtype=np.float64)[None, :] + 0.5
        py = np.arange(ymin, ymax + 1, dtype=np.float64)[:, None] + 0.5
        w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
        w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
        if area < 0.0:
            inside = (w0 <= 0.0) & (w1 <= 0.0) & (w2 <= 0.0)
        else:
            inside = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
        if not inside.any():
            continue
        iz0, iz1, iz2 = invz[t].tolist()
        iz = (w0 * iz0 + w1 * iz1 + w2 * iz2) / area
        zone = zbuf[ymin:ymax + 1, xmin:xmax + 1]
        win = inside & (iz > zone)
        zone[win] = iz[win]
        pixels[ymin:ymax + 1, xmin:xmax + 1][win] = rgb[t]
        cover[ymin:ymax + 1, xmin:xmax + 1][win] = 1
