"""Overlay / replace compositing of rendered avatars onto source frames.

Masks use uncompressed COCO run-length encoding: ``counts`` alternate
background/foreground runs (starting with background) over the image in
column-major order.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import SynthesisError
from .raster import Image

FILL_COLOR = (64, 64, 64)

# per-pixel source codes reported by composite()
FROM_BACKGROUND, FROM_RENDER, FROM_PLATE = 0, 1, 2


def rle_decode(rle):
    h, w = rle["size"]
    counts = np.asarray(rle["counts"], dtype=np.int64)
    if counts.sum() != h * w:
        raise SynthesisError(f"mask runs cover {counts.sum()} pixels, expected {h * w}")
    values = np.arange(len(counts)) % 2 == 1
    flat = np.repeat(values, counts)
    return flat.reshape(w, h).T.copy()


def rle_encode(mask):
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    flat = mask.T.reshape(-1)
    edges = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    runs = np.diff(np.concatenate([[0], edges, [flat.size]])).tolist()
    if flat.size and flat[0]:
        runs = [0] + runs
    return {"size": [int(h), int(w)], "counts": [int(r) for r in runs]}


def box_mask_rle(bbox, width, height):
    mask = np.zeros((height, width), dtype=bool)
    x0, y0 = max(int(np.floor(bbox[0])), 0), max(int(np.floor(bbox[1])), 0)
    x1, y1 = min(int(np.ceil(bbox[2])), width), min(int(np.ceil(bbox[3])), height)
    mask[y0:y1, x0:x1] = True
    return rle_encode(mask)


@dataclass(eq=False)
class CompositeResult:
    image: Image
    source: np.ndarray  # per-pixel FROM_* code
    residual_mask_area: int
    warnings: tuple = ()


def _union(masks, height, width):
    out = np.zeros((height, width), dtype=bool)
    for m in masks:
        m = rle_decode(m) if isinstance(m, dict) else np.asarray(m, dtype=bool)
        if m.shape != (height, width):
            raise SynthesisError(f"mask is {m.shape[1]}x{m.shape[0]}, frame is {width}x{height}")
        out |= m
    return out


def fill_background(background, masks, plate=None):
    """Replace masked background pixels with the clean plate (or a flat fill)."""
    h, w = background.height, background.width
    region = _union(masks, h, w)
    notes = []
    px = background.pixels.copy()
    if plate is None:
        notes.append("no clean plate supplied; masked region filled with flat color")
        warnings.warn(notes[-1])
        px[region] = FILL_COLOR
    else:
        if (plate.width, plate.height) != (w, h):
            raise SynthesisError("clean plate and background differ in size")
        px[region] = plate.pixels[region]
    return Image(w, h, px, np.zeros((h, w), dtype=bool)), region, tuple(notes)


def composite(render, background, masks=(), mode="overlay", plate=None):
    if (render.width, render.height) != (background.width, background.height):
        raise SynthesisError(
            f"render is {render.width}x{render.height}, background is {background.width}x{background.height}"
        )
    h, w = background.height, background.width
    source = np.full((h, w), FROM_BACKGROUND, dtype=np.uint8)
    notes = ()
    if mode == "overlay":
        base = background.pixels
        region = _union(masks, h, w)
    elif mode == "replace":
        filled, region, notes = fill_background(background, masks, plate)
        base = filled.pixels
        source[region] = FROM_PLATE
    else:
        raise SynthesisError(f"unknown composite mode {mode!r}")
    cov = render.coverage
    px = np.where(cov[..., None], render.pixels, base)
    source[cov] = FROM_RENDER
    residual = int(np.count_nonzero(region & ~cov))
    return CompositeResult(Image(w, h, px, cov.copy()), source, residual, notes)
