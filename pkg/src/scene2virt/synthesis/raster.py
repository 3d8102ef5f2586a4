"""Z-buffer rasterizer with flat shading, plus PPM (P6) image I/O."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import ParseError
from .camera import NEAR, project

LIGHT = np.array([1.0, -1.0, 1.0]) / np.sqrt(3.0)
AMBIENT = 0.2


@dataclass(eq=False)
class Image:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8, row-major
    coverage: np.ndarray  # (height, width) bool

    @classmethod
    def blank(cls, width, height, color=(0, 0, 0)):
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[:] = color
        return cls(width, height, px, np.zeros((height, width), dtype=bool))

    def tobytes(self):
        return self.pixels.tobytes()

    def same_pixels(self, other):
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)


def shade(mesh):
    """Per-triangle RGB: base color scaled by max(ambient, |n . l|)."""
    v = mesh.vertices[mesh.triangles]
    n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    intensity = np.maximum(AMBIENT, np.abs(n @ LIGHT))
    rgb = np.floor(np.asarray(mesh.color, dtype=float)[None, :] * intensity[:, None] + 0.5)
    return np.clip(rgb, 0, 255).astype(np.uint8)


def screen_triangles(meshes, camera):
    """Projected triangles in draw order: (xy (T,3,2), inverse depth (T,3), rgb (T,3))."""
    xy, invz, rgb = [], [], []
    for mesh in meshes:
        if len(mesh.triangles) == 0:
            continue
        u, v, depth = project(mesh.vertices, camera)
        tri = mesh.triangles
        ok = (depth[tri] > NEAR).all(axis=1)
        if not ok.any():
            continue
        t = tri[ok]
        xy.append(np.stack([u[t], v[t]], axis=-1))
        invz.append(1.0 / depth[t])
        rgb.append(shade(mesh)[ok])
    if not xy:
        return np.zeros((0, 3, 2)), np.zeros((0, 3)), np.zeros((0, 3), dtype=np.uint8)
    return (
        np.ascontiguousarray(np.concatenate(xy), dtype=np.float64),
        np.ascontiguousarray(np.concatenate(invz), dtype=np.float64),
        np.ascontiguousarray(np.concatenate(rgb), dtype=np.uint8),
    )


def rasterize(meshes, camera, backend=None):
    """Render meshes into a black image; coverage marks every written pixel.

    Triangles with a vertex behind the near plane are dropped; there is no
    back-face culling.
    """
    fill = _kernels.BACKENDS[backend] if backend else _kernels.fill_triangles
    w, h = camera.width, camera.height
    image = Image.blank(w, h)
    xy, invz, rgb = screen_triangles(meshes, camera)
    if len(xy):
        zbuf = np.zeros((h, w), dtype=np.float64)
        cover = np.zeros((h, w), dtype=np.uint8)
        fill(xy, invz, rgb, image.pixels, zbuf, cover)
        image.coverage = cover.astype(bool)
    return image


def ppm_bytes(image):
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.tobytes()


def write_ppm(path, image):
    with open(path, "wb") as fh:
        fh.write(ppm_bytes(image))


def parse_ppm(data):
    tokens = []
    pos = 0
    if not data.startswith(b"P6"):
        raise ParseError("not a binary PPM (P6) image")
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError("truncated PPM header")
        tokens.append(data[start:pos])
    pos += 1
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ParseError("bad PPM header") from None
    if maxval != 255:
        raise ParseError("only maxval 255 PPM images are supported")
    body = data[pos:pos + 3 * w * h]
    if len(body) != 3 * w * h:
        raise ParseError("PPM pixel data is truncated")
    px = np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3).copy()
    return Image(w, h, px, np.zeros((h, w), dtype=bool))


def read_ppm(path):
    with open(path, "rb") as fh:
        return parse_ppm(fh.read())
