"""Pinhole camera. World is right-handed, +Y up, meters; image origin top-left."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import SynthesisError

NEAR = 1e-3


@dataclass(frozen=True)
class Camera:
    position: tuple = (0.0, 1.0, 6.0)
    look_at: tuple = (0.0, 1.0, 0.0)
    up: tuple = (0.0, 1.0, 0.0)
    vertical_fov: float = math.radians(50.0)
    image_size: tuple = (320, 240)

    def __post_init__(self):
        fwd = np.subtract(self.look_at, self.position, dtype=float)
        if not np.linalg.norm(fwd) > 0:
            raise SynthesisError("camera position equals look_at")
        up = np.asarray(self.up, dtype=float)
        if abs(np.linalg.norm(up) - 1.0) > 1e-9:
            raise SynthesisError("camera up must be a unit vector")
        if np.linalg.norm(np.cross(fwd, up)) < 1e-12:
            raise SynthesisError("camera up is parallel to the view direction")
        if not 0 < self.vertical_fov < math.pi:
            raise SynthesisError("vertical_fov must lie in (0, pi)")
        w, h = self.image_size
        if w <= 0 or h <= 0:
            raise SynthesisError("image size must be positive")

    @property
    def width(self):
        return int(self.image_size[0])

    @property
    def height(self):
        return int(self.image_size[1])

    def basis(self):
        """Rows: right, true up, forward."""
        f = np.subtract(self.look_at, self.position, dtype=float)
        f /= np.linalg.norm(f)
        r = np.cross(f, np.asarray(self.up, dtype=float))
        r /= np.linalg.norm(r)
        u = np.cross(r, f)
        return np.stack([r, u, f])

    @property
    def focal(self):
        return (self.height / 2.0) / math.tan(self.vertical_fov / 2.0)

    def to_doc(self):
        return {
            "position": [float(v) for v in self.position],
            "look_at": [float(v) for v in self.look_at],
            "up": [float(v) for v in self.up],
            "vertical_fov": float(self.vertical_fov),
            "image_size": [self.width, self.height],
        }

    @classmethod
    def from_doc(cls, doc):
        return cls(
            tuple(doc["position"]),
            tuple(doc["look_at"]),
            tuple(doc.get("up", (0.0, 1.0, 0.0))),
            float(doc.get("vertical_fov", math.radians(50.0))),
            tuple(doc.get("image_size", (320, 240))),
        )


def view_coords(points, camera):
    """World points (N,3) -> view space (N,3): x right, y up, z depth along view."""
    d = np.asarray(points, dtype=float) - np.asarray(camera.position, dtype=float)
    b = camera.basis()
    return np.stack([d @ b[0], d @ b[1], d @ b[2]], axis=-1)


def project(points, camera):
    """World points -> (u, v, depth). Depth is view-space z; pixels are continuous."""
    v = view_coords(points, camera)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = camera.width / 2.0 + camera.focal * v[:, 0] / v[:, 2]
        vv = camera.height / 2.0 - camera.focal * v[:, 1] / v[:, 2]
    return u, vv, v[:, 2]


def _vec(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise SynthesisError(f"expected 'x,y,z', got {text!r}")
    return tuple(parts)


def camera_from_request(request, image_size=None):
    """Camera from ``request.extra`` keys (camera_position, camera_look_at,
    camera_up, camera_fov_deg, image_width, image_height)."""
    extra = request.extra
    default = Camera()
    size = image_size or default.image_size
    if "image_width" in extra or "image_height" in extra:
        size = (int(extra.get("image_width", size[0])), int(extra.get("image_height", size[1])))
    fov = math.radians(float(extra["camera_fov_deg"])) if "camera_fov_deg" in extra else default.vertical_fov
    return Camera(
        _vec(extra["camera_position"]) if "camera_position" in extra else default.position,
        _vec(extra["camera_look_at"]) if "camera_look_at" in extra else default.look_at,
        _vec(extra["camera_up"]) if "camera_up" in extra else default.up,
        fov,
        tuple(size),
    )
