"""Template avatar: one closed prism per skeleton bone."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_COLOR = (128, 128, 128)

# COCO joint indices: face, neck links, shoulder bar, arms, torso, legs.
BONES = (
    (0, 1), (0, 2),
    (0, 5), (0, 6),
    (5, 6),
    (5, 7), (7, 9), (6, 8), (8, 10),
    (5, 11), (6, 12), (11, 12),
    (11, 13), (13, 15), (12, 14), (14, 16),
)


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    entity_id: str = ""
    color: tuple = DEFAULT_COLOR


def rotate_yaw(points, yaw):
    """Rotate (N,3) points about +Y by ``yaw`` radians."""
    p = np.asarray(points, dtype=float)
    c, s = math.cos(yaw), math.sin(yaw)
    out = np.empty_like(p)
    out[:, 0] = c * p[:, 0] + s * p[:, 2]
    out[:, 1] = p[:, 1]
    out[:, 2] = -s * p[:, 0] + c * p[:, 2]
    return out


def _perp_basis(axis):
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(axis)))] = 1.0
    u = np.cross(axis, helper)
    u /= np.linalg.norm(u)
    v = np.cross(axis, u)
    return u, v


def prism(a, b, radius, sides):
    """Closed ``sides``-gon prism between points a and b, or None if a == b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    axis = b - a
    length = np.linalg.norm(axis)
    if length < 1e-12:
        return None
    u, v = _perp_basis(axis / length)
    ang = 2 * math.pi * np.arange(sides) / sides
    ring = radius * (np.cos(ang)[:, None] * u + np.sin(ang)[:, None] * v)
    verts = np.vstack([a + ring, b + ring, a, b])
    ca, cb = 2 * sides, 2 * sides + 1
    tris = []
    for k in range(sides):
        k1 = (k + 1) % sides
        tris.append((k, k1, sides + k1))
        tris.append((k, sides + k1, sides + k))
    for k in range(sides):
        k1 = (k + 1) % sides
        tris.append((ca, k1, k))
        tris.append((cb, sides + k, sides + k1))
    return verts, np.array(tris, dtype=np.int64)


def local_mesh(joints, radius=0.05, sides=8):
    verts, tris = [], []
    offset = 0
    for i, j in BONES:
        built = prism(joints[i], joints[j], radius, sides)
        if built is None:
            log.info("skipping zero-length bone %d-%d", i, j)
            continue
        v, t = built
        verts.append(v)
        tris.append(t + offset)
        offset += len(v)
    if not verts:
        return np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64)
    return np.vstack(verts), np.vstack(tris)


def build_avatar(pose, yaw_total, radius=0.05, sides=8, entity_id="", color=DEFAULT_COLOR):
    verts, tris = local_mesh(np.asarray(pose.joints, dtype=float), radius, sides)
    world = rotate_yaw(verts, yaw_total) + np.asarray(pose.root_t, dtype=float)
    return Mesh(world, tris, entity_id, tuple(color))


def triangle_areas(mesh):
    v = mesh.vertices[mesh.triangles]
    return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)
