"""Scene synthesis: scene graph -> avatars -> OBJ / rendered frames."""
from .avatar import BONES, Mesh, build_avatar, prism, rotate_yaw, triangle_areas
from .camera import Camera, camera_from_request, project, view_coords
from .composite import (
    FROM_BACKGROUND,
    FROM_PLATE,
    FROM_RENDER,
    CompositeResult,
    box_mask_rle,
    composite,
    fill_background,
    rle_decode,
    rle_encode,
)
from .raster import Image, parse_ppm, ppm_bytes, rasterize, read_ppm, write_ppm
from .scene import (
    FramePlacement,
    Placement,
    ScenePlan,
    export_obj,
    frame_meshes,
    geometry,
    manifest,
    plan_scene,
    render_frames,
    synthesize,
    write_frames,
    write_manifest,
)
