"""Transport fitted lights to a new scene and render the relit background.

Each light keeps its (x, y) footprint, color, intensity, and falloff
parameters; only its depth moves. The light's offset from the surface it
was fitted against (z - source depth at (x, y), sampled bilinearly) is
preserved relative to the target scene's depth, so lights stay the same
distance from the new geometry instead of vanishing inside it.
"""

from __future__ import annotations

from .errors import ValidationError
from .renderer import compose, shade_all
from .scene_io import ImageF, PointLight, SceneMaps


def adapt_lights(
    lights: list[PointLight],
    source_depth_of_fit: ImageF,
    target_depth: ImageF,
) -> list[PointLight]:
    """Reposition lights in depth: z' = clamp(z + (target_d - source_d), 0, 1).

    The depth difference is computed first, so when source and target agree
    at a light's footprint the light comes back bit-identical.
    """
    if source_depth_of_fit.channels != 1 or target_depth.channels != 1:
        raise ValidationError("depth maps must be single-channel")
    adapted = []
    for light in lights:
        x, y, z = light.position
        d_src = float(source_depth_of_fit.sample_bilinear(x, y)[0])
        d_tgt = float(target_depth.sample_bilinear(x, y)[0])
        z_new = min(max(z + (d_tgt - d_src), 0.0), 1.0)
        adapted.append(
            PointLight(
                color=light.color,
                position=(x, y, z_new),
                intensity=light.intensity,
                ellipsoid_ratio=light.ellipsoid_ratio,
                diffuse_exponent=light.diffuse_exponent,
            )
        )
    return adapted


def relight_background(
    lights: list[PointLight],
    fit_depth: ImageF,
    target_scene: SceneMaps,
) -> ImageF:
    """Render the target scene under the (depth-adapted) fitted lights."""
    moved = adapt_lights(lights, fit_depth, target_scene.depth)
    return compose(target_scene.albedo, shade_all(moved, target_scene))
