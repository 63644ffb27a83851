"""Point-light Lambertian shading, image composition, and mask compositing.

Shading for one light at pixel (x, y) with surface depth z = D(x, y):

    v = (x_L - x, e * (y_L - y), z_L - z)
    l = v / ||(x_L - x, y_L - y, z_L - z)||^s
    out_c = C_c * intensity * max(0, N(x, y) . l)

where e is the ellipsoid ratio and s the diffuse exponent. The ellipsoid
ratio scales only the numerator's y-component; the distance in the
denominator is the plain Euclidean one. Pixels closer than 1e-6 to the
light output 0 so downstream losses stay finite. The dot product is clamped
at 0: back-facing surfaces receive no (negative) light.

Pixel coordinates are normalized with centers at ((col + 0.5) / width,
(row + 0.5) / height); row 0 is the top row.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .scene_io import ImageF, PointLight, SceneMaps

SINGULAR_DISTANCE = 1e-6


def pixel_centers(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """(H, W) grids of normalized pixel-center coordinates."""
    x = (np.arange(width, dtype=np.float64) + 0.5) / width
    y = (np.arange(height, dtype=np.float64) + 0.5) / height
    return np.meshgrid(x, y)


def shade_single(light: PointLight, scene: SceneMaps) -> ImageF:
    """Shading map (3-channel, nonnegative) contributed by one light."""
    xg, yg = pixel_centers(scene.width, scene.height)
    zg = scene.depth.data[:, :, 0]
    nrm = scene.normal.data

    dx = light.position[0] - xg
    dy = light.position[1] - yg
    dz = light.position[2] - zg
    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
    singular = dist < SINGULAR_DISTANCE
    dist_safe = np.where(singular, 1.0, dist)

    dot = (
        nrm[:, :, 0] * dx
        + nrm[:, :, 1] * (light.ellipsoid_ratio * dy)
        + nrm[:, :, 2] * dz
    )
    geom = dot / dist_safe ** light.diffuse_exponent
    geom = np.where((geom > 0.0) & ~singular, geom, 0.0)

    tint = np.asarray(light.color, dtype=np.float64) * light.intensity
    return ImageF(scene.width, scene.height, 3, geom[:, :, None] * tint)


def shade_all(lights: list[PointLight], scene: SceneMaps) -> ImageF:
    """Pixelwise sum of per-light shading, accumulated in list order."""
    acc = np.zeros((scene.height, scene.width, 3), dtype=np.float64)
    for light in lights:
        acc += shade_single(light, scene).data
    return ImageF(scene.width, scene.height, 3, acc)


def compose(albedo: ImageF, shading: ImageF) -> ImageF:
    """Image = albedo * shading, per pixel per channel. No clamping: values
    may exceed 1; only PNG previews clamp."""
    if albedo.channels != 3 or shading.channels != 3:
        raise ValidationError("compose needs 3-channel albedo and shading")
    _check_same_size(albedo, shading)
    return ImageF(albedo.width, albedo.height, 3, albedo.data * shading.data)


def composite_mask(foreground: ImageF, background: ImageF, mask: ImageF) -> ImageF:
    """Alpha blend: mask * foreground + (1 - mask) * background."""
    if foreground.channels != background.channels:
        raise ValidationError("foreground/background channel counts differ")
    if mask.channels != 1:
        raise ValidationError("mask must be single-channel")
    _check_same_size(foreground, background)
    _check_same_size(foreground, mask)
    if not (np.all(mask.data >= 0.0) and np.all(mask.data <= 1.0)):
        raise ValidationError("mask values must lie in [0, 1]")
    m = mask.data
    out = m * foreground.data + (1.0 - m) * background.data
    return ImageF(foreground.width, foreground.height, foreground.channels, out)


def _check_same_size(a: ImageF, b: ImageF) -> None:
    if a.width != b.width or a.height != b.height:
        raise ValidationError(
            f"image dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
