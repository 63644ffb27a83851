"""Deterministic fixture builders and oracles shared across the test modules."""

from collections import defaultdict

import numpy as np

from relight import ImageF, PointLight, SceneMaps


def flat_scene(width=33, height=33, albedo=1.0, depth=0.0):
    """Frontal plane: N = (0, 0, 1) everywhere, constant albedo and depth."""
    a = ImageF.from_array(np.full((height, width, 3), albedo, dtype=np.float64))
    n = ImageF.from_array(np.tile(np.array([0.0, 0.0, 1.0]), (height, width, 1)))
    d = ImageF.from_array(np.full((height, width, 1), depth, dtype=np.float64))
    return SceneMaps(albedo=a, normal=n, depth=d)


def gradient_albedo_scene(width=64, height=64, depth=0.0):
    """Frontal plane with a smooth non-constant albedo."""
    x = np.linspace(0.0, 1.0, width)[None, :].repeat(height, axis=0)
    a = ImageF.from_array(np.dstack([0.5 + 0.5 * x, np.full((height, width), 0.8), 0.9 - 0.3 * x]))
    n = ImageF.from_array(np.tile(np.array([0.0, 0.0, 1.0]), (height, width, 1)))
    d = ImageF.from_array(np.full((height, width, 1), depth, dtype=np.float64))
    return SceneMaps(albedo=a, normal=n, depth=d)


def wavy_scene(width, height, phase=0.0):
    """Curved scene: cosine-bump albedo, tilted normals, undulating depth."""
    yy, xx = np.mgrid[0:height, 0:width]
    xx = xx / width
    yy = yy / height
    alb = 0.65 + 0.3 * np.cos(3 * np.pi * xx + phase) * np.cos(2 * np.pi * yy)
    albedo = ImageF.from_array(np.dstack([alb, np.roll(alb, 7, axis=0), np.roll(alb, 13, axis=1)]))
    tx = 0.25 * np.sin(2 * np.pi * xx + phase)
    ty = 0.25 * np.cos(2 * np.pi * yy - phase)
    normal = ImageF.from_array(np.dstack([tx, ty, np.sqrt(1.0 - tx * tx - ty * ty)]))
    depth = ImageF.from_array((0.2 + 0.2 * np.sin(np.pi * xx + phase) * np.sin(np.pi * yy))[..., None])
    return SceneMaps(albedo=albedo, normal=normal, depth=depth)


def random_scene(seed, width=16, height=16, max_tilt=0.2, max_depth=0.3):
    """Random smooth-ish scene with frontal-leaning normals."""
    rng = np.random.default_rng(seed)
    albedo = ImageF.from_array(rng.uniform(0.2, 1.0, (height, width, 3)))
    tx = rng.uniform(-max_tilt, max_tilt, (height, width))
    ty = rng.uniform(-max_tilt, max_tilt, (height, width))
    normal = ImageF.from_array(np.dstack([tx, ty, np.sqrt(1.0 - tx * tx - ty * ty)]))
    depth = ImageF.from_array(rng.uniform(0.0, max_depth, (height, width, 1)))
    return SceneMaps(albedo=albedo, normal=normal, depth=depth)


def random_lights(seed, count, z_range=(0.7, 0.95)):
    """Lights floating well in front of random_scene geometry."""
    rng = np.random.default_rng(seed)
    return [
        PointLight(
            color=tuple(rng.uniform(0.2, 1.0, 3)),
            position=(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(*z_range)),
            intensity=rng.uniform(0.3, 0.9),
            ellipsoid_ratio=rng.uniform(0.7, 1.4),
            diffuse_exponent=rng.uniform(0.8, 1.5),
        )
        for _ in range(count)
    ]


def reach_probabilities(weights, max_k):
    """P(reaching each chosen-set after exactly |S| draws) under weighted
    sampling without replacement (successive renormalized draws), by exact
    subset enumeration."""
    total = float(sum(weights))
    levels = [{frozenset(): 1.0}]
    for _ in range(max_k):
        nxt = defaultdict(float)
        for chosen, p in levels[-1].items():
            rem = total - sum(weights[c] for c in chosen)
            for c in range(len(weights)):
                if c not in chosen:
                    nxt[chosen | {c}] += p * weights[c] / rem
        levels.append(dict(nxt))
    return levels


def exact_inclusion_probabilities(weights, k_min=2, k_max=6):
    """P(category included) when k is uniform on {k_min..k_max}."""
    levels = reach_probabilities(weights, k_max)
    incl = np.zeros(len(weights))
    for k in range(k_min, k_max + 1):
        for chosen, p in levels[k].items():
            for c in chosen:
                incl[c] += p / (k_max - k_min + 1)
    return incl


def lit_margin(lights, scene):
    """Minimum pre-clamp dot product over all pixels and lights.

    A comfortably positive margin means finite-difference probes cannot
    cross the Lambertian clamp boundary.
    """
    from relight.renderer import pixel_centers

    xg, yg = pixel_centers(scene.width, scene.height)
    zg = scene.depth.data[:, :, 0]
    worst = np.inf
    for light in lights:
        dx = light.position[0] - xg
        dy = light.position[1] - yg
        dz = light.position[2] - zg
        dot = (
            scene.normal.data[:, :, 0] * dx
            + scene.normal.data[:, :, 1] * light.ellipsoid_ratio * dy
            + scene.normal.data[:, :, 2] * dz
        )
        worst = min(worst, float(dot.min()))
    return worst
