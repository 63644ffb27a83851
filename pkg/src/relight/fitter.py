"""Reconstruct point lights from a lighting image by photometric optimization.

The objective is the mean squared difference between the target image and
albedo * sum of per-light shading. All nine parameters per light (color,
position, intensity, ellipsoid ratio, diffuse exponent) are optimized
jointly with Adam from a deterministic farthest-point initialization, with
a projection onto the valid parameter ranges after every step.

Parameter packing used throughout: one row per light with columns
[r, g, b, x, y, z, intensity, ellipsoid_ratio, diffuse_exponent].
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InitializationError, ValidationError
from .renderer import SINGULAR_DISTANCE, compose, pixel_centers, shade_all
from .scene_io import ImageF, PointLight, SceneMaps

N_PARAMS = 9
_EXP_FLOOR = 1e-3  # lower bound keeping ellipsoid_ratio / diffuse_exponent positive
_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8
_STOP_WINDOW = 50  # steps over which relative loss decrease is measured


@dataclass
class FitConfig:
    """Knobs for one reconstruction run."""

    n_lights: int = 20
    max_iters: int = 2000
    learning_rate: float = 5e-2
    intensity_quantile: float = 0.7
    convergence_tol: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.n_lights < 1:
            raise ValidationError(f"n_lights must be >= 1, got {self.n_lights}")
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.learning_rate > 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 < self.intensity_quantile < 1.0:
            raise ValidationError(
                f"intensity_quantile must be in (0, 1), got {self.intensity_quantile}"
            )
        if not self.convergence_tol > 0:
            raise ValidationError(
                f"convergence_tol must be > 0, got {self.convergence_tol}"
            )


@dataclass
class LightingFit:
    """Result of one reconstruction: lights, final error, telemetry."""

    lights: list[PointLight]
    final_error: float
    iterations_run: int
    wall_time: float


# --------------------------------------------------------------------------
# Initialization

def init_lights(lighting_image: ImageF, depth: ImageF, config: FitConfig) -> list[PointLight]:
    """Seed lights on bright, mutually distant pixels.

    Candidates are the pixels whose gray value (channel mean) exceeds the
    ``intensity_quantile`` quantile. The first pick is the brightest
    candidate; each further pick maximizes the minimum Euclidean pixel
    distance to the picks so far. All ties resolve to the smallest row-major
    index. Each light starts at the picked pixel with z = depth there,
    color (0.5, 0.5, 0.5), intensity 1/n, ellipsoid ratio 1, and diffuse
    exponent 1.
    """
    if lighting_image.channels != 3:
        raise ValidationError("lighting image must have 3 channels")
    if depth.channels != 1:
        raise ValidationError("depth must be single-channel")
    if lighting_image.width != depth.width or lighting_image.height != depth.height:
        raise ValidationError("lighting image and depth dimensions differ")

    gray = lighting_image.data.mean(axis=2)
    flat = gray.ravel()
    threshold = np.quantile(flat, config.intensity_quantile)
    candidates = np.flatnonzero(flat > threshold)  # ascending row-major indices
    n = config.n_lights
    if candidates.size < n:
        raise InitializationError(
            f"only {candidates.size} pixels above the {config.intensity_quantile} "
            f"brightness quantile, need {n}"
        )

    width = lighting_image.width
    rows = (candidates // width).astype(np.float64)
    cols = (candidates % width).astype(np.float64)

    picked = [int(np.argmax(flat[candidates]))]
    min_dist = np.hypot(rows - rows[picked[0]], cols - cols[picked[0]])
    for _ in range(n - 1):
        nxt = int(np.argmax(min_dist))
        picked.append(nxt)
        min_dist = np.minimum(min_dist, np.hypot(rows - rows[nxt], cols - cols[nxt]))

    lights = []
    for idx in picked:
        r, c = int(rows[idx]), int(cols[idx])
        lights.append(
            PointLight(
                color=(0.5, 0.5, 0.5),
                position=(
                    (c + 0.5) / lighting_image.width,
                    (r + 0.5) / lighting_image.height,
                    float(depth.data[r, c, 0]),
                ),
                intensity=1.0 / n,
                ellipsoid_ratio=1.0,
                diffuse_exponent=1.0,
            )
        )
    return lights


# --------------------------------------------------------------------------
# Loss and gradient

def fit_loss(lights: list[PointLight], scene: SceneMaps, target: ImageF) -> float:
    """Mean over pixels and channels of the squared photometric residual."""
    _check_target(scene, target)
    rendered = compose(scene.albedo, shade_all(lights, scene))
    diff = rendered.data - target.data
    return float(np.mean(diff * diff))


def fit_loss_grad(lights: list[PointLight], scene: SceneMaps, target: ImageF) -> np.ndarray:
    """Analytic gradient of ``fit_loss``; one row per light, columns as packed.

    At the Lambertian clamp boundary (dot product = 0) the subgradient 0 is
    used, as it is for singular pixels.
    """
    _check_target(scene, target)
    ctx = _FitContext.from_scene(scene, target)
    _, grad = _loss_and_grad(pack_lights(lights), ctx)
    return grad


def pack_lights(lights: list[PointLight]) -> np.ndarray:
    """Lights -> (n, 9) parameter array."""
    theta = np.empty((len(lights), N_PARAMS), dtype=np.float64)
    for i, l in enumerate(lights):
        theta[i, 0:3] = l.color
        theta[i, 3:6] = l.position
        theta[i, 6] = l.intensity
        theta[i, 7] = l.ellipsoid_ratio
        theta[i, 8] = l.diffuse_exponent
    return theta


def unpack_lights(theta: np.ndarray) -> list[PointLight]:
    """(n, 9) parameter array -> lights (rows must satisfy light invariants)."""
    return [
        PointLight(
            color=tuple(row[0:3]),
            position=tuple(row[3:6]),
            intensity=float(row[6]),
            ellipsoid_ratio=float(row[7]),
            diffuse_exponent=float(row[8]),
        )
        for row in theta
    ]


@dataclass
class _FitContext:
    """Flattened per-pixel scene data reused across optimizer iterations."""

    xs: np.ndarray          # (P,) pixel-center x
    ys: np.ndarray          # (P,) pixel-center y
    zs: np.ndarray          # (P,) depth
    normal: np.ndarray      # (P, 3)
    albedo: np.ndarray      # (P, 3)
    target: np.ndarray      # (P, 3)
    inv_count: float = field(init=False)

    def __post_init__(self):
        self.inv_count = 1.0 / self.target.size

    @classmethod
    def from_scene(cls, scene: SceneMaps, target: ImageF) -> "_FitContext":
        xg, yg = pixel_centers(scene.width, scene.height)
        return cls(
            xs=xg.ravel(),
            ys=yg.ravel(),
            zs=scene.depth.data[:, :, 0].ravel(),
            normal=scene.normal.data.reshape(-1, 3),
            albedo=scene.albedo.data.reshape(-1, 3),
            target=target.data.reshape(-1, 3),
        )


class _Workspace:
    """Reusable (n, P) buffers; fresh temporaries dominate the runtime
    otherwise (every multi-megabyte temporary pays allocator + page-fault
    cost, roughly 5x the arithmetic)."""

    def __init__(self, n_lights: int, n_pixels: int):
        shape = (n_lights, n_pixels)
        self.dx, self.dy, self.dz = (np.empty(shape) for _ in range(3))
        self.r2, self.log_r, self.falloff = (np.empty(shape) for _ in range(3))
        self.dot, self.geom, self.w = (np.empty(shape) for _ in range(3))
        self.q, self.tmp, self.tmp2 = (np.empty(shape) for _ in range(3))
        self.singular = np.empty(shape, dtype=bool)
        self.lit = np.empty(shape, dtype=bool)
        self.shading = np.empty((n_pixels, 3))
        self.resid = np.empty((n_pixels, 3))


def _loss_and_grad(
    theta: np.ndarray,
    ctx: _FitContext,
    boundary_open: bool = False,
    ws: _Workspace | None = None,
) -> tuple[float, np.ndarray]:
    """Vectorized forward + backward pass over all pixels and lights.

    ``boundary_open`` selects the subgradient at the Lambertian clamp
    boundary (dot product exactly 0): False uses 0, True uses the lit-side
    derivative. The optimizer needs the lit side because initialization
    places lights exactly on the surface, where constant-geometry scenes
    would otherwise pin every pixel to the boundary and stall. The two
    choices agree everywhere off the boundary.

    Pixel-light pair arrays are laid out (n, P) so the long pixel axis is
    the contiguous one.
    """
    n = theta.shape[0]
    if ws is None:
        ws = _Workspace(n, ctx.xs.size)
    color = theta[:, 0:3]                       # (n, 3)
    inten = theta[:, 6]
    ratio = theta[:, 7][:, None]
    expo = theta[:, 8][:, None]

    dx, dy, dz = ws.dx, ws.dy, ws.dz            # all (n, P)
    np.subtract(theta[:, 3][:, None], ctx.xs[None, :], out=dx)
    np.subtract(theta[:, 4][:, None], ctx.ys[None, :], out=dy)
    np.subtract(theta[:, 5][:, None], ctx.zs[None, :], out=dz)

    r2, tmp = ws.r2, ws.tmp
    np.multiply(dx, dx, out=r2)
    np.multiply(dy, dy, out=tmp)
    r2 += tmp
    np.multiply(dz, dz, out=tmp)
    r2 += tmp
    np.less(r2, SINGULAR_DISTANCE ** 2, out=ws.singular)
    np.copyto(r2, 1.0, where=ws.singular)       # r2 is r^2 with singulars parked at 1

    log_r, falloff = ws.log_r, ws.falloff
    np.log(r2, out=log_r)
    log_r *= 0.5
    np.multiply(log_r, -expo, out=falloff)
    np.exp(falloff, out=falloff)                # r^(-expo)

    nx = ctx.normal[None, :, 0]
    ny = ctx.normal[None, :, 1]
    nz = ctx.normal[None, :, 2]
    dot = ws.dot
    np.multiply(ny, dy, out=dot)
    dot *= ratio
    np.multiply(nx, dx, out=tmp)
    dot += tmp
    np.multiply(nz, dz, out=tmp)
    dot += tmp

    geom, lit = ws.geom, ws.lit
    np.multiply(dot, falloff, out=geom)         # pre-clamp value
    if boundary_open:
        np.greater_equal(geom, 0.0, out=lit)
    else:
        np.greater(geom, 0.0, out=lit)
    np.logical_and(lit, ~ws.singular, out=lit)
    geom *= lit                                 # clamp: max(0, .) either way

    tint = color * inten[:, None]               # (n, 3)
    shading, resid = ws.shading, ws.resid
    np.matmul(geom.T, tint, out=shading)        # (P, 3)
    np.multiply(ctx.albedo, shading, out=resid)
    resid -= ctx.target
    loss = float(ctx.inv_count * np.vdot(resid, resid))

    # err = d loss / d shading, reusing the residual buffer
    err = resid
    err *= ctx.albedo
    err *= 2.0 * ctx.inv_count

    grad = np.empty_like(theta)
    per_light_color = geom @ err                # (n, 3): d loss / d tint
    grad[:, 0:3] = inten[:, None] * per_light_color
    grad[:, 6] = np.sum(color * per_light_color, axis=1)

    # w = d loss / d geom for each pixel-light pair, clamp/singular masked
    w = ws.w
    np.matmul(color, err.T, out=w)
    w *= inten[:, None]
    w *= lit

    wf, q, tmp2 = ws.falloff, ws.q, ws.tmp2     # falloff buffer becomes w * falloff
    wf *= w
    np.divide(dot, r2, out=q)
    q *= expo
    np.multiply(q, dx, out=tmp)
    np.subtract(nx, tmp, out=tmp)
    tmp *= wf
    grad[:, 3] = tmp.sum(axis=1)
    np.multiply(ny, ratio, out=tmp2)
    np.multiply(q, dy, out=tmp)
    np.subtract(tmp2, tmp, out=tmp)
    tmp *= wf
    grad[:, 4] = tmp.sum(axis=1)
    np.multiply(q, dz, out=tmp)
    np.subtract(nz, tmp, out=tmp)
    tmp *= wf
    grad[:, 5] = tmp.sum(axis=1)
    np.multiply(ny, dy, out=tmp)
    tmp *= wf
    grad[:, 7] = tmp.sum(axis=1)
    np.multiply(w, log_r, out=tmp)
    tmp *= geom
    grad[:, 8] = -tmp.sum(axis=1)
    return loss, grad


def _project(theta: np.ndarray) -> None:
    """Clamp parameters onto their valid ranges, in place."""
    np.clip(theta[:, 0:3], 0.0, 1.0, out=theta[:, 0:3])   # color
    np.clip(theta[:, 3:6], 0.0, 1.0, out=theta[:, 3:6])   # position
    theta[:, 6] = np.maximum(theta[:, 6], 0.0)            # intensity
    theta[:, 7:9] = np.maximum(theta[:, 7:9], _EXP_FLOOR)


# --------------------------------------------------------------------------
# Full reconstruction

def fit_lights(lighting_image: ImageF, scene: SceneMaps, config: FitConfig) -> LightingFit:
    """Initialize then optimize ``config.n_lights`` lights against the image.

    Runs Adam for at most ``config.max_iters`` steps, stopping early once the
    relative loss decrease over a 50-step window falls below
    ``config.convergence_tol``. The lowest-loss iterate seen is returned, so
    the result is never worse than the initialization.
    """
    _check_target(scene, lighting_image)
    if lighting_image.width != scene.width or lighting_image.height != scene.height:
        raise ValidationError("lighting image and scene dimensions differ")

    start = time.perf_counter()
    initial = init_lights(lighting_image, scene.depth, config)
    ctx = _FitContext.from_scene(scene, lighting_image)
    ws = _Workspace(config.n_lights, ctx.xs.size)

    theta = pack_lights(initial)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    lr = config.learning_rate

    best_theta = theta.copy()
    best_loss = np.inf
    best_history: list[float] = []   # monotone: best loss seen up to each step
    steps = 0
    for step in range(1, config.max_iters + 1):
        loss, grad = _loss_and_grad(theta, ctx, boundary_open=True, ws=ws)
        if loss < best_loss:
            best_loss = loss
            best_theta = theta.copy()
        best_history.append(best_loss)
        # window the achieved (best-so-far) loss: raw per-step loss may rise
        # transiently under Adam oscillation without meaning convergence
        if len(best_history) > _STOP_WINDOW:
            prev = best_history[-_STOP_WINDOW - 1]
            if prev <= 0.0 or (prev - best_loss) / prev < config.convergence_tol:
                break

        m = _ADAM_BETA1 * m + (1.0 - _ADAM_BETA1) * grad
        v = _ADAM_BETA2 * v + (1.0 - _ADAM_BETA2) * grad * grad
        m_hat = m / (1.0 - _ADAM_BETA1 ** step)
        v_hat = v / (1.0 - _ADAM_BETA2 ** step)
        theta = theta - lr * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
        _project(theta)
        steps = step

    final_loss, _ = _loss_and_grad(theta, ctx, ws=ws)
    if final_loss < best_loss:
        best_loss = final_loss
        best_theta = theta

    lights = unpack_lights(best_theta)
    return LightingFit(
        lights=lights,
        final_error=fit_loss(lights, scene, lighting_image),
        iterations_run=steps,
        wall_time=time.perf_counter() - start,
    )


def _check_target(scene: SceneMaps, target: ImageF) -> None:
    if target.channels != 3:
        raise ValidationError("target image must have 3 channels")
    if target.width != scene.width or target.height != scene.height:
        raise ValidationError(
            f"target {target.width}x{target.height} does not match scene "
            f"{scene.width}x{scene.height}"
        )
