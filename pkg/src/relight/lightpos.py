"""Grid-based light-positioning edits for training-pair synthesis.

The image is split into a 3x3 grid (row-major cells 0..8). A sample applies
one to three edits — add, remove, or move a point light — on top of a
source image, renders the extra illumination from the scene's maps, and
pairs the result with generated instruction text. Edits are additive: the
edited image is always source + albedo * shading(active lights), so a
sample whose edits cancel out reproduces the source bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RelightError, ValidationError
from .prompt_gen import PositioningVocab, sample_positioning_text
from .renderer import compose, shade_all
from .scene_io import ImageF, PointLight, SceneMaps

ACTIONS = ("add", "remove", "move")
MAX_EDITS = 3
_DEPTH_OFFSET_RANGE = (0.1, 0.5)   # light-to-surface offset for placed lights
_INTENSITY_RANGE = (0.2, 1.0)
_TEXT_SEPARATOR = "; "


def cell_bounds(cell: int) -> tuple[float, float, float, float]:
    """Normalized (x0, x1, y0, y1) bounds of a grid cell."""
    if not 0 <= cell <= 8:
        raise ValidationError(f"grid cell {cell} outside 0..8")
    col, row = cell % 3, cell // 3
    return col / 3.0, (col + 1) / 3.0, row / 3.0, (row + 1) / 3.0


@dataclass
class GridLightEdit:
    """One edit: what happened, where on the grid, and the light involved.

    For a move, ``cell`` is where the light was and ``target_cell`` where it
    went; the stored light is the light after the edit.
    """

    action: str
    cell: int
    color_name: str
    light: PointLight
    target_cell: int | None = None

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ValidationError(f"action must be one of {ACTIONS}, got {self.action!r}")
        if not 0 <= self.cell <= 8:
            raise ValidationError(f"grid cell {self.cell} outside 0..8")
        if self.action == "move":
            if self.target_cell is None:
                raise ValidationError("move edits need a target_cell")
            if not 0 <= self.target_cell <= 8:
                raise ValidationError(f"target cell {self.target_cell} outside 0..8")
        declared = self.target_cell if self.action == "move" else self.cell
        x0, x1, y0, y1 = cell_bounds(declared)
        x, y, _ = self.light.position
        if not (x0 <= x < x1 and y0 <= y < y1):
            raise ValidationError(
                f"light at ({x:.4f}, {y:.4f}) lies outside cell {declared}"
            )


@dataclass
class EditSample:
    edits: list[GridLightEdit]
    edited_image: ImageF
    text: str


def apply_light_edits(source: ImageF, scene: SceneMaps, lights: list[PointLight]) -> ImageF:
    """Source plus the rendered contribution of the given lights."""
    if source.channels != 3:
        raise ValidationError("source image must have 3 channels")
    if source.width != scene.width or source.height != scene.height:
        raise ValidationError("source image and scene dimensions differ")
    extra = compose(scene.albedo, shade_all(lights, scene))
    return ImageF(source.width, source.height, 3, source.data + extra.data)


def synthesize_edit_sequence(
    source: ImageF,
    scene: SceneMaps,
    vocab: PositioningVocab,
    seed: int,
    max_retries: int = 50,
) -> EditSample:
    """Sample 1..3 edits, render them onto the source, and produce text.

    A sequence that tries to remove or move a light before any exists is
    discarded and re-sampled; after ``max_retries`` failed attempts an error
    is raised. Fully deterministic given (inputs, seed).
    """
    if source.channels != 3:
        raise ValidationError("source image must have 3 channels")
    if source.width != scene.width or source.height != scene.height:
        raise ValidationError("source image and scene dimensions differ")

    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        result = _try_sequence(rng, scene, vocab)
        if result is None:
            continue
        edits, active = result
        texts = [
            sample_positioning_text(vocab, edit, int(rng.integers(2**32)))
            for edit in edits
        ]
        return EditSample(
            edits=edits,
            edited_image=apply_light_edits(source, scene, [l for _, _, l in active]),
            text=_TEXT_SEPARATOR.join(texts),
        )
    raise RelightError(f"no valid edit sequence after {max_retries} attempts")


def _try_sequence(rng, scene, vocab):
    """One attempt; None when an edit has no light to act on."""
    n_edits = int(rng.integers(1, MAX_EDITS + 1))
    edits: list[GridLightEdit] = []
    active: list[tuple[int, str, PointLight]] = []   # (cell, color name, light)
    for _ in range(n_edits):
        action = ACTIONS[int(rng.integers(len(ACTIONS)))]
        if action == "add":
            cell = int(rng.integers(9))
            name, rgb = vocab.colors[int(rng.integers(len(vocab.colors)))]
            light = _place_light(rng, scene, cell, rgb, intensity=None)
            active.append((cell, name, light))
            edits.append(GridLightEdit("add", cell, name, light))
        elif action == "remove":
            if not active:
                return None
            cell, name, light = active.pop(int(rng.integers(len(active))))
            edits.append(GridLightEdit("remove", cell, name, light))
        else:
            if not active:
                return None
            idx = int(rng.integers(len(active)))
            old_cell, name, old_light = active[idx]
            new_cell = int(rng.integers(9))
            moved = _place_light(rng, scene, new_cell, None, intensity=old_light.intensity,
                                 color=old_light.color)
            active[idx] = (new_cell, name, moved)
            edits.append(GridLightEdit("move", old_cell, name, moved, target_cell=new_cell))
    return edits, active


def _place_light(rng, scene, cell, rgb, intensity, color=None):
    """Sample a light inside a cell, floating above the local surface depth."""
    x0, x1, y0, y1 = cell_bounds(cell)
    x = x0 + rng.random() * (x1 - x0)
    y = y0 + rng.random() * (y1 - y0)
    offset = rng.uniform(*_DEPTH_OFFSET_RANGE)
    z = min(max(float(scene.depth.sample_bilinear(x, y)[0]) + offset, 0.0), 1.0)
    if intensity is None:
        intensity = rng.uniform(*_INTENSITY_RANGE)
    if color is None:
        color = tuple(v / 255.0 for v in rgb)
    return PointLight(color=color, position=(x, y, z), intensity=intensity)
