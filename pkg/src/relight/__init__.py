"""Point-light scene relighting toolkit.

Fits parametric point lights to a lighting image by photometric
optimization, transfers them to new scenes, composites foreground over
relit backgrounds, synthesizes grid-based light-positioning edits, and
generates lighting-prompt constraints — as a library plus a batch CLI.
"""

from .errors import FormatError, InitializationError, RelightError, ValidationError
from .fitter import FitConfig, LightingFit, fit_lights, fit_loss, fit_loss_grad, init_lights
from .lightpos import EditSample, GridLightEdit, apply_light_edits, synthesize_edit_sequence
from .prompt_gen import (
    Constraint,
    PositioningVocab,
    PromptHierarchy,
    default_hierarchy,
    default_positioning_vocab,
    load_vocabularies,
    sample_constraint,
    sample_positioning_text,
)
from .renderer import compose, composite_mask, shade_all, shade_single
from .scene_io import (
    ImageF,
    PointLight,
    SceneMaps,
    load_float_map,
    load_lights,
    save_float_map,
    save_lights,
    save_preview_png,
)
from .transfer import adapt_lights, relight_background

__version__ = "0.1.0"

__all__ = [
    "Constraint",
    "EditSample",
    "FitConfig",
    "FormatError",
    "GridLightEdit",
    "ImageF",
    "InitializationError",
    "LightingFit",
    "PointLight",
    "PositioningVocab",
    "PromptHierarchy",
    "RelightError",
    "SceneMaps",
    "ValidationError",
    "adapt_lights",
    "apply_light_edits",
    "compose",
    "composite_mask",
    "default_hierarchy",
    "default_positioning_vocab",
    "fit_lights",
    "fit_loss",
    "fit_loss_grad",
    "init_lights",
    "load_float_map",
    "load_lights",
    "load_vocabularies",
    "relight_background",
    "sample_constraint",
    "sample_positioning_text",
    "save_float_map",
    "save_lights",
    "save_preview_png",
    "shade_all",
    "shade_single",
    "synthesize_edit_sequence",
]
