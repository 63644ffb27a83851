"""Deterministic lighting-prompt constraint sampling.

A constraint is a small set of words drawn from a fixed hierarchy of 19
lighting-related categories, wrapped into the question an external language
model would answer. Sampling is fully determined by the seed: the word
count k is uniform on {2..6}, categories are drawn without replacement with
probability proportional to their weights (successive draws with
renormalization), and one word is drawn uniformly per chosen category.

The hierarchy, the action-phrase groups, the named color table, and the
3x3 grid labels all ship in ``data/vocabularies.json``; that file is the
source of truth for vocabulary-closure checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .errors import ValidationError

if TYPE_CHECKING:
    from .lightpos import GridLightEdit

N_CATEGORIES = 19
MIN_WORDS = 2
MAX_WORDS = 6
MIN_SUBCATEGORIES = 13

QUESTION_TEMPLATE = (
    "could you describe the lighting property of a random scene "
    "using the words of {words}?"
)
POSITIONING_TEMPLATE = "{action} a {color} light at the {label}"


@dataclass
class Category:
    name: str
    weight: float
    words: list[str]


@dataclass
class PromptHierarchy:
    """The 19 weighted categories and their sub-category vocabularies."""

    categories: list[Category]

    def __post_init__(self):
        if len(self.categories) != N_CATEGORIES:
            raise ValidationError(
                f"hierarchy must have exactly {N_CATEGORIES} categories, "
                f"got {len(self.categories)}"
            )
        names = [c.name for c in self.categories]
        if len(set(names)) != len(names):
            raise ValidationError("category names must be unique")
        for cat in self.categories:
            if not cat.weight > 0:
                raise ValidationError(f"category {cat.name!r} has non-positive weight")
            if len(cat.words) < MIN_SUBCATEGORIES:
                raise ValidationError(
                    f"category {cat.name!r} has {len(cat.words)} sub-categories, "
                    f"need at least {MIN_SUBCATEGORIES}"
                )
            if len(set(cat.words)) != len(cat.words):
                raise ValidationError(f"category {cat.name!r} has duplicate words")

    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.categories], dtype=np.float64)


@dataclass
class PositioningVocab:
    """Action synonym groups, named colors, and 3x3 grid labels."""

    action_groups: dict[str, list[str]]
    colors: list[tuple[str, tuple[int, int, int]]]
    grid_labels: list[str]

    def __post_init__(self):
        if len(self.grid_labels) != 9:
            raise ValidationError("expected 9 grid labels")
        names = [name for name, _ in self.colors]
        if len(set(names)) != len(names):
            raise ValidationError("color names must be unique")
        for name, rgb in self.colors:
            if len(rgb) != 3 or any(not 0 <= v <= 255 for v in rgb):
                raise ValidationError(f"color {name!r} has RGB outside [0, 255]")
        for group, phrases in self.action_groups.items():
            if not phrases:
                raise ValidationError(f"action group {group!r} is empty")
        self._rgb_by_name = {name: rgb for name, rgb in self.colors}

    def color_rgb(self, name: str) -> tuple[int, int, int]:
        try:
            return self._rgb_by_name[name]
        except KeyError:
            raise ValidationError(f"unknown color name {name!r}") from None


@dataclass
class Constraint:
    """One sampled prompt constraint: (category, word) picks plus the question."""

    selected: list[tuple[str, str]]
    question: str

    @property
    def selected_words(self) -> list[str]:
        return [word for _, word in self.selected]


# --------------------------------------------------------------------------
# Vocabulary loading

def load_vocabularies(path: str | Path | None = None) -> tuple[PromptHierarchy, PositioningVocab]:
    """Load the packaged vocabulary file, or an override with the same schema."""
    if path is None:
        raw = resources.files("relight.data").joinpath("vocabularies.json").read_text()
    else:
        raw = Path(path).read_text()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"vocabulary file is not valid JSON: {exc}") from exc
    try:
        hierarchy = PromptHierarchy(
            [Category(c["name"], float(c["weight"]), list(c["words"])) for c in doc["categories"]]
        )
        vocab = PositioningVocab(
            action_groups={a["group"]: list(a["phrases"]) for a in doc["actions"]},
            colors=[(c["name"], tuple(c["rgb"])) for c in doc["colors"]],
            grid_labels=list(doc["grid_labels"]),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"vocabulary file missing field: {exc}") from exc
    return hierarchy, vocab


def default_hierarchy() -> PromptHierarchy:
    return load_vocabularies()[0]


def default_positioning_vocab() -> PositioningVocab:
    return load_vocabularies()[1]


# --------------------------------------------------------------------------
# Sampling

def sample_constraint(hierarchy: PromptHierarchy, seed: int) -> Constraint:
    """Draw one constraint; fully determined by (hierarchy, seed)."""
    rng = np.random.default_rng(seed)
    k = int(rng.integers(MIN_WORDS, MAX_WORDS + 1))

    weights = hierarchy.weights()
    remaining = list(range(len(hierarchy.categories)))
    selected: list[tuple[str, str]] = []
    for _ in range(k):
        w = weights[remaining]
        pick = int(rng.choice(len(remaining), p=w / w.sum()))
        cat = hierarchy.categories[remaining.pop(pick)]
        word = cat.words[int(rng.integers(len(cat.words)))]
        selected.append((cat.name, word))

    question = QUESTION_TEMPLATE.format(words=", ".join(w for _, w in selected))
    return Constraint(selected=selected, question=question)


def sample_positioning_text(vocab: PositioningVocab, edit: "GridLightEdit", seed: int) -> str:
    """Instruction text for one grid edit, with a seed-chosen action synonym.

    The grid label names the edit's cell; for a move it names the
    destination cell.
    """
    if edit.action not in vocab.action_groups:
        raise ValidationError(f"unknown action {edit.action!r}")
    vocab.color_rgb(edit.color_name)  # raises on unknown color
    cell = edit.target_cell if edit.action == "move" and edit.target_cell is not None else edit.cell
    if not 0 <= cell <= 8:
        raise ValidationError(f"grid cell {cell} outside 0..8")
    phrases = vocab.action_groups[edit.action]
    rng = np.random.default_rng(seed)
    verb = phrases[int(rng.integers(len(phrases)))]
    return POSITIONING_TEMPLATE.format(action=verb, color=edit.color_name, label=vocab.grid_labels[cell])
