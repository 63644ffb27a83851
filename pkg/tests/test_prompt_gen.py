import numpy as np
import pytest

from relight import (
    GridLightEdit,
    PointLight,
    ValidationError,
    default_hierarchy,
    default_positioning_vocab,
    sample_constraint,
    sample_positioning_text,
)
from relight.prompt_gen import Category, PromptHierarchy

from helpers import exact_inclusion_probabilities

EXPECTED_CATEGORIES = [
    "Atmosphere", "Color", "Temperature", "Directionality", "Emotions",
    "Intensity", "Light location", "Lighting effect", "Place",
    "Purpose of lighting", "Shape", "Smell", "Sound", "Source type",
    "Taste", "Time", "Touch", "Universe", "Weather",
]


# --------------------------------------------------------------------------
# Inclusion-probability oracle (exact enumeration; lives in helpers)

def test_oracle_sanity_uniform_weights():
    # with equal weights, inclusion is k/n for each fixed k
    incl = exact_inclusion_probabilities([1.0] * 10, k_min=3, k_max=3)
    assert np.allclose(incl, 0.3, atol=1e-12)


# --------------------------------------------------------------------------
# Hierarchy structure

def test_default_hierarchy_has_the_19_categories():
    hierarchy = default_hierarchy()
    assert [c.name for c in hierarchy.categories] == EXPECTED_CATEGORIES


def test_subcategory_counts():
    hierarchy = default_hierarchy()
    by_name = {c.name: c for c in hierarchy.categories}
    assert len(by_name["Light location"].words) == 13
    for name, cat in by_name.items():
        if name != "Light location":
            assert len(cat.words) >= 30, name


def test_default_weights_favor_location_and_color():
    hierarchy = default_hierarchy()
    for cat in hierarchy.categories:
        if cat.name in ("Light location", "Color"):
            assert cat.weight == 3.0
        else:
            assert cat.weight == 1.0


def test_hierarchy_rejects_wrong_category_count():
    cats = [Category(f"c{i}", 1.0, [f"w{j}" for j in range(15)]) for i in range(18)]
    with pytest.raises(ValidationError):
        PromptHierarchy(cats)


def test_hierarchy_rejects_thin_category():
    cats = [Category(f"c{i}", 1.0, [f"w{j}" for j in range(15)]) for i in range(18)]
    cats.append(Category("thin", 1.0, ["a", "b"]))
    with pytest.raises(ValidationError):
        PromptHierarchy(cats)


# --------------------------------------------------------------------------
# sample_constraint

def test_constraint_cardinality_and_closure():
    hierarchy = default_hierarchy()
    vocab_by_name = {c.name: set(c.words) for c in hierarchy.categories}
    for seed in range(300):
        constraint = sample_constraint(hierarchy, seed)
        assert 2 <= len(constraint.selected) <= 6
        names = [cat for cat, _ in constraint.selected]
        assert len(set(names)) == len(names)
        for cat, word in constraint.selected:
            assert word in vocab_by_name[cat]
            assert word in constraint.question


def test_constraint_question_template():
    hierarchy = default_hierarchy()
    constraint = sample_constraint(hierarchy, 11)
    words = ", ".join(constraint.selected_words)
    assert constraint.question == (
        f"could you describe the lighting property of a random scene "
        f"using the words of {words}?"
    )


def test_constraint_is_deterministic():
    hierarchy = default_hierarchy()
    assert sample_constraint(hierarchy, 99) == sample_constraint(hierarchy, 99)
    assert sample_constraint(hierarchy, 99) != sample_constraint(hierarchy, 100)


def test_heavily_weighted_categories_dominate_inclusion():
    # weight 5 on the two physically grounded categories
    base = default_hierarchy()
    cats = [
        Category(c.name, 5.0 if c.name in ("Light location", "Color") else 1.0, c.words)
        for c in base.categories
    ]
    hierarchy = PromptHierarchy(cats)
    weights = [c.weight for c in hierarchy.categories]
    exact = exact_inclusion_probabilities(weights)

    n_samples = 10_000
    counts = np.zeros(len(cats))
    index = {c.name: i for i, c in enumerate(cats)}
    for seed in range(n_samples):
        for cat, _ in sample_constraint(hierarchy, seed).selected:
            counts[index[cat]] += 1
    freq = counts / n_samples

    sigma = np.sqrt(exact * (1.0 - exact) / n_samples)
    assert np.all(np.abs(freq - exact) <= 3.0 * sigma)

    heavy = [index["Light location"], index["Color"]]
    unit = [i for i in range(len(cats)) if i not in heavy]
    for hidx in heavy:
        for uidx in unit:
            assert exact[hidx] >= 2.0 * exact[uidx]
            assert freq[hidx] >= 2.0 * freq[uidx]


# --------------------------------------------------------------------------
# Positioning vocabulary and text

def top_right_edit(color="Blue"):
    light = PointLight(color=(0.0, 0.0, 1.0), position=(0.7, 0.1, 0.5), intensity=0.5)
    return GridLightEdit(action="add", cell=2, color_name=color, light=light)


def test_color_table_spot_checks():
    vocab = default_positioning_vocab()
    assert vocab.color_rgb("Black") == (0, 0, 0)
    assert vocab.color_rgb("Tomato") == (255, 99, 71)
    assert vocab.color_rgb("White") == (255, 255, 255)
    for _, rgb in vocab.colors:
        assert all(0 <= v <= 255 for v in rgb)


def test_action_groups_present():
    vocab = default_positioning_vocab()
    assert vocab.action_groups["add"] == ["add", "incorporate", "include", "insert", "append"]
    assert "turn off" in vocab.action_groups["remove"]
    assert vocab.action_groups["move"] == ["move", "relocate", "shift", "transfer", "reposition"]


def test_positioning_text_add_blue_top_right():
    vocab = default_positioning_vocab()
    text = sample_positioning_text(vocab, top_right_edit(), seed=4)
    verb, _, rest = text.partition(" a ")
    assert verb in {"add", "incorporate", "include", "insert", "append"}
    assert rest == "Blue light at the top-right"


def test_positioning_text_varies_verb_with_seed():
    vocab = default_positioning_vocab()
    verbs = {sample_positioning_text(vocab, top_right_edit(), seed=s).split(" a ")[0]
             for s in range(40)}
    assert len(verbs) > 1
    assert verbs <= set(vocab.action_groups["add"])


def test_positioning_text_is_deterministic():
    vocab = default_positioning_vocab()
    edit = top_right_edit()
    assert sample_positioning_text(vocab, edit, 7) == sample_positioning_text(vocab, edit, 7)


def test_positioning_text_move_names_destination_cell():
    vocab = default_positioning_vocab()
    light = PointLight(color=(0.0, 0.0, 1.0), position=(0.5, 0.5, 0.5), intensity=0.5)
    edit = GridLightEdit(action="move", cell=0, target_cell=4, color_name="Blue", light=light)
    text = sample_positioning_text(vocab, edit, seed=0)
    assert text.endswith("at the center")


def test_positioning_text_unknown_color_rejected():
    vocab = default_positioning_vocab()
    with pytest.raises(ValidationError):
        sample_positioning_text(vocab, top_right_edit(color="Blurple"), seed=0)


def test_positioning_text_unknown_action_rejected():
    vocab = default_positioning_vocab()
    edit = top_right_edit()
    edit.action = "teleport"  # bypasses construction-time validation
    with pytest.raises(ValidationError):
        sample_positioning_text(vocab, edit, seed=0)
