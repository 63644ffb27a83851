import numpy as np
import pytest

from relight import (
    ImageF,
    PointLight,
    ValidationError,
    compose,
    composite_mask,
    shade_all,
    shade_single,
)

from helpers import flat_scene, random_lights, random_scene

CENTER_LIGHT = PointLight(color=(1.0, 1.0, 1.0), position=(0.5, 0.5, 0.5), intensity=1.0)


# --------------------------------------------------------------------------
# shade_single

def test_flat_plane_sub_light_pixel_is_exactly_one():
    # odd dims put a pixel center exactly at (0.5, 0.5); there the light is
    # along the normal at distance 0.5 and sigma = 1 cancels the distance
    scene = flat_scene(33, 33)
    shading = shade_single(CENTER_LIGHT, scene)
    assert shading.data[16, 16, 0] == 1.0
    assert shading.data[16, 16, 1] == 1.0
    assert shading.data[16, 16, 2] == 1.0


def test_flat_plane_off_center_value_matches_hand_formula():
    scene = flat_scene(33, 33)
    shading = shade_single(CENTER_LIGHT, scene)
    # pixel (0, 0): center at 0.5/33
    dx = 0.5 - 0.5 / 33
    r = np.sqrt(dx * dx + dx * dx + 0.25)
    assert shading.data[0, 0, 0] == pytest.approx(0.5 / r, abs=1e-15)


def test_zero_intensity_gives_zero_map():
    scene = flat_scene(9, 9)
    light = PointLight(color=(1, 1, 1), position=(0.5, 0.5, 0.5), intensity=0.0)
    assert np.all(shade_single(light, scene).data == 0.0)


def test_back_facing_normals_are_clamped_to_zero():
    scene = flat_scene(9, 9)
    scene.normal.data[:] = [0.0, 0.0, -1.0]
    assert np.all(shade_single(CENTER_LIGHT, scene).data == 0.0)


def test_singular_pixel_outputs_zero():
    # light exactly on a pixel center at the surface depth; normals point
    # sideways so neighbors on the -x side are genuinely lit
    scene = flat_scene(33, 33, depth=0.25)
    scene.normal.data[:] = [-1.0, 0.0, 0.0]
    light = PointLight(color=(1, 1, 1), position=(0.5, 0.5, 0.25), intensity=1.0)
    shading = shade_single(light, scene)
    assert shading.data[16, 16, 0] == 0.0
    assert shading.data[16, 17, 0] > 0.0


def test_ellipsoid_ratio_scales_only_numerator_y():
    # with N = (0, 1, 0) the dot picks out the y term; doubling the ratio
    # doubles the shading because the denominator distance ignores it
    scene = flat_scene(9, 9)
    scene.normal.data[:] = [0.0, 1.0, 0.0]
    base = PointLight(color=(1, 1, 1), position=(0.5, 0.9, 0.5), intensity=1.0, ellipsoid_ratio=1.0)
    double = PointLight(color=(1, 1, 1), position=(0.5, 0.9, 0.5), intensity=1.0, ellipsoid_ratio=2.0)
    s1 = shade_single(base, scene).data
    s2 = shade_single(double, scene).data
    lit = s1 > 0
    assert np.allclose(s2[lit], 2.0 * s1[lit], rtol=1e-12)


def test_higher_diffuse_exponent_never_brightens_beyond_unit_distance():
    # light at z = 1 over a plane at depth 0 keeps every distance >= 1
    scene = flat_scene(17, 17)
    prev = None
    for expo in (1.0, 1.5, 2.0, 3.0):
        light = PointLight(color=(1, 1, 1), position=(0.5, 0.5, 1.0), intensity=1.0,
                           diffuse_exponent=expo)
        cur = shade_single(light, scene).data
        if prev is not None:
            assert np.all(cur <= prev + 1e-12)
        prev = cur


# --------------------------------------------------------------------------
# shade_all properties

def test_empty_light_list_gives_zero_map():
    scene = flat_scene(9, 9)
    out = shade_all([], scene)
    assert out.channels == 3
    assert np.all(out.data == 0.0)


def test_duplicated_light_doubles_exactly():
    scene = flat_scene(9, 9)
    one = shade_all([CENTER_LIGHT], scene).data
    two = shade_all([CENTER_LIGHT, CENTER_LIGHT], scene).data
    assert np.array_equal(two, 2.0 * one)


def test_shade_all_equals_sum_of_singles_exactly():
    scene = random_scene(5)
    lights = random_lights(6, 2)
    combined = shade_all(lights, scene).data
    summed = shade_single(lights[0], scene).data + shade_single(lights[1], scene).data
    assert np.max(np.abs(combined - summed)) == 0.0


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_additivity_of_light_sets(seed):
    scene = random_scene(seed, 24, 24)
    group_a = random_lights(seed + 100, 3)
    group_b = random_lights(seed + 200, 2)
    lhs = shade_all(group_a + group_b, scene).data
    rhs = shade_all(group_a, scene).data + shade_all(group_b, scene).data
    assert np.max(np.abs(lhs - rhs)) <= 1e-6


@pytest.mark.parametrize("seed,k", [(0, 2.0), (1, 0.25), (2, 7.5)])
def test_intensity_homogeneity(seed, k):
    scene = random_scene(seed)
    light = random_lights(seed + 50, 1)[0]
    scaled = PointLight(color=light.color, position=light.position,
                        intensity=k * light.intensity,
                        ellipsoid_ratio=light.ellipsoid_ratio,
                        diffuse_exponent=light.diffuse_exponent)
    s1 = shade_single(light, scene).data
    s2 = shade_single(scaled, scene).data
    lit = s1 > 0
    assert np.allclose(s2[lit], k * s1[lit], rtol=1e-6)


def test_color_linearity_per_channel():
    scene = random_scene(9)
    white = PointLight(color=(1, 1, 1), position=(0.4, 0.3, 0.8), intensity=0.7)
    tinted = PointLight(color=(0.9, 0.5, 0.125), position=(0.4, 0.3, 0.8), intensity=0.7)
    sw = shade_single(white, scene).data
    st = shade_single(tinted, scene).data
    for c, f in enumerate((0.9, 0.5, 0.125)):
        assert np.allclose(st[:, :, c], f * sw[:, :, c], rtol=1e-12, atol=0.0)


@pytest.mark.parametrize("seed", [0, 7, 23])
def test_shading_is_nonnegative(seed):
    scene = random_scene(seed, 20, 20, max_tilt=0.6)
    for light in random_lights(seed + 300, 4, z_range=(0.0, 1.0)):
        assert np.all(shade_single(light, scene).data >= 0.0)


# --------------------------------------------------------------------------
# compose / composite_mask

def test_compose_identity_albedo():
    scene = flat_scene(9, 9)
    shading = shade_all([CENTER_LIGHT], scene)
    out = compose(scene.albedo, shading)
    assert np.array_equal(out.data, shading.data)


def test_compose_zero_shading_absorbs():
    scene = flat_scene(9, 9, albedo=0.7)
    zero = ImageF.from_array(np.zeros((9, 9, 3)))
    assert np.all(compose(scene.albedo, zero).data == 0.0)


def test_compose_scalar_product():
    albedo = ImageF.from_array(np.full((4, 4, 3), 0.5))
    shading = ImageF.from_array(np.full((4, 4, 3), 0.8))
    assert np.allclose(compose(albedo, shading).data, 0.4, rtol=1e-15)


def test_compose_does_not_clamp():
    albedo = ImageF.from_array(np.full((2, 2, 3), 1.0))
    shading = ImageF.from_array(np.full((2, 2, 3), 3.5))
    assert np.all(compose(albedo, shading).data == 3.5)


def test_compose_dimension_mismatch():
    a = ImageF.from_array(np.zeros((4, 4, 3)))
    b = ImageF.from_array(np.zeros((4, 5, 3)))
    with pytest.raises(ValidationError):
        compose(a, b)


def test_composite_mask_extremes_and_midpoint():
    fg = ImageF.from_array(np.full((3, 3, 3), 1.0))
    bg = ImageF.from_array(np.zeros((3, 3, 3)))
    ones = ImageF.from_array(np.ones((3, 3, 1)))
    zeros = ImageF.from_array(np.zeros((3, 3, 1)))
    half = ImageF.from_array(np.full((3, 3, 1), 0.5))
    assert np.array_equal(composite_mask(fg, bg, ones).data, fg.data)
    assert np.array_equal(composite_mask(fg, bg, zeros).data, bg.data)
    assert np.all(composite_mask(fg, bg, half).data == 0.5)


def test_composite_mask_validation():
    fg = ImageF.from_array(np.zeros((3, 3, 3)))
    bg = ImageF.from_array(np.zeros((3, 3, 1)))
    mask = ImageF.from_array(np.zeros((3, 3, 1)))
    with pytest.raises(ValidationError):
        composite_mask(fg, bg, mask)
    bad_mask = ImageF.from_array(np.full((3, 3, 1), 1.5))
    with pytest.raises(ValidationError):
        composite_mask(fg, fg, bad_mask)
