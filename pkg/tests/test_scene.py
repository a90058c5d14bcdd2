import numpy as np
import pytest
import scipy.ndimage

from tdi import scene
from tdi.config import SimConfig


CFG = SimConfig()


def render_single(sil, x=0.0, z=2.0, mirrored=False, background=None, cfg=CFG):
    background = background or scene.uniform_background()
    placement = scene.Placement(sil, x=x, z=z, mirrored=mirrored)
    return scene.render(scene.Scene(background, [placement]), cfg)


# ---------------------------------------------------------------------------
# silhouettes


def test_generate_silhouettes_deterministic():
    a = scene.generate_silhouettes(10, seed=7)
    b = scene.generate_silhouettes(10, seed=7)
    assert len(a) == 10
    for s1, s2 in zip(a, b):
        assert np.array_equal(s1.mask, s2.mask)
        assert s1.native_height_m == s2.native_height_m


def test_generate_silhouettes_connected_and_nonempty():
    for sil in scene.generate_silhouettes(10, seed=0):
        assert sil.mask.any()
        _, n_components = scipy.ndimage.label(sil.mask)
        assert n_components == 1
        assert 0.5 < sil.native_height_m < 2.5


def test_generate_silhouettes_distinct_across_seeds():
    a = scene.generate_silhouettes(10, seed=7)
    b = scene.generate_silhouettes(10, seed=8)
    assert any(not np.array_equal(s1.mask, s2.mask) for s1, s2 in zip(a, b))


def test_generate_silhouettes_vary_within_a_seed():
    sils = scene.generate_silhouettes(10, seed=3)
    masks = [s.mask.tobytes() for s in sils]
    assert len(set(masks)) > 1


def test_generate_silhouettes_rejects_bad_count():
    with pytest.raises(ValueError):
        scene.generate_silhouettes(0, seed=1)


def test_silhouette_validation():
    with pytest.raises(ValueError):
        scene.Silhouette(id=0, mask=np.zeros((4, 4), bool), native_height_m=1.7)
    with pytest.raises(ValueError):
        scene.Silhouette(id=0, mask=np.ones((4, 4), bool), native_height_m=0.0)


# ---------------------------------------------------------------------------
# scale factor


def test_scale_factor_reference_points():
    assert scene.scale_factor(2.0) == 1.0
    assert scene.scale_factor(4.0) == 0.5


def test_scale_factor_decreases_to_zero():
    values = [scene.scale_factor(d) for d in (1.0, 2.0, 5.0, 50.0, 5e6)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] < 1e-6


def test_scale_factor_rejects_nonpositive():
    for d in (0.0, -1.0):
        with pytest.raises(ValueError):
            scene.scale_factor(d)


# ---------------------------------------------------------------------------
# rendering


def test_render_empty_scene_is_wall():
    img = scene.render(scene.Scene(scene.uniform_background(4.0)), CFG)
    assert img.depth_m.shape == (64, 64)
    assert np.all(img.depth_m == 4.0)
    assert np.all(img.reflectance == 1.0)


def test_render_occlusion_rule():
    sil = scene.generate_silhouettes(1, seed=2)[0]
    placement = scene.Placement(sil, z=2.0, reflectivity=1.5)
    img = scene.render(scene.Scene(scene.uniform_background(4.0), [placement]), CFG)
    footprint = scene.placement_footprint(placement, CFG)
    assert footprint.any()
    assert np.all(img.depth_m[footprint] == 2.0)
    assert np.all(img.depth_m[~footprint] == 4.0)
    assert np.all(img.reflectance[footprint] == 1.5)
    assert np.all(img.reflectance[~footprint] == 1.0)


def test_render_nearest_surface_wins_any_order():
    sils = scene.generate_silhouettes(2, seed=4)
    near = scene.Placement(sils[0], x=0.1, z=1.5)
    far = scene.Placement(sils[1], x=-0.1, z=3.0)
    bg = scene.default_background()
    img_ab = scene.render(scene.Scene(bg, [near, far]), CFG)
    img_ba = scene.render(scene.Scene(bg, [far, near]), CFG)
    assert np.array_equal(img_ab.depth_m, img_ba.depth_m)
    assert np.array_equal(img_ab.reflectance, img_ba.reflectance)


def test_render_footprint_scaling_law():
    # footprint area should follow (2/d)^2 within rasterization error
    for sil in scene.generate_silhouettes(3, seed=7):
        c2 = scene.placement_footprint(scene.Placement(sil, z=2.0), CFG).sum()
        c4 = scene.placement_footprint(scene.Placement(sil, z=4.0), CFG).sum()
        ratio = c2 / c4
        assert abs(ratio - 4.0) <= 0.4, f"sil {sil.id}: ratio {ratio}"


def test_render_scaling_uses_3d_distance():
    # an off-axis placement is farther away than its depth alone implies
    sil = scene.generate_silhouettes(1, seed=9)[0]
    on_axis = scene.placement_footprint(scene.Placement(sil, x=0.0, z=3.0), CFG).sum()
    off_axis = scene.placement_footprint(scene.Placement(sil, x=1.4, z=3.0), CFG).sum()
    assert 0 < off_axis < on_axis


def test_render_fully_outside_frame_is_absent():
    sil = scene.generate_silhouettes(1, seed=1)[0]
    img = render_single(sil, x=50.0, z=2.0)
    assert np.all(img.depth_m == 4.0)


def test_render_rejects_out_of_range_depth():
    sil = scene.generate_silhouettes(1, seed=1)[0]
    for z in (0.5, 4.5):
        with pytest.raises(ValueError):
            render_single(sil, z=z)


def test_render_rejects_wall_beyond_z_max():
    with pytest.raises(ValueError):
        scene.render(scene.Scene(scene.uniform_background(5.0)), CFG)


def test_structured_background_box_depths():
    img = scene.render(scene.Scene(scene.default_background()), CFG)
    depths = set(np.unique(img.depth_m))
    assert depths == {1.5, 2.5, 3.2, 4.0}


def test_mirror_involution():
    sil = scene.generate_silhouettes(1, seed=6)[0]
    sc = scene.Scene(scene.default_background(),
                     [scene.Placement(sil, x=0.4, z=2.5)])
    twice = sc.mirror().mirror()
    a = scene.render(sc, CFG)
    b = scene.render(twice, CFG)
    assert np.array_equal(a.depth_m, b.depth_m)
    assert np.array_equal(a.reflectance, b.reflectance)


def test_mirrored_scene_renders_as_exact_flip():
    sil = scene.generate_silhouettes(1, seed=6)[0]
    sc = scene.Scene(scene.uniform_background(),
                     [scene.Placement(sil, x=0.7, z=2.0)])
    a = scene.render(sc, CFG)
    b = scene.render(sc.mirror(), CFG)
    assert np.array_equal(b.depth_m, np.fliplr(a.depth_m))


# ---------------------------------------------------------------------------
# augmentation


def test_augment_default_counts():
    sils = scene.generate_silhouettes(10, seed=0)
    scenes = scene.augment(sils, scene.default_background(), CFG)
    assert len(scenes) == 4000


def test_augment_minimal_product_is_mirror_pair():
    sils = scene.generate_silhouettes(1, seed=0)
    scenes = scene.augment(sils, scene.uniform_background(), CFG,
                           depth_steps=1, lateral_steps=1)
    assert len(scenes) == 2
    assert scenes[0].placements[0].mirrored is False
    assert scenes[1].placements[0].mirrored is True


def test_augment_deterministic():
    sils = scene.generate_silhouettes(2, seed=3)
    a = scene.augment(sils, scene.default_background(), CFG, 3, 4)
    b = scene.augment(sils, scene.default_background(), CFG, 3, 4)
    assert len(a) == len(b) == 2 * 3 * 4 * 2
    for sa, sb in zip(a, b):
        pa, pb = sa.placements[0], sb.placements[0]
        assert (pa.x, pa.y, pa.z, pa.mirrored, pa.silhouette_id) == \
               (pb.x, pb.y, pb.z, pb.mirrored, pb.silhouette_id)


def test_augment_spans_depth_range():
    sils = scene.generate_silhouettes(1, seed=0)
    scenes = scene.augment(sils, scene.uniform_background(), CFG)
    zs = sorted({s.placements[0].z for s in scenes})
    assert zs[0] == CFG.z_min and zs[-1] == CFG.z_max and len(zs) == 10


def test_augment_requires_silhouettes():
    with pytest.raises(ValueError):
        scene.augment([], scene.uniform_background(), CFG)


# ---------------------------------------------------------------------------
# normalization


def test_normalize_image_uniform_wall():
    img = scene.render(scene.Scene(scene.uniform_background(4.0)), CFG)
    vec = scene.normalize_image(img, 4.0)
    assert vec.shape == (4096,)
    assert np.all(vec == 1.0)


def test_normalize_image_empty():
    img = scene.DepthImage(np.zeros((8, 8)), np.zeros((8, 8)))
    assert np.all(scene.normalize_image(img, 4.0) == 0.0)


def test_normalize_image_row_major_and_bounded():
    depth = np.zeros((8, 8))
    depth[0, 1] = 2.0
    img = scene.DepthImage(depth, np.ones((8, 8)))
    vec = scene.normalize_image(img, 4.0)
    assert vec[1] == 0.5
    assert vec.min() >= 0.0 and vec.max() <= 1.0


def test_normalize_image_validation():
    img = scene.DepthImage(np.full((8, 8), 2.0), np.ones((8, 8)))
    with pytest.raises(ValueError):
        scene.normalize_image(img, 0.0)
    with pytest.raises(ValueError):
        scene.normalize_image(img, 1.0)  # depths exceed z_max


def test_background_rejects_object_behind_wall():
    with pytest.raises(ValueError):
        scene.Background(wall_depth_m=4.0,
                         objects=[scene.Box(0.0, 0.0, 4.5, 1.0, 1.0)])
