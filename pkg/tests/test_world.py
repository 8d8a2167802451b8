import math

import numpy as np
import pytest

from conftest import sha_array
from golden_values import GOLDEN

from pacer import textures, world
from pacer.world import Pose, generate_world, label_window, observe, render


def test_generate_world_coverage(golden_world):
    counts = np.bincount(golden_world.labels.ravel(), minlength=5)
    assert counts.min() >= 655  # 1% of 256*256
    assert golden_world.labels.shape == (256, 256)
    assert set(np.unique(golden_world.labels)) == set(range(5))


def test_generate_world_deterministic(golden_world):
    again = generate_world(1, 256, 256, 5)
    assert np.array_equal(golden_world.labels, again.labels)


def test_golden_histogram(golden_world):
    counts = np.bincount(golden_world.labels.ravel(), minlength=5)
    assert counts.tolist() == GOLDEN["world_histogram"]


def test_generate_world_parameter_errors():
    with pytest.raises(ValueError):
        generate_world(1, 256, 256, 1)
    with pytest.raises(ValueError):
        generate_world(1, 32, 256, 3)
    with pytest.raises(RuntimeError, match="coverage"):
        generate_world(1, 64, 64, 5, min_coverage=0.5, max_attempts=5)


def test_render_determinism_and_locality(golden_world):
    big = render(golden_world, (40, 50, 32, 32))
    one = render(golden_world, (51, 62, 1, 1))
    assert np.array_equal(big.pixels[12, 11], one.pixels[0, 0])
    again = render(golden_world, (40, 50, 32, 32))
    assert np.array_equal(big.pixels, again.pixels)


def test_render_same_label_same_coords_identical(striped_world):
    img = render(striped_world, (0, 0, 8, 8))
    ref = textures.evaluate(striped_world.texture_assignment[0], np.arange(8), np.zeros(8, int))
    assert np.array_equal(img.pixels[0], ref.astype(np.float32))


def test_render_out_of_bounds(golden_world):
    with pytest.raises(ValueError):
        render(golden_world, (250, 0, 16, 16))


def test_full_render_golden_checksum(golden_world):
    img = golden_world.prerender()
    assert sha_array(img) == GOLDEN["render_full_sha"]


def test_observe_axis_aligned_equals_crop(golden_world):
    pose = Pose(128.5, 100.5, 0.0)
    obs = observe(golden_world, pose, (64, 64))
    crop = render(golden_world, (97, 69, 64, 64))
    assert obs.valid.all()
    assert np.allclose(obs.pixels, crop.pixels, atol=1e-6)


def test_observe_half_turn_is_180_rotation(golden_world):
    pose = Pose(128.5, 100.5, 0.0)
    a = observe(golden_world, pose, (64, 64)).pixels
    b = observe(golden_world, Pose(128.5, 100.5, math.pi), (64, 64)).pixels
    assert np.allclose(b, a[::-1, ::-1], atol=1e-6)


def test_observe_diagonal_golden_checksum(golden_world):
    obs = observe(golden_world, Pose(128.5, 100.5, math.pi / 4), (64, 64))
    assert sha_array(obs.pixels) == GOLDEN["observe_45_sha"]


def test_observe_out_of_bounds_filled_and_flagged(golden_world):
    obs = observe(golden_world, Pose(2.5, 128.5, 0.0), (64, 64))
    assert not obs.valid.all()
    assert np.all(obs.pixels[~obs.valid] == 0.0)
    assert obs.valid[:, -1].all()  # interior side of the window is fine


def test_observe_pose_outside_world(golden_world):
    with pytest.raises(ValueError):
        observe(golden_world, Pose(-3.0, 10.0, 0.0))


def test_label_window_constant_on_single_label_region(striped_world):
    labs = label_window(striped_world, Pose(40.5, 90.5, 0.0), (32, 32))
    assert (labs == 0).all()


def test_label_window_sentinel(golden_world):
    labs = label_window(golden_world, Pose(2.5, 128.5, 0.0), (64, 64))
    assert (labs[:, :20] == -1).any()
    assert labs.min() == -1


def test_label_window_golden(golden_world):
    labs = label_window(golden_world, Pose(128.5, 100.5, 0.0), (64, 64))
    assert np.array_equal(labs, golden_world.labels[69:133, 97:161])
    assert sha_array(labs) == GOLDEN["label_window_sha"]


@pytest.mark.parametrize("theta", [0.0, math.pi / 2, math.pi, 3 * math.pi / 2])
def test_observation_label_consistency_right_angles(golden_world, theta):
    """Every visible pixel must match its label's texture at grid-aligned
    headings (tolerance 2/255 covers interpolation fuzz)."""
    pose = Pose(120.5, 97.5, theta)
    obs = observe(golden_world, pose, (48, 48))
    labs = label_window(golden_world, pose, (48, 48))
    wx, wy = world._window_world_coords(pose, (48, 48))
    xi = np.round(wx).astype(int)
    yi = np.round(wy).astype(int)
    ok = labs >= 0
    for lab in np.unique(labs[ok]):
        m = ok & (labs == lab)
        spec = golden_world.texture_assignment[int(lab)]
        expected = textures.evaluate(spec, xi[m], yi[m])
        assert np.abs(obs.pixels[m] - expected).max() <= 2 / 255


def test_world_json_roundtrip(tmp_path, golden_world):
    path = tmp_path / "w.json"
    world.save_world(golden_world, path)
    again = world.load_world(path)
    assert np.array_equal(again.labels, golden_world.labels)
    assert {k: v.id for k, v in again.texture_assignment.items()} == {
        k: v.id for k, v in golden_world.texture_assignment.items()
    }


def test_corridor_world_roundtrip(tmp_path):
    w, start, goal = world.generate_corridor_world(201, 128, 128, 3, corridor_labels=(2, 0))
    assert w.labels[start[1], start[0]] == 0
    assert w.labels[goal[1], goal[0]] == 0
    path = tmp_path / "c.json"
    world.save_world(w, path)
    again = world.load_world(path)
    assert np.array_equal(again.labels, w.labels)


def test_with_textures_shares_layout_and_changes_pixels(small_world):
    _, synth = textures.default_texture_sets()
    view = small_world.with_textures({1: synth[0]})
    assert view.labels is small_world.labels
    a = render(small_world, (0, 0, 96, 96)).pixels
    b = render(view, (0, 0, 96, 96)).pixels
    changed = small_world.labels == 1
    assert not np.allclose(a[changed], b[changed])
    assert np.array_equal(a[~changed], b[~changed])
