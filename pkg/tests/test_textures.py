import json

import numpy as np
import pytest

from cartonsynth.errors import SamplingError, TextureLoadError
from cartonsynth.synthetic import texture_patch_quads
from cartonsynth.textures import (
    TextureLibrary,
    check_patch_convention,
    load_texture_library,
    load_texture_manifest,
    make_noise_patch,
    manifest_to_json,
    sample_patch,
)


def entry(pid, count, size=64):
    return {
        "id": pid,
        "image": f"p{pid}.png",
        "surface_count": count,
        "surface_quads": [q.tolist() for q in texture_patch_quads(count, size)],
    }


def manifest(counts):
    entries = []
    for n_faces, count in zip((1, 2, 3), counts):
        for _ in range(count):
            entries.append(entry(len(entries), n_faces))
    return json.dumps({"patches": entries}).encode()


def test_three_single_surface_patches():
    lib = load_texture_manifest(manifest((3, 0, 0)), check_files=False)
    assert [len(lib.subsets[k]) for k in (1, 2, 3)] == [3, 0, 0]


def test_library_sized_like_a_real_collection():
    lib = load_texture_manifest(manifest((269, 51, 23)), check_files=False)
    assert [len(lib.subsets[k]) for k in (1, 2, 3)] == [269, 51, 23]
    assert len(lib) == 343
    assert all(p.surface_count == len(p.surface_quads) for p in lib.patches())


def test_count_mismatch_is_rejected():
    bad = entry(0, 2)
    bad["surface_count"] = 3
    with pytest.raises(TextureLoadError) as err:
        load_texture_manifest(json.dumps({"patches": [bad]}).encode(), check_files=False)
    assert err.value.patch_id == 0


@pytest.mark.parametrize("count", [1, 2, 3])
def test_generated_quads_follow_convention(count):
    check_patch_convention(0, texture_patch_quads(count, 100))


def test_reversed_quad_is_rejected():
    q = texture_patch_quads(1, 10)[0][::-1]
    with pytest.raises(TextureLoadError):
        check_patch_convention(0, [q])


def test_two_face_quads_must_share_first_edge():
    q0, q1 = texture_patch_quads(2, 10)
    with pytest.raises(TextureLoadError):
        check_patch_convention(0, [q0, np.roll(q1, 1, axis=0)])


def test_missing_image_and_duplicate_id(tmp_path):
    with pytest.raises(TextureLoadError, match="not found"):
        load_texture_manifest(manifest((1, 0, 0)), tmp_path)
    doc = json.dumps({"patches": [entry(4, 1), entry(4, 1)]}).encode()
    with pytest.raises(TextureLoadError, match="duplicate"):
        load_texture_manifest(doc, check_files=False)


def test_unreadable_manifest():
    with pytest.raises(TextureLoadError):
        load_texture_manifest(b"{not json")
    with pytest.raises(TextureLoadError):
        load_texture_manifest(b'{"items": []}')


def test_written_library_round_trips(texture_dir):
    lib, path = texture_dir
    loaded = load_texture_library(path)
    assert [p.id for p in loaded.patches()] == [p.id for p in lib.patches()]
    assert loaded.subsets[3][0].image().shape == (96, 96, 3)
    again = load_texture_manifest(
        json.dumps(manifest_to_json(loaded, path.parent)).encode(), path.parent
    )
    assert [p.image_path for p in again.patches()] == [p.image_path for p in loaded.patches()]


def test_sampling_is_uniform_within_subset():
    lib = load_texture_manifest(manifest((269, 51, 23)), check_files=False)
    rng = np.random.default_rng(5)
    n = 100_000
    picks = [sample_patch(lib, 1, rng) for _ in range(n)]
    assert all(p.surface_count == 1 for p in picks)
    freq = np.bincount([p.id for p in picks], minlength=269)
    p = 1 / 269
    sigma = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(freq - n * p) < 5 * sigma)


def test_single_patch_subset_always_returns_it():
    lib = load_texture_manifest(manifest((0, 0, 1)), check_files=False)
    rng = np.random.default_rng(0)
    assert {sample_patch(lib, 3, rng).id for _ in range(50)} == {0}


def test_empty_subset_cannot_be_sampled():
    with pytest.raises(SamplingError):
        sample_patch(TextureLibrary(), 1, np.random.default_rng(0))


def test_noise_patch_statistics():
    noise = make_noise_patch(256, 256, np.random.default_rng(1))
    assert noise.shape == (256, 256, 3) and noise.dtype == np.uint8
    means = noise.reshape(-1, 3).mean(axis=0)
    assert np.all((120 <= means) & (means <= 135))
    assert noise.min() == 0 and noise.max() == 255
    assert make_noise_patch(1, 1, np.random.default_rng(2)).shape == (1, 1, 3)


def test_noise_patch_is_deterministic():
    a = make_noise_patch(64, 64, np.random.default_rng(9))
    b = make_noise_patch(64, 64, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)
