import numpy as np
import pytest

from protoseg import generate
from protoseg.fusion import fuse_attention, fuse_features
from protoseg.assign import segment_image
from protoseg.synth import _prototypes, generate_scene, write_fixture
from protoseg.tensor_store import load_manifest, read_tensor


def test_determinism_byte_identical():
    a = generate(seed=3, height=32, width=32, dim=8, classes=3, noise_sigma=0.1)
    b = generate(seed=3, height=32, width=32, dim=8, classes=3, noise_sigma=0.1)
    for la, lb in zip(a[0].layers, b[0].layers):
        assert la.tobytes() == lb.tobytes()
    for ga, gb in zip(a[1].maps, b[1].maps):
        for ma, mb in zip(ga, gb):
            assert ma.tobytes() == mb.tobytes()
    assert a[2].labels.tobytes() == b[2].labels.tobytes()


def test_different_seeds_differ():
    a = generate(seed=1, height=16, width=16, dim=8, classes=2, noise_sigma=0.1)
    b = generate(seed=2, height=16, width=16, dim=8, classes=2, noise_sigma=0.1)
    assert not np.array_equal(a[0].layers[0], b[0].layers[0])


def test_prototype_cosine_bound(rng):
    for classes, dim in [(2, 4), (5, 8), (16, 16)]:
        protos = _prototypes(rng, classes, dim)
        gram = protos @ protos.T
        off = gram - np.diag(np.diagonal(gram))
        assert np.abs(off).max() <= 0.5 + 1e-9
        assert np.allclose(np.diagonal(gram), 1.0)


def test_prototypes_reject_too_many_classes(rng):
    with pytest.raises(ValueError):
        _prototypes(rng, 5, 4)


def test_scene_invariant_enforced(rng):
    scene = generate_scene(rng, 16, 16, 8, 4, 0.0, "voronoi")
    assert scene.region.shape == (16, 16)
    assert set(np.unique(scene.region)) == {0, 1, 2, 3}


@pytest.mark.parametrize("layout", ["stripes", "blobs", "voronoi"])
def test_layouts_cover_all_classes(layout, rng):
    scene = generate_scene(rng, 40, 40, 8, 4, 0.0, layout)
    assert set(np.unique(scene.region)) == {0, 1, 2, 3}


def test_unknown_layout_rejected():
    with pytest.raises(ValueError, match="layout"):
        generate(seed=0, height=8, width=8, dim=4, classes=2, noise_sigma=0.0, layout="spiral")


def test_noiseless_stripes_recovered_exactly():
    layers, att, gt = generate(
        seed=5, height=64, width=64, dim=12, classes=2, noise_sigma=0.0, layout="stripes"
    )
    f = fuse_features(layers, (64, 64))
    seg = segment_image(f, fuse_attention(att, (64, 64)), gt.vocabulary)
    assert np.array_equal(seg.labels, gt.labels)


def test_noisy_voronoi_high_accuracy():
    layers, att, gt = generate(
        seed=9, height=64, width=64, dim=16, classes=4, noise_sigma=0.05, layout="voronoi"
    )
    f = fuse_features(layers, (64, 64))
    seg = segment_image(f, fuse_attention(att, (64, 64)), gt.vocabulary)
    assert (seg.labels == gt.labels).mean() >= 0.99


def test_layer_sizes_and_channel_split():
    layers, att, gt = generate(seed=0, height=64, width=64, dim=16, classes=3, noise_sigma=0.0)
    sizes = [layer.shape[-1] for layer in layers.layers]
    assert sizes == [8, 16, 32]
    assert sum(layer.shape[0] for layer in layers.layers) == 16
    assert all(len(group) == 2 for group in att.maps)  # 8 and 16 taps


def test_write_fixture_round_trips(tmp_path):
    layers, att, gt = generate(seed=2, height=32, width=32, dim=8, classes=2, noise_sigma=0.01)
    manifest_path = tmp_path / "manifest.jsonl"
    write_fixture(tmp_path, manifest_path, "img0", layers, att, gt)
    manifest = load_manifest(manifest_path)
    entry = manifest.entries[0]
    assert entry.image_id == "img0"
    assert {ref.height for ref in entry.features} == {8, 16, 32}
    assert {ref.height for ref in entry.attention} == {8, 16}
    dims, values = read_tensor(tmp_path / entry.features[0].path)
    assert dims == list(layers.layers[0].shape)
    assert np.allclose(values, layers.layers[0].astype(np.float32))
