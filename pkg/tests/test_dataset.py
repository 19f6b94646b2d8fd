import numpy as np
import pytest

from anomae.dataset import DatasetManifest, ImageRecord, load_records, split_manifest
from anomae.errors import ValidationError
from anomae.ops import F32
from anomae.pgm import save_pgm


def make_manifest(n_normal, n_anomalous=0, n_unlabeled=0, root="."):
    entries = [(f"n{i}.pgm", "normal") for i in range(n_normal)]
    entries += [(f"a{i}.pgm", "anomalous") for i in range(n_anomalous)]
    entries += [(f"u{i}.pgm", "unlabeled") for i in range(n_unlabeled)]
    return DatasetManifest(root, entries)


def test_image_record_validation():
    ok = ImageRecord("x", np.zeros((1, 8, 8), dtype=F32), "normal")
    assert ok.label == "normal"
    with pytest.raises(ValidationError):
        ImageRecord("x", np.zeros((1, 8, 8), dtype=F32), "weird")
    with pytest.raises(ValidationError):
        ImageRecord("x", np.zeros((1, 4, 8), dtype=F32), "normal")
    with pytest.raises(ValidationError):
        ImageRecord("x", np.full((1, 8, 8), 1.5, dtype=F32), "normal")


def test_manifest_rejects_duplicates_and_bad_labels():
    with pytest.raises(ValidationError):
        DatasetManifest(".", [("a.pgm", "normal"), ("a.pgm", "anomalous")])
    with pytest.raises(ValidationError):
        DatasetManifest(".", [("a.pgm", "positive")])


def test_manifest_save_load_round_trip(tmp_path):
    manifest = make_manifest(2, 1, root=tmp_path)
    path = tmp_path / "manifest.csv"
    manifest.save(path)
    text = path.read_text()
    assert text.startswith("path,label\n")
    assert "\r" not in text
    back = DatasetManifest.load(path)
    assert back.entries == manifest.entries
    assert back.root == tmp_path


def test_manifest_load_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("file,kind\nx.pgm,normal\n")
    with pytest.raises(ValidationError):
        DatasetManifest.load(path)


def test_split_floor_allocation_with_remainder_to_train():
    train, val, test = split_manifest(make_manifest(10), (0.8, 0.1, 0.1), seed=0)
    assert (len(train.entries), len(val.entries), len(test.entries)) == (8, 1, 1)


def test_split_deterministic():
    m = make_manifest(20, 5)
    a = split_manifest(m, (0.6, 0.2, 0.2), seed=3)
    b = split_manifest(m, (0.6, 0.2, 0.2), seed=3)
    assert all(x.entries == y.entries for x, y in zip(a, b))
    c = split_manifest(m, (0.6, 0.2, 0.2), seed=4)
    assert any(x.entries != y.entries for x, y in zip(a, c))


def test_split_keeps_anomalous_out_of_train():
    train, val, test = split_manifest(make_manifest(100, 20), (0.7, 0.15, 0.15), seed=1)
    train_labels = {label for _, label in train.entries}
    assert train_labels == {"normal"}
    assert sum(1 for _, l in train.entries if l == "normal") == 70
    held_anomalous = [e for e in val.entries + test.entries if e[1] == "anomalous"]
    assert len(held_anomalous) == 20


def test_split_partitions_cover_exactly():
    m = make_manifest(33, 7, 2)
    train, val, test = split_manifest(m, (0.5, 0.25, 0.25), seed=9)
    combined = sorted(train.entries + val.entries + test.entries)
    assert combined == sorted(m.entries)
    paths = [p for p, _ in combined]
    assert len(paths) == len(set(paths))


def test_split_requires_normals_and_capacity():
    with pytest.raises(ValidationError):
        split_manifest(make_manifest(0, 5), (0.8, 0.1, 0.1), seed=0)
    with pytest.raises(ValidationError):
        split_manifest(make_manifest(5, 2), (1.0, 0.0, 0.0), seed=0)
    with pytest.raises(ValidationError):
        split_manifest(make_manifest(5), (0.5, 0.2, 0.2), seed=0)  # ratios sum != 1


def test_unlabeled_never_lands_in_train():
    train, val, test = split_manifest(make_manifest(10, 0, 4), (0.5, 0.25, 0.25), seed=2)
    assert all(label == "normal" for _, label in train.entries)
    assert sum(1 for _, l in val.entries + test.entries if l == "unlabeled") == 4


def test_load_records_resizes(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.uniform(0, 1, (1, 32, 32)).astype(F32)
    save_pgm(img, tmp_path / "img.pgm")
    manifest = DatasetManifest(tmp_path, [("img.pgm", "normal")])
    (rec,) = load_records(manifest, image_size=16)
    assert rec.pixels.shape == (1, 16, 16)
    (rec_native,) = load_records(manifest)
    assert rec_native.pixels.shape == (1, 32, 32)
