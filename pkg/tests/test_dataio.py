import json

import numpy as np
import pytest

from sicerep.dataio import (bind_model, dump_matrix, ingest,
                            load_manifest, load_matrix, load_representation,
                            model_from_json, model_to_json, read_jsonl,
                            resolve_split, save_representations, write_jsonl)
from sicerep.errors import FormatError, ModelMismatch, NotFound
from sicerep.represent import FrameFeatureSequence, sice_hierarchy
from sicerep.svm import predict_batch, train_multiclass


def write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def minimal_manifest(tmp_path, mode="raw-vectors", joints=None, split=None):
    lines = [
        {"id": "a1", "label": "x", "frames": [[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]]},
        {"id": "a2", "label": "y", "frames": [[2.0, 1.0], [1.0, 2.0]]},
    ]
    data = tmp_path / "data.jsonl"
    write(data, "\n".join(json.dumps(l) for l in lines) + "\n")
    doc = {"feature_mode": mode, "sequences": "data.jsonl"}
    if joints is not None:
        doc["joints"] = joints
    if split is not None:
        doc["split"] = split
    manifest = tmp_path / "manifest.json"
    write(manifest, json.dumps(doc))
    return manifest


def test_ingest_minimal_manifest(tmp_path):
    dataset = ingest(minimal_manifest(tmp_path))
    assert [s.sample_id for s in dataset.sequences] == ["a1", "a2"]
    assert dataset.sequences[0].dim == 2
    assert dataset.sequences[0].length == 3
    assert dataset.labels() == ["x", "y"]


def test_ingest_reports_file_and_line(tmp_path):
    data = tmp_path / "data.jsonl"
    write(data, json.dumps({"id": "a", "label": "x",
                            "frames": [[1.0], [2.0, 3.0]]}) + "\n")
    manifest = tmp_path / "m.json"
    write(manifest, json.dumps({"feature_mode": "raw-vectors",
                                "sequences": "data.jsonl"}))
    with pytest.raises(FormatError, match=r"data\.jsonl:1"):
        ingest(manifest)


def test_jsonl_rejects_nonfinite_and_missing_keys(tmp_path):
    p = tmp_path / "bad.jsonl"
    write(p, '{"id": "a", "label": "x", "frames": [[1.0], [null]]}\n')
    with pytest.raises(FormatError):
        read_jsonl(p)
    write(p, '{"id": "a", "frames": [[1.0]]}\n')
    with pytest.raises(FormatError, match="label"):
        read_jsonl(p)
    write(p, "not json\n")
    with pytest.raises(FormatError, match="invalid JSON"):
        read_jsonl(p)


def test_manifest_rejects_duplicates_and_bad_split(tmp_path):
    data = tmp_path / "d.jsonl"
    rec = {"id": "a", "label": "x", "frames": [[0.0], [1.0]]}
    write(data, json.dumps(rec) + "\n" + json.dumps(rec) + "\n")
    manifest = tmp_path / "m.json"
    write(manifest, json.dumps({"feature_mode": "raw-vectors", "sequences": "d.jsonl"}))
    with pytest.raises(FormatError, match="duplicate"):
        load_manifest(manifest)
    m2 = minimal_manifest(tmp_path, split={"train": ["a1"], "test": ["a1"]})
    with pytest.raises(FormatError, match="overlap"):
        load_manifest(m2)
    m3 = minimal_manifest(tmp_path, split={"train": ["a1"], "test": ["zz"]})
    with pytest.raises(FormatError, match="unknown"):
        load_manifest(m3)


def test_skeleton_csv_ingestion(tmp_path):
    rng = np.random.default_rng(0)
    frames = rng.standard_normal((6, 60))  # 20 joints
    csv = tmp_path / "s1.csv"
    write(csv, "\n".join(",".join(f"{v:.10g}" for v in row) for row in frames) + "\n")
    manifest = tmp_path / "m.json"
    write(manifest, json.dumps({
        "feature_mode": "coordinates", "joints": 20,
        "samples": [{"id": "s1", "label": "walk", "path": "s1.csv"}]}))
    dataset = ingest(manifest)
    assert dataset.sequences[0].dim == 60
    assert dataset.sequences[0].length == 6
    # velocity mode drops boundary frames and doubles the feature width
    write(manifest, json.dumps({
        "feature_mode": "velocity", "joints": 20,
        "samples": [{"id": "s1", "label": "walk", "path": "s1.csv"}]}))
    dataset = ingest(manifest)
    assert dataset.sequences[0].dim == 120
    assert dataset.sequences[0].length == 4


def test_skeleton_csv_validates_width(tmp_path):
    csv = tmp_path / "bad.csv"
    write(csv, "1.0,2.0\n3.0,4.0\n")
    manifest = tmp_path / "m.json"
    write(manifest, json.dumps({
        "feature_mode": "coordinates", "joints": 20,
        "samples": [{"id": "s1", "label": "w", "path": "bad.csv"}]}))
    with pytest.raises(FormatError, match="columns"):
        ingest(manifest)


def test_write_jsonl_roundtrip(tmp_path):
    seqs = [FrameFeatureSequence([[0.5, 1.5], [2.5, 3.5]], label="a", sample_id="s2"),
            FrameFeatureSequence([[1.0, 2.0], [3.0, 4.0]], label="b", sample_id="s1")]
    path = tmp_path / "out.jsonl"
    write_jsonl(path, seqs)
    rows = read_jsonl(path)
    assert [r[0] for r in rows] == ["s1", "s2"]  # sorted by id
    assert np.array_equal(rows[1][2], seqs[0].frames)


def test_resolve_split_explicit_and_odd_even(tmp_path):
    dataset = ingest(minimal_manifest(
        tmp_path, split={"train": ["a2"], "test": ["a1"]}))
    train, test = resolve_split(dataset)
    assert train == ("a2",) and test == ("a1",)
    train, test = resolve_split(dataset, ("odd-even",))
    assert train == ("a1",) and test == ("a2",)
    with pytest.raises(NotFound):
        resolve_split(dataset, ("explicit", ("zz",), ("a1",)))


def test_dump_matrix_roundtrips_exactly(tmp_path):
    rng = np.random.default_rng(1)
    mat = rng.standard_normal((7, 7)) * np.exp(rng.uniform(-20, 20, (7, 7)))
    path = tmp_path / "m.csv"
    dump_matrix(mat, path)
    back = load_matrix(path)
    assert np.array_equal(back, mat)


def test_dump_matrix_identity(tmp_path):
    path = tmp_path / "eye.csv"
    dump_matrix(np.eye(3), path)
    text = path.read_text()
    assert text.splitlines()[0] == "1,0,0"


def test_representation_store_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    hiers = []
    for k in range(3):
        seq = FrameFeatureSequence(rng.standard_normal((10, 4)), sample_id=f"s{k}")
        hiers.append(sice_hierarchy(seq, grid=[0.1, 0.4], tol=1e-7, sample_id=f"s{k}"))
    store = tmp_path / "reps.npz"
    save_representations(store, hiers)
    got = load_representation(store, "s1", 1)
    assert np.array_equal(got, hiers[1].levels[1].values)
    # the stored sparsity pattern is exactly the solver's
    assert np.array_equal(got == 0.0, hiers[1].levels[1].values == 0.0)
    with pytest.raises(NotFound):
        load_representation(store, "nope", 0)
    with pytest.raises(NotFound):
        load_representation(store, "s1", 5)


def separable(seed=0):
    rng = np.random.default_rng(seed)
    hiers, labels = [], []
    for c in range(2):
        for k in range(4):
            seq = FrameFeatureSequence(rng.standard_normal((14, 4)) * (1 + 0.8 * c),
                                       sample_id=f"c{c}-{k}")
            hiers.append(sice_hierarchy(seq, grid=[0.05, 0.3], tol=1e-7,
                                        sample_id=f"c{c}-{k}"))
            labels.append(f"class{c}")
    return hiers, labels


def test_model_json_roundtrip_preserves_predictions():
    hiers, labels = separable()
    model = train_multiclass(hiers, labels, "beta", 10.0, 0.8)
    text = model_to_json(model, pipeline={"representation": "hierarchy"})
    loaded, pipeline = model_from_json(text)
    assert pipeline["representation"] == "hierarchy"
    assert loaded.hierarchies is None
    bound = bind_model(loaded, {h.sample_id: h for h in hiers})
    # 100 query samples predict identically through the loaded model
    rng = np.random.default_rng(9)
    queries = []
    for k in range(100):
        seq = FrameFeatureSequence(rng.standard_normal((10, 4)) * (1 + (k % 3)),
                                   sample_id=f"q{k}")
        queries.append(sice_hierarchy(seq, grid=[0.05, 0.3], tol=1e-6,
                                      sample_id=f"q{k}"))
    before = [r[0] for r in predict_batch(model, queries)]
    after = [r[0] for r in predict_batch(bound, queries)]
    assert before == after
    # weights survive exactly
    assert bound.weights.beta == model.weights.beta


def test_model_json_rejects_bad_version():
    with pytest.raises(FormatError):
        model_from_json('{"format_version": 999}')


def test_bind_model_validates_ids_and_shapes():
    hiers, labels = separable(seed=1)
    model = train_multiclass(hiers, labels, "emk", 10.0, 0.8)
    text = model_to_json(model)
    loaded, _ = model_from_json(text)
    with pytest.raises(ModelMismatch):
        bind_model(loaded, {})
    from sicerep.experiment import slice_level
    sliced = {h.sample_id: slice_level(h, 0) for h in hiers}
    with pytest.raises(ModelMismatch):
        bind_model(loaded, sliced)
