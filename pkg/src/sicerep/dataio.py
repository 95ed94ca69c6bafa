"""Dataset manifests, sequence files, matrix dumps, model serialization.

On-disk formats:

* sequences: JSON Lines, one sample per line:
  ``{"id": str, "label": str, "frames": [[float, ...], ...]}``
* skeleton alternative: CSV with m rows x 3J columns, referenced from the
  manifest by path
* manifest: one JSON document naming the feature mode, the samples, and an
  optional train/test split
* model: one JSON document with an embedded format version
* matrix dumps: row-major CSV rendered with 17 significant digits, which
  round-trips float64 exactly
"""

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ModelMismatch, NotFound
from .integration import WeightsBeta, WeightsM
from .represent import (FrameFeatureSequence, SkeletonSequence,
                        coordinate_features, velocity_features)
from .svm import PairDual, TrainedClassifier

MODEL_FORMAT_VERSION = 1
FEATURE_MODES = ("raw-vectors", "coordinates", "velocity")


@dataclass(frozen=True)
class DatasetManifest:
    feature_mode: str
    joints: int | None
    samples: tuple            # (sample_id, label, frames-or-path) triples
    split: object             # None, ("odd-even",), or ("explicit", train, test)
    base_dir: str


@dataclass(frozen=True)
class Dataset:
    sequences: tuple          # FrameFeatureSequence, ordered by sample_id
    manifest: DatasetManifest

    def by_id(self):
        return {s.sample_id: s for s in self.sequences}

    def labels(self):
        return [s.label for s in self.sequences]


def _require(cond, where, msg):
    if not cond:
        raise FormatError(f"{where}: {msg}")


def _check_frames(frames, where):
    _require(isinstance(frames, list) and len(frames) >= 1, where,
             "frames must be a nonempty list of rows")
    width = None
    for r, row in enumerate(frames):
        _require(isinstance(row, list) and row, where, f"frame {r} is not a list")
        if width is None:
            width = len(row)
        _require(len(row) == width, where,
                 f"frame {r} has {len(row)} values, expected {width}")
        for v in row:
            _require(isinstance(v, (int, float)) and not isinstance(v, bool)
                     and math.isfinite(v), where, f"frame {r} has a non-finite value")
    return np.array(frames, dtype=np.float64)


def read_jsonl(path):
    """Parse a JSON Lines sequence file into (id, label, frames) triples."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{where}: invalid JSON ({exc.msg})") from exc
            _require(isinstance(rec, dict), where, "each line must be an object")
            for key in ("id", "label", "frames"):
                _require(key in rec, where, f"missing key {key!r}")
            _require(isinstance(rec["id"], str) and rec["id"], where,
                     "id must be a nonempty string")
            _require(isinstance(rec["label"], str) and rec["label"], where,
                     "label must be a nonempty string")
            frames = _check_frames(rec["frames"], where)
            out.append((rec["id"], rec["label"], frames))
    return out


def write_jsonl(path, sequences):
    """Write FrameFeatureSequence records as JSON Lines (sorted by id)."""
    with open(path, "w", encoding="utf-8") as fh:
        for seq in sorted(sequences, key=lambda s: s.sample_id):
            rec = {"id": seq.sample_id, "label": seq.label,
                   "frames": [[float(v) for v in row] for row in seq.frames]}
            fh.write(json.dumps(rec) + "\n")


def read_skeleton_csv(path, joints):
    """Read an m x 3J CSV of joint coordinates."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            cells = line.split(",")
            _require(len(cells) == 3 * joints, where,
                     f"expected {3 * joints} columns, got {len(cells)}")
            try:
                vals = [float(c) for c in cells]
            except ValueError as exc:
                raise FormatError(f"{where}: non-numeric value") from exc
            _require(all(math.isfinite(v) for v in vals), where,
                     "non-finite value")
            rows.append(vals)
    _require(len(rows) >= 2, path, "need at least 2 frames")
    return np.array(rows, dtype=np.float64)


def load_manifest(path):
    """Parse and validate a dataset manifest document."""
    base_dir = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg})") from exc
    _require(isinstance(doc, dict), path, "manifest must be a JSON object")
    mode = doc.get("feature_mode", "raw-vectors")
    _require(mode in FEATURE_MODES, path,
             f"feature_mode must be one of {FEATURE_MODES}, got {mode!r}")
    joints = doc.get("joints")
    if mode in ("coordinates", "velocity"):
        _require(isinstance(joints, int) and joints >= 1, path,
                 "skeleton modes require a positive integer 'joints'")

    samples = []
    seen = set()

    def add(sid, label, payload, where):
        _require(isinstance(sid, str) and sid, where, "id must be a nonempty string")
        _require(isinstance(label, str) and label, where,
                 "label must be a nonempty string")
        _require(sid not in seen, where, f"duplicate sample id {sid!r}")
        seen.add(sid)
        samples.append((sid, label, payload))

    seq_path = doc.get("sequences")
    if seq_path is not None:
        full = os.path.join(base_dir, seq_path)
        _require(os.path.exists(full), path, f"sequences file not found: {seq_path}")
        for sid, label, frames in read_jsonl(full):
            add(sid, label, frames, full)

    for k, rec in enumerate(doc.get("samples", [])):
        where = f"{path}:samples[{k}]"
        _require(isinstance(rec, dict), where, "sample entries must be objects")
        sid, label = rec.get("id"), rec.get("label")
        if "frames" in rec:
            add(sid, label, _check_frames(rec["frames"], where), where)
        elif "path" in rec:
            full = os.path.join(base_dir, rec["path"])
            _require(os.path.exists(full), where, f"file not found: {rec['path']}")
            add(sid, label, full, where)
        else:
            raise FormatError(f"{where}: needs either 'frames' or 'path'")
    _require(samples, path, "manifest names no samples")

    split = None
    raw_split = doc.get("split")
    if raw_split is not None:
        _require(isinstance(raw_split, dict), path, "split must be an object")
        if raw_split.get("rule") == "odd-even":
            split = ("odd-even",)
        else:
            train = raw_split.get("train")
            test = raw_split.get("test")
            _require(isinstance(train, list) and isinstance(test, list), path,
                     "split needs 'train' and 'test' id lists or rule 'odd-even'")
            overlap = set(train) & set(test)
            _require(not overlap, path, f"split overlaps: {sorted(overlap)[:3]}")
            unknown = (set(train) | set(test)) - seen
            _require(not unknown, path, f"split names unknown ids: {sorted(unknown)[:3]}")
            split = ("explicit", tuple(train), tuple(test))

    return DatasetManifest(mode, joints, tuple(samples), split, base_dir)


def ingest(manifest_path):
    """Load, validate, and featurize every sample named by a manifest.

    Returns a Dataset with sequences in deterministic sample-id order.
    """
    manifest = load_manifest(manifest_path)
    sequences = []
    for sid, label, payload in manifest.samples:
        if isinstance(payload, str):
            raw = read_skeleton_csv(payload, manifest.joints) \
                if manifest.feature_mode != "raw-vectors" \
                else _check_frames(_read_csv_rows(payload), payload)
        else:
            raw = payload
        if manifest.feature_mode == "raw-vectors":
            seq = FrameFeatureSequence(raw, label=label, sample_id=sid)
        else:
            if raw.shape[1] != 3 * manifest.joints:
                raise FormatError(
                    f"sample {sid!r}: expected {3 * manifest.joints} columns "
                    f"for {manifest.joints} joints, got {raw.shape[1]}")
            skel = SkeletonSequence(raw.reshape(raw.shape[0], manifest.joints, 3))
            feat = (coordinate_features(skel) if manifest.feature_mode == "coordinates"
                    else velocity_features(skel))
            seq = FrameFeatureSequence(feat.frames, label=label, sample_id=sid)
        sequences.append(seq)
    sequences.sort(key=lambda s: s.sample_id)
    return Dataset(tuple(sequences), manifest)


def _read_csv_rows(path):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(c) for c in line.split(",")])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-numeric value") from exc
    return rows


def resolve_split(dataset, spec=None):
    """Train/test sample-id lists from a split spec or the manifest.

    ``spec`` may be None (use the manifest), ("explicit", train, test), or
    ("odd-even",): samples sorted by subject (the id itself when no subject
    metadata exists), odd 1-based positions train, even test.
    """
    spec = spec if spec is not None else dataset.manifest.split
    ids = [s.sample_id for s in dataset.sequences]
    if spec is None:
        spec = ("odd-even",)
    if spec[0] == "explicit":
        _, train, test = spec
        known = set(ids)
        unknown = (set(train) | set(test)) - known
        if unknown:
            raise NotFound(f"split names unknown ids: {sorted(unknown)[:3]}")
        return tuple(train), tuple(test)
    if spec[0] == "odd-even":
        ordered = sorted(ids)
        train = tuple(ordered[0::2])   # 1-based odd positions
        test = tuple(ordered[1::2])
        return train, test
    raise FormatError(f"unknown split spec {spec!r}")


def dump_matrix(values, path):
    """Row-major CSV with 17 significant digits (exact float64 round-trip)."""
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 2:
        raise FormatError(f"can only dump 2-D matrices, got shape {a.shape}")
    with open(path, "w", encoding="utf-8") as fh:
        for row in a:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def load_matrix(path):
    rows = _read_csv_rows(path)
    if not rows:
        raise FormatError(f"{path}: empty matrix file")
    return np.array(rows, dtype=np.float64)


def save_representations(path, hierarchies):
    """Store hierarchies (levels + penalty grids) in one npz archive."""
    arrays = {}
    ids = sorted(h.sample_id for h in hierarchies)
    by_id = {h.sample_id: h for h in hierarchies}
    for sid in ids:
        h = by_id[sid]
        arrays[f"levels:{sid}"] = np.stack([lvl.values for lvl in h.levels])
        arrays[f"lambdas:{sid}"] = np.array(h.lambdas)
    arrays["ids"] = np.array(ids, dtype=str)
    np.savez(path, **arrays)


def load_representation(path, sample_id, level):
    """One stored representation level as a plain matrix."""
    with np.load(path, allow_pickle=True) as data:
        key = f"levels:{sample_id}"
        if key not in data:
            raise NotFound(f"sample {sample_id!r} not present in {path}")
        levels = data[key]
        if not 0 <= level < levels.shape[0]:
            raise NotFound(
                f"sample {sample_id!r} has levels 0..{levels.shape[0] - 1}, "
                f"requested {level}")
        return levels[level]


def model_to_json(model, pipeline=None):
    """Serialize a trained classifier (support samples kept by id only)."""
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "classes": list(model.classes),
        "gamma": model.gamma,
        "c": model.c,
        "dim": model.dim,
        "depth": model.depth,
        "lambdas": list(model.lambdas),
        "sample_ids": list(model.sample_ids),
        "j_trace": list(model.j_trace),
        "weights": None,
        "pipeline": pipeline or {},
        "pairs": [
            {
                "class_pos": pd.class_pos, "class_neg": pd.class_neg,
                "indices": list(pd.indices), "labels": list(pd.labels),
                "eta": list(pd.eta), "bias": pd.bias,
                "w_norm_squared": pd.w_norm_squared,
                "r_squared": pd.r_squared,
            }
            for pd in model.pair_duals
        ],
    }
    if isinstance(model.weights, WeightsBeta):
        doc["weights"] = {"kind": "beta", "values": list(model.weights.beta)}
    elif isinstance(model.weights, WeightsM):
        doc["weights"] = {"kind": "m", "values": [list(r) for r in model.weights.m]}
    return json.dumps(doc, indent=1, sort_keys=True)


def model_from_json(text):
    """Deserialize a model; returns (model, pipeline dict).

    The model comes back unbound: attach the training hierarchies with
    ``bind_model`` before predicting.
    """
    doc = json.loads(text)
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise FormatError(f"unsupported model format version {version!r}")
    weights = None
    if doc["weights"] is not None:
        if doc["weights"]["kind"] == "beta":
            weights = WeightsBeta(tuple(doc["weights"]["values"]))
        else:
            weights = WeightsM(tuple(tuple(r) for r in doc["weights"]["values"]))
    pairs = tuple(
        PairDual(class_pos=p["class_pos"], class_neg=p["class_neg"],
                 indices=tuple(p["indices"]), labels=tuple(p["labels"]),
                 eta=tuple(p["eta"]), bias=p["bias"],
                 w_norm_squared=p["w_norm_squared"], r_squared=p["r_squared"])
        for p in doc["pairs"])
    model = TrainedClassifier(
        kind=doc["kind"], weights=weights, classes=tuple(doc["classes"]),
        pair_duals=pairs, gamma=doc["gamma"], lambdas=tuple(doc["lambdas"]),
        dim=doc["dim"], depth=doc["depth"], c=doc["c"],
        sample_ids=tuple(doc["sample_ids"]), j_trace=tuple(doc["j_trace"]),
        hierarchies=None)
    return model, doc.get("pipeline", {})


def bind_model(model, hierarchies_by_id):
    """Attach training hierarchies (looked up by id) to a loaded model."""
    missing = [sid for sid in model.sample_ids if sid not in hierarchies_by_id]
    if missing:
        raise ModelMismatch(f"missing training samples: {missing[:3]}")
    ordered = tuple(hierarchies_by_id[sid] for sid in model.sample_ids)
    for h in ordered:
        if h.depth != model.depth or h.dim != model.dim:
            raise ModelMismatch(
                f"hierarchy for {h.sample_id!r} has depth/dim "
                f"({h.depth}, {h.dim}), model needs ({model.depth}, {model.dim})")
    return TrainedClassifier(
        kind=model.kind, weights=model.weights, classes=model.classes,
        pair_duals=model.pair_duals, gamma=model.gamma, lambdas=model.lambdas,
        dim=model.dim, depth=model.depth, c=model.c,
        sample_ids=model.sample_ids, j_trace=model.j_trace,
        hierarchies=ordered)
