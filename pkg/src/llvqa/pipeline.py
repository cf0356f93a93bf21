"""File-level workflows behind the CLI: manifests, feature cache, train / predict / eval."""

import csv
import dataclasses
import hashlib
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .backbones import read_features, write_features
from .corpus import generate_source, make_variant, pseudo_mos, variant_name
from .estimators import FeatureSubset, MLRFusionRegressor, QualityRegressor, VideoFeatureExtractor
from .exceptions import LLVQAError
from .features import ABLATIONS, SPATIAL_BLOCKS, TEMPORAL_BLOCKS, stack_features
from .handcrafted import video_attributes
from .media_io import load_video, write_rgbv
from .metrics import evaluate, write_scatter
from .model import load_params, save_params
from .training import DEFAULT_SPLIT, MLRBaseline, make_split

SPLITS = ("train", "val", "test", "auto")


# --------------------------------------------------------------------- config


@dataclass
class RunConfig:
    k: int = 8
    clip_edge: int = 64
    semantic: str = "builtin"
    motion: str = "builtin"
    semantic_seed: int = 0
    motion_seed: int = 1
    semantic_dim: int | None = None
    motion_dim: int | None = None
    beta: float = 0.5
    batch_size: int = 8
    epochs: int = 200
    learning_rate: float = 1e-3
    seed: int = 0
    rank_sign: str = "pred"
    ablate: str = "none"
    fusion: str = "mlp"
    fusion_width: int = 1024
    hidden_width: int = 128
    ratios: tuple = DEFAULT_SPLIT
    cache_dir: str = ".llvqa-cache"
    jobs: int = 1

    # location / parallelism knobs that cannot change any output
    _UNHASHED = ("cache_dir", "jobs")
    _EXTRACTION = ("k", "clip_edge", "semantic", "motion", "semantic_seed", "motion_seed", "semantic_dim", "motion_dim")

    def __post_init__(self):
        self.ratios = tuple(float(r) for r in self.ratios)
        self.validate()

    def validate(self):
        if self.k < 1 or self.clip_edge < 16:
            raise ValueError("k >= 1 and clip_edge >= 16 required")
        if self.ablate not in ABLATIONS:
            raise ValueError(f"unknown ablation {self.ablate!r}; choose from {sorted(ABLATIONS)}")
        if self.fusion not in ("mlp", "mlr"):
            raise ValueError(f"fusion must be 'mlp' or 'mlr', got {self.fusion!r}")
        if self.fusion == "mlr":
            blocks = ABLATIONS[self.ablate]
            if not (set(blocks) & set(SPATIAL_BLOCKS) and set(blocks) & set(TEMPORAL_BLOCKS)):
                raise ValueError("mlr fusion needs both spatial and temporal feature blocks")
        if self.rank_sign not in ("pred", "gt"):
            raise ValueError("rank_sign must be 'pred' or 'gt'")
        if self.beta < 0 or (self.beta > 0 and self.batch_size < 2):
            raise ValueError("beta >= 0, and batch_size >= 2 when beta > 0")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["ratios"] = list(self.ratios)
        return d

    def _digest(self, keys):
        d = self.to_dict()
        payload = {k: d[k] for k in sorted(keys)}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    @property
    def config_hash(self):
        return self._digest([k for k in self.to_dict() if k not in self._UNHASHED])

    @property
    def feature_hash(self):
        return self._digest(self._EXTRACTION)

    @classmethod
    def load(cls, path=None, **overrides):
        """Defaults < JSON file < non-None ``overrides``."""
        values = {}
        if path:
            with open(path) as fh:
                values.update(json.load(fh))
        values.update({k: v for k, v in overrides.items() if v is not None})
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**values)

    def extractor(self):
        return VideoFeatureExtractor(
            k=self.k,
            clip_edge=self.clip_edge,
            semantic=self.semantic,
            motion=self.motion,
            semantic_seed=self.semantic_seed,
            motion_seed=self.motion_seed,
            semantic_dim=self.semantic_dim,
            motion_dim=self.motion_dim,
        ).fit()

    def head_kwargs(self):
        return dict(
            fusion_width=self.fusion_width,
            hidden_width=self.hidden_width,
            beta=self.beta,
            batch_size=self.batch_size,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            random_state=self.seed,
            rank_sign=self.rank_sign,
        )


# ------------------------------------------------------------------- manifest


@dataclass
class ManifestEntry:
    video_path: str
    source_id: str
    mos: float
    split: str = "auto"
    root: str = field(default="", repr=False, compare=False)

    @property
    def path(self):
        return os.path.join(self.root, self.video_path)


def _csv_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def read_manifest(path):
    """Read ``video_path,source_id,mos,split``; paths are relative to the manifest."""
    root = os.path.dirname(os.path.abspath(path))
    entries, seen = [], set()
    for lineno, row in enumerate(_csv_rows(path), start=2):
        try:
            entry = ManifestEntry(
                row["video_path"], row["source_id"], float(row["mos"]), (row.get("split") or "auto").strip(), root
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}: bad manifest row {lineno}: {exc}") from None
        if not entry.source_id:
            raise ValueError(f"{path}: row {lineno}: empty source_id")
        if not 0.0 <= entry.mos <= 100.0:
            raise ValueError(f"{path}: row {lineno}: mos {entry.mos} outside [0, 100]")
        if entry.split not in SPLITS:
            raise ValueError(f"{path}: row {lineno}: unknown split {entry.split!r}")
        if entry.video_path in seen:
            raise ValueError(f"{path}: duplicate video_path {entry.video_path!r}")
        seen.add(entry.video_path)
        entries.append(entry)
    if not entries:
        raise ValueError(f"{path}: empty manifest")
    return entries


def write_manifest(path, entries, comment=None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["video_path", "source_id", "mos", "split"])
        for e in entries:
            w.writerow([e.video_path, e.source_id, repr(float(e.mos)), e.split])


def resolve_split(entries, config):
    """Honour explicit splits; group-shuffle the ``auto`` rows with the config seed."""
    split = {"train": [], "val": [], "test": []}
    auto = [i for i, e in enumerate(entries) if e.split == "auto"]
    for i, e in enumerate(entries):
        if e.split != "auto":
            split[e.split].append(i)
    if auto:
        s = make_split([entries[i].source_id for i in auto], config.ratios, config.seed)
        for name in split:
            split[name].extend(auto[j] for j in getattr(s, name))
    return {k: sorted(v) for k, v in split.items()}


# ---------------------------------------------------------------------- cache


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class FeatureCache:
    """LVQF files keyed by (video content hash, extraction-config hash).

    A ``.done`` marker is written last; entries without it are ignored.
    """

    def __init__(self, root, config):
        self.config = config
        self.dir = os.path.join(root, config.feature_hash[:16])

    def _stem(self, digest):
        return os.path.join(self.dir, digest)

    def get(self, digest):
        stem = self._stem(digest)
        if not os.path.exists(stem + ".done"):
            return None
        return read_features(stem + ".si.lvqf"), read_features(stem + ".ti.lvqf")

    def put(self, digest, si, ti):
        os.makedirs(self.dir, exist_ok=True)
        stem = self._stem(digest)
        for suffix, arr in ((".si.lvqf", si), (".ti.lvqf", ti)):
            fd, tmp = tempfile.mkstemp(dir=self.dir, suffix=".tmp")
            os.close(fd)
            write_features(tmp, arr)
            os.replace(tmp, stem + suffix)
        with open(stem + ".done", "w") as fh:
            fh.write(self.config.config_hash + "\n")


def _extract_path(args):
    config, path = args
    si, ti = config.extractor().extract_one(path)
    return si, ti


@dataclass
class ExtractResult:
    features: dict
    failures: dict
    hits: int = 0
    computed: int = 0


def extract_features(paths, config):
    """Features for every path, through the cache. Failures are collected, not raised."""
    cache = FeatureCache(config.cache_dir, config)
    result = ExtractResult({}, {})
    todo = []
    for path in paths:
        try:
            digest = file_digest(path)
            cached = cache.get(digest)
        except (OSError, LLVQAError) as exc:
            result.failures[path] = f"{type(exc).__name__}: {exc}"
            continue
        if cached is not None:
            result.features[path] = cached
            result.hits += 1
        else:
            todo.append((path, digest))

    def record(path, digest, outcome):
        if isinstance(outcome, Exception):
            result.failures[path] = f"{type(outcome).__name__}: {outcome}"
            return
        cache.put(digest, *outcome)
        result.features[path] = cache.get(digest)
        result.computed += 1

    if config.jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(config.jobs) as pool:
            futures = [(p, d, pool.submit(_extract_path, (config, p))) for p, d in todo]
            for path, digest, fut in futures:
                try:
                    record(path, digest, fut.result())
                except (OSError, ValueError, LLVQAError) as exc:
                    record(path, digest, exc)
    else:
        for path, digest in todo:
            try:
                outcome = _extract_path((config, path))
            except (OSError, ValueError, LLVQAError) as exc:
                outcome = exc
            record(path, digest, outcome)
    return result


def _require_all(result):
    if result.failures:
        lines = "\n".join(f"  {p}: {msg}" for p, msg in sorted(result.failures.items()))
        raise LLVQAError(f"feature extraction failed for {len(result.failures)} video(s):\n{lines}")


# ---------------------------------------------------------------------- train


def checkpoint_meta(config, layout):
    ext = config.extractor()
    return {
        "config_hash": config.config_hash,
        "fusion": config.fusion,
        "ablate": config.ablate,
        "feature_dims": {"d_s": layout.d_s, "d_m": layout.d_m},
        "providers": {"semantic": ext.semantic_.identifier, "motion": ext.motion_.identifier},
        "sampling": {"k": config.k, "clip_edge": config.clip_edge},
    }


def compat_expectations(config):
    ext = config.extractor()
    return {
        "feature_dims": {"d_s": ext.layout_.d_s, "d_m": ext.layout_.d_m},
        "providers": {"semantic": ext.semantic_.identifier, "motion": ext.motion_.identifier},
        "sampling": {"k": config.k, "clip_edge": config.clip_edge},
    }


def build_model(config, spatial_dim):
    if config.fusion == "mlr":
        return MLRFusionRegressor(spatial_dim=spatial_dim, **config.head_kwargs())
    return QualityRegressor(**config.head_kwargs())


def train_from_manifest(manifest_path, config, checkpoint_path, log_path=None):
    entries = read_manifest(manifest_path)
    ext = config.extractor()
    result = extract_features([e.path for e in entries], config)
    _require_all(result)
    X = stack_features([result.features[e.path] for e in entries], ext.layout_)
    y = np.array([e.mos for e in entries])
    split = resolve_split(entries, config)
    if not split["train"]:
        raise ValueError("training split is empty")

    subset = FeatureSubset(config.ablate, ext.layout_.d_s, ext.layout_.d_m).fit()
    Xs = subset.transform(X)
    model = build_model(config, subset.spatial_dim_)
    records = []
    tr, va = split["train"], split["val"]
    model.fit(Xs[tr], y[tr], Xs[va] if va else None, y[va] if va else None, log=records.append)

    meta = checkpoint_meta(config, ext.layout_)
    if config.fusion == "mlr":
        meta["mlr"] = [model.mlr_.a, model.mlr_.b, model.mlr_.c]
        meta["spatial_dim"] = subset.spatial_dim_
        heads = {"spatial": model.spatial_.params_, "temporal": model.temporal_.params_}
    else:
        heads = {"main": model.params_}
    save_params(checkpoint_path, heads, meta)

    if log_path:
        with open(log_path, "w") as fh:
            for rec in records:
                fh.write(json.dumps({"config_hash": config.config_hash, **rec}, sort_keys=True) + "\n")

    summary = {"config_hash": config.config_hash, "n_train": len(tr), "n_val": len(va), "n_test": len(split["test"])}
    if len(split["test"]) >= 3:
        te = split["test"]
        summary["test"] = evaluate(model.predict(Xs[te]), y[te]).to_dict()
    return model, records, summary


def load_model(checkpoint_path, config):
    """Rebuild the trained estimator from a checkpoint; rejects incompatible configs."""
    heads, header = load_params(checkpoint_path, compat_expectations(config))
    if header["fusion"] == "mlr":
        model = MLRFusionRegressor(spatial_dim=header["spatial_dim"])
        model.spatial_ = QualityRegressor.from_params(heads["spatial"])
        model.temporal_ = QualityRegressor.from_params(heads["temporal"])
        model.mlr_ = MLRBaseline(*header["mlr"])
        model.n_features_in_ = heads["spatial"].d_in + heads["temporal"].d_in
    else:
        model = QualityRegressor.from_params(heads["main"])
    return model, header


# -------------------------------------------------------------------- predict


def predict_videos(videos, checkpoint_path, config, out_csv):
    """``videos`` is a list of ``(label, path)``. Returns the failure dict."""
    model, header = load_model(checkpoint_path, config)
    ext = config.extractor()
    result = extract_features([p for _, p in videos], config)
    ok = [(label, p) for label, p in videos if p in result.features]
    subset = FeatureSubset(header["ablate"], ext.layout_.d_s, ext.layout_.d_m).fit()
    rows = []
    if ok:
        X = subset.transform(stack_features([result.features[p] for _, p in ok], ext.layout_))
        clips = model.predict_clips(X)
        rows = [(label, float(q.mean()), q) for (label, _), q in zip(ok, clips)]
    with open(out_csv, "w", newline="") as fh:
        fh.write(f"# llvqa predictions config_hash={header['config_hash']}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["video", "Q"] + [f"Q_{i + 1}" for i in range(config.k)])
        for label, q, per_clip in rows:
            w.writerow([label, repr(q)] + [repr(float(v)) for v in per_clip])
    return result.failures


def _hash_comment(path):
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("#") and "config_hash=" in first:
        return first.split("config_hash=", 1)[1].strip()
    return None


# ----------------------------------------------------------------------- eval


def evaluate_predictions(pred_csv, manifest_path, out_json, scatter_csv=None):
    entries = {e.video_path: e for e in read_manifest(manifest_path)}
    rows = _csv_rows(pred_csv)
    unmatched = [r["video"] for r in rows if r["video"] not in entries]
    if unmatched:
        raise LLVQAError("predictions without manifest rows: " + ", ".join(unmatched))
    pred = np.array([float(r["Q"]) for r in rows])
    gt = np.array([entries[r["video"]].mos for r in rows])
    if pred.size < 3:
        raise LLVQAError(f"need at least 3 predictions for metrics, got {pred.size}")
    report = evaluate(pred, gt)
    payload = {"config_hash": _hash_comment(pred_csv), **report.to_dict()}
    with open(out_json, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if scatter_csv:
        write_scatter(scatter_csv, pred, gt, report.poly4)
    return report


# ---------------------------------------------------------------------- attrs


ATTR_COLUMNS = ("brightness", "contrast", "colorfulness")


def video_attribute_table(manifest_path, normalize=False):
    """Rows of (video_path, brightness, contrast, colorfulness) plus failures."""
    rows, failures = [], {}
    for e in read_manifest(manifest_path):
        try:
            a = video_attributes(load_video(e.path))
        except (OSError, LLVQAError) as exc:
            failures[e.video_path] = f"{type(exc).__name__}: {exc}"
            continue
        rows.append([e.video_path, a.brightness, a.contrast, a.colorfulness])
    if normalize and rows:
        vals = np.array([r[1:] for r in rows], dtype=np.float64)
        lo, span = vals.min(axis=0), np.ptp(vals, axis=0)
        vals = np.where(span > 0, (vals - lo) / np.where(span > 0, span, 1.0), 0.0)
        rows = [[r[0], *v] for r, v in zip(rows, vals.tolist())]
    return rows, failures


def write_attribute_table(path, rows, comment=None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["video", *ATTR_COLUMNS])
        for r in rows:
            w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])


# --------------------------------------------------------------------- corpus


def write_corpus(out_dir, spec, variants=3, force=False):
    """Source + ``variants`` enhanced videos per source, and ``manifest.csv``."""
    if os.path.isdir(out_dir) and os.listdir(out_dir) and not force:
        raise LLVQAError(f"{out_dir} is not empty; pass --force to overwrite")
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i in range(spec.n_sources):
        source = generate_source(spec, i)
        for v in range(variants + 1):
            video = source if v == 0 else make_variant(spec, i, v, source=source)
            name = f"src{i:03d}_{variant_name(v)}.rgbv"
            write_rgbv(os.path.join(out_dir, name), video)
            entries.append(ManifestEntry(name, f"src{i:03d}", pseudo_mos(video), "auto"))
    spec_hash = hashlib.sha256(
        json.dumps({**dataclasses.asdict(spec), "variants": variants}, sort_keys=True).encode()
    ).hexdigest()
    manifest = os.path.join(out_dir, "manifest.csv")
    write_manifest(manifest, entries, comment=f"llvqa corpus config_hash={spec_hash}")
    return manifest, entries

