"""End-to-end orchestration for the train / evaluate / predict / sweep / synth
commands.

Pipeline order is fixed: predictions -> blend -> smooth -> discretize ->
metric. Every command is a pure function of (config, input files, seed), so
reruns produce byte-identical outputs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataio, heads, metrics, postprocess
from .dataio import Dataset, Task, TaskLabels
from .errors import ConfigError, DataError, FormatError
from .heads import FeatureSelector, HeadModel, TrainConfig
from .postprocess import PredictionSeq

_N_SCORE_COLS = {Task.VA: 2, Task.EXPR: 8, Task.AU: 12}


@dataclass
class PostConfig:
    k: int = 0
    thresholds: str = "fixed"          # fixed | search
    threshold_grid_step: float = 0.05
    thresholds_file: str | None = None  # held-out mode: apply, don't search
    blend_weight: float = 0.5
    external: str | None = None        # scores file for an external blend member


@dataclass
class PipelineConfig:
    task: Task
    selector: FeatureSelector = field(default_factory=FeatureSelector)
    train: TrainConfig = field(default_factory=TrainConfig)
    post: PostConfig = field(default_factory=PostConfig)
    features: str | None = None
    labels: str | None = None
    out: str = "."
    seed: int = 0
    member: str = "mlp"                # mlp | linear (L2 linear blend partner)
    val_fraction: float = 0.0


def parse_config(doc: dict) -> PipelineConfig:
    """Validate a JSON config document; unknown keys are config errors."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    known = {"task", "selector", "train", "post", "features", "labels", "out",
             "seed", "member", "val_fraction"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "task" not in doc:
        raise ConfigError("config requires a task (va|expr|au)")
    try:
        task = Task(doc["task"])
    except ValueError:
        raise ConfigError(f"unknown task {doc['task']!r}") from None
    try:
        selector = FeatureSelector(doc.get("selector", "logits_va"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    train_doc = dict(doc.get("train", {}))
    train_known = {"learning_rate", "epochs", "batch_size", "hidden_size",
                   "seed", "class_weights", "l2"}
    bad = set(train_doc) - train_known
    if bad:
        raise ConfigError(f"unknown train keys: {sorted(bad)}")
    if task is Task.VA:
        train_doc.setdefault("batch_size", 4096)
    train_doc.setdefault("seed", int(doc.get("seed", 0)))
    train = TrainConfig(**train_doc)
    try:
        train.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    post_doc = dict(doc.get("post", {}))
    post_known = {"k", "thresholds", "threshold_grid_step", "thresholds_file",
                  "blend_weight", "external"}
    bad = set(post_doc) - post_known
    if bad:
        raise ConfigError(f"unknown post keys: {sorted(bad)}")
    post = PostConfig(**post_doc)
    if post.k < 0:
        raise ConfigError("post.k must be >= 0")
    if post.thresholds not in ("fixed", "search"):
        raise ConfigError("post.thresholds must be 'fixed' or 'search'")
    if not (0.0 <= post.blend_weight <= 1.0):
        raise ConfigError("post.blend_weight must be in [0, 1]")
    vf = float(doc.get("val_fraction", 0.0))
    if not (0.0 <= vf < 1.0):
        raise ConfigError("val_fraction must be in [0, 1)")
    member = doc.get("member", "mlp")
    if member not in ("mlp", "linear"):
        raise ConfigError("member must be 'mlp' or 'linear'")
    return PipelineConfig(
        task=task, selector=selector, train=train, post=post,
        features=doc.get("features"), labels=doc.get("labels"),
        out=doc.get("out", "."), seed=int(doc.get("seed", 0)),
        member=member, val_fraction=vf,
    )


def load_config(path) -> PipelineConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(doc)


def _config_echo(cfg: PipelineConfig) -> dict:
    return {
        "task": cfg.task.value,
        "selector": cfg.selector.kind,
        "seed": cfg.seed,
        "post": {
            "k": cfg.post.k,
            "thresholds": cfg.post.thresholds,
            "threshold_grid_step": cfg.post.threshold_grid_step,
            "thresholds_file": cfg.post.thresholds_file,
            "blend_weight": cfg.post.blend_weight,
            "external": cfg.post.external,
        },
    }


def _write_json(path, doc) -> None:
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n",
        encoding="utf-8",
    )


# ----- training data assembly -------------------------------------------------

def _build_xy(cfg: PipelineConfig, dataset: Dataset, labels: dict[str, TaskLabels]):
    pairs, report = dataio.align(dataset, labels)
    if not pairs:
        raise DataError("no valid aligned training frames")
    X = np.array([cfg.selector.vector(f) for f, _ in pairs])
    if cfg.task is Task.EXPR:
        Y = np.array([int(y) for _, y in pairs])
    else:
        Y = np.array([y for _, y in pairs])
    return X, Y, report


def cmd_train(cfg: PipelineConfig) -> str:
    """Train the task head; write the model file and a training log."""
    if not cfg.features or not cfg.labels:
        raise ConfigError("train requires features and labels paths")
    dataset = dataio.load_features(cfg.features)
    labels = dataio.load_labels(cfg.labels, cfg.task)
    val_pairs = None
    if cfg.val_fraction > 0:
        vids = sorted(labels)
        n_val = max(1, int(round(len(vids) * cfg.val_fraction)))
        if n_val >= len(vids):
            raise ConfigError("val_fraction leaves no training videos")
        val_ids = set(vids[-n_val:])
        val_labels = {v: labels[v] for v in val_ids}
        labels = {v: labels[v] for v in vids if v not in val_ids}
        Xv, Yv, _ = _build_xy(cfg, dataset, val_labels)
        val_pairs = (Xv, Yv)
    X, Y, report = _build_xy(cfg, dataset, labels)
    if cfg.member == "linear":
        model = heads.train_linear_member((X, Y), cfg.task.value, cfg.train,
                                          selector=cfg.selector)
    elif cfg.task is Task.VA:
        model = heads.train_va_head((X, Y), cfg.train, val_pairs=val_pairs)
        model.selector = cfg.selector
    elif cfg.task is Task.EXPR:
        model = heads.train_classifier((X, Y), 8, cfg.train, selector=cfg.selector)
    else:
        model = heads.train_au_head((X, Y), cfg.train, selector=cfg.selector)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / f"model_{cfg.task.value}.json"
    model.save(model_path)
    _write_json(out / f"train_log_{cfg.task.value}.json", {
        "config": _config_echo(cfg),
        "aligned_pairs": report.pairs,
        "skipped_invalid": report.skipped_invalid,
        "skipped_missing_frames": report.skipped_missing_frames,
        "epoch_loss": [float(v) for v in model.train_log.get("epoch_loss", [])],
        "val_metric": [float(v) for v in model.train_log.get("val_metric", [])],
        "skipped_batches": model.train_log.get("skipped_batches", 0),
    })
    return str(model_path)


# ----- prediction assembly ----------------------------------------------------

def _model_scores(model: HeadModel, dataset: Dataset) -> dict[str, PredictionSeq]:
    out = {}
    for track in dataset.tracks:
        X = model.selector.matrix(track)
        if model.activation == "tanh":
            values = heads.predict_va(model, X)
        else:
            values = heads.predict_proba(model, X)
        out[track.video_id] = PredictionSeq(track.video_id, track.frame_index, values)
    return out


def _check_model_task(model: HeadModel, task: Task) -> None:
    expected = {"tanh": Task.VA, "softmax": Task.EXPR, "sigmoid": Task.AU}
    if expected.get(model.activation) is not task:
        raise ConfigError(
            f"model with activation {model.activation!r} is incompatible with task {task.value!r}"
        )


def _raw_scores(cfg: PipelineConfig, dataset: Dataset,
                model_paths: list[str]) -> dict[str, PredictionSeq]:
    """Model scores, blended with a second model or an external member."""
    if not model_paths:
        raise ConfigError("at least one model path is required")
    if len(model_paths) > 2:
        raise ConfigError("at most two blend members are supported")
    models = [HeadModel.load(p) for p in model_paths]
    for m in models:
        _check_model_task(m, cfg.task)
    seqs = _model_scores(models[0], dataset)
    partner = None
    if len(models) == 2:
        partner = _model_scores(models[1], dataset)
    elif cfg.post.external:
        task, kind, partner = load_predictions(cfg.post.external)
        if task is not cfg.task:
            raise DataError(f"external predictions are for task {task.value!r}")
        if kind != "scores":
            raise DataError("external blend member must be a 'scores' prediction file")
    if partner is not None:
        w = cfg.post.blend_weight
        for vid in sorted(seqs):
            if vid not in partner:
                raise DataError(f"blend member is missing video {vid}")
            seqs[vid] = postprocess.blend(seqs[vid], partner[vid], w)
    return seqs


def _resolve_thresholds(cfg: PipelineConfig, smoothed: dict[str, PredictionSeq],
                        labels: dict[str, TaskLabels] | None):
    """Threshold vector for AU discretization plus report flags."""
    if cfg.post.thresholds_file:
        th = np.asarray(
            json.loads(Path(cfg.post.thresholds_file).read_text(encoding="utf-8")),
            dtype=float,
        )
        if th.shape != (dataio.N_AUS,):
            raise DataError("thresholds file must hold 12 reals")
        return th, {"thresholds_mode": "file", "tuned_on_eval": False}
    if cfg.post.thresholds == "fixed":
        return np.full(dataio.N_AUS, 0.5), {"thresholds_mode": "fixed", "tuned_on_eval": False}
    if labels is None:
        raise ConfigError("threshold search requires labels")
    S, Y = _pool_aligned(smoothed, labels)
    th, _ = postprocess.search_thresholds(S, Y.astype(int), cfg.post.threshold_grid_step)
    return th, {"thresholds_mode": "search", "tuned_on_eval": True}


def _pool_aligned(seqs: dict[str, PredictionSeq], labels: dict[str, TaskLabels]):
    """Pool (prediction row, label row) over valid labeled frames, all videos."""
    preds, trues = [], []
    for vid in sorted(labels):
        if vid not in seqs:
            raise DataError(f"labels reference unknown video(s): {vid}")
        seq = seqs[vid]
        index_of = {int(f): i for i, f in enumerate(seq.frame_index)}
        lab = labels[vid]
        for frame in range(len(lab)):
            if lab.invalid[frame]:
                continue
            i = index_of.get(frame)
            if i is None:
                continue
            preds.append(seq.values[i])
            trues.append(lab.values[frame])
    if not preds:
        raise DataError("no valid labeled frames to evaluate")
    return np.array(preds), np.array(trues)


def _metric_block(task: Task, pooled_pred: np.ndarray, pooled_true: np.ndarray):
    """Final metric from already-discretized predictions. Returns (dict, scalar)."""
    if task is Task.VA:
        r = metrics.mean_ccc((pooled_pred[:, 0], pooled_pred[:, 1]),
                             (pooled_true[:, 0], pooled_true[:, 1]))
        return r.to_dict(), r.p_va
    if task is Task.EXPR:
        r = metrics.macro_f1(pooled_pred.astype(int).reshape(-1),
                             pooled_true.astype(int).reshape(-1), 8)
        return r.to_dict(), r.macro_f1
    r = metrics.multilabel_f1(pooled_pred.astype(int), pooled_true.astype(int))
    return r.to_dict(), r.macro_f1


def _evaluate_at_k(cfg: PipelineConfig, raw: dict[str, PredictionSeq],
                   labels: dict[str, TaskLabels], k: int):
    smoothed = {vid: postprocess.smooth(seq, k) for vid, seq in raw.items()}
    flags = {}
    if cfg.task is Task.AU:
        th, flags = _resolve_thresholds(cfg, smoothed, labels)
        flags["thresholds"] = [float(t) for t in th]
        final = {vid: PredictionSeq(vid, s.frame_index,
                                    postprocess.apply_thresholds(s.values, th))
                 for vid, s in smoothed.items()}
    elif cfg.task is Task.EXPR:
        final = {vid: PredictionSeq(vid, s.frame_index,
                                    s.values.argmax(axis=1)[:, None])
                 for vid, s in smoothed.items()}
    else:
        final = smoothed
    pred, true = _pool_aligned(final, labels)
    block, scalar = _metric_block(cfg.task, pred, true)
    return block, scalar, flags, final


def cmd_evaluate(cfg: PipelineConfig, model_paths: list[str]) -> dict:
    """predict -> blend -> smooth -> discretize -> metrics; writes a report."""
    if not cfg.features or not cfg.labels:
        raise ConfigError("evaluate requires features and labels paths")
    dataset = dataio.load_features(cfg.features)
    labels = dataio.load_labels(cfg.labels, cfg.task)
    raw = _raw_scores(cfg, dataset, model_paths)
    block, scalar, flags, _final = _evaluate_at_k(cfg, raw, labels, cfg.post.k)
    report = {
        "task": cfg.task.value,
        "config": _config_echo(cfg),
        "metrics": block,
        **flags,
    }
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / f"report_{cfg.task.value}.json", report)
    return report


# ----- prediction files ---------------------------------------------------------

def _pred_columns(task: Task, kind: str) -> str:
    if task is Task.VA:
        return "video_id,frame,valence,arousal"
    if task is Task.EXPR:
        return "video_id,frame,class" if kind == "final" else "video_id,frame,p0..p7"
    return "video_id,frame,b0..b11" if kind == "final" else "video_id,frame,s0..s11"


def write_predictions(task: Task, kind: str, seqs: dict[str, PredictionSeq], path) -> None:
    header = {"version": 1, "task": task.value, "kind": kind,
              "columns": _pred_columns(task, kind)}
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for vid in sorted(seqs):
            seq = seqs[vid]
            for i in range(len(seq.frame_index)):
                row = seq.values[i]
                if task is Task.EXPR and kind == "final":
                    cells = [str(int(row[0]))]
                elif task is Task.AU and kind == "final":
                    cells = [str(int(v)) for v in row]
                else:
                    cells = [f"{v:.9g}" for v in row]
                fh.write(f"{vid},{int(seq.frame_index[i])}," + ",".join(cells) + "\n")


def load_predictions(path):
    """Read a prediction file -> (task, kind, dict video_id -> PredictionSeq)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"prediction file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        try:
            header = json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise FormatError(f"line 1: header is not valid JSON ({exc})") from None
        if header.get("version") != 1:
            raise FormatError("line 1: unsupported prediction file version")
        task = Task(header["task"])
        kind = header.get("kind", "scores")
        n_vals = 1 if (task is Task.EXPR and kind == "final") else _N_SCORE_COLS[task]
        per_video: dict[str, list] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2 + n_vals:
                raise FormatError(f"line {lineno}: expected {2 + n_vals} columns")
            try:
                frame = int(parts[1])
                vals = [float(v) for v in parts[2:]]
            except ValueError:
                raise FormatError(f"line {lineno}: non-numeric field") from None
            per_video.setdefault(parts[0], []).append((frame, vals))
    seqs = {}
    for vid, rows in per_video.items():
        rows.sort(key=lambda r: r[0])
        seqs[vid] = PredictionSeq(vid, np.array([r[0] for r in rows]),
                                  np.array([r[1] for r in rows]))
    return task, kind, seqs


def cmd_predict(cfg: PipelineConfig, model_paths: list[str], kind: str = "final") -> str:
    """Write per-frame outputs for every frame after full post-processing.

    kind="scores" skips smoothing/discretization and exports raw (blended)
    scores usable as an external blend member.
    """
    if not cfg.features:
        raise ConfigError("predict requires a features path")
    if kind not in ("final", "scores"):
        raise ConfigError("prediction kind must be 'final' or 'scores'")
    dataset = dataio.load_features(cfg.features)
    raw = _raw_scores(cfg, dataset, model_paths)
    if kind == "scores":
        final = raw
    else:
        labels = dataio.load_labels(cfg.labels, cfg.task) if (
            cfg.task is Task.AU and cfg.post.thresholds == "search" and cfg.labels
        ) else None
        smoothed = {vid: postprocess.smooth(seq, cfg.post.k) for vid, seq in raw.items()}
        if cfg.task is Task.AU:
            th, _ = _resolve_thresholds(cfg, smoothed, labels)
            final = {vid: PredictionSeq(vid, s.frame_index,
                                        postprocess.apply_thresholds(s.values, th))
                     for vid, s in smoothed.items()}
        elif cfg.task is Task.EXPR:
            final = {vid: PredictionSeq(vid, s.frame_index,
                                        s.values.argmax(axis=1)[:, None])
                     for vid, s in smoothed.items()}
        else:
            final = smoothed
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    pred_path = out / f"predictions_{cfg.task.value}_{kind}.csv"
    write_predictions(cfg.task, kind, final, pred_path)
    return str(pred_path)


def cmd_evaluate_file(cfg: PipelineConfig, pred_path) -> dict:
    """Metrics straight from a final prediction file (round-trip consistency)."""
    if not cfg.labels:
        raise ConfigError("evaluate requires a labels path")
    task, kind, seqs = load_predictions(pred_path)
    if task is not cfg.task:
        raise DataError(f"prediction file is for task {task.value!r}")
    if kind != "final":
        raise DataError("evaluate-from-file needs a 'final' prediction file")
    labels = dataio.load_labels(cfg.labels, cfg.task)
    pred, true = _pool_aligned(seqs, labels)
    block, _scalar = _metric_block(cfg.task, pred, true)
    return {"task": cfg.task.value, "metrics": block, "source": "prediction_file"}


def cmd_sweep(cfg: PipelineConfig, param: str, values, model_paths: list[str]) -> str:
    """One metric evaluation per value with everything else held fixed."""
    if param not in ("k", "blend_weight", "au_threshold_grid"):
        raise ConfigError(f"unknown sweep parameter {param!r}")
    values = list(values)
    if not values:
        raise ConfigError("sweep requires at least one value")
    if not cfg.features or not cfg.labels:
        raise ConfigError("sweep requires features and labels paths")
    dataset = dataio.load_features(cfg.features)
    labels = dataio.load_labels(cfg.labels, cfg.task)
    rows = []
    if param == "k":
        raw = _raw_scores(cfg, dataset, model_paths)
        for k in values:
            _, scalar, _, _ = _evaluate_at_k(cfg, raw, labels, int(k))
            rows.append((int(k), scalar))
        col = "k"
    elif param == "blend_weight":
        if len(model_paths) != 2 and not cfg.post.external:
            raise ConfigError("blend_weight sweep needs two blend members")
        for w in values:
            cfg_w = PipelineConfig(**{**cfg.__dict__,
                                      "post": PostConfig(**{**cfg.post.__dict__,
                                                            "blend_weight": float(w)})})
            raw = _raw_scores(cfg_w, dataset, model_paths)
            _, scalar, _, _ = _evaluate_at_k(cfg_w, raw, labels, cfg.post.k)
            rows.append((float(w), scalar))
        col = "weight"
    else:
        if cfg.task is not Task.AU:
            raise ConfigError("au_threshold_grid sweep applies to the au task only")
        raw = _raw_scores(cfg, dataset, model_paths)
        for step in values:
            cfg_s = PipelineConfig(**{**cfg.__dict__,
                                      "post": PostConfig(**{**cfg.post.__dict__,
                                                            "thresholds": "search",
                                                            "threshold_grid_step": float(step)})})
            _, scalar, _, _ = _evaluate_at_k(cfg_s, raw, labels, cfg.post.k)
            rows.append((float(step), scalar))
        col = "grid_step"
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    sweep_path = out / f"sweep_{cfg.task.value}_{param}.csv"
    with sweep_path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{col},metric\n")
        for v, m in rows:
            fh.write(f"{v},{m:.9g}\n")
    return str(sweep_path)


def cmd_synth(cfg: PipelineConfig, n_videos: int = 8, frames_per_video: int = 400,
              noise_sigma: float = 0.5) -> tuple[str, str]:
    """Generate a synthetic dataset and write features + labels under out/."""
    dataset, labels = dataio.generate_synthetic(cfg.task, n_videos,
                                                frames_per_video, noise_sigma,
                                                cfg.seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    feat_path = out / f"synth_{cfg.task.value}_features.csv"
    label_dir = out / f"synth_{cfg.task.value}_labels"
    dataio.write_features(dataset, feat_path)
    dataio.write_labels(labels, label_dir)
    return str(feat_path), str(label_dir)
