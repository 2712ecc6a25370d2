"""Feature/label interchange formats, alignment, and synthetic data.

Feature files: one JSON header line, then CSV rows
``video_id,frame,valence,arousal,l0..l7,e0..e{D-1}`` with reals printed to
9 significant digits. Label files: one ``<video_id>.txt`` per video, line i
is frame i. Invalid-frame sentinels are -5.0 (VA) and -1 (EXPR/AU).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError

AFFECTNET_ORDER = (
    "Anger", "Contempt", "Disgust", "Fear",
    "Happiness", "Neutral", "Sadness", "Surprise",
)
CHALLENGE_EXPRESSIONS = (
    "Neutral", "Anger", "Disgust", "Fear",
    "Happiness", "Sadness", "Surprise", "Other",
)
AU_NAMES = (
    "AU1", "AU2", "AU4", "AU6", "AU7", "AU10",
    "AU12", "AU15", "AU23", "AU24", "AU25", "AU26",
)
N_LOGITS = 8
N_AUS = 12

VA_SENTINEL = -5.0
CLASS_SENTINEL = -1


class Task(str, Enum):
    VA = "va"
    EXPR = "expr"
    AU = "au"


@dataclass(frozen=True)
class FrameFeatures:
    """One frame's affect representation from the backbone."""
    frame_index: int
    embedding: np.ndarray
    logits: np.ndarray
    valence: float
    arousal: float


@dataclass
class VideoTrack:
    """Ordered per-frame features for one video, stored columnwise."""
    video_id: str
    frame_index: np.ndarray   # (T,) int, strictly increasing
    embeddings: np.ndarray    # (T, D)
    logits: np.ndarray        # (T, 8)
    valence: np.ndarray       # (T,)
    arousal: np.ndarray       # (T,)

    def __len__(self) -> int:
        return len(self.frame_index)

    def frame(self, i: int) -> FrameFeatures:
        return FrameFeatures(
            frame_index=int(self.frame_index[i]),
            embedding=self.embeddings[i],
            logits=self.logits[i],
            valence=float(self.valence[i]),
            arousal=float(self.arousal[i]),
        )

    @property
    def frames(self) -> list[FrameFeatures]:
        return [self.frame(i) for i in range(len(self))]


@dataclass
class TaskLabels:
    """Per-frame ground truth for one task; line i of the file is frame i.

    values: VA -> (T, 2) floats; EXPR -> (T,) ints; AU -> (T, 12) ints.
    """
    task: Task
    values: np.ndarray
    invalid: np.ndarray  # (T,) bool

    def __len__(self) -> int:
        return len(self.invalid)


@dataclass
class Dataset:
    tracks: list[VideoTrack]
    D: int
    labels: dict[str, TaskLabels] = field(default_factory=dict)

    def track(self, video_id: str) -> VideoTrack:
        for t in self.tracks:
            if t.video_id == video_id:
                return t
        raise KeyError(video_id)

    @property
    def video_ids(self) -> list[str]:
        return [t.video_id for t in self.tracks]


def _feature_columns(d: int) -> str:
    return f"video_id,frame,valence,arousal,l0..l7,e0..e{d - 1}"


def load_features(path) -> Dataset:
    """Parse a feature interchange file into tracks sorted by frame index."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"feature file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise FormatError("line 1: missing header")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"line 1: header is not valid JSON ({exc})") from None
        if not isinstance(header, dict) or header.get("version") != 1:
            raise FormatError("line 1: unsupported or missing format version")
        d = header.get("D")
        if not isinstance(d, int) or d < 1:
            raise FormatError("line 1: header D must be a positive integer")
        n_cols = 4 + N_LOGITS + d

        per_video: dict[str, list] = {}
        seen: set[tuple[str, int]] = set()
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != n_cols:
                raise FormatError(
                    f"line {lineno}: expected {n_cols} columns for D={d}, got {len(parts)}"
                )
            video_id = parts[0]
            try:
                frame = int(parts[1])
                reals = [float(v) for v in parts[2:]]
            except ValueError:
                raise FormatError(f"line {lineno}: non-numeric field") from None
            if frame < 0:
                raise FormatError(f"line {lineno}: negative frame index")
            if not all(math.isfinite(v) for v in reals):
                raise FormatError(f"line {lineno}: non-finite value")
            valence, arousal = reals[0], reals[1]
            if not (-1.0 <= valence <= 1.0 and -1.0 <= arousal <= 1.0):
                raise FormatError(f"line {lineno}: valence/arousal outside [-1, 1]")
            key = (video_id, frame)
            if key in seen:
                raise FormatError(f"line {lineno}: duplicate (video_id, frame) {key}")
            seen.add(key)
            per_video.setdefault(video_id, []).append((frame, reals))

    tracks = []
    for video_id in sorted(per_video):
        rows = sorted(per_video[video_id], key=lambda r: r[0])
        frames = np.array([r[0] for r in rows], dtype=int)
        data = np.array([r[1] for r in rows], dtype=float)
        tracks.append(VideoTrack(
            video_id=video_id,
            frame_index=frames,
            valence=data[:, 0].copy(),
            arousal=data[:, 1].copy(),
            logits=data[:, 2:2 + N_LOGITS].copy(),
            embeddings=data[:, 2 + N_LOGITS:].copy(),
        ))
    return Dataset(tracks=tracks, D=d)


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def write_features(dataset: Dataset, path) -> None:
    """Write a Dataset back to the interchange format (canonical ordering)."""
    path = Path(path)
    header = {
        "version": 1,
        "D": dataset.D,
        "logit_order": list(AFFECTNET_ORDER),
        "columns": _feature_columns(dataset.D),
    }
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for track in sorted(dataset.tracks, key=lambda t: t.video_id):
            for i in range(len(track)):
                reals = [track.valence[i], track.arousal[i]]
                reals.extend(track.logits[i])
                reals.extend(track.embeddings[i])
                fh.write(
                    f"{track.video_id},{int(track.frame_index[i])},"
                    + ",".join(_fmt(v) for v in reals) + "\n"
                )


def _parse_va_line(parts: list[str], where: str) -> tuple[np.ndarray, bool]:
    if len(parts) != 2:
        raise FormatError(f"{where}: VA line needs 2 values")
    v, a = float(parts[0]), float(parts[1])
    if v == VA_SENTINEL or a == VA_SENTINEL:
        return np.array([0.0, 0.0]), True
    if not (-1.0 <= v <= 1.0 and -1.0 <= a <= 1.0):
        raise FormatError(f"{where}: VA value outside [-1, 1] and not the sentinel")
    return np.array([v, a]), False


def load_labels(path, task: Task) -> dict[str, TaskLabels]:
    """Load one annotation file per video from a directory."""
    task = Task(task)
    path = Path(path)
    if not path.is_dir():
        raise DataError(f"label directory not found: {path}")
    out: dict[str, TaskLabels] = {}
    for fname in sorted(path.glob("*.txt")):
        video_id = fname.stem
        values, invalid = [], []
        with fname.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                where = f"{fname.name} line {lineno}"
                parts = line.split(",")
                try:
                    if task is Task.VA:
                        row, bad = _parse_va_line(parts, where)
                    elif task is Task.EXPR:
                        if len(parts) != 1:
                            raise FormatError(f"{where}: EXPR line needs 1 value")
                        c = int(parts[0])
                        if c == CLASS_SENTINEL:
                            row, bad = 0, True
                        elif 0 <= c < len(CHALLENGE_EXPRESSIONS):
                            row, bad = c, False
                        else:
                            raise FormatError(f"{where}: unknown class id {c}")
                    else:
                        if len(parts) != N_AUS:
                            raise FormatError(
                                f"{where}: AU line needs {N_AUS} entries, got {len(parts)}"
                            )
                        bits = [int(p) for p in parts]
                        if any(b == CLASS_SENTINEL for b in bits):
                            row, bad = np.zeros(N_AUS, dtype=int), True
                        elif all(b in (0, 1) for b in bits):
                            row, bad = np.array(bits, dtype=int), False
                        else:
                            raise FormatError(f"{where}: AU entry not in {{0, 1, -1}}")
                except ValueError:
                    raise FormatError(f"{where}: non-numeric field") from None
                values.append(row)
                invalid.append(bad)
        if task is Task.EXPR:
            arr = np.array(values, dtype=int).reshape(len(values))
        elif task is Task.VA:
            arr = np.array(values, dtype=float).reshape(len(values), 2)
        else:
            arr = np.array(values, dtype=int).reshape(len(values), N_AUS)
        out[video_id] = TaskLabels(task=task, values=arr, invalid=np.array(invalid, dtype=bool))
    return out


@dataclass
class AlignReport:
    pairs: int
    skipped_missing_frames: int
    skipped_invalid: int


def align(dataset: Dataset, labels: dict[str, TaskLabels]):
    """Pair valid labeled frames with their features.

    Returns (pairs, report); pairs are (FrameFeatures, label_row) ordered by
    (video_id lexical, frame_index). Labels whose frame index has no feature
    row are skipped and counted; an unknown video id is an error.
    """
    known = set(dataset.video_ids)
    missing_videos = sorted(set(labels) - known)
    if missing_videos:
        raise DataError(f"labels reference unknown video(s): {', '.join(missing_videos)}")
    pairs = []
    skipped_missing = 0
    skipped_invalid = 0
    for video_id in sorted(labels):
        track = dataset.track(video_id)
        index_of = {int(f): i for i, f in enumerate(track.frame_index)}
        lab = labels[video_id]
        for frame in range(len(lab)):
            if lab.invalid[frame]:
                skipped_invalid += 1
                continue
            i = index_of.get(frame)
            if i is None:
                skipped_missing += 1
                continue
            pairs.append((track.frame(i), lab.values[frame]))
    report = AlignReport(
        pairs=len(pairs),
        skipped_missing_frames=skipped_missing,
        skipped_invalid=skipped_invalid,
    )
    return pairs, report


# Synthetic data: a smooth latent affect state drives features and labels.
SYNTH_D = 16
_AR_COEF = 0.98
_LATENT_DIM = 6
_VA_LATENT_STD = 0.35
_MAP_SEED = 1234  # feature maps are fixed constants, independent of the user seed


def _fixed_maps():
    rng = np.random.default_rng(_MAP_SEED)
    emb_map = rng.normal(size=(SYNTH_D, _LATENT_DIM))
    logit_map = rng.normal(size=(N_LOGITS, _LATENT_DIM))
    au_map = rng.normal(size=(N_AUS, _LATENT_DIM))
    au_map /= np.linalg.norm(au_map, axis=1, keepdims=True)
    au_cut = rng.uniform(-0.3, 0.9, size=N_AUS)
    return emb_map, logit_map, au_map, au_cut


def _latent_trajectory(rng, n_frames: int) -> np.ndarray:
    std = np.full(_LATENT_DIM, 1.0)
    std[:2] = _VA_LATENT_STD
    innov_scale = std * math.sqrt(1.0 - _AR_COEF ** 2)
    z = np.empty((n_frames, _LATENT_DIM))
    z[0] = rng.normal(scale=std)
    for t in range(1, n_frames):
        z[t] = _AR_COEF * z[t - 1] + rng.normal(scale=innov_scale)
    return z


def _expr_class_from_latent(z: np.ndarray) -> np.ndarray:
    # octant of the (valence, arousal) latent pair
    angle = np.arctan2(z[:, 1], z[:, 0])  # [-pi, pi]
    return np.minimum((angle + np.pi) / (np.pi / 4.0), 7.999).astype(int)


def generate_synthetic(task, n_videos: int, frames_per_video: int,
                       noise_sigma: float, seed: int):
    """Desk-scale synthetic stand-in for a real affect dataset.

    Latent state is AR(1) with coefficient 0.98; features are a fixed linear
    map of the latent plus Gaussian noise; labels derive deterministically
    from the latent. Identical seed gives bit-identical output.
    """
    task = Task(task)
    if n_videos < 1 or frames_per_video < 1:
        raise ValueError("n_videos and frames_per_video must be >= 1")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    emb_map, logit_map, au_map, au_cut = _fixed_maps()
    rng = np.random.default_rng(seed)
    tracks = []
    labels: dict[str, TaskLabels] = {}
    for v in range(n_videos):
        video_id = f"synth_{v:03d}"
        z = _latent_trajectory(rng, frames_per_video)
        emb = z @ emb_map.T
        logit = z @ logit_map.T
        va_latent = np.clip(z[:, :2], -1.0, 1.0)
        valence = va_latent[:, 0].copy()
        arousal = va_latent[:, 1].copy()
        if noise_sigma > 0:
            emb += rng.normal(scale=noise_sigma, size=emb.shape)
            logit += rng.normal(scale=noise_sigma, size=logit.shape)
            valence = np.clip(valence + rng.normal(scale=noise_sigma, size=frames_per_video), -1.0, 1.0)
            arousal = np.clip(arousal + rng.normal(scale=noise_sigma, size=frames_per_video), -1.0, 1.0)
        tracks.append(VideoTrack(
            video_id=video_id,
            frame_index=np.arange(frames_per_video),
            embeddings=emb,
            logits=logit,
            valence=valence,
            arousal=arousal,
        ))
        invalid = np.zeros(frames_per_video, dtype=bool)
        if task is Task.VA:
            values = va_latent
        elif task is Task.EXPR:
            values = _expr_class_from_latent(z)
        else:
            values = (z @ au_map.T >= au_cut).astype(int)
        labels[video_id] = TaskLabels(task=task, values=values, invalid=invalid)
    return Dataset(tracks=tracks, D=SYNTH_D), labels


def write_labels(labels: dict[str, TaskLabels], path) -> None:
    """Write labels in the one-file-per-video annotation format."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for video_id, lab in sorted(labels.items()):
        with (path / f"{video_id}.txt").open("w", encoding="utf-8", newline="\n") as fh:
            for i in range(len(lab)):
                if lab.task is Task.VA:
                    if lab.invalid[i]:
                        fh.write(f"{_fmt(VA_SENTINEL)},{_fmt(VA_SENTINEL)}\n")
                    else:
                        fh.write(f"{_fmt(lab.values[i, 0])},{_fmt(lab.values[i, 1])}\n")
                elif lab.task is Task.EXPR:
                    fh.write(f"{CLASS_SENTINEL if lab.invalid[i] else int(lab.values[i])}\n")
                else:
                    if lab.invalid[i]:
                        fh.write(",".join([str(CLASS_SENTINEL)] * N_AUS) + "\n")
                    else:
                        fh.write(",".join(str(int(b)) for b in lab.values[i]) + "\n")
