"""Evaluation metrics for the three frame-level affect tasks.

Conventions: CCC uses population (divide-by-T) moments and is pooled over all
frames of a split; any F1 with a zero denominator is defined as 0 so macro
means stay finite on degenerate splits.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CccResult:
    ccc_v: float
    ccc_a: float
    p_va: float

    def to_dict(self) -> dict:
        return {"ccc_v": self.ccc_v, "ccc_a": self.ccc_a, "p_va": self.p_va}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class F1Report:
    per_class_f1: tuple
    macro_f1: float
    accuracy: float | None

    def to_dict(self) -> dict:
        return {
            "per_class_f1": list(self.per_class_f1),
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def ccc(x, y) -> float:
    """Concordance correlation coefficient with population moments.

    Returns 1.0 when both sequences are constant and equal (0/0 by the
    formula); a single constant sequence gives an exact 0 (zero covariance).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("ccc expects 1-d sequences")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 2:
        raise ValueError("ccc needs at least 2 samples")
    mx = x.mean()
    my = y.mean()
    x_const = np.ptp(x) == 0.0
    y_const = np.ptp(y) == 0.0
    if x_const and y_const:
        return 1.0 if mx == my else 0.0
    if x_const or y_const:
        # true covariance with a constant is 0; skip the formula so floating
        # rounding can't produce a tiny nonzero residue
        return 0.0
    cov = ((x - mx) * (y - my)).mean()
    denom = x.var() + y.var() + (mx - my) ** 2
    if denom == 0.0:
        return 1.0
    return float(2.0 * cov / denom)


def mean_ccc(pred_va, true_va) -> CccResult:
    """Per-dimension CCC for (valence, arousal) plus their plain average."""
    pv, pa = pred_va
    tv, ta = true_va
    ccc_v = ccc(pv, tv)
    ccc_a = ccc(pa, ta)
    return CccResult(ccc_v=ccc_v, ccc_a=ccc_a, p_va=(ccc_v + ccc_a) / 2.0)


def _binary_f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 0.0
    return 2.0 * tp / denom


def macro_f1(pred_classes, true_classes, n_classes: int) -> F1Report:
    """Macro-averaged F1 over all n_classes; absent classes contribute 0."""
    pred = np.asarray(pred_classes, dtype=int)
    true = np.asarray(true_classes, dtype=int)
    if pred.shape != true.shape or pred.ndim != 1:
        raise ValueError("prediction/label shape mismatch")
    for name, arr in (("pred", pred), ("true", true)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise ValueError(f"{name} class id out of range [0, {n_classes})")
    per_class = []
    for c in range(n_classes):
        tp = int(np.sum((pred == c) & (true == c)))
        fp = int(np.sum((pred == c) & (true != c)))
        fn = int(np.sum((pred != c) & (true == c)))
        per_class.append(_binary_f1(tp, fp, fn))
    accuracy = float(np.mean(pred == true)) if pred.size else 0.0
    return F1Report(
        per_class_f1=tuple(per_class),
        macro_f1=float(np.mean(per_class)),
        accuracy=accuracy,
    )


def multilabel_f1(pred_bits, true_bits) -> F1Report:
    """Per-unit binary F1 on the positive class, macro-averaged over units."""
    pred = np.asarray(pred_bits)
    true = np.asarray(true_bits)
    if pred.shape != true.shape or pred.ndim != 2:
        raise ValueError("prediction/label shape mismatch")
    for name, arr in (("pred", pred), ("true", true)):
        if not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name} contains a non-binary entry")
    pred = pred.astype(int)
    true = true.astype(int)
    per_unit = []
    for u in range(pred.shape[1]):
        tp = int(np.sum((pred[:, u] == 1) & (true[:, u] == 1)))
        fp = int(np.sum((pred[:, u] == 1) & (true[:, u] == 0)))
        fn = int(np.sum((pred[:, u] == 0) & (true[:, u] == 1)))
        per_unit.append(_binary_f1(tp, fp, fn))
    return F1Report(
        per_class_f1=tuple(per_unit),
        macro_f1=float(np.mean(per_unit)),
        accuracy=None,
    )
