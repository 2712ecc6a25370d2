"""Frame-level video affect analysis toolkit.

Trains valence/arousal, expression, and action-unit heads on precomputed
per-frame facial features, then blends, smooths, and thresholds predictions,
with the full metric suite (CCC, macro F1) for evaluation.
"""
from .dataio import (
    AFFECTNET_ORDER,
    AU_NAMES,
    CHALLENGE_EXPRESSIONS,
    Dataset,
    FrameFeatures,
    Task,
    TaskLabels,
    VideoTrack,
    align,
    generate_synthetic,
    load_features,
    load_labels,
    write_features,
    write_labels,
)
from .heads import (
    FeatureSelector,
    HeadModel,
    TrainConfig,
    adapt_pretrained_logits,
    predict_proba,
    predict_va,
    train_au_head,
    train_classifier,
    train_linear_member,
    train_va_head,
)
from .metrics import CccResult, F1Report, ccc, macro_f1, mean_ccc, multilabel_f1
from .postprocess import (
    PredictionSeq,
    apply_thresholds,
    blend,
    search_thresholds,
    smooth,
    smooth_matrix,
    sweep_kernel,
)

__version__ = "0.1.0"
