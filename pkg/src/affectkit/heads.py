"""Task heads: a linear tanh VA regressor trained on a CCC loss, one-hidden-
layer MLP classifiers for expressions (weighted cross-entropy) and action
units (weighted BCE), plus the Other/non-Other adapter for pretrained logits.

All training is plain seeded mini-batch gradient descent in float64; the same
seed always yields bit-identical parameters.
"""
from __future__ import annotations

import base64
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataio import AFFECTNET_ORDER, CHALLENGE_EXPRESSIONS, N_AUS, N_LOGITS

SELECTOR_KINDS = ("logits_va", "embeddings", "embeddings_plus_logits")

# AffectNet index -> challenge class id (Contempt has no challenge counterpart)
_AFFECTNET_TO_CHALLENGE = {0: 1, 2: 2, 3: 3, 4: 4, 5: 0, 6: 5, 7: 6}
_CONTEMPT = AFFECTNET_ORDER.index("Contempt")
_OTHER_ID = CHALLENGE_EXPRESSIONS.index("Other")


@dataclass(frozen=True)
class FeatureSelector:
    """Maps a VideoTrack / FrameFeatures to the head's input vector."""
    kind: str = "logits_va"

    def __post_init__(self):
        if self.kind not in SELECTOR_KINDS:
            raise ValueError(f"unknown selector kind {self.kind!r}")

    def dim(self, d: int) -> int:
        if self.kind == "logits_va":
            return N_LOGITS + 2
        if self.kind == "embeddings":
            return d
        return d + N_LOGITS + 2

    def matrix(self, track) -> np.ndarray:
        """Build the (T, F) input matrix from a VideoTrack."""
        va = np.column_stack([track.valence, track.arousal])
        if self.kind == "logits_va":
            return np.hstack([track.logits, va])
        if self.kind == "embeddings":
            return np.asarray(track.embeddings, dtype=float)
        return np.hstack([track.embeddings, track.logits, va])

    def vector(self, frame) -> np.ndarray:
        va = np.array([frame.valence, frame.arousal])
        if self.kind == "logits_va":
            return np.concatenate([frame.logits, va])
        if self.kind == "embeddings":
            return np.asarray(frame.embedding, dtype=float)
        return np.concatenate([frame.embedding, frame.logits, va])


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 100
    batch_size: int = 512
    hidden_size: int = 128
    seed: int = 0
    class_weights: object = "auto"  # "auto" or an explicit weight vector
    l2: float = 0.0

    def validate(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")


@dataclass
class HeadModel:
    selector: FeatureSelector
    W2: np.ndarray            # (O, H) or (O, F)
    b2: np.ndarray            # (O,)
    activation: str           # tanh | softmax | sigmoid
    W1: np.ndarray | None = None   # (H, F)
    b1: np.ndarray | None = None
    loss: str = ""
    seed: int = 0
    train_log: dict = field(default_factory=dict, repr=False)

    @property
    def n_outputs(self) -> int:
        return self.W2.shape[0]

    def preactivations(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[1] != (self.W1.shape[1] if self.W1 is not None else self.W2.shape[1]):
            raise ValueError(
                f"input dimension {X.shape[1]} does not match model "
                f"({self.W1.shape[1] if self.W1 is not None else self.W2.shape[1]})"
            )
        h = X
        if self.W1 is not None:
            h = np.maximum(X @ self.W1.T + self.b1, 0.0)
        return h @ self.W2.T + self.b2

    def save(self, path) -> None:
        doc = {
            "version": 1,
            "selector": self.selector.kind,
            "activation": self.activation,
            "loss": self.loss,
            "seed": self.seed,
            "shapes": {
                "W2": list(self.W2.shape), "b2": list(self.b2.shape),
                **({"W1": list(self.W1.shape), "b1": list(self.b1.shape)}
                   if self.W1 is not None else {}),
            },
            "params": {
                name: base64.b64encode(
                    np.ascontiguousarray(arr, dtype="<f8").tobytes()
                ).decode("ascii")
                for name, arr in self._param_items()
            },
        }
        Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n",
                              encoding="utf-8")

    def _param_items(self):
        items = [("W2", self.W2), ("b2", self.b2)]
        if self.W1 is not None:
            items += [("W1", self.W1), ("b1", self.b1)]
        return items

    @classmethod
    def load(cls, path) -> "HeadModel":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("version") != 1:
            raise ValueError("unsupported model file version")

        def block(name):
            raw = base64.b64decode(doc["params"][name])
            return np.frombuffer(raw, dtype="<f8").reshape(doc["shapes"][name]).copy()

        has_hidden = "W1" in doc["shapes"]
        return cls(
            selector=FeatureSelector(doc["selector"]),
            W2=block("W2"), b2=block("b2"),
            W1=block("W1") if has_hidden else None,
            b1=block("b1") if has_hidden else None,
            activation=doc["activation"], loss=doc["loss"], seed=doc["seed"],
        )


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ----- losses: each returns (loss, dL/dpreactivation) ------------------------

def _ccc_and_grad(p: np.ndarray, y: np.ndarray):
    """CCC of two 1-d arrays plus its gradient w.r.t. p (population moments)."""
    n = p.shape[0]
    mp, my = p.mean(), y.mean()
    dp, dy = p - mp, y - my
    cov = (dp * dy).mean()
    denom = (dp ** 2).mean() + (dy ** 2).mean() + (mp - my) ** 2
    num = 2.0 * cov
    c = num / denom
    dnum = 2.0 * dy / n
    ddenom = 2.0 * dp / n + 2.0 * (mp - my) / n
    grad = (dnum * denom - num * ddenom) / denom ** 2
    return c, grad


def ccc_loss_and_grad(pred: np.ndarray, target: np.ndarray):
    """Loss 1 - mean per-column CCC; gradient w.r.t. the predictions."""
    cols = pred.shape[1]
    grads = np.empty_like(pred)
    total = 0.0
    for j in range(cols):
        c, g = _ccc_and_grad(pred[:, j], target[:, j])
        total += c
        grads[:, j] = g
    return 1.0 - total / cols, -grads / cols


def weighted_ce_loss_and_grad(logits: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Mean weighted categorical cross-entropy on softmax preactivations."""
    n = logits.shape[0]
    p = _softmax(logits)
    wy = w[y]
    loss = float(np.mean(wy * -np.log(np.maximum(p[np.arange(n), y], 1e-300))))
    grad = p.copy()
    grad[np.arange(n), y] -= 1.0
    grad *= wy[:, None] / n
    return loss, grad


def weighted_bce_loss_and_grad(pre: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Mean per-frame sum of per-unit weighted BCE on sigmoid preactivations."""
    n = pre.shape[0]
    s = _sigmoid(pre)
    # -y log s - (1-y) log(1-s) == softplus(-pre) + (1-y)*pre, stable everywhere
    softplus_neg = np.logaddexp(0.0, -pre)
    loss = float(np.sum(w * (softplus_neg + (1.0 - y) * pre)) / n)
    grad = w * (s - y) / n
    return loss, grad


# ----- shared GD machinery ----------------------------------------------------

def _glorot_uniform(rng, shape):
    fan_out, fan_in = shape
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


def _init_params(rng, n_in: int, n_out: int, hidden: int | None):
    if hidden is None:
        return {"W2": _glorot_uniform(rng, (n_out, n_in)), "b2": np.zeros(n_out)}
    return {
        "W1": _glorot_uniform(rng, (hidden, n_in)), "b1": np.zeros(hidden),
        "W2": _glorot_uniform(rng, (n_out, hidden)), "b2": np.zeros(n_out),
    }


def _forward_hidden(params, X):
    if "W1" in params:
        h_pre = X @ params["W1"].T + params["b1"]
        h = np.maximum(h_pre, 0.0)
    else:
        h_pre, h = None, X
    return h_pre, h, h @ params["W2"].T + params["b2"]


def _backprop(params, X, h_pre, h, dpre):
    grads = {"W2": dpre.T @ h, "b2": dpre.sum(axis=0)}
    if "W1" in params:
        dh = dpre @ params["W2"]
        dh = np.where(h_pre > 0, dh, 0.0)
        grads["W1"] = dh.T @ X
        grads["b1"] = dh.sum(axis=0)
    return grads


def loss_and_grads(params: dict, X: np.ndarray, Y: np.ndarray, loss: str,
                   weights: np.ndarray | None = None, l2: float = 0.0):
    """Full loss and analytic gradients for every parameter tensor.

    loss: "ccc" (tanh outputs), "weighted_ce", or "weighted_bce".
    """
    h_pre, h, pre = _forward_hidden(params, X)
    if loss == "ccc":
        pred = np.tanh(pre)
        value, dpred = ccc_loss_and_grad(pred, Y)
        dpre = dpred * (1.0 - pred ** 2)
    elif loss == "weighted_ce":
        value, dpre = weighted_ce_loss_and_grad(pre, Y.astype(int), weights)
    elif loss == "weighted_bce":
        value, dpre = weighted_bce_loss_and_grad(pre, Y.astype(float), weights)
    else:
        raise ValueError(f"unknown loss {loss!r}")
    grads = _backprop(params, X, h_pre, h, dpre)
    if l2 > 0.0:
        for name in grads:
            if name.startswith("W"):
                value += 0.5 * l2 * float(np.sum(params[name] ** 2))
                grads[name] = grads[name] + l2 * params[name]
    return value, grads


def _split_pairs(pairs):
    if isinstance(pairs, tuple) and len(pairs) == 2 and hasattr(pairs[0], "ndim"):
        X, Y = pairs
    else:
        X = np.array([np.asarray(p[0], dtype=float) for p in pairs])
        Y = np.array([p[1] for p in pairs])
    return np.asarray(X, dtype=float), np.asarray(Y)


def _run_gd(X, Y, loss, config: TrainConfig, n_outputs, hidden, weights,
            skip_batch=None, val=None, val_metric=None):
    config.validate()
    rng = np.random.default_rng(config.seed)
    params = _init_params(rng, X.shape[1], n_outputs, hidden)
    n = X.shape[0]
    log = {"epoch_loss": [], "skipped_batches": 0, "val_metric": []}
    best = None
    for _epoch in range(config.epochs):
        perm = rng.permutation(n)
        epoch_loss, n_batches = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            xb, yb = X[idx], Y[idx]
            if skip_batch is not None and skip_batch(yb):
                log["skipped_batches"] += 1
                continue
            value, grads = loss_and_grads(params, xb, yb, loss, weights, config.l2)
            for name, g in grads.items():
                params[name] -= config.learning_rate * g
            epoch_loss += value
            n_batches += 1
        log["epoch_loss"].append(epoch_loss / max(n_batches, 1))
        if val is not None:
            m = val_metric(params)
            log["val_metric"].append(m)
            if best is None or m > best[0]:
                best = (m, {k: v.copy() for k, v in params.items()})
    if best is not None:
        params = best[1]
    if log["skipped_batches"]:
        warnings.warn(f"skipped {log['skipped_batches']} constant-target batches")
    return params, log


def train_va_head(pairs, config: TrainConfig | None = None, val_pairs=None) -> HeadModel:
    """Linear two-output tanh head trained to maximize mean CCC per batch.

    Mini-batches whose valence and arousal targets are both constant are
    skipped (CCC gradient undefined) and counted in the training log. When a
    validation split is given, the epoch with the best validation mean CCC
    is returned; otherwise the final epoch.
    """
    config = config or TrainConfig(batch_size=4096)
    X, Y = _split_pairs(pairs)
    Y = Y.astype(float)
    if X.shape[0] < 2:
        raise ValueError("need at least 2 training pairs")

    def skip(yb):
        return yb.shape[0] < 2 or (np.ptp(yb[:, 0]) == 0.0 and np.ptp(yb[:, 1]) == 0.0)

    val_metric = None
    val = None
    if val_pairs is not None:
        Xv, Yv = _split_pairs(val_pairs)
        Yv = Yv.astype(float)
        val = True

        def val_metric(params):
            pred = np.tanh(_forward_hidden(params, Xv)[2])
            loss, _ = ccc_loss_and_grad(pred, Yv)
            return 1.0 - loss

    params, log = _run_gd(X, Y, "ccc", config, n_outputs=2, hidden=None,
                          weights=None, skip_batch=skip, val=val, val_metric=val_metric)
    return HeadModel(selector=FeatureSelector("logits_va"), W2=params["W2"],
                     b2=params["b2"], activation="tanh", loss="ccc",
                     seed=config.seed, train_log=log)


def predict_va(model: HeadModel, X) -> np.ndarray:
    """Per-frame (valence, arousal) in (-1, 1)."""
    if model.activation != "tanh":
        raise ValueError("model is not a VA head")
    out = np.tanh(model.preactivations(np.asarray(X, dtype=float)))
    # float tanh saturates to exactly +/-1 for |z| > ~19; keep the open interval
    lim = np.nextafter(1.0, 0.0)
    return np.clip(out, -lim, lim)


def auto_class_weights(y: np.ndarray, n_classes: int) -> np.ndarray:
    """Inverse class frequency, normalized to mean 1 over present classes."""
    counts = np.bincount(y, minlength=n_classes).astype(float)
    present = counts > 0
    if not present.all():
        absent = [c for c in range(n_classes) if not present[c]]
        warnings.warn(f"classes absent from training data get weight 0: {absent}")
    w = np.zeros(n_classes)
    inv = 1.0 / counts[present]
    w[present] = inv / inv.mean()
    return w


def auto_unit_weights(Y: np.ndarray) -> np.ndarray:
    """Per-unit negative/positive ratio capped at 100; unitless 1 if no positives."""
    pos = Y.sum(axis=0).astype(float)
    neg = Y.shape[0] - pos
    w = np.ones(Y.shape[1])
    zero = pos == 0
    if zero.any():
        warnings.warn(f"units with zero positives get weight 1: {list(np.where(zero)[0])}")
    nz = ~zero
    w[nz] = np.minimum(neg[nz] / pos[nz], 100.0)
    return w


def _resolve_weights(config, Y, n_outputs, multilabel):
    cw = config.class_weights
    if isinstance(cw, str) and cw == "auto":
        return auto_unit_weights(Y) if multilabel else auto_class_weights(Y, n_outputs)
    w = np.asarray(cw, dtype=float)
    if w.shape != (n_outputs,):
        raise ValueError(f"class_weights must have length {n_outputs}")
    return w


def train_classifier(pairs, n_outputs: int = 8, config: TrainConfig | None = None,
                     selector: FeatureSelector | None = None) -> HeadModel:
    """Softmax classifier with one hidden ReLU layer, weighted cross-entropy."""
    config = config or TrainConfig()
    X, Y = _split_pairs(pairs)
    Y = Y.astype(int).reshape(-1)
    if Y.size and (Y.min() < 0 or Y.max() >= n_outputs):
        raise ValueError("class id out of range")
    weights = _resolve_weights(config, Y, n_outputs, multilabel=False)
    params, log = _run_gd(X, Y, "weighted_ce", config, n_outputs=n_outputs,
                          hidden=config.hidden_size, weights=weights)
    return HeadModel(selector=selector or FeatureSelector("logits_va"),
                     W1=params["W1"], b1=params["b1"], W2=params["W2"], b2=params["b2"],
                     activation="softmax", loss="weighted_ce", seed=config.seed,
                     train_log=log)


def train_au_head(pairs, config: TrainConfig | None = None,
                  selector: FeatureSelector | None = None) -> HeadModel:
    """12-unit sigmoid head with one hidden ReLU layer, weighted BCE."""
    config = config or TrainConfig()
    X, Y = _split_pairs(pairs)
    Y = Y.astype(int)
    if Y.ndim != 2 or Y.shape[1] != N_AUS:
        raise ValueError(f"AU labels must be (T, {N_AUS}) bits")
    weights = _resolve_weights(config, Y, N_AUS, multilabel=True)
    params, log = _run_gd(X, Y, "weighted_bce", config, n_outputs=N_AUS,
                          hidden=config.hidden_size, weights=weights)
    return HeadModel(selector=selector or FeatureSelector("logits_va"),
                     W1=params["W1"], b1=params["b1"], W2=params["W2"], b2=params["b2"],
                     activation="sigmoid", loss="weighted_bce", seed=config.seed,
                     train_log=log)


def train_linear_member(pairs, task: str, config: TrainConfig | None = None,
                        selector: FeatureSelector | None = None) -> HeadModel:
    """Self-contained second blend member: L2-regularized linear head."""
    config = config or TrainConfig(l2=1e-3)
    X, Y = _split_pairs(pairs)
    if task == "va":
        Y = Y.astype(float)

        def skip(yb):
            return yb.shape[0] < 2 or (np.ptp(yb[:, 0]) == 0.0 and np.ptp(yb[:, 1]) == 0.0)

        params, log = _run_gd(X, Y, "ccc", config, n_outputs=2, hidden=None,
                              weights=None, skip_batch=skip)
        act, loss = "tanh", "ccc"
    elif task == "expr":
        Y = Y.astype(int).reshape(-1)
        weights = _resolve_weights(config, Y, 8, multilabel=False)
        params, log = _run_gd(X, Y, "weighted_ce", config, n_outputs=8,
                              hidden=None, weights=weights)
        act, loss = "softmax", "weighted_ce"
    elif task == "au":
        Y = Y.astype(int)
        weights = _resolve_weights(config, Y, N_AUS, multilabel=True)
        params, log = _run_gd(X, Y, "weighted_bce", config, n_outputs=N_AUS,
                              hidden=None, weights=weights)
        act, loss = "sigmoid", "weighted_bce"
    else:
        raise ValueError(f"unknown task {task!r}")
    return HeadModel(selector=selector or FeatureSelector("logits_va"),
                     W2=params["W2"], b2=params["b2"], activation=act,
                     loss=loss, seed=config.seed, train_log=log)


def predict_proba(model: HeadModel, X) -> np.ndarray:
    """Softmax probabilities (rows sum to 1) or per-unit sigmoid scores."""
    pre = model.preactivations(np.asarray(X, dtype=float))
    if model.activation == "softmax":
        return _softmax(pre)
    if model.activation == "sigmoid":
        return _sigmoid(pre)
    raise ValueError(f"predict_proba not defined for activation {model.activation!r}")


def adapt_pretrained_logits(logits_8, other_prob: float, other_threshold: float = 0.5) -> int:
    """Route a frame to "Other" or the best non-Contempt pretrained class.

    logits_8 is in AffectNet order; the returned id is a challenge class.
    """
    logits = np.asarray(logits_8, dtype=float)
    if logits.shape != (N_LOGITS,):
        raise ValueError(f"expected {N_LOGITS} logits, got shape {logits.shape}")
    if other_prob >= other_threshold:
        return _OTHER_ID
    masked = logits.copy()
    masked[_CONTEMPT] = -np.inf
    return _AFFECTNET_TO_CHALLENGE[int(np.argmax(masked))]
