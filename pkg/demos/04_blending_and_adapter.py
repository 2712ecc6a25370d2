"""Ensemble blending of two expression heads, plus the pretrained-logit
adapter that maps the 8 backbone classes onto the challenge label set.

Run: python3 demos/04_blending_and_adapter.py
"""
import numpy as np

import affectkit as ak
from affectkit.heads import predict_proba, train_classifier, train_linear_member
from affectkit.postprocess import PredictionSeq, blend

ds, labels = ak.generate_synthetic("expr", n_videos=8, frames_per_video=400,
                                   noise_sigma=0.4, seed=30)
ds_te, labels_te = ak.generate_synthetic("expr", n_videos=3,
                                         frames_per_video=400,
                                         noise_sigma=0.4, seed=33)

selector = ak.FeatureSelector("logits_va")
X = np.vstack([selector.matrix(t) for t in ds.tracks])
Y = np.concatenate([labels[t.video_id].values for t in ds.tracks])

# Two members with different inductive biases: an MLP and a linear model.
mlp = train_classifier((X, Y), 8, ak.TrainConfig(
    learning_rate=0.1, epochs=80, batch_size=512, hidden_size=64, seed=0))
lin = train_linear_member((X, Y), "expr", ak.TrainConfig(
    learning_rate=0.1, epochs=80, batch_size=512, seed=0, l2=1e-4))

Y_te = np.concatenate([labels_te[t.video_id].values for t in ds_te.tracks])


def pooled_f1(weight):
    preds = []
    for t in ds_te.tracks:
        a = PredictionSeq(t.video_id, t.frame_index,
                          predict_proba(mlp, selector.matrix(t)))
        b = PredictionSeq(t.video_id, t.frame_index,
                          predict_proba(lin, selector.matrix(t)))
        preds.append(blend(a, b, weight).values.argmax(axis=1))
    return ak.macro_f1(np.concatenate(preds), Y_te, 8).macro_f1


print("weight  macro F1   (1.0 = MLP alone, 0.0 = linear alone)")
for w in (0.0, 0.25, 0.5, 0.75, 1.0):
    print(f"  {w:.2f}   {pooled_f1(w):.4f}")

# --- Pretrained-logit adapter ---------------------------------------------
# The backbone emits 8 logits in its own class order (including Contempt,
# which the challenge set lacks); the adapter picks the challenge class, or
# routes the frame to "Other" when that gate probability is high enough.
logits = np.array([0.1, 0.2, 0.1, 0.1, 2.5, 0.3, 0.2, 0.4])  # Happiness wins
for other_prob in (0.2, 0.8):
    cls = ak.adapt_pretrained_logits(logits, other_prob)
    print(f"\nother_prob={other_prob}: challenge class "
          f"{cls} ({ak.CHALLENGE_EXPRESSIONS[cls]})")
