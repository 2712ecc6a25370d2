"""Action-unit detection: per-unit threshold search vs a fixed 0.5 cut.

Trains the sigmoid multi-label head on synthetic AU data, then shows that
tuning one decision threshold per unit on a grid improves macro F1 over the
default 0.5, especially for rare units whose scores sit low.

Run: python3 demos/03_au_thresholds.py
"""
import numpy as np

import affectkit as ak

ds, labels = ak.generate_synthetic("au", n_videos=8, frames_per_video=400,
                                   noise_sigma=0.4, seed=31)
ds_te, labels_te = ak.generate_synthetic("au", n_videos=3, frames_per_video=400,
                                         noise_sigma=0.4, seed=32)

selector = ak.FeatureSelector("logits_va")
X = np.vstack([selector.matrix(t) for t in ds.tracks])
Y = np.vstack([labels[t.video_id].values for t in ds.tracks])

config = ak.TrainConfig(learning_rate=0.1, epochs=120, batch_size=512,
                        hidden_size=64, seed=0)
model = ak.train_au_head((X, Y), config)

scores = np.vstack([ak.predict_proba(model, selector.matrix(t))
                    for t in ds.tracks])
scores_te = np.vstack([ak.predict_proba(model, selector.matrix(t))
                       for t in ds_te.tracks])
Y_te = np.vstack([labels_te[t.video_id].values for t in ds_te.tracks])

# Search thresholds on the training split, apply them to the held-out one.
thresholds, _ = ak.search_thresholds(scores, Y, grid_step=0.05)

fixed = ak.multilabel_f1(ak.apply_thresholds(scores_te, np.full(12, 0.5)), Y_te)
tuned = ak.multilabel_f1(ak.apply_thresholds(scores_te, thresholds), Y_te)

print("unit  threshold  F1@0.5  F1@tuned")
for u, name in enumerate(ak.AU_NAMES):
    print(f"{name:>5}   {thresholds[u]:.2f}     {fixed.per_class_f1[u]:.3f}"
          f"   {tuned.per_class_f1[u]:.3f}")
print(f"\nmacro F1: fixed 0.5 = {fixed.macro_f1:.4f}, "
      f"tuned = {tuned.macro_f1:.4f}")
