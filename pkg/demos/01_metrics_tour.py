"""A short tour of the metric suite: CCC, P_VA, macro F1, multilabel F1.

Run: python3 demos/01_metrics_tour.py
"""
import numpy as np

from affectkit import ccc, macro_f1, mean_ccc, multilabel_f1

rng = np.random.default_rng(0)

# --- CCC rewards agreement, not just correlation -------------------------
# y = 2x is perfectly correlated with x, but its scale is off, so the
# concordance correlation coefficient stays well below 1.
x = np.array([1.0, 2.0, 3.0])
print("ccc(x, 2x)       =", ccc(x, 2 * x))          # 4/11
print("ccc(x, x)        =", ccc(x, x))              # 1.0
print("ccc(x, x + 0.5)  =", ccc(x, x + 0.5))        # mean shift penalised
print("ccc(x, const)    =", ccc(x, np.full(3, 0.3)))  # 0.0

# --- P_VA is the plain average of the valence and arousal CCCs -----------
t = np.linspace(0, 4 * np.pi, 400)
true_v, true_a = np.sin(t), np.cos(t)
pred_v = true_v + rng.normal(0, 0.15, size=t.size)
pred_a = true_a + rng.normal(0, 0.30, size=t.size)
r = mean_ccc((pred_v, pred_a), (true_v, true_a))
print(f"\nccc_v={r.ccc_v:.3f}  ccc_a={r.ccc_a:.3f}  p_va={r.p_va:.3f}")

# --- Macro F1 treats every class equally ----------------------------------
# A classifier that always answers 0 looks fine on accuracy when class 0
# dominates, but macro F1 exposes the three classes it never predicts.
true = np.array([0] * 90 + [1, 2, 3] * 3 + [3])
pred = np.zeros_like(true)
rep = macro_f1(pred, true, n_classes=4)
print(f"\nalways-0 classifier: accuracy={rep.accuracy:.2f} "
      f"macro_f1={rep.macro_f1:.2f} per-class={rep.per_class_f1}")

# --- Multilabel F1 scores each action unit independently -----------------
true_bits = rng.integers(0, 2, size=(200, 4))
pred_bits = true_bits.copy()
flip = rng.random(size=pred_bits.shape) < 0.1   # 10% label noise
pred_bits[flip] ^= 1
rep = multilabel_f1(pred_bits, true_bits)
print(f"\nper-unit F1 under 10% flips: "
      + " ".join(f"{f:.3f}" for f in rep.per_class_f1)
      + f"  macro={rep.macro_f1:.3f}")
