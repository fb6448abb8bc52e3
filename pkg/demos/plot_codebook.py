"""
Training a residual codebook
============================

Residual pairs are harvested from the two-sample predictor running with a
scalar quantizer, then clustered with the generalized Lloyd iteration.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from npvq import synthetic
from npvq.evaluation import harvest_residuals, train_codebook

speech = [synthetic.voiced_source(2 * 8000, seed=2)]
E = harvest_residuals(speech, nq=3, epochs=6)
cb = train_codebook(speech, bits=5, epochs=6)

hist = cb.training_meta["distortion_history"]
print(f"{len(cb)} codewords after {cb.training_meta['lloyd_iterations']} iterations")
print(f"distortion {hist[0]:.3e} -> {hist[-1]:.3e}")

fig, ax = plt.subplots(figsize=(4, 4))
ax.plot(E[:, 0], E[:, 1], ".", ms=2, alpha=0.3)
ax.plot(cb.codewords[:, 0], cb.codewords[:, 1], "rx")
ax.set_xlabel("e1")
ax.set_ylabel("e2")
fig.tight_layout()
fig.savefig("codebook.png", dpi=120)
