"""
Where the vector residuals fall
===============================

Residual pairs from the two-sample predictor tend to share a sign, so
the cloud leans along the diagonal. That leaning is what a vector
quantizer can exploit and a pair of scalar quantizers cannot.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from npvq import codec, synthetic
from npvq.metrics import residual_scatter

x = synthetic.ar2_source(2 * 8000, seed=3)
_, diag = codec.encode(x, codec.SchemeConfig("mlp_vector_sq", nq=4))
sc = residual_scatter(diag)
print(f"correlation {sc.correlation:.2f}, near-diagonal fraction {sc.diagonal_fraction:.2f}")

lim = np.percentile(np.abs(sc.rows), 99)
fig, ax = plt.subplots(figsize=(4, 4))
ax.plot(sc.rows[:, 0], sc.rows[:, 1], ".", ms=2, alpha=0.3)
ax.plot([-lim, lim], [-lim, lim], "k--", lw=0.8)
ax.set_xlim(-lim, lim)
ax.set_ylim(-lim, lim)
fig.tight_layout()
fig.savefig("residual_scatter.png", dpi=120)
