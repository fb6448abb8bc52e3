"""
Rate versus segmental SNR for the linear ADPCM coder
====================================================

Each added bit per sample should buy several dB.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from npvq import codec, synthetic
from npvq.metrics import segsnr

sources = {
    "AR(2)": synthetic.ar2_source(3 * 8000, seed=1),
    "voiced": synthetic.voiced_source(3 * 8000, seed=1),
}

fig, ax = plt.subplots(figsize=(5, 3))
for name, x in sources.items():
    curve = []
    for nq in range(2, 6):
        _, diag = codec.encode(x, codec.SchemeConfig("lpc_scalar", nq=nq))
        curve.append(segsnr(x, diag.reconstruction).segsnr_db)
    print(name, [round(v, 1) for v in curve])
    ax.plot(range(2, 6), curve, "o-", label=name)

ax.set_xlabel("bits per sample")
ax.set_ylabel("SEGSNR (dB)")
ax.legend()
fig.tight_layout()
fig.savefig("rate_distortion.png", dpi=120)
