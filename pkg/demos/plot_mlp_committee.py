"""
A committee of small nets as a nonlinear predictor
==================================================

Train five 10-2-1 nets from different seeds on one frame and combine
them. The median shrugs off a member that landed in a poor minimum.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from npvq import synthetic
from npvq.neural import Committee, TrainConfig, build_training_set, forward, train_committee

x = synthetic.voiced_source(600, seed=4).samples
train = build_training_set(x[:200])
test = build_training_set(x[200:400])

committee = train_committee(train, TrainConfig(epochs=50))
for k, net in enumerate(committee.nets):
    err = np.mean((forward(net, test.inputs) - test.targets) ** 2)
    print(f"member {k}: test MSE {err:.2e}")

for combiner in ("mean", "median"):
    pred = Committee(committee.nets, combiner).predict(test.inputs)
    print(f"{combiner:6s}: test MSE {np.mean((pred - test.targets) ** 2):.2e}")

fig, ax = plt.subplots(figsize=(6, 3))
ax.plot(test.targets[:, 0], label="next sample")
ax.plot(committee.predict(test.inputs)[:, 0], "--", label="median committee")
ax.legend()
fig.tight_layout()
fig.savefig("mlp_committee.png", dpi=120)
