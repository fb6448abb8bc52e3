"""One-hidden-layer perceptron predictors.

The network is ``y = W2 tanh(W1 x + b1) + b2``. Training minimizes
``F = beta * E_D + alpha * E_W`` with ``E_D = sum(r**2)/2`` and
``E_W = sum(w**2)/2`` by Levenberg-Marquardt steps; with Bayesian
regularization enabled, ``alpha`` and ``beta`` are re-estimated after every
accepted step from the Gauss-Newton Hessian (MacKay's evidence framework in
the Foresee-Hagan form).

Parameters are flattened as ``[W1 (row-major), b1, W2 (row-major), b2]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

N_IN = 10
N_HIDDEN = 2
TRAINING_MODES = ("scalar", "hint", "vector")
COMBINERS = ("mean", "median")


class EmptyTrainingSetError(ValueError):
    pass


@dataclass(frozen=True)
class MlpNet:
    n_in: int
    n_hidden: int
    n_out: int
    params: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        p = np.asarray(self.params, dtype=np.float64).reshape(-1)
        if p.size != n_params(self.n_in, self.n_hidden, self.n_out):
            raise ValueError("parameter vector does not match dimensions")
        p.setflags(write=False)
        object.__setattr__(self, "params", p)

    @property
    def dims(self):
        return (self.n_in, self.n_hidden, self.n_out)

    def unpack(self):
        return unpack(self.params, self.n_in, self.n_hidden, self.n_out)


def n_params(n_in, n_hidden, n_out):
    return n_hidden * n_in + n_hidden + n_out * n_hidden + n_out


def unpack(w, n_in, n_hidden, n_out):
    i = 0
    W1 = w[i:i + n_hidden * n_in].reshape(n_hidden, n_in)
    i += n_hidden * n_in
    b1 = w[i:i + n_hidden]
    i += n_hidden
    W2 = w[i:i + n_out * n_hidden].reshape(n_out, n_hidden)
    i += n_out * n_hidden
    return W1, b1, W2, w[i:i + n_out]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    n_starts: int = 5
    mu_init: float = 1e-3
    mu_up: float = 10.0
    mu_down: float = 0.1
    mu_max: float = 1e10
    use_bayesian: bool = True
    alpha_init: float = 0.0
    beta_init: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.n_starts < 1 or not self.mu_init > 0:
            raise ValueError("epochs and n_starts must be >= 1 and mu_init > 0")


@dataclass(frozen=True)
class TrainingSet:
    inputs: np.ndarray
    targets: np.ndarray
    provenance: str = "decoded-previous-frame"

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets must have equal row counts")

    def __len__(self):
        return self.inputs.shape[0]


@dataclass
class TrainHistory:
    objective: list = field(default_factory=list)
    data_error: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    epochs_run: int = 0
    stop_reason: str = ""


def init_net(dims=(N_IN, N_HIDDEN, 1), seed: int = 0) -> MlpNet:
    """Uniform [-0.5, 0.5] weights from a seeded generator."""
    n_in, n_hidden, n_out = dims
    if min(dims) < 1:
        raise ValueError("all dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    return MlpNet(n_in, n_hidden, n_out,
                  rng.uniform(-0.5, 0.5, n_params(n_in, n_hidden, n_out)), seed)


def _stack_outputs(W1s, b1s, W2s, b2s, X):
    # (K nets, N rows) -> (K, N, n_out)
    H = np.tanh(np.einsum("khi,ni->knh", W1s, X) + b1s[:, None, :])
    return np.einsum("koh,knh->kno", W2s, H) + b2s[:, None, :]


def _check_input(x, n_in):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != n_in:
        raise ValueError(f"input width {x.shape[-1]} != {n_in}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    return x


def forward(net: MlpNet, x) -> np.ndarray:
    """Evaluate the net on one input vector or a batch of rows."""
    x = _check_input(x, net.n_in)
    W1, b1, W2, b2 = net.unpack()
    y = _stack_outputs(W1[None], b1[None], W2[None], b2[None], np.atleast_2d(x))[0]
    return y[0] if x.ndim == 1 else y


def build_training_set(frame, mode: str = "scalar", n_in: int = N_IN) -> TrainingSet:
    """Sliding-window regression pairs from one (decoded) frame.

    ``scalar``: input ``s[n-n_in:n]``, target ``s[n]``, n steps by 1.
    ``hint``: same inputs, targets ``(s[n], s[n+1])``, n steps by 1.
    ``vector``: as ``hint`` but n steps by 2 so targets tile the frame.
    """
    if mode not in TRAINING_MODES:
        raise ValueError(f"unknown training mode {mode!r}")
    s = np.asarray(frame, dtype=np.float64).reshape(-1)
    if mode == "scalar":
        idx = np.arange(n_in, s.size)
    else:
        idx = np.arange(n_in, s.size - 1, 2 if mode == "vector" else 1)
    if idx.size == 0:
        raise EmptyTrainingSetError(
            f"frame of {s.size} samples yields no {mode} training rows")
    inputs = s[idx[:, None] - n_in + np.arange(n_in)]
    if mode == "scalar":
        targets = s[idx][:, None]
    else:
        targets = np.stack([s[idx], s[idx + 1]], axis=1)
    return TrainingSet(inputs, targets)


def _outputs_and_jacobian(w, dims, X, with_jacobian=True):
    n_in, n_hidden, n_out = dims
    W1, b1, W2, b2 = unpack(w, *dims)
    H = np.tanh(X @ W1.T + b1)
    Y = H @ W2.T + b2
    if not with_jacobian:
        return Y, None
    N = X.shape[0]
    dH = 1.0 - H * H
    J = np.zeros((N, n_out, w.size))
    # d y_o / d W1[j, k] = W2[o, j] * dH[s, j] * X[s, k]
    G = W2[None, :, :] * dH[:, None, :]  # (N, n_out, n_hidden)
    J[:, :, :n_hidden * n_in] = (G[:, :, :, None] * X[:, None, None, :]).reshape(N, n_out, -1)
    off = n_hidden * n_in
    J[:, :, off:off + n_hidden] = G
    off += n_hidden
    for o in range(n_out):
        J[:, o, off + o * n_hidden:off + (o + 1) * n_hidden] = H
    off += n_out * n_hidden
    J[:, np.arange(n_out), off + np.arange(n_out)] = 1.0
    return Y, J.reshape(N * n_out, w.size)


def jacobian(net: MlpNet, inputs) -> np.ndarray:
    """Analytic d(output)/d(params), one row per (sample, output) pair.

    Rows are ordered sample-major: row ``s * n_out + o``.
    """
    X = np.atleast_2d(_check_input(inputs, net.n_in))
    return _outputs_and_jacobian(net.params, net.dims, X)[1]


def train_lm(net: MlpNet, ts: TrainingSet, cfg: TrainConfig = TrainConfig()):
    """Levenberg-Marquardt training, optionally with Bayesian regularization.

    Runs ``cfg.epochs`` accepted steps, or fewer if the damping exceeds
    ``cfg.mu_max``. Returns the trained net and a :class:`TrainHistory`.
    """
    if len(ts) == 0:
        raise EmptyTrainingSetError("empty training set")
    X = ts.inputs
    T = ts.targets
    if X.shape[1] != net.n_in or T.shape[1] != net.n_out:
        raise ValueError("training set does not match net dimensions")
    dims = net.dims
    w = net.params.copy()
    n_w = w.size
    n_data = T.size
    alpha, beta = cfg.alpha_init, cfg.beta_init
    mu = cfg.mu_init
    hist = TrainHistory()

    Y, J = _outputs_and_jacobian(w, dims, X)
    r = (Y - T).reshape(-1)
    ed = 0.5 * float(r @ r)
    ew = 0.5 * float(w @ w)
    F = beta * ed + alpha * ew
    if not np.isfinite(F):
        hist.stop_reason = "non-finite objective"
        return net, hist
    hist.objective.append(F)
    hist.data_error.append(ed)
    eye = np.eye(n_w)

    while hist.epochs_run < cfg.epochs:
        JtJ = J.T @ J
        g = beta * (J.T @ r) + alpha * w
        accepted = False
        while mu <= cfg.mu_max:
            try:
                step = np.linalg.solve(beta * JtJ + (alpha + mu) * eye, -g)
            except np.linalg.LinAlgError:
                mu *= cfg.mu_up
                continue
            w_try = w + step
            Y_try, _ = _outputs_and_jacobian(w_try, dims, X, with_jacobian=False)
            r_try = (Y_try - T).reshape(-1)
            ed_try = 0.5 * float(r_try @ r_try)
            ew_try = 0.5 * float(w_try @ w_try)
            F_try = beta * ed_try + alpha * ew_try
            if np.isfinite(F_try) and F_try < F:
                accepted = True
                break
            mu *= cfg.mu_up
        if not accepted:
            hist.stop_reason = "mu limit"
            break
        w, ed, ew = w_try, ed_try, ew_try
        mu *= cfg.mu_down
        Y, J = _outputs_and_jacobian(w, dims, X)
        r = (Y - T).reshape(-1)
        if cfg.use_bayesian:
            alpha, beta = _update_hyperparameters(J, alpha, beta, ed, ew, n_w, n_data, hist)
        F = beta * ed + alpha * ew
        hist.epochs_run += 1
        hist.objective.append(F)
        hist.data_error.append(ed)
    else:
        hist.stop_reason = "epochs"
    return MlpNet(*dims, w, net.seed), hist


def _update_hyperparameters(J, alpha, beta, ed, ew, n_w, n_data, hist):
    if alpha == 0.0:
        gamma = float(n_w)
    else:
        H = beta * (J.T @ J) + alpha * np.eye(n_w)
        try:
            gamma = n_w - alpha * float(np.trace(np.linalg.inv(H)))
        except np.linalg.LinAlgError:
            return alpha, beta
    gamma = min(max(gamma, 0.0), float(n_w))
    if ew > 0 and ed > 0 and n_data - gamma > 0:
        new_alpha = gamma / (2.0 * ew)
        new_beta = (n_data - gamma) / (2.0 * ed)
        if np.isfinite(new_alpha) and np.isfinite(new_beta) and new_alpha > 0 and new_beta > 0:
            alpha, beta = new_alpha, new_beta
    hist.alpha.append(alpha)
    hist.beta.append(beta)
    hist.gamma.append(gamma)
    return alpha, beta


class Committee:
    """Nets of identical shape whose outputs are combined per coordinate."""

    def __init__(self, nets, combiner="median"):
        nets = list(nets)
        if not nets:
            raise ValueError("empty committee")
        if combiner not in COMBINERS:
            raise ValueError(f"combiner must be one of {COMBINERS}")
        if len({n.dims for n in nets}) != 1:
            raise ValueError("committee members must share dimensions")
        self.nets = nets
        self.combiner = combiner
        parts = [n.unpack() for n in nets]
        self._W1, self._b1, self._W2, self._b2 = (
            np.stack([p[i] for p in parts]) for i in range(4))

    @property
    def dims(self):
        return self.nets[0].dims

    def member_outputs(self, x):
        """(n_nets, n_out) for one input, or (n_nets, N, n_out) for rows."""
        x = np.asarray(x, dtype=np.float64)
        Y = _stack_outputs(self._W1, self._b1, self._W2, self._b2, np.atleast_2d(x))
        return Y[:, 0, :] if x.ndim == 1 else Y

    def predict(self, x):
        Y = self.member_outputs(x)
        if self.combiner == "mean":
            return Y.mean(axis=0)
        return _median(Y)

    def __len__(self):
        return len(self.nets)


def _median(Y):
    K = Y.shape[0]
    S = np.sort(Y, axis=0)
    if K % 2:
        return S[K // 2]
    return 0.5 * (S[K // 2 - 1] + S[K // 2])


def committee_predict(c: Committee, x) -> np.ndarray:
    x = _check_input(x, c.dims[0])
    return c.predict(x)


def train_committee(ts: TrainingSet, cfg: TrainConfig = TrainConfig(),
                    combiner="median", n_hidden=N_HIDDEN) -> Committee:
    """Multi-start training; every start is kept as a committee member.

    Start ``k`` is initialized with seed ``cfg.rng_seed + k``.
    """
    if len(ts) == 0:
        raise EmptyTrainingSetError("empty training set")
    dims = (ts.inputs.shape[1], n_hidden, ts.targets.shape[1])
    nets = [train_lm(init_net(dims, cfg.rng_seed + k), ts, cfg)[0]
            for k in range(cfg.n_starts)]
    return Committee(nets, combiner)


def net_to_dict(net: MlpNet) -> dict:
    W1, b1, W2, b2 = net.unpack()
    return {"dims": list(net.dims), "seed": net.seed, "W1": W1.tolist(),
            "b1": b1.tolist(), "W2": W2.tolist(), "b2": b2.tolist()}


def net_from_dict(d: dict) -> MlpNet:
    parts = [np.asarray(d[k], dtype=np.float64).reshape(-1) for k in ("W1", "b1", "W2", "b2")]
    return MlpNet(*d["dims"], np.concatenate(parts), d.get("seed"))


def committee_to_json(c: Committee) -> str:
    return json.dumps({"combiner": c.combiner, "nets": [net_to_dict(n) for n in c.nets]})


def committee_from_json(text: str) -> Committee:
    d = json.loads(text)
    return Committee([net_from_dict(n) for n in d["nets"]], d["combiner"])


def with_seed(cfg: TrainConfig, seed: int) -> TrainConfig:
    return replace(cfg, rng_seed=seed)
