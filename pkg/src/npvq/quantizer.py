"""Adaptive scalar quantization and vector quantization of prediction residuals.

The scalar quantizer is a mid-rise uniform quantizer whose step is multiplied
after every sample by a factor selected by the emitted level magnitude
(Jayant's one-word-memory adaptation). Codes carry the sign in the top bit
and the level magnitude ``k`` in the remaining ``Nq - 1`` bits.

The vector quantizer is a static codebook designed by the generalized Lloyd
iteration from a random initial codebook.
"""

from __future__ import annotations

import copy
import hashlib
import json
import struct
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

NQ_RANGE = range(2, 6)
CODEBOOK_MAGIC = b"NVQC"
CODEBOOK_VERSION = 1


def load_defaults(path=None) -> dict:
    """Step limits and multiplier tables, keyed by ``Nq`` (as int)."""
    if path is None:
        text = resources.files("npvq").joinpath("data/quantizer_defaults.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    cfg = json.loads(text)
    cfg["multipliers"] = {int(k): tuple(float(m) for m in v)
                          for k, v in cfg["multipliers"].items()}
    return cfg


_DEFAULTS = load_defaults()


@dataclass(frozen=True)
class ScalarQuantState:
    n_bits: int
    step: float
    multipliers: tuple
    step_min: float = _DEFAULTS["step_min"]
    step_max: float = _DEFAULTS["step_max"]

    def __post_init__(self):
        if len(self.multipliers) != 2 ** (self.n_bits - 1):
            raise ValueError(f"need {2 ** (self.n_bits - 1)} multipliers for Nq={self.n_bits}")
        if not self.step_min <= self.step <= self.step_max:
            raise ValueError("step outside [step_min, step_max]")

    @property
    def n_levels(self):
        return 2 ** (self.n_bits - 1)


def initial_state(n_bits: int, defaults: dict | None = None) -> ScalarQuantState:
    """Fresh quantizer state: step ``2**-Nq`` of a unit full scale."""
    d = _DEFAULTS if defaults is None else defaults
    if n_bits not in d["multipliers"]:
        raise ValueError(f"no multiplier table for Nq={n_bits}")
    step = min(max(2.0 ** -n_bits, d["step_min"]), d["step_max"])
    return ScalarQuantState(n_bits, step, d["multipliers"][n_bits],
                            d["step_min"], d["step_max"])


def dequantize_scalar(state: ScalarQuantState, code: int):
    """Return ``(e_hat, next_state)`` for one received code."""
    code = int(code)
    if not 0 <= code < 2 ** state.n_bits:
        raise ValueError(f"code {code} out of range for Nq={state.n_bits}")
    half = state.n_levels
    k = code & (half - 1)
    mag = (k + 0.5) * state.step
    e_hat = -mag if code & half else mag
    nxt = copy.copy(state)
    object.__setattr__(nxt, "step",
                       min(max(state.step * state.multipliers[k], state.step_min), state.step_max))
    return e_hat, nxt


def quantize_scalar(state: ScalarQuantState, e: float):
    """Return ``(code, e_hat, next_state)``; ``e_hat`` comes from the decoder path."""
    e = float(e)
    if not np.isfinite(e):
        raise ValueError("non-finite residual")
    k = min(int(abs(e) / state.step), state.n_levels - 1)
    code = (state.n_levels if e < 0 else 0) | k
    e_hat, nxt = dequantize_scalar(state, code)
    return code, e_hat, nxt


@dataclass(frozen=True)
class Codebook:
    codewords: np.ndarray
    bits: int
    training_meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        C = np.array(self.codewords, dtype=np.float64)
        if C.ndim != 2 or C.shape[0] != 2 ** self.bits:
            raise ValueError(f"codebook must hold 2**{self.bits} codewords")
        if not np.all(np.isfinite(C)):
            raise ValueError("non-finite codeword")
        C.setflags(write=False)
        object.__setattr__(self, "codewords", C)

    @property
    def dim(self):
        return self.codewords.shape[1]

    def __len__(self):
        return self.codewords.shape[0]


def _sq_distances(C, V):
    diff = V[:, None, :] - C[None, :, :]
    return np.einsum("nkm,nkm->nk", diff, diff)


def nearest_indices(cb: Codebook, vectors) -> np.ndarray:
    V = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if V.shape[1] != cb.dim:
        raise ValueError(f"vector dim {V.shape[1]} != codebook dim {cb.dim}")
    return np.argmin(_sq_distances(cb.codewords, V), axis=1)


def nearest_codeword(cb: Codebook, v):
    """Index and codeword at minimal squared distance; ties go to the lowest index."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (cb.dim,):
        raise ValueError(f"vector dim {v.shape} != codebook dim {cb.dim}")
    diff = cb.codewords - v
    i = int(np.argmin(np.einsum("km,km->k", diff, diff)))
    return i, cb.codewords[i]


def random_init_codebook(bits: int, training, seed: int = 0) -> Codebook:
    """Codebook of ``2**bits`` training vectors drawn without replacement."""
    V = np.asarray(training, dtype=np.float64)
    size = 2 ** bits
    if V.ndim != 2 or V.shape[0] < size:
        raise ValueError(f"need at least {size} training vectors, got {len(V)}")
    idx = np.random.default_rng(seed).choice(V.shape[0], size, replace=False)
    return Codebook(V[idx], bits, {"init": "random", "seed": seed})


def distortion(cb: Codebook, training) -> float:
    """Mean squared error per vector when quantizing ``training`` with ``cb``."""
    V = np.asarray(training, dtype=np.float64)
    d = _sq_distances(cb.codewords, V)
    return float(d.min(axis=1).mean())


def lloyd_train(init: Codebook, training, max_iter: int = 100, rel_eps: float = 1e-6) -> Codebook:
    """Generalized Lloyd iteration.

    Each iteration replaces every codeword by the centroid of its cell and
    repartitions. A cell that ends up empty takes the centroid of the most
    populous cell plus a +-1e-4 offset. Stops when the relative distortion
    drop falls below ``rel_eps`` or after ``max_iter`` iterations. The
    distortion after each iteration is stored in ``training_meta``.
    """
    V = np.asarray(training, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] == 0:
        raise ValueError("empty training set")
    if V.shape[1] != init.dim:
        raise ValueError("training vectors do not match codebook dimension")
    C = init.codewords.copy()
    K = C.shape[0]
    d = _sq_distances(C, V)
    idx = np.argmin(d, axis=1)
    D_prev = float(d[np.arange(V.shape[0]), idx].mean())
    history = [D_prev]
    offset = 1e-4 * np.where(np.arange(init.dim) % 2, -1.0, 1.0)
    it = 0
    for it in range(1, max_iter + 1):
        counts = np.bincount(idx, minlength=K)
        sums = np.zeros_like(C)
        np.add.at(sums, idx, V)
        filled = counts > 0
        C[filled] = sums[filled] / counts[filled, None]
        big = int(np.argmax(counts))
        for j in np.flatnonzero(~filled):
            C[j] = C[big] + offset
        d = _sq_distances(C, V)
        idx = np.argmin(d, axis=1)
        D = float(d[np.arange(V.shape[0]), idx].mean())
        history.append(D)
        if D_prev <= 0 or (D_prev - D) <= rel_eps * D_prev:
            break
        D_prev = D
    meta = dict(init.training_meta)
    meta.update(lloyd_iterations=it, distortion_history=history, final_distortion=history[-1],
                n_training=int(V.shape[0]))
    return Codebook(C, init.bits, meta)


def closed_loop_refine(cb: Codebook, encoder_context, training_signal, rounds: int = 1,
                       max_iter: int = 100, rel_eps: float = 1e-6) -> Codebook:
    """Retrain ``cb`` on residuals produced with ``cb`` itself in the coding loop.

    ``encoder_context`` is an ``nl_pvq`` :class:`npvq.codec.SchemeConfig`;
    its codebook is replaced by the current one each round. The closed-loop
    distortion measured before each retraining (and after the last) is
    recorded under ``closed_loop_distortion``.
    """
    from .codec import encode  # codec imports this module

    if rounds <= 0:
        return cb
    dists = []
    for _ in range(rounds + 1):
        _, diag = encode(training_signal, replace(encoder_context, codebook=cb))
        E = diag.residuals
        dists.append(float(np.mean(np.sum((E - diag.quantized_residuals) ** 2, axis=1))))
        if len(dists) > rounds:
            break
        cb = lloyd_train(cb, E, max_iter, rel_eps)
    meta = dict(cb.training_meta)
    meta["closed_loop_rounds"] = rounds
    meta["closed_loop_distortion"] = dists
    return Codebook(cb.codewords, cb.bits, meta)


def codebook_bytes(cb: Codebook) -> bytes:
    header = CODEBOOK_MAGIC + struct.pack("<BBB", CODEBOOK_VERSION, cb.dim, cb.bits)
    return header + cb.codewords.astype("<f8").tobytes()


def codebook_hash(cb: Codebook) -> bytes:
    """16-byte content hash used to bind a bitstream to its codebook."""
    return hashlib.blake2b(codebook_bytes(cb), digest_size=16).digest()


def codebook_from_bytes(data: bytes, meta=None) -> Codebook:
    if len(data) < 7 or data[:4] != CODEBOOK_MAGIC:
        raise ValueError("not a codebook file (bad magic)")
    version, m, bits = struct.unpack_from("<BBB", data, 4)
    if version != CODEBOOK_VERSION:
        raise ValueError(f"unsupported codebook version {version}")
    n = (2 ** bits) * m
    if len(data) != 7 + 8 * n:
        raise ValueError(f"codebook payload is {len(data) - 7} bytes, expected {8 * n}")
    C = np.frombuffer(data, dtype="<f8", offset=7).reshape(2 ** bits, m)
    return Codebook(C, bits, meta or {})


def write_codebook(cb: Codebook, path) -> None:
    """Binary codebook plus a ``<path>.json`` sidecar with training metadata."""
    with open(path, "wb") as fh:
        fh.write(codebook_bytes(cb))
    with open(f"{path}.json", "w") as fh:
        json.dump(cb.training_meta, fh, indent=2, sort_keys=True)


def read_codebook(path) -> Codebook:
    with open(path, "rb") as fh:
        data = fh.read()
    meta = {}
    try:
        with open(f"{path}.json") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        pass
    return codebook_from_bytes(data, meta)
