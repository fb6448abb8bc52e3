"""Backward-adaptive ADPCM / predictive VQ encoder and decoder.

Both directions run the same state machine (:func:`_run`). The predictor for
frame ``j`` is fitted on the *decoded* frame ``j - 1``; frame 0 uses a zero
predictor. Nothing about the predictor is transmitted, so the bitstream holds
only a fixed-size header and the packed quantizer codes.

Schemes
-------
lpc_scalar       order-10 Levinson-Durbin predictor, scalar adaptive quantizer
mlp_scalar       committee of 10-2-1 MLPs, scalar adaptive quantizer
mlp_scalar_hint  10-2-2 MLPs trained with ``x[n+1]`` as a hint target; only
                 output 0 is used for coding
mlp_vector_sq    10-2-2 MLPs predicting two samples at once; both residual
                 components go through one shared scalar quantizer
nl_pvq           as mlp_vector_sq but the residual vector is vector-quantized
                 with a static codebook
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import linear, neural
from .quantizer import (Codebook, codebook_hash, dequantize_scalar, initial_state,
                        nearest_codeword, quantize_scalar)
from .signal_io import DEFAULT_FRAME_LEN, DEFAULT_RATE, SampleBuffer

SCHEMES = ("lpc_scalar", "mlp_scalar", "mlp_scalar_hint", "mlp_vector_sq", "nl_pvq")
VECTOR_SCHEMES = ("mlp_vector_sq", "nl_pvq")
TRAINING_MODE = {"mlp_scalar": "scalar", "mlp_scalar_hint": "hint",
                 "mlp_vector_sq": "vector", "nl_pvq": "vector"}
LPC_ORDER = 10
HISTORY = neural.N_IN
VECTOR_DIM = 2

MAGIC = b"NPVQ"
VERSION = 1
_HEADER = struct.Struct("<4sBBBHBHBBQ16sQB")
HEADER_SIZE = _HEADER.size


class ConfigError(ValueError):
    pass


class BitstreamError(ValueError):
    def __init__(self, message, offset=None, frame=None):
        super().__init__(message)
        self.offset = offset
        self.frame = frame


class CodebookMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str
    nq: int = 3
    codebook: Codebook | None = None
    frame_len: int = DEFAULT_FRAME_LEN
    epochs: int = 50
    n_starts: int = 5
    combiner: str = "median"
    seed_base: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "nl_pvq":
            if self.codebook is None:
                raise ConfigError("nl_pvq needs a codebook")
            if self.codebook.dim != VECTOR_DIM:
                raise ConfigError(f"nl_pvq codebook must have dimension {VECTOR_DIM}")
        else:
            if self.codebook is not None:
                raise ConfigError(f"{self.scheme} does not take a codebook")
            if self.nq not in range(2, 6):
                raise ConfigError(f"Nq must lie in 2..5, got {self.nq}")
        if not 1 <= self.frame_len <= 0xFFFF:
            raise ConfigError("frame_len must lie in 1..65535")
        if self.scheme in VECTOR_SCHEMES and self.frame_len % 2:
            raise ConfigError("vector schemes need an even frame_len")
        if not 1 <= self.epochs <= 0xFFFF or not 1 <= self.n_starts <= 0xFF:
            raise ConfigError("epochs must lie in 1..65535 and n_starts in 1..255")
        if self.combiner not in neural.COMBINERS:
            raise ConfigError(f"combiner must be one of {neural.COMBINERS}")
        if not 0 <= self.seed_base < 2 ** 64:
            raise ConfigError("seed_base must fit in 64 bits")

    @property
    def m(self):
        return VECTOR_DIM if self.scheme in VECTOR_SCHEMES else 1

    @property
    def code_bits(self):
        return self.codebook.bits if self.scheme == "nl_pvq" else self.nq

    def train_config(self, frame_index: int) -> neural.TrainConfig:
        seed = (self.seed_base + frame_index * self.n_starts) % 2 ** 63
        return neural.TrainConfig(epochs=self.epochs, n_starts=self.n_starts, rng_seed=seed)


@dataclass(frozen=True)
class Bitstream:
    scheme: str
    nq: int
    frame_len: int
    m: int
    epochs: int
    n_starts: int
    combiner: str
    seed_base: int
    codebook_hash: bytes
    total_samples: int
    pad_flag: int
    payload: bytes = b""


@dataclass
class Diagnostics:
    """Encoder-side record: reconstruction, residuals and per-frame events."""

    reconstruction: np.ndarray
    residuals: np.ndarray
    quantized_residuals: np.ndarray
    codes: np.ndarray
    steps: np.ndarray
    fallback_frames: list = field(default_factory=list)


def n_codes(scheme: str, total_samples: int) -> int:
    return (total_samples + 1) // 2 if scheme == "nl_pvq" else total_samples


def pack_codes(codes, width: int) -> bytes:
    """Concatenate fixed-width codes MSB-first with no padding between them."""
    codes = np.asarray(codes, dtype=np.int64)
    if codes.size == 0:
        return b""
    shifts = np.arange(width - 1, -1, -1)
    bits = ((codes[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)
    return np.packbits(bits).tobytes()


def unpack_codes(payload: bytes, width: int, count: int) -> np.ndarray:
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))[:count * width]
    weights = 1 << np.arange(width - 1, -1, -1)
    return bits.reshape(count, width).astype(np.int64) @ weights


def serialize(bs: Bitstream) -> bytes:
    header = _HEADER.pack(MAGIC, VERSION, SCHEMES.index(bs.scheme), bs.nq, bs.frame_len, bs.m,
                          bs.epochs, bs.n_starts, neural.COMBINERS.index(bs.combiner),
                          bs.seed_base, bs.codebook_hash, bs.total_samples, bs.pad_flag)
    return header + bs.payload


def deserialize(data: bytes) -> Bitstream:
    if len(data) < HEADER_SIZE:
        raise BitstreamError(f"stream is {len(data)} bytes, header needs {HEADER_SIZE}",
                             offset=len(data))
    (magic, version, scheme, nq, frame_len, m, epochs, n_starts, combiner, seed_base,
     cb_hash, total, pad) = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BitstreamError(f"bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise BitstreamError(f"unsupported version {version}", offset=4)
    if scheme >= len(SCHEMES):
        raise BitstreamError(f"unknown scheme id {scheme}", offset=5)
    if combiner >= len(neural.COMBINERS):
        raise BitstreamError(f"unknown combiner id {combiner}", offset=14)
    if pad > 1:
        raise BitstreamError(f"bad pad flag {pad}", offset=HEADER_SIZE - 1)
    return Bitstream(SCHEMES[scheme], nq, frame_len, m, epochs, n_starts,
                     neural.COMBINERS[combiner], seed_base, cb_hash, total, pad,
                     bytes(data[HEADER_SIZE:]))


def config_from_header(bs: Bitstream, codebook: Codebook | None = None) -> SchemeConfig:
    if bs.scheme == "nl_pvq":
        if codebook is None:
            raise ConfigError("nl_pvq stream needs its codebook to decode")
        if codebook_hash(codebook) != bs.codebook_hash:
            raise CodebookMismatchError("codebook does not match the hash in the stream header")
    else:
        codebook = None
    return SchemeConfig(bs.scheme, bs.nq if bs.scheme != "nl_pvq" else 3, codebook,
                        bs.frame_len, bs.epochs, bs.n_starts, bs.combiner, bs.seed_base)


def adapt_predictor(prev_frame, cfg: SchemeConfig, frame_index: int, current=None):
    """Refit the predictor on the previous decoded frame.

    Returns ``(predictor, refitted)``; on degenerate or too-short data the
    current predictor is kept and ``refitted`` is False.
    """
    try:
        if cfg.scheme == "lpc_scalar":
            r = linear.autocorrelation(prev_frame, LPC_ORDER)
            return linear.levinson_durbin(r), True
        ts = neural.build_training_set(prev_frame, TRAINING_MODE[cfg.scheme], HISTORY)
        return neural.train_committee(ts, cfg.train_config(frame_index), cfg.combiner), True
    except (ValueError, np.linalg.LinAlgError):
        return current, False


def _predict(predictor, history, n_out):
    if predictor is None:
        return np.zeros(n_out)
    if isinstance(predictor, linear.ScalarArModel):
        return np.array([linear.predict_scalar(predictor, history)])
    return predictor.predict(history)


def _clip(v):
    return min(max(v, -1.0), 1.0)


def _run(cfg: SchemeConfig, total: int, x=None, codes=None):
    """Shared encoder/decoder loop.

    Encoding when ``x`` is given (codes are produced), decoding when
    ``codes`` is given. Returns the reconstruction and the diagnostics.
    """
    encoding = x is not None
    vq = cfg.scheme == "nl_pvq"
    vector = cfg.scheme in VECTOR_SCHEMES
    padded = total + (total % 2 if vq else 0)
    if encoding:
        xs = np.zeros(padded)
        xs[:total] = x
    # y[n + HISTORY] holds reconstructed sample n; the zero prefix is the cold-start history
    y = np.zeros(padded + HISTORY)
    out_codes = []
    residuals = []
    qres = []
    steps = []
    fallbacks = []
    qstate = None if vq else initial_state(cfg.nq)
    predictor = None
    ci = 0

    def next_code():
        nonlocal ci
        c = int(codes[ci])
        ci += 1
        return c

    def scalar_code(state, e):
        if encoding:
            code, e_hat, nxt = quantize_scalar(state, e)
        else:
            code = next_code()
            e_hat, nxt = dequantize_scalar(state, code)
        out_codes.append(code)
        steps.append(state.step)
        return e_hat, nxt

    for start in range(0, padded, cfg.frame_len):
        j = start // cfg.frame_len
        stop = min(start + cfg.frame_len, padded)
        if j > 0:
            prev = y[HISTORY + start - cfg.frame_len:HISTORY + start]
            predictor, ok = adapt_predictor(prev, cfg, j, predictor)
            if not ok:
                fallbacks.append(j)
        n = start
        while n < stop:
            hist = y[n:n + HISTORY]
            if vector and n + 1 < stop:
                p = _predict(predictor, hist, 2)
                if vq:
                    if encoding:
                        e = xs[n:n + 2] - p
                        idx, cw = nearest_codeword(cfg.codebook, e)
                        residuals.append(e)
                    else:
                        idx = next_code()
                        cw = cfg.codebook.codewords[idx]
                    out_codes.append(idx)
                    qres.append(cw)
                    y[HISTORY + n] = _clip(p[0] + cw[0])
                    y[HISTORY + n + 1] = _clip(p[1] + cw[1])
                else:
                    e1 = xs[n] - p[0] if encoding else 0.0
                    e1_hat, qstate = scalar_code(qstate, e1)
                    e2 = xs[n + 1] - p[1] if encoding else 0.0
                    e2_hat, qstate = scalar_code(qstate, e2)
                    residuals.append((e1, e2))
                    qres.append((e1_hat, e2_hat))
                    y[HISTORY + n] = _clip(p[0] + e1_hat)
                    y[HISTORY + n + 1] = _clip(p[1] + e2_hat)
                n += 2
            else:
                # scalar schemes, and the lone trailing sample of mlp_vector_sq
                p = _predict(predictor, hist, 1)[0]
                e = xs[n] - p if encoding else 0.0
                e_hat, qstate = scalar_code(qstate, e)
                residuals.append(e)
                qres.append(e_hat)
                y[HISTORY + n] = _clip(p + e_hat)
                n += 1

    recon = y[HISTORY:HISTORY + total].copy()
    if vector and not vq and total % 2:
        # keep the pairwise arrays rectangular; the lone sample is in steps/codes only
        residuals, qres = residuals[:-1], qres[:-1]
    diag = Diagnostics(recon, np.array(residuals, dtype=np.float64),
                       np.array(qres, dtype=np.float64), np.array(out_codes, dtype=np.int64),
                       np.array(steps), fallbacks)
    return recon, diag


def encode(signal, cfg: SchemeConfig):
    """Encode a :class:`SampleBuffer` (or sample array).

    Returns ``(Bitstream, Diagnostics)``; ``Diagnostics.reconstruction`` is
    what any decoder will reproduce.
    """
    x = signal.samples if isinstance(signal, SampleBuffer) else np.asarray(signal, dtype=np.float64)
    total = x.size
    _, diag = _run(cfg, total, x=x)
    vq = cfg.scheme == "nl_pvq"
    bs = Bitstream(cfg.scheme, 0 if vq else cfg.nq, cfg.frame_len, cfg.m, cfg.epochs,
                   cfg.n_starts, cfg.combiner, cfg.seed_base,
                   codebook_hash(cfg.codebook) if vq else bytes(16), total,
                   int(vq and total % 2 == 1), pack_codes(diag.codes, cfg.code_bits))
    return bs, diag


def decode(bs: Bitstream, codebook: Codebook | None = None,
           sample_rate_hz: int = DEFAULT_RATE) -> SampleBuffer:
    """Rebuild the encoder's reconstruction from the codes alone."""
    cfg = config_from_header(bs, codebook)
    count = n_codes(bs.scheme, bs.total_samples)
    width = cfg.code_bits
    have = (len(bs.payload) * 8) // width
    if have < count:
        per_frame = cfg.frame_len // 2 if bs.scheme == "nl_pvq" else cfg.frame_len
        raise BitstreamError(
            f"bitstream truncated in frame {have // per_frame}: "
            f"{have} of {count} codes present",
            offset=HEADER_SIZE + len(bs.payload), frame=have // per_frame)
    codes = unpack_codes(bs.payload, width, count)
    recon, _ = _run(cfg, bs.total_samples, codes=codes)
    return SampleBuffer(recon, sample_rate_hz)
