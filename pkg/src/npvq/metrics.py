"""Segmental SNR and residual-scatter statistics."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .signal_io import DEFAULT_FRAME_LEN, SampleBuffer


class ExcludedFrame(ValueError):
    """A frame whose SNR is undefined (zero signal or zero error energy)."""


def frame_snr(x, e) -> float:
    """``10*log10(sum(x**2) / sum(e**2))`` in dB."""
    x = np.asarray(x, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    if x.shape != e.shape:
        raise ValueError("signal and error frames differ in length")
    sx = float(np.dot(x, x))
    se = float(np.dot(e, e))
    if sx <= 0:
        raise ExcludedFrame("zero signal energy")
    if se <= 0:
        raise ExcludedFrame("zero error energy")
    return 10.0 * math.log10(sx / se)


@dataclass
class SegSnrReport:
    per_frame_snr_db: list
    frame_indices: list
    excluded: list = field(default_factory=list)
    frame_len: int = DEFAULT_FRAME_LEN
    config: dict = field(default_factory=dict)

    @property
    def valid(self):
        return len(self.per_frame_snr_db) > 0

    @property
    def segsnr_db(self):
        return float(np.mean(self.per_frame_snr_db)) if self.valid else float("nan")

    @property
    def sigma_db(self):
        return float(np.std(self.per_frame_snr_db)) if self.valid else float("nan")

    @property
    def status(self):
        return "ok" if self.valid else "no valid frames"

    def to_dict(self):
        d = asdict(self)
        d.update(segsnr_db=_finite_or_none(self.segsnr_db),
                 sigma_db=_finite_or_none(self.sigma_db), status=self.status)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def frames_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frame_index", "snr_db"])
        for i, v in zip(self.frame_indices, self.per_frame_snr_db):
            w.writerow([i, repr(v)])
        return buf.getvalue()


def _finite_or_none(v):
    return v if math.isfinite(v) else None


def _samples(buf):
    return buf.samples if isinstance(buf, SampleBuffer) else np.asarray(buf, dtype=np.float64)


def segsnr(x, x_rec, frame_len: int = DEFAULT_FRAME_LEN, config=None) -> SegSnrReport:
    """Mean over frames of the per-frame SNR; sigma is the population std.

    Frames with zero signal or zero error energy are left out and listed in
    ``excluded`` as ``(frame_index, reason)``.
    """
    x = _samples(x)
    y = _samples(x_rec)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if frame_len < 1:
        raise ValueError("frame_len must be >= 1")
    e = x - y
    snrs, idx, excluded = [], [], []
    for j, start in enumerate(range(0, x.size, frame_len)):
        sl = slice(start, start + frame_len)
        try:
            snrs.append(frame_snr(x[sl], e[sl]))
            idx.append(j)
        except ExcludedFrame as exc:
            excluded.append((j, str(exc)))
    return SegSnrReport(snrs, idx, excluded, frame_len, dict(config or {}))


@dataclass
class ScatterSummary:
    rows: np.ndarray
    correlation: float
    diagonal_fraction: float

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["e1", "e2"])
        for e1, e2 in self.rows:
            w.writerow([repr(float(e1)), repr(float(e2))])
        return buf.getvalue()


def residual_scatter(diagnostics, sector_deg: float = 15.0) -> ScatterSummary:
    """Two-component residual rows with their Pearson correlation.

    ``diagonal_fraction`` counts rows whose direction lies within
    ``sector_deg`` of the ``e1 == e2`` line (either orientation).
    """
    E = getattr(diagnostics, "residuals", diagnostics)
    E = np.asarray(E, dtype=np.float64)
    if E.ndim != 2 or E.shape[1] != 2:
        raise ValueError("residual scatter needs two-component (vector scheme) residuals")
    if E.shape[0] == 0:
        raise ValueError("no residual vectors")
    if E.shape[0] > 1 and np.std(E[:, 0]) > 0 and np.std(E[:, 1]) > 0:
        corr = float(np.corrcoef(E[:, 0], E[:, 1])[0, 1])
    else:
        corr = float("nan")
    angle = np.degrees(np.arctan2(E[:, 1], E[:, 0])) % 180.0
    near = np.abs(angle - 45.0) <= sector_deg
    return ScatterSummary(E, corr, float(np.mean(near)))
