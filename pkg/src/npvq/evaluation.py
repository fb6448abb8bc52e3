"""Batch evaluation over utterances and configuration grids, plus codebook training.

Results are laid out like the published tables: one row per
(utterance, grid point) and one aggregate row per grid point, where the
aggregate SEGSNR and sigma are taken over the per-frame SNRs of all
utterances pooled together.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import codec, published
from .metrics import segsnr
from .quantizer import (Codebook, closed_loop_refine, lloyd_train, random_init_codebook,
                        read_codebook, write_codebook)
from .signal_io import DEFAULT_FRAME_LEN, read_audio

PRESETS = ("paper-table-1", "paper-table-2", "paper-table-3", "paper-table-4")


@dataclass(frozen=True, order=True)
class GridPoint:
    scheme: str
    epochs: int
    combiner: str
    rate: int  # Nq for scalar quantizers, codebook bits for nl_pvq

    @property
    def bits_per_sample(self):
        return self.rate / codec.VECTOR_DIM if self.scheme == "nl_pvq" else float(self.rate)


@dataclass
class RunManifest:
    files: list
    grid: list
    seed: int = 0
    output_dir: str | None = None
    frame_len: int = DEFAULT_FRAME_LEN
    n_starts: int = 5
    codebooks: dict = field(default_factory=dict)
    codebook_from_nq: int = 3
    closed_loop_rounds: int = 0


def preset_grid(name: str) -> list[GridPoint]:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    table = int(name[-1])
    if table == 4:
        vq = [GridPoint("nl_pvq", 50, "median", b) for b in range(4, 9)]
        # scalar-quantized counterpart at the integer rates, for the VQ gain column
        sq = [GridPoint("mlp_vector_sq", 50, "median", nq) for nq in (2, 3, 4)]
        return vq + sq
    scheme = published.TABLE_SCHEME[table]
    return [GridPoint(scheme, e, c, nq)
            for e in (6, 50) for c in ("mean", "median") for nq in range(2, 6)]


def grid_from_spec(spec: dict) -> list[GridPoint]:
    """Cartesian grid from ``{"scheme": ..., "epochs": [...], "combiner": [...], "nq"|"bits": [...]}``."""
    schemes = spec.get("scheme", "lpc_scalar")
    schemes = [schemes] if isinstance(schemes, str) else list(schemes)
    epochs = spec.get("epochs", [50])
    combiners = spec.get("combiner", ["median"])
    points = []
    for s in schemes:
        if s not in codec.SCHEMES:
            raise ValueError(f"unknown scheme {s!r}")
        rates = spec.get("bits", [4]) if s == "nl_pvq" else spec.get("nq", [2, 3, 4, 5])
        if s == "lpc_scalar":
            # training settings do not affect the linear predictor
            points += [GridPoint(s, 0, "-", r) for r in rates]
            continue
        points += [GridPoint(s, int(e), c, int(r)) for e in epochs for c in combiners for r in rates]
    return points


def manifest_from_dict(d: dict, preset: str | None = None) -> RunManifest:
    preset = preset or d.get("preset")
    if preset:
        grid = preset_grid(preset)
    elif "grid" in d:
        grid = grid_from_spec(d["grid"])
    else:
        grid = []
    return RunManifest(
        files=list(d.get("files", [])), grid=grid, seed=int(d.get("seed", 0)),
        output_dir=d.get("output_dir"), frame_len=int(d.get("frame_len", DEFAULT_FRAME_LEN)),
        n_starts=int(d.get("n_starts", 5)),
        codebooks={int(k): v for k, v in d.get("codebooks", {}).items()},
        codebook_from_nq=int(d.get("codebook_from_nq", 3)),
        closed_loop_rounds=int(d.get("closed_loop_rounds", 0)))


def scheme_config(gp: GridPoint, seed, frame_len, n_starts, codebook=None) -> codec.SchemeConfig:
    return codec.SchemeConfig(
        gp.scheme, nq=3 if gp.scheme == "nl_pvq" else gp.rate, codebook=codebook,
        frame_len=frame_len, epochs=max(gp.epochs, 1), n_starts=n_starts,
        combiner=gp.combiner if gp.combiner in ("mean", "median") else "median",
        seed_base=seed)


def harvest_residuals(signals, nq=3, epochs=50, combiner="median", seed=0,
                      frame_len=DEFAULT_FRAME_LEN, n_starts=5) -> np.ndarray:
    """Closed-loop residual vectors of the two-sample MLP coder with a scalar quantizer."""
    cfg = codec.SchemeConfig("mlp_vector_sq", nq=nq, frame_len=frame_len, epochs=epochs,
                             n_starts=n_starts, combiner=combiner, seed_base=seed)
    parts = [codec.encode(s, cfg)[1].residuals for s in signals]
    return np.concatenate(parts) if parts else np.zeros((0, codec.VECTOR_DIM))


def train_codebook(signals, bits, from_nq=3, epochs=50, combiner="median", seed=0,
                   frame_len=DEFAULT_FRAME_LEN, n_starts=5, closed_loop_rounds=0,
                   max_iter=100, rel_eps=1e-6) -> Codebook:
    """Random-init + Lloyd codebook on harvested residuals, optionally refined in closed loop.

    Closed-loop rounds run the NL-PVQ coder over the first signal.
    """
    signals = list(signals)
    E = harvest_residuals(signals, from_nq, epochs, combiner, seed, frame_len, n_starts)
    if E.shape[0] < 2 ** bits:
        raise ValueError(f"{E.shape[0]} residual vectors are too few for a {bits}-bit codebook")
    cb = lloyd_train(random_init_codebook(bits, E, seed), E, max_iter, rel_eps)
    meta = dict(cb.training_meta, source="mlp_vector_sq residuals", from_nq=from_nq,
                epochs=epochs, combiner=combiner, frame_len=frame_len, n_starts=n_starts)
    cb = Codebook(cb.codewords, bits, meta)
    if closed_loop_rounds > 0:
        ctx = codec.SchemeConfig("nl_pvq", codebook=cb, frame_len=frame_len, epochs=epochs,
                                 n_starts=n_starts, combiner=combiner, seed_base=seed)
        cb = closed_loop_refine(cb, ctx, signals[0], closed_loop_rounds, max_iter, rel_eps)
    return cb


def _evaluate_one(task):
    file_index, path, gp, seed, frame_len, n_starts, cb_path = task
    row = {"file_index": file_index, "file": path, "scheme": gp.scheme, "epochs": gp.epochs,
           "combiner": gp.combiner, "rate": gp.rate, "bits_per_sample": gp.bits_per_sample,
           "segsnr_db": None, "sigma_db": None, "n_frames": 0, "n_excluded": 0,
           "error": "", "frame_snr_db": []}
    try:
        buf = read_audio(path)
        cb = read_codebook(cb_path) if cb_path else None
        cfg = scheme_config(gp, seed, frame_len, n_starts, cb)
        bs, diag = codec.encode(buf, cfg)
        rep = segsnr(buf.samples, diag.reconstruction, frame_len)
        row.update(segsnr_db=_num(rep.segsnr_db), sigma_db=_num(rep.sigma_db),
                   n_frames=len(rep.per_frame_snr_db), n_excluded=len(rep.excluded),
                   frame_snr_db=rep.per_frame_snr_db)
    except Exception as exc:  # recorded per row; the run continues
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _num(v):
    return v if v is not None and math.isfinite(v) else None


@dataclass
class EvaluationResult:
    rows: list
    aggregates: list
    codebooks: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps({"rows": self.rows, "aggregates": self.aggregates,
                           "codebooks": self.codebooks}, indent=2, sort_keys=True)


def _prepare_codebooks(m: RunManifest, out_dir):
    paths = {}
    vq_points = sorted({(gp.rate, gp.epochs, gp.combiner) for gp in m.grid if gp.scheme == "nl_pvq"})
    if not vq_points or not m.files:
        return paths
    first = None
    for bits, epochs, combiner in vq_points:
        key = f"{bits}/{epochs}/{combiner}"
        if bits in m.codebooks:
            paths[key] = m.codebooks[bits]
            continue
        if out_dir is None:
            raise ValueError("training codebooks for nl_pvq needs an output directory")
        if first is None:
            first = read_audio(m.files[0])
        cb = train_codebook([first], bits, m.codebook_from_nq, epochs, combiner, m.seed,
                            m.frame_len, m.n_starts, m.closed_loop_rounds)
        path = os.path.join(out_dir, f"codebook_b{bits}_e{epochs}_{combiner}.nvqc")
        write_codebook(cb, path)
        paths[key] = path
    return paths


def aggregate(rows) -> list[dict]:
    groups = {}
    for r in rows:
        groups.setdefault((r["scheme"], r["epochs"], r["combiner"], r["rate"]), []).append(r)
    out = []
    for (scheme, epochs, combiner, rate), rs in sorted(groups.items()):
        pooled = [v for r in rs for v in r["frame_snr_db"]]
        table = published.table_for_scheme(scheme)
        bps = rate / codec.VECTOR_DIM if scheme == "nl_pvq" else float(rate)
        ref = published.reference(table, epochs, combiner, bps if table == 4 else rate) if table else None
        out.append({
            "table": table, "scheme": scheme, "epochs": epochs, "combiner": combiner,
            "rate": rate, "bits_per_sample": bps,
            "segsnr_db": float(np.mean(pooled)) if pooled else None,
            "sigma_db": float(np.std(pooled)) if pooled else None,
            "n_files": len(rs), "n_failed": sum(1 for r in rs if r["error"]),
            "n_frames": len(pooled),
            "published_segsnr_db": ref[0] if ref else None,
            "published_sigma_db": ref[1] if ref else None,
        })
    return out


def run_evaluation(m: RunManifest, jobs: int = 1) -> EvaluationResult:
    if m.output_dir:
        os.makedirs(m.output_dir, exist_ok=True)
    cb_paths = _prepare_codebooks(m, m.output_dir)
    grid = sorted(set(m.grid))
    tasks = []
    for fi, path in enumerate(m.files):
        for gp in grid:
            cb = cb_paths.get(f"{gp.rate}/{gp.epochs}/{gp.combiner}") if gp.scheme == "nl_pvq" else None
            tasks.append((fi, path, gp, m.seed, m.frame_len, m.n_starts, cb))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_evaluate_one, tasks))
    else:
        rows = [_evaluate_one(t) for t in tasks]
    rows.sort(key=lambda r: (r["file_index"], r["scheme"], r["epochs"], r["combiner"], r["rate"]))
    codebooks = {k: os.path.basename(v) for k, v in cb_paths.items()}
    return EvaluationResult(rows, aggregate(rows), codebooks)


def vq_comparison(aggregates) -> list[dict]:
    """Rows in the NL-PVQ table layout with the scalar-quantizer counterpart at equal rate."""
    sq = {(a["epochs"], a["combiner"], a["bits_per_sample"]): a for a in aggregates
          if a["scheme"] == "mlp_vector_sq"}
    out = []
    for a in aggregates:
        if a["scheme"] != "nl_pvq":
            continue
        s = sq.get((a["epochs"], a["combiner"], a["bits_per_sample"]))
        gain = None
        if s and s["segsnr_db"] is not None and a["segsnr_db"] is not None:
            gain = a["segsnr_db"] - s["segsnr_db"]
        out.append({"nq": a["bits_per_sample"], "codebook_bits": a["rate"], "epochs": a["epochs"],
                    "combiner": a["combiner"], "segsnr_db": a["segsnr_db"], "sigma_db": a["sigma_db"],
                    "scalar_segsnr_db": s["segsnr_db"] if s else None,
                    "scalar_sigma_db": s["sigma_db"] if s else None, "vq_gain_db": gain,
                    "published_segsnr_db": a["published_segsnr_db"],
                    "published_sigma_db": a["published_sigma_db"]})
    return out


def _csv(rows, columns):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in columns})
    return buf.getvalue()


ROW_COLUMNS = ["file", "scheme", "epochs", "combiner", "rate", "bits_per_sample", "segsnr_db",
               "sigma_db", "n_frames", "n_excluded", "error"]
AGG_COLUMNS = ["table", "scheme", "epochs", "combiner", "rate", "bits_per_sample", "segsnr_db",
               "sigma_db", "n_files", "n_failed", "n_frames", "published_segsnr_db",
               "published_sigma_db"]
VQ_COLUMNS = ["nq", "codebook_bits", "epochs", "combiner", "segsnr_db", "sigma_db",
              "scalar_segsnr_db", "scalar_sigma_db", "vq_gain_db", "published_segsnr_db",
              "published_sigma_db"]


def format_table(aggregates) -> str:
    """Plain-text view: one line per grid point, local vs published values."""
    lines = [f"{'scheme':16s} {'epoch':>5s} {'comb':>6s} {'Nq':>4s} {'SEGSNR':>7s} {'sigma':>6s}"
             f" {'pub':>6s} {'pub_s':>6s}"]
    for a in aggregates:
        def f(v):
            return f"{v:6.2f}" if v is not None else "     -"
        lines.append(f"{a['scheme']:16s} {a['epochs']:5d} {a['combiner']:>6s} "
                     f"{a['bits_per_sample']:4g} {f(a['segsnr_db'])} {f(a['sigma_db'])}"
                     f" {f(a['published_segsnr_db'])} {f(a['published_sigma_db'])}")
    return "\n".join(lines)


def write_results(result: EvaluationResult, out_dir) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    files = {
        "results.json": result.to_json(),
        "results.csv": _csv(result.rows, ROW_COLUMNS),
        "aggregates.csv": _csv(result.aggregates, AGG_COLUMNS),
    }
    vq = vq_comparison(result.aggregates)
    if vq:
        files["nl_pvq_table.csv"] = _csv(vq, VQ_COLUMNS)
    written = []
    for name, text in files.items():
        path = os.path.join(out_dir, name)
        with open(path, "w") as fh:
            fh.write(text)
        written.append(path)
    return written


def load_manifest(path, preset=None) -> RunManifest:
    with open(path) as fh:
        return manifest_from_dict(json.load(fh), preset)


def with_output(m: RunManifest, out_dir) -> RunManifest:
    return replace(m, output_dir=out_dir)
