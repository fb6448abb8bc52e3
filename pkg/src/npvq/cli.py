"""Command line front end: ``npvq encode|decode|train-codebook|evaluate``.

Exit codes: 0 ok, 1 usage/configuration error (including a missing input path),
2 data error, 3 internal error.
The default seed is 0 unless the ``NPVQ_SEED`` environment variable is set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import codec, evaluation
from .linear import DegenerateInputError
from .metrics import residual_scatter, segsnr
from .quantizer import read_codebook, write_codebook
from .signal_io import AudioError, SampleBuffer, read_audio, write_audio

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def default_seed():
    env = os.environ.get("NPVQ_SEED")
    return int(env) if env else 0


def _load_config(path):
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _merged(args, keys):
    """Config-file values overridden by any flag given on the command line."""
    cfg = _load_config(getattr(args, "config", None))
    out = {}
    for k in keys:
        v = getattr(args, k, None)
        out[k] = v if v is not None else cfg.get(k)
    return out


def _scheme_config(opts, codebook=None):
    return codec.SchemeConfig(
        opts["scheme"], nq=opts["nq"] or 3, codebook=codebook,
        frame_len=opts["frame_len"] or codec.DEFAULT_FRAME_LEN, epochs=opts["epochs"] or 50,
        n_starts=opts["n_starts"] or 5, combiner=opts["combiner"] or "median",
        seed_base=opts["seed"] if opts["seed"] is not None else default_seed())


def cmd_encode(args):
    opts = _merged(args, ["scheme", "nq", "frame_len", "epochs", "n_starts", "combiner", "seed",
                          "codebook"])
    if opts["scheme"] is None:
        raise UsageError("--scheme is required (flag or config file)")
    if opts["scheme"] not in codec.SCHEMES:
        raise UsageError(f"unknown scheme {opts['scheme']!r}")
    if opts["scheme"] == "nl_pvq" and not opts["codebook"]:
        raise codec.ConfigError("--scheme nl_pvq needs --codebook")
    cb = read_codebook(opts["codebook"]) if opts["codebook"] else None
    cfg = _scheme_config(opts, cb)
    buf = read_audio(args.input, args.format)
    bs, diag = codec.encode(buf, cfg)
    with open(args.output, "wb") as fh:
        fh.write(codec.serialize(bs))
    rep = segsnr(buf.samples, diag.reconstruction, cfg.frame_len,
                 config={k: v for k, v in opts.items() if k != "codebook"} | {"input": args.input})
    report = rep.to_dict()
    report["fallback_frames"] = diag.fallback_frames
    with open(args.report or f"{args.output}.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    if args.scatter:
        if cfg.scheme not in codec.VECTOR_SCHEMES:
            raise codec.ConfigError("--scatter needs a vector scheme")
        with open(args.scatter, "w") as fh:
            fh.write(residual_scatter(diag).to_csv())
    print(f"SEGSNR {rep.segsnr_db:.2f} dB  sigma {rep.sigma_db:.2f} dB  ({len(rep.per_frame_snr_db)} frames)")
    return EXIT_OK


def cmd_decode(args):
    with open(args.input, "rb") as fh:
        bs = codec.deserialize(fh.read())
    cb = read_codebook(args.codebook) if args.codebook else None
    out = codec.decode(bs, cb)
    if args.reference:
        ref = read_audio(args.reference, args.format)
        out = SampleBuffer(out.samples, ref.sample_rate_hz)
        rep = segsnr(ref.samples, out.samples, bs.frame_len)
        print(f"SEGSNR {rep.segsnr_db:.2f} dB  sigma {rep.sigma_db:.2f} dB  ({len(rep.per_frame_snr_db)} frames)")
    write_audio(out, args.output, args.format)
    return EXIT_OK


def cmd_train_codebook(args):
    opts = _merged(args, ["bits", "from_nq", "epochs", "combiner", "seed", "frame_len", "n_starts",
                          "closed_loop_rounds", "max_iter"])
    signals = [read_audio(p, args.format) for p in args.inputs]
    cb = evaluation.train_codebook(
        signals, opts["bits"] or 6, from_nq=opts["from_nq"] or 3, epochs=opts["epochs"] or 50,
        combiner=opts["combiner"] or "median",
        seed=opts["seed"] if opts["seed"] is not None else default_seed(),
        frame_len=opts["frame_len"] or codec.DEFAULT_FRAME_LEN, n_starts=opts["n_starts"] or 5,
        closed_loop_rounds=opts["closed_loop_rounds"] or 0, max_iter=opts["max_iter"] or 100)
    cb.training_meta["inputs"] = list(args.inputs)
    write_codebook(cb, args.output)
    print(f"{len(cb)} codewords, final distortion {cb.training_meta['final_distortion']:.3e}")
    return EXIT_OK


def cmd_evaluate(args):
    m = evaluation.load_manifest(args.manifest, args.preset)
    if args.seed is not None:
        m.seed = args.seed
    elif "NPVQ_SEED" in os.environ:
        m.seed = default_seed()
    out_dir = args.out or m.output_dir
    if not out_dir:
        raise UsageError("no output directory (use --out or output_dir in the manifest)")
    m = evaluation.with_output(m, out_dir)
    result = evaluation.run_evaluation(m, jobs=args.jobs)
    evaluation.write_results(result, out_dir)
    if result.aggregates:
        print(evaluation.format_table(result.aggregates))
    print(f"{len(result.rows)} rows written to {out_dir}")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="npvq", description="ADPCM / NL-PVQ speech coding toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("encode", help="encode audio to a bitstream")
    e.add_argument("input")
    e.add_argument("output")
    e.add_argument("--scheme", choices=codec.SCHEMES)
    e.add_argument("--nq", type=int, choices=range(2, 6))
    e.add_argument("--codebook")
    e.add_argument("--frame-len", type=int)
    e.add_argument("--epochs", type=int)
    e.add_argument("--n-starts", type=int)
    e.add_argument("--combiner", choices=("mean", "median"))
    e.add_argument("--seed", type=int)
    e.add_argument("--config", help="JSON file with defaults for the flags above")
    e.add_argument("--format", choices=("wav", "raw_s16le"))
    e.add_argument("--report", help="report JSON path (default: OUTPUT.json)")
    e.add_argument("--scatter", help="write residual scatter CSV (vector schemes)")
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="decode a bitstream to audio")
    d.add_argument("input")
    d.add_argument("output")
    d.add_argument("--codebook")
    d.add_argument("--reference", help="original audio; prints SEGSNR against it")
    d.add_argument("--format", choices=("wav", "raw_s16le"))
    d.set_defaults(func=cmd_decode)

    t = sub.add_parser("train-codebook", help="train an NL-PVQ codebook")
    t.add_argument("inputs", nargs="+")
    t.add_argument("output")
    t.add_argument("--bits", type=int)
    t.add_argument("--from-nq", type=int, choices=range(2, 6))
    t.add_argument("--closed-loop-rounds", type=int)
    t.add_argument("--max-iter", type=int)
    t.add_argument("--frame-len", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--n-starts", type=int)
    t.add_argument("--combiner", choices=("mean", "median"))
    t.add_argument("--seed", type=int)
    t.add_argument("--config")
    t.add_argument("--format", choices=("wav", "raw_s16le"))
    t.set_defaults(func=cmd_train_codebook)

    v = sub.add_parser("evaluate", help="SEGSNR tables over a manifest of utterances")
    v.add_argument("manifest")
    v.add_argument("--preset", choices=evaluation.PRESETS)
    v.add_argument("--out")
    v.add_argument("--jobs", type=int, default=1)
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, codec.ConfigError) as exc:
        print(f"npvq: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        # a path named on the command line does not exist
        print(f"npvq: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AudioError, codec.BitstreamError, codec.CodebookMismatchError, DegenerateInputError,
            ValueError, OSError) as exc:
        print(f"npvq: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:
        print(f"npvq: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
