import numpy as np
import pytest

from npvq import codec, linear, neural, synthetic
from npvq.codec import (Bitstream, BitstreamError, CodebookMismatchError, ConfigError, SchemeConfig,
                        adapt_predictor, decode, deserialize, encode, serialize)
from npvq.evaluation import train_codebook
from npvq.metrics import segsnr
from npvq.quantizer import Codebook, closed_loop_refine, codebook_hash, initial_state

FAST = dict(epochs=2, n_starts=2, frame_len=100)


@pytest.fixture(scope="module")
def signal():
    return synthetic.voiced_source(700, seed=5)


@pytest.fixture(scope="module")
def codebook(signal):
    return train_codebook([signal], 4, epochs=2, n_starts=2, frame_len=100)


def _cfg(scheme, codebook=None, **kw):
    opts = dict(FAST, **kw)
    if scheme == "nl_pvq":
        return SchemeConfig(scheme, codebook=codebook, **opts)
    return SchemeConfig(scheme, **opts)


@pytest.mark.parametrize("scheme", codec.SCHEMES)
@pytest.mark.parametrize("n", [700, 701])
def test_backward_symmetry(signal, codebook, scheme, n):
    x = np.r_[signal.samples, 0.1][:n]
    cfg = _cfg(scheme, codebook)
    bs, diag = encode(x, cfg)
    out = decode(deserialize(serialize(bs)), codebook)
    assert np.array_equal(out.samples, diag.reconstruction)
    assert out.samples.size == n
    assert bs.pad_flag == int(scheme == "nl_pvq" and n % 2)


def test_bitstream_roundtrip_and_layout(signal):
    bs, _ = encode(signal.samples[:200], SchemeConfig("lpc_scalar", nq=3, seed_base=2 ** 40))
    data = serialize(bs)
    assert codec.HEADER_SIZE == 47
    assert len(data) == 47 + 600 // 8
    assert data[:4] == b"NPVQ"
    assert deserialize(data) == bs
    bad = b"X" + data[1:]
    with pytest.raises(BitstreamError) as exc:
        deserialize(bad)
    assert exc.value.offset == 0


def test_random_bitstreams_roundtrip(rng):
    for _ in range(20):
        bs = Bitstream(str(rng.choice(codec.SCHEMES)), int(rng.integers(0, 6)),
                       int(rng.integers(1, 65536)), 1, int(rng.integers(1, 100)),
                       int(rng.integers(1, 10)), "mean", int(rng.integers(0, 2 ** 63)),
                       rng.bytes(16), int(rng.integers(0, 10 ** 6)), 0, rng.bytes(int(rng.integers(0, 50))))
        assert deserialize(serialize(bs)) == bs


def test_code_packing_roundtrip(rng):
    for width in range(1, 9):
        codes = rng.integers(0, 2 ** width, 37)
        packed = codec.pack_codes(codes, width)
        assert len(packed) == -(-37 * width // 8)
        assert np.array_equal(codec.unpack_codes(packed, width, 37), codes)


def test_header_size_constant(signal):
    sizes = set()
    for n in (10, 300, 700):
        data = serialize(encode(signal.samples[:n], SchemeConfig("lpc_scalar", nq=4))[0])
        sizes.add(len(data) - -(-n * 4 // 8))
    assert sizes == {codec.HEADER_SIZE}


def test_zero_samples_stream():
    bs, _ = encode(np.zeros(0), SchemeConfig("mlp_scalar"))
    assert serialize(bs) == serialize(bs)[:codec.HEADER_SIZE]
    assert decode(bs).samples.size == 0


def test_truncated_stream_names_frame(signal):
    bs, _ = encode(signal.samples[:700], _cfg("lpc_scalar", nq=3))
    data = serialize(bs)
    cut = deserialize(data[:codec.HEADER_SIZE + 50])  # 400 bits = 133 codes
    with pytest.raises(BitstreamError, match="frame 1") as exc:
        decode(cut)
    assert exc.value.frame == 1


@pytest.mark.parametrize("scheme", ["lpc_scalar", "mlp_scalar", "mlp_scalar_hint", "mlp_vector_sq"])
def test_zero_signal(scheme):
    nq = 3
    bs, diag = encode(np.zeros(600), SchemeConfig(scheme, nq=nq))
    codes = codec.unpack_codes(bs.payload, nq, 600)
    assert set(codes.tolist()) <= {0, 2 ** (nq - 1)}
    step0 = initial_state(nq).step
    mag = np.abs(diag.reconstruction)
    assert np.all(mag <= step0 / 2)
    assert np.all(np.diff(mag[:200]) <= 0)
    assert mag[199] < mag[0]


def test_lpc_rate_improves(ar2_short):
    lo = segsnr(ar2_short, encode(ar2_short, SchemeConfig("lpc_scalar", nq=2))[1].reconstruction)
    hi = segsnr(ar2_short, encode(ar2_short, SchemeConfig("lpc_scalar", nq=5))[1].reconstruction)
    assert hi.segsnr_db > lo.segsnr_db


def test_adapt_predictor_paths(signal):
    cfg = _cfg("lpc_scalar")
    model, ok = adapt_predictor(signal.samples[:100], cfg, 1)
    assert ok and isinstance(model, linear.ScalarArModel)
    kept, ok = adapt_predictor(np.zeros(100), cfg, 2, current=model)
    assert not ok and kept is model
    short, ok = adapt_predictor(np.ones(5) * 0.1, _cfg("mlp_scalar"), 3, current="prev")
    assert not ok and short == "prev"
    a, _ = adapt_predictor(signal.samples[:100], _cfg("mlp_scalar"), 4)
    b, _ = adapt_predictor(signal.samples[:100], _cfg("mlp_scalar"), 4)
    assert all(np.array_equal(x.params, y.params) for x, y in zip(a.nets, b.nets))


def test_frame_zero_uses_zero_predictor(signal):
    _, diag = encode(signal.samples[:100], _cfg("mlp_scalar"))
    _, ref = encode(signal.samples[:100], _cfg("lpc_scalar"))
    assert np.array_equal(diag.reconstruction, ref.reconstruction)


def test_causality_prefix(signal):
    x = signal.samples[:600]
    y = x.copy()
    y[350:] = -y[350:]
    for scheme in ("lpc_scalar", "mlp_vector_sq"):
        a = encode(x, _cfg(scheme))[1].reconstruction
        b = encode(y, _cfg(scheme))[1].reconstruction
        assert np.array_equal(a[:350], b[:350])
        assert not np.array_equal(a[350:], b[350:])


def test_hint_differs_only_through_training(signal):
    x = signal.samples[:400]
    a = encode(x, _cfg("mlp_scalar"))[1].reconstruction
    b = encode(x, _cfg("mlp_scalar_hint"))[1].reconstruction
    assert np.array_equal(a[:100], b[:100])
    assert not np.array_equal(a[100:], b[100:])
    # coding uses output 0 of the two-output committee only
    committee, _ = adapt_predictor(a[:100], _cfg("mlp_scalar_hint"), 1)
    assert committee.dims[2] == 2
    h = a[90:100]
    assert codec._predict(committee, h, 1)[0] == committee.predict(h)[0]


def test_config_errors(codebook):
    with pytest.raises(ConfigError):
        SchemeConfig("adpcm")
    with pytest.raises(ConfigError):
        SchemeConfig("nl_pvq")
    with pytest.raises(ConfigError):
        SchemeConfig("lpc_scalar", codebook=codebook)
    with pytest.raises(ConfigError):
        SchemeConfig("lpc_scalar", nq=6)
    with pytest.raises(ConfigError):
        SchemeConfig("mlp_vector_sq", frame_len=201)
    with pytest.raises(ConfigError):
        SchemeConfig("nl_pvq", codebook=Codebook(np.zeros((2, 3)), 1))


def test_codebook_hash_mismatch(signal, codebook):
    bs, _ = encode(signal.samples[:300], _cfg("nl_pvq", codebook))
    assert bs.codebook_hash == codebook_hash(codebook)
    other = Codebook(codebook.codewords + 1e-9, codebook.bits)
    with pytest.raises(CodebookMismatchError):
        decode(bs, other)
    with pytest.raises(ConfigError):
        decode(bs)


def test_vector_sq_residual_rows(signal):
    _, diag = encode(signal.samples[:301], _cfg("mlp_vector_sq"))
    assert diag.residuals.shape == (150, 2)
    assert diag.codes.size == 301


def test_closed_loop_refine(signal, codebook):
    ctx = _cfg("nl_pvq", codebook)
    assert closed_loop_refine(codebook, ctx, signal, rounds=0) is codebook
    a = closed_loop_refine(codebook, ctx, signal, rounds=2)
    b = closed_loop_refine(codebook, ctx, signal, rounds=2)
    assert np.array_equal(a.codewords, b.codewords)
    assert len(a.training_meta["closed_loop_distortion"]) == 3
