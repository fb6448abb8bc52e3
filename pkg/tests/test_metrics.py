import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from npvq.metrics import ExcludedFrame, frame_snr, residual_scatter, segsnr


def test_frame_snr_examples():
    x = np.array([10.0])
    assert frame_snr(x, np.array([1.0])) == pytest.approx(20.0)
    y = np.array([0.3, -0.2])
    assert frame_snr(y, y) == 0.0
    assert frame_snr(np.array([np.sqrt(10.0)]), np.array([1.0])) == pytest.approx(10.0)


def test_frame_snr_excluded():
    with pytest.raises(ExcludedFrame, match="signal"):
        frame_snr(np.zeros(3), np.ones(3))
    with pytest.raises(ExcludedFrame, match="error"):
        frame_snr(np.ones(3), np.zeros(3))
    with pytest.raises(ValueError):
        frame_snr(np.ones(3), np.ones(2))


def _frame_with_snr(db, n=4):
    x = np.ones(n)
    return x, x - x * 10 ** (-db / 20)


def test_segsnr_two_frames():
    x1, r1 = _frame_with_snr(10)
    x2, r2 = _frame_with_snr(20)
    rep = segsnr(np.r_[x1, x2] * 0.1, np.r_[r1, r2] * 0.1, 4)
    assert rep.segsnr_db == pytest.approx(15.0)
    assert rep.sigma_db == pytest.approx(5.0)


def test_segsnr_single_and_perfect():
    x, r = _frame_with_snr(7)
    rep = segsnr(x * 0.1, r * 0.1, 4)
    assert rep.segsnr_db == pytest.approx(7.0) and rep.sigma_db == pytest.approx(0.0, abs=1e-12)
    perfect = segsnr(x * 0.1, x * 0.1, 4)
    assert not perfect.valid and perfect.status == "no valid frames"
    assert perfect.excluded == [(0, "zero error energy")]
    assert json.loads(perfect.to_json())["segsnr_db"] is None


def test_segsnr_length_mismatch():
    with pytest.raises(ValueError):
        segsnr(np.ones(3), np.ones(4))


def test_segsnr_locality(rng):
    x = rng.uniform(-0.5, 0.5, 800)
    y = x.copy()
    y[::7] += 1e-3
    base = segsnr(x, y, 200).per_frame_snr_db
    z = y.copy()
    z[450] += 1e-6
    changed = segsnr(x, z, 200).per_frame_snr_db
    assert [a == b for a, b in zip(base, changed)] == [True, True, False, True]


@given(st.floats(0.01, 100.0))
@settings(max_examples=30)
def test_segsnr_scale_invariant(c):
    rng = np.random.default_rng(0)
    x = rng.uniform(-0.01, 0.01, 400)
    y = x + rng.uniform(-1e-3, 1e-3, 400)
    a = segsnr(x, y, 100).per_frame_snr_db
    b = segsnr(x * c, y * c, 100).per_frame_snr_db
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-9)


def test_report_recomputable(rng):
    x = rng.uniform(-0.5, 0.5, 1000)
    rep = segsnr(x, x + rng.normal(0, 0.01, 1000), 200)
    v = np.array(rep.per_frame_snr_db)
    assert abs(rep.segsnr_db - v.mean()) < 1e-12
    assert abs(rep.sigma_db - np.sqrt(np.mean((v - v.mean()) ** 2))) < 1e-12
    lines = rep.frames_csv().splitlines()
    assert lines[0] == "frame_index,snr_db" and len(lines) == 6


def test_scatter_on_diagonal():
    t = np.linspace(-1, 1, 50)
    s = residual_scatter(np.c_[t, t])
    assert s.correlation == pytest.approx(1.0, abs=1e-12)
    assert s.diagonal_fraction == 1.0
    assert s.to_csv().splitlines()[0] == "e1,e2"


def test_scatter_independent(rng):
    s = residual_scatter(rng.standard_normal((10_000, 2)))
    assert abs(s.correlation) < 0.1
    assert s.diagonal_fraction == pytest.approx(30 / 180, abs=0.02)


def test_scatter_errors():
    with pytest.raises(ValueError):
        residual_scatter(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        residual_scatter(np.zeros(10))
