"""Synthetic test sources at 8 kHz."""

from __future__ import annotations

import numpy as np

from .signal_io import DEFAULT_RATE, SampleBuffer


def all_pole(excitation, a):
    """``y[n] = e[n] + sum_i a[i] y[n-1-i]``."""
    a = np.asarray(a, dtype=np.float64)
    p = a.size
    y = np.zeros(len(excitation) + p)
    ar = a[::-1]
    for n, e in enumerate(excitation):
        y[n + p] = e + float(np.dot(ar, y[n:n + p]))
    return y[p:]


def ar2_coefficients(radius=0.95, angle=np.pi / 5):
    """Predictor coefficients of an AR(2) process with poles ``radius * exp(+-j angle)``."""
    return np.array([2.0 * radius * np.cos(angle), -radius * radius])


def ar2_source(n, seed=0, radius=0.95, angle=np.pi / 5, peak=0.5) -> SampleBuffer:
    rng = np.random.default_rng(seed)
    y = all_pole(rng.standard_normal(n), ar2_coefficients(radius, angle))
    return SampleBuffer(peak * y / np.max(np.abs(y)), DEFAULT_RATE)


def voiced_source(n, seed=0, f0=120.0, formants=((700, 80), (1200, 90), (2600, 120)),
                  peak=0.6, glottal_len=24, noise=0.05) -> SampleBuffer:
    """Vowel-like signal: smoothed glottal pulses plus aspiration noise through formant resonators.

    Pitch drifts by +-5 % and the amplitude envelope swings slowly, so frames
    differ in level as they do in speech.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n) / DEFAULT_RATE
    pitch = f0 * (1.0 + 0.05 * np.sin(2 * np.pi * 0.7 * t + rng.uniform(0, 2 * np.pi)))
    pulses = np.diff(np.floor(np.cumsum(pitch) / DEFAULT_RATE), prepend=0.0)
    flow_derivative = np.diff(np.hanning(glottal_len), prepend=0.0)
    exc = np.convolve(pulses, flow_derivative)[:n]
    y = exc / np.max(np.abs(exc)) + noise * rng.standard_normal(n)
    for f, bw in formants:
        r = np.exp(-np.pi * bw / DEFAULT_RATE)
        y = all_pole(y, [2 * r * np.cos(2 * np.pi * f / DEFAULT_RATE), -r * r])
    y = y * (0.55 + 0.45 * np.sin(2 * np.pi * 1.3 * t + rng.uniform(0, 2 * np.pi)))
    return SampleBuffer(peak * y / np.max(np.abs(y)), DEFAULT_RATE)
