"""
Low-pass prefiltering of RSS sweeps
===================================

An optional FIR filter smooths each link/channel series before tracking.
Its group delay shifts the filtered stream in time, which the tracker has
to account for.
"""

import numpy as np
from scipy import signal

from tristate_dfl.simulate import FilterSpec, design_lowpass, lowpass_filter

fs = 1 / 0.032
spec = FilterSpec()
taps = design_lowpass(spec, fs)
f, h = signal.freqz(taps, worN=2048, fs=fs)
mag = 20 * np.log10(np.abs(h) + 1e-12)
print(f"{len(taps)} taps, delay {(len(taps) - 1) / 2 / fs * 1000:.0f} ms")
print(f"gain at 2 Hz {mag[np.searchsorted(f, 2.0)]:.3f} dB, worst stopband {mag[f >= spec.stopband_hz].max():.1f} dB")

#%%
# A noisy step comes out smooth and late by the group delay.
x = np.r_[np.zeros(50), -10 * np.ones(50)] + np.random.default_rng(0).normal(0, 0.38, 100)
y, delay = lowpass_filter(x, spec, fs)
print("raw std before step", x[:50].std().round(3), "filtered", y[10:50].std().round(3))
print(f"filtered step crosses -5 dB at {np.argmax(y < -5) / fs:.3f} s (input at {50 / fs:.3f} s, delay {delay:.3f} s)")
