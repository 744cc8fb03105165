"""Resampling and Pan-Tompkins R-peak detection."""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import butter, filtfilt, find_peaks

from ..errors import EmptySignal, InvalidConfig, NonFiniteInput, SignalTooShort

TARGET_FS = 360


def resampled_length(n: int, fs_in: float, fs_out: float) -> int:
    return int(math.floor(n * fs_out / fs_in + 0.5))


def resample(signal, fs_in: float, fs_out: float = TARGET_FS) -> np.ndarray:
    """Linear interpolation onto ``round(len * fs_out / fs_in)`` points.

    Output points are uniformly spaced over the input span, so the first
    and last samples are kept exactly.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise EmptySignal("resample needs a 1-d signal of at least 2 samples")
    if not (fs_in > 0 and fs_out > 0):
        raise InvalidConfig("sampling frequencies must be positive")
    if fs_in == fs_out:
        return x.copy()
    n_out = resampled_length(x.size, fs_in, fs_out)
    if n_out < 2:
        raise EmptySignal(f"resampled signal would have {n_out} samples")
    pos = np.linspace(0.0, x.size - 1, n_out)
    return np.interp(pos, np.arange(x.size), x)


def map_index(index, n_in: int, n_out: int):
    """Where sample ``index`` of an ``n_in``-long signal lands after :func:`resample`."""
    if n_in == n_out:
        return index
    return np.rint(np.asarray(index) * (n_out - 1) / (n_in - 1)).astype(np.int64)


def detect_r_peaks(signal, fs: float) -> list[int]:
    """Pan-Tompkins QRS detection returning R-peak sample indices.

    Band-pass 5-15 Hz, five-point derivative, squaring, 150 ms moving
    integration, then adaptive signal/noise thresholds on both the
    integrated and the filtered signal with search-back, T-wave rejection
    and a 200 ms refractory period.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size <= 2 * fs:
        raise SignalTooShort(f"need more than {2 * fs:g} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("signal contains non-finite values")
    if fs <= 30:
        raise InvalidConfig("sampling frequency must exceed 30 Hz for a 15 Hz band edge")

    b, a = butter(2, [5.0, 15.0], btype="bandpass", fs=fs)
    filt = filtfilt(b, a, x)
    deriv = np.convolve(filt, np.array([1.0, 2.0, 0.0, -2.0, -1.0]) * (fs / 8.0), mode="same")
    win = max(1, int(round(0.150 * fs)))
    integ = np.convolve(deriv * deriv, np.ones(win) / win, mode="same")
    if integ.max() <= 1e-12 * max(1.0, np.abs(x).max() ** 2):
        return []

    refractory = int(round(0.200 * fs))
    t_wave_window = int(round(0.360 * fs))
    half = win // 2 + 1
    cands, _ = find_peaks(integ, distance=refractory)
    if cands.size == 0:
        return []

    absf = np.abs(filt)
    absd = np.abs(deriv)

    def features(c):
        lo, hi = max(0, c - half), min(x.size, c + half + 1)
        loc = lo + int(np.argmax(absf[lo:hi]))
        return integ[c], absf[loc], absd[lo:hi].max(), loc

    learn = int(2 * fs)
    spki = 0.25 * integ[:learn].max()
    npki = 0.5 * integ[:learn].mean()
    spkf = 0.25 * absf[:learn].max()
    npkf = 0.5 * absf[:learn].mean()

    qrs: list[int] = []  # candidate positions accepted
    qrs_loc: list[int] = []
    last_slope = 0.0
    rr: list[int] = []
    rejected: list[int] = []

    def rr_avg():
        return float(np.mean(rr[-8:])) if rr else float(fs)

    def accept(c, loc, slope):
        nonlocal last_slope
        if qrs:
            rr.append(c - qrs[-1])
        qrs.append(c)
        qrs_loc.append(loc)
        last_slope = slope
        rejected.clear()

    for c in cands:
        thr_i1 = npki + 0.25 * (spki - npki)
        thr_f1 = npkf + 0.25 * (spkf - npkf)

        # search back for a missed beat
        if qrs and c - qrs[-1] > 1.66 * rr_avg() and rejected:
            thr_i2, thr_f2 = 0.5 * thr_i1, 0.5 * thr_f1
            best = None
            for r in rejected:
                pi, pf, sl, loc = features(r)
                if pi > thr_i2 and pf > thr_f2 and r - qrs[-1] > refractory and c - r > refractory:
                    if best is None or pi > best[0]:
                        best = (pi, pf, sl, loc, r)
            if best is not None:
                pi, pf, sl, loc, r = best
                spki = 0.25 * pi + 0.75 * spki
                spkf = 0.25 * pf + 0.75 * spkf
                accept(r, loc, sl)
                thr_i1 = npki + 0.25 * (spki - npki)
                thr_f1 = npkf + 0.25 * (spkf - npkf)

        pi, pf, slope, loc = features(c)
        is_qrs = pi > thr_i1 and pf > thr_f1
        if is_qrs and qrs and c - qrs[-1] < t_wave_window and slope < 0.5 * last_slope:
            is_qrs = False  # T wave
        if is_qrs and qrs and c - qrs[-1] < refractory:
            is_qrs = False
        if is_qrs:
            spki = 0.125 * pi + 0.875 * spki
            spkf = 0.125 * pf + 0.875 * spkf
            accept(c, loc, slope)
        else:
            npki = 0.125 * pi + 0.875 * npki
            npkf = 0.125 * pf + 0.875 * npkf
            rejected.append(c)

    # refine on the raw signal: largest deviation from the local median
    w2 = max(1, int(round(0.05 * fs)))
    peaks: list[int] = []
    for loc in qrs_loc:
        lo, hi = max(0, loc - w2), min(x.size, loc + w2 + 1)
        seg = x[lo:hi]
        r = lo + int(np.argmax(np.abs(seg - np.median(seg))))
        if peaks and r - peaks[-1] < refractory:
            if abs(x[r]) > abs(x[peaks[-1]]):
                peaks[-1] = r
            continue
        peaks.append(r)
    return peaks
