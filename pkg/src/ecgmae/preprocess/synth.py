"""Gaussian-wave synthetic ECG for tests and demos."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import InvalidConfig
from ..rng import stream
from .segments import CLASS_INDEX, LEFT, RIGHT, UNLABELED, SegmentDataset, segment_beats
from .signal import TARGET_FS


@dataclass(frozen=True)
class SyntheticEcgConfig:
    duration: float = 10.0  # seconds
    heart_rate: float = 72.0  # bpm
    fs: float = TARGET_FS
    p_amp: float = 0.15
    p_width: float = 0.025
    p_offset: float = -0.20
    qrs_amp: float = 1.0
    qrs_width: float = 0.010
    t_amp: float = 0.30
    t_width: float = 0.045
    t_offset: float = 0.28
    noise_sigma: float = 0.0  # mV
    seed: int = 0

    def validate(self):
        if not self.duration > 0:
            raise InvalidConfig("duration must be positive")
        if not 30 <= self.heart_rate <= 220:
            raise InvalidConfig("heart_rate must lie in [30, 220] bpm")
        if not self.fs > 0:
            raise InvalidConfig("fs must be positive")
        if min(self.p_width, self.qrs_width, self.t_width) <= 0:
            raise InvalidConfig("wave widths must be positive")
        if self.noise_sigma < 0:
            raise InvalidConfig("noise_sigma must be non-negative")


def _beat_template(cfg: SyntheticEcgConfig, t: np.ndarray) -> np.ndarray:
    def bump(amp, center, width):
        return amp * np.exp(-0.5 * ((t - center) / width) ** 2)

    w = cfg.qrs_width
    return (bump(cfg.p_amp, cfg.p_offset, cfg.p_width)
            + bump(-0.12 * cfg.qrs_amp, -2.5 * w, 0.8 * w)
            + bump(cfg.qrs_amp, 0.0, w)
            + bump(-0.25 * cfg.qrs_amp, 2.5 * w, 0.8 * w)
            + bump(cfg.t_amp, cfg.t_offset, cfg.t_width))


def synth_ecg(config: SyntheticEcgConfig) -> tuple[np.ndarray, np.ndarray]:
    """Signal in mV and the QRS-centre sample of every beat.

    Beats sit on integer sample positions spaced ``60 / heart_rate``
    seconds apart starting half an interval in, so with zero noise and an
    integral beat period the signal repeats exactly.
    """
    config.validate()
    fs = config.fs
    n = int(round(config.duration * fs))
    rr = 60.0 / config.heart_rate * fs
    centers = []
    k = 0
    while True:
        c = int(round((k + 0.5) * rr))
        if c >= n:
            break
        centers.append(c)
        k += 1
    centers = np.asarray(centers, dtype=np.int64)

    support = int(np.ceil(0.8 * fs))
    offsets = np.arange(-support, support + 1)
    template = _beat_template(config, offsets / fs)
    sig = np.zeros(n)
    for c in centers:
        lo, hi = c - support, c + support + 1
        a, b = max(lo, 0), min(hi, n)
        sig[a:b] += template[a - lo:b - lo]
    if config.noise_sigma > 0:
        sig = sig + stream(config.seed, "synth.noise").normal(0.0, config.noise_sigma, n)
    return sig, centers


# morphology families for the toy classification task
NORMAL_BEAT = SyntheticEcgConfig()
VENTRICULAR_BEAT = SyntheticEcgConfig(p_amp=0.0, qrs_amp=1.2, qrs_width=0.028, t_amp=-0.40,
                                      t_width=0.060, t_offset=0.32)
TOY_MORPHOLOGIES = {"N": NORMAL_BEAT, "VEB": VENTRICULAR_BEAT}


def toy_segments(n: int, seed: int, labeled: bool = True, classes=("N", "VEB"),
                 max_noise: float = 0.03) -> SegmentDataset:
    """``n`` jittered single-beat windows drawn from ``classes`` morphologies."""
    rng = stream(seed, "toy.segments")
    samples, labels, peaks = [], [], []
    for i in range(n):
        cls = classes[int(rng.integers(len(classes)))]
        base = TOY_MORPHOLOGIES[cls]
        jitter = lambda: float(rng.uniform(0.85, 1.15))  # noqa: E731
        cfg = replace(
            base,
            duration=3.0,
            heart_rate=float(rng.uniform(55, 100)),
            p_amp=base.p_amp * jitter(),
            qrs_amp=base.qrs_amp * jitter(),
            qrs_width=base.qrs_width * jitter(),
            t_amp=base.t_amp * jitter(),
            t_width=base.t_width * jitter(),
            noise_sigma=float(rng.uniform(0.0, max_noise)),
            seed=int(rng.integers(2**31)),
        )
        sig, centers = synth_ecg(cfg)
        ok = centers[(centers >= LEFT) & (centers + RIGHT <= sig.size)]
        p = int(ok[np.argmin(np.abs(ok - sig.size // 2))])
        (seg,), _ = segment_beats(sig, [p], [cls] if labeled else None, f"toy{seed}:{i}")
        samples.append(seg.samples)
        labels.append(seg.label)
        peaks.append(p)
    lab = [UNLABELED if c is None else CLASS_INDEX[c] for c in labels]
    return SegmentDataset(np.stack(samples) if samples else np.zeros((0, 480)), lab,
                          [f"toy{seed}:{i}" for i in range(n)], peaks)
