"""Beat windows, AAMI labels and the ``ECGB`` segment container."""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..errors import CorruptFile, NonFiniteInput, ShapeMismatch, VersionMismatch

SEGMENT_LENGTH = 480
LEFT = 360
RIGHT = 120

CLASSES = ("N", "SVEB", "VEB", "F", "Q")
CLASS_INDEX = {c: i for i, c in enumerate(CLASSES)}
UNLABELED = 255

_AAMI = {
    **dict.fromkeys("NLRej", "N"),
    **dict.fromkeys("AaJS", "SVEB"),
    **dict.fromkeys("VE", "VEB"),
    "F": "F",
    **dict.fromkeys("/fQ", "Q"),
}

ECGB_MAGIC = b"ECGB"
ECGB_VERSION = 1


def map_aami(symbol: str) -> str | None:
    """AAMI class for an MIT beat mnemonic; ``None`` for non-beat symbols."""
    return _AAMI.get(symbol)


def normalize(window) -> np.ndarray:
    """Min-max scale to [0, 1]; a flat window maps to 0.5 everywhere."""
    w = np.asarray(window, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise NonFiniteInput("window contains non-finite values")
    lo, hi = w.min(), w.max()
    if hi == lo:
        return np.full(w.shape, 0.5)
    return (w - lo) / (hi - lo)


@dataclass(frozen=True)
class BeatSegment:
    samples: np.ndarray
    label: str | None = None
    source_record: str = ""
    peak_index: int = 0

    def __post_init__(self):
        if self.samples.shape != (SEGMENT_LENGTH,):
            raise ShapeMismatch(f"segment must hold {SEGMENT_LENGTH} samples, got {self.samples.shape}")
        if self.label is not None and self.label not in CLASS_INDEX:
            raise ValueError(f"unknown class {self.label!r}")


def segment_beats(signal, peaks, labels=None, record_name: str = "") -> tuple[list[BeatSegment], int]:
    """Cut ``[p - 360, p + 120)`` around each peak and normalize it.

    Peaks whose window would leave the signal are skipped. Returns the
    segments and the number skipped.
    """
    x = np.asarray(signal, dtype=np.float64)
    if labels is not None and len(labels) != len(peaks):
        raise ShapeMismatch("labels and peaks differ in length")
    out: list[BeatSegment] = []
    skipped = 0
    for i, p in enumerate(peaks):
        p = int(p)
        if p < LEFT or p + RIGHT > x.size:
            skipped += 1
            continue
        win = normalize(x[p - LEFT:p + RIGHT]).astype(np.float32)
        out.append(BeatSegment(win, None if labels is None else labels[i], record_name, p))
    return out, skipped


class SegmentDataset:
    """Column-oriented collection of beat segments."""

    def __init__(self, samples, labels=None, records=None, peaks=None):
        self.samples = np.ascontiguousarray(np.asarray(samples, dtype=np.float32).reshape(-1, SEGMENT_LENGTH))
        n = len(self.samples)
        self.labels = (np.full(n, UNLABELED, dtype=np.uint8) if labels is None
                       else np.asarray(labels, dtype=np.uint8).reshape(n))
        self.records = list(records) if records is not None else [""] * n
        self.peaks = np.zeros(n, dtype=np.uint64) if peaks is None else np.asarray(peaks, dtype=np.uint64).reshape(n)
        if len(self.records) != n:
            raise ShapeMismatch("records length differs from sample count")

    @classmethod
    def from_segments(cls, segments) -> "SegmentDataset":
        segments = list(segments)
        if not segments:
            return cls(np.zeros((0, SEGMENT_LENGTH), np.float32))
        return cls(
            np.stack([s.samples for s in segments]),
            [UNLABELED if s.label is None else CLASS_INDEX[s.label] for s in segments],
            [s.source_record for s in segments],
            [s.peak_index for s in segments],
        )

    @classmethod
    def concat(cls, *sets: "SegmentDataset") -> "SegmentDataset":
        sets = [s for s in sets if len(s)]
        if not sets:
            return cls(np.zeros((0, SEGMENT_LENGTH), np.float32))
        return cls(np.concatenate([s.samples for s in sets]),
                   np.concatenate([s.labels for s in sets]),
                   [r for s in sets for r in s.records],
                   np.concatenate([s.peaks for s in sets]))

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, i) -> BeatSegment:
        lab = int(self.labels[i])
        return BeatSegment(self.samples[i], None if lab == UNLABELED else CLASSES[lab],
                           self.records[i], int(self.peaks[i]))

    def subset(self, idx) -> "SegmentDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return SegmentDataset(self.samples[idx], self.labels[idx],
                              [self.records[i] for i in idx], self.peaks[idx])

    @property
    def is_labeled(self) -> bool:
        return bool(len(self)) and bool(np.all(self.labels != UNLABELED))

    def class_counts(self) -> dict[str, int]:
        c = Counter(int(v) for v in self.labels if v != UNLABELED)
        return {name: c.get(i, 0) for i, name in enumerate(CLASSES)}


def write_segments(path, dataset: SegmentDataset) -> None:
    """Serialize to the versioned ``ECGB`` binary layout."""
    parts = [ECGB_MAGIC, struct.pack("<IQ", ECGB_VERSION, len(dataset))]
    samples = dataset.samples.astype("<f4")
    for i in range(len(dataset)):
        name = dataset.records[i].encode("utf-8")
        parts.append(samples[i].tobytes())
        parts.append(struct.pack("<BH", int(dataset.labels[i]), len(name)))
        parts.append(name)
        parts.append(struct.pack("<Q", int(dataset.peaks[i])))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_segments(path) -> SegmentDataset:
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 16 or buf[:4] != ECGB_MAGIC:
        raise CorruptFile(f"{path}: not an ECGB segment file")
    version, count = struct.unpack_from("<IQ", buf, 4)
    if version != ECGB_VERSION:
        raise VersionMismatch(f"{path}: ECGB version {version}, expected {ECGB_VERSION}")
    off = 16
    samples = np.empty((count, SEGMENT_LENGTH), dtype=np.float32)
    labels = np.empty(count, dtype=np.uint8)
    peaks = np.empty(count, dtype=np.uint64)
    records = []
    nbytes = 4 * SEGMENT_LENGTH
    try:
        for i in range(count):
            samples[i] = np.frombuffer(buf, dtype="<f4", count=SEGMENT_LENGTH, offset=off)
            off += nbytes
            labels[i], n = struct.unpack_from("<BH", buf, off)
            off += 3
            if off + n > len(buf):
                raise CorruptFile(f"{path}: truncated record name")
            records.append(buf[off:off + n].decode("utf-8"))
            off += n
            (peaks[i],) = struct.unpack_from("<Q", buf, off)
            off += 8
    except (ValueError, struct.error) as exc:
        if isinstance(exc, CorruptFile):
            raise
        raise CorruptFile(f"{path}: truncated at segment {len(records)}") from None
    if off != len(buf):
        raise CorruptFile(f"{path}: {len(buf) - off} trailing bytes")
    bad = (labels != UNLABELED) & (labels >= len(CLASSES))
    if bad.any():
        raise CorruptFile(f"{path}: label byte {int(labels[bad][0])} outside 0-4/255")
    return SegmentDataset(samples, labels, records, peaks)
