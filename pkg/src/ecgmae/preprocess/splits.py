"""Record-to-beat conversion and the inter-patient DS1/DS2 split."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import UnknownRecord
from ..rng import stream
from ..wfdb_io import EcgRecord
from .segments import CLASSES, SegmentDataset, map_aami, segment_beats
from .signal import TARGET_FS, detect_r_peaks, map_index, resample

log = logging.getLogger(__name__)

# de Chazal et al. (2004) inter-patient division of MITDB
DS1_RECORDS = frozenset({
    "101", "106", "108", "109", "112", "114", "115", "116", "118", "119", "122",
    "124", "201", "203", "205", "207", "208", "209", "215", "220", "223", "230",
})
DS2_RECORDS = frozenset({
    "100", "103", "105", "111", "113", "117", "121", "123", "200", "202", "210",
    "212", "213", "214", "219", "221", "222", "228", "231", "232", "233", "234",
})
# paced records, excluded from both halves by the same protocol
PACED_RECORDS = frozenset({"102", "104", "107", "217"})


@dataclass
class DatasetSplit:
    ds1_train: SegmentDataset
    ds1_val: SegmentDataset
    ds2_test: SegmentDataset
    extra_finetune: SegmentDataset
    assignments: dict[str, str] = field(default_factory=dict)

    def finetune_pool(self) -> SegmentDataset:
        return SegmentDataset.concat(self.ds1_train, self.extra_finetune)


def _lead_at_360(record: EcgRecord, lead: int) -> tuple[np.ndarray, int]:
    sig = record.signals[lead]
    if record.fs == TARGET_FS:
        return sig, sig.size
    return resample(sig, record.fs, TARGET_FS), sig.size


def labeled_segments(record: EcgRecord, lead: int = 0) -> tuple[SegmentDataset, int]:
    """Beats at annotated positions with AAMI labels; non-beat marks dropped."""
    sig, n_in = _lead_at_360(record, lead)
    peaks, labels = [], []
    for a in record.annotations:
        cls = map_aami(a.symbol)
        if cls is None:
            continue
        peaks.append(int(map_index(a.sample_index, n_in, sig.size)))
        labels.append(cls)
    segs, skipped = segment_beats(sig, peaks, labels, record.name)
    return SegmentDataset.from_segments(segs), skipped


def unlabeled_segments(record: EcgRecord, leads=None) -> tuple[SegmentDataset, int]:
    """Pan-Tompkins-located beats from every requested lead, unlabeled."""
    leads = range(record.header.n_signals) if leads is None else leads
    parts, skipped = [], 0
    for lead in leads:
        sig, _ = _lead_at_360(record, lead)
        if sig.size <= 2 * TARGET_FS:
            continue
        segs, s = segment_beats(sig, detect_r_peaks(sig, TARGET_FS), None, f"{record.name}:{lead}")
        parts.append(SegmentDataset.from_segments(segs))
        skipped += s
    return SegmentDataset.concat(*parts), skipped


def assign_mitdb(name: str) -> str:
    if name in DS1_RECORDS:
        return "DS1"
    if name in DS2_RECORDS:
        return "DS2"
    if name in PACED_RECORDS:
        return "excluded"
    raise UnknownRecord(f"MITDB record {name!r} is in neither DS1 nor DS2")


def build_splits(mitdb_records, incartdb_records=(), val_fraction: float = 0.1, seed: int = 0,
                 lead: int = 0) -> DatasetSplit:
    """Inter-patient split: DS1 shuffled by beat into train/val, DS2 held out."""
    ds1, ds2, extra = [], [], []
    assignments: dict[str, str] = {}
    for rec in mitdb_records:
        where = assign_mitdb(rec.name)
        assignments[rec.name] = where
        if where == "excluded":
            log.info("skipping paced record %s", rec.name)
            continue
        segs, skipped = labeled_segments(rec, lead)
        if skipped:
            log.debug("%s: %d beats too close to the record edge", rec.name, skipped)
        (ds1 if where == "DS1" else ds2).append(segs)
    for rec in incartdb_records:
        assignments[rec.name] = "extra_finetune"
        extra.append(labeled_segments(rec, lead)[0])

    pool = SegmentDataset.concat(*ds1)
    order = stream(seed, "split").permutation(len(pool))
    n_val = int(np.floor(val_fraction * len(pool) + 0.5))
    return DatasetSplit(
        ds1_train=pool.subset(np.sort(order[n_val:])),
        ds1_val=pool.subset(np.sort(order[:n_val])),
        ds2_test=SegmentDataset.concat(*ds2),
        extra_finetune=SegmentDataset.concat(*extra),
        assignments=assignments,
    )


def write_manifest(path, split: DatasetSplit) -> None:
    lines = ["# record\tsplit"]
    lines += [f"{name}\t{where}" for name, where in sorted(split.assignments.items())]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def distribution_table(rows) -> str:
    """Class counts per named split in a five-column table."""
    head = f"{'':<26}" + "".join(f"{c:>8}" for c in CLASSES)
    out = [head]
    for name, ds in rows:
        counts = ds.class_counts()
        out.append(f"{name:<26}" + "".join(f"{counts[c]:>8}" for c in CLASSES))
    return "\n".join(out)
