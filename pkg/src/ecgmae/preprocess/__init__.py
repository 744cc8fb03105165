"""Beat extraction, normalization, dataset splits and synthetic fixtures."""

from .segments import (
    CLASS_INDEX,
    CLASSES,
    SEGMENT_LENGTH,
    UNLABELED,
    BeatSegment,
    SegmentDataset,
    map_aami,
    normalize,
    read_segments,
    segment_beats,
    write_segments,
)
from .signal import TARGET_FS, detect_r_peaks, map_index, resample
from .splits import (
    DS1_RECORDS,
    DS2_RECORDS,
    PACED_RECORDS,
    DatasetSplit,
    build_splits,
    distribution_table,
    labeled_segments,
    unlabeled_segments,
    write_manifest,
)
from .synth import SyntheticEcgConfig, synth_ecg, toy_segments

__all__ = [
    "CLASS_INDEX", "CLASSES", "DS1_RECORDS", "DS2_RECORDS", "PACED_RECORDS", "SEGMENT_LENGTH",
    "TARGET_FS", "UNLABELED", "BeatSegment", "DatasetSplit", "SegmentDataset",
    "SyntheticEcgConfig", "build_splits", "detect_r_peaks", "distribution_table",
    "labeled_segments", "map_aami", "map_index", "normalize", "read_segments", "resample",
    "segment_beats", "synth_ecg", "toy_segments", "unlabeled_segments", "write_manifest",
    "write_segments",
]
