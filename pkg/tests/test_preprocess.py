import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ecgmae.errors import (
    CorruptFile,
    EmptySignal,
    InvalidConfig,
    NonFiniteInput,
    SignalTooShort,
    UnknownRecord,
    VersionMismatch,
)
from ecgmae.preprocess import (
    CLASSES,
    DS1_RECORDS,
    DS2_RECORDS,
    PACED_RECORDS,
    SegmentDataset,
    SyntheticEcgConfig,
    build_splits,
    detect_r_peaks,
    distribution_table,
    labeled_segments,
    map_aami,
    normalize,
    read_segments,
    resample,
    segment_beats,
    synth_ecg,
    toy_segments,
    unlabeled_segments,
    write_manifest,
    write_segments,
)
from ecgmae.preprocess.splits import assign_mitdb
from ecgmae.wfdb_io import Annotation, EcgRecord, RecordHeader, SignalSpec


# ---------------------------------------------------------------- resample

def test_resample_identity_and_constant():
    x = np.random.default_rng(0).standard_normal(100)
    assert np.array_equal(resample(x, 360, 360), x)
    out = resample(np.full(257, 3.25), 257, 360)
    assert out.size == 360 and np.all(out == 3.25)


def test_resample_sine_accuracy():
    fs_in, n = 257, 257 * 4
    t = np.arange(n) / fs_in
    y = resample(np.sin(2 * np.pi * 5 * t), fs_in, 360)
    assert y.size == round(n * 360 / fs_in)
    t_out = np.linspace(0, t[-1], y.size)
    assert np.abs(y - np.sin(2 * np.pi * 5 * t_out)).max() < 0.01
    assert y[0] == 0.0 and y[-1] == np.sin(2 * np.pi * 5 * t[-1])


def test_resample_errors():
    with pytest.raises(EmptySignal):
        resample([1.0], 100, 360)
    with pytest.raises(InvalidConfig):
        resample([1.0, 2.0], 0, 360)


# ----------------------------------------------------------- Pan-Tompkins

def test_flat_signal_has_no_peaks():
    assert detect_r_peaks(np.zeros(3600), 360) == []


def test_detector_exact_on_clean_synthetic():
    sig, truth = synth_ecg(SyntheticEcgConfig(duration=60, heart_rate=72))
    peaks = np.asarray(detect_r_peaks(sig, 360))
    assert peaks.size == truth.size == 72
    assert np.abs(peaks - truth).max() <= 9  # 25 ms at 360 Hz
    assert np.all(np.diff(peaks) > 0)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_detector_sensitivity_with_noise(seed):
    sig, truth = synth_ecg(SyntheticEcgConfig(duration=60, heart_rate=72, noise_sigma=0.05, seed=seed))
    peaks = np.asarray(detect_r_peaks(sig, 360))
    hits = sum(np.any(np.abs(peaks - t) <= 9) for t in truth)
    assert hits / truth.size >= 0.95


@pytest.mark.parametrize("hr", [40, 60, 100, 150, 180])
def test_detector_across_heart_rates(hr):
    sig, truth = synth_ecg(SyntheticEcgConfig(duration=30, heart_rate=hr))
    peaks = np.asarray(detect_r_peaks(sig, 360))
    assert peaks.size == truth.size and np.abs(peaks - truth).max() <= 9


def test_detector_errors():
    with pytest.raises(SignalTooShort):
        detect_r_peaks(np.zeros(720), 360)
    bad = np.zeros(1000)
    bad[5] = np.nan
    with pytest.raises(NonFiniteInput):
        detect_r_peaks(bad, 360)


# ------------------------------------------------------ segments and labels

def test_segment_bounds():
    sig = np.arange(1000, dtype=float)
    segs, skipped = segment_beats(sig[:480], [360])
    assert len(segs) == 1 and skipped == 0
    np.testing.assert_allclose(segs[0].samples, np.arange(480) / 479, atol=1e-7)
    segs, skipped = segment_beats(sig, [100, 1000 - 120, 1000 - 119], ["N", "VEB", "N"])
    assert [s.peak_index for s in segs] == [880] and skipped == 2
    assert segs[0].label == "VEB"


@given(arrays(np.float64, 300, elements=st.floats(-5, 5)), st.lists(st.integers(-50, 400), max_size=20))
def test_segment_beats_never_reads_out_of_bounds(sig, peaks):
    sig = np.concatenate([sig, sig])  # 600 samples
    segs, skipped = segment_beats(sig, peaks)
    assert len(segs) + skipped == len(peaks)
    for s in segs:
        assert s.samples.shape == (480,) and s.samples.min() >= 0 and s.samples.max() <= 1


def test_normalize_examples():
    w = np.tile([2.0, 4.0, 6.0], 160)
    np.testing.assert_array_equal(normalize(w)[:3], [0, 0.5, 1])
    assert np.all(normalize(np.full(480, 3.0)) == 0.5)
    with pytest.raises(NonFiniteInput):
        normalize([1.0, np.inf])


@given(arrays(np.float64, 480, elements=st.floats(-5, 5)), st.floats(0.1, 10), st.floats(-10, 10))
def test_normalize_affine_invariance(x, a, b):
    assume(x.max() - x.min() > 0.1)
    y = normalize(x)
    assert y.min() == 0.0 and y.max() == 1.0
    np.testing.assert_allclose(normalize(a * x + b), y, rtol=0, atol=1e-12)


def test_map_aami():
    assert map_aami("V") == "VEB" and map_aami("L") == "N" and map_aami("+") is None
    table = {"N": "NLRej", "SVEB": "AaJS", "VEB": "VE", "F": "F", "Q": "/fQ"}
    for cls, syms in table.items():
        assert all(map_aami(s) == cls for s in syms)
    for s in "~|xs!\"[]()T*D=pBtu?^@r":
        assert map_aami(s) is None


# ------------------------------------------------------------------ splits

def test_record_lists():
    assert len(DS1_RECORDS) == len(DS2_RECORDS) == 22 and not DS1_RECORDS & DS2_RECORDS
    assert assign_mitdb("100") == "DS2" and assign_mitdb("101") == "DS1"
    assert all(assign_mitdb(r) == "excluded" for r in PACED_RECORDS)
    with pytest.raises(UnknownRecord):
        assign_mitdb("999")


def _fake_record(name, seed, symbols=("N", "V", "A", "~")):
    sig, centers = synth_ecg(SyntheticEcgConfig(duration=12, heart_rate=75, noise_sigma=0.01, seed=seed))
    spec = SignalSpec(f"{name}.dat", 212)
    header = RecordHeader(name, 1, 360.0, sig.size, (spec,))
    anns = tuple(Annotation(int(c), symbols[i % len(symbols)]) for i, c in enumerate(centers))
    return EcgRecord(header, sig[None, :], anns)


def test_build_splits_inter_patient_and_deterministic(tmp_path):
    names = ["101", "106", "100", "103", "102"]
    recs = [_fake_record(n, i) for i, n in enumerate(names)]
    extra = [_fake_record("I01", 9)]
    a = build_splits(recs, extra, seed=3)
    b = build_splits(recs, extra, seed=3)
    assert np.array_equal(a.ds1_train.samples, b.ds1_train.samples)
    assert set(a.ds1_train.records + a.ds1_val.records).isdisjoint(a.ds2_test.records)
    assert set(a.ds2_test.records) == {"100", "103"}
    assert a.assignments["102"] == "excluded"
    n_ds1 = len(a.ds1_train) + len(a.ds1_val)
    assert len(a.ds1_val) == int(np.floor(0.1 * n_ds1 + 0.5))
    assert len(a.finetune_pool()) == len(a.ds1_train) + len(a.extra_finetune)
    assert a.ds2_test.class_counts()["Q"] == 0 and a.ds2_test.is_labeled
    write_manifest(tmp_path / "m.tsv", a)
    assert "100\tDS2" in (tmp_path / "m.tsv").read_text()
    table = distribution_table([("DS2", a.ds2_test)])
    assert all(c in table for c in CLASSES)


def test_labeled_segments_drop_non_beats():
    rec = _fake_record("101", 0, symbols=("N", "~"))
    ds, _ = labeled_segments(rec)
    assert set(ds.class_counts()) == set(CLASSES)
    assert ds.class_counts()["N"] == len(ds)


def test_unlabeled_segments_from_detector():
    rec = _fake_record("x", 1)
    ds, skipped = unlabeled_segments(rec)
    assert len(ds) + skipped == 15 and not ds.is_labeled


def test_resampled_record_annotations_follow(tmp_path):
    sig, centers = synth_ecg(SyntheticEcgConfig(duration=12, heart_rate=50, fs=250))
    header = RecordHeader("I01", 1, 250.0, sig.size, (SignalSpec("I01.dat", 16),))
    rec = EcgRecord(header, sig[None, :], tuple(Annotation(int(c), "N") for c in centers))
    ds, _ = labeled_segments(rec)
    # R peak sits at window offset 360 after mapping to 360 Hz
    assert np.all(np.argmax(ds.samples, axis=1) == 360)


# ------------------------------------------------------------------- synth

def test_synth_examples():
    sig, peaks = synth_ecg(SyntheticEcgConfig(duration=10, heart_rate=60))
    assert abs(peaks.size - 10) <= 1 and np.all(np.abs(np.diff(peaks) - 360) <= 1)
    period = 360
    mid = sig[period * 2:period * 7]
    np.testing.assert_allclose(mid, sig[period * 3:period * 8], atol=0)
    a, pa = synth_ecg(SyntheticEcgConfig(noise_sigma=0.1, seed=1))
    b, pb = synth_ecg(SyntheticEcgConfig(noise_sigma=0.1, seed=2))
    assert not np.array_equal(a, b) and np.array_equal(pa, pb)
    for bad in (dict(duration=0), dict(heart_rate=20), dict(noise_sigma=-1)):
        with pytest.raises(InvalidConfig):
            synth_ecg(SyntheticEcgConfig(**bad))


def test_toy_segments_deterministic():
    a, b = toy_segments(20, seed=4), toy_segments(20, seed=4)
    assert np.array_equal(a.samples, b.samples) and np.array_equal(a.labels, b.labels)
    assert set(a.class_counts()) == set(CLASSES) and a.is_labeled
    assert not toy_segments(5, seed=1, labeled=False).is_labeled


# -------------------------------------------------------------------- ECGB

def test_ecgb_round_trip_and_errors(tmp_path):
    ds = SegmentDataset.concat(toy_segments(7, seed=2), toy_segments(3, seed=3, labeled=False))
    p = tmp_path / "d.ecgb"
    write_segments(p, ds)
    back = read_segments(p)
    assert np.array_equal(back.samples, ds.samples) and np.array_equal(back.labels, ds.labels)
    assert back.records == ds.records and np.array_equal(back.peaks, ds.peaks)
    raw = p.read_bytes()
    (tmp_path / "t.ecgb").write_bytes(raw[:-5])
    with pytest.raises(CorruptFile):
        read_segments(tmp_path / "t.ecgb")
    (tmp_path / "m.ecgb").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(CorruptFile):
        read_segments(tmp_path / "m.ecgb")
    (tmp_path / "v.ecgb").write_bytes(raw[:4] + (9).to_bytes(4, "little") + raw[8:])
    with pytest.raises(VersionMismatch):
        read_segments(tmp_path / "v.ecgb")
