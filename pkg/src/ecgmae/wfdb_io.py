"""Reader (and fixture writer) for single-segment WFDB records.

Supports header files, signal formats 212 and 16, and MIT-format
annotation files.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    InvalidGain,
    LengthMismatch,
    MalformedAnnotation,
    MalformedHeader,
    TruncatedData,
    UnsupportedFormat,
)

SUPPORTED_FORMATS = (212, 16)
DEFAULT_GAIN = 200.0

# MIT annotation codes (0..41); unlisted codes decode to "?<code>"
ANN_SYMBOLS = {
    0: " ", 1: "N", 2: "L", 3: "R", 4: "a", 5: "V", 6: "F", 7: "J", 8: "A", 9: "S",
    10: "E", 11: "j", 12: "/", 13: "Q", 14: "~", 16: "|", 18: "s", 19: "T", 20: "*",
    21: "D", 22: '"', 23: "=", 24: "p", 25: "B", 26: "^", 27: "t", 28: "+", 29: "u",
    30: "?", 31: "!", 32: "[", 33: "]", 34: "e", 35: "n", 36: "@", 37: "x", 38: "f",
    39: "(", 40: ")", 41: "r",
}
SYMBOL_CODES = {s: c for c, s in ANN_SYMBOLS.items()}

SKIP, NUM, SUB, CHN, AUX = 59, 60, 61, 62, 63


@dataclass(frozen=True)
class SignalSpec:
    file_name: str
    format_code: int
    gain: float = DEFAULT_GAIN
    baseline: int = 0
    units: str = "mV"
    adc_resolution: int = 0
    adc_zero: int = 0
    initial_value: int = 0
    lead_name: str = ""


@dataclass(frozen=True)
class RecordHeader:
    record_name: str
    n_signals: int
    sampling_frequency: float
    n_samples: int
    signals: tuple[SignalSpec, ...] = ()


@dataclass(frozen=True)
class Annotation:
    sample_index: int
    symbol: str
    aux: str | None = None
    subtype: int = 0
    chan: int = 0
    num: int = 0


@dataclass(frozen=True)
class EcgRecord:
    header: RecordHeader
    signals: np.ndarray  # (n_signals, n_samples), float64 mV
    annotations: tuple[Annotation, ...] = field(default=())

    @property
    def name(self) -> str:
        return self.header.record_name

    @property
    def fs(self) -> float:
        return self.header.sampling_frequency


def _int(token: str, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise MalformedHeader(f"{what} is not an integer: {token!r}") from None


def _parse_frequency(token: str) -> float:
    # "360", "360/1", "360(0)" -> base frequency before any counter fields
    head = token.split("/")[0].split("(")[0]
    try:
        fs = float(head)
    except ValueError:
        raise MalformedHeader(f"sampling frequency is not numeric: {token!r}") from None
    if not fs > 0:
        raise MalformedHeader(f"sampling frequency must be positive, got {fs}")
    return fs


def _parse_signal_line(line: str) -> SignalSpec:
    tok = line.split()
    if len(tok) < 2:
        raise MalformedHeader(f"signal line needs file name and format: {line!r}")
    fmt_tok = tok[1]
    fmt_digits = ""
    for ch in fmt_tok:
        if not ch.isdigit():
            break
        fmt_digits += ch
    if not fmt_digits:
        raise MalformedHeader(f"bad format field {fmt_tok!r}")
    fmt = int(fmt_digits)
    if fmt not in SUPPORTED_FORMATS:
        raise UnsupportedFormat(f"signal format {fmt} not supported (only {SUPPORTED_FORMATS})")
    if len(fmt_tok) > len(fmt_digits):
        rest = fmt_tok[len(fmt_digits):]
        # skew ("x..") and byte offset (":..") would shift sample alignment
        if any(c in rest for c in "x:+"):
            raise UnsupportedFormat(f"format modifiers not supported: {fmt_tok!r}")

    gain, baseline, units = DEFAULT_GAIN, None, "mV"
    if len(tok) > 2:
        g = tok[2]
        if "/" in g:
            g, units = g.split("/", 1)
        if "(" in g:
            g, b = g.split("(", 1)
            baseline = _int(b.rstrip(")"), "baseline")
        try:
            gain = float(g)
        except ValueError:
            raise MalformedHeader(f"gain is not numeric: {tok[2]!r}") from None
        if gain == 0:
            gain = DEFAULT_GAIN  # 0 means "uncalibrated" in WFDB
    adc_res = _int(tok[3], "ADC resolution") if len(tok) > 3 else 0
    adc_zero = _int(tok[4], "ADC zero") if len(tok) > 4 else 0
    init = _int(tok[5], "initial value") if len(tok) > 5 else 0
    desc = " ".join(tok[8:]) if len(tok) > 8 else ""
    if baseline is None:
        baseline = adc_zero
    return SignalSpec(tok[0], fmt, gain, baseline, units, adc_res, adc_zero, init, desc)


def parse_header(text: str) -> RecordHeader:
    """Parse the text of a ``.hea`` file."""
    if not text or not text.strip():
        raise MalformedHeader("empty header")
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise MalformedHeader("header has no record line")
    rec = lines[0].split("#")[0].split()
    if len(rec) < 4:
        raise MalformedHeader(f"record line needs name, n_signals, fs, n_samples: {lines[0]!r}")
    name = rec[0]
    if "/" in name:
        raise MalformedHeader("multi-segment records are not supported")
    n_sig = _int(rec[1], "signal count")
    if n_sig < 1:
        raise MalformedHeader("record must declare at least one signal")
    fs = _parse_frequency(rec[2])
    n_samples = _int(rec[3], "sample count")
    if n_samples < 0:
        raise MalformedHeader("negative sample count")
    sig_lines = lines[1:1 + n_sig]
    if len(sig_lines) < n_sig:
        raise MalformedHeader(f"expected {n_sig} signal lines, found {len(sig_lines)}")
    signals = tuple(_parse_signal_line(ln) for ln in sig_lines)
    return RecordHeader(name, n_sig, fs, n_samples, signals)


def decode_format212(data: bytes, n_samples_total: int) -> np.ndarray:
    """Unpack 12-bit two's-complement samples, two per three bytes."""
    need = math.ceil(3 * n_samples_total / 2)
    if len(data) < need:
        raise TruncatedData(f"format 212 needs {need} bytes for {n_samples_total} samples, got {len(data)}")
    n_groups = (n_samples_total + 1) // 2
    raw = np.frombuffer(bytes(data[:3 * n_groups]).ljust(3 * n_groups, b"\0"), dtype=np.uint8)
    raw = raw.reshape(-1, 3).astype(np.int32)
    out = np.empty((n_groups, 2), dtype=np.int32)
    out[:, 0] = ((raw[:, 1] & 0x0F) << 8) | raw[:, 0]
    out[:, 1] = ((raw[:, 1] & 0xF0) << 4) | raw[:, 2]
    out[out >= 0x800] -= 0x1000
    return out.reshape(-1)[:n_samples_total].astype(np.int64)


def encode_format212(values) -> bytes:
    """Inverse of :func:`decode_format212` (odd counts are zero-padded)."""
    v = np.asarray(values, dtype=np.int64)
    if v.size and (v.min() < -2048 or v.max() > 2047):
        raise ValueError("format 212 holds values in [-2048, 2047]")
    if v.size % 2:
        v = np.append(v, 0)
    u = (v & 0xFFF).reshape(-1, 2)
    out = np.empty((u.shape[0], 3), dtype=np.uint8)
    out[:, 0] = u[:, 0] & 0xFF
    out[:, 1] = ((u[:, 0] >> 8) & 0x0F) | ((u[:, 1] >> 4) & 0xF0)
    out[:, 2] = u[:, 1] & 0xFF
    return out.tobytes()


def decode_format16(data: bytes) -> np.ndarray:
    """Little-endian signed 16-bit samples."""
    if len(data) % 2:
        raise TruncatedData("format 16 data has an odd number of bytes")
    return np.frombuffer(bytes(data), dtype="<i2").astype(np.int64)


def encode_format16(values) -> bytes:
    return np.asarray(values, dtype="<i2").tobytes()


def adc_to_physical(adc, gain: float, baseline: int):
    """(adc - baseline) / gain, elementwise for arrays."""
    if not gain > 0:
        raise InvalidGain(f"gain must be positive, got {gain}")
    if np.ndim(adc):
        return (np.asarray(adc, dtype=np.float64) - baseline) / gain
    return (adc - baseline) / gain


def parse_annotations(data: bytes) -> list[Annotation]:
    """Decode an MIT-format annotation byte stream."""
    buf = bytes(data)
    n = len(buf)
    out: list[Annotation] = []
    t = 0
    pending_skip = 0
    chan = num = 0
    i = 0
    while i + 1 < n:
        word = buf[i] | (buf[i + 1] << 8)
        code, operand = word >> 10, word & 0x3FF
        i += 2
        if code == 0 and operand == 0:
            break
        if code == SKIP:
            if i + 4 > n:
                raise MalformedAnnotation("SKIP without its 32-bit operand")
            hi = buf[i] | (buf[i + 1] << 8)
            lo = buf[i + 2] | (buf[i + 3] << 8)
            val = (hi << 16) | lo
            if val >= 1 << 31:
                val -= 1 << 32
            pending_skip += val
            i += 4
        elif code == NUM:
            num = operand if operand < 512 else operand - 1024
            if out:
                out[-1] = replace(out[-1], num=num)
        elif code == SUB:
            if out:
                out[-1] = replace(out[-1], subtype=operand)
        elif code == CHN:
            chan = operand
            if out:
                out[-1] = replace(out[-1], chan=chan)
        elif code == AUX:
            length = operand
            if i + length > n:
                raise MalformedAnnotation(f"AUX length {length} exceeds remaining {n - i} bytes")
            text = buf[i:i + length].decode("latin-1").rstrip("\0")
            i += length + (length & 1)
            if out:
                out[-1] = replace(out[-1], aux=text)
        else:
            t += pending_skip + operand
            pending_skip = 0
            out.append(Annotation(t, ANN_SYMBOLS.get(code, f"?{code}"), chan=chan, num=num))
    if pending_skip:
        raise MalformedAnnotation("dangling SKIP at end of stream")
    return out


def encode_annotations(annotations) -> bytes:
    """Fixture writer: (sample_index, symbol[, aux]) tuples or Annotations -> bytes."""
    out = bytearray()
    prev = 0
    for a in annotations:
        if isinstance(a, Annotation):
            sample, symbol, aux = a.sample_index, a.symbol, a.aux
        else:
            sample, symbol, aux = (tuple(a) + (None,))[:3]
        code = SYMBOL_CODES[symbol]
        diff = int(sample) - prev
        if diff < 0 or diff > 1023:
            hi, lo = (diff >> 16) & 0xFFFF, diff & 0xFFFF
            out += (SKIP << 10).to_bytes(2, "little") + hi.to_bytes(2, "little") + lo.to_bytes(2, "little")
            diff = 0
        out += ((code << 10) | diff).to_bytes(2, "little")
        if aux:
            raw = aux.encode("latin-1")
            out += ((AUX << 10) | len(raw)).to_bytes(2, "little") + raw + (b"\0" if len(raw) % 2 else b"")
        prev = int(sample)
    out += b"\0\0"
    return bytes(out)


def _decode_signal_file(data: bytes, fmt: int, n_samples_total: int) -> np.ndarray:
    if fmt == 212:
        return decode_format212(data, n_samples_total)
    if fmt == 16:
        vals = decode_format16(data[:2 * n_samples_total] if len(data) >= 2 * n_samples_total else data)
        return vals
    raise UnsupportedFormat(f"signal format {fmt} not supported")


def _decoded_count(data: bytes, fmt: int) -> int:
    if fmt == 212:
        return (len(data) // 3) * 2 + (1 if len(data) % 3 == 2 else 0)
    return len(data) // 2


def load_record(signal_path, header_path, annotation_path=None) -> EcgRecord:
    """Read a record's signal, header and (optionally) annotation files.

    ``signal_path`` may be a single path or a mapping from header file
    names to paths for records whose signals live in several files.
    """
    with open(header_path, "r", encoding="latin-1") as fh:
        header = parse_header(fh.read())

    groups: dict[str, list[int]] = {}
    for idx, spec in enumerate(header.signals):
        groups.setdefault(spec.file_name, []).append(idx)
    if isinstance(signal_path, (str, os.PathLike)):
        if len(groups) > 1:
            base = os.path.dirname(os.fspath(signal_path))
            paths = {fn: os.path.join(base, fn) for fn in groups}
        else:
            paths = {next(iter(groups)): signal_path}
    else:
        paths = dict(signal_path)

    signals = np.empty((header.n_signals, header.n_samples), dtype=np.float64)
    for fname, idxs in groups.items():
        fmts = {header.signals[i].format_code for i in idxs}
        if len(fmts) != 1:
            raise UnsupportedFormat(f"mixed formats within {fname}")
        fmt = fmts.pop()
        with open(paths[fname], "rb") as fh:
            data = fh.read()
        want = header.n_samples * len(idxs)
        have = _decoded_count(data, fmt)
        if have < want or (fmt == 16 and have > want) or (fmt == 212 and have > want + 1):
            raise LengthMismatch(
                f"{fname}: header declares {header.n_samples} samples x {len(idxs)} signals, "
                f"file holds {have} values")
        adc = _decode_signal_file(data, fmt, want).reshape(header.n_samples, len(idxs))
        for col, i in enumerate(idxs):
            spec = header.signals[i]
            signals[i] = adc_to_physical(adc[:, col], spec.gain, spec.baseline)

    annotations: tuple[Annotation, ...] = ()
    if annotation_path is not None:
        with open(annotation_path, "rb") as fh:
            anns = parse_annotations(fh.read())
        bad = [a.sample_index for a in anns if a.sample_index >= header.n_samples or a.sample_index < 0]
        if bad:
            raise MalformedAnnotation(f"annotation index {bad[0]} outside record of {header.n_samples} samples")
        annotations = tuple(anns)
    return EcgRecord(header, signals, annotations)


def load_record_dir(directory, name: str, annotator: str = "atr") -> EcgRecord:
    """Load ``<dir>/<name>.hea`` with its signal and (if present) annotation file."""
    hea = os.path.join(directory, f"{name}.hea")
    with open(hea, "r", encoding="latin-1") as fh:
        header = parse_header(fh.read())
    files = {s.file_name: os.path.join(directory, s.file_name) for s in header.signals}
    ann = os.path.join(directory, f"{name}.{annotator}")
    return load_record(files, hea, ann if os.path.exists(ann) else None)


def list_records(directory) -> list[str]:
    """Record names with a ``.hea`` file in ``directory``, sorted."""
    return sorted(f[:-4] for f in os.listdir(directory) if f.endswith(".hea"))


def write_record(directory, name: str, adc: np.ndarray, fs: float, fmt: int = 212,
                 gain: float = DEFAULT_GAIN, baseline: int = 0, lead_names=None,
                 annotations=None) -> None:
    """Fixture writer: ``adc`` is (n_signals, n_samples) integer samples."""
    adc = np.atleast_2d(np.asarray(adc, dtype=np.int64))
    n_sig, n = adc.shape
    if fmt not in SUPPORTED_FORMATS:
        raise UnsupportedFormat(f"signal format {fmt} not supported")
    lead_names = lead_names or [f"lead{i}" for i in range(n_sig)]
    interleaved = adc.T.reshape(-1)
    payload = encode_format212(interleaved) if fmt == 212 else encode_format16(interleaved)
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, f"{name}.dat"), "wb") as fh:
        fh.write(payload)
    fs_txt = f"{fs:g}"
    lines = [f"{name} {n_sig} {fs_txt} {n}"]
    res = 12 if fmt == 212 else 16
    for i in range(n_sig):
        init = int(adc[i, 0]) if n else 0
        lines.append(f"{name}.dat {fmt} {gain:g}({baseline})/mV {res} {baseline} {init} 0 0 {lead_names[i]}")
    with open(os.path.join(directory, f"{name}.hea"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    if annotations is not None:
        with open(os.path.join(directory, f"{name}.atr"), "wb") as fh:
            fh.write(encode_annotations(annotations))
