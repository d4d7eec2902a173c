"""EEG file formats: the binary ``.eegb`` container and CSV import.

``.eegb`` layout, little endian::

    b"EEGB" | u32 version | u32 channels | u32 samples | f64 sample_rate
    f32 data, row-major [samples x channels]
"""

from __future__ import annotations

import csv
import struct

import numpy as np

from ..errors import DataError
from .recording import EegRecording

MAGIC = b"EEGB"
VERSION = 1
_HEADER = struct.Struct("<4sIIId")


def write_eegb(path, recording: EegRecording):
    data = np.ascontiguousarray(recording.samples, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, recording.channels, recording.n_samples,
                              float(recording.sample_rate)))
        fh.write(data.tobytes())


def read_eegb(path) -> EegRecording:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise DataError(f"{path}: file too short for an EEGB header")
    magic, version, channels, samples, rate = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise DataError(f"{path}: unsupported EEGB version {version}")
    expected = _HEADER.size + 4 * channels * samples
    if len(blob) != expected:
        raise DataError(f"{path}: expected {expected} bytes, found {len(blob)}")
    data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(samples, channels)
    return EegRecording(rate, data.astype(np.float32))


def read_csv(path, channels: int = 16) -> EegRecording:
    """Import ``time,ch0,...,ch15`` rows; the rate comes from the median time step."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["time"] + [f"ch{i}" for i in range(channels)]
        if header is None or [h.strip() for h in header] != expected:
            raise DataError(f"{path}: header must be {','.join(expected)}")
        try:
            rows = np.array([[float(v) for v in row] for row in reader if row], dtype=np.float64)
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from exc
    if rows.shape[0] < 2:
        raise DataError(f"{path}: need at least two samples")
    dt = np.median(np.diff(rows[:, 0]))
    if not dt > 0:
        raise DataError(f"{path}: time column must increase")
    return EegRecording(float(1.0 / dt), rows[:, 1:].astype(np.float32), start_time=float(rows[0, 0]))


def write_csv(path, recording: EegRecording):
    t = recording.start_time + np.arange(recording.n_samples) / recording.sample_rate
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time"] + [f"ch{i}" for i in range(recording.channels)])
        for ti, row in zip(t, recording.samples):
            w.writerow([repr(float(ti))] + [repr(float(v)) for v in row])
