"""On-disk formats: a small binary container for symbol matrices, CSV for
eyeballing, and JSON for ground-truth records.

Binary layout (little-endian): magic ``DBMX``, version u32, rows u64,
cols u64, alphabet size u32, then row-major uint8 symbols.  Alphabets are
limited to 256 symbols.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .model import GroundTruth, Labeling, RepetitionPattern

MAGIC = b"DBMX"
VERSION = 1
_HEADER = struct.Struct("<4sIQQI")


def save_matrix(path: str | Path, entries: np.ndarray, alphabet_size: int) -> None:
    entries = np.asarray(entries)
    if entries.ndim != 2:
        raise ValidationError("only 2-d symbol matrices are serializable")
    if alphabet_size < 1 or alphabet_size > 256:
        raise ValidationError("alphabet size must be in 1..256")
    if entries.size and (entries.min() < 0 or entries.max() >= alphabet_size):
        raise ValidationError("entries outside the declared alphabet")
    header = _HEADER.pack(MAGIC, VERSION, entries.shape[0], entries.shape[1], alphabet_size)
    Path(path).write_bytes(header + np.ascontiguousarray(entries, dtype=np.uint8).tobytes())


def load_matrix(path: str | Path) -> tuple[np.ndarray, int]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValidationError("truncated database file")
    magic, version, rows, cols, alphabet = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValidationError("bad magic; not a dbmatch database file")
    if version != VERSION:
        raise ValidationError(f"unsupported version {version}")
    body = np.frombuffer(raw, dtype=np.uint8, offset=_HEADER.size)
    if body.size != rows * cols:
        raise ValidationError("body size inconsistent with header")
    entries = body.reshape(rows, cols)
    if entries.size and entries.max() >= alphabet:
        raise ValidationError("entries outside the declared alphabet")
    return entries.copy(), int(alphabet)


def save_matrix_csv(path: str | Path, entries: np.ndarray) -> None:
    np.savetxt(path, np.asarray(entries, dtype=np.int64), fmt="%d", delimiter=",")


def ground_truth_to_json(truth: GroundTruth) -> dict:
    return {
        "pattern": [int(c) for c in truth.pattern.counts],
        "labeling": [int(v) for v in truth.labeling.perm],
    }


def save_ground_truth(path: str | Path, truth: GroundTruth) -> None:
    Path(path).write_text(json.dumps(ground_truth_to_json(truth), indent=2) + "\n")


def load_ground_truth(path: str | Path) -> GroundTruth:
    data = json.loads(Path(path).read_text())
    return GroundTruth(
        pattern=RepetitionPattern(np.asarray(data["pattern"], dtype=np.int64)),
        labeling=Labeling(np.asarray(data["labeling"], dtype=np.int64)),
    )
