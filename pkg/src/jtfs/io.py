"""WAV ingestion, feature archives and key-value config files."""
from __future__ import annotations

import hashlib
import json
import math
import os
import struct
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .engine import Signal
from .scattering import ScatteringOutput

ARCHIVE_MAGIC = b"JTFSFEAT"
ARCHIVE_VERSION = 1

# Exit codes shared with the command line.
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_UNSUPPORTED = 3
EXIT_MALFORMED = 4
EXIT_IO = 5
EXIT_NUMERIC = 6
EXIT_CHECKPOINT = 7


class IngestError(Exception):
    """WAV decoding failure with an exit code."""

    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class ArchiveError(Exception):
    """Unreadable or inconsistent feature archive."""


# ---------------------------------------------------------------------------
# WAV


def _scan_wav_header(raw: bytes) -> tuple[int, int, int, int]:
    """Return ``(format_tag, channels, bits, data_bytes)`` after checking the
    RIFF structure against the file size."""
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise IngestError("not a RIFF/WAVE file", EXIT_MALFORMED)
    pos = 12
    fmt = None
    while pos + 8 <= len(raw):
        cid = raw[pos : pos + 4]
        size = struct.unpack("<I", raw[pos + 4 : pos + 8])[0]
        body = pos + 8
        if cid == b"fmt ":
            if size < 16 or body + size > len(raw):
                raise IngestError("truncated fmt chunk", EXIT_MALFORMED)
            tag, channels, _, _, _, bits = struct.unpack("<HHIIHH", raw[body : body + 16])
            if tag == 0xFFFE and size >= 40:
                tag = struct.unpack("<H", raw[body + 24 : body + 26])[0]
            fmt = (tag, channels, bits)
        elif cid == b"data":
            if fmt is None:
                raise IngestError("data chunk before fmt chunk", EXIT_MALFORMED)
            if body + size > len(raw):
                raise IngestError(
                    f"data chunk declares {size} bytes but only {len(raw) - body} remain", EXIT_MALFORMED
                )
            return fmt + (size,)
        pos = body + size + (size & 1)
    raise IngestError("missing fmt or data chunk", EXIT_MALFORMED)


def ingest_wav(path: str) -> Signal:
    """Read 16-bit PCM or 32-bit float WAV, scaled to [-1, 1] and averaged
    across channels."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}", EXIT_IO) from exc
    tag, channels, bits, _ = _scan_wav_header(raw)
    if not ((tag == 1 and bits == 16) or (tag == 3 and bits == 32)):
        raise IngestError(f"unsupported encoding (format tag {tag}, {bits} bits)", EXIT_UNSUPPORTED)
    if channels < 1:
        raise IngestError("zero channels", EXIT_MALFORMED)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            rate, data = wavfile.read(path)
    except (ValueError, Warning) as exc:
        raise IngestError(f"malformed WAV: {exc}", EXIT_MALFORMED) from exc
    data = np.asarray(data)
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    else:
        samples = data.astype(np.float64)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if samples.size < 2:
        raise IngestError("fewer than two samples", EXIT_MALFORMED)
    if not np.all(np.isfinite(samples)):
        raise IngestError("non-finite samples", EXIT_MALFORMED)
    return Signal(samples, float(rate))


def write_wav(path: str, samples: np.ndarray, sample_rate: float, pcm16: bool = False) -> None:
    samples = np.asarray(samples, dtype=np.float64)
    if pcm16:
        data = np.clip(np.round(samples * 32768.0), -32768, 32767).astype(np.int16)
    else:
        data = samples.astype(np.float32)
    wavfile.write(path, int(round(sample_rate)), data)


# ---------------------------------------------------------------------------
# Feature archives


def _label(path: tuple) -> dict:
    kind = path[0]
    out = {"order": 1 if kind == "s1" else 2, "kind": kind, "lambda": int(path[1])}
    if kind == "s1":
        if len(path) > 2:
            out["fr"] = int(path[2])
        return out
    out["mu"] = int(path[2])
    if kind == "joint":
        ell = path[3]
        out["ell"] = None if not math.isfinite(ell) else ell
        out["spin"] = int(path[4])
    elif len(path) > 3:
        out["fr"] = int(path[3])
    return out


def _jsonable(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


@dataclass
class FeatureArchive:
    header: dict
    tensor: np.ndarray  # float32 [frame, path]


def build_archive(out: ScatteringOutput, extra: dict | None = None) -> FeatureArchive:
    tensor = out.flat().astype("<f4")
    labels = [_label(p) for p in out.paths()]
    header = {
        "format": "jtfs-features",
        "format_version": ARCHIVE_VERSION,
        "axes": [{"name": "frame", "size": int(tensor.shape[0])}, {"name": "path", "size": int(tensor.shape[1])}],
        "dtype": "float32-le",
        "index_map": labels,
        "meta": _jsonable(out.meta),
        "fr_rows": _jsonable([list(r) for r in out.fr_rows]),
    }
    if extra:
        header["creation"] = _jsonable(extra)
    return FeatureArchive(header, tensor)


def write_archive(path: str, archive: FeatureArchive) -> None:
    """Magic, 8-byte little-endian header length, JSON header, float32 payload.

    Written to a temporary file and renamed so failures leave nothing behind.
    """
    blob = json.dumps(archive.header, sort_keys=True, allow_nan=False).encode()
    tmp = path + ".partial"
    try:
        with open(tmp, "wb") as fh:
            fh.write(ARCHIVE_MAGIC)
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            fh.write(np.ascontiguousarray(archive.tensor, dtype="<f4").tobytes())
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def read_archive(path: str) -> FeatureArchive:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ArchiveError(str(exc)) from exc
    if raw[:8] != ARCHIVE_MAGIC or len(raw) < 16:
        raise ArchiveError("not a feature archive")
    hlen = struct.unpack("<Q", raw[8:16])[0]
    try:
        header = json.loads(raw[16 : 16 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveError(f"bad header: {exc}") from exc
    if header.get("format_version") != ARCHIVE_VERSION:
        raise ArchiveError(f"unsupported format version {header.get('format_version')}")
    sizes = [ax["size"] for ax in header["axes"]]
    payload = raw[16 + hlen :]
    if len(payload) != 4 * int(np.prod(sizes)):
        raise ArchiveError(f"payload has {len(payload)} bytes, header implies {4 * int(np.prod(sizes))}")
    if len(header["index_map"]) != sizes[1]:
        raise ArchiveError("index map does not match the path axis")
    tensor = np.frombuffer(payload, "<f4").reshape(sizes).copy()
    return FeatureArchive(header, tensor)


def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Config files


def read_config_file(path: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; keys are flag names
    without leading dashes (e.g. ``T-ms = 32``)."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.lstrip("-")] = value
    return out
