"""File formats: EVT1 event streams, EVRP channel tensors, ECAM camera
models, text event lists, binary PGM frames and frame manifests.

All binary containers share the same framing: 4 magic bytes, a
little-endian payload, and a trailing CRC32 of everything between the
magic and the checksum.  Total file length is also validated so that any
single corrupted byte is caught either by length, magic or CRC.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .stream import EventStream, Frame, StreamError

EVT1_MAGIC = b"EVT1"
EVRP_MAGIC = b"EVRP"
ECAM_MAGIC = b"ECAM"

_EVENT_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")])


class FormatError(ValueError):
    """Malformed or corrupted file contents."""


def _frame_container(magic: bytes, payload: bytes) -> bytes:
    return magic + payload + struct.pack("<I", zlib.crc32(payload))


def _open_container(magic: bytes, blob: bytes) -> bytes:
    if len(blob) < len(magic) + 4:
        raise FormatError("truncated file")
    if blob[:4] != magic:
        raise FormatError(f"bad magic {blob[:4]!r}, expected {magic!r}")
    payload, crc = blob[4:-4], struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(payload) != crc:
        raise FormatError("checksum mismatch")
    return payload


# ---------------------------------------------------------------- events

def write_binary_events(stream: EventStream) -> bytes:
    rec = np.empty(len(stream), _EVENT_DTYPE)
    rec["t"] = stream.t
    rec["x"] = stream.x
    rec["y"] = stream.y
    rec["p"] = stream.p
    header = struct.pack("<HHQQQ", stream.width, stream.height,
                         stream.t_start, stream.t_end, len(stream))
    return _frame_container(EVT1_MAGIC, header + rec.tobytes())


def parse_binary_events(blob: bytes) -> EventStream:
    payload = _open_container(EVT1_MAGIC, blob)
    if len(payload) < 28:
        raise FormatError("truncated header")
    width, height, t_start, t_end, n = struct.unpack("<HHQQQ", payload[:28])
    body = payload[28:]
    if len(body) != n * _EVENT_DTYPE.itemsize:
        raise FormatError(f"payload length mismatch for {n} events")
    rec = np.frombuffer(body, _EVENT_DTYPE)
    try:
        return EventStream(width, height, rec["t"].astype(np.int64),
                           rec["x"].astype(np.int32), rec["y"].astype(np.int32),
                           rec["p"].astype(np.int8), t_start, t_end)
    except StreamError as e:
        raise FormatError(f"invalid stream contents: {e}") from e


def parse_text_events(source: bytes | str, width: int, height: int,
                      zero_polarity: str = "negative") -> EventStream:
    """Parse "t x y p" lines; p=0 reads as -1 unless zero_polarity="error"."""
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    ts, xs, ys, ps = [], [], [], []
    for lineno, line in enumerate(source.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise FormatError(f"line {lineno}: expected 4 fields, got {len(parts)}")
        try:
            t, x, y, p = (int(v) for v in parts)
        except ValueError:
            raise FormatError(f"line {lineno}: non-integer field") from None
        if t < 0:
            raise FormatError(f"line {lineno}: negative timestamp {t}")
        if not (0 <= x < width and 0 <= y < height):
            raise FormatError(f"line {lineno}: coordinate ({x},{y}) out of "
                              f"bounds for {width}x{height}")
        if p == 0:
            if zero_polarity == "error":
                raise FormatError(f"line {lineno}: zero polarity rejected")
            p = -1
        if p not in (-1, 1):
            raise FormatError(f"line {lineno}: polarity must be -1, 0 or 1")
        ts.append(t); xs.append(x); ys.append(y); ps.append(p)
    return EventStream.from_arrays(width, height, ts, xs, ys, ps, sort=True)


# --------------------------------------------------------------- tensors

def write_channels(channels: list[np.ndarray]) -> bytes:
    """Serialize 2-D float channels to the EVRP container (32-bit floats)."""
    if not channels:
        raise FormatError("at least one channel required")
    h, w = channels[0].shape
    for c in channels:
        if c.shape != (h, w):
            raise FormatError("channel dimensions disagree")
    header = struct.pack("<HHH", w, h, len(channels))
    body = b"".join(np.asarray(c, "<f4").tobytes() for c in channels)
    return _frame_container(EVRP_MAGIC, header + body)


def parse_channels(blob: bytes) -> list[np.ndarray]:
    payload = _open_container(EVRP_MAGIC, blob)
    if len(payload) < 6:
        raise FormatError("truncated header")
    w, h, nch = struct.unpack("<HHH", payload[:6])
    body = payload[6:]
    if len(body) != 4 * w * h * nch:
        raise FormatError("payload length mismatch")
    flat = np.frombuffer(body, "<f4")
    return [flat[i * w * h:(i + 1) * w * h].reshape(h, w).copy()
            for i in range(nch)]


# ----------------------------------------------------------- camera model

def write_camera_model(theta: np.ndarray, k: float) -> bytes:
    h, w = theta.shape
    header = struct.pack("<HHd", w, h, float(k))
    return _frame_container(ECAM_MAGIC, header + np.asarray(theta, "<f4").tobytes())


def parse_camera_model(blob: bytes) -> tuple[np.ndarray, float]:
    payload = _open_container(ECAM_MAGIC, blob)
    if len(payload) < 12:
        raise FormatError("truncated header")
    w, h, k = struct.unpack("<HHd", payload[:12])
    body = payload[12:]
    if len(body) != 4 * w * h:
        raise FormatError("payload length mismatch")
    theta = np.frombuffer(body, "<f4").reshape(h, w).astype(np.float64)
    if k < 0 or np.any(theta < 0):
        raise FormatError("camera model requires non-negative parameters")
    return theta, float(k)


# ------------------------------------------------------------------ PGM

def write_pgm(frame: Frame) -> bytes:
    """8-bit binary PGM; values quantized by rounding to v*255."""
    pixels = np.rint(frame.values * 255.0).astype(np.uint8)
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode()
    return header + pixels.tobytes()


def parse_pgm(blob: bytes, t: int = 0) -> Frame:
    if not blob.startswith(b"P5"):
        raise FormatError("not a binary PGM (P5) file")
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # comments allowed, single whitespace byte before raster
    tokens, pos = [], 2
    while len(tokens) < 3:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            eol = blob.find(b"\n", pos)
            pos = len(blob) if eol < 0 else eol + 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        tokens.append(blob[start:pos])
    pos += 1  # single whitespace separating header from raster
    try:
        w, h, maxval = (int(v) for v in tokens)
    except ValueError:
        raise FormatError("malformed PGM header") from None
    if maxval != 255:
        raise FormatError(f"only 8-bit PGM supported, maxval={maxval}")
    raster = blob[pos:pos + w * h]
    if len(raster) != w * h:
        raise FormatError("truncated PGM raster")
    values = np.frombuffer(raster, np.uint8).reshape(h, w) / 255.0
    return Frame(values, t)


# -------------------------------------------------------------- manifests

def parse_frame_manifest(text: str, base_dir: Path) -> list[tuple[Path, int]]:
    """Lines "filename t_microseconds", paths relative to the manifest."""
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"manifest line {lineno}: expected 'filename t'")
        try:
            t = int(parts[1])
        except ValueError:
            raise FormatError(f"manifest line {lineno}: bad timestamp") from None
        if t < 0:
            raise FormatError(f"manifest line {lineno}: negative timestamp")
        out.append((base_dir / parts[0], t))
    return out


def load_frame_sequence(manifest_path: Path) -> list[Frame]:
    manifest_path = Path(manifest_path)
    entries = parse_frame_manifest(manifest_path.read_text(),
                                   manifest_path.parent)
    frames = []
    for path, t in entries:
        try:
            blob = path.read_bytes()
        except OSError as e:
            raise FormatError(f"cannot read frame {path}: {e}") from e
        frames.append(parse_pgm(blob, t))
    return frames
