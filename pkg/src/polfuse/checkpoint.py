"""Binary checkpoint format for model state.

Layout (all integers little-endian):

    magic  b"MLSN"
    u32    format version (currently 1)
    u32    config text length, then that many UTF-8 bytes
    u32    entry count
    per entry:
        u16    name length, then that many UTF-8 bytes
        u8     rank
        u32*r  extents
        f32*n  row-major values
    u64-sized trailer: blake2b-8 digest of everything before it

Values are stored as 32-bit floats; loading widens to the active default
dtype, so save -> load -> save is byte-identical.
"""

import hashlib
import os
import struct

import numpy as np

from .errors import ChecksumError, DataError

MAGIC = b"MLSN"
VERSION = 1
_DIGEST_SIZE = 8


def _digest(payload):
    return hashlib.blake2b(payload, digest_size=_DIGEST_SIZE).digest()


def serialize_state(entries, config_text=""):
    """Pack (name, array) pairs plus a config snapshot into checkpoint bytes."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    cfg = config_text.encode("utf-8")
    out += struct.pack("<I", len(cfg))
    out += cfg
    out += struct.pack("<I", len(entries))
    for name, arr in entries:
        arr = np.ascontiguousarray(arr)
        name_bytes = name.encode("utf-8")
        if len(name_bytes) > 0xFFFF:
            raise DataError("entry name too long: %r" % name[:40])
        if arr.ndim > 0xFF:
            raise DataError("entry rank too large: %d" % arr.ndim)
        out += struct.pack("<H", len(name_bytes))
        out += name_bytes
        out += struct.pack("<B", arr.ndim)
        for extent in arr.shape:
            out += struct.pack("<I", extent)
        out += arr.astype("<f4", copy=False).tobytes(order="C")
    out += _digest(bytes(out))
    return bytes(out)


class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.blob):
            raise DataError("checkpoint truncated")
        piece = self.blob[self.pos : self.pos + n]
        self.pos += n
        return piece

    def u8(self):
        return struct.unpack("<B", self.take(1))[0]

    def u16(self):
        return struct.unpack("<H", self.take(2))[0]

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]


def deserialize_state(blob):
    """Unpack checkpoint bytes -> (config_text, ordered {name: float32 array})."""
    if len(blob) < len(MAGIC) + 4 + _DIGEST_SIZE:
        raise DataError("checkpoint too short to be valid")
    body, trailer = blob[:-_DIGEST_SIZE], blob[-_DIGEST_SIZE:]
    if _digest(body) != trailer:
        raise ChecksumError("checkpoint checksum mismatch")
    r = _Reader(body)
    if r.take(len(MAGIC)) != MAGIC:
        raise DataError("bad checkpoint magic")
    version = r.u32()
    if version != VERSION:
        raise DataError("unsupported checkpoint version %d" % version)
    config_text = r.take(r.u32()).decode("utf-8")
    count = r.u32()
    entries = {}
    for _ in range(count):
        name = r.take(r.u16()).decode("utf-8")
        rank = r.u8()
        shape = tuple(r.u32() for _ in range(rank))
        n_values = 1
        for extent in shape:
            n_values *= extent
        data = np.frombuffer(r.take(4 * n_values), dtype="<f4").reshape(shape)
        if name in entries:
            raise DataError("duplicate checkpoint entry %r" % name)
        entries[name] = data.copy()
    if r.pos != len(body):
        raise DataError("trailing bytes after last checkpoint entry")
    return config_text, entries


def save_checkpoint(path, model_params, config_text=""):
    blob = serialize_state(model_params.state_entries(), config_text)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def load_checkpoint(path):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise DataError("cannot read checkpoint %s: %s" % (path, exc)) from None
    return deserialize_state(blob)


def restore_model(path, model_params):
    """Load a checkpoint into an existing model; returns the config snapshot."""
    config_text, entries = load_checkpoint(path)
    model_params.load_state(entries)
    return config_text
