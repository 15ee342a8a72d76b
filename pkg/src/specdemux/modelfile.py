"""Versioned binary container for trained models.

Layout (all integers little-endian)::

    magic        8 bytes     b"SDMXWIEN" or b"SDMXFRST"
    version      uint32
    header_len   uint32
    header       header_len bytes of UTF-8 JSON (sorted keys)
    payload      arrays listed in header["arrays"], in order, each as raw
                 little-endian C-order bytes of the declared dtype and shape
"""

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataFormatError

_PREFIX = struct.Struct("<8sII")


def encode(magic, version, header, arrays):
    header = dict(header)
    specs, chunks = [], []
    for name, arr in arrays:
        arr = np.ascontiguousarray(arr)
        dt = arr.dtype.newbyteorder("<")
        specs.append({"name": name, "dtype": dt.str, "shape": list(arr.shape)})
        chunks.append(arr.astype(dt, copy=False).tobytes())
    header["arrays"] = specs
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return _PREFIX.pack(magic, version, len(blob)) + blob + b"".join(chunks)


def decode(data):
    if len(data) < _PREFIX.size:
        raise DataFormatError("model file truncated")
    magic, version, hlen = _PREFIX.unpack_from(data)
    start = _PREFIX.size
    try:
        header = json.loads(data[start:start + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"corrupt model header: {exc}") from exc
    offset = start + hlen
    arrays = {}
    for spec in header.get("arrays", []):
        dt = np.dtype(spec["dtype"])
        count = int(np.prod(spec["shape"], dtype=np.int64))
        nbytes = count * dt.itemsize
        if offset + nbytes > len(data):
            raise DataFormatError(f"model payload truncated in array {spec['name']!r}")
        arr = np.frombuffer(data, dtype=dt, count=count, offset=offset).reshape(spec["shape"])
        arrays[spec["name"]] = arr.astype(dt.newbyteorder("="))
        offset += nbytes
    if offset != len(data):
        raise DataFormatError("trailing bytes after model payload")
    return magic, version, header, arrays


def write(path, magic, version, header, arrays):
    Path(path).write_bytes(encode(magic, version, header, arrays))


def read(path):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DataFormatError(f"cannot read model {path}: {exc.strerror or exc}") from exc
    return decode(data)


def peek_magic(path):
    try:
        with Path(path).open("rb") as fh:
            return fh.read(8)
    except OSError as exc:
        raise DataFormatError(f"cannot read model {path}: {exc.strerror or exc}") from exc
