"""On-disk dataset format.

Layout (all integers little-endian)::

    magic       b"STBD1"            (4-byte tag + 1 version digit)
    nvar        u32
    nobs        u64
    nvar x      name: u16 len + utf-8 bytes
                stype tag: u8
                label table name: u16 len + bytes (len 0 = none)
    ntables     u32
    ntables x   name: u16 len + bytes
                nentries: u32
                nentries x  code: i32, label: u32 len + bytes
    payload     column-major; numeric cells at fixed width, string cells
                as u32 len + bytes + u8 binary flag

Numeric cells are written as raw bit patterns so every missing flavor
survives the round trip.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from .errors import DatasetFormatError
from .storage import StorageType
from .workspace import Dataset, ValueLabelTable, Variable

MAGIC_TAG = b"STBD"
VERSION = b"1"
MAGIC = MAGIC_TAG + VERSION


def _put_name(buf: io.BytesIO, text: str) -> None:
    raw = text.encode("utf-8")
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)


def _put_long_str(buf: io.BytesIO, raw: bytes) -> None:
    buf.write(struct.pack("<I", len(raw)))
    buf.write(raw)


def encode_cell_text(text: str, binary: bool) -> bytes:
    return text.encode("latin-1") if binary else text.encode("utf-8")


def dumps(ds: Dataset, labels: Dict[str, ValueLabelTable]) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IQ", ds.nvar, ds.nobs))
    for var in ds.variables:
        _put_name(buf, var.name)
        buf.write(struct.pack("<B", var.stype.tag))
        _put_name(buf, var.label_table or "")
    buf.write(struct.pack("<I", len(labels)))
    for table in labels.values():
        _put_name(buf, table.name)
        buf.write(struct.pack("<I", len(table.mapping)))
        for code, label in table.mapping.items():
            buf.write(struct.pack("<i", code))
            _put_long_str(buf, label.encode("utf-8"))
    for var in ds.variables:
        if var.stype.is_string:
            flags = var.binary if var.binary is not None else np.zeros(ds.nobs, dtype=bool)
            for text, flag in zip(var.data, flags):  # type: ignore[call-overload]
                _put_long_str(buf, encode_cell_text(text, bool(flag)))
                buf.write(struct.pack("<B", 1 if flag else 0))
        else:
            arr = np.asarray(var.data, dtype=var.stype.dtype.newbyteorder("<"))
            buf.write(arr.tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, raw: bytes) -> None:
        self.raw = raw
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise DatasetFormatError("truncated dataset file")
        out = self.raw[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def name(self) -> str:
        (n,) = self.unpack("<H")
        return self.take(n).decode("utf-8")

    def long_bytes(self) -> bytes:
        (n,) = self.unpack("<I")
        return self.take(n)


def loads(raw: bytes) -> Tuple[Dataset, Dict[str, ValueLabelTable]]:
    if len(raw) < 5 or raw[:4] != MAGIC_TAG:
        raise DatasetFormatError("not a statbridge dataset")
    if raw[4:5] != VERSION:
        raise DatasetFormatError(
            f"unsupported dataset version {raw[4:5].decode('latin-1')!r} (expected {VERSION.decode()})"
        )
    rd = _Reader(raw)
    rd.take(5)
    nvar, nobs = rd.unpack("<IQ")
    header = []
    for _ in range(nvar):
        name = rd.name()
        (tag,) = rd.unpack("<B")
        try:
            stype = StorageType.from_tag(tag)
        except Exception:
            raise DatasetFormatError(f"bad storage type tag {tag}") from None
        header.append((name, stype, rd.name() or None))
    (ntables,) = rd.unpack("<I")
    labels: Dict[str, ValueLabelTable] = {}
    for _ in range(ntables):
        tname = rd.name()
        (nent,) = rd.unpack("<I")
        mapping = {}
        for _ in range(nent):
            (code,) = rd.unpack("<i")
            mapping[code] = rd.long_bytes().decode("utf-8")
        labels[tname] = ValueLabelTable(tname, mapping)
    variables = []
    for name, stype, table in header:
        if stype.is_string:
            cells, flags = [], np.zeros(nobs, dtype=bool)
            for j in range(nobs):
                body = rd.long_bytes()
                (flag,) = rd.unpack("<B")
                flags[j] = bool(flag)
                cells.append(body.decode("latin-1") if flag else body.decode("utf-8"))
            binary = flags if stype is StorageType.STRL else None
            variables.append(Variable(name, stype, cells, table, binary))
        else:
            width = stype.width or 0
            chunk = rd.take(width * nobs)
            arr = np.frombuffer(chunk, dtype=stype.dtype.newbyteorder("<")).astype(stype.dtype)
            variables.append(Variable(name, stype, arr, table))
    if rd.pos != len(raw):
        raise DatasetFormatError("trailing bytes after dataset payload")
    return Dataset(int(nobs), variables), labels


def write_dataset(path, ds: Dataset, labels: Dict[str, ValueLabelTable]) -> None:
    Path(path).write_bytes(dumps(ds, labels))


def read_dataset(path) -> Tuple[Dataset, Dict[str, ValueLabelTable]]:
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        raise DatasetFormatError(f"file {path} not found") from None
    return loads(raw)
