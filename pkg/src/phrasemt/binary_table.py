"""Binary container for phrase and reordering tables.

Layout (little endian)::

    magic b"PMTB" | version u8 | n_scores u8 | max_src_len u16
    | n_sources u32 | index_offset u64 | crc32 u32 | body...

The body holds one block per source phrase: ``u32 n_entries`` followed by
entries ``u16 len(tgt) | tgt utf-8 | n_scores x f64``.  The index at
``index_offset`` lists ``u16 len(src) | src utf-8 | u64 block_offset`` in
sorted order.  The CRC covers everything after the fixed header.  Opening a
table reads only the index; entries are decoded on lookup.
"""
from __future__ import annotations

import mmap
import struct
import zlib
from itertools import groupby
from typing import Iterable, Sequence

MAGIC = b"PMTB"
VERSION = 1
_HEADER = struct.Struct("<4sBBHIQI")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")

Row = tuple[tuple[str, ...], tuple[str, ...], Sequence[float]]


class CorruptTableError(ValueError):
    pass


def _encode(phrase: Sequence[str]) -> bytes:
    return " ".join(phrase).encode("utf-8")


def write_table(path, rows: Iterable[Row], n_scores: int) -> None:
    rows = sorted(rows, key=lambda r: (r[0], r[1]))
    body = bytearray()
    index = bytearray()
    n_sources = 0
    max_len = 0
    score_fmt = struct.Struct(f"<{n_scores}d")
    for src, group in groupby(rows, key=lambda r: r[0]):
        group = list(group)
        offset = len(body)
        body += _U32.pack(len(group))
        for _, tgt, scores in group:
            if len(scores) != n_scores:
                raise ValueError(f"expected {n_scores} scores, got {len(scores)}")
            t = _encode(tgt)
            body += _U16.pack(len(t)) + t + score_fmt.pack(*scores)
        s = _encode(src)
        index += _U16.pack(len(s)) + s + _U64.pack(offset)
        n_sources += 1
        max_len = max(max_len, len(src))
    payload = bytes(body) + bytes(index)
    header = _HEADER.pack(
        MAGIC, VERSION, n_scores, max_len, n_sources, _HEADER.size + len(body), zlib.crc32(payload)
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


class BinaryTable:
    """Read-only view of a binarised table with per-phrase lookup."""

    def __init__(self, path, verify: bool = True):
        self.path = path
        with open(path, "rb") as fh:
            self._buf = mmap.mmap(fh.fileno(), 0, access=mmap.ACCESS_READ)
        buf = self._buf
        if len(buf) < _HEADER.size:
            raise CorruptTableError(f"{path}: truncated header")
        magic, version, n_scores, max_len, n_sources, index_offset, crc = _HEADER.unpack_from(buf, 0)
        if magic != MAGIC:
            raise CorruptTableError(f"{path}: bad magic number")
        if version != VERSION:
            raise CorruptTableError(f"{path}: unsupported version {version}")
        if verify and zlib.crc32(buf[_HEADER.size:]) != crc:
            raise CorruptTableError(f"{path}: checksum mismatch")
        self.n_scores = n_scores
        self.max_src_len = max_len
        self._scores = struct.Struct(f"<{n_scores}d")
        self._index: dict[tuple[str, ...], int] = {}
        pos = index_offset
        try:
            for _ in range(n_sources):
                (n,) = _U16.unpack_from(buf, pos)
                src = tuple(buf[pos + 2:pos + 2 + n].decode("utf-8").split(" "))
                (offset,) = _U64.unpack_from(buf, pos + 2 + n)
                self._index[src] = _HEADER.size + offset
                pos += 10 + n
        except (struct.error, UnicodeDecodeError) as exc:
            raise CorruptTableError(f"{path}: damaged index ({exc})") from None
        self.probes = 0

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, src) -> bool:
        return tuple(src) in self._index

    def lookup(self, src: Sequence[str]) -> list[tuple[tuple[str, ...], tuple[float, ...]]]:
        self.probes += 1
        offset = self._index.get(tuple(src))
        if offset is None:
            return []
        buf = self._buf
        (count,) = _U32.unpack_from(buf, offset)
        pos = offset + 4
        out = []
        for _ in range(count):
            (n,) = _U16.unpack_from(buf, pos)
            tgt = tuple(buf[pos + 2:pos + 2 + n].decode("utf-8").split(" ")) if n else ()
            pos += 2 + n
            out.append((tgt, self._scores.unpack_from(buf, pos)))
            pos += self._scores.size
        return out

    def sources(self) -> list[tuple[str, ...]]:
        return sorted(self._index)

    def rows(self) -> list[Row]:
        return [(src, tgt, scores) for src in self.sources() for tgt, scores in self.lookup(src)]

    def close(self) -> None:
        self._buf.close()
