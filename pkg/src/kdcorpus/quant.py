"""k-bit fixed-point and log quantization of lexical tables, and model size accounting.

Each row is scaled by its largest probability, the scaled values are mapped onto the
codebook, and the row is renormalized. The row maximum always maps to the codebook value 1,
so a quantized row is ``code_value / sum(code_values)``; running the quantizer again
reproduces the same codes, which makes quantization idempotent.

Packed binary layout (little endian)::

    magic     4s   b"KDQ1"
    mode      B    0 = raw float64, 1 = fixed point, 2 = log
    bits      B    bits per code (64 for raw)
    cb_size   H    codebook entries
    n_rows    I    source words
    n_entries I    table entries
    codebook  cb_size x float64       relative code values
    row_sums  n_rows x float64        per-row sum of code values (quantized modes only)
    payload   ceil(n_entries * bits / 8) bytes of MSB-first packed code indices,
              or n_entries x float64 for raw tables

Entries are stored row-major in (f, e) lexicographic order.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from typing import Optional, Sequence

from .toymt import LexTable, dumps_table

MAGIC = b"KDQ1"
HEADER = struct.Struct("<4sBBHII")


class Mode(str, enum.Enum):
    FIXED = "fixed"
    LOG = "log"


_MODE_CODE = {None: 0, Mode.FIXED: 1, Mode.LOG: 2}


@dataclass(frozen=True)
class QuantConfig:
    mode: Mode
    bits: int

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not 2 <= self.bits <= 8:
            raise ValueError(f"bits must be in [2, 8], got {self.bits}")

    @property
    def levels(self) -> int:
        return 2 ** self.bits - 1

    @property
    def min_exponent(self) -> int:
        return -(2 ** self.bits - 1)

    def codebook(self) -> list[float]:
        """Non-zero code values; zero-valued entries are dropped from tables instead of coded."""
        if self.mode is Mode.FIXED:
            return [c / self.levels for c in range(1, self.levels + 1)]
        return [2.0 ** e for e in range(self.min_exponent, 1)]

    def __str__(self) -> str:
        return f"{self.mode.value}{self.bits}"


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def fixed_point_value(p: float, bits: int) -> float:
    k = 2 ** bits - 1
    return _round_half_up(p * k) / k


def log_value(p: float, bits: int) -> float:
    if p <= 0.0:
        return 0.0
    e = min(max(_round_half_up(math.log2(p)), -(2 ** bits - 1)), 0)
    return 2.0 ** e


def code_value(p: float, q: QuantConfig) -> float:
    return fixed_point_value(p, q.bits) if q.mode is Mode.FIXED else log_value(p, q.bits)


@dataclass(frozen=True)
class QuantResult:
    table: LexTable
    distinct_values: int
    mae: float
    config: QuantConfig


def _row_codes(row: dict[str, float], q: QuantConfig) -> dict[str, float]:
    scale = max(row.values())
    codes = {e: code_value(p / scale, q) for e, p in sorted(row.items())}
    return {e: c for e, c in codes.items() if c > 0.0}


def quantize(m: LexTable, q: QuantConfig) -> QuantResult:
    rows = {}
    used: set[float] = set()
    abs_err = []
    for f, row in m.t.items():
        codes = _row_codes(row, q)
        used.update(codes.values())
        total = math.fsum(codes.values())
        new = {e: c / total for e, c in codes.items()}
        rows[f] = new
        abs_err.extend(abs(new.get(e, 0.0) - p) for e, p in row.items())
    mae = math.fsum(abs_err) / len(abs_err) if abs_err else 0.0
    return QuantResult(LexTable(m.src_lang, m.tgt_lang, rows), len(used), mae, q)


def pre_normalization_values(m: LexTable, q: QuantConfig) -> set[float]:
    return {c for row in m.t.values() for c in _row_codes(row, q).values()}


# --- packing -------------------------------------------------------------------


def _keys(m: LexTable) -> list[tuple[str, str]]:
    return [(f, e) for f in sorted(m.t) for e in sorted(m.t[f])]


def packed_size(n_entries: int, n_rows: int, q: Optional[QuantConfig]) -> int:
    if q is None:
        return HEADER.size + 8 * n_entries
    return HEADER.size + 8 * len(q.codebook()) + 8 * n_rows + (n_entries * q.bits + 7) // 8


def pack(m: LexTable, q: Optional[QuantConfig] = None) -> bytes:
    """Serialize values (not vocabulary) of ``m``; with ``q`` the table is quantized first."""
    if q is None:
        keys = _keys(m)
        head = HEADER.pack(MAGIC, 0, 64, 0, len(m.t), len(keys))
        return head + struct.pack(f"<{len(keys)}d", *(m.t[f][e] for f, e in keys))
    codebook = q.codebook()
    index = {v: i for i, v in enumerate(codebook)}
    row_codes = {f: _row_codes(row, q) for f, row in m.t.items()}
    keys = [(f, e) for f in sorted(row_codes) for e in sorted(row_codes[f])]
    sums = [math.fsum(row_codes[f].values()) for f in sorted(row_codes)]
    acc, nbits, payload = 0, 0, bytearray()
    for f, e in keys:
        acc = (acc << q.bits) | index[row_codes[f][e]]
        nbits += q.bits
        while nbits >= 8:
            nbits -= 8
            payload.append((acc >> nbits) & 0xFF)
            acc &= (1 << nbits) - 1
    if nbits:
        payload.append((acc << (8 - nbits)) & 0xFF)
    head = HEADER.pack(MAGIC, _MODE_CODE[q.mode], q.bits, len(codebook), len(row_codes), len(keys))
    return (
        head
        + struct.pack(f"<{len(codebook)}d", *codebook)
        + struct.pack(f"<{len(sums)}d", *sums)
        + bytes(payload)
    )


def unpack(data: bytes, keys: Sequence[tuple[str, str]], src_lang: str, tgt_lang: str) -> LexTable:
    """Inverse of :func:`pack` given the (f, e) keys in stored order."""
    magic, mode, bits, cb_size, n_rows, n_entries = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError("not a packed lexical table")
    if len(keys) != n_entries:
        raise ValueError(f"{len(keys)} keys for {n_entries} packed entries")
    off = HEADER.size
    rows: dict[str, dict[str, float]] = {}
    if mode == 0:
        values = struct.unpack_from(f"<{n_entries}d", data, off)
        for (f, e), v in zip(keys, values):
            rows.setdefault(f, {})[e] = v
        return LexTable(src_lang, tgt_lang, rows)
    codebook = struct.unpack_from(f"<{cb_size}d", data, off)
    off += 8 * cb_size
    sums = struct.unpack_from(f"<{n_rows}d", data, off)
    off += 8 * n_rows
    payload = data[off:]
    row_ids = {f: i for i, f in enumerate(dict.fromkeys(f for f, _ in keys))}
    mask = (1 << bits) - 1
    for k, (f, e) in enumerate(keys):
        bit = k * bits
        chunk = int.from_bytes(payload[bit // 8:(bit + bits - 1) // 8 + 1], "big")
        width = ((bit + bits - 1) // 8 + 1 - bit // 8) * 8
        code = (chunk >> (width - (bit % 8) - bits)) & mask
        rows.setdefault(f, {})[e] = codebook[code] / sums[row_ids[f]]
    return LexTable(src_lang, tgt_lang, rows)


@dataclass(frozen=True)
class SizeReport:
    entries: int
    rows: int
    distinct_values: int
    text_bytes: int
    packed_bytes: int
    config: Optional[str] = None

    def to_json(self) -> dict:
        return {"kind": "size", **self.__dict__}


def size_report(m: LexTable, q: Optional[QuantConfig] = None) -> SizeReport:
    if q is None:
        table = m
        distinct = len({p for row in m.t.values() for p in row.values()})
    else:
        res = quantize(m, q)
        table, distinct = res.table, res.distinct_values
    n = len(table)
    return SizeReport(
        n,
        len(table.t),
        distinct,
        len(dumps_table(table).encode("utf-8")),
        len(pack(m, q)),
        None if q is None else str(q),
    )
