"""Saturating signed fixed-point arithmetic and lookup-table nonlinearities.

This is the numeric substrate of the bit-accurate inference path: a
configurable Q-format (12-bit Q4.8 by default), round-half-away-from-zero
quantization, saturating adds/multiply-accumulates with double-width
accumulation, and midpoint-sampled sigmoid/tanh lookup tables.

Everything here is a pure value computation: raw codes are plain Python ints
or int64 numpy arrays, so results are exactly reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "QFormat",
    "Fixed",
    "LutTable",
    "to_fixed",
    "to_raw",
    "from_raw",
    "requantize",
    "sat_add",
    "mul_fixed",
    "mul_add_fixed",
    "dot_ternary",
    "dot_fixed",
    "build_lut",
    "lut_index",
    "lut_index_raw",
    "lut_eval",
    "lut_eval_raw",
    "lut_entries_in",
    "save_lut",
    "load_lut",
]


@dataclass(frozen=True)
class QFormat:
    """Signed two's-complement fixed-point format: value = raw * 2**-frac_bits."""

    total_bits: int = 12
    frac_bits: int = 8

    def __post_init__(self):
        if self.total_bits < 2:
            raise ValueError("total_bits must be >= 2")
        if not 0 <= self.frac_bits < self.total_bits:
            raise ValueError("frac_bits must satisfy 0 <= frac_bits < total_bits")
        if self.total_bits > 32:
            raise ValueError("formats wider than 32 bits are not supported")

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def raw_min(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def raw_max(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def min_value(self) -> float:
        return self.raw_min / self.scale

    @property
    def max_value(self) -> float:
        return self.raw_max / self.scale

    @property
    def step(self) -> float:
        return 1.0 / self.scale

    def __str__(self) -> str:
        # integer-bit count includes the sign, so 12/8 prints as Q4.8
        return f"Q{self.total_bits - self.frac_bits}.{self.frac_bits}"


#: Default activation/state format: 12 bits with 8 fractional bits, so the
#: integer range covers the sigmoid LUT input domain [-8, 8).
ACT_FORMAT = QFormat(12, 8)


@dataclass(frozen=True)
class Fixed:
    """One fixed-point scalar: raw two's-complement code plus its format."""

    raw: int
    fmt: QFormat = ACT_FORMAT

    def __post_init__(self):
        if not self.fmt.raw_min <= self.raw <= self.fmt.raw_max:
            raise ValueError(f"raw {self.raw} outside {self.fmt} range")

    @property
    def value(self) -> float:
        return self.raw / self.fmt.scale


def _round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def to_fixed(x: float, fmt: QFormat = ACT_FORMAT) -> Fixed:
    """Quantize a real scalar: round-half-away-from-zero, saturate at the bounds."""
    raw = _round_half_away(x * fmt.scale)
    return Fixed(min(max(raw, fmt.raw_min), fmt.raw_max), fmt)


def to_raw(x, fmt: QFormat = ACT_FORMAT) -> np.ndarray:
    """Vectorized quantizer; returns int64 raw codes (saturating, never wrapping)."""
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValueError("cannot quantize non-finite values")
    raw = np.floor(np.abs(x) * fmt.scale + 0.5) * np.sign(x)
    return np.clip(raw, fmt.raw_min, fmt.raw_max).astype(np.int64)


def from_raw(raw, fmt: QFormat = ACT_FORMAT) -> np.ndarray:
    """Raw codes back to float64 values."""
    return np.asarray(raw, dtype=np.float64) / fmt.scale


def requantize(acc, extra_frac_bits: int, fmt: QFormat = ACT_FORMAT) -> np.ndarray:
    """Reduce a double-width accumulator to `fmt`.

    `acc` holds integers at scale 2**-(fmt.frac_bits + extra_frac_bits); the
    rounding shift is done in exact integer arithmetic (half away from zero),
    then the result saturates to the format range.
    """
    acc = np.asarray(acc, dtype=np.int64)
    if extra_frac_bits == 0:
        return np.clip(acc, fmt.raw_min, fmt.raw_max)
    half = 1 << (extra_frac_bits - 1)
    mag = (np.abs(acc) + half) >> extra_frac_bits
    raw = np.where(acc >= 0, mag, -mag)
    return np.clip(raw, fmt.raw_min, fmt.raw_max)


def sat_add(a, b, fmt: QFormat = ACT_FORMAT) -> np.ndarray:
    """Saturating add of raw codes in the same format."""
    s = np.asarray(a, dtype=np.int64) + np.asarray(b, dtype=np.int64)
    return np.clip(s, fmt.raw_min, fmt.raw_max)


def mul_fixed(a, b, fmt: QFormat = ACT_FORMAT) -> np.ndarray:
    """Elementwise product of two raw tensors, requantized once."""
    prod = np.asarray(a, dtype=np.int64) * np.asarray(b, dtype=np.int64)
    return requantize(prod, fmt.frac_bits, fmt)


def mul_add_fixed(a, b, c, d, fmt: QFormat = ACT_FORMAT) -> np.ndarray:
    """a*b + c*d on raw tensors, accumulated double-width, requantized once.

    This is the cell-state update a gate-product pair needs: the two products
    are summed exactly before the single rounding shift.
    """
    acc = (np.asarray(a, dtype=np.int64) * np.asarray(b, dtype=np.int64)
           + np.asarray(c, dtype=np.int64) * np.asarray(d, dtype=np.int64))
    return requantize(acc, fmt.frac_bits, fmt)


def dot_ternary(x_raw, codes, bias_raw=None, fmt: QFormat = ACT_FORMAT) -> np.ndarray:
    """Dot product of activations with 2-bit weight codes in {-1, 0, +1}.

    The accumulator stays at the activation scale (codes are integers), so the
    only quantization effect is the final saturation.
    """
    acc = np.asarray(x_raw, dtype=np.int64) @ np.asarray(codes, dtype=np.int64)
    if bias_raw is not None:
        acc = acc + np.asarray(bias_raw, dtype=np.int64)
    return np.clip(acc, fmt.raw_min, fmt.raw_max)


def dot_fixed(x_raw, w_raw, bias_raw=None, fmt: QFormat = ACT_FORMAT) -> np.ndarray:
    """Dot product of activations with fixed-point weights.

    Products sit at scale 2**-(2*frac); they are accumulated exactly and
    requantized once per output element.
    """
    acc = np.asarray(x_raw, dtype=np.int64) @ np.asarray(w_raw, dtype=np.int64)
    if bias_raw is not None:
        acc = acc + (np.asarray(bias_raw, dtype=np.int64) << fmt.frac_bits)
    return requantize(acc, fmt.frac_bits, fmt)


# ---------------------------------------------------------------------------
# Lookup-table nonlinearities
# ---------------------------------------------------------------------------

#: Entries carry sign + 10 fractional bits; |f| < 1 for both supported kinds,
#: so the near-saturated sigmoid tail lands at 1023/1024 rather than 1.0.
ENTRY_FORMAT = QFormat(11, 10)

_LUT_FUNCS = {
    "sigmoid": lambda u: 1.0 / (1.0 + np.exp(-u)),
    "tanh": np.tanh,
}
_LUT_RANGES = {"sigmoid": (-8.0, 8.0), "tanh": (-4.0, 4.0)}


@dataclass(frozen=True)
class LutTable:
    """Nonlinearity table: N quantized samples of f over [u_min, u_max)."""

    kind: str
    u_min: float
    u_max: float
    entries_raw: np.ndarray
    entry_format: QFormat = ENTRY_FORMAT

    def __post_init__(self):
        if self.kind not in _LUT_FUNCS:
            raise ValueError(f"unknown LUT kind {self.kind!r}")
        n = len(self.entries_raw)
        if n < 2 or n & (n - 1):
            raise ValueError("LUT size must be a power of two")
        span = self.u_max - self.u_min
        if span <= 0 or 2 ** round(math.log2(span)) != span:
            raise ValueError("u_max - u_min must be a positive power of two")

    @property
    def n_entries(self) -> int:
        return len(self.entries_raw)

    @property
    def cell_width(self) -> float:
        return (self.u_max - self.u_min) / self.n_entries

    def entry_values(self) -> np.ndarray:
        return from_raw(self.entries_raw, self.entry_format)


def build_lut(kind: str, n_entries: int = 64, u_min: float | None = None,
              u_max: float | None = None,
              entry_format: QFormat = ENTRY_FORMAT) -> LutTable:
    """Build a table by sampling the exact function at each cell's midpoint."""
    lo, hi = _LUT_RANGES[kind]
    u_min = lo if u_min is None else u_min
    u_max = hi if u_max is None else u_max
    du = (u_max - u_min) / n_entries
    mids = u_min + (np.arange(n_entries) + 0.5) * du
    entries = to_raw(_LUT_FUNCS[kind](mids), entry_format)
    return LutTable(kind, u_min, u_max, entries, entry_format)


def lut_index(u: Fixed, table: LutTable) -> int:
    """floor((u - u_min) / cell_width), clamped to the table."""
    idx = math.floor((u.value - table.u_min) / table.cell_width)
    return min(max(idx, 0), table.n_entries - 1)


def lut_index_raw(u_raw, table: LutTable, fmt: QFormat = ACT_FORMAT) -> np.ndarray:
    """Vectorized index computation as the hardware does it: one shift.

    cell_width * 2**frac_bits is a power of two for the supported tables, so
    the division reduces to an arithmetic right shift of (raw - raw(u_min)).
    """
    shift = round(math.log2(table.cell_width * fmt.scale))
    if shift < 0 or 2 ** shift != table.cell_width * fmt.scale:
        raise ValueError("cell width must be a positive power of two "
                         "in raw units at this format")
    base = round(table.u_min * fmt.scale)
    idx = (np.asarray(u_raw, dtype=np.int64) - base) >> shift
    return np.clip(idx, 0, table.n_entries - 1)


def lut_eval(u: Fixed, table: LutTable) -> Fixed:
    """Table lookup; returns the stored entry in the entry format."""
    return Fixed(int(table.entries_raw[lut_index(u, table)]), table.entry_format)


def lut_eval_raw(u_raw, table: LutTable, fmt: QFormat = ACT_FORMAT) -> np.ndarray:
    """Vectorized lookup over raw activation codes; returns entry raw codes."""
    return table.entries_raw[lut_index_raw(u_raw, table, fmt)]


def lut_entries_in(table: LutTable, fmt: QFormat) -> np.ndarray:
    """Table entries requantized to a datapath format (the IM write boundary)."""
    return to_raw(table.entry_values(), fmt)


def save_lut(table: LutTable, path) -> None:
    """Write `index<TAB>raw` lines under a `#kind u_min u_max N total frac` header."""
    lines = [f"#{table.kind} {table.u_min:g} {table.u_max:g} {table.n_entries} "
             f"{table.entry_format.total_bits} {table.entry_format.frac_bits}"]
    lines += [f"{i}\t{int(r)}" for i, r in enumerate(table.entries_raw)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_lut(path) -> LutTable:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing LUT header line")
    kind, u_min, u_max, n, total, frac = lines[0][1:].split()
    entries = np.zeros(int(n), dtype=np.int64)
    for line in lines[1:]:
        i, raw = line.split("\t")
        entries[int(i)] = int(raw)
    return LutTable(kind, float(u_min), float(u_max), entries,
                    QFormat(int(total), int(frac)))
