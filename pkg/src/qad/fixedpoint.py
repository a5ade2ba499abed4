"""Two's-complement fixed-point numbers Q(m, b).

A format has ``int_bits`` (m, sign bit included) and ``frac_bits`` (b).  A
value is stored as an unsigned bit pattern of width m + b; its real value is
``signed(bits) * 2**-b``.  Conversion from reals always floors, i.e. truncates
toward negative infinity, so the error is one-sided and below one ULP.

>>> fmt = FixedPointFormat(4, 4)
>>> str(encode(2.5, fmt))
'0010.1000'
>>> decode(encode(-0.75, fmt))
-0.75
>>> truncate_to(-1 / 3, fmt)
-0.375
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath

from .errors import FixedPointOverflowError, FormatError

MAX_TOTAL_BITS = 64


@dataclass(frozen=True)
class FixedPointFormat:
    int_bits: int
    frac_bits: int

    def __post_init__(self):
        if self.int_bits < 1:
            raise FormatError(f"int_bits must be >= 1, got {self.int_bits}")
        if self.frac_bits < 0:
            raise FormatError(f"frac_bits must be >= 0, got {self.frac_bits}")
        if self.total_bits > MAX_TOTAL_BITS:
            raise FormatError(
                f"total width {self.total_bits} exceeds {MAX_TOTAL_BITS} bits"
            )

    @property
    def total_bits(self) -> int:
        return self.int_bits + self.frac_bits

    @property
    def resolution(self) -> float:
        return math.ldexp(1.0, -self.frac_bits)

    @property
    def min_raw(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def max_raw(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def min_value(self) -> Fraction:
        return Fraction(self.min_raw, 1 << self.frac_bits)

    @property
    def max_value(self) -> Fraction:
        return Fraction(self.max_raw, 1 << self.frac_bits)

    @property
    def working_precision(self) -> int:
        """Binary precision for evaluating transcendental blocks.

        Wide enough that the floor of the result is decided correctly except
        in contrived near-tie cases.
        """
        return 2 * self.total_bits + 64

    def in_range(self, raw: int) -> bool:
        return self.min_raw <= raw <= self.max_raw

    def raw_to_bits(self, raw: int) -> int:
        return raw & ((1 << self.total_bits) - 1)

    def bits_to_raw(self, bits: int) -> int:
        if bits >> (self.total_bits - 1):
            return bits - (1 << self.total_bits)
        return bits

    def __str__(self):
        return f"Q({self.int_bits},{self.frac_bits})"


@dataclass(frozen=True)
class FixedPointValue:
    bits: int
    format: FixedPointFormat

    def __post_init__(self):
        if not 0 <= self.bits < (1 << self.format.total_bits):
            raise FormatError(
                f"bit pattern {self.bits:#x} does not fit {self.format.total_bits} bits"
            )

    @classmethod
    def from_raw(cls, raw: int, fmt: FixedPointFormat) -> "FixedPointValue":
        check_raw(raw, fmt)
        return cls(fmt.raw_to_bits(raw), fmt)

    @classmethod
    def from_binary(cls, text: str) -> "FixedPointValue":
        """Parse a big-endian pattern such as ``"0010.1000"``."""
        int_part, dot, frac_part = text.partition(".")
        if not dot or not int_part or set(int_part + frac_part) - {"0", "1"}:
            raise FormatError(f"not a fixed-point bit string: {text!r}")
        fmt = FixedPointFormat(len(int_part), len(frac_part))
        return cls(int(int_part + frac_part, 2), fmt)

    @property
    def raw(self) -> int:
        return self.format.bits_to_raw(self.bits)

    def bitstring(self) -> str:
        return format(self.bits, f"0{self.format.total_bits}b")

    def to_fraction(self) -> Fraction:
        return Fraction(self.raw, 1 << self.format.frac_bits)

    def __float__(self):
        return decode(self)

    def __str__(self):
        s = self.bitstring()
        m = self.format.int_bits
        return f"{s[:m]}.{s[m:]}"


def scaled_floor(x, frac_bits: int) -> int:
    """floor(x * 2**frac_bits) computed exactly for int, float, Fraction, mpf."""
    if isinstance(x, bool):
        x = int(x)
    if isinstance(x, int):
        return x << frac_bits
    if isinstance(x, Fraction):
        return math.floor(x * (1 << frac_bits))
    if isinstance(x, mpmath.mpf):
        if not mpmath.isfinite(x):
            raise FixedPointOverflowError(x, "-inf", "inf")
        return int(mpmath.floor(mpmath.ldexp(x, frac_bits)))
    x = float(x)
    if not math.isfinite(x):
        raise FixedPointOverflowError(x, "-inf", "inf")
    # ldexp by a power of two is exact for finite doubles
    return math.floor(math.ldexp(x, frac_bits))


def check_raw(raw: int, fmt: FixedPointFormat, x=None) -> int:
    if not fmt.in_range(raw):
        shown = x if x is not None else Fraction(raw, 1 << fmt.frac_bits)
        raise FixedPointOverflowError(
            shown, float(fmt.min_value), float(fmt.max_value)
        )
    return raw


def encode_raw(x, fmt: FixedPointFormat) -> int:
    """Signed integer ``floor(x * 2**b)``, range checked."""
    return check_raw(scaled_floor(x, fmt.frac_bits), fmt, x)


def encode(x, fmt: FixedPointFormat) -> FixedPointValue:
    return FixedPointValue(fmt.raw_to_bits(encode_raw(x, fmt)), fmt)


def decode(v: FixedPointValue) -> float:
    # Fraction -> float rounds correctly for patterns wider than 53 bits
    return float(v.to_fraction())


def truncate_to(x, fmt: FixedPointFormat) -> float:
    """Real value of ``x`` after flooring onto the grid of ``fmt``."""
    return decode(encode(x, fmt))


def raw_to_fraction(raw: int, fmt: FixedPointFormat) -> Fraction:
    return Fraction(raw, 1 << fmt.frac_bits)


def raw_to_mpf(raw: int, fmt: FixedPointFormat) -> mpmath.mpf:
    # exact as long as the caller's working precision covers total_bits
    return mpmath.ldexp(mpmath.mpf(raw), -fmt.frac_bits)


def raw_to_float(raw: int, fmt: FixedPointFormat) -> float:
    return float(Fraction(raw, 1 << fmt.frac_bits))
