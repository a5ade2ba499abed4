"""Primitive functions and the valder operators acting on register triples.

Transcendental blocks are evaluated in mpmath at the format's working
precision and floored onto the grid; they stand in for the reversible
elementary-function circuits, which are not synthesized here.  Arithmetic
operators work on the raw integers directly and round exactly once per
output register.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Callable, Mapping

import mpmath

from .errors import DomainError
from .fixedpoint import FixedPointFormat, check_raw, encode_raw, raw_to_mpf
from .registers import RegisterMachine

TRANSCENDENTAL = ("exp", "log", "sqrt", "sin", "cos", "tan", "arcsin", "arctan")
ARITHMETIC = ("plus", "minus", "times", "reciprocal")

DEFAULT_GATE_COSTS = {
    **{name: 10 for name in TRANSCENDENTAL},
    **{name: 1 for name in ARITHMETIC},
}


@dataclass(frozen=True)
class Primitive:
    name: str
    eval: Callable
    deriv: Callable
    deriv2: Callable
    domain: Callable
    domain_text: str
    gate_cost: int

    @property
    def transcendental(self) -> bool:
        return self.name in TRANSCENDENTAL

    def check_domain(self, x) -> None:
        if not self.domain(x):
            raise DomainError(f"{self.name} is undefined at {mpmath.nstr(x, 17)} "
                              f"(domain: {self.domain_text})")


def _always(x):
    return True


def _table():
    m = mpmath
    rows = [
        ("exp", m.exp, m.exp, m.exp, _always, "all reals"),
        ("log", m.log, lambda v: 1 / v, lambda v: -1 / v**2,
         lambda v: v > 0, "x > 0"),
        ("sqrt", m.sqrt, lambda v: m.mpf(0.5) / m.sqrt(v),
         lambda v: -m.mpf(0.25) / (v * m.sqrt(v)),
         lambda v: v > 0, "x > 0"),
        ("sin", m.sin, m.cos, lambda v: -m.sin(v), _always, "all reals"),
        ("cos", m.cos, lambda v: -m.sin(v), lambda v: -m.cos(v), _always, "all reals"),
        ("tan", m.tan, lambda v: 1 / m.cos(v) ** 2,
         lambda v: 2 * m.tan(v) / m.cos(v) ** 2,
         lambda v: m.cos(v) != 0, "cos(x) != 0"),
        ("arcsin", m.asin, lambda v: 1 / m.sqrt(1 - v * v),
         lambda v: v / (1 - v * v) ** m.mpf(1.5),
         lambda v: -1 < v < 1, "-1 < x < 1"),
        ("arctan", m.atan, lambda v: 1 / (1 + v * v),
         lambda v: -2 * v / (1 + v * v) ** 2, _always, "all reals"),
        ("reciprocal", lambda v: 1 / v, lambda v: -1 / v**2, lambda v: 2 / v**3,
         lambda v: v != 0, "x != 0"),
        ("minus", lambda v: -v, lambda v: -1 + 0 * v, lambda v: 0 * v,
         _always, "all reals"),
    ]
    return {
        name: Primitive(name, f, d, d2, dom, text, DEFAULT_GATE_COSTS[name])
        for name, f, d, d2, dom, text in rows
    }


PRIMITIVES: dict[str, Primitive] = _table()


def primitive_table_json(prims: Mapping[str, Primitive] = PRIMITIVES) -> list[dict]:
    return [{"name": p.name, "domain": p.domain_text, "gate_cost": p.gate_cost}
            for p in prims.values()]


def load_gate_costs(path) -> dict[str, int]:
    """Read cost overrides from JSON.

    Accepts either ``{"log": 12, ...}`` or the table form written by
    :func:`primitive_table_json` (``[{"name": "log", "gate_cost": 12}, ...]``).
    Unlisted operations keep their defaults.
    """
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        items = data.items()
    else:
        items = ((row["name"], row["gate_cost"]) for row in data)
    costs = dict(DEFAULT_GATE_COSTS)
    for name, cost in items:
        if name not in costs:
            raise ValueError(f"unknown operation {name!r} in cost table")
        if not isinstance(cost, int) or cost < 1:
            raise ValueError(f"gate cost for {name} must be a positive integer")
        costs[name] = cost
    return costs


def with_gate_costs(costs: Mapping[str, int]) -> dict[str, Primitive]:
    return {name: replace(p, gate_cost=costs.get(name, p.gate_cost))
            for name, p in PRIMITIVES.items()}


# -- fixed-point evaluation of a primitive --------------------------------

def eval_raw(p: Primitive, raw: int, fmt: FixedPointFormat) -> tuple[int, int]:
    """Floored (f(x), f'(x)) for the grid value ``raw``, as raw integers."""
    with mpmath.workprec(fmt.working_precision):
        x = raw_to_mpf(raw, fmt)
        p.check_domain(x)
        return encode_raw(p.eval(x), fmt), encode_raw(p.deriv(x), fmt)


def mul_raw(a: int, b: int, fmt: FixedPointFormat) -> int:
    # exact double-width product, one floor
    return check_raw((a * b) >> fmt.frac_bits, fmt)


# -- valder states ----------------------------------------------------------

@dataclass
class ValderState:
    """Three registers holding |value>|0>|derivative> in one shared format."""

    val_reg: str
    zero_reg: str
    der_reg: str
    format: FixedPointFormat

    @property
    def registers(self) -> tuple[str, str, str]:
        return self.val_reg, self.zero_reg, self.der_reg

    def value_raw(self, machine: RegisterMachine) -> int:
        return self.format.bits_to_raw(machine.bits(self.val_reg))

    def derivative_raw(self, machine: RegisterMachine) -> int:
        return self.format.bits_to_raw(machine.bits(self.der_reg))

    def retire(self, machine: RegisterMachine) -> None:
        for reg in self.registers:
            machine.retire(reg)


def alloc_valder(machine: RegisterMachine, fmt: FixedPointFormat,
                 value_raw: int, der_raw: int) -> ValderState:
    check_raw(value_raw, fmt)
    check_raw(der_raw, fmt)
    n = fmt.total_bits
    return ValderState(
        machine.alloc_register(n, fmt.raw_to_bits(value_raw)),
        machine.alloc_register(n),
        machine.alloc_register(n, fmt.raw_to_bits(der_raw)),
        fmt,
    )


def _alloc_output(machine, fmt):
    return alloc_valder(machine, fmt, 0, 0)


def ad_apply(p: Primitive, s: ValderState, machine: RegisterMachine,
             times_cost: int | None = None) -> None:
    """|a>|b>|c> -> |f(a)>|f'(b)>|c*f'(b)> as two opaque blocks.

    Expects the Transfer to have already copied the value into ``zero_reg``.
    """
    fmt = s.format
    if times_cost is None:
        times_cost = DEFAULT_GATE_COSTS["times"]

    def f_fprime(a_bits, b_bits):
        a = fmt.bits_to_raw(a_bits)
        b = fmt.bits_to_raw(b_bits)
        with mpmath.workprec(fmt.working_precision):
            xa = raw_to_mpf(a, fmt)
            xb = raw_to_mpf(b, fmt)
            p.check_domain(xa)
            p.check_domain(xb)
            fa = encode_raw(p.eval(xa), fmt)
            fb = encode_raw(p.deriv(xb), fmt)
        return fmt.raw_to_bits(fa), fmt.raw_to_bits(fb)

    def product(b_bits, c_bits):
        b = fmt.bits_to_raw(b_bits)
        c = fmt.bits_to_raw(c_bits)
        return b_bits, fmt.raw_to_bits(mul_raw(c, b, fmt))

    machine.apply_prim_block(f"{p.name}_with_derivative", [s.val_reg, s.zero_reg], f_fprime,
                             p.gate_cost)
    machine.apply_prim_block("times", [s.zero_reg, s.der_reg], product, times_cost)


def _binary_block(name, s1, s2, machine, fn, cost):
    fmt = s1.format
    if s2.format != fmt:
        raise ValueError("valder states must share one format")
    out = _alloc_output(machine, fmt)
    regs = [s1.val_reg, s1.der_reg, s2.val_reg, s2.der_reg, out.val_reg, out.der_reg]
    # a register may appear twice when an operand is reused (x*x)
    uniq = list(dict.fromkeys(regs))

    def compute(*patterns):
        by_reg = dict(zip(uniq, patterns))
        v1, d1, v2, d2 = (fmt.bits_to_raw(by_reg[r]) for r in regs[:4])
        v, d = fn(v1, d1, v2, d2)
        by_reg[out.val_reg] = fmt.raw_to_bits(v)
        by_reg[out.der_reg] = fmt.raw_to_bits(d)
        return [by_reg[r] for r in uniq]

    machine.apply_prim_block(name, uniq, compute, cost)
    return out


def _unary_block(name, s, machine, fn, cost):
    fmt = s.format
    out = _alloc_output(machine, fmt)
    regs = [s.val_reg, s.der_reg, out.val_reg, out.der_reg]

    def compute(vb, db, _ov, _od):
        v, d = fn(fmt.bits_to_raw(vb), fmt.bits_to_raw(db))
        return vb, db, fmt.raw_to_bits(v), fmt.raw_to_bits(d)

    machine.apply_prim_block(name, regs, compute, cost)
    return out


def ad_plus(s1: ValderState, s2: ValderState, machine: RegisterMachine,
            cost: int = DEFAULT_GATE_COSTS["plus"]) -> ValderState:
    fmt = s1.format

    def fn(v1, d1, v2, d2):
        return check_raw(v1 + v2, fmt), check_raw(d1 + d2, fmt)

    return _binary_block("plus", s1, s2, machine, fn, cost)


def ad_times(s1: ValderState, s2: ValderState, machine: RegisterMachine,
             cost: int = DEFAULT_GATE_COSTS["times"]) -> ValderState:
    fmt = s1.format
    b = fmt.frac_bits

    def fn(v1, d1, v2, d2):
        return (check_raw((v1 * v2) >> b, fmt),
                check_raw((d1 * v2 + v1 * d2) >> b, fmt))

    return _binary_block("times", s1, s2, machine, fn, cost)


def ad_minus(s: ValderState, machine: RegisterMachine,
             cost: int = DEFAULT_GATE_COSTS["minus"]) -> ValderState:
    fmt = s.format
    return _unary_block("minus", s, machine,
                        lambda v, d: (check_raw(-v, fmt), check_raw(-d, fmt)), cost)


def ad_reciprocal(s: ValderState, machine: RegisterMachine,
                  cost: int = DEFAULT_GATE_COSTS["reciprocal"]) -> ValderState:
    fmt = s.format
    b = fmt.frac_bits

    def fn(v, d):
        if v == 0:
            raise DomainError("reciprocal is undefined at 0")
        # 1/v and -d/v^2 on the 2^-b grid, each floored once
        return (check_raw((1 << (2 * b)) // v, fmt),
                check_raw((-d << (2 * b)) // (v * v), fmt))

    return _unary_block("reciprocal", s, machine, fn, cost)


ARITHMETIC_OPS = {
    "plus": ad_plus,
    "times": ad_times,
    "minus": ad_minus,
    "reciprocal": ad_reciprocal,
}

