"""Qubit registers restricted to computational basis states.

Every operator used by the differentiation pipeline maps basis states to
basis states, so a register is just a bit pattern.  Qubit ``i`` of a register
is position ``i`` of its big-endian bit string (qubit 0 is the sign bit).
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

from .errors import AncillaExhaustedError, ResetRequiredError, WidthError

GATE_KINDS = ("X", "CNOT", "SWAP", "MEASURE", "PRIM_BLOCK")
# bookkeeping records, never counted as gates
BOOK_KINDS = ("ALLOC", "RETIRE")


@dataclass(frozen=True)
class GateEvent:
    kind: str
    operands: tuple
    detail: dict | None = None

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "operands": [list(op) if isinstance(op, tuple) else op for op in self.operands],
            "detail": self.detail,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GateEvent":
        ops = tuple(tuple(op) if isinstance(op, list) else op for op in obj["operands"])
        return cls(obj["kind"], ops, obj.get("detail"))


def _bitstring(bits: int, width: int) -> str:
    return format(bits, f"0{width}b")


class RegisterMachine:
    """Mutable single-run context: registers, ancilla pool, counters, trace.

    ``register_budget`` caps the number of simultaneously live registers;
    exceeding it raises :class:`AncillaExhaustedError` like an empty pool.
    """

    def __init__(self, ancilla_pool: int = 0, register_budget: int | None = None,
                 trace: bool = False):
        if ancilla_pool < 0:
            raise ValueError("ancilla_pool must be non-negative")
        self.ancilla_pool = ancilla_pool
        self.ancilla_used = 0
        self.register_budget = register_budget
        self.classical_bits: dict[str, str] = {}
        self.gate_counter: Counter = Counter()
        self.trace: list[GateEvent] | None = [] if trace else None
        self._widths: dict[str, int] = {}
        self._states: dict[str, int] = {}
        self._next_id = 0
        self.retired = 0
        self.peak_live = 0

    # -- bookkeeping ------------------------------------------------------

    def _log(self, kind, operands, detail=None):
        if self.trace is not None:
            self.trace.append(GateEvent(kind, tuple(operands), detail))

    def _check(self, reg):
        if reg not in self._widths:
            raise KeyError(f"no live register {reg!r}")

    @property
    def registers(self) -> list[tuple[str, int, str]]:
        return [(r, w, _bitstring(self._states[r], w)) for r, w in self._widths.items()]

    @property
    def live_count(self) -> int:
        return len(self._widths)

    def width(self, reg: str) -> int:
        self._check(reg)
        return self._widths[reg]

    def bits(self, reg: str) -> int:
        self._check(reg)
        return self._states[reg]

    def bitstring(self, reg: str) -> str:
        return _bitstring(self.bits(reg), self.width(reg))

    def is_zero(self, reg: str) -> bool:
        return self.bits(reg) == 0

    def alloc_register(self, width: int, init: str | int | None = None) -> str:
        if width < 1:
            raise WidthError(f"register width must be >= 1, got {width}")
        if init is None:
            state = 0
        elif isinstance(init, str):
            if len(init) != width or set(init) - {"0", "1"}:
                raise WidthError(f"init {init!r} is not a {width}-bit string")
            state = int(init, 2)
        else:
            if not 0 <= init < (1 << width):
                raise WidthError(f"init {init} does not fit {width} bits")
            state = init
        if self.register_budget is not None and self.live_count >= self.register_budget:
            raise AncillaExhaustedError(self.live_count + 1, self.register_budget,
                                        "live registers")
        reg = f"r{self._next_id}"
        self._next_id += 1
        self._widths[reg] = width
        self._states[reg] = state
        self.peak_live = max(self.peak_live, self.live_count)
        self._log("ALLOC", [reg], {"width": width, "init": _bitstring(state, width)})
        return reg

    def retire(self, reg: str) -> None:
        """Drop a register from the live set without resetting it."""
        self._check(reg)
        del self._widths[reg]
        del self._states[reg]
        self.retired += 1
        self._log("RETIRE", [reg])

    # -- elementary gates -------------------------------------------------

    def _mask(self, reg, i):
        w = self._widths[reg]
        if not 0 <= i < w:
            raise IndexError(f"qubit {i} out of range for {reg} (width {w})")
        return 1 << (w - 1 - i)

    def apply_x(self, reg: str, i: int) -> None:
        self._check(reg)
        self._states[reg] ^= self._mask(reg, i)
        self.gate_counter["X"] += 1
        self._log("X", [(reg, i)])

    def apply_cnot(self, creg: str, ci: int, treg: str, ti: int) -> None:
        self._check(creg)
        self._check(treg)
        if self._states[creg] & self._mask(creg, ci):
            self._states[treg] ^= self._mask(treg, ti)
        self.gate_counter["CNOT"] += 1
        self._log("CNOT", [(creg, ci), (treg, ti)])

    def measure(self, reg: str, i: int) -> int:
        """Z-basis measurement; deterministic on basis states."""
        self._check(reg)
        bit = 1 if self._states[reg] & self._mask(reg, i) else 0
        self.gate_counter["MEASURE"] += 1
        self._log("MEASURE", [(reg, i)], {"result": bit})
        return bit

    # -- composite operators ----------------------------------------------

    def apply_transfer(self, src: str, dst: str) -> None:
        """CNOT fan-out of ``src`` onto the all-zero register ``dst``."""
        self._check(src)
        self._check(dst)
        ws, wd = self._widths[src], self._widths[dst]
        if wd < ws:
            raise WidthError(f"transfer target {dst} has {wd} qubits, source needs {ws}")
        if self._states[dst]:
            raise ResetRequiredError(
                f"transfer target {dst} holds {self.bitstring(dst)}, expected all zeros"
            )
        offset = wd - ws
        for i in range(ws):
            self.apply_cnot(src, i, dst, i + offset)

    def reset_swap(self, target: str) -> None:
        """Swap every qubit of ``target`` with a fresh ancilla, which is retired."""
        w = self.width(target)
        if self.ancilla_pool < w:
            raise AncillaExhaustedError(w, self.ancilla_pool)
        for i in range(w):
            k = self.ancilla_used
            # the ancilla takes the old bit and is never reused
            self._states[target] &= ~self._mask(target, i)
            self.ancilla_pool -= 1
            self.ancilla_used += 1
            self.gate_counter["SWAP"] += 1
            self._log("SWAP", [(target, i), ("ancilla", k)])

    def reset_hybrid(self, target: str) -> str:
        """Measure each qubit, flip it, flip again iff the outcome was 0."""
        w = self.width(target)
        outcome = []
        for i in range(w):
            c = self.measure(target, i)
            outcome.append(str(c))
            self.apply_x(target, i)
            if c == 0:
                self.apply_x(target, i)
        result = "".join(outcome)
        self.classical_bits[target] = result
        return result

    def reset(self, target: str, mode: str) -> None:
        if mode == "swap":
            self.reset_swap(target)
        elif mode == "hybrid":
            self.reset_hybrid(target)
        else:
            raise ValueError(f"unknown reset mode {mode!r}")

    def apply_prim_block(self, name: str, inputs: Sequence[str],
                         compute: Callable[..., Sequence[int]],
                         gate_cost: int | None = None) -> None:
        """Opaque block: ``compute(*patterns)`` returns the new patterns.

        Registers change only if ``compute`` returns without raising.
        """
        for reg in inputs:
            self._check(reg)
        new = compute(*(self._states[r] for r in inputs))
        if len(new) != len(inputs):
            raise ValueError(f"block {name} returned {len(new)} patterns for {len(inputs)} registers")
        for reg, bits in zip(inputs, new):
            if not 0 <= bits < (1 << self._widths[reg]):
                raise WidthError(f"block {name} produced a pattern wider than {reg}")
        for reg, bits in zip(inputs, new):
            self._states[reg] = bits
        self.gate_counter["PRIM_BLOCK"] += 1
        if self.trace is not None:
            self._log("PRIM_BLOCK", list(inputs), {
                "name": name,
                "gate_cost": gate_cost,
                "outputs": [self.bitstring(r) for r in inputs],
            })

    # -- serialization ----------------------------------------------------

    def trace_lines(self) -> Iterator[str]:
        for ev in self.trace or ():
            yield json.dumps(ev.to_json(), sort_keys=True)

    def dump_trace(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.trace_lines():
                fh.write(line + "\n")


def load_trace(path) -> list[GateEvent]:
    with open(path, encoding="utf-8") as fh:
        return [GateEvent.from_json(json.loads(line)) for line in fh if line.strip()]


def replay(events: Iterable[GateEvent]) -> Iterator[tuple[GateEvent, dict[str, str]]]:
    """Re-execute a trace, yielding each event with the register states after it."""
    widths: dict[str, int] = {}
    states: dict[str, int] = {}

    def mask(reg, i):
        return 1 << (widths[reg] - 1 - i)

    for ev in events:
        if ev.kind == "ALLOC":
            reg = ev.operands[0]
            widths[reg] = ev.detail["width"]
            states[reg] = int(ev.detail["init"], 2)
        elif ev.kind == "RETIRE":
            reg = ev.operands[0]
            del widths[reg], states[reg]
        elif ev.kind == "X":
            reg, i = ev.operands[0]
            states[reg] ^= mask(reg, i)
        elif ev.kind == "CNOT":
            (creg, ci), (treg, ti) = ev.operands
            if states[creg] & mask(creg, ci):
                states[treg] ^= mask(treg, ti)
        elif ev.kind == "SWAP":
            reg, i = ev.operands[0]
            states[reg] &= ~mask(reg, i)
        elif ev.kind == "PRIM_BLOCK":
            for reg, out in zip(ev.operands, ev.detail["outputs"]):
                states[reg] = int(out, 2)
        # MEASURE leaves the basis state unchanged
        yield ev, {r: _bitstring(states[r], widths[r]) for r in widths}
