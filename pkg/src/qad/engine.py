"""Runs the differentiation pipeline over a computational graph.

Primitive nodes execute the block Transfer -> AD(f) -> Reset on their valder
state; arithmetic nodes call the valder operators.  Nodes are visited in the
graph's topological order following :func:`qad.graphir.schedule`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

from .errors import QADError
from .fixedpoint import FixedPointFormat, encode_raw, raw_to_float
from .graphir import CompGraph, size_plan
from .primitives import (
    ARITHMETIC_OPS,
    DEFAULT_GATE_COSTS,
    PRIMITIVES,
    ValderState,
    ad_apply,
    alloc_valder,
)
from .registers import GateEvent, RegisterMachine


@dataclass(frozen=True)
class RunConfig:
    x0: float
    format: FixedPointFormat
    reset_mode: str = "hybrid"
    trace_enabled: bool = False
    gate_costs: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_GATE_COSTS))


@dataclass(frozen=True)
class NodeResult:
    node: int
    label: str
    op: str | None
    v_raw: int
    d_raw: int
    v: float
    d: float


@dataclass
class RunResult:
    value: float
    derivative: float
    value_raw: int
    derivative_raw: int
    format: FixedPointFormat
    gate_counts: dict[str, int]
    ancilla_used: int
    per_node: list[NodeResult]
    resets: int = 0
    fanouts: int = 0
    retired_registers: int = 0
    peak_registers: int = 0
    trace: list[GateEvent] | None = None

    def to_json(self) -> dict:
        fmt = self.format
        bits = lambda raw: format(fmt.raw_to_bits(raw), f"0{fmt.total_bits}b")
        return {
            "value": self.value,
            "derivative": self.derivative,
            "value_bits": bits(self.value_raw),
            "derivative_bits": bits(self.derivative_raw),
            "format": {"int_bits": fmt.int_bits, "frac_bits": fmt.frac_bits},
            "gate_counts": dict(sorted(self.gate_counts.items())),
            "ancilla_used": self.ancilla_used,
            "resets": self.resets,
            "fanouts": self.fanouts,
            "retired_registers": self.retired_registers,
            "peak_registers": self.peak_registers,
            "per_node": [
                {"node": n.node, "label": n.label, "op": n.op, "v": n.v, "d": n.d,
                 "v_bits": bits(n.v_raw), "d_bits": bits(n.d_raw)}
                for n in self.per_node
            ],
        }


def fanout_valder(s: ValderState, machine: RegisterMachine) -> ValderState:
    """Independent copy of ``s`` on fresh registers via three Transfers."""
    n = s.format.total_bits
    regs = [machine.alloc_register(n) for _ in range(3)]
    copy = ValderState(*regs, s.format)
    for src, dst in zip(s.registers, copy.registers):
        machine.apply_transfer(src, dst)
    return copy


def apply_block(p, s: ValderState, machine: RegisterMachine, reset_mode: str,
                times_cost: int) -> None:
    """Transfer, AD(f), Reset on the middle register."""
    machine.apply_transfer(s.val_reg, s.zero_reg)
    ad_apply(p, s, machine, times_cost)
    machine.reset(s.zero_reg, reset_mode)


def run(g: CompGraph, cfg: RunConfig) -> RunResult:
    fmt = cfg.format
    plan = size_plan(g, fmt, cfg.reset_mode)
    machine = RegisterMachine(ancilla_pool=plan.ancilla_budget,
                              register_budget=plan.register_count,
                              trace=cfg.trace_enabled)
    costs = {**DEFAULT_GATE_COSTS, **cfg.gate_costs}
    states: dict[int, ValderState] = {}
    per_node: list[NodeResult] = []
    one = encode_raw(1, fmt)
    assert raw_to_float(one, fmt) == 1.0, "initial derivative must encode 1 exactly"
    fanouts = 0

    for step in plan.schedule:
        node = g.nodes[step.node]
        try:
            if node.kind == "input":
                s = alloc_valder(machine, fmt, encode_raw(cfg.x0, fmt), one)
            elif node.kind == "const":
                s = alloc_valder(machine, fmt, encode_raw(node.value, fmt), 0)
            elif node.kind == "primitive":
                (p,) = node.preds
                if step.fanout:
                    s = fanout_valder(states[p], machine)
                    fanouts += 1
                else:
                    s = states.pop(p)
                apply_block(PRIMITIVES[node.op], s, machine, cfg.reset_mode,
                            costs["times"])
            else:
                args = [states[p] for p in node.preds]
                s = ARITHMETIC_OPS[node.op](*args, machine, cost=costs[node.op])
        except QADError as exc:
            exc.node = node.id
            exc.node_label = node.describe()
            raise
        for p in step.retire:
            states.pop(p).retire(machine)
        states[node.id] = s
        if node.kind != "input":
            v_raw = s.value_raw(machine)
            d_raw = s.derivative_raw(machine)
            per_node.append(NodeResult(node.id, node.label, node.op, v_raw, d_raw,
                                       raw_to_float(v_raw, fmt), raw_to_float(d_raw, fmt)))

    out = states[g.output]
    v_raw = out.value_raw(machine)
    d_raw = out.derivative_raw(machine)
    return RunResult(
        value=raw_to_float(v_raw, fmt),
        derivative=raw_to_float(d_raw, fmt),
        value_raw=v_raw,
        derivative_raw=d_raw,
        format=fmt,
        gate_counts=dict(machine.gate_counter),
        ancilla_used=machine.ancilla_used,
        per_node=per_node,
        resets=plan.resets,
        fanouts=fanouts,
        retired_registers=machine.retired,
        peak_registers=machine.peak_live,
        trace=machine.trace,
    )


def result_json(result: RunResult) -> str:
    return json.dumps(result.to_json(), sort_keys=True)
