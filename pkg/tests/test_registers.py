import json
import random

import pytest
from hypothesis import given, strategies as st

from qad.errors import AncillaExhaustedError, ResetRequiredError, WidthError
from qad.fixedpoint import FixedPointFormat, encode
from qad.registers import GateEvent, RegisterMachine, load_trace, replay


def test_alloc_register():
    m = RegisterMachine()
    r = m.alloc_register(8, "00000000")
    assert m.bitstring(r) == "00000000"
    one = m.alloc_register(8, "00010000")
    assert m.bitstring(one) == encode(1, FixedPointFormat(4, 4)).bitstring()
    assert sum(m.gate_counter.values()) == 0


def test_alloc_length_mismatch():
    with pytest.raises(WidthError):
        RegisterMachine().alloc_register(4, "101")


def test_transfer_copies_pattern():
    m = RegisterMachine()
    src = m.alloc_register(4, "0101")
    dst = m.alloc_register(4, "0000")
    m.apply_transfer(src, dst)
    assert m.bitstring(src) == "0101"
    assert m.bitstring(dst) == "0101"
    assert m.gate_counter["CNOT"] == 4


def test_transfer_of_zero():
    m = RegisterMachine()
    src = m.alloc_register(4, "0000")
    dst = m.alloc_register(4, "0000")
    m.apply_transfer(src, dst)
    assert m.bitstring(dst) == "0000"


def test_transfer_requires_zero_target():
    m = RegisterMachine()
    src = m.alloc_register(4, "0101")
    dst = m.alloc_register(4, "0001")
    with pytest.raises(ResetRequiredError):
        m.apply_transfer(src, dst)
    assert m.gate_counter["CNOT"] == 0


def test_transfer_width():
    m = RegisterMachine()
    src = m.alloc_register(4, "1101")
    narrow = m.alloc_register(3)
    with pytest.raises(WidthError):
        m.apply_transfer(src, narrow)
    wide = m.alloc_register(6)
    m.apply_transfer(src, wide)
    assert m.bitstring(wide) == "001101"


def test_reset_swap():
    m = RegisterMachine(ancilla_pool=10)
    r = m.alloc_register(4, "1011")
    m.reset_swap(r)
    assert m.bitstring(r) == "0000"
    assert m.ancilla_pool == 6
    assert m.gate_counter["SWAP"] == 4


def test_reset_swap_on_zero_still_swaps():
    m = RegisterMachine(ancilla_pool=4)
    r = m.alloc_register(4)
    m.reset_swap(r)
    assert m.ancilla_pool == 0
    assert m.gate_counter["SWAP"] == 4


def test_reset_swap_exhausted():
    m = RegisterMachine(ancilla_pool=3)
    r = m.alloc_register(8, "11111111")
    with pytest.raises(AncillaExhaustedError) as info:
        m.reset_swap(r)
    assert (info.value.needed, info.value.available) == (8, 3)
    assert m.bitstring(r) == "11111111"


def test_reset_hybrid():
    m = RegisterMachine()
    r = m.alloc_register(4, "1011")
    assert m.reset_hybrid(r) == "1011"
    assert m.bitstring(r) == "0000"
    assert m.classical_bits[r] == "1011"
    assert m.gate_counter["MEASURE"] == 4
    assert m.gate_counter["X"] == 4 + 1


def test_reset_hybrid_zero_flips_twice():
    m = RegisterMachine(trace=True)
    r = m.alloc_register(4)
    assert m.reset_hybrid(r) == "0000"
    assert m.gate_counter["X"] == 8
    per_qubit = [sum(1 for ev in m.trace if ev.kind == "X" and ev.operands[0][1] == i)
                 for i in range(4)]
    assert per_qubit == [2, 2, 2, 2]


def test_reset_hybrid_single_one():
    # measure -> 1, flip -> 0, no second flip
    m = RegisterMachine(trace=True)
    r = m.alloc_register(1, "1")
    assert m.reset_hybrid(r) == "1"
    assert [ev.kind for ev in m.trace[1:]] == ["MEASURE", "X"]


def test_prim_block_times():
    fmt = FixedPointFormat(4, 4)
    m = RegisterMachine(trace=True)
    a = m.alloc_register(8, encode(2, fmt).bitstring())
    b = m.alloc_register(8, encode(3, fmt).bitstring())

    def times(x, y):
        return x, fmt.raw_to_bits((fmt.bits_to_raw(x) * fmt.bits_to_raw(y)) >> fmt.frac_bits)

    m.apply_prim_block("times", [a, b], times, gate_cost=1)
    assert m.bitstring(b) == encode(6, fmt).bitstring()
    assert m.gate_counter["PRIM_BLOCK"] == 1
    assert m.trace[-1].detail["name"] == "times"
    assert m.trace[-1].detail["gate_cost"] == 1


def test_prim_block_failure_leaves_registers():
    m = RegisterMachine()
    a = m.alloc_register(4, "0011")

    def boom(x):
        raise OverflowError("too big")

    with pytest.raises(OverflowError):
        m.apply_prim_block("exp", [a], boom)
    assert m.bitstring(a) == "0011"
    assert m.gate_counter["PRIM_BLOCK"] == 0


def test_register_budget():
    m = RegisterMachine(register_budget=2)
    m.alloc_register(1)
    r = m.alloc_register(1)
    with pytest.raises(AncillaExhaustedError):
        m.alloc_register(1)
    m.retire(r)
    m.alloc_register(1)


def test_trace_json_lines_and_replay(tmp_path):
    m = RegisterMachine(ancilla_pool=4, trace=True)
    src = m.alloc_register(4, "1001")
    dst = m.alloc_register(4)
    m.apply_transfer(src, dst)
    m.reset_swap(dst)
    m.apply_transfer(src, dst)
    m.reset_hybrid(dst)
    path = tmp_path / "trace.jsonl"
    m.dump_trace(path)
    lines = path.read_text().splitlines()
    assert all(set(json.loads(line)) == {"kind", "operands", "detail"} for line in lines)
    events = load_trace(path)
    assert events == m.trace
    *_, (_, final) = replay(events)
    assert final == {src: "1001", dst: "0000"}


@given(st.integers(1, 64), st.data())
def test_transfer_involution(width, data):
    bits = data.draw(st.integers(0, 2**width - 1))
    m = RegisterMachine()
    src = m.alloc_register(width, bits)
    dst = m.alloc_register(width)
    m.apply_transfer(src, dst)
    assert m.bits(dst) == bits
    # second fan-out undoes the first
    for i in range(width):
        m.apply_cnot(src, i, dst, i)
    assert m.is_zero(dst)
    assert m.gate_counter["CNOT"] == 2 * width


@given(st.integers(1, 64), st.data())
def test_reset_variants_agree(width, data):
    bits = data.draw(st.integers(0, 2**width - 1))
    pattern = format(bits, f"0{width}b")
    swap = RegisterMachine(ancilla_pool=width)
    hyb = RegisterMachine()
    rs = swap.alloc_register(width, bits)
    rh = hyb.alloc_register(width, bits)
    swap.reset_swap(rs)
    assert hyb.reset_hybrid(rh) == pattern
    assert swap.bitstring(rs) == hyb.bitstring(rh) == "0" * width
    assert swap.ancilla_used == width and hyb.ancilla_used == 0
    assert hyb.gate_counter["X"] == width + pattern.count("0")


def test_deterministic_traces():
    def go():
        rng = random.Random(7)
        m = RegisterMachine(ancilla_pool=64, trace=True)
        a = m.alloc_register(16, rng.getrandbits(16))
        b = m.alloc_register(16)
        m.apply_transfer(a, b)
        m.reset_hybrid(b)
        m.apply_transfer(a, b)
        m.reset_swap(b)
        return [ev.to_json() for ev in m.trace]

    assert go() == go()
