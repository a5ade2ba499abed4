"""Expression front end: parser, computational graph and qubit sizing.

Grammar (usual precedence, unary minus binds tightest)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | primary
    primary := NUMBER | "x" | FUNC "(" expr ")" | "(" expr ")"

There is no power operator; write ``x*x``.  Binary minus is lowered to
``plus(a, neg(b))`` and division to ``times(a, reciprocal(b))`` so the graph
only ever contains the catalogue operations.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ParseError
from .fixedpoint import FixedPointFormat

UNARY_OPS = ("neg", "reciprocal", "exp", "log", "sqrt", "sin", "cos", "tan", "asin", "atan")
BINARY_OPS = ("plus", "times")

FUNCTIONS = {
    "exp": "exp", "log": "log", "sqrt": "sqrt", "sin": "sin", "cos": "cos",
    "tan": "tan", "asin": "asin", "arcsin": "asin", "atan": "atan",
    "arctan": "atan", "reciprocal": "reciprocal",
}

# AST op -> graph op (graph names follow the primitive table)
GRAPH_OP = {
    "neg": "minus", "asin": "arcsin", "atan": "arctan", "reciprocal": "reciprocal",
    "exp": "exp", "log": "log", "sqrt": "sqrt", "sin": "sin", "cos": "cos",
    "tan": "tan", "plus": "plus", "times": "times",
}
ARITH_GRAPH_OPS = ("plus", "times", "minus", "reciprocal")


# -- AST ----------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Var | Const | Unary | Binary


def to_text(e: Expr) -> str:
    """Canonical printer; ``parse(to_text(e)) == e`` for non-negative literals."""
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"-({to_text(e.arg)})"
        return f"{e.op}({to_text(e.arg)})"
    sym = "+" if e.op == "plus" else "*"
    return f"({to_text(e.left)} {sym} {to_text(e.right)})"


# -- parser ---------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/()])
""", re.VERBOSE)

_PRIMARY_START = frozenset({"number", "x", "function", "(", "-"})


def _tokenize(text):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, _PRIMARY_START)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.peek()
        if text != value or kind == "end":
            raise ParseError(f"unexpected {text or 'end of input'!r}", pos, {value})
        return self.take()

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, op, _ = self.take()
            rhs = self.term()
            node = Binary("plus", node, rhs if op == "+" else Unary("neg", rhs))
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, _ = self.take()
            rhs = self.unary()
            node = Binary("times", node, rhs if op == "*" else Unary("reciprocal", rhs))
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Unary("neg", self.unary())
        return self.primary()

    def primary(self):
        kind, text, pos = self.peek()
        if kind == "num":
            self.take()
            return Const(float(text))
        if kind == "name":
            self.take()
            if text == "x":
                return Var()
            if text not in FUNCTIONS:
                raise ParseError(f"unknown identifier {text!r}", pos,
                                 {"x", *FUNCTIONS})
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Unary(FUNCTIONS[text], arg)
        if (kind, text) == ("op", "("):
            self.take()
            inner = self.expr()
            self.expect(")")
            return inner
        raise ParseError(f"unexpected {text or 'end of input'!r}", pos, _PRIMARY_START)


def parse(text: str) -> Expr:
    p = _Parser(text)
    e = p.expr()
    kind, tok, pos = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected {tok!r}", pos, {"+", "-", "*", "/", "end of input"})
    return e


# -- computational graph ---------------------------------------------------------

@dataclass(frozen=True)
class Node:
    id: int
    kind: str  # input | const | primitive | arith
    op: str | None = None
    preds: tuple[int, ...] = ()
    value: float | None = None

    @property
    def label(self) -> str:
        return f"s_{self.id + 1}"

    def describe(self) -> str:
        if self.kind == "input":
            return f"{self.label} ≡ x"
        if self.kind == "const":
            return f"{self.label} ≡ {self.value!r}"
        args = ", ".join(f"s_{p + 1}" for p in self.preds)
        return f"{self.label} ≡ {self.op}({args})"


@dataclass(frozen=True)
class CompGraph:
    nodes: tuple[Node, ...]

    @property
    def r(self) -> int:
        return len(self.nodes) - 1

    @property
    def output(self) -> int:
        return self.nodes[-1].id

    def consumers(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        for n in self.nodes:
            for p in dict.fromkeys(n.preds):
                out[p].append(n.id)
        return out

    def edges(self) -> list[tuple[int, int]]:
        return [(p, n.id) for n in self.nodes for p in n.preds]

    def count(self, kind: str) -> int:
        return sum(1 for n in self.nodes if n.kind == kind)


def build_graph(e: Expr) -> CompGraph:
    """Post-order lowering with the input node first and shared by all uses."""
    nodes = [Node(0, "input")]

    def add(kind, op=None, preds=(), value=None):
        nodes.append(Node(len(nodes), kind, op, tuple(preds), value))
        return len(nodes) - 1

    def visit(node):
        if isinstance(node, Var):
            return 0
        if isinstance(node, Const):
            return add("const", value=float(node.value))
        if isinstance(node, Unary):
            arg = visit(node.arg)
            op = GRAPH_OP[node.op]
            return add("arith" if op in ARITH_GRAPH_OPS else "primitive", op, [arg])
        left = visit(node.left)
        right = visit(node.right)
        return add("arith", GRAPH_OP[node.op], [left, right])

    out = visit(e)
    if out != len(nodes) - 1:
        # bare "x": the input itself is the output
        assert out == 0 and len(nodes) == 1
    return CompGraph(tuple(nodes))


def to_dot(g: CompGraph) -> str:
    lines = ["digraph qad {", "  rankdir=BT;"]
    for n in g.nodes:
        lines.append(f'  n{n.id} [label="{n.describe()}"];')
    for p, c in g.edges():
        lines.append(f"  n{p} -> n{c};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- schedule and sizing ------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    node: int
    fanout: bool  # copy the predecessor before an in-place block
    retire: tuple[int, ...]  # predecessors whose registers are dropped afterwards


@dataclass(frozen=True)
class SizingPlan:
    format: FixedPointFormat
    reset_mode: str
    resets: int
    ancilla_budget: int
    peak_valders: int
    register_count: int
    schedule: tuple[Step, ...] = field(repr=False)


def schedule(g: CompGraph) -> tuple[tuple[Step, ...], int]:
    """Topological execution plan and the peak number of live valder states.

    A primitive block rewrites its valder in place, so it works on a copy
    when the predecessor is still needed later.  Arithmetic operators write
    a fresh valder; operands are retired after their last use.
    """
    remaining = {n.id: len(c) for n, c in zip(g.nodes, g.consumers().values())}
    live = 0
    peak = 0
    steps = []
    for n in g.nodes:
        fanout = False
        retire = []
        if n.kind in ("input", "const"):
            live += 1
        elif n.kind == "primitive":
            (p,) = n.preds
            remaining[p] -= 1
            if remaining[p] > 0:
                fanout = True
                live += 1
        else:
            live += 1
            for p in dict.fromkeys(n.preds):
                remaining[p] -= 1
                if remaining[p] == 0 and p != g.output:
                    retire.append(p)
        peak = max(peak, live)
        live -= len(retire)
        steps.append(Step(n.id, fanout, tuple(retire)))
    return tuple(steps), peak


def size_plan(g: CompGraph, fmt: FixedPointFormat, reset_mode: str = "hybrid") -> SizingPlan:
    if reset_mode not in ("swap", "hybrid"):
        raise ValueError(f"unknown reset mode {reset_mode!r}")
    steps, peak = schedule(g)
    resets = g.count("primitive")
    ancilla = resets * fmt.total_bits if reset_mode == "swap" else 0
    return SizingPlan(fmt, reset_mode, resets, ancilla, peak, 3 * peak, steps)
