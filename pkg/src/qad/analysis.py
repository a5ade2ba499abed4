"""Classical forward-mode oracles and first-order truncation error bounds.

``oracle_eval`` is plain double-precision dual-number arithmetic.
``oracle_fixed`` repeats the same recurrence with every node output floored
onto the fixed-point grid; it shares no code with the register pipeline and is
the bit-exact reference for :func:`qad.engine.run`.

``error_bounds`` assigns a truncation bound to every node value (eps) and
derivative (delta), then propagates them to the output with sensitivities
taken at the exact trajectory:

    bound_value = sum_k |dF/d eps_k| * eps_k
    bound_deriv = sum_k |dG/d eps_k| * eps_k + sum_k |dG/d delta_k| * delta_k

where F is the output value and G the output derivative seen as functions of
additive perturbations of every node.  The sensitivities come from one reverse
sweep over the graph, which needs second derivatives of the primitives
because each derivative register depends on the value it was evaluated at.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import mpmath

from .errors import DomainError, SingularityWarning
from .fixedpoint import FixedPointFormat, encode_raw, raw_to_float
from .graphir import CompGraph
from .primitives import DEFAULT_GATE_COSTS, PRIMITIVES


@dataclass(frozen=True)
class DualNumber:
    v: float
    d: float

    def __add__(self, other):
        return DualNumber(self.v + other.v, self.d + other.d)

    def __neg__(self):
        return DualNumber(-self.v, -self.d)

    def __mul__(self, other):
        return DualNumber(self.v * other.v, self.d * other.v + self.v * other.d)

    def reciprocal(self):
        if self.v == 0:
            raise DomainError("reciprocal is undefined at 0")
        return DualNumber(1 / self.v, -self.d / (self.v * self.v))


def _float_fn(p, which):
    fn = getattr(p, which)

    def call(x):
        with mpmath.workprec(53):
            return float(fn(mpmath.mpf(x)))
    return call


def _apply_primitive(name, a: DualNumber) -> DualNumber:
    p = PRIMITIVES[name]
    p.check_domain(mpmath.mpf(a.v))
    f = _float_fn(p, "eval")(a.v)
    fp = _float_fn(p, "deriv")(a.v)
    return DualNumber(f, fp * a.d)


def oracle_trace(g: CompGraph, x0: float) -> list[DualNumber]:
    """Exact (double precision) valder of every node, in graph order."""
    vals: list[DualNumber] = []
    for n in g.nodes:
        if n.kind == "input":
            out = DualNumber(float(x0), 1.0)
        elif n.kind == "const":
            out = DualNumber(float(n.value), 0.0)
        elif n.op == "plus":
            out = vals[n.preds[0]] + vals[n.preds[1]]
        elif n.op == "times":
            out = vals[n.preds[0]] * vals[n.preds[1]]
        elif n.op == "minus":
            out = -vals[n.preds[0]]
        elif n.op == "reciprocal":
            out = vals[n.preds[0]].reciprocal()
        else:
            out = _apply_primitive(n.op, vals[n.preds[0]])
        if not (math.isfinite(out.v) and math.isfinite(out.d)):
            raise OverflowError(f"non-finite result at {n.describe()}")
        vals.append(out)
    return vals


def oracle_eval(g: CompGraph, x0: float) -> DualNumber:
    return oracle_trace(g, x0)[g.output]


def _floor_grid(x, fmt: FixedPointFormat) -> Fraction:
    return Fraction(encode_raw(x, fmt), 1 << fmt.frac_bits)


def oracle_fixed_trace(g: CompGraph, x0: float, fmt: FixedPointFormat) -> list[tuple[Fraction, Fraction]]:
    """Classical twin of the register pipeline, one floor per node output.

    Primitive derivatives are floored twice, matching the AD(f) block: first
    f'(v) itself, then its product with the incoming derivative.
    """
    vals: list[tuple[Fraction, Fraction]] = []
    for n in g.nodes:
        if n.kind == "input":
            out = (_floor_grid(x0, fmt), _floor_grid(1, fmt))
        elif n.kind == "const":
            out = (_floor_grid(n.value, fmt), Fraction(0))
        elif n.op == "plus":
            (v1, d1), (v2, d2) = (vals[p] for p in n.preds)
            out = (_floor_grid(v1 + v2, fmt), _floor_grid(d1 + d2, fmt))
        elif n.op == "times":
            (v1, d1), (v2, d2) = (vals[p] for p in n.preds)
            out = (_floor_grid(v1 * v2, fmt), _floor_grid(d1 * v2 + v1 * d2, fmt))
        elif n.op == "minus":
            v, d = vals[n.preds[0]]
            out = (_floor_grid(-v, fmt), _floor_grid(-d, fmt))
        elif n.op == "reciprocal":
            v, d = vals[n.preds[0]]
            if v == 0:
                raise DomainError("reciprocal is undefined at 0")
            out = (_floor_grid(1 / v, fmt), _floor_grid(-d / (v * v), fmt))
        else:
            p = PRIMITIVES[n.op]
            v, d = vals[n.preds[0]]
            with mpmath.workprec(fmt.working_precision):
                x = mpmath.mpf(v.numerator) / v.denominator
                p.check_domain(x)
                fv = _floor_grid(p.eval(x), fmt)
                fp = _floor_grid(p.deriv(x), fmt)
            out = (fv, _floor_grid(fp * d, fmt))
        vals.append(out)
    return vals


def oracle_fixed(g: CompGraph, x0: float, fmt: FixedPointFormat) -> DualNumber:
    v, d = oracle_fixed_trace(g, x0, fmt)[g.output]
    return DualNumber(float(v), float(d))


# -- cost -------------------------------------------------------------------------

@dataclass(frozen=True)
class CostReport:
    total: int
    bound: int
    r: int
    c_max: int
    per_node: dict[int, int]

    def to_json(self) -> dict:
        return {"total": self.total, "bound": self.bound, "r": self.r,
                "c_max": self.c_max,
                "per_node": {str(k): v for k, v in self.per_node.items()}}


def cost_estimate(g: CompGraph, gate_costs: Mapping[str, int] | None = None) -> CostReport:
    """Sum of per-node gate costs and the uniform bound r * c_max."""
    costs = {**DEFAULT_GATE_COSTS, **(gate_costs or {})}
    per_node = {n.id: costs[n.op] for n in g.nodes if n.kind in ("primitive", "arith")}
    c_max = max(per_node.values(), default=0)
    return CostReport(sum(per_node.values()), g.r * c_max, g.r, c_max, per_node)


# -- error bounds -------------------------------------------------------------------

def reciprocal_error(frac_bits: int) -> float:
    """Truncation bound (2 + log2 b) / 2^b of a fixed-point inverse."""
    return (2 + math.log2(max(frac_bits, 1))) * math.ldexp(1.0, -frac_bits)


@dataclass
class ErrorReport:
    frac_bits: int
    eps: list[float]
    delta: list[float]
    F_sens: list[float]
    G_sens_eps: list[float]
    G_sens_delta: list[float]
    bound_value: float
    bound_deriv: float
    cost: CostReport
    exact_value: float = 0.0
    exact_derivative: float = 0.0

    @property
    def max_sensitivity(self) -> float:
        return max(self.F_sens + self.G_sens_eps + self.G_sens_delta, default=0.0)

    def to_json(self) -> dict:
        return {
            "frac_bits": self.frac_bits,
            "eps": self.eps,
            "delta": self.delta,
            "F_sens": self.F_sens,
            "G_sens_eps": self.G_sens_eps,
            "G_sens_delta": self.G_sens_delta,
            "bound_value": self.bound_value,
            "bound_deriv": self.bound_deriv,
            "max_sensitivity": self.max_sensitivity,
            "exact_value": self.exact_value,
            "exact_derivative": self.exact_derivative,
            "cost_bound": self.cost.to_json(),
        }


def node_error_bounds(g: CompGraph, x0: float, fmt: FixedPointFormat,
                      trace: list[DualNumber]) -> tuple[list[float], list[float]]:
    """Per-node (eps_k, delta_k); delta is indexed by node, delta[0] = 0."""
    b = fmt.frac_bits
    ulp = math.ldexp(1.0, -b)
    eps, delta = [], []
    for n in g.nodes:
        if n.kind in ("input", "const"):
            exact = Fraction(x0 if n.kind == "input" else n.value)
            eps.append(float(exact - _floor_grid(exact, fmt)))
            delta.append(0.0)
        elif n.op == "reciprocal":
            eps.append(reciprocal_error(b))
            delta.append(reciprocal_error(b))
        elif n.kind == "primitive":
            # f'(v) is floored, then scaled by the incoming derivative and floored again
            eps.append(ulp)
            delta.append(ulp * (1 + abs(trace[n.preds[0]].d)))
        else:
            eps.append(ulp)
            delta.append(ulp)
    return eps, delta


def sensitivities(g: CompGraph, trace: list[DualNumber]):
    """Reverse sweep: (dF/dv_k, dG/dv_k, dG/dd_k) for every node k."""
    size = len(g.nodes)
    aFv = [0.0] * size
    aGv = [0.0] * size
    aGd = [0.0] * size
    out = g.output
    aFv[out] = 1.0
    aGd[out] = 1.0
    for n in reversed(g.nodes):
        k = n.id
        if n.kind in ("input", "const"):
            continue
        if n.op == "plus":
            for p in n.preds:
                aFv[p] += aFv[k]
                aGv[p] += aGv[k]
                aGd[p] += aGd[k]
        elif n.op == "times":
            (p1, p2) = n.preds
            a, b = trace[p1], trace[p2]
            # v = v1 v2 ; d = d1 v2 + v1 d2
            aFv[p1] += aFv[k] * b.v
            aFv[p2] += aFv[k] * a.v
            aGv[p1] += aGv[k] * b.v + aGd[k] * b.d
            aGv[p2] += aGv[k] * a.v + aGd[k] * a.d
            aGd[p1] += aGd[k] * b.v
            aGd[p2] += aGd[k] * a.v
        else:
            (p,) = n.preds
            u = trace[p]
            prim = PRIMITIVES[n.op]
            with mpmath.workprec(53):
                x = mpmath.mpf(u.v)
                f1 = float(prim.deriv(x))
                f2 = float(prim.deriv2(x))
            # v = f(u) ; d = f'(u) du
            aFv[p] += aFv[k] * f1
            aGv[p] += aGv[k] * f1 + aGd[k] * f2 * u.d
            aGd[p] += aGd[k] * f1
    return aFv, aGv, aGd


def error_bounds(g: CompGraph, x0: float, fmt: FixedPointFormat,
                 singular_threshold: float = 1e6,
                 gate_costs: Mapping[str, int] | None = None) -> ErrorReport:
    trace = oracle_trace(g, x0)
    eps, delta_all = node_error_bounds(g, x0, fmt, trace)
    aFv, aGv, aGd = sensitivities(g, trace)
    F_sens = [abs(a) for a in aFv]
    G_eps = [abs(a) for a in aGv]
    G_delta = [abs(a) for a in aGd[1:]]
    delta = delta_all[1:]
    bound_value = sum(s * e for s, e in zip(F_sens, eps))
    bound_deriv = (sum(s * e for s, e in zip(G_eps, eps))
                   + sum(s * e for s, e in zip(G_delta, delta)))
    report = ErrorReport(fmt.frac_bits, eps, delta, F_sens, G_eps, G_delta,
                         bound_value, bound_deriv, cost_estimate(g, gate_costs),
                         trace[g.output].v, trace[g.output].d)
    if report.max_sensitivity > singular_threshold:
        warnings.warn(
            f"sensitivity {report.max_sensitivity:.3g} exceeds {singular_threshold:g}; "
            "first-order bound may be unreliable near a singularity",
            SingularityWarning, stacklevel=2)
    return report
