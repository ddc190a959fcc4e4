"""Classic maximum flow and constructive lifts to power-law solutions.

The maximum flow of a network ignores the power law entirely: it maximises
total generation subject only to flow conservation, line capacities and the
generator/load typing.  It always dominates the power-law-constrained optima
and therefore serves as a cheap upper bound and, in three special cases, as
the exact answer:

* tree networks,
* networks whose every susceptance interval starts at zero,
* networks whose every susceptance interval is unbounded above.

In those cases an optimal acyclic flow can be *lifted* to a full operating
point (angles plus susceptances) certifying that the bound is attained.  The
lift solves a small feasibility LP over phase angles; for the all-intervals-
``[0, t]`` case the explicit scale-the-susceptances construction is also
provided as an independent cross-check.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .linprog import LinearProgram, LpError, solve_lp
from .model import (
    BusKind,
    InjectionSolution,
    LdcSolution,
    Network,
)

__all__ = [
    "MfSolution",
    "LemmaLift",
    "LiftInfeasible",
    "LiftFailure",
    "max_flow",
    "cancel_cycles",
    "lift_flow_to_ldc",
    "mff_via_lemma",
    "scaled_lift_zero_lower",
]

LineId = tuple[str, str]

_SOURCE = object()
_SINK = object()


@dataclass(frozen=True)
class MfSolution:
    injections: InjectionSolution
    value: float


@dataclass(frozen=True)
class LemmaLift:
    """A certified special-case optimum: flow value plus a lifted solution."""

    kind: str  # "tree" | "zero_lower" | "unbounded_upper"
    value: float
    solution: LdcSolution


class LiftInfeasible(Exception):
    """The given flow admits no consistent phase-angle assignment."""


class LiftFailure(Exception):
    """All lift attempts failed; carries diagnostics for inspection."""

    def __init__(self, kind: str, value: float, flow: dict[LineId, float]):
        super().__init__(
            f"{kind}: no optimal flow of value {value} could be lifted "
            f"after retries"
        )
        self.kind = kind
        self.value = value
        self.flow = flow


def max_flow(net: Network, tol: float = 1e-12) -> MfSolution:
    """Maximum throughput ignoring the power law (augmenting-path method).

    Generators hang off a super source and loads feed a super sink, both
    through unlimited arcs; shortest augmenting paths are pushed until none
    remains.  The returned flow is made acyclic before returning.
    """
    arcs: dict[object, dict[object, float]] = {}

    def add_arc(u, v, cap):
        arcs.setdefault(u, {})[v] = arcs.get(u, {}).get(v, 0.0) + cap
        arcs.setdefault(v, {}).setdefault(u, 0.0)

    for ln in net.lines:
        add_arc(ln.a, ln.b, float(ln.capacity))
        add_arc(ln.b, ln.a, float(ln.capacity))
    for bus in net.buses:
        if bus.kind is BusKind.GENERATOR:
            add_arc(_SOURCE, bus.id, math.inf)
        elif bus.kind is BusKind.LOAD:
            add_arc(bus.id, _SINK, math.inf)
    arcs.setdefault(_SOURCE, {})
    arcs.setdefault(_SINK, {})

    sent: dict[tuple, float] = {}

    def residual(u, v) -> float:
        return arcs[u].get(v, 0.0) - sent.get((u, v), 0.0) + sent.get((v, u), 0.0)

    total = 0.0
    while True:
        # BFS for the shortest augmenting path.
        parent = {_SOURCE: None}
        queue = [_SOURCE]
        while queue and _SINK not in parent:
            nxt = []
            for u in queue:
                for v in arcs[u]:
                    if v not in parent and residual(u, v) > tol:
                        parent[v] = u
                        nxt.append(v)
            queue = nxt
        if _SINK not in parent:
            break
        path = []
        node = _SINK
        while parent[node] is not None:
            path.append((parent[node], node))
            node = parent[node]
        bottleneck = min(residual(u, v) for u, v in path)
        if math.isinf(bottleneck):
            raise ValueError("unbounded maximum flow (infinite-capacity path)")
        for u, v in path:
            back = sent.get((v, u), 0.0)
            if back > 0.0:
                cancel = min(back, bottleneck)
                sent[(v, u)] = back - cancel
                if bottleneck > cancel:
                    sent[(u, v)] = sent.get((u, v), 0.0) + bottleneck - cancel
            else:
                sent[(u, v)] = sent.get((u, v), 0.0) + bottleneck
        total += bottleneck

    flow = {}
    for ln in net.lines:
        flow[ln.key] = sent.get((ln.a, ln.b), 0.0) - sent.get((ln.b, ln.a), 0.0)
    gen = {b.id: sent.get((_SOURCE, b.id), 0.0) for b in net.buses
           if b.kind is BusKind.GENERATOR}
    load = {b.id: sent.get((b.id, _SINK), 0.0) for b in net.buses
            if b.kind is BusKind.LOAD}
    inj = cancel_cycles(net, InjectionSolution(flow=flow, gen=gen, load=load))
    return MfSolution(injections=inj, value=total)


def cancel_cycles(net: Network, inj: InjectionSolution, tol: float = 1e-12) -> InjectionSolution:
    """Remove directed flow cycles without touching any bus imbalance.

    Repeatedly finds a cycle in the graph of nonzero flows (arcs oriented by
    flow sign) and subtracts the smallest magnitude around it, which zeroes
    at least one line per round.  No flow magnitude ever increases.
    """
    flow = {k: float(v) for k, v in inj.flow.items()}

    def flow_arcs() -> dict[str, list[tuple[str, LineId, float]]]:
        out: dict[str, list[tuple[str, LineId, float]]] = {}
        for ln in net.lines:
            f = flow.get(ln.key, 0.0)
            if f > tol:
                out.setdefault(ln.a, []).append((ln.b, ln.key, 1.0))
            elif f < -tol:
                out.setdefault(ln.b, []).append((ln.a, ln.key, -1.0))
        return out

    def find_cycle(arcs) -> list[tuple[LineId, float]] | None:
        color: dict[str, int] = {}
        for start in arcs:
            if color.get(start, 0) != 0:
                continue
            color[start] = 1
            stack = [(start, iter(arcs.get(start, ())))]
            path_nodes = [start]
            path_arcs: list[tuple[LineId, float]] = []
            while stack:
                node, it = stack[-1]
                for nxt, key, sign in it:
                    if color.get(nxt, 0) == 1:
                        idx = path_nodes.index(nxt)
                        return path_arcs[idx:] + [(key, sign)]
                    if color.get(nxt, 0) == 0:
                        color[nxt] = 1
                        path_nodes.append(nxt)
                        path_arcs.append((key, sign))
                        stack.append((nxt, iter(arcs.get(nxt, ()))))
                        break
                else:
                    color[node] = 2
                    stack.pop()
                    path_nodes.pop()
                    if path_arcs:
                        path_arcs.pop()
        return None

    while True:
        cycle = find_cycle(flow_arcs())
        if cycle is None:
            break
        slack = min(abs(flow[key]) for key, _ in cycle)
        for key, sign in cycle:
            flow[key] -= sign * slack
            if abs(flow[key]) <= tol:
                flow[key] = 0.0
    return InjectionSolution(flow=flow, gen=dict(inj.gen), load=dict(inj.load))


def lift_flow_to_ldc(net: Network, inj: InjectionSolution,
                     tol: float = 1e-9) -> LdcSolution:
    """Find angles and susceptances realising an acyclic conserved flow.

    With flows fixed, eliminating the susceptance turns the power law into
    linear two-sided bounds on each angle difference; the lift solves that
    feasibility system.  Lines whose interval is unbounded above need a
    *strictly* positive angle difference (otherwise no finite susceptance
    reproduces the flow), which is enforced by maximising a uniform margin
    variable.  Raises :class:`LiftInfeasible` when the system has no
    solution, which signals that this particular flow is not realisable
    under the susceptance intervals.
    """
    lp = LinearProgram()
    theta = {b.id: lp.add_var(f"theta[{b.id}]", -math.inf, math.inf) for b in net.buses}
    for comp in net.components():
        idx = theta[comp[0]]
        lp.lb[idx] = 0.0
        lp.ub[idx] = 0.0
    t_margin = lp.add_var("margin", 0.0, 1.0)
    uses_margin = False

    for ln in net.lines:
        f = float(inj.flow.get(ln.key, 0.0))
        ta, tb = theta[ln.a], theta[ln.b]
        if abs(f) <= tol:
            if ln.s_min > 0.0:
                lp.add_constraint({tb: 1.0, ta: -1.0}, "=", 0.0)
            continue
        sign = 1.0 if f > 0 else -1.0
        mag = abs(f)
        # sign * (theta[b] - theta[a]) must land in [mag/s_max, mag/s_min].
        if math.isinf(ln.s_max):
            alpha = 1.0 if ln.s_min == 0.0 else min(1.0, 1.0 / ln.s_min)
            lp.add_constraint({tb: sign, ta: -sign, t_margin: -mag * alpha}, ">=", 0.0)
            uses_margin = True
        else:
            lp.add_constraint({tb: sign, ta: -sign}, ">=", mag / ln.s_max)
        if ln.s_min > 0.0:
            lp.add_constraint({tb: sign, ta: -sign}, "<=", mag / ln.s_min)

    lp.set_objective({t_margin: 1.0} if uses_margin else {})
    res = solve_lp(lp)
    if res.status != "optimal":
        raise LiftInfeasible("no consistent phase-angle assignment")
    if uses_margin and res.value(t_margin) <= tol:
        raise LiftInfeasible(
            "flow needs an unbounded susceptance (zero margin on some line)"
        )
    angles = {b: float(res.x[i]) for b, i in theta.items()}
    # Susceptance assembly: the feasibility rows guarantee each ratio lies
    # inside its interval (up to solver residual), so a clamp is exact.
    suscept: dict[LineId, float] = {}
    for ln in net.lines:
        f = float(inj.flow.get(ln.key, 0.0))
        if abs(f) <= tol:
            if ln.s_min == 0.0:
                suscept[ln.key] = 0.0
            elif math.isinf(ln.s_max):
                suscept[ln.key] = ln.s_min + 0.5
            else:
                suscept[ln.key] = 0.5 * (ln.s_min + min(ln.s_max, 3.0 * ln.s_min))
            continue
        d = angles[ln.b] - angles[ln.a]
        if d == 0.0:
            raise LiftInfeasible(
                f"line {ln.a}-{ln.b} carries flow across an exactly zero "
                "angle difference"
            )
        suscept[ln.key] = min(max(f / d, ln.s_min), ln.s_max)
    return LdcSolution(susceptance=suscept, theta=angles, injections=inj)


def _alternative_max_flow(net: Network, value: float, seed: int) -> InjectionSolution:
    """Another optimal flow, obtained by optimising seeded epsilon costs
    subject to keeping the throughput at ``value``."""
    rng = random.Random(seed)
    lp = LinearProgram()
    flow = {ln.key: lp.add_var(f"f[{ln.a}-{ln.b}]", -ln.capacity, ln.capacity)
            for ln in net.lines}
    gen = {b.id: lp.add_var(f"g[{b.id}]", 0.0, math.inf) for b in net.buses
           if b.kind is BusKind.GENERATOR}
    load = {b.id: lp.add_var(f"l[{b.id}]", 0.0, math.inf) for b in net.buses
            if b.kind is BusKind.LOAD}
    per_bus: dict[str, dict[int, float]] = {b.id: {} for b in net.buses}
    for ln in net.lines:
        per_bus[ln.a][flow[ln.key]] = 1.0
        per_bus[ln.b][flow[ln.key]] = -1.0
    for bus in net.buses:
        coeffs = dict(per_bus[bus.id])
        if bus.id in gen:
            coeffs[gen[bus.id]] = -1.0
        if bus.id in load:
            coeffs[load[bus.id]] = 1.0
        lp.add_constraint(coeffs, "=", 0.0)
    lp.add_constraint({i: 1.0 for i in gen.values()}, ">=", value - 1e-9)
    lp.set_objective({i: rng.uniform(-1.0, 1.0) for i in flow.values()})
    res = solve_lp(lp)
    if res.status != "optimal":
        raise LpError(f"alternative optimum solve returned {res.status}")
    inj = InjectionSolution(
        flow={k: float(res.x[i]) for k, i in flow.items()},
        gen={b: float(res.x[i]) for b, i in gen.items()},
        load={b: float(res.x[i]) for b, i in load.items()},
    )
    return cancel_cycles(net, inj)


def mff_via_lemma(net: Network, retries: int = 5) -> LemmaLift | None:
    """Constructive optimum for the three special cases, or ``None``.

    When the network is a tree, or every interval starts at zero, or every
    interval is unbounded above, the power-law optimum equals the plain
    maximum flow; this returns that value together with a lifted solution
    certifying it.  Outside the special cases returns ``None``.

    Some optimal flows of the unbounded-above case cannot be lifted (zero
    flow forces equal angles, which may clash with ordering around cycles);
    up to ``retries`` alternative optimal flows are tried before giving up
    with :class:`LiftFailure`.
    """
    if net.is_tree():
        kind = "tree"
    elif all(ln.s_min == 0.0 for ln in net.lines):
        kind = "zero_lower"
    elif all(math.isinf(ln.s_max) for ln in net.lines):
        kind = "unbounded_upper"
    else:
        return None

    mf = max_flow(net)
    inj = mf.injections
    last_flow = dict(inj.flow)
    for attempt in range(retries + 1):
        try:
            sol = lift_flow_to_ldc(net, inj)
            return LemmaLift(kind=kind, value=mf.value, solution=sol)
        except LiftInfeasible:
            last_flow = dict(inj.flow)
            if attempt == retries:
                break
            inj = _alternative_max_flow(net, mf.value, seed=1000 + attempt)
    raise LiftFailure(kind, mf.value, last_flow)


def scaled_lift_zero_lower(net: Network, inj: InjectionSolution) -> LdcSolution:
    """The explicit scaling construction for all-intervals-``[0, t]`` networks.

    Preliminary angles respect the flow directions (topological ranks of the
    acyclic flow graph), preliminary susceptances follow from the power law,
    and one global scale factor pushes every susceptance under its upper
    limit while angles stretch by the inverse factor.  Lines at rest simply
    take susceptance zero (legal, since every interval starts at zero) with
    their angle difference unconstrained; this sidesteps the equal-angle
    requirement that can clash with the ordering around cycles.  Kept as an
    independent cross-check of :func:`lift_flow_to_ldc`.
    """
    if not all(ln.s_min == 0.0 for ln in net.lines):
        raise ValueError("construction applies only when every s_min is zero")

    tol = 1e-12
    arcs: dict[str, set[str]] = {b.id: set() for b in net.buses}
    indeg = {b.id: 0 for b in net.buses}
    for ln in net.lines:
        f = float(inj.flow.get(ln.key, 0.0))
        if abs(f) <= tol:
            continue
        lo, hi = (ln.a, ln.b) if f > 0 else (ln.b, ln.a)
        if hi not in arcs[lo]:
            arcs[lo].add(hi)
            indeg[hi] += 1

    order = [b for b in sorted(indeg) if indeg[b] == 0]
    pos = 0
    while pos < len(order):
        cur = order[pos]
        pos += 1
        for nxt in sorted(arcs[cur]):
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                order.append(nxt)
    if len(order) != len(net.buses):
        raise LiftInfeasible("flow graph is cyclic; cancel cycles first")

    rank = {b: float(i + 1) for i, b in enumerate(order)}
    changed = True
    while changed:  # ensure every arc strictly increases the rank
        changed = False
        for cur in order:
            for nxt in arcs[cur]:
                if rank[nxt] <= rank[cur]:
                    rank[nxt] = rank[cur] + 1.0
                    changed = True

    s_pre: dict[LineId, float] = {}
    scale = math.inf
    for ln in net.lines:
        f = float(inj.flow.get(ln.key, 0.0))
        if abs(f) <= tol:
            s_pre[ln.key] = 0.0
            continue
        d = rank[ln.b] - rank[ln.a]
        s_pre[ln.key] = f / d
        if not math.isinf(ln.s_max):
            scale = min(scale, ln.s_max / s_pre[ln.key])
    if math.isinf(scale):
        scale = 1.0

    suscept = {k: scale * v for k, v in s_pre.items()}
    theta = {b.id: rank[b.id] / scale for b in net.buses}
    return LdcSolution(susceptance=suscept, theta=theta, injections=inj)
