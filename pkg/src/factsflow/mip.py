"""Exact maximum-throughput solver for networks with controllable lines.

The product ``s * dtheta`` in the power law makes the problem non-convex as
soon as a susceptance may vary.  The classic disjunctive reformulation
splits each angle difference into a nonnegative positive part and negative
part, gates them with a binary direction variable ``d`` and a big-M bound,
and couples each part to the matching signed flow through the susceptance
interval:

    d in {0, 1}
    0 <= dplus  <= d * M
    0 <= dminus <= (1 - d) * M
    dplus - dminus = theta[b] - theta[a]
    s_min * dplus  <= fplus  <= s_max * dplus     (upper half absent for
    s_min * dminus <= fminus <= s_max * dminus     unbounded intervals)
    f = fplus - fminus
    flow balance at every bus, |f| <= capacity

Relaxing the binaries gives an LP; the exact optimum is found by branch and
bound over the direction bits.  Only controllable lines ever need
branching: on a fixed line the interval is a point, the flow-susceptance
inequalities pinch to ``f = s * dtheta`` for any split of the angle
difference, and an integral direction bit can always be assigned after the
fact without changing anything.

A brute-force reference — enumerate every direction assignment of the
controllable lines and take the best fixed-direction LP — is provided for
small instances as :func:`enumerate_signs_oracle`.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Mapping

from .linprog import LinearProgram, solve_lp
from .model import (
    DEFAULT_TOL,
    BusKind,
    InjectionSolution,
    InputError,
    LdcSolution,
    Network,
    validate_solution,
)
from .formulations import (
    SignPattern,
    extract_signs,
    forced_sign_bits,
    solve_mvf,
)

__all__ = [
    "MffMip",
    "MffConfig",
    "MffResult",
    "OracleResult",
    "build_mff_mip",
    "choose_big_m",
    "solve_mff",
    "enumerate_signs_oracle",
]

LineId = tuple[str, str]


@dataclass
class MffMip:
    """The LP relaxation plus bookkeeping for the binary direction bits."""

    lp: LinearProgram
    big_m: float
    binary_ids: dict[LineId, int]
    theta: dict[str, int]
    gen: dict[str, int]
    load: dict[str, int]
    flow: dict[LineId, int]
    dplus: dict[LineId, int]
    dminus: dict[LineId, int]


@dataclass(frozen=True)
class MffConfig:
    gap_tol: float = 1e-4
    time_limit: float | None = None
    node_limit: int | None = None
    big_m: float | None = None
    presolve_signs: bool = True
    log: bool = False


@dataclass
class MffResult:
    solution: LdcSolution
    objective: float
    upper_bound: float
    gap: float
    node_count: int
    wall_time: float
    termination: str  # "optimal" | "gap_reached" | "time_limit" | "node_limit"
    big_m: float
    big_m_retried: bool = False


@dataclass(frozen=True)
class OracleResult:
    value: float
    pattern: SignPattern
    patterns_tried: int


def choose_big_m(net: Network) -> float:
    """A finite bound on any angle difference worth exploring.

    Each line contributes the largest angle difference it can sensibly span:
    ``capacity / s_min`` when the susceptance is bounded away from zero.
    When ``s_min`` is zero no finite bound exists in principle; the
    heuristic denominator ``s_max * 1e-3`` (floored at 1e-9) stands in, and
    :func:`solve_mff` audits the final solution against the bound and
    re-solves once with a ten-fold bound if it came close.  Summing over all
    lines dominates the spread along any simple path.
    """
    total = 0.0
    for ln in net.lines:
        if ln.s_min > 0.0:
            total += ln.capacity / ln.s_min
        else:
            denom = max(ln.s_max * 1e-3, 1e-9)
            total += 0.0 if math.isinf(denom) else ln.capacity / denom
    return max(total, 1.0)


def build_mff_mip(net: Network, big_m: float) -> MffMip:
    """Assemble the disjunctive model with the given big-M value."""
    if big_m <= 0:
        raise InputError("big-M must be positive")
    lp = LinearProgram()
    theta = {b.id: lp.add_var(f"theta[{b.id}]", -math.inf, math.inf) for b in net.buses}
    for comp in net.components():
        idx = theta[comp[0]]
        lp.lb[idx] = 0.0
        lp.ub[idx] = 0.0
    gen, load = {}, {}
    for bus in net.buses:
        if bus.kind is BusKind.GENERATOR:
            gen[bus.id] = lp.add_var(f"gen[{bus.id}]", 0.0, math.inf)
        elif bus.kind is BusKind.LOAD:
            load[bus.id] = lp.add_var(f"load[{bus.id}]", 0.0, math.inf)

    binary_ids, flow, dplus, dminus = {}, {}, {}, {}
    for ln in net.lines:
        tag = f"{ln.a}-{ln.b}"
        d = lp.add_var(f"d[{tag}]", 0.0, 1.0)
        dp = lp.add_var(f"dplus[{tag}]", 0.0, math.inf)
        dm = lp.add_var(f"dminus[{tag}]", 0.0, math.inf)
        fp = lp.add_var(f"fplus[{tag}]", 0.0, math.inf)
        fm = lp.add_var(f"fminus[{tag}]", 0.0, math.inf)
        f = lp.add_var(f"flow[{tag}]", -ln.capacity, ln.capacity)
        binary_ids[ln.key] = d
        flow[ln.key] = f
        dplus[ln.key] = dp
        dminus[ln.key] = dm
        # dplus <= d * M ; dminus <= (1 - d) * M
        lp.add_constraint({dp: 1.0, d: -big_m}, "<=", 0.0)
        lp.add_constraint({dm: 1.0, d: big_m}, "<=", big_m)
        # dplus - dminus = theta[b] - theta[a]
        lp.add_constraint({dp: 1.0, dm: -1.0, theta[ln.b]: -1.0, theta[ln.a]: 1.0}, "=", 0.0)
        # susceptance interval couples signed flows to angle parts
        lp.add_constraint({fp: 1.0, dp: -ln.s_min}, ">=", 0.0)
        lp.add_constraint({fm: 1.0, dm: -ln.s_min}, ">=", 0.0)
        if not math.isinf(ln.s_max):
            lp.add_constraint({fp: 1.0, dp: -ln.s_max}, "<=", 0.0)
            lp.add_constraint({fm: 1.0, dm: -ln.s_max}, "<=", 0.0)
        # f = fplus - fminus  (capacity sits on the f bounds)
        lp.add_constraint({f: 1.0, fp: -1.0, fm: 1.0}, "=", 0.0)

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

    lp.set_objective({i: 1.0 for i in gen.values()})
    return MffMip(lp=lp, big_m=big_m, binary_ids=binary_ids, theta=theta,
                  gen=gen, load=load, flow=flow, dplus=dplus, dminus=dminus)


def _build_reduced_relaxation(net: Network, big_m: float) -> MffMip:
    """Value-equivalent relaxation used inside the search.

    Fixed lines carry no directional choice: for any split of the angle
    difference their interval inequalities force ``f = s * dtheta``, so the
    direction machinery (d, dplus, dminus, fplus, fminus) is dead weight.
    This builder writes the power law directly for fixed lines and keeps the
    full disjunction only on controllable ones, which shrinks search-node
    LPs considerably without changing any optimum.
    """
    lp = LinearProgram()
    theta = {b.id: lp.add_var(f"theta[{b.id}]", -math.inf, math.inf) for b in net.buses}
    for comp in net.components():
        idx = theta[comp[0]]
        lp.lb[idx] = 0.0
        lp.ub[idx] = 0.0
    gen, load = {}, {}
    for bus in net.buses:
        if bus.kind is BusKind.GENERATOR:
            gen[bus.id] = lp.add_var(f"gen[{bus.id}]", 0.0, math.inf)
        elif bus.kind is BusKind.LOAD:
            load[bus.id] = lp.add_var(f"load[{bus.id}]", 0.0, math.inf)

    binary_ids, flow, dplus, dminus = {}, {}, {}, {}
    for ln in net.lines:
        tag = f"{ln.a}-{ln.b}"
        f = lp.add_var(f"flow[{tag}]", -ln.capacity, ln.capacity)
        flow[ln.key] = f
        if not ln.is_facts:
            lp.add_constraint(
                {f: 1.0, theta[ln.b]: -ln.s_min, theta[ln.a]: ln.s_min}, "=", 0.0
            )
            continue
        d = lp.add_var(f"d[{tag}]", 0.0, 1.0)
        dp = lp.add_var(f"dplus[{tag}]", 0.0, math.inf)
        dm = lp.add_var(f"dminus[{tag}]", 0.0, math.inf)
        fp = lp.add_var(f"fplus[{tag}]", 0.0, math.inf)
        fm = lp.add_var(f"fminus[{tag}]", 0.0, math.inf)
        binary_ids[ln.key] = d
        dplus[ln.key] = dp
        dminus[ln.key] = dm
        lp.add_constraint({dp: 1.0, d: -big_m}, "<=", 0.0)
        lp.add_constraint({dm: 1.0, d: big_m}, "<=", big_m)
        lp.add_constraint({dp: 1.0, dm: -1.0, theta[ln.b]: -1.0, theta[ln.a]: 1.0}, "=", 0.0)
        lp.add_constraint({fp: 1.0, dp: -ln.s_min}, ">=", 0.0)
        lp.add_constraint({fm: 1.0, dm: -ln.s_min}, ">=", 0.0)
        if not math.isinf(ln.s_max):
            lp.add_constraint({fp: 1.0, dp: -ln.s_max}, "<=", 0.0)
            lp.add_constraint({fm: 1.0, dm: -ln.s_max}, "<=", 0.0)
        lp.add_constraint({f: 1.0, fp: -1.0, fm: 1.0}, "=", 0.0)

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

    lp.set_objective({i: 1.0 for i in gen.values()})
    return MffMip(lp=lp, big_m=big_m, binary_ids=binary_ids, theta=theta,
                  gen=gen, load=load, flow=flow, dplus=dplus, dminus=dminus)


def _zero_solution(net: Network) -> LdcSolution:
    suscept = {ln.key: ln.s_min for ln in net.lines}
    theta = {b.id: 0.0 for b in net.buses}
    inj = InjectionSolution(flow={ln.key: 0.0 for ln in net.lines}, gen={}, load={})
    return LdcSolution(susceptance=suscept, theta=theta, injections=inj)


def _integral_node_value(net: Network, bits: dict[LineId, int]) -> tuple[LdcSolution, float]:
    """Exact realisable value of one integral direction assignment.

    Re-solving the fixed-direction program at the node's own bits (rather
    than reading the relaxation vertex) keeps incumbents realisable and
    agrees with the enumeration reference pattern for pattern.
    """
    mvf = solve_mvf(net, SignPattern(bits))
    return mvf.solution, mvf.value


def solve_mff(net: Network, config: MffConfig | None = None,
              warm_start: LdcSolution | None = None) -> MffResult:
    """Exact maximum throughput by branch and bound over direction bits.

    ``warm_start`` (a feasible operating point, typically from the
    alternating heuristic) installs an initial incumbent, so the search can
    only improve on it.  Termination honours ``gap_tol`` (relative),
    ``time_limit`` (seconds) and ``node_limit``; the result always carries a
    feasible solution and a valid upper bound.
    """
    config = config or MffConfig()
    if config.time_limit is not None and config.time_limit <= 0:
        raise InputError("time_limit must be positive")
    if config.node_limit is not None and config.node_limit <= 0:
        raise InputError("node_limit must be positive")

    start = time.monotonic()
    big_m = config.big_m if config.big_m is not None else choose_big_m(net)
    result = _branch_and_bound(net, big_m, config, warm_start, start)

    # Audit: if the best solution presses against the big-M bound the model
    # may have cut the true optimum; re-solve once with a ten-fold bound.
    if config.big_m is None and _hits_big_m(net, result.solution, big_m):
        retry = _branch_and_bound(net, 10.0 * big_m, config, warm_start, start)
        if retry.objective >= result.objective - 1e-12:
            result = retry
        result.big_m_retried = True
    return result


def _hits_big_m(net: Network, sol: LdcSolution, big_m: float) -> bool:
    for ln in net.lines:
        d = abs(float(sol.theta[ln.b]) - float(sol.theta[ln.a]))
        if d >= 0.999 * big_m:
            return True
    return False


def _branch_and_bound(net: Network, big_m: float, config: MffConfig,
                      warm_start: LdcSolution | None, start: float) -> MffResult:
    mip = _build_reduced_relaxation(net, big_m)
    cap_by_key = {ln.key: ln.capacity for ln in net.lines}

    incumbent_sol = _zero_solution(net)
    incumbent = 0.0
    if warm_start is not None:
        report = validate_solution(net, warm_start, DEFAULT_TOL)
        if not report.ok:
            raise InputError(f"warm start is not a feasible solution:\n{report}")
        incumbent_sol = warm_start
        incumbent = warm_start.objective()

    branch_keys = [ln.key for ln in net.facts_lines()]
    fixed_bits: dict[LineId, int] = {}
    if config.presolve_signs:
        forced = forced_sign_bits(net)
        fixed_bits = {k: forced[k] for k in branch_keys if k in forced}
        branch_keys = [k for k in branch_keys if k not in fixed_bits]

    base_overrides: dict[int, tuple[float, float]] = {
        mip.binary_ids[k]: (float(b), float(b)) for k, b in fixed_bits.items()
    }

    # Nodes: (parent bound, override dict for branched bits).
    root: tuple[float, dict[int, tuple[float, float]]] = (math.inf, {})
    stack = [root]
    nodes = 0
    termination = "optimal"

    while stack:
        if config.time_limit is not None and time.monotonic() - start > config.time_limit:
            termination = "time_limit"
            break
        if config.node_limit is not None and nodes >= config.node_limit:
            termination = "node_limit"
            break
        if nodes and nodes % 100 == 0:
            stack.sort(key=lambda item: item[0])  # best bound explored next

        parent_bound, fixed = stack.pop()
        if parent_bound <= incumbent + 1e-9:
            continue
        overrides = dict(base_overrides)
        overrides.update(fixed)
        res = solve_lp(mip.lp, 1e-8, bound_overrides=overrides)
        nodes += 1
        if res.status != "optimal":
            continue  # relaxation infeasible under these fixings: prune
        bound = res.objective
        if config.log:
            print(f"node {nodes}: depth {len(fixed)} bound {bound:.6f} "
                  f"incumbent {incumbent:.6f}")
        if bound <= incumbent + 1e-9:
            continue

        frac = []
        for key in branch_keys:
            idx = mip.binary_ids[key]
            if idx in fixed:
                continue
            val = float(res.x[idx])
            if abs(val - round(val)) > 1e-6:
                frac.append((key, idx, val))
        if not frac:
            bits = dict(fixed_bits)
            for key in branch_keys:
                bits[key] = int(round(float(res.x[mip.binary_ids[key]])))
            candidate, cand_value = _integral_node_value(net, bits)
            if cand_value > incumbent:
                incumbent = cand_value
                incumbent_sol = candidate
        else:
            key, idx, val = min(
                frac, key=lambda item: (abs(item[2] - 0.5), -cap_by_key[item[0]])
            )
            first = int(round(val))  # rounding direction explored first
            for bit in (1 - first, first):
                child = dict(fixed)
                child[idx] = (float(bit), float(bit))
                stack.append((bound, child))

        stack = [item for item in stack if item[0] > incumbent + 1e-9]
        if stack:
            ub_now = max(incumbent, max(b for b, _ in stack))
            if math.isfinite(ub_now) and (
                (ub_now - incumbent) / max(1.0, abs(incumbent)) <= config.gap_tol
            ):
                termination = "gap_reached"
                break

    if stack:
        upper = max(incumbent, max(b for b, _ in stack))
    else:
        upper = incumbent
        termination = "optimal"
    gap = (upper - incumbent) / max(1.0, abs(incumbent))
    return MffResult(
        solution=incumbent_sol,
        objective=incumbent,
        upper_bound=upper,
        gap=gap,
        node_count=nodes,
        wall_time=time.monotonic() - start,
        termination=termination,
        big_m=big_m,
    )


def enumerate_signs_oracle(net: Network, max_lines: int = 16,
                           pinned_flows: Mapping[LineId, float] | None = None,
                           presolve_signs: bool = True) -> OracleResult:
    """Brute-force reference optimum by direction enumeration.

    Every operating point induces a direction bit per controllable line, so
    the maximum over all fixed-direction LPs equals the true optimum.  Fixed
    lines carry no directional choice (their power law is an equality) and
    provably one-directional lines are pinned up front, which keeps the
    enumeration to the genuinely free bits.  Refuses instances with more
    than ``max_lines`` free bits.
    """
    facts_keys = [ln.key for ln in net.facts_lines()]
    forced = forced_sign_bits(net) if presolve_signs else {}
    fixed_bits = {k: forced[k] for k in facts_keys if k in forced}
    free = [k for k in facts_keys if k not in fixed_bits]
    if len(free) > max_lines:
        raise InputError(
            f"{len(free)} free direction bits exceed the enumeration cap {max_lines}"
        )

    best_value = -math.inf
    best_result = None
    tried = 0
    for combo in itertools.product((0, 1), repeat=len(free)):
        bits = dict(fixed_bits)
        bits.update({k: b for k, b in zip(free, combo)})
        result = solve_mvf(net, SignPattern(bits), pinned_flows=pinned_flows)
        tried += 1
        if result is None:
            continue  # pinned flows incompatible with this direction choice
        if result.value > best_value:
            best_value = result.value
            best_result = result
    if best_result is None:
        raise InputError("pinned flows are infeasible under every direction choice")
    pattern = extract_signs(net, best_result.theta)
    return OracleResult(value=best_value, pattern=pattern, patterns_tried=tried)
