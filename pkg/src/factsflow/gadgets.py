"""Choice gadgets and the exact-cover encoding built from them.

A *choice network* is a sub-network with one designated port bus whose
optimal operating points emit either nothing or exactly ``x`` units of power
through the port, never anything in between, while the generation inside
the gadget stays at its inner optimum in both modes.  That all-or-nothing
behaviour is the discrete primitive that lets cover problems be written as
throughput questions: one gadget per candidate triple, emitting 3 units
exactly when the triple is selected.

The default builder realises the behaviour with rigid unit-susceptance
lines plus a single controllable line:

* a splitter generator that can route up to ``x`` units either out of the
  port or into an absorption branch;
* an absorption branch whose tight load makes every absorbed unit displace
  one unit of base generation (so partial emission is punished);
* a doubling amplifier chain behind one ``[0, 1]`` controllable line whose
  angle difference only turns positive once the absorbed share is large,
  letting full absorption win back exactly the displaced generation.

Equal-capacity padding (an isolated generator-load pair) tops the inner
optimum up to ``6.1 x``.  The construction is certified *behaviourally* by
:func:`verify_choice` — a sweep that pins the port emission and checks the
two-point optimality — never assumed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .model import Bus, BusKind, InputError, Line, Network, validate_network
from .mip import MffConfig, MffResult, enumerate_signs_oracle, solve_mff

__all__ = [
    "ChoiceSpec",
    "GadgetParts",
    "ChoiceBuilder",
    "ChoiceNetwork",
    "ChoiceVerification",
    "GadgetError",
    "ExactCoverInstance",
    "ReductionNetwork",
    "ReductionCheck",
    "default_choice_builder",
    "degenerate_choice_builder",
    "build_choice_network",
    "verify_choice",
    "build_exact_cover_network",
    "check_reduction",
    "exact_cover_brute_force",
]

_PROBE = "__probe__"


class GadgetError(RuntimeError):
    """A gadget construction failed; carries the verification outcome."""

    def __init__(self, message: str, verification: "ChoiceVerification | None" = None):
        super().__init__(message)
        self.verification = verification


@dataclass(frozen=True)
class ChoiceSpec:
    """Canonical constants of the unit choice-gadget contract.

    The inner optimum and a two-regime response of the absorption network
    (ratio ``low_ratio`` below ``threshold``, ``high_ratio`` above, with the
    base generation dropping by ``base_drop`` at the switch) are recorded as
    exact rationals.  Builders are certified against the *behavioural* part
    of the contract only — inner optimum and all-or-nothing emission; the
    default builder's own response curve has the same dip-shaped class with
    its own interior constants.
    """

    x: Fraction
    inner_optimum: Fraction
    base_generation: Fraction
    generation_ratio: Fraction
    low_ratio: Fraction
    high_ratio: Fraction
    threshold: Fraction
    base_drop: Fraction

    @classmethod
    def reference(cls, x: Fraction = Fraction(1)) -> "ChoiceSpec":
        return cls(
            x=x,
            inner_optimum=Fraction(61, 10) * x,
            base_generation=Fraction(51, 10) * x,
            generation_ratio=Fraction(1),
            low_ratio=Fraction(2, 3),
            high_ratio=Fraction(4, 3),
            threshold=Fraction(13, 20),
            base_drop=Fraction(1, 3),
        )


@dataclass(frozen=True)
class GadgetParts:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    expected_inner_opt: Fraction


#: A builder receives the scale ``x``, the id of the (externally owned) port
#: bus and a namespace prefix for its internal bus ids, and returns the
#: buses and lines to graft onto the network.
ChoiceBuilder = Callable[[Fraction, str, str], GadgetParts]


def default_choice_builder(x: Fraction, port: str, ns: str) -> GadgetParts:
    """The in-house choice gadget, inner optimum ``6.1 x``.

    Mechanics at scale 1 (everything multiplies by ``x``): the splitter
    generator feeds the port with ``w`` and the absorption bus with
    ``r <= 1 - w``.  The absorption triangle (direct hop plus a two-hop
    path) lands on a load of capacity 1 shared with a base generator of
    capacity 1, so serving ``r`` displaces base generation one-for-one.
    The two-hop midpoint sits a third of the angle drop below the load,
    while the base generator's bus sits a full ``gen`` below; their angle
    gap turns positive only when absorption is high and displacement deep.
    A ``[0, 1]`` controllable line across that gap feeds a three-stage
    doubling amplifier (each stage's generator is forced, by an angle tie,
    to match its segment flow), returning eight times the gap flow into a
    separate load, which restores the optimum exactly at full absorption.
    Padding of ``4.1`` lifts the base value to ``5.1``.
    """
    X = Fraction(x)
    if X <= 0:
        raise InputError("gadget scale must be positive")

    def b(name: str) -> str:
        return f"{ns}{name}"

    def cap(frac: Fraction) -> float:
        return float(frac * X)

    one = Fraction(1)
    buses = (
        Bus(b("main"), BusKind.GENERATOR),
        Bus(b("S")),
        Bus(b("a")),
        Bus(b("c")),
        Bus(b("L")),
        Bus(b("u")),
        Bus(b("d")),
        Bus(b("m1")),
        Bus(b("m2")),
        Bus(b("m3")),
        Bus(b("c1")),
        Bus(b("c2")),
        Bus(b("c3")),
        Bus(b("gb"), BusKind.GENERATOR),
        Bus(b("gc1"), BusKind.GENERATOR),
        Bus(b("gc2"), BusKind.GENERATOR),
        Bus(b("gc3"), BusKind.GENERATOR),
        Bus(b("lsink"), BusKind.LOAD),
        Bus(b("l2"), BusKind.LOAD),
        Bus(b("pg"), BusKind.GENERATOR),
        Bus(b("pl"), BusKind.LOAD),
    )
    lines = (
        Line(b("main"), b("S"), 1, 1, cap(one)),
        Line(b("S"), port, 1, 1, cap(one)),
        Line(b("S"), b("a"), 1, 1, cap(one)),
        # absorption triangle onto the tight load
        Line(b("a"), b("L"), 1, 1, cap(one)),
        Line(b("a"), b("c"), 1, 1, cap(one)),
        Line(b("c"), b("L"), 1, 1, cap(one)),
        # displaced base generation
        Line(b("gb"), b("u"), 1, 1, cap(one)),
        Line(b("u"), b("L"), 1, 1, cap(one)),
        Line(b("u"), b("d"), 1, 1, 0.0),  # angle tie: amplifier rides at u
        # the mode line: active only once absorption runs deep
        Line(b("c"), b("d"), 0.0, 1.0, cap(Fraction(1, 8))),
        # doubling amplifier chain
        Line(b("d"), b("m1"), 1, 1, cap(Fraction(1, 8))),
        Line(b("m1"), b("m2"), 1, 1, cap(Fraction(1, 4))),
        Line(b("m2"), b("m3"), 1, 1, cap(Fraction(1, 2))),
        Line(b("c1"), b("d"), 1, 1, 0.0),
        Line(b("c1"), b("m1"), 1, 1, cap(Fraction(1, 8))),
        Line(b("gc1"), b("c1"), 1, 1, cap(Fraction(1, 8))),
        Line(b("c2"), b("m1"), 1, 1, 0.0),
        Line(b("c2"), b("m2"), 1, 1, cap(Fraction(1, 4))),
        Line(b("gc2"), b("c2"), 1, 1, cap(Fraction(1, 4))),
        Line(b("c3"), b("m2"), 1, 1, 0.0),
        Line(b("c3"), b("m3"), 1, 1, cap(Fraction(1, 2))),
        Line(b("gc3"), b("c3"), 1, 1, cap(Fraction(1, 2))),
        Line(b("m3"), b("l2"), 1, 1, cap(one)),
        Line(b("L"), b("lsink"), 1, 1, cap(one)),
        # padding pair lifting the inner optimum to 6.1 x
        Line(b("pg"), b("pl"), 1, 1, cap(Fraction(41, 10))),
    )
    return GadgetParts(buses=buses, lines=lines,
                       expected_inner_opt=Fraction(61, 10) * X)


def degenerate_choice_builder(x: Fraction, port: str, ns: str) -> GadgetParts:
    """Negative control: a plain generator behind the port.

    Its emission response is strictly monotone (every emitted unit is pure
    gain), so it has a single optimum at full emission and must be rejected
    by :func:`verify_choice`.
    """
    X = Fraction(x)
    buses = (Bus(f"{ns}src", BusKind.GENERATOR),)
    lines = (Line(f"{ns}src", port, 1, 1, float(X)),)
    return GadgetParts(buses=buses, lines=lines, expected_inner_opt=X)


@dataclass(frozen=True)
class ChoiceNetwork:
    net: Network
    port: str
    expected_inner_opt: Fraction


def build_choice_network(x: Fraction | float,
                         builder: ChoiceBuilder | None = None,
                         port: str = "p",
                         verify: bool = False) -> ChoiceNetwork:
    """Materialise a standalone choice network with its port bus.

    With ``verify=True`` the behavioural contract is checked immediately and
    a failing builder raises :class:`GadgetError` carrying the report.
    """
    builder = builder or default_choice_builder
    x = Fraction(x).limit_denominator(10**9)
    parts = builder(x, port, f"{port}.")
    net = Network(buses=(Bus(port),) + tuple(parts.buses), lines=tuple(parts.lines))
    report = validate_network(net)
    if not report.ok:
        raise GadgetError(f"builder produced an invalid network:\n{report}")
    built = ChoiceNetwork(net=net, port=port, expected_inner_opt=parts.expected_inner_opt)
    if verify:
        outcome = verify_choice(net, port, x, expected=parts.expected_inner_opt)
        if not outcome.passed:
            raise GadgetError("builder failed behavioural verification", outcome)
    return built


@dataclass
class ChoiceVerification:
    passed: bool
    inner_opt: float
    optimal_emissions: list[float]
    curve: list[tuple[float, float]]
    grid_step: float
    messages: list[str] = field(default_factory=list)


def verify_choice(net: Network, port: str, x: Fraction | float,
                  grid_step: Fraction = Fraction(1, 20),
                  tol: float = 1e-6,
                  max_lines: int = 16,
                  expected: Fraction | None = None) -> ChoiceVerification:
    """Certify the all-or-nothing emission behaviour of a gadget.

    A probe load of capacity ``x`` is attached at the port through a fixed
    line, the probe flow is pinned to each grid value ``w`` in turn
    (granularity ``grid_step * x``, endpoints included), and the exact
    optimum is computed by direction enumeration.  The gadget passes when
    the maximum is attained, within ``tol``, exactly at ``w = 0`` and
    ``w = x`` and every interior grid point is strictly worse.
    """
    x = Fraction(x).limit_denominator(10**9)
    if x <= 0:
        raise InputError("port quantum x must be positive")
    probe_net = Network(
        buses=net.buses + (Bus(_PROBE, BusKind.LOAD),),
        lines=net.lines + (Line(port, _PROBE, 1, 1, float(x)),),
    )
    probe_key = (port, _PROBE)

    steps = int(1 / grid_step)
    ws = [x * Fraction(k, steps) for k in range(steps + 1)]
    curve: list[tuple[float, float]] = []
    for w in ws:
        res = enumerate_signs_oracle(probe_net, max_lines=max_lines,
                                     pinned_flows={probe_key: float(w)})
        curve.append((float(w), res.value))

    best = max(v for _, v in curve)
    messages: list[str] = []
    end_lo, end_hi = curve[0][1], curve[-1][1]
    passed = True
    if end_lo < best - tol:
        passed = False
        messages.append(f"zero emission is suboptimal: {end_lo} < {best}")
    if end_hi < best - tol:
        passed = False
        messages.append(f"full emission is suboptimal: {end_hi} < {best}")
    optimal = [w for w, v in curve if v >= best - tol]
    for w, v in curve[1:-1]:
        if v >= best - tol:
            passed = False
            messages.append(f"interior emission {w} ties the optimum ({v})")
    if expected is not None and abs(end_lo - float(expected)) > tol:
        passed = False
        messages.append(
            f"inner optimum {end_lo} differs from expected {float(expected)}"
        )
    return ChoiceVerification(
        passed=passed,
        inner_opt=best,
        optimal_emissions=optimal,
        curve=curve,
        grid_step=float(grid_step),
        messages=messages,
    )


@dataclass(frozen=True)
class ExactCoverInstance:
    """A ground set and a family of 3-element subsets."""

    ground: tuple[str, ...]
    sets: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        ground = tuple(sorted(self.ground))
        if len(set(ground)) != len(ground):
            raise InputError("ground set has duplicate elements")
        norm = []
        for subset in self.sets:
            t = tuple(sorted(subset))
            if len(set(t)) != 3:
                raise InputError(f"subset {subset!r} must have exactly 3 distinct elements")
            if not set(t) <= set(ground):
                raise InputError(f"subset {subset!r} is not within the ground set")
            norm.append(t)
        if len(set(norm)) != len(norm):
            raise InputError("subsets must be distinct")
        object.__setattr__(self, "ground", ground)
        object.__setattr__(self, "sets", tuple(norm))

    @classmethod
    def from_lists(cls, ground: Sequence[str], sets: Sequence[Sequence[str]]):
        return cls(ground=tuple(ground), sets=tuple(tuple(s) for s in sets))


def exact_cover_brute_force(inst: ExactCoverInstance) -> bool:
    """Decide cover-ability by subset enumeration (reference decision)."""
    ground = set(inst.ground)
    for r in range(len(inst.sets) + 1):
        for combo in itertools.combinations(inst.sets, r):
            picked = [e for subset in combo for e in subset]
            if len(picked) == len(set(picked)) and set(picked) == ground:
                return True
    return False


@dataclass(frozen=True)
class ReductionNetwork:
    net: Network
    target: Fraction
    ports: tuple[str, ...]


def _port_id(subset: tuple[str, ...]) -> str:
    return "v:" + "+".join(subset)


def build_exact_cover_network(inst: ExactCoverInstance,
                              builder: ChoiceBuilder | None = None) -> ReductionNetwork:
    """The throughput encoding of an exact-cover instance.

    Core part: a generator ``g`` and load ``l`` joined by a unit-susceptance
    line of capacity 3; per element ``e`` a bus with lines ``g-e`` (capacity
    1) and ``e-l`` (capacity 2); per subset a port bus wired to its three
    elements by unit lines.  Each port carries a scale-3 choice gadget.  The
    throughput reaches ``3 + 18.3 |S| + |M|`` exactly when the instance is
    solvable (given a verified builder).
    """
    builder = builder or default_choice_builder
    buses = [Bus("g", BusKind.GENERATOR), Bus("l", BusKind.LOAD)]
    lines = [Line("g", "l", 1, 1, 3.0)]
    for elem in inst.ground:
        buses.append(Bus(elem))
        lines.append(Line("g", elem, 1, 1, 1.0))
        lines.append(Line(elem, "l", 1, 1, 2.0))
    ports = []
    for subset in inst.sets:
        port = _port_id(subset)
        ports.append(port)
        buses.append(Bus(port))
        for elem in subset:
            lines.append(Line(port, elem, 1, 1, 1.0))
        parts = builder(Fraction(3), port, f"{port}.")
        buses.extend(parts.buses)
        lines.extend(parts.lines)
    net = Network(buses=tuple(buses), lines=tuple(lines))
    report = validate_network(net)
    if not report.ok:
        raise GadgetError(f"encoding produced an invalid network:\n{report}")
    target = Fraction(3) + Fraction(183, 10) * len(inst.sets) + len(inst.ground)
    return ReductionNetwork(net=net, target=target, ports=tuple(ports))


@dataclass
class ReductionCheck:
    mff: float
    target: Fraction
    reaches_target: bool
    status: str  # "ok" | "indeterminate"
    result: MffResult


def check_reduction(inst: ExactCoverInstance,
                    builder: ChoiceBuilder | None = None,
                    config: MffConfig | None = None) -> ReductionCheck:
    """Solve the encoding exactly and compare against the target value.

    ``reaches_target`` should match :func:`exact_cover_brute_force` whenever
    the builder passes :func:`verify_choice`.  The verdict is conclusive
    even under a time limit when either the incumbent already reaches the
    target (a feasible lower bound) or the upper bound falls short of it;
    anything else is reported ``indeterminate``.
    """
    encoding = build_exact_cover_network(inst, builder)
    config = config or MffConfig(gap_tol=1e-7)
    result = solve_mff(encoding.net, config)
    goal = float(encoding.target)
    reaches = result.objective >= goal - 1e-6
    if reaches or result.upper_bound < goal - 1e-6:
        status = "ok"
    elif result.termination in ("time_limit", "node_limit"):
        status = "indeterminate"
    else:
        status = "ok"
    return ReductionCheck(
        mff=result.objective,
        target=encoding.target,
        reaches_target=reaches,
        status=status,
        result=result,
    )
