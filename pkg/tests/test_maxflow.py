"""Maximum flow, cycle cancellation and the constructive lifts."""

import math

import pytest

from factsflow.model import (
    Bus,
    BusKind,
    InjectionSolution,
    Line,
    Network,
    check_kirchhoff,
    check_power_law,
    validate_solution,
)
from factsflow.maxflow import (
    LiftInfeasible,
    cancel_cycles,
    lift_flow_to_ldc,
    max_flow,
    mff_via_lemma,
    scaled_lift_zero_lower,
)
from factsflow.mip import MffConfig, solve_mff

from conftest import (
    random_meshed_zero_lower,
    random_tree,
    random_unbounded_upper,
    tri_network,
)


def free_tri(s_lo=0.0, s_hi=math.inf):
    return Network(
        buses=(Bus("g", BusKind.GENERATOR), Bus("b"), Bus("l", BusKind.LOAD)),
        lines=(
            Line("g", "l", s_lo, s_hi, 10.0),
            Line("g", "b", s_lo, s_hi, 10.0),
            Line("b", "l", s_lo, s_hi, 4.0),
        ),
    )


class TestMaxFlow:
    def test_single_line(self, single_line):
        assert max_flow(single_line).value == pytest.approx(5.0)

    def test_tri_saturates_both_paths(self, tri):
        mf = max_flow(tri)
        assert mf.value == pytest.approx(14.0)
        assert check_kirchhoff(tri, mf.injections)

    def test_disconnected_generator(self):
        net = Network(
            buses=(Bus("g", BusKind.GENERATOR), Bus("l", BusKind.LOAD)),
            lines=(),
        )
        assert max_flow(net).value == 0.0

    def test_returned_flow_is_acyclic(self):
        for seed in range(20):
            net = random_meshed_zero_lower(seed, max_buses=12)
            mf = max_flow(net)
            again = cancel_cycles(net, mf.injections)
            assert again.flow == mf.injections.flow


class TestCancelCycles:
    def test_acyclic_input_unchanged(self, tri):
        mf = max_flow(tri)
        out = cancel_cycles(tri, mf.injections)
        assert out.flow == mf.injections.flow

    def test_pure_circulation_vanishes(self):
        net = Network(
            buses=(Bus("a"), Bus("b"), Bus("c")),
            lines=(Line("a", "b", 1, 1, 5.0), Line("b", "c", 1, 1, 5.0),
                   Line("c", "a", 1, 1, 5.0)),
        )
        inj = InjectionSolution(
            flow={("a", "b"): 1.0, ("b", "c"): 1.0, ("c", "a"): 1.0},
            gen={}, load={},
        )
        out = cancel_cycles(net, inj)
        assert all(v == 0.0 for v in out.flow.values())

    def test_superimposed_circulation_cancels(self, tri):
        # Push a circulation big enough to reverse the direct line; the
        # cancellation must restore an acyclic flow with the same
        # injections and no larger magnitudes.
        mf = max_flow(tri)
        pert = dict(mf.injections.flow)
        t = 11.0
        pert[("g", "b")] += t
        pert[("b", "l")] += t
        pert[("g", "l")] -= t
        inj = InjectionSolution(flow=pert, gen=dict(mf.injections.gen),
                                load=dict(mf.injections.load))
        assert check_kirchhoff(tri, inj)
        out = cancel_cycles(tri, inj)
        assert check_kirchhoff(tri, out)
        for key in pert:
            assert abs(out.flow[key]) <= abs(pert[key]) + 1e-12
        assert out.flow == cancel_cycles(tri, out).flow  # acyclic fixpoint


class TestLift:
    def test_any_tree_flow_lifts(self):
        for seed in range(25):
            net = random_tree(seed, max_buses=15)
            mf = max_flow(net)
            sol = lift_flow_to_ldc(net, mf.injections)
            assert validate_solution(net, sol).ok
            assert check_power_law(net, sol, 1e-7)

    def test_free_intervals_lift_the_max_flow(self, tri):
        mf = max_flow(tri)
        net = free_tri()
        sol = lift_flow_to_ldc(net, mf.injections)
        assert validate_solution(net, sol).ok
        assert sol.objective() == pytest.approx(14.0)

    def test_fixed_susceptance_flow_is_not_liftable(self, tri):
        mf = max_flow(tri)  # 14 is unreachable at s == 1 (optimum is 12)
        with pytest.raises(LiftInfeasible):
            lift_flow_to_ldc(tri, mf.injections)


class TestMffViaLemma:
    def test_star_tree(self):
        star = Network(
            buses=(Bus("c", BusKind.GENERATOR), Bus("x", BusKind.LOAD),
                   Bus("y", BusKind.LOAD), Bus("z", BusKind.LOAD)),
            lines=(Line("c", "x", 1, 1, 1.0), Line("c", "y", 1, 1, 1.0),
                   Line("c", "z", 1, 1, 1.0)),
        )
        lift = mff_via_lemma(star)
        assert lift.kind == "tree"
        assert lift.value == pytest.approx(3.0)
        assert validate_solution(star, lift.solution).ok

    def test_zero_lower_tri(self):
        net = free_tri(0.0, 1.0)
        lift = mff_via_lemma(net)
        assert lift.kind == "zero_lower"
        assert lift.value == pytest.approx(14.0)
        assert validate_solution(net, lift.solution).ok

    def test_mixed_intervals_not_applicable(self):
        net = tri_network(facts=True)
        assert mff_via_lemma(net) is None

    def test_value_matches_exact_solver_on_trees(self):
        for seed in range(30):
            net = random_tree(seed, max_buses=14)
            lift = mff_via_lemma(net)
            exact = solve_mff(net, MffConfig(gap_tol=1e-9),
                              warm_start=lift.solution)
            assert abs(lift.value - exact.objective) <= 1e-6


class TestScalingConstruction:
    def test_matches_the_general_lift(self):
        for seed in range(30):
            net = random_meshed_zero_lower(seed, max_buses=15)
            mf = max_flow(net)
            sol = scaled_lift_zero_lower(net, mf.injections)
            # power law exact, susceptances within [0, t], as constructed
            assert check_power_law(net, sol, 1e-9)
            for ln in net.lines:
                s = sol.susceptance[ln.key]
                assert -1e-12 <= s <= ln.s_max + 1e-9
            assert validate_solution(net, sol).ok

    def test_rejects_other_interval_shapes(self, tri):
        mf = max_flow(tri)
        with pytest.raises(ValueError):
            scaled_lift_zero_lower(tri, mf.injections)


def test_value_ordering_max_flow_dominates():
    from conftest import random_small_net
    from factsflow.mip import enumerate_signs_oracle

    for seed in range(25):
        net = random_small_net(seed, max_lines=6)
        mf = max_flow(net)
        exact = enumerate_signs_oracle(net)
        assert exact.value <= mf.value + 1e-6
