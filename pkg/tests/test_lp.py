import io

import numpy as np
import pytest

from cvarmdp import chains, lp, model, risk
from cvarmdp.lp import Constraint, LinearProgram, Variable


def one_pair_instance(r=5.0):
    return model.MdpInstance("one", ("s",), (("a",),), np.array([[1.0]]),
                             rewards=np.array([r]))


class TestSolve:
    def test_simple_max(self):
        prog = LinearProgram("t", "max", {"z": 1.0},
                             (Variable("z", -np.inf, np.inf),),
                             (Constraint("cap", {"z": 1.0}, "<=", 3.0),))
        sol = lp.solve(prog)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(3.0)
        assert sol.vertex

    def test_unbounded(self):
        prog = LinearProgram("t", "max", {"z": 1.0},
                             (Variable("z", -np.inf, np.inf),), ())
        assert lp.solve(prog).status == "unbounded"

    def test_infeasible(self):
        prog = LinearProgram("t", "max", {"z": 1.0},
                             (Variable("z", 0.0, np.inf),),
                             (Constraint("neg", {"z": 1.0}, "<=", -1.0),))
        assert lp.solve(prog).status == "infeasible"

    def test_deterministic_repeats(self):
        inst = model.builtin("example2")
        prog = lp.build_dual_lp(inst, risk.RiskParams(0.7))
        a = lp.solve(prog, require_vertex=True)
        b = lp.solve(prog, require_vertex=True)
        assert a.values == b.values

    def test_validation_catches_undeclared(self):
        with pytest.raises(ValueError, match="undeclared"):
            LinearProgram("t", "min", {"w": 1.0}, (Variable("z"),), ())


class TestDualLp:
    def test_example2_value(self):
        sol = lp.solve(lp.build_dual_lp(model.builtin("example2"), risk.RiskParams(0.7)))
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(93.24, abs=0.01)

    def test_forced_single_pair(self):
        for beta in (0.0, 0.5):
            sol = lp.solve(lp.build_dual_lp(one_pair_instance(7.0), risk.RiskParams(0.3, beta)))
            assert sol.objective == pytest.approx(7.0 + beta * 7.0, abs=1e-9)

    def test_row_counts_deduplicate(self):
        inst = model.builtin("example2")  # 9 pairs, 9 distinct rewards
        params = risk.RiskParams(0.7)
        dedup = lp.build_dual_lp(inst, params)
        assert dedup.n_structural_rows() == 9 + 3 + 1
        # force duplicate rewards and watch the tail rows shrink
        dup = model.MdpInstance("dup", inst.states, inst.actions, inst.kernel,
                                rewards=np.repeat([1.0, 2.0, 3.0], 3))
        assert lp.build_dual_lp(dup, params).n_structural_rows() == 3 + 3 + 1
        assert lp.build_dual_lp(dup, params, per_pair_tail=True).n_structural_rows() == 9 + 3 + 1

    def test_endowment_mean_cvar_value(self):
        sol = lp.solve(lp.build_dual_lp(model.builtin("endowment"), risk.RiskParams(0.9, 0.5)))
        assert sol.objective == pytest.approx(96.84, abs=0.01)

    def test_bound_inclusive_row_counts(self):
        # with sign rows counted, the per-pair dual layout has
        # |S| + 2 * sum |A(i)| + 1 rows and the vertex program
        # L + 2 * sum |A(i)| + 2
        inst = model.builtin("example2")
        params = risk.RiskParams(0.7)
        dual = lp.build_dual_lp(inst, params, per_pair_tail=True)
        assert dual.n_rows_with_bounds() == 3 + 2 * 9 + 1
        verts = chains.polytope_vertices(inst)
        primal = lp.build_primal_lp(inst, verts, params)
        assert primal.n_rows_with_bounds() == len(verts) + 2 * 9 + 2


class TestPrimalLp:
    def test_forced_single_pair(self):
        inst = one_pair_instance(3.0)
        verts = chains.polytope_vertices(inst)
        sol = lp.solve(lp.build_primal_lp(inst, verts, risk.RiskParams(0.4)))
        assert sol.objective == pytest.approx(3.0, abs=1e-9)
        assert sol.values["y"] == pytest.approx(3.0, abs=1e-9)

    def test_example2_matches_dual(self):
        inst = model.builtin("example2")
        params = risk.RiskParams(0.7)
        verts = chains.polytope_vertices(inst)
        primal = lp.solve(lp.build_primal_lp(inst, verts, params), require_vertex=True)
        dual = lp.solve(lp.build_dual_lp(inst, params), require_vertex=True)
        assert primal.objective == pytest.approx(dual.objective, abs=2e-6)

    def test_excess_variables_tight_at_optimum(self):
        inst = model.builtin("example2")
        params = risk.RiskParams(0.7)
        verts = chains.polytope_vertices(inst)
        sol = lp.solve(lp.build_primal_lp(inst, verts, params), require_vertex=True)
        y = sol.values["y"]
        for k in range(inst.n_pairs):
            i = int(inst.pair_state[k])
            expected = max(float(inst.rewards[k]) - y, 0.0)
            assert sol.values[f"w_{i}_{k - inst.offsets[i]}"] == pytest.approx(expected, abs=1e-8)

    def test_endowment_recovers_tail_level(self):
        inst = model.builtin("endowment")
        verts = chains.polytope_vertices(inst)
        sol = lp.solve(lp.build_primal_lp(inst, verts, risk.RiskParams(0.9, 0.5)),
                       require_vertex=True)
        assert sol.values["y"] == 84.0
        assert sol.objective == pytest.approx(96.84, abs=0.01)

    def test_weak_duality_on_random(self):
        for seed in range(5):
            inst = model.random_instance(seed, 3, 2)
            params = risk.RiskParams(0.6, 0.1)
            verts = chains.polytope_vertices(inst)
            primal = lp.solve(lp.build_primal_lp(inst, verts, params))
            dual = lp.solve(lp.build_dual_lp(inst, params))
            assert primal.objective == pytest.approx(dual.objective, abs=2e-6)


class TestAverageLp:
    def test_alpha_zero_at_lower_bound_is_classical(self):
        inst = model.builtin("example2")
        lo, _ = inst.reward_bounds()
        sol = lp.solve(lp.build_average_lp(inst, lo, risk.RiskParams(0.0)))
        classical = max(
            float(chains.stationary_distribution(inst, dp.to_stationary(inst)).x
                  @ inst.rewards)
            for dp in model.deterministic_policies(inst))
        assert sol.objective == pytest.approx(classical, abs=1e-8)

    def test_top_endpoint_collapses(self):
        inst = model.builtin("example2")
        sol = lp.solve(lp.build_average_lp(inst, 94.0, risk.RiskParams(0.7)))
        assert sol.objective == pytest.approx(94.0, abs=1e-9)

    def test_endpoint_minimum_near_published_value(self):
        inst = model.builtin("example2")
        params = risk.RiskParams(0.7)
        bp = risk.breakpoints(inst)
        vals = [lp.solve(lp.build_average_lp(inst, float(y), params)).objective
                for y in bp.values]
        assert min(vals) == pytest.approx(93.24, abs=0.01)

    def test_envelope_midpoint_convex_along_endpoints(self):
        inst = model.random_instance(11, 3, 2)
        params = risk.RiskParams(0.7)
        bp = risk.breakpoints(inst)
        vals = np.array([lp.solve(lp.build_average_lp(inst, float(y), params)).objective
                         for y in bp.values])
        ys = bp.values
        for i in range(1, len(ys) - 1):
            lam = (ys[i + 1] - ys[i]) / (ys[i + 1] - ys[i - 1])
            chord = lam * vals[i - 1] + (1 - lam) * vals[i + 1]
            assert vals[i] <= chord + 1e-7


class TestLevelLp:
    def test_matches_dual_optimum(self):
        for seed in range(4):
            inst = model.random_instance(seed, 4, 2)
            params = risk.RiskParams(0.8, 0.25)
            level = lp.solve(lp.build_level_lp(inst, params))
            dual = lp.solve(lp.build_dual_lp(inst, params))
            assert level.objective == pytest.approx(dual.objective, abs=2e-6)

    def test_example2_interior_level(self):
        inst = model.builtin("example2")
        sol = lp.solve(lp.build_level_lp(inst, risk.RiskParams(0.7)))
        assert sol.objective == pytest.approx(93.2402, abs=1e-3)
        assert 70.0 < sol.values["y"] < 71.0

    def test_bounded_interval(self):
        inst = model.builtin("example2")
        sol = lp.solve(lp.build_level_lp(inst, risk.RiskParams(0.7), y_lo=94.0, y_hi=94.0))
        assert sol.objective == pytest.approx(94.0, abs=1e-9)


class TestSparsifyLp:
    def test_forced_single_pair(self):
        inst = one_pair_instance(2.0)
        params = risk.RiskParams(0.4)
        prog = lp.build_sparsify_lp(inst, 2.0, params, None)
        sol = lp.solve(prog, require_vertex=True)
        assert sol.values["x_0_0"] == pytest.approx(1.0)
        assert sol.values["x0"] == pytest.approx(0.4)

    def test_example2_vertex_support(self):
        inst = model.builtin("example2")
        params = risk.RiskParams(0.7)
        dual = lp.solve(lp.build_dual_lp(inst, params), require_vertex=True)
        x = lp.pair_values(inst, dual)
        y = risk.var(risk.reward_distribution(inst, x), 0.7)
        bp = risk.breakpoints(inst)
        sol = lp.solve(lp.build_sparsify_lp(inst, y, params, bp.delta), require_vertex=True)
        assert sol.objective == pytest.approx(93.24, abs=0.01)
        xs = lp.pair_values(inst, sol)
        assert (xs > 1e-9).sum() <= inst.n_states + 1

    def test_random_instance_randomization_bound(self):
        inst = model.random_instance(13, 4, 3)
        params = risk.RiskParams(0.7)
        dual = lp.solve(lp.build_dual_lp(inst, params), require_vertex=True)
        x = lp.pair_values(inst, dual)
        y = risk.var(risk.reward_distribution(inst, x), 0.7)
        sol = lp.solve(lp.build_sparsify_lp(inst, y, params, risk.breakpoints(inst).delta),
                       require_vertex=True)
        if sol.values["x0"] > 1e-9:
            pol = model.extract_policy(inst, lp.pair_values(inst, sol))
            assert model.n_randomizations(inst, pol) <= 1


class TestLpFileExport:
    def test_tokens_present(self):
        inst = model.builtin("example2")
        prog = lp.build_dual_lp(inst, risk.RiskParams(0.7))
        buf = io.StringIO()
        lp.write_lp_file(prog, buf)
        text = buf.getvalue()
        assert text.startswith("\\ example2-dual\nMaximize\n")
        assert " obj: 1 z2" in text
        assert "Subject To" in text
        assert "balance_0:" in text and "norm:" in text
        assert "z2 free" in text
        assert text.rstrip().endswith("End")

    def test_bounds_section(self):
        inst = model.builtin("example2")
        verts = chains.polytope_vertices(inst)
        prog = lp.build_primal_lp(inst, verts, risk.RiskParams(0.7))
        buf = io.StringIO()
        lp.write_lp_file(prog, buf)
        assert "4 <= y <= 94" in buf.getvalue()

    def test_writes_to_path(self, tmp_path):
        prog = lp.build_average_lp(one_pair_instance(), 5.0, risk.RiskParams(0.2))
        target = tmp_path / "prog.lp"
        lp.write_lp_file(prog, target)
        assert target.read_text().startswith("\\ one-average")
