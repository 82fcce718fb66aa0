import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvarmdp import model, risk
from cvarmdp.risk import DiscreteDistribution

COIN = DiscreteDistribution.from_atoms([-2.0, 2.0], [0.5, 0.5])


def random_dist(rng, max_atoms=10, lo=-50.0, hi=50.0):
    n = int(rng.integers(1, max_atoms + 1))
    values = np.round(rng.uniform(lo, hi, n), 2)  # rounding forces occasional ties
    probs = rng.dirichlet(np.ones(n))
    return DiscreteDistribution.from_atoms(values, probs)


@st.composite
def distributions(draw):
    n = draw(st.integers(min_value=1, max_value=8))
    values = draw(st.lists(st.integers(min_value=-100, max_value=100),
                           min_size=n, max_size=n))
    weights = draw(st.lists(st.integers(min_value=1, max_value=20),
                            min_size=n, max_size=n))
    probs = np.array(weights, dtype=float)
    return DiscreteDistribution.from_atoms(np.array(values, dtype=float),
                                           probs / probs.sum())


class TestCanonicalForm:
    def test_sorted_and_merged(self):
        d = DiscreteDistribution.from_atoms([3.0, 1.0, 3.0], [0.25, 0.5, 0.25])
        assert list(d.values) == [1.0, 3.0]
        assert list(d.probs) == [0.5, 0.5]

    def test_zero_atoms_dropped(self):
        d = DiscreteDistribution.from_atoms([1.0, 2.0], [1.0, 0.0])
        assert len(d) == 1

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            DiscreteDistribution.from_atoms([1.0], [0.5])
        with pytest.raises(ValueError):
            DiscreteDistribution.from_atoms([1.0, 2.0], [1.5, -0.5])
        with pytest.raises(ValueError):
            DiscreteDistribution.from_atoms([np.inf], [1.0])


class TestVar:
    def test_coin_median(self):
        assert risk.var(COIN, 0.5) == -2.0

    def test_dirac(self):
        d = DiscreteDistribution.dirac(7.0)
        for alpha in (0.0, 0.3, 0.9):
            assert risk.var(d, alpha) == 7.0

    def test_alpha_zero_is_minimum(self):
        assert risk.var(COIN, 0.0) == -2.0

    def test_alpha_one_rejected(self):
        with pytest.raises(ValueError):
            risk.var(COIN, 1.0)


class TestCvar:
    def test_coin_right_tail(self):
        assert risk.cvar_right(COIN, 0.5) == pytest.approx(2.0, abs=1e-15)

    def test_coin_left_tail(self):
        assert risk.cvar_left(COIN, 0.5) == pytest.approx(-2.0, abs=1e-15)

    def test_dirac(self):
        d = DiscreteDistribution.dirac(3.5)
        assert risk.cvar_right(d, 0.25) == 3.5
        assert risk.cvar_left(d, 0.25) == 3.5

    def test_alpha_zero_is_mean(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            d = random_dist(rng)
            assert risk.cvar_right(d, 0.0) == pytest.approx(d.mean(), abs=1e-12)

    def test_partial_atom_split(self):
        d = DiscreteDistribution.from_atoms([0.0, 10.0], [0.8, 0.2])
        # top 30% of mass: the 10-atom (0.2) plus a 0.1 slice of the 0-atom
        assert risk.cvar_right(d, 0.7) == pytest.approx((0.2 * 10.0) / 0.3, abs=1e-12)

    def test_monotone_in_alpha(self):
        rng = np.random.default_rng(1)
        grid = np.arange(0.0, 0.95, 0.1)
        for _ in range(50):
            d = random_dist(rng)
            vals = [risk.cvar_right(d, a) for a in grid]
            assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_bounded_by_support(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            d = random_dist(rng)
            for alpha in (0.0, 0.3, 0.77):
                c = risk.cvar_right(d, alpha)
                assert d.values[0] - 1e-12 <= c <= d.values[-1] + 1e-12

    @given(distributions(), st.integers(min_value=1, max_value=9))
    @settings(max_examples=150, deadline=None)
    def test_tail_decomposition_identity(self, d, tenth):
        alpha = tenth / 10.0
        lhs = (1 - alpha) * risk.cvar_right(d, alpha) + alpha * risk.cvar_left(d, alpha)
        assert lhs == pytest.approx(d.mean(), abs=1e-12)


class TestRuObjective:
    def test_dirac_below(self):
        d = DiscreteDistribution.dirac(2.0)
        assert risk.ru_objective(d, 0.0, 0.5) == pytest.approx(4.0)

    def test_dirac_at(self):
        d = DiscreteDistribution.dirac(2.0)
        assert risk.ru_objective(d, 2.0, 0.5) == pytest.approx(2.0)

    def test_coin_at_minimum(self):
        assert risk.ru_objective(COIN, -2.0, 0.5) == pytest.approx(2.0)

    @given(distributions(),
           st.floats(min_value=-120, max_value=120),
           st.floats(min_value=-120, max_value=120),
           st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=150, deadline=None)
    def test_convex_in_y(self, d, y1, y2, lam):
        alpha = 0.6
        mid = lam * y1 + (1 - lam) * y2
        f = lambda y: risk.ru_objective(d, y, alpha)
        assert f(mid) <= lam * f(y1) + (1 - lam) * f(y2) + 1e-12


class TestCvarViaRu:
    def test_coin(self):
        val, y = risk.cvar_via_ru(COIN, 0.5)
        assert val == pytest.approx(2.0, abs=1e-12)
        assert y == -2.0  # both support points attain it; leftmost wins

    def test_dirac(self):
        assert risk.cvar_via_ru(DiscreteDistribution.dirac(4.0), 0.3) == (4.0, 4.0)

    def test_matches_quantile_integral(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            d = random_dist(rng)
            alpha = float(rng.uniform(0.0, 0.95))
            val, y = risk.cvar_via_ru(d, alpha)
            assert val == pytest.approx(risk.cvar_right(d, alpha), abs=1e-10)
            assert y == risk.var(d, alpha)


class TestRewardDistribution:
    def test_point_mass(self):
        kernel = np.array([[1.0], [1.0]])
        inst = model.MdpInstance("one", ("s",), (("a", "b"),), kernel,
                                 rewards=np.array([5.0, 1.0]))
        d = risk.reward_distribution(inst, np.array([1.0, 0.0]))
        assert list(d.values) == [5.0]

    def test_merges_equal_rewards(self):
        kernel = np.array([[1.0], [1.0]])
        inst = model.MdpInstance("one", ("s",), (("a", "b"),), kernel,
                                 rewards=np.array([3.0, 3.0]))
        d = risk.reward_distribution(inst, np.array([0.4, 0.6]))
        assert len(d) == 1 and d.probs[0] == pytest.approx(1.0)

    def test_next_state_weighting(self):
        inst = model.builtin("endowment")
        k = inst.pair_index("(1,0.8)", "0.8")
        x = np.zeros(inst.n_pairs)
        x[k] = 1.0
        d = risk.reward_distribution(inst, x)
        i = list(d.values).index(84.0)
        assert d.probs[i] == pytest.approx(0.7)  # bull-to-bull probability


class TestSaddleValue:
    def one_pair(self, r=5.0):
        return model.MdpInstance("one", ("s",), (("a",),), np.array([[1.0]]),
                                 rewards=np.array([r]))

    def test_zero_excess(self):
        inst = self.one_pair(5.0)
        p = risk.RiskParams(0.5)
        assert risk.saddle_value(inst, [1.0], 5.0, p) == pytest.approx(5.0)

    def test_all_excess_active_at_lower_bound(self):
        inst = model.builtin("example2")
        p = risk.RiskParams(0.7)
        x = np.full(inst.n_pairs, 1.0 / inst.n_pairs)
        lo, _ = inst.reward_bounds()
        expected = lo + (float(x @ inst.rewards) - lo) / 0.3
        assert risk.saddle_value(inst, x, lo, p) == pytest.approx(expected, abs=1e-9)

    def test_linear_in_x(self):
        inst = model.builtin("example2")
        p = risk.RiskParams(0.7, 0.2)
        rng = np.random.default_rng(4)
        for _ in range(20):
            x1, x2 = rng.random(9), rng.random(9)
            lam = float(rng.random())
            y = float(rng.uniform(4, 94))
            lhs = risk.saddle_value(inst, lam * x1 + (1 - lam) * x2, y, p)
            rhs = lam * risk.saddle_value(inst, x1, y, p) \
                + (1 - lam) * risk.saddle_value(inst, x2, y, p)
            assert lhs == pytest.approx(rhs, abs=1e-9)

    def test_min_over_breakpoints_is_cvar(self):
        inst = model.builtin("example2")
        p = risk.RiskParams(0.7)
        rng = np.random.default_rng(5)
        bp = risk.breakpoints(inst)
        for _ in range(10):
            raw = rng.random(9)
            x = raw / raw.sum()
            law = risk.reward_distribution(inst, x)
            best = min(risk.saddle_value(inst, x, float(y), p) for y in bp.values)
            assert best == pytest.approx(risk.cvar_right(law, 0.7), abs=1e-10)


class TestBreakpoints:
    def test_example2_values(self):
        bp = risk.breakpoints(model.builtin("example2"))
        assert list(bp.values) == [4, 5, 13, 39, 69, 70, 71, 77, 94]
        assert bp.delta == 1.0
        assert bp.bounds == (4.0, 94.0)

    def test_degenerate_single_value(self):
        inst = model.MdpInstance("flat", ("s",), (("a", "b"),),
                                 np.array([[1.0], [1.0]]), rewards=np.array([3.0, 3.0]))
        bp = risk.breakpoints(inst)
        assert len(bp.values) == 1 and bp.delta is None

    def test_endowment_contains_extremes(self):
        bp = risk.breakpoints(model.builtin("endowment"))
        assert 84.0 in bp.values
        assert -36.0 in bp.values
        assert bp.delta == 1.5


class TestRiskParams:
    def test_validation(self):
        risk.RiskParams(0.0)
        risk.RiskParams(0.99, 2.0)
        with pytest.raises(ValueError):
            risk.RiskParams(1.0)
        with pytest.raises(ValueError):
            risk.RiskParams(0.5, -0.1)
