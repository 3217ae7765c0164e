import numpy as np
import pytest

from splitgame.arena import (
    BudgetExceededError,
    Strategy,
    StrategyFamily,
    dpp_diagnostic,
    preset_family,
    resolve_controls,
    table_strategies,
    value_bracket,
)
from splitgame.hamiltonian import SimplexGrid, analytic_field
from splitgame.hj import solve
from splitgame.sde import (
    FeedbackControl,
    NoiseGrid,
    constant_control,
    directional_control,
    zero_control,
)
from splitgame.splitting import unit_segment_spec


def one_sided_reference(h, res=100, n_steps=64):
    pg = SimplexGrid.build(2, res)
    qg = SimplexGrid.build(1, 1)
    return solve(h, pg, qg, 1.0, n_steps)


class TestResolveControls:
    def test_constant_strategies_constant_paths(self):
        noise = NoiseGrid(0.0, 1.0, 1 / 32, 8, 0, 2, 2)
        a = constant_control(0.0, 1.0, np.full((2, 2), 0.2))
        b = constant_control(0.0, 1.0, np.full((2, 2), -0.1))
        u, v = resolve_controls(0.0, [0.5, 0.5], [0.5, 0.5], a, b, noise)
        np.testing.assert_array_equal(u, np.full((8, 1, 2, 2), 0.2))
        np.testing.assert_array_equal(v, np.full((8, 1, 2, 2), -0.1))

    def test_echo_vs_constant(self):
        c = np.full((2, 2), 0.3)

        def echo(j, view):
            if view.opp_controls.shape[1] == 0:
                return np.zeros((2, 2))
            return view.opp_controls[:, -1]

        alpha = FeedbackControl(np.array([0.0, 0.5, 1.0]), echo, 2)
        beta = constant_control(0.0, 1.0, c)
        noise = NoiseGrid(0.0, 1.0, 1 / 16, 4, 0, 2, 2)
        u, v = resolve_controls(0.0, [0.5, 0.5], [0.5, 0.5], alpha, beta, noise)
        np.testing.assert_array_equal(u[:, 0], 0.0)
        np.testing.assert_array_equal(u[:, 1], np.broadcast_to(c, (4, 2, 2)))

    def test_randomized_tables_reproducible(self):
        grid = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
        catalogue = [np.zeros((2, 2)), np.eye(2) * 0.4]
        fam = table_strategies(2, grid, catalogue, count=3, seed=5)
        fam2 = table_strategies(2, grid, catalogue, count=3, seed=5)
        noise = NoiseGrid(0.0, 1.0, 1 / 16, 6, 3, 2, 2)
        for s1, s2 in zip(fam.strategies, fam2.strategies):
            u1, v1 = resolve_controls(0.0, [0.5, 0.5], [0.5, 0.5],
                                      s1.build(0.0, 1.0),
                                      fam.strategies[0].build(0.0, 1.0), noise)
            u2, v2 = resolve_controls(0.0, [0.5, 0.5], [0.5, 0.5],
                                      s2.build(0.0, 1.0),
                                      fam2.strategies[0].build(0.0, 1.0), noise)
            np.testing.assert_array_equal(u1, u2)
            np.testing.assert_array_equal(v1, v2)


class TestValueBracket:
    def test_constant_H_exact_both_sides(self):
        h = analytic_field("constant", level=0.25, dim_q=2)
        fam = preset_family(2)
        br = value_bracket(0.0, [0.5, 0.5], [0.5, 0.5], h, fam, fam,
                           horizon=1.0, dt=1 / 32, n_paths=64, seed=0)
        assert abs(br.lower - 0.25) <= 1e-12
        assert abs(br.upper - 0.25) <= 1e-12
        assert br.ordered

    def test_bracket_order_exact(self):
        h = analytic_field("bilinear")
        fam1 = preset_family(2, scale=0.8)
        fam2 = preset_family(2, scale=0.8)
        br = value_bracket(0.0, [0.4, 0.6], [0.3, 0.7], h, fam1, fam2,
                           horizon=1.0, dt=1 / 64, n_paths=500, seed=1)
        assert br.lower <= br.upper + 1e-12

    def test_split_family_beats_freeze_on_tent(self):
        tent = analytic_field("tent")
        spec = unit_segment_spec(steps=128, horizon=0.05)
        fam1 = preset_family(2, split_spec=spec)
        fam2 = StrategyFamily(1, [Strategy("zero", lambda t, T: zero_control(t, T, 1))])
        ref = one_sided_reference(tent, res=200, n_steps=128)
        br = value_bracket(0.0, spec.p.coords, [1.0], tent, fam1, fam2,
                           horizon=1.0, dt=0.05 / 128, n_paths=2000, seed=2,
                           reference=ref)
        assert br.upper <= 0.08
        assert abs(br.reference) <= 1e-2
        # the split strategy is the minimizer; freezing pays H(p0) ~ 0.5
        assert br.table[fam1.names.index("zero"), 0] >= 0.4

    def test_adding_strategy_never_hurts(self):
        h = analytic_field("bilinear")
        fam1 = preset_family(2, scale=0.5)
        fam2 = preset_family(2, scale=0.5)
        br = value_bracket(0.0, [0.5, 0.5], [0.5, 0.5], h, fam1, fam2,
                           horizon=1.0, dt=1 / 32, n_paths=300, seed=3)
        bigger1 = fam1.extended(Strategy(
            "dir2", lambda t, T: directional_control(t, T, 2, 1.5)))
        br2 = value_bracket(0.0, [0.5, 0.5], [0.5, 0.5], h, bigger1, fam2,
                            horizon=1.0, dt=1 / 32, n_paths=300, seed=3)
        assert br2.upper <= br.upper + 1e-12
        bigger2 = fam2.extended(Strategy(
            "dir2", lambda t, T: directional_control(t, T, 2, 1.5)))
        br3 = value_bracket(0.0, [0.5, 0.5], [0.5, 0.5], h, fam1, bigger2,
                            horizon=1.0, dt=1 / 32, n_paths=300, seed=3)
        assert br3.lower >= br.lower - 1e-12

    def test_convex_H_no_incentive_to_split(self):
        # spread cannot lower the time integral of a convex cost below the
        # envelope value, so the zero control is the restricted minimizer
        h = analytic_field("quad_convex")
        spec = unit_segment_spec(steps=64, horizon=0.125)
        fam1 = preset_family(2, scale=0.4, split_spec=spec)
        fam2 = StrategyFamily(1, [Strategy("zero", lambda t, T: zero_control(t, T, 1))])
        br = value_bracket(0.0, spec.p.coords, [1.0], h, fam1, fam2,
                           horizon=1.0, dt=0.125 / 64, n_paths=1500, seed=6)
        stay = h(0.0, spec.p.coords) * 1.0
        i_zero = fam1.names.index("zero")
        assert abs(br.table[i_zero, 0] - stay) <= 1e-12  # frozen path, exact quadrature
        assert br.upper >= stay - 3 * br.upper_se - 1e-12
        assert np.argmin(br.table[:, 0]) == i_zero

    def test_budget_guard(self):
        h = analytic_field("bilinear")
        strategies = [Strategy(f"s{i}", lambda t, T: zero_control(t, T, 2))
                      for i in range(101)]
        fam = StrategyFamily(2, strategies)
        with pytest.raises(BudgetExceededError):
            value_bracket(0.0, [0.5, 0.5], [0.5, 0.5], h, fam, fam,
                          horizon=1.0, dt=1 / 32, n_paths=10, seed=0)


class TestDppDiagnostic:
    def test_zero_H_gap_zero(self):
        zero = analytic_field("zero")
        ref = one_sided_reference(zero, res=50, n_steps=32)
        fam1 = StrategyFamily(2, [Strategy("zero", lambda t, T: zero_control(t, T, 2))])
        fam2 = StrategyFamily(1, [Strategy("zero", lambda t, T: zero_control(t, T, 1))])
        rep = dpp_diagnostic(0.0, 0.125, [0.5, 0.5], [1.0], zero, fam2, fam1, ref,
                             dt=1 / 32, n_paths=16, seed=0)
        assert rep.gap == 0.0

    def test_tent_gap_small(self):
        tent = analytic_field("tent")
        ref = one_sided_reference(tent, res=200, n_steps=128)
        spec = unit_segment_spec(steps=128, horizon=0.125)
        fam1 = preset_family(2, split_spec=spec)
        fam2 = StrategyFamily(1, [Strategy("zero", lambda t, T: zero_control(t, T, 1))])
        rep = dpp_diagnostic(0.0, 0.125, spec.p.coords, [1.0], tent, fam2, fam1, ref,
                             dt=0.125 / 128, n_paths=2000, seed=4)
        assert -0.05 <= rep.gap <= 0.05

    def test_bilinear_gap_small(self):
        h = analytic_field("bilinear")
        pg = SimplexGrid.build(2, 100)
        qg = SimplexGrid.build(2, 100)
        ref = solve(h, pg, qg, 1.0, 64)
        fam1 = preset_family(2, scale=0.5)
        fam2 = preset_family(2, scale=0.5)
        rep = dpp_diagnostic(0.0, 0.125, [0.4, 0.6], [0.7, 0.3], h, fam2, fam1, ref,
                             dt=1 / 64, n_paths=4000, seed=5)
        assert -0.05 <= rep.gap <= 0.05

    def test_requires_grid_time(self):
        zero = analytic_field("zero")
        ref = one_sided_reference(zero, res=50, n_steps=32)
        fam1 = StrategyFamily(2, [Strategy("zero", lambda t, T: zero_control(t, T, 2))])
        fam2 = StrategyFamily(1, [Strategy("zero", lambda t, T: zero_control(t, T, 1))])
        with pytest.raises(ValueError):
            dpp_diagnostic(0.0, 0.1234, [0.5, 0.5], [1.0], zero, fam2, fam1, ref,
                           dt=1 / 32, n_paths=16, seed=0)
