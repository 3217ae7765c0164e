import numpy as np
import pytest

from splitgame.hamiltonian import (
    GridFunction,
    PayoffTensor,
    SimplexGrid,
    analytic_field,
    cav_q,
    eval_H,
    lower_hull_1d,
    matrix_game_value,
    maximin_value,
    tensor_field,
    vex_p,
)


def brute_force_minimax_2x2(m, steps=2000):
    """Oracle: min over row mixtures of max over columns, dense grid."""
    xs = np.linspace(0.0, 1.0, steps + 1)
    mix = np.column_stack([xs, 1.0 - xs])
    payoffs = mix @ m
    return float(np.min(np.max(payoffs, axis=1)))


def oracle_lower_hull(y):
    """Oracle: largest convex minorant on a uniform grid via all chords, O(m^3)."""
    m = len(y)
    out = np.array(y, dtype=float)
    for i in range(m):
        best = y[i]
        for a in range(0, i + 1):
            for b in range(i, m):
                if a == b:
                    continue
                w = (i - a) / (b - a)
                best = min(best, (1 - w) * y[a] + w * y[b])
        out[i] = best
    return out


class TestMatrixGame:
    def test_matching_pennies(self):
        v, x, y = matrix_game_value([[1.0, -1.0], [-1.0, 1.0]])
        assert abs(v) <= 1e-9
        np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-8)
        np.testing.assert_allclose(y, [0.5, 0.5], atol=1e-8)

    def test_constant_matrix(self):
        v, _, _ = matrix_game_value(np.full((3, 4), 0.7))
        assert abs(v - 0.7) <= 1e-9

    def test_identity_game_vs_bruteforce(self):
        m = np.eye(2)
        v, _, _ = matrix_game_value(m)
        assert abs(v - 0.5) <= 1e-9
        assert abs(v - brute_force_minimax_2x2(m)) <= 1e-3

    def test_random_vs_bruteforce(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            m = rng.uniform(-1, 1, size=(2, 2))
            v, _, _ = matrix_game_value(m)
            assert abs(v - brute_force_minimax_2x2(m)) <= 2e-3

    def test_zero_sum_duality_swap(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            m = rng.normal(size=(rng.integers(2, 5), rng.integers(2, 5)))
            v, x, y = matrix_game_value(m)
            v2, x2, y2 = matrix_game_value(-m.T)
            assert abs(v2 + v) <= 1e-7
            # optimal strategies swap roles; values of the swapped profile agree
            assert abs(x2 @ (-m.T) @ y2 - (-v)) <= 1e-6

    def test_strategies_achieve_value(self):
        rng = np.random.default_rng(13)
        for _ in range(30):
            m = rng.normal(size=(3, 3))
            v, x, y = matrix_game_value(m)
            assert np.max(x @ m) <= v + 1e-7   # row guarantee
            assert np.min(m @ y) >= v - 1e-7   # column guarantee

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            matrix_game_value([[np.inf, 0.0], [0.0, 1.0]])

    def test_maximin_convention(self):
        # rows maximize: value of [[1,0],[0,1]] is still 1/2 by symmetry,
        # but for [[1,0]] (single row) it is min over columns
        v, _, _ = maximin_value([[1.0, 0.0]])
        assert abs(v) <= 1e-9


class TestPayoffTensor:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            PayoffTensor(np.full((1, 2, 1, 1, 1), 1.5), [0.0])

    def test_rejects_unsorted_times(self):
        with pytest.raises(ValueError):
            PayoffTensor(np.zeros((2, 2, 1, 1, 1)), [0.5, 0.2])

    def test_time_interpolation(self):
        v = np.zeros((2, 1, 1, 1, 1))
        v[1] = 1.0
        f = PayoffTensor(v, [0.0, 1.0])
        assert abs(f.at_time(0.25)[0, 0, 0, 0] - 0.25) <= 1e-15
        assert f.at_time(-1.0)[0, 0, 0, 0] == 0.0
        assert f.at_time(2.0)[0, 0, 0, 0] == 1.0

    def test_roundtrip_dict(self):
        rng = np.random.default_rng(14)
        f = PayoffTensor(rng.uniform(size=(2, 2, 2, 2, 3)), [0.0, 1.0])
        g = PayoffTensor.from_dict(f.to_dict())
        np.testing.assert_array_equal(f.values, g.values)


class TestEvalH:
    def test_constant_in_ij_reduces_to_action_game(self):
        rng = np.random.default_rng(15)
        act = rng.uniform(size=(3, 4))
        vals = np.broadcast_to(act, (1, 2, 2, 3, 4)).copy()
        f = PayoffTensor(vals, [0.0])
        expect, _, _ = maximin_value(act)
        for p, q in [([1.0, 0.0], [0.3, 0.7]), ([0.5, 0.5], [1.0, 0.0])]:
            assert abs(eval_H(f, 0.0, p, q) - expect) <= 1e-9

    def test_single_actions_bilinear(self):
        rng = np.random.default_rng(16)
        vals = rng.uniform(size=(1, 2, 3, 1, 1))
        f = PayoffTensor(vals, [0.0])
        p = np.array([0.4, 0.6])
        q = np.array([0.2, 0.5, 0.3])
        expect = np.einsum("i,j,ij->", p, q, vals[0, :, :, 0, 0])
        assert abs(eval_H(f, 0.0, p, q) - expect) <= 1e-12

    def test_tent_construction(self):
        # K singleton, two L actions: H(p) = min(p_0, 1 - p_0)
        vals = np.zeros((1, 2, 1, 1, 2))
        vals[0, 0, 0, 0, :] = [1.0, 0.0]
        vals[0, 1, 0, 0, :] = [0.0, 1.0]
        f = PayoffTensor(vals, [0.0])
        for x in np.linspace(0.0, 1.0, 11):
            h = eval_H(f, 0.0, [x, 1.0 - x], [1.0])
            assert abs(h - (0.5 - abs(x - 0.5))) <= 1e-9

    def test_dimension_mismatch(self):
        f = PayoffTensor(np.zeros((1, 2, 2, 1, 1)), [0.0])
        with pytest.raises(ValueError):
            eval_H(f, 0.0, [1.0, 0.0, 0.0], [0.5, 0.5])

    def test_l1_lipschitz_in_p(self):
        rng = np.random.default_rng(17)
        f = PayoffTensor(rng.uniform(size=(1, 3, 2, 2, 2)), [0.0])
        q = np.array([0.5, 0.5])
        for _ in range(50):
            w1, w2 = rng.exponential(size=3), rng.exponential(size=3)
            p1, p2 = w1 / w1.sum(), w2 / w2.sum()
            gap = abs(eval_H(f, 0.0, p1, q) - eval_H(f, 0.0, p2, q))
            assert gap <= np.abs(p1 - p2).sum() + 1e-9


class TestLowerHull:
    def test_convex_fixed(self):
        x = np.linspace(0, 1, 21)
        y = (x - 0.3) ** 2
        np.testing.assert_allclose(lower_hull_1d(y), y, atol=1e-15)

    def test_tent_flattens_to_zero(self):
        x = np.linspace(0, 1, 201)
        y = 0.5 - np.abs(x - 0.5)
        np.testing.assert_allclose(lower_hull_1d(y), 0.0, atol=1e-15)

    def test_negative_square_chord(self):
        x = np.linspace(0, 1, 11)
        hull = lower_hull_1d(-x**2)
        # chord from (0,0) to (1,-1): value -x
        np.testing.assert_allclose(hull, -x, atol=1e-12)
        assert abs(hull[5] - (-0.5)) <= 1e-12

    def test_matches_chord_oracle(self):
        rng = np.random.default_rng(18)
        for _ in range(30):
            y = rng.normal(size=rng.integers(3, 40))
            np.testing.assert_allclose(lower_hull_1d(y), oracle_lower_hull(y), atol=1e-10)

    def test_below_input_exactly(self):
        rng = np.random.default_rng(19)
        for _ in range(100):
            y = rng.normal(size=30)
            assert np.all(lower_hull_1d(y) <= y)


def grid_fn(p_res, q_res, fn, n_p=2, n_q=2):
    pg = SimplexGrid.build(n_p, p_res)
    qg = SimplexGrid.build(n_q, q_res)
    vals = np.array([[fn(p, q) for q in qg.nodes] for p in pg.nodes])
    return GridFunction(pg, qg, vals)


class TestEnvelopes:
    def test_vex_fixes_convex(self):
        g = grid_fn(40, 1, lambda p, q: (p[0] - 0.3) ** 2, n_q=1)
        np.testing.assert_allclose(vex_p(g).values, g.values, atol=1e-14)

    def test_vex_tent_is_zero(self):
        g = grid_fn(200, 1, lambda p, q: 0.5 - abs(p[0] - 0.5), n_q=1)
        np.testing.assert_allclose(vex_p(g).values, 0.0, atol=1e-14)

    def test_vex_below_cav_above(self):
        rng = np.random.default_rng(20)
        pg = SimplexGrid.build(2, 30)
        qg = SimplexGrid.build(2, 15)
        g = GridFunction(pg, qg, rng.normal(size=(31, 16)))
        assert np.all(vex_p(g).values <= g.values)
        assert np.all(cav_q(g).values >= g.values)

    def test_idempotent(self):
        rng = np.random.default_rng(21)
        pg = SimplexGrid.build(2, 25)
        qg = SimplexGrid.build(2, 25)
        g = GridFunction(pg, qg, rng.normal(size=(26, 26)))
        v1 = vex_p(g)
        np.testing.assert_allclose(vex_p(v1).values, v1.values, atol=1e-10)
        c1 = cav_q(g)
        np.testing.assert_allclose(cav_q(c1).values, c1.values, atol=1e-10)

    def test_monotone(self):
        rng = np.random.default_rng(22)
        pg = SimplexGrid.build(2, 12)
        qg = SimplexGrid.build(1, 1)
        for _ in range(1000):
            a = rng.normal(size=(13, 1))
            b = a + rng.uniform(0.0, 1.0, size=(13, 1))
            va = vex_p(GridFunction(pg, qg, a)).values
            vb = vex_p(GridFunction(pg, qg, b)).values
            assert np.all(va <= vb + 1e-12)

    def test_cav_is_dual_of_vex(self):
        rng = np.random.default_rng(23)
        pg = SimplexGrid.build(2, 20)
        qg = SimplexGrid.build(2, 20)
        vals = rng.normal(size=(21, 21))
        g = GridFunction(pg, qg, vals)
        gneg = GridFunction(qg, pg, -vals.T)
        np.testing.assert_allclose(cav_q(g).values, -vex_p(gneg).values.T, atol=1e-14)

    def test_three_coord_affine_fixed(self):
        pg = SimplexGrid.build(3, 8)
        qg = SimplexGrid.build(1, 1)
        w = np.array([0.3, -0.7, 1.1])
        vals = (pg.nodes @ w)[:, None]
        g = GridFunction(pg, qg, vals)
        np.testing.assert_allclose(vex_p(g).values, vals, atol=1e-9)

    def test_three_coord_spike(self):
        pg = SimplexGrid.build(3, 6)
        qg = SimplexGrid.build(1, 1)
        vals = np.zeros((pg.n_nodes, 1))
        center = pg.nearest_index([1 / 3, 1 / 3, 1 / 3])
        vals[center, 0] = -1.0
        out = vex_p(GridFunction(pg, qg, vals)).values
        assert np.all(out <= vals + 1e-15)
        assert out[center, 0] == -1.0
        # grid-convex along every direction afterwards
        for d in pg.directions():
            tr = pg.neighbor_triples(d)
            second = out[tr[:, 1], 0] - 2 * out[tr[:, 0], 0] + out[tr[:, 2], 0]
            assert np.min(second) >= -1e-9


class TestSimplexGrid:
    def test_node_counts(self):
        assert SimplexGrid.build(1, 1).n_nodes == 1
        assert SimplexGrid.build(2, 10).n_nodes == 11
        assert SimplexGrid.build(3, 10).n_nodes == 66

    def test_interpolate_exact_on_nodes(self):
        rng = np.random.default_rng(24)
        for n in (2, 3):
            g = SimplexGrid.build(n, 7)
            vals = rng.normal(size=g.n_nodes)
            for k in range(g.n_nodes):
                assert abs(g.interpolate(vals, g.nodes[k]) - vals[k]) <= 1e-12

    def test_interpolate_reproduces_affine(self):
        rng = np.random.default_rng(25)
        for n in (2, 3):
            g = SimplexGrid.build(n, 9)
            w = rng.normal(size=n)
            vals = g.nodes @ w
            for _ in range(200):
                raw = rng.exponential(size=n)
                p = raw / raw.sum()
                assert abs(g.interpolate(vals, p) - p @ w) <= 1e-10

    def test_neighbor_triples_consistent(self):
        g = SimplexGrid.build(3, 5)
        for d in g.directions():
            tr = g.neighbor_triples(d)
            step = np.zeros(3)
            step[d[0]] += 1.0 / g.resolution
            step[d[1]] -= 1.0 / g.resolution
            np.testing.assert_allclose(g.nodes[tr[:, 1]], g.nodes[tr[:, 0]] + step, atol=1e-12)
            np.testing.assert_allclose(g.nodes[tr[:, 2]], g.nodes[tr[:, 0]] - step, atol=1e-12)


class TestAnalyticFields:
    def test_tent_values(self):
        h = analytic_field("tent")
        assert abs(h(0.0, [0.5, 0.5]) - 0.5) <= 1e-15
        assert abs(h(0.0, [1.0, 0.0])) <= 1e-15
        assert abs(h(0.0, [0.0, 1.0])) <= 1e-15

    def test_bilinear(self):
        h = analytic_field("bilinear")
        assert abs(h(0.0, [0.3, 0.7], [0.4, 0.6]) - 0.12) <= 1e-15

    def test_bound_holds_on_grid(self):
        pg = SimplexGrid.build(2, 50)
        qg = SimplexGrid.build(2, 50)
        for name in ("tent", "quad_convex", "double_well", "bilinear", "saddle_mix"):
            h = analytic_field(name)
            qg_use = qg if h.dim_q == 2 else SimplexGrid.build(1, 1)
            vals = h.on_grid(0.0, pg, qg_use).values
            assert np.max(np.abs(vals)) <= h.bound + 1e-12

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            analytic_field("nope")

    def test_tensor_field_matches_eval(self):
        rng = np.random.default_rng(26)
        f = PayoffTensor(rng.uniform(size=(2, 2, 2, 2, 2)), [0.0, 1.0])
        h = tensor_field(f)
        p, q = np.array([0.25, 0.75]), np.array([0.6, 0.4])
        assert abs(h(0.3, p, q) - eval_H(f, 0.3, p, q)) <= 1e-12
        assert h.bound <= 1.0 + 1e-12
