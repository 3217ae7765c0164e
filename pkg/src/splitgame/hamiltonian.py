"""Running-cost construction: matrix game values, payoff tensors, and the
convex/concave envelope operators on simplex grids.

The running cost H(t,p,q) is the mixed value of the finite zero-sum game whose
entries are the bilinear aggregation sum_ij p_i q_j f_ij(t,k,l) over the action
grids.  Finite action grids need not satisfy a pure-strategy minimax equality,
so the mixed value (which always exists) is used as the discretization.

Envelopes: vex_p takes the largest grid-convex minorant in the p slot for each
fixed q node, cav_q the smallest grid-concave majorant in q.  On 1-D slices
(two-coordinate simplex) this is the exact lower/upper convex hull; on the
three-coordinate simplex it is an iterated directional-average sweep over the
edge directions e_i - e_j.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linprog

GAME_VALUE_TOL = 1e-9
ENVELOPE_TOL = 1e-10
ENVELOPE_MAX_ITER = 100_000


class EnvelopeConvergenceError(RuntimeError):
    """Directional sweep failed to converge within the iteration cap."""


# ---------------------------------------------------------------------------
# matrix games
# ---------------------------------------------------------------------------

def matrix_game_value(m) -> tuple[float, np.ndarray, np.ndarray]:
    """Value and optimal mixed strategies of a finite zero-sum matrix game.

    Convention: the row player minimizes, the column player maximizes, i.e.
    value = min_x max_j (x^T M)_j = max_y min_i (M y)_i.  Both linear programs
    are solved and the duality gap is checked to 1e-9.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("payoff matrix must be 2-D and nonempty")
    if not np.all(np.isfinite(m)):
        raise ValueError("payoff matrix has non-finite entries")
    nr, nc = m.shape

    # row player: min v  s.t.  M^T x <= v, sum x = 1, x >= 0
    c = np.zeros(nr + 1)
    c[-1] = 1.0
    a_ub = np.hstack([m.T, -np.ones((nc, 1))])
    a_eq = np.hstack([np.ones((1, nr)), np.zeros((1, 1))])
    bounds = [(0.0, None)] * nr + [(None, None)]
    res_x = linprog(c, A_ub=a_ub, b_ub=np.zeros(nc), A_eq=a_eq, b_eq=[1.0],
                    bounds=bounds, method="highs")
    if not res_x.success:
        raise RuntimeError(f"matrix game LP (row player) failed: {res_x.message}")

    # column player: max w  s.t.  M y >= w, sum y = 1, y >= 0
    c = np.zeros(nc + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-m, np.ones((nr, 1))])
    a_eq = np.hstack([np.ones((1, nc)), np.zeros((1, 1))])
    bounds = [(0.0, None)] * nc + [(None, None)]
    res_y = linprog(c, A_ub=a_ub, b_ub=np.zeros(nr), A_eq=a_eq, b_eq=[1.0],
                    bounds=bounds, method="highs")
    if not res_y.success:
        raise RuntimeError(f"matrix game LP (column player) failed: {res_y.message}")

    v_row = float(res_x.x[-1])
    v_col = float(-res_y.fun)
    if abs(v_row - v_col) > GAME_VALUE_TOL:
        raise RuntimeError(f"duality gap {abs(v_row - v_col):.2e} exceeds {GAME_VALUE_TOL}")
    x = np.maximum(res_x.x[:-1], 0.0)
    y = np.maximum(res_y.x[:-1], 0.0)
    return v_row, x / x.sum(), y / y.sum()


def maximin_value(m) -> tuple[float, np.ndarray, np.ndarray]:
    """Value with the opposite convention: rows maximize, columns minimize.

    This is the sup-inf form used for the running cost; it reduces to
    -matrix_game_value(-M) with the strategies carried along.
    """
    v, x, y = matrix_game_value(-np.asarray(m, dtype=float))
    return -v, x, y


# ---------------------------------------------------------------------------
# payoff tensors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PayoffTensor:
    """Sampled payoff f_ij(t,k,l) on finite index and action grids.

    values has shape (n_times, nI, nJ, nK, nL) with entries in [0,1];
    time_samples is sorted and lives in [0, horizon].
    """

    values: np.ndarray
    time_samples: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        t = np.asarray(self.time_samples, dtype=float)
        if v.ndim != 5:
            raise ValueError("payoff tensor must have shape (n_t, nI, nJ, nK, nL)")
        if min(v.shape) == 0:
            raise ValueError("payoff tensor has an empty axis")
        if t.ndim != 1 or t.size != v.shape[0]:
            raise ValueError("time_samples length must match the leading axis")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("time_samples must be strictly increasing")
        if np.min(v) < 0.0 or np.max(v) > 1.0:
            raise ValueError("payoff entries must lie in [0, 1]")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "time_samples", t)

    @property
    def dim_p(self) -> int:
        return self.values.shape[1]

    @property
    def dim_q(self) -> int:
        return self.values.shape[2]

    def at_time(self, t: float) -> np.ndarray:
        """Linear interpolation of the tensor between adjacent time samples."""
        ts = self.time_samples
        if ts.size == 1 or t <= ts[0]:
            return self.values[0]
        if t >= ts[-1]:
            return self.values[-1]
        hi = int(np.searchsorted(ts, t, side="right"))
        lo = hi - 1
        w = (t - ts[lo]) / (ts[hi] - ts[lo])
        return (1.0 - w) * self.values[lo] + w * self.values[hi]

    @staticmethod
    def from_dict(d: dict) -> "PayoffTensor":
        return PayoffTensor(np.asarray(d["values"], dtype=float),
                            np.asarray(d["time_samples"], dtype=float))

    def to_dict(self) -> dict:
        return {"time_samples": self.time_samples.tolist(),
                "values": self.values.tolist()}


def eval_H(f: PayoffTensor, t: float, p, q) -> float:
    """Mixed game value of the action matrix aggregated by beliefs (p, q)."""
    pv = np.asarray(p, dtype=float)
    qv = np.asarray(q, dtype=float)
    if pv.size != f.dim_p or qv.size != f.dim_q:
        raise ValueError(
            f"dimension mismatch: tensor is {f.dim_p}x{f.dim_q}, "
            f"point is {pv.size}x{qv.size}"
        )
    ft = f.at_time(t)
    game = np.einsum("i,j,ijkl->kl", pv, qv, ft)
    value, _, _ = maximin_value(game)
    return value


# ---------------------------------------------------------------------------
# simplex grids and grid functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SimplexGrid:
    """Regular lattice on a simplex with 1, 2, or 3 coordinates.

    resolution is the number of segments per edge; nodes are all lattice
    points with coordinates in {0, 1/res, ..., 1} summing to 1.
    """

    n: int
    resolution: int
    nodes: np.ndarray = field(repr=False)
    _index: np.ndarray | None = field(repr=False, default=None)
    _triples: dict = field(repr=False, default_factory=dict)

    @staticmethod
    def build(n: int, resolution: int) -> "SimplexGrid":
        if n == 1:
            return SimplexGrid(1, 1, np.array([[1.0]]), None)
        if resolution < 1:
            raise ValueError("resolution must be >= 1")
        if n == 2:
            x = np.arange(resolution + 1) / resolution
            nodes = np.column_stack([x, 1.0 - x])
            return SimplexGrid(2, resolution, nodes, None)
        if n == 3:
            m = resolution
            index = -np.ones((m + 1, m + 1), dtype=int)
            pts = []
            k = 0
            for i in range(m + 1):
                for j in range(m + 1 - i):
                    index[i, j] = k
                    pts.append((i / m, j / m, (m - i - j) / m))
                    k += 1
            return SimplexGrid(3, m, np.array(pts), index)
        raise ValueError("only 1-, 2-, and 3-coordinate simplices are gridded")

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def directions(self) -> list[tuple[int, int]]:
        """Edge directions e_a - e_b available on this grid."""
        if self.n == 1:
            return []
        if self.n == 2:
            return [(0, 1)]
        return [(0, 1), (0, 2), (1, 2)]

    def neighbor_triples(self, direction: tuple[int, int]) -> np.ndarray:
        """(center, plus, minus) node indices with both neighbors in-grid,
        where plus = center + (e_a - e_b)/resolution."""
        if direction in self._triples:
            return self._triples[direction]
        out = self._build_triples(direction)
        self._triples[direction] = out
        return out

    def _build_triples(self, direction: tuple[int, int]) -> np.ndarray:
        m = self.resolution
        if self.n == 2:
            if direction != (0, 1):
                raise ValueError("unknown direction for a 2-coordinate grid")
            c = np.arange(1, m)
            return np.column_stack([c, c + 1, c - 1])
        if self.n != 3:
            return np.empty((0, 3), dtype=int)
        idx = self._index
        out = []
        for i in range(m + 1):
            for j in range(m + 1 - i):
                if direction == (0, 1):
                    plus, minus = (i + 1, j - 1), (i - 1, j + 1)
                elif direction == (0, 2):
                    plus, minus = (i + 1, j), (i - 1, j)
                elif direction == (1, 2):
                    plus, minus = (i, j + 1), (i, j - 1)
                else:
                    raise ValueError("unknown direction for a 3-coordinate grid")
                ok = True
                for (a, b) in (plus, minus):
                    if a < 0 or b < 0 or a + b > m:
                        ok = False
                        break
                if ok:
                    out.append((idx[i, j], idx[plus], idx[minus]))
        return np.asarray(out, dtype=int) if out else np.empty((0, 3), dtype=int)

    def step_length(self) -> float:
        """Euclidean length of one lattice step along an edge direction."""
        return np.sqrt(2.0) / self.resolution

    def nearest_index(self, p) -> int:
        pv = np.asarray(p, dtype=float)
        return int(np.argmin(np.sum((self.nodes - pv) ** 2, axis=1)))

    def interpolate(self, values: np.ndarray, p) -> float:
        """Barycentric-linear interpolation of node values at a point."""
        pv = np.asarray(p, dtype=float)
        if self.n == 1:
            return float(values[0])
        if self.n == 2:
            return float(np.interp(pv[0], self.nodes[:, 0], values))
        m = self.resolution
        idx = self._index
        a = min(max(pv[0], 0.0), 1.0) * m
        b = min(max(pv[1], 0.0), 1.0) * m
        i, j = min(int(a), m), min(int(b), m)
        if i + j >= m:
            # third coordinate vanished: interpolate along the k=0 edge
            i0 = min(int(a), m - 1)
            w = a - i0
            v0 = values[idx[i0, m - i0]]
            v1 = values[idx[i0 + 1, m - i0 - 1]]
            return float((1.0 - w) * v0 + w * v1)
        fa, fb = a - i, b - j
        if i + j <= m - 2 and fa + fb > 1.0:
            w0, w1, w2 = fa + fb - 1.0, 1.0 - fb, 1.0 - fa
            n0, n1, n2 = idx[i + 1, j + 1], idx[i + 1, j], idx[i, j + 1]
            return float(w0 * values[n0] + w1 * values[n1] + w2 * values[n2])
        w0 = max(0.0, 1.0 - fa - fb)
        tot = w0 + fa + fb
        return float((w0 * values[idx[i, j]] + fa * values[idx[i + 1, j]]
                      + fb * values[idx[i, j + 1]]) / tot)

    def interpolate_many(self, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
        if self.n == 1:
            return np.full(pts.shape[0], float(values[0]))
        if self.n == 2:
            return np.interp(pts[:, 0], self.nodes[:, 0], values)
        return np.array([self.interpolate(values, p) for p in pts])


@dataclass
class GridFunction:
    """Real values on the product of a p-grid and a q-grid."""

    p_grid: SimplexGrid
    q_grid: SimplexGrid
    values: np.ndarray  # shape (n_p_nodes, n_q_nodes)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        expect = (self.p_grid.n_nodes, self.q_grid.n_nodes)
        if v.shape != expect:
            raise ValueError(f"values shape {v.shape} does not match grid {expect}")
        self.values = v

    def copy(self) -> "GridFunction":
        return GridFunction(self.p_grid, self.q_grid, self.values.copy())


# ---------------------------------------------------------------------------
# envelopes
# ---------------------------------------------------------------------------

def lower_hull_1d(y: np.ndarray) -> np.ndarray:
    """Largest convex minorant of uniformly spaced samples (monotone chain)."""
    m = y.size
    if m <= 2:
        return y.copy()
    stack = [0]
    for i in range(1, m):
        while len(stack) >= 2:
            a, b = stack[-2], stack[-1]
            # pop b while slope(a,b) > slope(b,i)
            if (y[b] - y[a]) * (i - b) <= (y[i] - y[b]) * (b - a):
                break
            stack.pop()
        stack.append(i)
    out = np.empty(m)
    for a, b in zip(stack[:-1], stack[1:]):
        t = np.arange(0, b - a + 1) / (b - a)
        out[a:b + 1] = (1.0 - t) * y[a] + t * y[b]
        out[b] = y[b]
    out[stack[0]] = y[stack[0]]
    return np.minimum(out, y)


def _grid_vex(values: np.ndarray, grid: SimplexGrid) -> np.ndarray:
    """Grid-convex envelope of one slice (1-D array over grid nodes)."""
    if grid.n == 1:
        return values.copy()
    if grid.n == 2:
        return lower_hull_1d(values)
    triples = [grid.neighbor_triples(d) for d in grid.directions()]
    g = values
    v = values.copy()
    for _ in range(ENVELOPE_MAX_ITER):
        cand = np.full_like(v, np.inf)
        for tr in triples:
            if tr.size == 0:
                continue
            avg = 0.5 * (v[tr[:, 1]] + v[tr[:, 2]])
            np.minimum.at(cand, tr[:, 0], avg)
        new = np.minimum(g, cand)
        change = np.max(np.abs(new - v)) if v.size else 0.0
        v = new
        if change < ENVELOPE_TOL:
            return v
    raise EnvelopeConvergenceError(
        f"envelope sweep did not converge in {ENVELOPE_MAX_ITER} iterations"
    )


def vex_p(g: GridFunction) -> GridFunction:
    """Largest grid-convex minorant in p, slice by slice over q nodes."""
    out = np.empty_like(g.values)
    for jq in range(g.q_grid.n_nodes):
        out[:, jq] = _grid_vex(g.values[:, jq], g.p_grid)
    return GridFunction(g.p_grid, g.q_grid, out)


def cav_q(g: GridFunction) -> GridFunction:
    """Smallest grid-concave majorant in q, slice by slice over p nodes."""
    out = np.empty_like(g.values)
    for ip in range(g.p_grid.n_nodes):
        out[ip, :] = -_grid_vex(-g.values[ip, :], g.q_grid)
    return GridFunction(g.p_grid, g.q_grid, out)


# ---------------------------------------------------------------------------
# Hamiltonian fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HamiltonianField:
    """Bounded Lipschitz running cost with batch evaluation.

    fn(t, P, Q) takes node arrays P (a, dim_p) and Q (b, dim_q) and returns an
    (a, b) array.  bound dominates |H|; lipschitz is the recorded (measured or
    declared) Lipschitz constant in (t, p, q).
    """

    name: str
    fn: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    dim_p: int
    dim_q: int
    bound: float
    lipschitz: float
    kind: str = "analytic"
    pair_fn: Callable[[float, np.ndarray, np.ndarray], np.ndarray] | None = None
    time_dependent: bool = False

    def on_paths(self, t: float, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        """Elementwise evaluation H(t, P[i], Q[i]) along coupled paths."""
        if self.pair_fn is not None:
            return self.pair_fn(t, P, Q)
        if self.dim_q == 1:
            return self.fn(t, P, np.ones((1, 1)))[:, 0]
        return np.array([self.fn(t, P[i:i + 1], Q[i:i + 1])[0, 0] for i in range(P.shape[0])])

    def __call__(self, t: float, p, q=None) -> float:
        pv = np.atleast_2d(np.asarray(p, dtype=float))
        if q is None:
            if self.dim_q != 1:
                raise ValueError("q is required when the field has a nontrivial q slot")
            qv = np.ones((1, 1))
        else:
            qv = np.atleast_2d(np.asarray(q, dtype=float))
        return float(self.fn(t, pv, qv)[0, 0])

    def on_grid(self, t: float, p_grid: SimplexGrid, q_grid: SimplexGrid) -> GridFunction:
        if p_grid.nodes.shape[1] != self.dim_p or q_grid.nodes.shape[1] != self.dim_q:
            raise ValueError("grid dimensions do not match the field")
        return GridFunction(p_grid, q_grid, self.fn(t, p_grid.nodes, q_grid.nodes))


def _outer(fp: np.ndarray, fq: np.ndarray) -> np.ndarray:
    return fp[:, None] * fq[None, :]


def analytic_field(name: str, **params) -> HamiltonianField:
    """Closed-form running costs used by golden tests and the CLI.

    Names: zero, constant(level), tent(center), quad_convex(center),
    double_well(left, right), bilinear, saddle_mix(scale).
    """
    if name == "zero":
        return HamiltonianField("zero", lambda t, P, Q: np.zeros((P.shape[0], Q.shape[0])),
                                int(params.get("dim_p", 2)), int(params.get("dim_q", 1)),
                                0.0, 0.0, pair_fn=lambda t, P, Q: np.zeros(P.shape[0]))
    if name == "constant":
        c = float(params.get("level", 0.5))
        return HamiltonianField(
            "constant", lambda t, P, Q: np.full((P.shape[0], Q.shape[0]), c),
            int(params.get("dim_p", 2)), int(params.get("dim_q", 1)), abs(c), 0.0,
            pair_fn=lambda t, P, Q: np.full(P.shape[0], c))
    if name == "tent":
        c = float(params.get("center", 0.5))
        def fn(t, P, Q, c=c):
            return _outer(0.5 - np.abs(P[:, 0] - c), np.ones(Q.shape[0]))
        return HamiltonianField("tent", fn, 2, 1, 0.5, 1.0)
    if name == "quad_convex":
        c = float(params.get("center", 0.4))
        def fn(t, P, Q, c=c):
            return _outer((P[:, 0] - c) ** 2, np.ones(Q.shape[0]))
        bound = max(c, 1 - c) ** 2
        return HamiltonianField("quad_convex", fn, 2, 1, bound, 2 * max(c, 1 - c))
    if name == "double_well":
        lo = float(params.get("left", 0.2))
        hi = float(params.get("right", 0.8))
        def fn(t, P, Q, lo=lo, hi=hi):
            x = P[:, 0]
            return _outer(16.0 * (x - lo) ** 2 * (x - hi) ** 2, np.ones(Q.shape[0]))
        xs = np.linspace(0, 1, 2001)
        w = 16.0 * (xs - lo) ** 2 * (xs - hi) ** 2
        lip = float(np.max(np.abs(np.diff(w))) / (xs[1] - xs[0]))
        return HamiltonianField("double_well", fn, 2, 1, float(np.max(np.abs(w))), lip)
    if name == "bilinear":
        def fn(t, P, Q):
            return _outer(P[:, 0], Q[:, 0])
        def pair(t, P, Q):
            return P[:, 0] * Q[:, 0]
        return HamiltonianField("bilinear", fn, 2, 2, 1.0, 1.0, pair_fn=pair)
    if name == "saddle_mix":
        s = float(params.get("scale", 0.5))
        def fn(t, P, Q, s=s):
            return s * _outer(np.cos(np.pi * P[:, 0]), np.cos(np.pi * Q[:, 0]))
        def pair(t, P, Q, s=s):
            return s * np.cos(np.pi * P[:, 0]) * np.cos(np.pi * Q[:, 0])
        return HamiltonianField("saddle_mix", fn, 2, 2, s, s * np.pi, pair_fn=pair)
    raise ValueError(f"unknown analytic hamiltonian {name!r}")


def tensor_field(f: PayoffTensor, horizon: float = 1.0) -> HamiltonianField:
    """Running cost backed by a payoff tensor; bound/Lipschitz measured."""
    def fn(t, P, Q):
        out = np.empty((P.shape[0], Q.shape[0]))
        for a in range(P.shape[0]):
            for b in range(Q.shape[0]):
                out[a, b] = eval_H(f, t, P[a], Q[b])
        return out

    time_dependent = f.time_samples.size > 1
    bound = float(np.max(np.abs(f.values)))
    pg = SimplexGrid.build(f.dim_p, 8) if f.dim_p <= 3 else None
    qg = SimplexGrid.build(f.dim_q, 8) if f.dim_q <= 3 else None
    lip = 0.0
    if pg is not None and qg is not None:
        ts = np.unique(np.clip(f.time_samples, 0.0, horizon))
        if ts.size == 0:
            ts = np.array([0.0])
        probe_t = ts[:: max(1, ts.size // 4)]
        for t in probe_t:
            h = np.array([[eval_H(f, float(t), p, q) for q in qg.nodes] for p in pg.nodes])
            for tr in (pg.neighbor_triples(d) for d in pg.directions()):
                if tr.size:
                    d = np.abs(h[tr[:, 1], :] - h[tr[:, 0], :]) / pg.step_length()
                    lip = max(lip, float(np.max(d)))
            for tr in (qg.neighbor_triples(d) for d in qg.directions()):
                if tr.size:
                    d = np.abs(h[:, tr[:, 1]] - h[:, tr[:, 0]]) / qg.step_length()
                    lip = max(lip, float(np.max(d)))
    return HamiltonianField("tensor", fn, f.dim_p, f.dim_q, bound, lip, kind="tensor",
                            time_dependent=time_dependent)
