"""Backward value iteration for the obstacle equation with convexity
constraints, via alternating convex/concave envelope steps.

One backward step is V[k] = Vex_p(Cav_q(V[k+1] + dt * H(t_k))), the discrete
counterpart of the three branches of the equation: the time-H term, the
"convex in p" constraint (smallest tangent eigenvalue of D^2_p V nonnegative)
and the "concave in q" constraint.  The alternation order is a tag; both
orders are available and their gap is a consistency diagnostic.

Each iterate is convex in p and concave in q simultaneously (an envelope in
one slot preserves the shape in the other on a product grid), which makes the
scheme monotone, bounded by C*(T - t), and nonexpansive in time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from splitgame.hamiltonian import (
    GridFunction,
    HamiltonianField,
    SimplexGrid,
    cav_q,
    vex_p,
)
from splitgame.simplex import rel_eigen_max, rel_eigen_min, support, tangent_basis

MAX_DT = 1.0 / 16
MIN_NODES = 11

BRANCH_TIME = 0
BRANCH_CONVEX = 1   # the lambda_min (convexity in p) constraint binds
BRANCH_CONCAVE = 2  # the lambda_max (concavity in q) constraint binds

_BRANCH_NAMES = {BRANCH_TIME: "time-H", BRANCH_CONVEX: "lambda_min", BRANCH_CONCAVE: "lambda_max"}


@dataclass
class ValueGrid:
    """Value function samples on time x p-grid x q-grid."""

    times: np.ndarray
    p_grid: SimplexGrid
    q_grid: SimplexGrid
    values: np.ndarray      # (N+1, n_p, n_q)
    order: str              # "vex_cav" (Vex o Cav) or "cav_vex"
    bound: float            # bound C of the running cost used to build this

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def slice_at(self, t: float) -> np.ndarray:
        """Values at a grid time (linear interpolation between time slices)."""
        ts = self.times
        if t <= ts[0]:
            return self.values[0]
        if t >= ts[-1]:
            return self.values[-1]
        pos = (t - ts[0]) / self.dt
        k = int(pos)
        w = pos - k
        if w < 1e-12:
            return self.values[k]
        return (1.0 - w) * self.values[k] + w * self.values[k + 1]

    def value_at(self, t: float, p, q=None) -> float:
        sl = self.slice_at(t)
        qv = np.asarray([1.0]) if q is None else np.asarray(q, dtype=float)
        # interpolate in q for each p-node column first, then in p
        col = np.array([self.q_grid.interpolate(sl[i], qv) for i in range(self.p_grid.n_nodes)])
        return self.p_grid.interpolate(col, np.asarray(p, dtype=float))

    def values_at_states(self, t: float, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        """Batched evaluation along coupled path states."""
        sl = self.slice_at(t)
        if self.q_grid.n == 1:
            col = sl[:, 0]
            return self.p_grid.interpolate_many(col, P)
        if self.p_grid.n == 2 and self.q_grid.n == 2:
            px = self.p_grid.nodes[:, 0]
            qx = self.q_grid.nodes[:, 0]
            # bilinear interpolation on the (p0, q0) rectangle
            ip = np.clip(np.searchsorted(px, P[:, 0], side="right") - 1, 0, px.size - 2)
            iq = np.clip(np.searchsorted(qx, Q[:, 0], side="right") - 1, 0, qx.size - 2)
            wp = (P[:, 0] - px[ip]) / (px[ip + 1] - px[ip])
            wq = (Q[:, 0] - qx[iq]) / (qx[iq + 1] - qx[iq])
            v00 = sl[ip, iq]
            v10 = sl[ip + 1, iq]
            v01 = sl[ip, iq + 1]
            v11 = sl[ip + 1, iq + 1]
            return ((1 - wp) * (1 - wq) * v00 + wp * (1 - wq) * v10
                    + (1 - wp) * wq * v01 + wp * wq * v11)
        return np.array([self.value_at(t, P[i], Q[i]) for i in range(P.shape[0])])


def solve(H: HamiltonianField, p_grid: SimplexGrid, q_grid: SimplexGrid,
          horizon: float, n_steps: int, order: str = "vex_cav") -> ValueGrid:
    """Run the backward envelope scheme from the zero terminal condition."""
    if order not in ("vex_cav", "cav_vex"):
        raise ValueError("order must be 'vex_cav' or 'cav_vex'")
    dt = horizon / n_steps
    if dt > MAX_DT + 1e-12:
        raise ValueError(f"time step {dt} exceeds {MAX_DT}")
    for g in (p_grid, q_grid):
        if g.n > 1 and g.resolution + 1 < MIN_NODES:
            raise ValueError(f"need at least {MIN_NODES} nodes per 1-D slice")
    if p_grid.nodes.shape[1] != H.dim_p or q_grid.nodes.shape[1] != H.dim_q:
        raise ValueError("grid dimensions do not match the running cost")
    times = dt * np.arange(n_steps + 1)
    vals = np.zeros((n_steps + 1, p_grid.n_nodes, q_grid.n_nodes))
    frozen_h = None if H.time_dependent else H.fn(0.0, p_grid.nodes, q_grid.nodes)
    for k in range(n_steps - 1, -1, -1):
        hk = frozen_h if frozen_h is not None else H.fn(times[k], p_grid.nodes, q_grid.nodes)
        g = GridFunction(p_grid, q_grid, vals[k + 1] + dt * hk)
        if order == "vex_cav":
            vals[k] = vex_p(cav_q(g)).values
        else:
            vals[k] = cav_q(vex_p(g)).values
    return ValueGrid(times, p_grid, q_grid, vals, order, H.bound)


def order_gap(H: HamiltonianField, p_grid: SimplexGrid, q_grid: SimplexGrid,
              horizon: float, n_steps: int) -> tuple[ValueGrid, ValueGrid, float]:
    """Both alternation orders and their maximum pointwise gap."""
    a = solve(H, p_grid, q_grid, horizon, n_steps, "vex_cav")
    b = solve(H, p_grid, q_grid, horizon, n_steps, "cav_vex")
    return a, b, float(np.max(np.abs(a.values - b.values)))


# ---------------------------------------------------------------------------
# discrete second derivatives on simplex grids
# ---------------------------------------------------------------------------

def _directional_second(values_slice: np.ndarray, grid: SimplexGrid, axis: int) -> list[np.ndarray]:
    """Second differences along each edge direction, scaled to unit-length
    directional second derivatives.  axis 0: rows (p), axis 1: columns (q).
    Returns one (n_center, n_other) array per direction plus the center ids."""
    out = []
    h2 = grid.step_length() ** 2
    for d in grid.directions():
        tr = grid.neighbor_triples(d)
        if tr.size == 0:
            continue
        if axis == 0:
            second = (values_slice[tr[:, 1], :] - 2.0 * values_slice[tr[:, 0], :]
                      + values_slice[tr[:, 2], :]) / h2
        else:
            second = (values_slice[:, tr[:, 1]] - 2.0 * values_slice[:, tr[:, 0]]
                      + values_slice[:, tr[:, 2]]) / h2
        out.append((tr[:, 0], second))
    return out


def _hessian_eigs_at(values_col: np.ndarray, grid: SimplexGrid, node: int):
    """(lambda_min, lambda_max) of the tangent-reduced second derivative at an
    interior node of a 1-slot slice (values over grid nodes)."""
    p = grid.nodes[node]
    basis = tangent_basis(support(p, 0.0), grid.nodes.shape[1])
    if not basis:
        return np.inf, -np.inf
    h = grid.step_length()
    seconds, dirs = [], []
    for d in grid.directions():
        tr = grid.neighbor_triples(d)
        row = tr[tr[:, 0] == node]
        if row.size == 0:
            continue
        c, pl, mi = row[0]
        seconds.append((values_col[pl] - 2.0 * values_col[c] + values_col[mi]) / h**2)
        u = np.zeros(grid.nodes.shape[1])
        u[d[0]], u[d[1]] = 1.0, -1.0
        dirs.append(u / np.linalg.norm(u))
    if not seconds:
        return np.inf, -np.inf
    b = np.column_stack(basis)
    if len(basis) == 1:
        # one tangent dimension: every direction measures the same curvature
        val = float(np.mean(seconds))
        return val, val
    rows, rhs = [], []
    for u, s in zip(dirs, seconds):
        c = b.T @ u
        rows.append([c[0] ** 2, 2.0 * c[0] * c[1], c[1] ** 2])
        rhs.append(s)
    a11, a12, a22 = np.linalg.lstsq(np.asarray(rows), np.asarray(rhs), rcond=None)[0]
    red = np.array([[a11, a12], [a12, a22]])
    full = b @ red @ b.T
    lo = rel_eigen_min(p, 0.5 * (full + full.T))
    hi = rel_eigen_max(p, 0.5 * (full + full.T))
    return lo.value, hi.value


def _interior_nodes(grid: SimplexGrid) -> np.ndarray:
    if grid.n == 1:
        return np.array([0])
    if grid.n == 2:
        return np.arange(1, grid.n_nodes - 1)
    m = grid.resolution
    keep = []
    for i, node in enumerate(grid.nodes):
        if np.min(node) > 0.5 / m:
            keep.append(i)
    return np.asarray(keep, dtype=int)


@dataclass
class ResidualReport:
    """Which branch of the obstacle equation binds at each interior node."""

    times: np.ndarray
    p_nodes: np.ndarray
    q_nodes: np.ndarray
    binding: np.ndarray       # (n_t, n_p_int, n_q_int) int8 branch codes
    residual: np.ndarray      # same shape, the min-max expression
    max_residual: float

    def branch_name(self, code: int) -> str:
        return _BRANCH_NAMES[int(code)]

    def binding_at(self, k: int, ip: int, iq: int) -> str:
        pi = int(np.flatnonzero(self.p_nodes == ip)[0])
        qi = int(np.flatnonzero(self.q_nodes == iq)[0])
        return self.branch_name(self.binding[k, pi, qi])


def residuals(v: ValueGrid, H: HamiltonianField) -> ResidualReport:
    """Classify the binding branch of the equation at interior nodes.

    Discrete time derivative is forward; second derivatives are directional
    second differences reduced to the tangent space, with the vertex/face
    conventions (vacuous constraints) inherited from the eigenvalue helpers.
    """
    pg, qg = v.p_grid, v.q_grid
    ip_nodes = _interior_nodes(pg)
    iq_nodes = _interior_nodes(qg) if qg.n > 1 else np.array([0])
    n_t = v.values.shape[0] - 1
    binding = np.zeros((n_t, ip_nodes.size, iq_nodes.size), dtype=np.int8)
    resid = np.zeros((n_t, ip_nodes.size, iq_nodes.size))
    dt = v.dt
    hp2 = pg.step_length() ** 2
    frozen_h = None if H.time_dependent else H.fn(0.0, pg.nodes, qg.nodes)
    for k in range(n_t):
        hvals = frozen_h if frozen_h is not None else H.fn(v.times[k], pg.nodes, qg.nodes)
        dvdt = (v.values[k + 1] - v.values[k]) / dt
        sl = v.values[k]
        if pg.n == 2:
            lam_lo = (sl[2:, :] - 2.0 * sl[1:-1, :] + sl[:-2, :])[:, iq_nodes] / hp2
        else:
            lam_lo = np.array([[_hessian_eigs_at(sl[:, iq], pg, ip)[0]
                                for iq in iq_nodes] for ip in ip_nodes])
        if qg.n == 1:
            lam_hi = np.full_like(lam_lo, -np.inf)
        elif qg.n == 2:
            hq2 = qg.step_length() ** 2
            lam_hi = (sl[:, 2:] - 2.0 * sl[:, 1:-1] + sl[:, :-2])[ip_nodes, :] / hq2
        else:
            lam_hi = np.array([[_hessian_eigs_at(sl[ip, :], qg, iq)[1]
                                for iq in iq_nodes] for ip in ip_nodes])
        term_a = -dvdt[np.ix_(ip_nodes, iq_nodes)] - hvals[np.ix_(ip_nodes, iq_nodes)]
        term_b = -lam_lo
        term_c = -lam_hi
        inner = np.maximum(term_a, term_b)
        resid[k] = np.minimum(inner, term_c)
        binding[k] = np.where(term_c < inner, BRANCH_CONCAVE,
                              np.where(term_b > term_a, BRANCH_CONVEX, BRANCH_TIME))
    finite = resid[np.isfinite(resid)]
    return ResidualReport(v.times[:n_t], ip_nodes, iq_nodes, binding, resid,
                          float(np.max(np.abs(finite))) if finite.size else 0.0)


def naive_hji_residual(v: ValueGrid, H: HamiltonianField, k: int, p_node: int,
                       flat_tol: float = 1e-8) -> float:
    """Residual of the unconstrained equation with the zero test function at a
    locally flat node of a one-sided value grid.

    The value must vanish at the node and its neighbors (present and next time
    slice) so that the zero function is a valid touching test function; the
    infimum of the half-trace volatility term over the grid directions is then
    zero and the residual reduces to -dphi/dt - H = -H.
    """
    if v.q_grid.n != 1:
        raise ValueError("the classical-equation check runs one-sided configurations")
    pg = v.p_grid
    if p_node <= 0 or p_node >= pg.n_nodes - 1:
        raise ValueError("node must be interior")
    patch = v.values[k:k + 2, p_node - 1:p_node + 2, 0]
    if np.max(np.abs(patch)) > flat_tol:
        raise ValueError("value is not locally flat at the requested node")
    phi_dt = 0.0
    phi = np.zeros(3)
    half_trace_candidates = []
    for _d in pg.directions():
        second = (phi[2] - 2.0 * phi[1] + phi[0]) / pg.step_length() ** 2
        half_trace_candidates.append(0.5 * second)
    inf_term = min(half_trace_candidates) if half_trace_candidates else 0.0
    hval = H(float(v.times[k]), pg.nodes[p_node])
    return float(-phi_dt - hval - inf_term)


@dataclass
class RegularityReport:
    """Measured regularity of a solved grid against the theoretical bounds."""

    time_lip: float
    time_lip_bound: float        # 8 C dt (+ caller slack)
    min_p_second: float          # most negative second difference along p-lines
    max_q_second: float          # most positive second difference along q-lines
    lip_p: float
    lip_q: float
    lip_bound: float             # C * Cbar * T
    time_ok: bool
    convex_ok: bool
    concave_ok: bool
    lip_ok: bool

    @property
    def all_ok(self) -> bool:
        return self.time_ok and self.convex_ok and self.concave_ok and self.lip_ok


def regularity_report(v: ValueGrid, time_slack: float = 1e-3,
                      shape_tol: float = 1e-8) -> RegularityReport:
    from splitgame.sde import coupling_bound_constant

    vals = v.values
    time_lip = float(np.max(np.abs(np.diff(vals, axis=0)))) if vals.shape[0] > 1 else 0.0
    time_bound = 8.0 * v.bound * v.dt

    min_p = np.inf
    for k in range(vals.shape[0]):
        for c, second in _directional_second(vals[k], v.p_grid, axis=0):
            if second.size:
                min_p = min(min_p, float(np.min(second)))
    max_q = -np.inf
    if v.q_grid.n > 1:
        for k in range(vals.shape[0]):
            for c, second in _directional_second(vals[k], v.q_grid, axis=1):
                if second.size:
                    max_q = max(max_q, float(np.max(second)))
    if not np.isfinite(min_p):
        min_p = 0.0
    if not np.isfinite(max_q):
        max_q = 0.0

    lip_p = 0.0
    for d in v.p_grid.directions():
        tr = v.p_grid.neighbor_triples(d)
        if tr.size:
            diffs = np.abs(vals[:, tr[:, 1], :] - vals[:, tr[:, 0], :]) / v.p_grid.step_length()
            lip_p = max(lip_p, float(np.max(diffs)))
    lip_q = 0.0
    if v.q_grid.n > 1:
        for d in v.q_grid.directions():
            tr = v.q_grid.neighbor_triples(d)
            if tr.size:
                diffs = np.abs(vals[:, :, tr[:, 1]] - vals[:, :, tr[:, 0]]) / v.q_grid.step_length()
                lip_q = max(lip_q, float(np.max(diffs)))

    horizon = float(v.times[-1])
    cbar = coupling_bound_constant(v.p_grid.nodes.shape[1])
    lip_bound = v.bound * cbar * horizon
    # the p/q curvature scale: second differences in the 1-D slice parameter
    return RegularityReport(
        time_lip=time_lip,
        time_lip_bound=time_bound,
        min_p_second=min_p,
        max_q_second=max_q,
        lip_p=lip_p,
        lip_q=lip_q,
        lip_bound=lip_bound,
        time_ok=time_lip <= time_bound + time_slack,
        convex_ok=min_p >= -shape_tol,
        concave_ok=max_q <= shape_tol,
        lip_ok=(lip_p <= lip_bound + time_slack) and (lip_q <= lip_bound + time_slack),
    )


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def export_csv(v: ValueGrid, path) -> None:
    """CSV columns: t, p coordinates, q coordinates, V."""
    nI = v.p_grid.nodes.shape[1]
    nJ = v.q_grid.nodes.shape[1]
    with open(path, "w") as fh:
        cols = (["t"] + [f"p_{i+1}" for i in range(nI)]
                + [f"q_{j+1}" for j in range(nJ)] + ["V"])
        fh.write(",".join(cols) + "\n")
        for k, t in enumerate(v.times):
            for a, pn in enumerate(v.p_grid.nodes):
                for b, qn in enumerate(v.q_grid.nodes):
                    row = [f"{t:.17g}"]
                    row += [f"{x:.17g}" for x in pn]
                    row += [f"{x:.17g}" for x in qn]
                    row.append(f"{v.values[k, a, b]:.17g}")
                    fh.write(",".join(row) + "\n")


def summary_dict(v: ValueGrid, H: HamiltonianField | None = None) -> dict:
    """JSON-ready summary: extrema, residual norm, regularity checks."""
    reg = regularity_report(v)
    out = {
        "order": v.order,
        "n_time_steps": int(v.values.shape[0] - 1),
        "p_nodes": int(v.p_grid.n_nodes),
        "q_nodes": int(v.q_grid.n_nodes),
        "min_value": float(np.min(v.values)),
        "max_value": float(np.max(v.values)),
        "bound": float(v.bound),
        "regularity": {
            "time_lipschitz": reg.time_lip,
            "time_lipschitz_bound": reg.time_lip_bound,
            "min_p_second_difference": reg.min_p_second,
            "max_q_second_difference": reg.max_q_second,
            "lipschitz_p": reg.lip_p,
            "lipschitz_q": reg.lip_q,
            "all_ok": reg.all_ok,
        },
    }
    if H is not None:
        rep = residuals(v, H)
        out["max_interior_residual"] = rep.max_residual
    return out
