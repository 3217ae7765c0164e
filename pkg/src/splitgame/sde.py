"""Pathwise simulation of simplex-constrained martingales driven by
piecewise-constant feedback controls, plus Monte Carlo payoff estimation.

Each player's state follows an Euler scheme for dX = (P_X u) dB restricted to
the simplex: the projection uses the current support, a coordinate that would
cross zero shrinks the step to the exact face crossing, and coordinates inside
a small absorption band are set to zero and never revive.  Faces are therefore
absorbing and the support is non-increasing along every path, which mirrors
the layered face-by-face construction that makes the continuous equation well
posed.

Randomness is counter-based: path i draws its Gaussian increments from a
Philox stream keyed by (seed, stream, i), so results are bit-identical for
any batch split or thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from splitgame.hamiltonian import HamiltonianField

DEFAULT_DT = 1.0 / 512
DEFAULT_ETA = 1e-10
_GRID_SNAP = 1e-9


class GridMismatchError(ValueError):
    """Control grid points do not land on the noise grid."""


# ---------------------------------------------------------------------------
# noise
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseGrid:
    """Uniform time grid on [t, horizon] with per-path Gaussian increments.

    Increments have variance dt per coordinate.  The two Brownian blocks B1
    (player 1, dim1 coordinates) and B2 (player 2, dim2) come from disjoint
    Philox streams, themselves split per path.
    """

    t: float
    horizon: float
    dt: float
    n_paths: int
    seed: int
    dim1: int
    dim2: int

    def __post_init__(self):
        if self.horizon <= self.t:
            raise ValueError("horizon must exceed the start time")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        n = (self.horizon - self.t) / self.dt
        if abs(n - round(n)) > _GRID_SNAP * max(1.0, n):
            raise GridMismatchError(f"dt={self.dt} does not divide the horizon {self.horizon - self.t}")
        if self.n_paths < 1:
            raise ValueError("need at least one path")

    @property
    def n_steps(self) -> int:
        return int(round((self.horizon - self.t) / self.dt))

    def times(self) -> np.ndarray:
        return self.t + self.dt * np.arange(self.n_steps + 1)

    def step_of(self, time: float) -> int:
        """Noise-grid step index of a time point; error if not on the grid."""
        k = (time - self.t) / self.dt
        kr = int(round(k))
        if abs(k - kr) > 1e-6 or kr < 0 or kr > self.n_steps:
            raise GridMismatchError(f"time {time} is not on the noise grid")
        return kr

    def _stream(self, path: int, stream: int) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(stream, path))
        return np.random.Generator(np.random.Philox(ss))

    def increments(self, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
        """Gaussian increments for paths [lo, hi): shapes (b, N, dim)."""
        n, sd = self.n_steps, np.sqrt(self.dt)
        b = hi - lo
        db1 = np.empty((b, n, self.dim1))
        db2 = np.empty((b, n, self.dim2))
        for i in range(b):
            db1[i] = self._stream(lo + i, 0).standard_normal((n, self.dim1)) * sd
            db2[i] = self._stream(lo + i, 1).standard_normal((n, self.dim2)) * sd
        return db1, db2


# ---------------------------------------------------------------------------
# controls
# ---------------------------------------------------------------------------

@dataclass
class HistoryView:
    """What a feedback map may read when choosing the control for interval j.

    Everything here is a function of the path strictly before the interval
    start: the player's own state, the per-interval sums of its own Brownian
    increments, and the opponent's realized controls on intervals that started
    earlier.  Arrays are batched over paths.
    """

    j: int
    time: float
    dt: float
    own_state: np.ndarray       # (b, n)
    own_noise: np.ndarray       # (b, j, n): summed own increments per past own interval
    opp_controls: np.ndarray    # (b, m, n_opp, n_opp): opponent controls already begun
    opp_times: np.ndarray       # (m,) their interval start times


@dataclass
class FeedbackControl:
    """Piecewise-constant control on a time grid with step feedback.

    grid runs from the start time to the horizon; feedback(j, view) returns
    the control matrix for [grid[j], grid[j+1]), either one (n, n) matrix
    broadcast over paths or a (b, n, n) batch.
    """

    grid: np.ndarray
    feedback: Callable[[int, HistoryView], np.ndarray]
    dim: int
    label: str = ""

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0):
            raise ValueError("control grid must be strictly increasing with >= 2 points")
        self.grid = g

    @property
    def n_intervals(self) -> int:
        return self.grid.size - 1


def zero_control(t: float, horizon: float, dim: int) -> FeedbackControl:
    z = np.zeros((dim, dim))
    return FeedbackControl(np.array([t, horizon]), lambda j, view: z, dim, "zero")


def constant_control(t: float, horizon: float, matrix) -> FeedbackControl:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("control matrix must be square")
    return FeedbackControl(np.array([t, horizon]), lambda j, view: m, m.shape[0], "constant")


def directional_control(t: float, horizon: float, dim: int, scale: float,
                        i: int = 0, j: int = 1) -> FeedbackControl:
    """Rank-one control harvesting the first own-noise coordinate and pushing
    along e_i - e_j."""
    m = np.zeros((dim, dim))
    m[i, 0] = scale
    m[j, 0] = -scale
    return FeedbackControl(np.array([t, horizon]), lambda k, view: m, dim, "directional")


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def step_x(x, u, db, eta: float = DEFAULT_ETA) -> np.ndarray:
    """Single Euler step for one state; see _step_batch for the rules."""
    xv = np.asarray(x, dtype=float)
    uv = np.asarray(u, dtype=float)
    dbv = np.asarray(db, dtype=float)
    if not (np.all(np.isfinite(xv)) and np.all(np.isfinite(uv)) and np.all(np.isfinite(dbv))):
        raise ValueError("non-finite input to step_x")
    out = _step_batch(xv[None, :], uv[None, :, :], dbv[None, :], eta)
    return out[0]


def _step_batch(x: np.ndarray, u: np.ndarray, db: np.ndarray, eta: float) -> np.ndarray:
    """Vectorized Euler step: project, detect face crossings, clamp, renormalize.

    x: (b, n) states, u: (b, n, n) or (n, n) controls, db: (b, n) increments.
    """
    mask = x > eta
    if u.ndim == 2:
        w = db @ u.T
    else:
        w = np.einsum("bij,bj->bi", u, db)
    cnt = mask.sum(axis=1)
    mean = np.where(mask, w, 0.0).sum(axis=1) / cnt
    delta = np.where(mask, w - mean[:, None], 0.0)
    prop = x + delta
    neg = prop < 0.0
    if neg.any():
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(delta < -1e-300, x / np.where(delta < -1e-300, -delta, 1.0), np.inf)
        theta = np.minimum(1.0, ratios.min(axis=1))
        bad = neg.any(axis=1)
        prop[bad] = x[bad] + theta[bad, None] * delta[bad]
    prop[prop <= eta] = 0.0
    prop /= prop.sum(axis=1)[:, None]
    return prop


def _support_mask_bits(x: np.ndarray, eta: float) -> np.ndarray:
    """Pack the per-path support into a uint8 bitmask (n <= 8)."""
    bits = (x > eta).astype(np.uint8)
    out = np.zeros(x.shape[0], dtype=np.uint8)
    for c in range(x.shape[1]):
        out |= bits[:, c] << c
    return out


class _BlockSim:
    """One vectorized simulation block: paths [lo, hi) of a noise grid."""

    def __init__(self, t, p, q, u_ctrl: FeedbackControl, v_ctrl: FeedbackControl,
                 noise: NoiseGrid, lo: int, hi: int, eta: float):
        if abs(t - noise.t) > _GRID_SNAP:
            raise ValueError("start time does not match the noise grid")
        self.noise = noise
        self.eta = eta
        self.lo, self.hi = lo, hi
        self.b = hi - lo
        self.p = np.asarray(p, dtype=float)
        self.q = np.asarray(q, dtype=float)
        if self.p.size != noise.dim1 or self.q.size != noise.dim2:
            raise ValueError("state dimensions do not match the noise grid")
        self.u_ctrl, self.v_ctrl = u_ctrl, v_ctrl
        self.u_steps = np.array([noise.step_of(g) for g in u_ctrl.grid])
        self.v_steps = np.array([noise.step_of(g) for g in v_ctrl.grid])
        if self.u_steps[0] != 0 or self.v_steps[0] != 0:
            raise GridMismatchError("control grids must start at t")
        if self.u_steps[-1] != noise.n_steps or self.v_steps[-1] != noise.n_steps:
            raise GridMismatchError("control grids must end at the horizon")
        self.db1, self.db2 = noise.increments(lo, hi)
        nI, nJ = self.p.size, self.q.size
        self.u_realized = np.zeros((self.b, u_ctrl.n_intervals, nI, nI))
        self.v_realized = np.zeros((self.b, v_ctrl.n_intervals, nJ, nJ))
        self.own1 = np.zeros((self.b, u_ctrl.n_intervals, nI))
        self.own2 = np.zeros((self.b, v_ctrl.n_intervals, nJ))

    def _eval_feedback(self, ctrl, j, when, own_state, own_noise, opp_real, opp_grid):
        visible = int(np.searchsorted(opp_grid[:-1], when - _GRID_SNAP, side="right"))
        view = HistoryView(j, when, self.noise.dt, own_state,
                           own_noise[:, :j], opp_real[:, :visible],
                           opp_grid[:visible])
        mat = np.asarray(ctrl.feedback(j, view), dtype=float)
        if not np.all(np.isfinite(mat)):
            raise ValueError(f"feedback for control {ctrl.label!r} returned a non-finite matrix")
        if mat.ndim == 2:
            mat = np.broadcast_to(mat, (self.b,) + mat.shape)
        return mat

    def steps(self):
        """Yield (k, time, X, Y) with the state at each grid time; the last
        yield carries the terminal state."""
        noise, b = self.noise, self.b
        times = noise.times()
        x = np.tile(self.p, (b, 1))
        y = np.tile(self.q, (b, 1))
        ju = jv = 0
        u_mat = v_mat = None
        u_zero = v_zero = False
        for k in range(noise.n_steps):
            if ju < self.u_ctrl.n_intervals and k == self.u_steps[ju]:
                u_mat = self._eval_feedback(self.u_ctrl, ju, times[k], x, self.own1,
                                            self.v_realized, self.v_ctrl.grid)
                self.u_realized[:, ju] = u_mat
                u_zero = not u_mat.any()
                ju += 1
            if jv < self.v_ctrl.n_intervals and k == self.v_steps[jv]:
                v_mat = self._eval_feedback(self.v_ctrl, jv, times[k], y, self.own2,
                                            self.u_realized, self.u_ctrl.grid)
                self.v_realized[:, jv] = v_mat
                v_zero = not v_mat.any()
                jv += 1
            yield k, times[k], x, y
            if not u_zero:
                x = _step_batch(x, u_mat, self.db1[:, k], self.eta)
            if not v_zero:
                y = _step_batch(y, v_mat, self.db2[:, k], self.eta)
            self.own1[:, ju - 1] += self.db1[:, k]
            self.own2[:, jv - 1] += self.db2[:, k]
        yield noise.n_steps, times[-1], x, y

    def b_ends(self):
        return self.db1.sum(axis=1), self.db2.sum(axis=1)


def _block_ranges(n_paths: int, n_steps: int) -> list[tuple[int, int]]:
    # cap transient noise memory around tens of MB per block
    block = max(256, min(n_paths, 2_000_000 // max(1, n_steps)))
    return [(lo, min(lo + block, n_paths)) for lo in range(0, n_paths, block)]


def _run_blocks(fn, ranges, threads: int):
    """Apply fn to each (lo, hi) range; fixed order, optional thread pool."""
    if threads <= 1 or len(ranges) <= 1:
        return [fn(lo, hi) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, lo, hi) for lo, hi in ranges]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# bundles
# ---------------------------------------------------------------------------

@dataclass
class TrajectoryBundle:
    """Monte Carlo ensemble of coupled (X, Y) paths with realized controls,
    support histories, and terminal Brownian sums."""

    times: np.ndarray
    x_paths: np.ndarray     # (n_paths, N+1, nI)
    y_paths: np.ndarray     # (n_paths, N+1, nJ)
    u_realized: np.ndarray  # (n_paths, m_u, nI, nI)
    v_realized: np.ndarray
    u_grid: np.ndarray
    v_grid: np.ndarray
    x_support: np.ndarray   # (n_paths, N+1) uint8 bitmasks
    y_support: np.ndarray
    b1_end: np.ndarray      # (n_paths, nI)
    b2_end: np.ndarray
    seed: int

    @property
    def n_paths(self) -> int:
        return self.x_paths.shape[0]

    def check_invariants(self, sum_tol: float = 1e-12) -> None:
        for paths in (self.x_paths, self.y_paths):
            if paths.min() < 0.0:
                raise AssertionError("negative coordinate stored in bundle")
            sums = paths.sum(axis=2)
            if np.max(np.abs(sums - 1.0)) > sum_tol:
                raise AssertionError("stored state does not sum to 1")
        for sup in (self.x_support, self.y_support):
            later = sup[:, 1:]
            earlier = sup[:, :-1]
            if np.any(later & ~earlier):
                raise AssertionError("support grew along a path")


def simulate(t: float, p, q, u_ctrl: FeedbackControl, v_ctrl: FeedbackControl,
             noise: NoiseGrid, eta: float = DEFAULT_ETA, threads: int = 1) -> TrajectoryBundle:
    """Simulate the coupled (X, Y) system and keep full paths.

    Memory grows with n_paths * n_steps; use estimate_j / simulation_report
    for large ensembles where only reductions are needed.
    """
    n = noise.n_paths
    nI, nJ = noise.dim1, noise.dim2
    nsteps = noise.n_steps
    x_paths = np.empty((n, nsteps + 1, nI))
    y_paths = np.empty((n, nsteps + 1, nJ))
    x_sup = np.empty((n, nsteps + 1), dtype=np.uint8)
    y_sup = np.empty((n, nsteps + 1), dtype=np.uint8)
    u_real = np.empty((n, u_ctrl.n_intervals, nI, nI))
    v_real = np.empty((n, v_ctrl.n_intervals, nJ, nJ))
    b1_end = np.empty((n, nI))
    b2_end = np.empty((n, nJ))

    def work(lo, hi):
        sim = _BlockSim(t, p, q, u_ctrl, v_ctrl, noise, lo, hi, eta)
        for k, _, x, y in sim.steps():
            x_paths[lo:hi, k] = x
            y_paths[lo:hi, k] = y
            x_sup[lo:hi, k] = _support_mask_bits(x, eta)
            y_sup[lo:hi, k] = _support_mask_bits(y, eta)
        u_real[lo:hi] = sim.u_realized
        v_real[lo:hi] = sim.v_realized
        b1_end[lo:hi], b2_end[lo:hi] = sim.b_ends()

    _run_blocks(work, _block_ranges(n, nsteps), threads)
    return TrajectoryBundle(noise.times(), x_paths, y_paths, u_real, v_real,
                            u_ctrl.grid.copy(), v_ctrl.grid.copy(),
                            x_sup, y_sup, b1_end, b2_end, noise.seed)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JEstimate:
    mean: float
    std_error: float
    n_paths: int


def estimate_j(t: float, p, q, u_ctrl: FeedbackControl, v_ctrl: FeedbackControl,
               H: HamiltonianField, noise: NoiseGrid, eta: float = DEFAULT_ETA,
               threads: int = 1) -> JEstimate:
    """Monte Carlo estimate of E[int_t^T H(s, X_s, Y_s) ds].

    Left-endpoint quadrature on the noise grid; paths stream through in
    blocks, only the per-path integral is kept.
    """
    if noise.n_paths < 2:
        raise ValueError("need at least two paths for a standard error")
    dt = noise.dt

    def work(lo, hi):
        sim = _BlockSim(t, p, q, u_ctrl, v_ctrl, noise, lo, hi, eta)
        acc = np.zeros(hi - lo)
        for k, s, x, y in sim.steps():
            if k == noise.n_steps:
                break
            acc += H.on_paths(s, x, y) * dt
        return acc

    parts = _run_blocks(work, _block_ranges(noise.n_paths, noise.n_steps), threads)
    j = np.concatenate(parts)
    return JEstimate(float(j.mean()), float(j.std(ddof=1) / np.sqrt(j.size)), j.size)


@dataclass
class SimulationReport:
    """Streaming reductions over an ensemble: martingale deviation against
    standard errors at every grid time, and exact simplex membership."""

    times: np.ndarray
    mean_dev: np.ndarray           # (N+1, nI) componentwise |mean X - p|
    se: np.ndarray                 # (N+1, nI) standard error of each mean
    min_coord: float
    max_sum_err: float
    support_monotone: bool
    n_paths: int

    @property
    def martingale_ok(self) -> bool:
        # the additive slack absorbs pure summation roundoff (relevant only
        # where the SE is exactly zero, e.g. at the initial time)
        return bool(np.all(self.mean_dev <= 3.0 * self.se + 1e-12))

    @property
    def worst_dev(self) -> float:
        return float(np.max(self.mean_dev))

    @property
    def worst_margin(self) -> float:
        """Largest deviation-to-(3SE + slack) ratio over times and coordinates."""
        return float(np.max(self.mean_dev / (3.0 * self.se + 1e-12)))


def simulation_report(t: float, p, q, u_ctrl: FeedbackControl, v_ctrl: FeedbackControl,
                      noise: NoiseGrid, eta: float = DEFAULT_ETA,
                      threads: int = 1) -> SimulationReport:
    """Run the ensemble keeping only martingale / invariance statistics."""
    nsteps = noise.n_steps
    nI = noise.dim1
    sums = np.zeros((nsteps + 1, nI))
    sq_sums = np.zeros((nsteps + 1, nI))
    state = {"min_coord": np.inf, "max_sum_err": 0.0, "monotone": True}

    def work(lo, hi):
        sim = _BlockSim(t, p, q, u_ctrl, v_ctrl, noise, lo, hi, eta)
        loc_sum = np.zeros_like(sums)
        loc_sq = np.zeros_like(sq_sums)
        mn, serr, mono = np.inf, 0.0, True
        prev_sup = None
        for k, _, x, y in sim.steps():
            loc_sum[k] = x.sum(axis=0)
            loc_sq[k] = (x * x).sum(axis=0)
            mn = min(mn, float(x.min()), float(y.min()))
            serr = max(serr, float(np.max(np.abs(x.sum(axis=1) - 1.0))),
                       float(np.max(np.abs(y.sum(axis=1) - 1.0))))
            sup = _support_mask_bits(x, eta)
            if prev_sup is not None and np.any(sup & ~prev_sup):
                mono = False
            prev_sup = sup
        return loc_sum, loc_sq, mn, serr, mono

    parts = _run_blocks(work, _block_ranges(noise.n_paths, nsteps), threads)
    for loc_sum, loc_sq, mn, serr, mono in parts:
        sums += loc_sum
        sq_sums += loc_sq
        state["min_coord"] = min(state["min_coord"], mn)
        state["max_sum_err"] = max(state["max_sum_err"], serr)
        state["monotone"] = state["monotone"] and mono

    n = noise.n_paths
    mean = sums / n
    var = np.maximum(sq_sums / n - mean**2, 0.0)
    se = np.sqrt(var / n)
    pv = np.asarray(p, dtype=float)
    return SimulationReport(noise.times(), np.abs(mean - pv), se,
                            state["min_coord"], state["max_sum_err"],
                            state["monotone"], n)


@dataclass(frozen=True)
class LipschitzCoupling:
    estimate: float        # sup over grid times of mean |X_s - Xbar_s|
    bound: float           # dimensional constant times |p - pbar|
    std_error: float       # at the time achieving the sup
    constant: float


def coupling_bound_constant(dim: int) -> float:
    return float(((2.0 + np.sqrt(dim)) * dim) ** (2 * dim - 1))


def lipschitz_p_check(t: float, p, p_bar, u_ctrl: FeedbackControl, noise: NoiseGrid,
                      eta: float = DEFAULT_ETA, threads: int = 1) -> LipschitzCoupling:
    """Couple two initial conditions under the same noise and same realized
    control (evaluated along the primary path) and compare the mean distance
    against the dimensional bound."""
    pv = np.asarray(p, dtype=float)
    pbv = np.asarray(p_bar, dtype=float)
    nsteps = noise.n_steps
    sums = np.zeros(nsteps + 1)
    sqs = np.zeros(nsteps + 1)

    q0 = np.full(noise.dim2, 1.0 / noise.dim2)

    def work(lo, hi):
        sim = _BlockSim(t, pv, q0, u_ctrl, zero_control(t, noise.horizon, noise.dim2),
                        noise, lo, hi, eta)
        xb = np.tile(pbv, (hi - lo, 1))
        loc_s = np.zeros(nsteps + 1)
        loc_q = np.zeros(nsteps + 1)
        for k, _, x, _y in sim.steps():
            d = np.linalg.norm(x - xb, axis=1)
            loc_s[k] = d.sum()
            loc_q[k] = (d * d).sum()
            if k == nsteps:
                break
            # same control matrices as the primary path, same increments
            ju = int(np.searchsorted(sim.u_steps[1:], k, side="right"))
            xb = _step_batch(xb, sim.u_realized[:, ju], sim.db1[:, k], eta)
        return loc_s, loc_q

    parts = _run_blocks(work, _block_ranges(noise.n_paths, nsteps), threads)
    for s_, q_ in parts:
        sums += s_
        sqs += q_
    n = noise.n_paths
    mean = sums / n
    k_star = int(np.argmax(mean))
    var = max(sqs[k_star] / n - mean[k_star] ** 2, 0.0)
    const = coupling_bound_constant(pv.size)
    return LipschitzCoupling(float(mean[k_star]),
                             const * float(np.linalg.norm(pv - pbv)),
                             float(np.sqrt(var / n)), const)


@dataclass(frozen=True)
class CovarianceEntry:
    x_coordinate: int
    functional: str
    covariance: float
    std_error: float

    @property
    def ok(self) -> bool:
        return abs(self.covariance) <= 3.0 * self.std_error + 1e-15


def independence_check(bundle: TrajectoryBundle) -> list[CovarianceEntry]:
    """Empirical covariance between X_T - p and bounded functionals of the
    opponent's Brownian block; everything should vanish to 3 standard errors.
    """
    x_t = bundle.x_paths[:, -1, :]
    x0 = bundle.x_paths[:, 0, :]
    a = x_t - x0
    functionals = {"sign_b2_first": np.sign(bundle.b2_end[:, 0]),
                   "tanh_b2_first": np.tanh(bundle.b2_end[:, 0])}
    for c in range(bundle.y_paths.shape[2]):
        functionals[f"y_T_{c}"] = bundle.y_paths[:, -1, c]
    n = bundle.n_paths
    out = []
    for name, f in functionals.items():
        fc = f - f.mean()
        for c in range(a.shape[1]):
            ac = a[:, c] - a[:, c].mean()
            prod = ac * fc
            cov = float(prod.mean())
            se = float(prod.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
            out.append(CovarianceEntry(c, name, cov, se))
    return out


def dump_trajectories(bundle: TrajectoryBundle, path) -> None:
    """CSV dump: path_id, time, x_1..x_nI, y_1..y_nJ."""
    nI = bundle.x_paths.shape[2]
    nJ = bundle.y_paths.shape[2]
    with open(path, "w") as fh:
        cols = ["path_id", "time"] + [f"x_{i+1}" for i in range(nI)] + [f"y_{j+1}" for j in range(nJ)]
        fh.write(",".join(cols) + "\n")
        for pid in range(bundle.n_paths):
            for k, tk in enumerate(bundle.times):
                row = [str(pid), f"{tk:.17g}"]
                row += [f"{v:.17g}" for v in bundle.x_paths[pid, k]]
                row += [f"{v:.17g}" for v in bundle.y_paths[pid, k]]
                fh.write(",".join(row) + "\n")
