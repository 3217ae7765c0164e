"""Desk-scale game evaluation over finite families of simple pathwise
strategies: restricted value brackets around the PDE value and the dynamic
programming diagnostic.

A strategy here is a recipe producing a feedback control on [t, T].  Families
are finite; the restricted upper value is min over player-1 strategies of the
max over player-2 strategies of the common-random-numbers payoff table, and
the restricted lower value is the max-min of the same table, so the bracket
ordering lower <= upper holds exactly on every run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from splitgame.hamiltonian import HamiltonianField
from splitgame.hj import ValueGrid
from splitgame.sde import (
    DEFAULT_ETA,
    FeedbackControl,
    NoiseGrid,
    _block_ranges,
    _BlockSim,
    _run_blocks,
    directional_control,
    estimate_j,
    simulate,
    zero_control,
)
from splitgame.splitting import SplitSpec, make_split_control

MAX_PAIRS = 10_000


class BudgetExceededError(RuntimeError):
    """Too many strategy pairs requested for one bracket evaluation."""


@dataclass(frozen=True)
class Strategy:
    """Named recipe: build(t, horizon) returns the feedback control."""

    name: str
    build: Callable[[float, float], FeedbackControl]


@dataclass
class StrategyFamily:
    """Finite collection of strategies for one player, sharing a control grid
    convention (each strategy's grid must land on the driving noise grid)."""

    dim: int
    strategies: list[Strategy]

    def __post_init__(self):
        if not self.strategies:
            raise ValueError("a strategy family cannot be empty")

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.strategies]

    def extended(self, extra: Strategy) -> "StrategyFamily":
        return StrategyFamily(self.dim, list(self.strategies) + [extra])


def preset_family(dim: int, scale: float = 0.5,
                  split_spec: SplitSpec | None = None) -> StrategyFamily:
    """The shipped presets: zero, constant directional, split-then-freeze."""
    strategies = [
        Strategy("zero", lambda t, T, d=dim: zero_control(t, T, d)),
        Strategy("directional", lambda t, T, d=dim, s=scale: directional_control(t, T, d, s)),
    ]
    if split_spec is not None:
        if split_spec.p.n != dim:
            raise ValueError("split spec dimension does not match the family")
        strategies.append(Strategy(
            "split", lambda t, T, sp=split_spec: make_split_control(sp, t, T)))
    return StrategyFamily(dim, strategies)


def table_strategies(dim: int, grid: np.ndarray, catalogue: list[np.ndarray],
                     count: int, seed: int) -> StrategyFamily:
    """Sampled finite-feedback strategies over an action catalogue.

    Each strategy owns a random table indexed by (opponent's last catalogue
    action, sign of the last own-noise sum) and plays the table's action on
    every interval; interval 0 plays a fixed table entry.  The tables are
    drawn deterministically from the seed, keeping families reproducible.
    """
    cat = [np.asarray(c, dtype=float) for c in catalogue]
    if not cat:
        raise ValueError("catalogue must be nonempty")
    rng = np.random.default_rng(seed)
    grid = np.asarray(grid, dtype=float)
    strategies = []
    for s_idx in range(count):
        table = rng.integers(0, len(cat), size=(len(cat), 2))
        first = int(rng.integers(0, len(cat)))

        def build(t, T, table=table, first=first):
            stack = np.stack(cat)

            def feedback(j, view):
                if j == 0 or view.opp_controls.shape[1] == 0:
                    return cat[first]
                opp_last = view.opp_controls[:, -1]
                flat = opp_last.reshape(opp_last.shape[0], -1)
                dists = ((flat[:, None, :] - stack.reshape(len(cat), -1)[None]) ** 2).sum(2)
                opp_idx = dists.argmin(axis=1)
                if view.own_noise.shape[1]:
                    sign_bit = (view.own_noise[:, -1, 0] > 0).astype(int)
                else:
                    sign_bit = np.zeros(opp_idx.size, dtype=int)
                choice = table[opp_idx, sign_bit]
                return stack[choice]

            g = grid.copy()
            g[0], g[-1] = t, T
            return FeedbackControl(g, feedback, dim, f"table{s_idx}")

        strategies.append(Strategy(f"table{s_idx}", build))
    return StrategyFamily(dim, strategies)


def resolve_controls(t: float, p, q, alpha: FeedbackControl, beta: FeedbackControl,
                     noise: NoiseGrid, threads: int = 1):
    """The unique realized control pair induced by two feedback maps.

    Both feedbacks read strictly prior histories, so one forward pass resolves
    the fixed point; the realized piecewise-constant paths are returned per
    sample path, one matrix per control interval.
    """
    bundle = simulate(t, p, q, alpha, beta, noise, threads=threads)
    return bundle.u_realized, bundle.v_realized


@dataclass
class ValueBracket:
    """Restricted bounds around the PDE value at one (t, p, q)."""

    lower: float
    lower_se: float
    upper: float
    upper_se: float
    reference: float | None
    table: np.ndarray            # (n1, n2) payoff estimates
    se_table: np.ndarray
    names_1: list[str]
    names_2: list[str]

    @property
    def ordered(self) -> bool:
        return self.lower - 3.0 * self.lower_se <= self.upper + 3.0 * self.upper_se


def value_bracket(t: float, p, q, H: HamiltonianField, fam_1: StrategyFamily,
                  fam_2: StrategyFamily, horizon: float, dt: float, n_paths: int,
                  seed: int, reference: ValueGrid | None = None,
                  threads: int = 1) -> ValueBracket:
    """Common-random-numbers payoff table over all strategy pairs, reduced to
    the restricted upper (min-max) and lower (max-min) values."""
    n1, n2 = len(fam_1.strategies), len(fam_2.strategies)
    if n1 * n2 > MAX_PAIRS:
        raise BudgetExceededError(f"{n1 * n2} strategy pairs exceed the {MAX_PAIRS} budget")
    table = np.empty((n1, n2))
    se = np.empty((n1, n2))
    for i, si in enumerate(fam_1.strategies):
        for j, sj in enumerate(fam_2.strategies):
            noise = NoiseGrid(t, horizon, dt, n_paths, seed, fam_1.dim, fam_2.dim)
            est = estimate_j(t, p, q, si.build(t, horizon), sj.build(t, horizon),
                             H, noise, threads=threads)
            table[i, j] = est.mean
            se[i, j] = est.std_error
    i_up = int(np.argmin(table.max(axis=1)))
    j_up = int(np.argmax(table[i_up]))
    j_lo = int(np.argmax(table.min(axis=0)))
    i_lo = int(np.argmin(table[:, j_lo]))
    ref = None
    if reference is not None:
        ref = reference.value_at(t, np.asarray(p, dtype=float),
                                 np.asarray(q, dtype=float) if fam_2.dim > 1 else None)
    return ValueBracket(
        lower=float(table[i_lo, j_lo]), lower_se=float(se[i_lo, j_lo]),
        upper=float(table[i_up, j_up]), upper_se=float(se[i_up, j_up]),
        reference=ref, table=table, se_table=se,
        names_1=fam_1.names, names_2=fam_2.names,
    )


def _estimate_with_terminal(t: float, p, q, u_ctrl: FeedbackControl,
                            v_ctrl: FeedbackControl, H: HamiltonianField,
                            v_ref: ValueGrid, horizon: float, noise: NoiseGrid,
                            threads: int = 1) -> tuple[float, float]:
    """E[int_t^{t+h} H ds + V_ref(t+h, X_{t+h}, Y_{t+h})] and its SE."""
    dt = noise.dt

    def work(lo, hi):
        sim = _BlockSim(t, p, q, u_ctrl, v_ctrl, noise, lo, hi, DEFAULT_ETA)
        acc = np.zeros(hi - lo)
        for k, s, x, y in sim.steps():
            if k == noise.n_steps:
                acc += v_ref.values_at_states(horizon, x, y)
                break
            acc += H.on_paths(s, x, y) * dt
        return acc

    parts = _run_blocks(work, _block_ranges(noise.n_paths, noise.n_steps), threads)
    vals = np.concatenate(parts)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(vals.size))


@dataclass
class DppReport:
    """Signed gap between the one-step game estimate and the reference value."""

    estimate: float
    std_error: float
    reference: float
    table: np.ndarray

    @property
    def gap(self) -> float:
        return self.estimate - self.reference


def dpp_diagnostic(t: float, h: float, p, q, H: HamiltonianField,
                   fam_2: StrategyFamily, fam_1: StrategyFamily, v_ref: ValueGrid,
                   dt: float, n_paths: int, seed: int, threads: int = 1) -> DppReport:
    """sup over player-2 strategies of the inf over player-1 controls of the
    one-step payoff plus the reference continuation value, against the
    reference value at (t, p, q).

    t + h must be a time-grid point of the reference; the gap is a diagnostic
    (family restriction plus Monte Carlo noise), not an asserted theorem.
    """
    knots = v_ref.times
    if np.min(np.abs(knots - (t + h))) > 1e-9:
        raise ValueError("t + h must be a time-grid point of the reference values")
    n1, n2 = len(fam_1.strategies), len(fam_2.strategies)
    if n1 * n2 > MAX_PAIRS:
        raise BudgetExceededError(f"{n1 * n2} strategy pairs exceed the {MAX_PAIRS} budget")
    pv = np.asarray(p, dtype=float)
    qv = np.asarray(q, dtype=float)
    table = np.empty((n1, n2))
    se = np.empty((n1, n2))
    for i, si in enumerate(fam_1.strategies):
        for j, sj in enumerate(fam_2.strategies):
            noise = NoiseGrid(t, t + h, dt, n_paths, seed, fam_1.dim, fam_2.dim)
            table[i, j], se[i, j] = _estimate_with_terminal(
                t, pv, qv, si.build(t, t + h), sj.build(t, t + h), H, v_ref,
                t + h, noise, threads)
    j_star = int(np.argmax(table.min(axis=0)))
    i_star = int(np.argmin(table[:, j_star]))
    ref = v_ref.value_at(t, pv, qv if fam_2.dim > 1 else None)
    return DppReport(float(table[i_star, j_star]), float(se[i_star, j_star]),
                     float(ref), table)
