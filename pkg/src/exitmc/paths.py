"""Single-path Euler-Maruyama simulation with grid-time exit detection.

A path advances on a uniform grid, X_{n+1} = X_n + a(X_n,t_n) h + b(X_n,t_n) dW_n,
and is stopped at the first grid time at which it is found outside the domain
(or inside the shifted boundary band, see BoundaryMode), capped at the
horizon.  The payoff integral uses the left-endpoint rectangle rule in every
term, and each step accrues the running payoff before the discount update so
that coarse and fine paths follow the identical quadrature convention.

Times are never accumulated in floating point: each path carries an integer
step index and the grid time is formed as step * h on demand.

Both a scalar reference implementation (one PathState at a time) and a
vectorized batch engine live here; the batch engine must reproduce the scalar
one bit for bit on matched noise streams, which the test suite enforces.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import ProblemSpec, discount_increment, has_identity_diffusion
from .rng import NoiseStream, fill_normals

# boundary shift coefficient -zeta(1/2)/sqrt(2 pi), 4 significant figures
BOUNDARY_SHIFT_COEFF = 0.5826


class SimulationFailure(RuntimeError):
    """A path produced a non-finite coordinate."""


class BoundaryMode(enum.Enum):
    STANDARD = "standard"
    GM_SHIFT = "gm_shift"


@dataclass
class PathState:
    """In-flight state of one path on a grid of step size h.

    ``step`` is the integer grid index (time = step * h), ``discount`` the
    accumulated discount factor, ``running_payoff`` the accumulated
    discounted running-cost integral, and ``rng_cost`` the count of normal
    variates consumed so far.
    """

    position: np.ndarray
    step: int
    discount: float
    running_payoff: float
    alive: bool
    rng_cost: int

    @classmethod
    def initial(cls, spec: ProblemSpec) -> "PathState":
        return cls(position=spec.start.copy(), step=0, discount=1.0,
                   running_payoff=0.0, alive=True, rng_cost=0)


@dataclass(frozen=True)
class PathOutcome:
    """A finished path: grid-aligned exit time, exit state, discounted payoff."""

    exit_time: float
    exit_state: np.ndarray
    payoff: float
    steps: int
    rng_cost: int


def em_step(spec: ProblemSpec, state: PathState, h: float, dW: np.ndarray) -> PathState:
    """One Euler-Maruyama step; dW must already be scaled to N(0, h).

    The running payoff accrues with the pre-step discount, then the discount
    picks up the current step's factor (left-endpoint rule for both).
    """
    if not state.alive:
        raise ValueError("em_step requires a live path")
    x = state.position
    t = state.step * h
    f_val = float(np.asarray(spec.fk.running(x, t), dtype=float))
    running = state.running_payoff + state.discount * f_val * h
    discount = state.discount * float(discount_increment(spec.fk, x, t, h))
    drift = np.asarray(spec.drift(x, t), dtype=float)
    b = np.asarray(spec.diffusion(x, t), dtype=float)
    position = x + drift * h + (b * dW).sum(axis=-1)
    return PathState(position=position, step=state.step + 1, discount=discount,
                     running_payoff=running, alive=True,
                     rng_cost=state.rng_cost + dW.shape[-1])


def exit_test(spec: ProblemSpec, x, h: float, mode: BoundaryMode, t: float = 0.0) -> bool:
    """Has a path at position x (time t) exited, under the given boundary mode?

    STANDARD declares exit only outside the open domain.  GM_SHIFT also
    declares exit inside a band of width c0 * ||n^T b||_2 * sqrt(h) along the
    boundary, which restores first-order weak convergence of exit-time
    functionals.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    inside = bool(spec.domain.contains(x))
    if mode is BoundaryMode.STANDARD:
        return not inside
    if not inside:
        return True
    n = spec.domain.boundary_normal(x)
    b = np.asarray(spec.diffusion(x, t), dtype=float)
    ntb = (n[..., :, None] * b).sum(axis=-2)
    band = BOUNDARY_SHIFT_COEFF * np.sqrt((ntb * ntb).sum(axis=-1)) * np.sqrt(h)
    return bool(spec.domain.boundary_distance(x) <= band)


def _exit_test_batch(spec, x, h, mode, t):
    # decision-equivalent to exit_test lane by lane; signed_depth and the
    # identity-diffusion band (||n^T b|| = 1 exactly) are exact shortcuts
    depth_fn = spec.domain.signed_depth
    if mode is BoundaryMode.STANDARD:
        if depth_fn is not None:
            return depth_fn(x) <= 0.0
        return ~spec.domain.contains(x)
    if has_identity_diffusion(spec):
        band = BOUNDARY_SHIFT_COEFF * np.sqrt(h)
    else:
        n = spec.domain.boundary_normal(x)
        b = np.asarray(spec.diffusion(x, t), dtype=float)
        ntb = (n[..., :, None] * b).sum(axis=-2)
        band = BOUNDARY_SHIFT_COEFF * np.sqrt((ntb * ntb).sum(axis=-1)) * np.sqrt(h)
    if depth_fn is not None:
        return depth_fn(x) <= band
    return ~spec.domain.contains(x) | (spec.domain.boundary_distance(x) <= band)


def _grid_steps(horizon: float, h: float) -> int:
    n = int(round(horizon / h))
    if n < 1 or abs(n * h - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon {horizon} is not an integer multiple of h {h}")
    return n


def simulate_path(spec: ProblemSpec, state: PathState, h: float, mode: BoundaryMode,
                  noise: NoiseStream) -> PathOutcome:
    """Run one path to its exit or to the horizon and settle its payoff."""
    n_total = _grid_steps(spec.horizon, h)
    if not state.alive:
        raise ValueError("simulate_path requires a live starting state")
    sqrt_h = np.sqrt(h)
    d_noise = spec.noise_dim
    while True:
        dW = noise.normals(d_noise) * sqrt_h
        state = em_step(spec, state, h, dW)
        if not np.all(np.isfinite(state.position)):
            raise SimulationFailure(f"non-finite path state at step {state.step}")
        t_new = state.step * h
        at_horizon = state.step == n_total
        if at_horizon or exit_test(spec, state.position, h, mode, t_new):
            exit_time = spec.horizon if at_horizon else t_new
            g_val = float(np.asarray(spec.fk.terminal(state.position, exit_time),
                                     dtype=float))
            payoff = state.running_payoff + state.discount * g_val
            return PathOutcome(exit_time=exit_time, exit_state=state.position,
                               payoff=payoff, steps=state.step,
                               rng_cost=state.rng_cost)


@dataclass
class PathBatch:
    """Lane arrays for many independent in-flight paths on one grid.

    c1/c2 address each lane's noise stream and ``cursor`` its word offset;
    lanes are independent, so batching is purely an execution detail.
    """

    position: np.ndarray   # (B, d)
    step: np.ndarray       # (B,) int64
    discount: np.ndarray   # (B,)
    running: np.ndarray    # (B,)
    alive: np.ndarray      # (B,) bool
    c1: np.ndarray         # (B,) uint64
    c2: np.ndarray         # (B,) uint64
    cursor: np.ndarray     # (B,) uint64
    payoff: np.ndarray     # (B,) settled on completion
    exit_step: np.ndarray  # (B,) int64
    cost: np.ndarray       # (B,) int64

    @classmethod
    def empty(cls, n: int, dim: int) -> "PathBatch":
        return cls(
            position=np.zeros((n, dim)),
            step=np.zeros(n, dtype=np.int64),
            discount=np.ones(n),
            running=np.zeros(n),
            alive=np.ones(n, dtype=bool),
            c1=np.zeros(n, dtype=np.uint64),
            c2=np.zeros(n, dtype=np.uint64),
            cursor=np.zeros(n, dtype=np.uint64),
            payoff=np.zeros(n),
            exit_step=np.zeros(n, dtype=np.int64),
            cost=np.zeros(n, dtype=np.int64),
        )


def advance_path_batch(spec: ProblemSpec, mode: BoundaryMode, h: float,
                       batch: PathBatch, k0, k1) -> None:
    """Advance every live lane of the batch to completion, in place.

    Mirrors simulate_path exactly, one grid step across all live lanes per
    iteration; payoffs, exit steps and costs are settled into the batch.
    """
    n_total = _grid_steps(spec.horizon, h)
    sqrt_h = np.sqrt(h)
    d_noise = spec.noise_dim
    identity_b = has_identity_diffusion(spec)
    act = np.flatnonzero(batch.alive)
    while True:
        if act.size == 0:
            return
        dW = fill_normals(k0, k1, batch.c1[act], batch.c2[act],
                          batch.cursor[act], d_noise) * sqrt_h
        x = batch.position[act]
        t = batch.step[act] * h
        f_val = np.asarray(spec.fk.running(x, t), dtype=float)
        running = batch.running[act] + batch.discount[act] * f_val * h
        discount = batch.discount[act] * np.exp(
            -np.asarray(spec.fk.potential(x, t), dtype=float) * h)
        drift = np.asarray(spec.drift(x, t), dtype=float)
        if identity_b:
            noise_term = dW
        else:
            b = np.asarray(spec.diffusion(x, t), dtype=float)
            noise_term = (b * dW[..., None, :]).sum(axis=-1)
        position = x + drift * h + noise_term
        if not np.all(np.isfinite(position)):
            bad = act[~np.all(np.isfinite(position), axis=-1)][0]
            raise SimulationFailure(f"non-finite path state in lane {bad}")
        step = batch.step[act] + 1

        batch.position[act] = position
        batch.step[act] = step
        batch.discount[act] = discount
        batch.running[act] = running
        batch.cursor[act] += np.uint64(d_noise)
        batch.cost[act] += d_noise

        t_new = step * h
        at_horizon = step == n_total
        done = at_horizon | _exit_test_batch(spec, position, h, mode, t_new)
        if np.any(done):
            idx = act[done]
            tau = np.where(at_horizon[done], spec.horizon, t_new[done])
            g_val = np.asarray(spec.fk.terminal(position[done], tau), dtype=float)
            batch.payoff[idx] = running[done] + discount[done] * g_val
            batch.exit_step[idx] = step[done]
            batch.alive[idx] = False
            act = act[~done]
