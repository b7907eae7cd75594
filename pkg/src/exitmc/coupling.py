"""Coupled coarse/fine level sampling with conditional-expectation splitting.

One level-``l`` sample advances a fine path (step h_l) and a coarse path
(step h_{l-1} = K h_l) under the same Brownian increments: each coarse
increment is the sum of the K fine increments of its block, never sampled
separately.  The joint phase runs to the end of the first coarse block in
which at least one of the two paths has exited or the horizon is reached.
If exactly one path is still alive at that block boundary, it is duplicated
into ``split_count`` copies continued under independent noise substreams,
and its payoff is replaced by the average of the copies.  Averaging
approximates the conditional expectation of the payoff given the joint-phase
noise; it leaves every level's expected value unchanged (so the telescoping
sum over levels is preserved) while removing most of the variance caused by
near-boundary survivors.

A fine path that exits mid-block freezes, but the rest of the block's fine
increments are still drawn so the coarse increment keeps its full variance.
The sampler counts every normal variate drawn, including those frozen paths
no longer consume.

With ``split_count`` forced to 1 this sampler reproduces the plain coupled
difference estimator in the same code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import stats as stats_mod
from .model import ProblemSpec, has_identity_diffusion
from .paths import (BoundaryMode, PathBatch, PathState, SimulationFailure,
                    _exit_test_batch, _grid_steps, advance_path_batch, em_step,
                    exit_test, simulate_path)
from .rng import (ROLE_COARSE_SPLIT, ROLE_FINE_SPLIT, ROLE_JOINT, NoiseBundle,
                  NoiseStream, derive_key, fill_normals, pack_stream)

M_RULES = ("two_pow_ell", "two_pow_ell_over_sqrt_ell")


def split_count(rule: str, level: int) -> int:
    """Number of split continuations M_l prescribed by a rule at a level."""
    if level == 0:
        return 1
    if rule == "two_pow_ell":
        return 2 ** level
    if rule == "two_pow_ell_over_sqrt_ell":
        return math.ceil(2 ** level / math.sqrt(level))
    if rule.startswith("constant:"):
        m = int(rule.split(":", 1)[1])
        if m < 1:
            raise ValueError("constant split count must be >= 1")
        return m
    raise ValueError(f"unknown split-count rule: {rule!r}")


@dataclass(frozen=True)
class LevelParams:
    """Grid and splitting parameters of one level.

    h_fine is always h0 / refinement**level; h_coarse is one level up.
    split_count is ignored at level 0, where a sample is a single path.
    """

    level: int
    h0: float = 0.1
    refinement: int = 4
    split_count: int = 1

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")
        if self.refinement < 2:
            raise ValueError("refinement factor must be an integer >= 2")
        if self.split_count < 1:
            raise ValueError("split_count must be >= 1")

    @property
    def h_fine(self) -> float:
        return self.h0 / self.refinement ** self.level

    @property
    def h_coarse(self) -> float:
        if self.level == 0:
            raise ValueError("level 0 has no coarse grid")
        return self.h0 / self.refinement ** (self.level - 1)


@dataclass(frozen=True)
class LevelSample:
    """One coupled sample: split-averaged fine and coarse payoffs and cost."""

    fine_value: float
    coarse_value: float
    diff: float
    rng_cost: int


def coupled_increments(noise: NoiseStream, K: int, h_fine: float, noise_dim: int):
    """K fine Brownian increments of one coarse block plus their exact sum.

    Returns (fine_increments (K, noise_dim), coarse_increment (noise_dim,)),
    all scaled to N(0, h_fine) per component.
    """
    if K < 2:
        raise ValueError("refinement factor must be >= 2")
    z = noise.normals(K * noise_dim).reshape(K, noise_dim) * np.sqrt(h_fine)
    return z, z.sum(axis=0)


def _settle(spec, state: PathState, tau: float) -> float:
    g_val = float(np.asarray(spec.fk.terminal(state.position, tau), dtype=float))
    return state.running_payoff + state.discount * g_val


def _continue_split(spec, state: PathState, h, mode, streams):
    payoffs = []
    cost = 0
    for stream in streams:
        start = PathState(position=state.position.copy(), step=state.step,
                          discount=state.discount, running_payoff=state.running_payoff,
                          alive=True, rng_cost=0)
        out = simulate_path(spec, start, h, mode, stream)
        payoffs.append(out.payoff)
        cost += out.rng_cost
    return float(np.sum(np.asarray(payoffs)) / len(payoffs)), cost


def level_sample(spec: ProblemSpec, params: LevelParams, mode: BoundaryMode,
                 noise: NoiseBundle) -> LevelSample:
    """Draw one level sample (scalar reference implementation)."""
    if params.level == 0:
        out = simulate_path(spec, PathState.initial(spec), params.h_fine, mode,
                            noise.joint())
        return LevelSample(out.payoff, 0.0, out.payoff, out.rng_cost)

    h_f, h_c, K = params.h_fine, params.h_coarse, params.refinement
    n_blocks = _grid_steps(spec.horizon, h_c)
    n_fine_total = n_blocks * K
    d_noise = spec.noise_dim
    joint = noise.joint()

    fine = PathState.initial(spec)
    coarse = PathState.initial(spec)
    fine_payoff = coarse_payoff = None
    cost = 0

    for block in range(n_blocks):
        fine_incs, coarse_inc = coupled_increments(joint, K, h_f, d_noise)
        cost += K * d_noise
        for s in range(K):
            if not fine.alive:
                continue
            fine = em_step(spec, fine, h_f, fine_incs[s])
            if not np.all(np.isfinite(fine.position)):
                raise SimulationFailure("non-finite fine path in joint phase")
            t_new = spec.horizon if fine.step == n_fine_total else fine.step * h_f
            if exit_test(spec, fine.position, h_f, mode, t_new):
                fine_payoff = _settle(spec, fine, t_new)
                fine.alive = False
        coarse = em_step(spec, coarse, h_c, coarse_inc)
        if not np.all(np.isfinite(coarse.position)):
            raise SimulationFailure("non-finite coarse path in joint phase")
        t_c = spec.horizon if coarse.step == n_blocks else coarse.step * h_c
        if exit_test(spec, coarse.position, h_c, mode, t_c):
            coarse_payoff = _settle(spec, coarse, t_c)
            coarse.alive = False
        if block + 1 == n_blocks:
            if fine.alive:
                fine_payoff = _settle(spec, fine, spec.horizon)
                fine.alive = False
            if coarse.alive:
                coarse_payoff = _settle(spec, coarse, spec.horizon)
                coarse.alive = False
        if not (fine.alive and coarse.alive):
            break

    # at most one of the two can still be alive at the split time
    assert not (fine.alive and coarse.alive)
    M = params.split_count
    if fine.alive:
        fine_payoff, c = _continue_split(spec, fine, h_f, mode,
                                         [noise.fine_split(m) for m in range(M)])
        cost += c
    if coarse.alive:
        coarse_payoff, c = _continue_split(spec, coarse, h_c, mode,
                                           [noise.coarse_split(m) for m in range(M)])
        cost += c

    return LevelSample(fine_payoff, coarse_payoff, fine_payoff - coarse_payoff, cost)


@dataclass
class LevelBatch:
    """Vector of level samples: per-sample payoffs, differences and costs."""

    fine: np.ndarray
    coarse: np.ndarray
    cost: np.ndarray

    @property
    def diff(self) -> np.ndarray:
        return self.fine - self.coarse


def _advance_paired(spec, params, mode, seed, first_index, count):
    """Joint phase of the coupled sampler, vectorized over samples."""
    h_f, h_c, K = params.h_fine, params.h_coarse, params.refinement
    n_blocks = _grid_steps(spec.horizon, h_c)
    n_fine_total = n_blocks * K
    d = spec.dim
    d_noise = spec.noise_dim
    k0, k1 = derive_key(seed)
    n = count
    T = spec.horizon

    c1 = (np.uint64(first_index) + np.arange(n, dtype=np.uint64))
    c2 = np.full(n, pack_stream(params.level, ROLE_JOINT), dtype=np.uint64)

    fine_pos = np.tile(spec.start, (n, 1))
    coarse_pos = np.tile(spec.start, (n, 1))
    fine_step = np.zeros(n, dtype=np.int64)
    coarse_step = np.zeros(n, dtype=np.int64)
    fine_disc = np.ones(n)
    fine_run = np.zeros(n)
    coarse_disc = np.ones(n)
    coarse_run = np.zeros(n)
    fine_alive = np.ones(n, dtype=bool)
    coarse_alive = np.ones(n, dtype=bool)
    fine_payoff = np.zeros(n)
    coarse_payoff = np.zeros(n)
    in_joint = np.ones(n, dtype=bool)
    cost = np.zeros(n, dtype=np.int64)

    sqrt_hf = np.sqrt(h_f)

    identity_b = has_identity_diffusion(spec)

    def em_update(pos, disc, run, ids, dW, t, h):
        x = pos[ids]
        f_val = np.asarray(spec.fk.running(x, t), dtype=float)
        run[ids] += disc[ids] * f_val * h
        disc[ids] *= np.exp(-np.asarray(spec.fk.potential(x, t), dtype=float) * h)
        drift = np.asarray(spec.drift(x, t), dtype=float)
        if identity_b:
            noise_term = dW
        else:
            b = np.asarray(spec.diffusion(x, t), dtype=float)
            noise_term = (b * dW[..., None, :]).sum(axis=-1)
        new = x + drift * h + noise_term
        if not np.all(np.isfinite(new)):
            raise SimulationFailure("non-finite path state in joint phase")
        pos[ids] = new
        return new

    act = np.flatnonzero(in_joint)
    for block in range(n_blocks):
        if act.size == 0:
            break
        starts = np.full(act.size, block * K * d_noise, dtype=np.uint64)
        Z = fill_normals(k0, k1, c1[act], c2[act], starts, K * d_noise)
        Z = Z.reshape(act.size, K, d_noise) * sqrt_hf
        cost[act] += K * d_noise

        for s in range(K):
            m = fine_alive[act]
            if not m.any():
                continue
            ids = act[m]
            t_old = fine_step[ids] * h_f
            new = em_update(fine_pos, fine_disc, fine_run, ids, Z[m, s, :], t_old, h_f)
            fine_step[ids] += 1
            t_new = np.where(fine_step[ids] == n_fine_total, T, fine_step[ids] * h_f)
            exited = _exit_test_batch(spec, new, h_f, mode, t_new)
            if exited.any():
                done = ids[exited]
                g = np.asarray(spec.fk.terminal(new[exited], t_new[exited]), dtype=float)
                fine_payoff[done] = fine_run[done] + fine_disc[done] * g
                fine_alive[done] = False

        csum = Z.sum(axis=1)
        t_old_c = block * h_c
        new_c = em_update(coarse_pos, coarse_disc, coarse_run, act, csum, t_old_c, h_c)
        coarse_step[act] += 1
        t_new_c = T if block + 1 == n_blocks else (block + 1) * h_c
        exited_c = _exit_test_batch(spec, new_c, h_c, mode, t_new_c)
        if exited_c.any():
            done = act[exited_c]
            g = np.asarray(spec.fk.terminal(new_c[exited_c], t_new_c), dtype=float)
            coarse_payoff[done] = coarse_run[done] + coarse_disc[done] * g
            coarse_alive[done] = False

        if block + 1 == n_blocks:
            for alive, pos, run, disc, payoff in (
                    (fine_alive, fine_pos, fine_run, fine_disc, fine_payoff),
                    (coarse_alive, coarse_pos, coarse_run, coarse_disc, coarse_payoff)):
                left = act[alive[act]]
                if left.size:
                    g = np.asarray(spec.fk.terminal(pos[left], T), dtype=float)
                    payoff[left] = run[left] + disc[left] * g
                    alive[left] = False

        both = fine_alive[act] & coarse_alive[act]
        in_joint[act] = both
        act = act[both]

    assert not np.any(fine_alive & coarse_alive)
    return dict(c1=c1, fine_pos=fine_pos, coarse_pos=coarse_pos, fine_step=fine_step,
                coarse_step=coarse_step, fine_disc=fine_disc, fine_run=fine_run,
                coarse_disc=coarse_disc, coarse_run=coarse_run, fine_alive=fine_alive,
                coarse_alive=coarse_alive, fine_payoff=fine_payoff,
                coarse_payoff=coarse_payoff, cost=cost)


def _split_continuations(spec, params, mode, seed, joint, which):
    """Run the split continuations of all surviving paths of one role."""
    if which == "fine":
        alive = joint["fine_alive"]
        h = params.h_fine
        role = ROLE_FINE_SPLIT
        pos, disc, run = joint["fine_pos"], joint["fine_disc"], joint["fine_run"]
        step = joint["fine_step"]
        payoff = joint["fine_payoff"]
    else:
        alive = joint["coarse_alive"]
        h = params.h_coarse
        role = ROLE_COARSE_SPLIT
        pos, disc, run = joint["coarse_pos"], joint["coarse_disc"], joint["coarse_run"]
        step = joint["coarse_step"]
        payoff = joint["coarse_payoff"]

    surv = np.flatnonzero(alive)
    if surv.size == 0:
        return
    M = params.split_count
    k0, k1 = derive_key(seed)
    n_lanes = surv.size * M

    batch = PathBatch.empty(n_lanes, spec.dim)
    batch.position[:] = np.repeat(pos[surv], M, axis=0)
    batch.step[:] = np.repeat(step[surv], M)
    batch.discount[:] = np.repeat(disc[surv], M)
    batch.running[:] = np.repeat(run[surv], M)
    batch.c1[:] = np.repeat(joint["c1"][surv], M)
    batch.c2[:] = np.tile(
        np.array([pack_stream(params.level, role, m) for m in range(M)],
                 dtype=np.uint64), surv.size)
    advance_path_batch(spec, mode, h, batch, k0, k1)

    payoff[surv] = batch.payoff.reshape(surv.size, M).sum(axis=1) / M
    joint["cost"][surv] += batch.cost.reshape(surv.size, M).sum(axis=1)


def sample_level_batch(spec: ProblemSpec, params: LevelParams, mode: BoundaryMode,
                       seed: int, first_index: int, count: int) -> LevelBatch:
    """Draw ``count`` level samples with indices first_index..first_index+count-1.

    Bit-identical to repeated level_sample calls on the same stream keys; the
    batching is an execution detail only.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if params.level == 0:
        k0, k1 = derive_key(seed)
        batch = PathBatch.empty(count, spec.dim)
        batch.position[:] = spec.start
        batch.c1[:] = np.uint64(first_index) + np.arange(count, dtype=np.uint64)
        batch.c2[:] = pack_stream(0, ROLE_JOINT)
        advance_path_batch(spec, mode, params.h_fine, batch, k0, k1)
        return LevelBatch(fine=batch.payoff.copy(), coarse=np.zeros(count),
                          cost=batch.cost.copy())

    joint = _advance_paired(spec, params, mode, seed, first_index, count)
    _split_continuations(spec, params, mode, seed, joint, "fine")
    _split_continuations(spec, params, mode, seed, joint, "coarse")
    return LevelBatch(fine=joint["fine_payoff"], coarse=joint["coarse_payoff"],
                      cost=joint["cost"])


def split_variance_demo(M: int, noise: NoiseStream, n_samples: int) -> float:
    """Sample variance of the split average of the toy target W + Z.

    W and the Z copies are independent standard normals, so the analytic
    variance is 1 + 1/M for any M >= 1.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    w = noise.normals(n_samples)
    z = noise.normals(n_samples * M).reshape(n_samples, M)
    fbar = w + z.sum(axis=1) / M
    return float(fbar.var(ddof=1))


def collect_level_stats(spec: ProblemSpec, params: LevelParams, mode: BoundaryMode,
                        seed: int, count: int, first_index: int = 0,
                        chunk: int = 1 << 17) -> "stats_mod.LevelStats":
    """Accumulate mergeable moment statistics over a range of sample indices.

    Samples are drawn in fixed-size chunks in index order, so the result does
    not depend on how work is scheduled.
    """
    acc = stats_mod.LevelStats()
    done = 0
    while done < count:
        take = min(chunk, count - done)
        batch = sample_level_batch(spec, params, mode, seed, first_index + done, take)
        acc = stats_mod.record_batch(acc, batch.diff, batch.fine, batch.cost)
        done += take
    return acc
