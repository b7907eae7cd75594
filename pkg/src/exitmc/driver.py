"""Adaptive multilevel driver: picks levels and sample counts for a target RMS error.

The estimator is Y = sum of per-level correction means.  The driver pilots a
few coarse levels, then loops: re-estimate per-level variances V_l and costs
C_l, allocate near-optimal sample counts

    N_l = ceil( 2 eps^-2 sqrt(V_l / C_l) * sum_l' sqrt(C_l' V_l') ),

top levels up as needed, and extend the level hierarchy whenever the
extrapolated weak-error remainder exceeds eps/sqrt(2).  The error budget is
split evenly: half the squared tolerance for variance, half for bias.

Three estimator variants are supported: ``orig`` (coupled differences, no
splitting, standard boundary), ``new1`` (with splitting), ``new2`` (splitting
plus the shifted-boundary exit rule, which raises the weak rate from 1/2 to 1
and roughly halves the number of levels needed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import stats as stats_mod
from .coupling import LevelParams, collect_level_stats, split_count
from .model import ProblemSpec
from .paths import BoundaryMode, _grid_steps

ESTIMATORS = ("orig", "new1", "new2")

# weak-error rates used by the bias test: 1/2 for the plain exit rule,
# 1 with the shifted boundary
_ALPHA_DEFAULT = {"orig": 0.5, "new1": 0.5, "new2": 1.0}


class LevelCapError(RuntimeError):
    """The level cap was reached before the bias test converged."""


def estimator_mode(name: str) -> BoundaryMode:
    if name not in ESTIMATORS:
        raise ValueError(f"unknown estimator: {name!r}")
    return BoundaryMode.GM_SHIFT if name == "new2" else BoundaryMode.STANDARD


@dataclass(frozen=True)
class MlmcConfig:
    """Settings of one adaptive run.

    The pilot draws ``initial_samples`` on each newly opened level; it is
    deliberately small because the allocation loop immediately tops up any
    level whose optimal count exceeds it, while an oversized pilot would
    dominate the total cost at loose tolerances and level the cost-vs-accuracy
    scaling the method is built to deliver.
    """

    epsilon: float
    h0: float = 0.1
    refinement: int = 4
    estimator: str = "new2"
    m_rule: str = "two_pow_ell"
    L_min: int = 2
    L_max: int = 10
    alpha_hint: float | None = None
    initial_samples: int = 25
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")
        if self.refinement < 2:
            raise ValueError("refinement factor must be >= 2")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator: {self.estimator!r}")
        if not 2 <= self.L_min <= self.L_max:
            raise ValueError("need 2 <= L_min <= L_max")
        if self.initial_samples < 2:
            raise ValueError("initial_samples must be >= 2")

    @property
    def alpha(self) -> float:
        return self.alpha_hint if self.alpha_hint is not None \
            else _ALPHA_DEFAULT[self.estimator]


@dataclass(frozen=True)
class LevelRecord:
    """Per-level summary published in results and CSV output."""

    level: int
    h: float
    n_samples: int
    mean_diff: float
    var_diff: float
    mean_fine: float
    var_fine: float
    kurtosis: float
    cost_per_sample: float


@dataclass(frozen=True)
class MlmcResult:
    estimate: float
    levels: tuple[LevelRecord, ...]
    chosen_L: int
    total_cost: int
    fitted_alpha: float
    fitted_beta: float

    @property
    def variance_of_estimate(self) -> float:
        return sum(r.var_diff / r.n_samples for r in self.levels)


def optimal_samples(epsilon: float, costs, variances) -> np.ndarray:
    """Near-optimal per-level sample counts for the eps^2/2 variance budget.

    Proportional to sqrt(V_l / C_l), scaled so the estimator variance comes
    in under half the squared tolerance; floored at 2 so variances stay
    estimable on every level.
    """
    c = np.asarray(costs, dtype=float)
    v = np.asarray(variances, dtype=float)
    if np.any(c <= 0):
        raise ValueError("costs must be positive")
    if np.any(v < 0):
        raise ValueError("variances must be nonnegative")
    s = np.sum(np.sqrt(c * v))
    n = np.ceil(2.0 * epsilon ** -2 * np.sqrt(v / c) * s)
    return np.maximum(2, n).astype(np.int64)


def bias_converged(means, alpha: float, K: int, epsilon: float) -> bool:
    """Weak-error test on the last two correction means.

    Models |mean_l| ~ c K^(-alpha l); the geometric remainder beyond level L
    is then bounded by max(|m_L|, |m_{L-1}|/K^alpha) / (K^alpha - 1), which
    must fit inside the eps/sqrt(2) bias budget.
    """
    m = np.abs(np.asarray(means, dtype=float))
    if m.size < 2:
        raise ValueError("need at least 2 correction levels")
    ka = float(K) ** alpha
    remainder = max(m[-1], m[-2] / ka) / (ka - 1.0)
    return remainder <= epsilon / math.sqrt(2.0)


def _fit_rate(hs, values) -> float:
    # slope of log(value) vs log(h); nan when degenerate
    hs = np.asarray(hs, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > 0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(hs[keep]), np.log(values[keep]), 1)[0])


def _level_record(level, params, st, spec) -> LevelRecord:
    try:
        kurt = st.kurtosis()
    except stats_mod.UndefinedKurtosisError:
        kurt = float("nan")
    return LevelRecord(
        level=level,
        h=params.h_fine,
        n_samples=st.count,
        mean_diff=st.mean_diff,
        var_diff=st.var_diff,
        mean_fine=st.mean_fine,
        var_fine=st.var_fine,
        kurtosis=kurt,
        cost_per_sample=st.mean_cost,
    )


def run(spec: ProblemSpec, config: MlmcConfig) -> MlmcResult:
    """Adaptive MLMC estimation to RMS tolerance config.epsilon.

    Raises LevelCapError if the bias test has not converged by L_max.  For a
    fixed config the result is bit-reproducible regardless of scheduling.
    """
    _grid_steps(spec.horizon, config.h0)  # validates the coarsest grid
    mode = estimator_mode(config.estimator)
    eps = config.epsilon

    def make_params(level: int) -> LevelParams:
        m = 1 if config.estimator == "orig" else split_count(config.m_rule, level)
        return LevelParams(level=level, h0=config.h0, refinement=config.refinement,
                           split_count=m)

    params: list[LevelParams] = []
    level_stats: list[stats_mod.LevelStats] = []

    def open_level(level: int) -> None:
        params.append(make_params(level))
        level_stats.append(collect_level_stats(
            spec, params[level], mode, config.seed, config.initial_samples))

    L = config.L_min
    for level in range(L + 1):
        open_level(level)

    for _ in range(1000):
        variances = [st.var_diff for st in level_stats]
        costs = [st.mean_cost for st in level_stats]
        targets = optimal_samples(eps, costs, variances)

        topped_up = False
        for level, (st, target) in enumerate(zip(level_stats, targets)):
            extra = int(target) - st.count
            if extra > 0:
                more = collect_level_stats(spec, params[level], mode, config.seed,
                                           extra, first_index=st.count)
                level_stats[level] = stats_mod.merge(st, more)
                topped_up = True
        if topped_up:
            continue  # re-estimate V and C before judging convergence

        corrections = [st.mean_diff for st in level_stats[1:]]
        if bias_converged(corrections, config.alpha, config.refinement, eps):
            break
        if L == config.L_max:
            raise LevelCapError(
                f"bias test unconverged at level cap L={L} for eps={eps}")
        L += 1
        open_level(L)
    else:
        raise RuntimeError("sample allocation failed to settle")

    records = tuple(_level_record(level, params[level], st, spec)
                    for level, st in enumerate(level_stats))
    hs = [r.h for r in records[1:]]
    fitted_alpha = _fit_rate(hs, [abs(r.mean_diff) for r in records[1:]])
    fitted_beta = _fit_rate(hs, [r.var_diff for r in records[1:]])
    return MlmcResult(
        estimate=float(sum(r.mean_diff for r in records)),
        levels=records,
        chosen_L=L,
        total_cost=int(sum(st.total_rng_cost for st in level_stats)),
        fitted_alpha=fitted_alpha,
        fitted_beta=fitted_beta,
    )
