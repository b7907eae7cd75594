"""Problem definitions: the SDE, the spatial domain, and the payoff data.

A problem couples the dynamics dX = a(X,t) dt + b(X,t) dW with a bounded open
domain D and the payoff triple (f, g, V) of the functional

    u(x,t) = E[ integral_t^tau E(t,s) f(X_s,s) ds + E(t,tau) g(X_tau,tau) ],
    E(t0,t1) = exp(-integral V(X_s,s) ds),

where tau is the first exit from D capped at the horizon T.  All callables
must be pure and accept batched inputs: states of shape (..., d) with times
broadcast over the leading axes.  Only analytic geometries with closed-form
distance and normal are provided; there is no mesh or level-set support.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class FeynmanKacData:
    """Payoff data (f, g, V); each maps (state (...,d), time) -> scalar (...)."""

    running: Callable
    terminal: Callable
    potential: Callable


@dataclass(frozen=True)
class DomainGeometry:
    """Boundary queries for a bounded open domain.

    ``contains`` uses strict inequality: a point exactly on the boundary
    counts as exited.  ``boundary_distance`` is the Euclidean distance to the
    boundary and may be queried from outside as well.  ``boundary_normal``
    returns the unit outward normal at the boundary projection of its
    argument.

    ``signed_depth``, when provided, must equal boundary_distance inside the
    domain and be <= 0 outside; the batch engines use it as a fused
    contains-plus-distance query on the hot path.
    """

    contains: Callable
    boundary_distance: Callable
    boundary_normal: Callable
    signed_depth: Callable | None = None


@dataclass(frozen=True)
class ProblemSpec:
    """Immutable description of one stopped-diffusion problem.

    drift and diffusion map (state (...,d), time) to (...,d) and (...,d,d');
    ``start`` must lie strictly inside the domain and ``horizon`` must be
    positive.  Instances are safe to share across concurrent samplers.
    """

    drift: Callable
    diffusion: Callable
    dim: int
    noise_dim: int
    fk: FeynmanKacData
    horizon: float
    start: Array
    domain: DomainGeometry

    def __post_init__(self):
        object.__setattr__(self, "start", np.asarray(self.start, dtype=float))
        if self.dim < 1 or self.noise_dim < 1:
            raise ValueError("dim and noise_dim must be positive")
        if self.start.shape != (self.dim,):
            raise ValueError(f"start must have shape ({self.dim},)")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not bool(self.domain.contains(self.start)):
            raise ValueError("start must lie in the domain interior")


class ExitTimeProfile:
    """Payoff presets whose expectation is the expected (capped) exit time.

    Two interchangeable variants: ``terminal_clock`` pays the exit time
    through g(x,t) = t, ``running_clock`` accrues it through f = 1.  With
    V = 0 they are equal path by path, not just in expectation.
    """

    TERMINAL_CLOCK = "terminal_clock"
    RUNNING_CLOCK = "running_clock"

    @staticmethod
    def terminal_clock() -> FeynmanKacData:
        return FeynmanKacData(
            running=_zero_scalar,
            terminal=lambda x, t: _broadcast_time(x, t),
            potential=_zero_scalar,
        )

    @staticmethod
    def running_clock() -> FeynmanKacData:
        return FeynmanKacData(
            running=lambda x, t: np.ones(np.shape(x)[:-1]),
            terminal=_zero_scalar,
            potential=_zero_scalar,
        )

    @classmethod
    def make(cls, variant: str) -> FeynmanKacData:
        if variant == cls.TERMINAL_CLOCK:
            return cls.terminal_clock()
        if variant == cls.RUNNING_CLOCK:
            return cls.running_clock()
        raise ValueError(f"unknown exit-time payoff variant: {variant!r}")


def _zero_scalar(x, t):
    return np.zeros(np.shape(x)[:-1])


def _broadcast_time(x, t):
    return np.broadcast_to(np.asarray(t, dtype=float), np.shape(x)[:-1])


def discount_increment(fk: FeynmanKacData, x, t, h: float):
    """Per-step discount factor exp(-V(x,t) h), left-endpoint quadrature."""
    if not h > 0:
        raise ValueError("h must be positive")
    return np.exp(-np.asarray(fk.potential(x, t), dtype=float) * h)


def _zero_drift(x, t):
    return np.zeros_like(x)


def _identity_diffusion(x, t):
    d = np.shape(x)[-1]
    return np.broadcast_to(np.eye(d), np.shape(x) + (d,))


def has_identity_diffusion(spec: "ProblemSpec") -> bool:
    """True for the built-in identity diffusion; enables exact fast paths."""
    return spec.diffusion is _identity_diffusion


def _cube_geometry(half_width: float) -> DomainGeometry:
    a = float(half_width)

    def contains(x):
        return np.max(np.abs(x), axis=-1) < a

    def distance(x):
        sup = np.max(np.abs(x), axis=-1)
        inside = a - sup
        # outside: Euclidean distance to the nearest face/edge/corner
        excess = np.clip(np.abs(x) - a, 0.0, None)
        outside = np.sqrt(np.sum(excess * excess, axis=-1))
        return np.where(sup < a, inside, outside)

    def normal(x):
        x = np.asarray(x, dtype=float)
        # dominant coordinate, lowest index on ties; sign(0) treated as +
        idx = np.argmax(np.abs(x), axis=-1)
        n = np.zeros_like(x)
        sgn = np.where(np.take_along_axis(x, idx[..., None], axis=-1) >= 0, 1.0, -1.0)
        np.put_along_axis(n, idx[..., None], sgn, axis=-1)
        return n

    def depth(x):
        return a - np.max(np.abs(x), axis=-1)

    return DomainGeometry(contains=contains, boundary_distance=distance,
                          boundary_normal=normal, signed_depth=depth)


def _ball_geometry(radius: float) -> DomainGeometry:
    r = float(radius)

    def contains(x):
        return np.sqrt(np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)) < r

    def distance(x):
        return np.abs(r - np.sqrt(np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)))

    def normal(x):
        x = np.asarray(x, dtype=float)
        nrm = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
        safe = np.where(nrm > 0, nrm, 1.0)
        n = x / safe
        # undefined at the centre; pick the first axis deterministically
        e0 = np.zeros_like(x)
        e0[..., 0] = 1.0
        return np.where(nrm > 0, n, e0)

    def depth(x):
        return r - np.sqrt(np.sum(np.asarray(x, dtype=float) ** 2, axis=-1))

    return DomainGeometry(contains=contains, boundary_distance=distance,
                          boundary_normal=normal, signed_depth=depth)


def make_cube_problem(half_width: float, dim: int, horizon: float, start,
                      profile: str = ExitTimeProfile.TERMINAL_CLOCK) -> ProblemSpec:
    """Brownian motion in the open cube (-half_width, half_width)^dim.

    Drift is zero and the diffusion matrix is the identity, so the functional
    with an exit-time payoff profile solves u_t + (1/2) Lap(u) + 1 = 0 with
    homogeneous Dirichlet and terminal data.
    """
    if not half_width > 0:
        raise ValueError("half_width must be positive")
    return ProblemSpec(
        drift=_zero_drift,
        diffusion=_identity_diffusion,
        dim=dim,
        noise_dim=dim,
        fk=ExitTimeProfile.make(profile),
        horizon=horizon,
        start=np.asarray(start, dtype=float),
        domain=_cube_geometry(half_width),
    )


def make_ball_problem(radius: float, dim: int, horizon: float, start,
                      profile: str = ExitTimeProfile.TERMINAL_CLOCK) -> ProblemSpec:
    """Brownian motion in the open ball of the given radius (smooth boundary)."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    return ProblemSpec(
        drift=_zero_drift,
        diffusion=_identity_diffusion,
        dim=dim,
        noise_dim=dim,
        fk=ExitTimeProfile.make(profile),
        horizon=horizon,
        start=np.asarray(start, dtype=float),
        domain=_ball_geometry(radius),
    )


def problem_preset(name: str, profile: str = ExitTimeProfile.TERMINAL_CLOCK) -> ProblemSpec:
    """Built-in problems addressable by name from the CLI."""
    if name == "cube3d":
        return make_cube_problem(1.0, 3, 1.0, np.zeros(3), profile)
    if name == "cube1d":
        return make_cube_problem(1.0, 1, 1.0, np.zeros(1), profile)
    if name == "ball3d":
        return make_ball_problem(1.0, 3, 1.0, np.zeros(3), profile)
    raise ValueError(f"unknown problem preset: {name!r}")


PRESET_NAMES = ("cube3d", "cube1d", "ball3d")
