"""Nonlinear discrete-time quantum walk on an N-cycle.

The walker is a two-component spinor field: ``amps_right`` holds the |R>
amplitudes a_n and ``amps_left`` the |L> amplitudes b_n.  One step is

    nonlinear phase  ->  coin  ->  cyclic shift

where the phase imprinted on each component is ``2*pi*chi*|amp|**2`` of the
incoming state.  The operator functions here are plain numpy and return new
states; long runs go through the fused kernel in :mod:`nlqwalk._kernel`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "DEFAULT_STEPS",
    "EvenLatticeWarning",
    "Recorder",
    "NormDriftError",
    "WalkConfig",
    "WalkerState",
    "apply_coin",
    "apply_nonlinear_phase",
    "apply_shift",
    "coin_matrix",
    "default_epsilon",
    "evolve",
    "prepare_initial_state",
    "rotate_sites",
    "step",
]

DEFAULT_STEPS = 50_000

# per-step tolerance on the unit norm
STEP_NORM_TOL = 1e-12


class EvenLatticeWarning(UserWarning):
    """Raised (as a warning) for even N; the dynamics are still valid."""


class NormDriftError(RuntimeError):
    pass


def default_epsilon(n_sites: int) -> float:
    return 1e-3 / math.sqrt(2 * n_sites)


@dataclass(frozen=True)
class WalkConfig:
    """Full provenance of one trajectory.

    ``epsilon`` and ``transient_steps`` default to ``1e-3/sqrt(2N)`` and
    ``total_steps // 2`` when left as ``None``.
    """

    n_sites: int
    theta: float
    chi: float = 0.0
    epsilon: float | None = None
    seed: int = 0
    total_steps: int = DEFAULT_STEPS
    transient_steps: int | None = None

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 2:
            raise ValueError(f"n_sites must be an integer >= 2, got {self.n_sites!r}")
        if not 0.0 <= self.theta <= 2 * math.pi + 1e-12:
            raise ValueError(f"theta must lie in [0, 2pi], got {self.theta!r}")
        if not (self.chi >= 0.0 and math.isfinite(self.chi)):
            raise ValueError(f"chi must be finite and >= 0, got {self.chi!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.total_steps < 0:
            raise ValueError("total_steps must be non-negative")
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", default_epsilon(self.n_sites))
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.transient_steps is None:
            object.__setattr__(self, "transient_steps", self.total_steps // 2)
        if self.transient_steps < 0:
            raise ValueError("transient_steps must be non-negative")
        if self.total_steps > 0 and self.transient_steps >= self.total_steps:
            raise ValueError(
                f"transient_steps ({self.transient_steps}) must be smaller than "
                f"total_steps ({self.total_steps})"
            )
        if self.total_steps == 0 and self.transient_steps != 0:
            raise ValueError("transient_steps must be 0 when total_steps is 0")
        if self.even_n:
            warnings.warn(
                f"N={self.n_sites} is even; the reference setup uses odd N",
                EvenLatticeWarning,
                stacklevel=3,
            )

    @property
    def even_n(self) -> bool:
        return self.n_sites % 2 == 0

    def with_(self, **changes) -> "WalkConfig":
        """Copy with fields replaced; derived defaults are recomputed."""
        if "n_sites" in changes and "epsilon" not in changes:
            changes["epsilon"] = None
        if "total_steps" in changes and "transient_steps" not in changes:
            changes["transient_steps"] = None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EvenLatticeWarning)
            return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "theta": self.theta,
            "theta_pi": self.theta / math.pi,
            "chi": self.chi,
            "epsilon": self.epsilon,
            "seed": int(self.seed),
            "total_steps": self.total_steps,
            "transient_steps": self.transient_steps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WalkConfig":
        keys = ("n_sites", "theta", "chi", "epsilon", "seed", "total_steps", "transient_steps")
        return cls(**{k: d[k] for k in keys})


@dataclass
class WalkerState:
    amps_right: np.ndarray
    amps_left: np.ndarray
    time_step: int = 0
    n_sites: int = field(init=False)

    def __post_init__(self):
        self.amps_right = np.asarray(self.amps_right, dtype=np.complex128)
        self.amps_left = np.asarray(self.amps_left, dtype=np.complex128)
        if self.amps_right.ndim != 1 or self.amps_right.shape != self.amps_left.shape:
            raise ValueError("amplitude arrays must be 1-D with identical length")
        if self.amps_right.size < 2:
            raise ValueError("a walker needs at least 2 sites")
        self.n_sites = self.amps_right.size

    @classmethod
    def from_vector(cls, psi, time_step: int = 0) -> "WalkerState":
        """Build from the interleaved vector (a_1, b_1, a_2, b_2, ...)."""
        psi = np.asarray(psi, dtype=np.complex128)
        return cls(psi[0::2].copy(), psi[1::2].copy(), time_step)

    def to_vector(self) -> np.ndarray:
        psi = np.empty(2 * self.n_sites, dtype=np.complex128)
        psi[0::2] = self.amps_right
        psi[1::2] = self.amps_left
        return psi

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amps_right) ** 2 + np.abs(self.amps_left) ** 2))

    def copy(self) -> "WalkerState":
        return WalkerState(self.amps_right.copy(), self.amps_left.copy(), self.time_step)


def prepare_initial_state(config: WalkConfig) -> WalkerState:
    """Uniform maximally coherent state with bounded per-site noise.

    a_n = r_n and b_n = i*s_n with r, s drawn uniformly from
    [m - eps, m + eps], m = 1/sqrt(2N), then the whole vector is rescaled to
    unit norm.  Draws come from a Philox-4x64 generator keyed by
    ``config.seed``: first the N values r_1..r_N, then s_1..s_N, each as
    ``(next_uint64 >> 11) * 2**-53``.
    """
    n = config.n_sites
    mean = 1.0 / math.sqrt(2 * n)
    eps = config.epsilon
    if eps >= mean:
        raise ValueError(f"epsilon={eps} must be smaller than 1/sqrt(2N)={mean}")
    if eps == 0.0:
        a = np.full(n, mean, dtype=np.complex128)
        return WalkerState(a, 1j * a.real, 0)

    rng = np.random.Generator(np.random.Philox(int(config.seed)))
    r = (mean - eps) + 2 * eps * rng.random(n)
    s = (mean - eps) + 2 * eps * rng.random(n)
    scale = 1.0 / math.sqrt(float(np.sum(r * r) + np.sum(s * s)))
    return WalkerState((r * scale).astype(np.complex128), 1j * (s * scale), 0)


def apply_nonlinear_phase(state: WalkerState, chi: float) -> WalkerState:
    a, b = state.amps_right, state.amps_left
    k = 2 * math.pi * chi
    ia = a.real**2 + a.imag**2
    ib = b.real**2 + b.imag**2
    return WalkerState(a * np.exp(1j * k * ia), b * np.exp(1j * k * ib), state.time_step)


def coin_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def apply_coin(state: WalkerState, theta: float) -> WalkerState:
    c, s = math.cos(theta), math.sin(theta)
    a, b = state.amps_right, state.amps_left
    return WalkerState(c * a - s * b, s * a + c * b, state.time_step)


def apply_shift(state: WalkerState) -> WalkerState:
    # right movers n -> n+1, left movers n -> n-1, both mod N
    return WalkerState(
        np.roll(state.amps_right, 1), np.roll(state.amps_left, -1), state.time_step
    )


def step(state: WalkerState, config: WalkConfig) -> WalkerState:
    out = apply_shift(apply_coin(apply_nonlinear_phase(state, config.chi), config.theta))
    out.time_step = state.time_step + 1
    drift = abs(out.norm() - state.norm())
    if drift > STEP_NORM_TOL:
        raise NormDriftError(f"norm changed by {drift:.3e} in one step")
    return out


def rotate_sites(state: WalkerState, k: int) -> WalkerState:
    """Relabel sites n -> n + k (mod N) for both chiralities."""
    return WalkerState(
        np.roll(state.amps_right, k), np.roll(state.amps_left, k), state.time_step
    )


# drift of the unit norm tolerated over a whole trajectory
RUN_NORM_TOL = 1e-9


@dataclass
class Recorder:
    """What ``evolve`` records besides coherence and participation ratio.

    ``density_stride`` of 0 disables density snapshots.  Each callable in
    ``hooks`` is called as ``hook(state)`` at every t, which forces the
    step-by-step numpy path instead of the compiled loop.
    """

    density_stride: int = 10
    hooks: tuple = ()
    keep_final_state: bool = True


def evolve(config: WalkConfig, recorder: Recorder | None = None,
           initial_state: WalkerState | None = None,
           stop_below: float | None = None):
    """Run ``config.total_steps`` steps from the seeded initial state.

    ``initial_state`` overrides the seeded preparation.  With ``stop_below``
    set, the run ends at the first t whose coherence is below that value and
    the record is truncated there.
    """
    from ._kernel import STATUS_NORM_DRIFT, run_kernel
    from .observables import TrajectoryRecord, l1_coherence, participation_ratio, site_density

    recorder = recorder if recorder is not None else Recorder()
    state = prepare_initial_state(config) if initial_state is None else initial_state.copy()
    if state.n_sites != config.n_sites:
        raise ValueError("initial state size does not match config.n_sites")
    n_steps = config.total_steps
    stride = int(recorder.density_stride)
    stop = -np.inf if stop_below is None else float(stop_below)

    if recorder.hooks:
        coherence, participation, snapshots = [], [], {}
        max_dev = 0.0
        t0 = state.time_step
        for t in range(n_steps + 1):
            for hook in recorder.hooks:
                hook(state)
            dens = site_density(state)
            dev = abs(float(dens.sum()) - 1.0)
            max_dev = max(max_dev, dev)
            if dev > RUN_NORM_TOL:
                raise NormDriftError(f"norm deviation {dev:.3e} at t={t}")
            coherence.append(l1_coherence(state))
            participation.append(participation_ratio(dens))
            if stride > 0 and t % stride == 0:
                snapshots[t] = dens
            if coherence[-1] < stop or t == n_steps:
                break
            state = step(state, config)
        state.time_step = t0 + len(coherence) - 1
        return TrajectoryRecord(
            config, np.array(coherence), np.array(participation), snapshots, max_dev,
            state if recorder.keep_final_state else None,
        )

    a = state.amps_right.copy()
    b = state.amps_left.copy()
    coherence = np.empty(n_steps + 1)
    participation = np.empty(n_steps + 1)
    n_rows = n_steps // stride + 1 if stride > 0 else 0
    density = np.empty((n_rows, config.n_sites))
    done, status, max_dev = run_kernel(
        a, b, float(config.theta), float(config.chi), n_steps, coherence, participation,
        density, stride, stop, RUN_NORM_TOL,
    )
    if status == STATUS_NORM_DRIFT:
        raise NormDriftError(f"norm deviation {max_dev:.3e} at t={done}")
    snapshots = {}
    if stride > 0:
        for row in range(done // stride + 1):
            snapshots[row * stride] = density[row].copy()
    final = WalkerState(a, b, state.time_step + done) if recorder.keep_final_state else None
    return TrajectoryRecord(
        config, coherence[: done + 1], participation[: done + 1], snapshots,
        float(max_dev), final,
    )
