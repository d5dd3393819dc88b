"""Coherence and localization diagnostics along a trajectory."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .walk import WalkConfig, WalkerState

__all__ = [
    "TrajectoryRecord",
    "coherence_minimum",
    "l1_coherence",
    "long_time_average",
    "participation_ratio",
    "site_density",
]


@dataclass
class TrajectoryRecord:
    """Per-step observables of one run.

    ``coherence[t]`` and ``participation[t]`` for t = 0..T;
    ``density_snapshots`` maps selected t to the N site probabilities.
    """

    config: "WalkConfig"
    coherence: np.ndarray
    participation: np.ndarray
    density_snapshots: dict[int, np.ndarray] = field(default_factory=dict)
    max_norm_deviation: float = 0.0
    final_state: "WalkerState | None" = None

    @property
    def n_steps(self) -> int:
        return len(self.coherence) - 1

    @property
    def transient(self) -> int:
        return self.config.transient_steps

    def density_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Snapshots stacked as ``(times, densities[len(times), N])``."""
        times = np.array(sorted(self.density_snapshots), dtype=np.int64)
        if times.size == 0:
            return times, np.empty((0, self.config.n_sites))
        return times, np.vstack([self.density_snapshots[t] for t in times])


def l1_coherence(state: "WalkerState") -> float:
    """Sum of |rho_ij| over i != j for the pure state, in the site x chirality basis.

    For a unit vector this is ``(sum_i |psi_i|)**2 - 1``.
    """
    total = np.sum(np.abs(state.amps_right)) + np.sum(np.abs(state.amps_left))
    return float(total * total - 1.0)


def site_density(state: "WalkerState") -> np.ndarray:
    a, b = state.amps_right, state.amps_left
    return a.real**2 + a.imag**2 + b.real**2 + b.imag**2


def participation_ratio(density) -> float:
    p = np.asarray(density, dtype=float)
    total = p.sum()
    if abs(total - 1.0) > 1e-8:
        raise ValueError(f"density must sum to 1, got {total!r}")
    return float(1.0 / np.sum(p * p))


def _window(series, transient: int) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if transient < 0 or transient >= x.size:
        raise ValueError(
            f"empty averaging window: transient={transient}, length={x.size}"
        )
    return x[transient:]


def long_time_average(series, transient: int = 0) -> float:
    return float(np.mean(_window(series, transient)))


def coherence_minimum(series, transient: int = 0) -> float:
    return float(np.min(_window(series, transient)))
