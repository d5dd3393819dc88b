"""Regime classification, critical nonlinearity, scaling fits and phase diagrams."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .observables import TrajectoryRecord, coherence_minimum, long_time_average
from .walk import Recorder, WalkConfig, evolve

__all__ = [
    "ClassifierThresholds",
    "CriticalChi",
    "PhaseDiagramGrid",
    "RegimeDiagnostics",
    "RegimeKind",
    "RegimeLabel",
    "ScalingFit",
    "ScanSpec",
    "ThresholdCurve",
    "UnstableBaselineError",
    "cell_seed",
    "classify",
    "coherence_min_curve",
    "default_scan_steps",
    "diagnose",
    "find_critical_chi",
    "fit_scaling",
    "largest_jump",
    "label_from_diagnostics",
    "peak_power_fraction",
    "phase_diagram",
    "threshold_curve",
]


class RegimeKind(str, enum.Enum):
    STATIONARY = "Stationary"
    BREATHING = "Breathing"
    CHAOTICLIKE = "Chaoticlike"
    SELF_FOCUSING = "SelfFocusing"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ClassifierThresholds:
    pr_frac: float = 0.25
    stat_frac: float = 0.9
    min_frac: float = 0.75
    osc_frac: float = 0.25

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RegimeDiagnostics:
    """Post-transient quantities the classifier decides on.

    Coherence values are divided by their maximum 2N-1 and the participation
    ratio by N.
    """

    mean_coherence_frac: float
    min_coherence_frac: float
    peak_power_fraction: float
    mean_pr_frac: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def mean_of(cls, items) -> "RegimeDiagnostics":
        items = list(items)
        return cls(*(float(np.mean([getattr(d, f.name) for d in items])) for f in fields(cls)))


@dataclass(frozen=True)
class RegimeLabel:
    kind: RegimeKind
    diagnostics: RegimeDiagnostics
    thresholds: ClassifierThresholds

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "diagnostics": self.diagnostics.to_dict(),
            "thresholds": self.thresholds.to_dict(),
        }


def peak_power_fraction(series) -> float:
    """Share of the AC power carried by the strongest nonzero-frequency bin.

    The mean is removed first; a constant series has no AC power and gives 0.
    """
    x = np.asarray(series, dtype=float)
    x = x - x.mean()
    power = np.abs(np.fft.rfft(x)[1:]) ** 2
    total = power.sum()
    if power.size == 0 or total <= 0.0:
        return 0.0
    return float(power.max() / total)


def diagnose(record: TrajectoryRecord, transient: int | None = None) -> RegimeDiagnostics:
    transient = record.transient if transient is None else transient
    n = record.config.n_sites
    if len(record.coherence) < 2 * transient or len(record.coherence) - transient < 4:
        raise ValueError(
            f"record too short for classification: {len(record.coherence)} samples, "
            f"transient {transient}"
        )
    c_max = 2 * n - 1
    window = record.coherence[transient:]
    return RegimeDiagnostics(
        mean_coherence_frac=long_time_average(window) / c_max,
        min_coherence_frac=coherence_minimum(window) / c_max,
        peak_power_fraction=peak_power_fraction(window),
        mean_pr_frac=long_time_average(record.participation, transient) / n,
    )


def label_from_diagnostics(d: RegimeDiagnostics,
                           thresholds: ClassifierThresholds = ClassifierThresholds()) -> RegimeKind:
    if d.mean_pr_frac < thresholds.pr_frac:
        return RegimeKind.SELF_FOCUSING
    if d.mean_coherence_frac >= thresholds.stat_frac and d.min_coherence_frac >= thresholds.min_frac:
        return RegimeKind.STATIONARY
    if d.peak_power_fraction >= thresholds.osc_frac:
        return RegimeKind.BREATHING
    return RegimeKind.CHAOTICLIKE


def classify(record: TrajectoryRecord,
             thresholds: ClassifierThresholds = ClassifierThresholds(),
             transient: int | None = None) -> RegimeLabel:
    """Label a trajectory as stationary, breathing, chaoticlike or self-focusing.

    Checked in order: mean participation ratio below ``pr_frac*N`` means
    self-focusing; mean and minimum coherence at or above ``stat_frac`` and
    ``min_frac`` of 2N-1 mean stationary; a dominant spectral line holding at
    least ``osc_frac`` of the AC power of the coherence means breathing;
    anything else is chaoticlike.  Only the post-transient part is used.
    """
    d = diagnose(record, transient)
    return RegimeLabel(label_from_diagnostics(d, thresholds), d, thresholds)


# ---------------------------------------------------------------- thresholds

class UnstableBaselineError(RuntimeError):
    """The linear (chi = 0) reference run already lost its coherence."""


def default_scan_steps(n_sites: int) -> int:
    # near threshold the instability grows on a ~N**2 time scale
    return max(10_000, 16 * n_sites * n_sites)


@dataclass(frozen=True)
class ScanSpec:
    """Coarse chi grid ``linspace(0, chi_max, n_coarse)`` plus bisection.

    ``steps=None`` picks :func:`default_scan_steps` for the lattice size.
    """

    chi_max: float = 0.3
    n_coarse: int = 61
    resolution: float = 1e-4
    drop_frac: float = 0.1
    steps: int | None = None

    def __post_init__(self):
        if self.chi_max <= 0 or self.n_coarse < 2:
            raise ValueError("scan needs chi_max > 0 and at least 2 grid points")
        if self.resolution <= 0 or not 0 < self.drop_frac < 1:
            raise ValueError("resolution must be positive and drop_frac in (0, 1)")

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.chi_max, self.n_coarse)

    def steps_for(self, n_sites: int) -> int:
        return default_scan_steps(n_sites) if self.steps is None else int(self.steps)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CriticalChi:
    theta: float
    n_sites: int
    chi_sd: float | None
    baseline_min: float
    trip_level: float
    steps: int
    seed: int
    bracket: tuple[float, float] | None = None
    evaluations: list[tuple[float, float]] = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.chi_sd is not None

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "theta_pi": self.theta / math.pi,
            "n_sites": self.n_sites,
            "chi_sd": self.chi_sd,
            "found": self.found,
            "status": "ok" if self.found else "no threshold in range",
            "baseline_min": self.baseline_min,
            "trip_level": self.trip_level,
            "steps": self.steps,
            "seed": self.seed,
            "bracket": list(self.bracket) if self.bracket else None,
            "evaluations": [list(e) for e in self.evaluations],
        }


def _run_min(theta, n_sites, chi, steps, seed, epsilon, stop_below=None) -> float:
    cfg = WalkConfig(n_sites, theta, chi, epsilon, seed, steps, 0)
    rec = evolve(cfg, Recorder(density_stride=0, keep_final_state=False), stop_below=stop_below)
    return float(rec.coherence.min())


def find_critical_chi(theta: float, n_sites: int, scan: ScanSpec = ScanSpec(),
                      seed: int = 0, epsilon: float | None = None) -> CriticalChi:
    """Smallest chi at which the run-wide coherence minimum collapses.

    A run "trips" when its minimum coherence over all steps falls below
    ``(1 - drop_frac)`` times the chi = 0 minimum.  The coarse grid is walked
    upwards until the first trip, then the bracket is bisected down to
    ``scan.resolution``; the upper end of the final bracket is returned.
    Every run of one scan uses the same noise realization.
    """
    steps = scan.steps_for(n_sites)
    baseline = _run_min(theta, n_sites, 0.0, steps, seed, epsilon)
    c_max = 2 * n_sites - 1
    if baseline < (1.0 - scan.drop_frac) * c_max:
        raise UnstableBaselineError(
            f"linear run lost coherence (min {baseline:.6g} of {c_max}); check N, epsilon, theta"
        )
    level = (1.0 - scan.drop_frac) * baseline
    result = CriticalChi(theta, n_sites, None, baseline, level, steps, seed)

    def trips(chi):
        m = _run_min(theta, n_sites, chi, steps, seed, epsilon, stop_below=level)
        result.evaluations.append((float(chi), m))
        return m < level

    lo = 0.0
    for chi in scan.grid()[1:]:
        if trips(chi):
            hi = float(chi)
            while hi - lo > scan.resolution:
                mid = 0.5 * (lo + hi)
                if trips(mid):
                    hi = mid
                else:
                    lo = mid
            result.chi_sd = hi
            result.bracket = (lo, hi)
            return result
        lo = float(chi)
    return result


def _pmap(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def coherence_min_curve(theta: float, n_sites: int, chis, steps: int | None = None,
                        seed: int = 0, epsilon: float | None = None,
                        threads: int = 1) -> np.ndarray:
    """Minimum coherence over full runs at each chi (no early stopping)."""
    steps = default_scan_steps(n_sites) if steps is None else steps
    return np.array(
        _pmap(lambda x: _run_min(theta, n_sites, float(x), steps, seed, epsilon), chis, threads)
    )


def largest_jump(chis, values) -> dict:
    """Locate the largest adjacent drop of ``values`` along ``chis``.

    Returns the jump, its position and its ratio to the median adjacent
    difference (absolute values).
    """
    v = np.asarray(values, dtype=float)
    diffs = np.abs(np.diff(v))
    k = int(np.argmax(diffs))
    median = float(np.median(diffs))
    return {
        "index": k,
        "chi_before": float(chis[k]),
        "chi_after": float(chis[k + 1]),
        "jump": float(diffs[k]),
        "median_diff": median,
        "ratio": float(diffs[k] / median) if median > 0 else math.inf,
    }


@dataclass
class ThresholdCurve:
    theta_grid: np.ndarray
    chi_sd: np.ndarray
    n_sites: int
    status: list[str]
    errors: dict[int, str] = field(default_factory=dict)
    points: list[CriticalChi | None] = field(default_factory=list)

    def violations(self, tol: float = 0.05) -> list[int]:
        """Indices k with chi_sd[k+1] > chi_sd[k]*(1+tol), over detected points."""
        bad = []
        for k in range(len(self.chi_sd) - 1):
            a, b = self.chi_sd[k], self.chi_sd[k + 1]
            if np.isfinite(a) and np.isfinite(b) and b > a * (1 + tol):
                bad.append(k)
        return bad

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "theta": [float(t) for t in self.theta_grid],
            "theta_pi": [float(t / math.pi) for t in self.theta_grid],
            "chi_sd": [float(c) if np.isfinite(c) else None for c in self.chi_sd],
            "status": list(self.status),
            "errors": {str(k): v for k, v in self.errors.items()},
        }


def threshold_curve(theta_grid, n_sites: int, scan: ScanSpec = ScanSpec(),
                    seed: int = 0, epsilon: float | None = None,
                    threads: int = 1) -> ThresholdCurve:
    """chi_sd for each coin angle; failed or undetected points are NaN with a status."""
    theta_grid = np.asarray(theta_grid, dtype=float)

    def one(theta):
        try:
            return find_critical_chi(float(theta), n_sites, scan, seed, epsilon), None
        except Exception as exc:  # recorded per point
            return None, f"{type(exc).__name__}: {exc}"

    out = _pmap(one, theta_grid, threads)
    chi_sd = np.full(len(theta_grid), np.nan)
    status, errors, points = [], {}, []
    for k, (res, err) in enumerate(out):
        points.append(res)
        if err is not None:
            status.append("failed")
            errors[k] = err
        elif res.found:
            status.append("ok")
            chi_sd[k] = res.chi_sd
        else:
            status.append("no threshold in range")
    return ThresholdCurve(theta_grid, chi_sd, n_sites, status, errors, points)


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    prefactor: float
    residual: float

    def to_dict(self) -> dict:
        return asdict(self)


def fit_scaling(sizes, chi_sd) -> ScalingFit:
    """Least-squares line through (log N, log chi_sd).

    ``residual`` is the RMS deviation of log chi_sd from the fitted line.
    """
    n = np.asarray(sizes, dtype=float)
    c = np.array([np.nan if v is None else v for v in chi_sd], dtype=float)
    if n.size < 4 or n.size != c.size:
        raise ValueError("need at least 4 (size, threshold) pairs")
    if not np.all(np.isfinite(c)) or np.any(c <= 0):
        raise ValueError("every threshold must be detected (finite and positive)")
    x, y = np.log(n), np.log(c)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return ScalingFit(float(slope), float(math.exp(intercept)), float(np.sqrt(np.mean(resid**2))))


# ------------------------------------------------------------- phase diagram

def cell_seed(seed: int, *indices: int) -> int:
    """Per-cell seed: first 64-bit word of ``SeedSequence([seed, *indices])``."""
    ss = np.random.SeedSequence([int(seed), *map(int, indices)])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class PhaseDiagramGrid:
    chi_axis: np.ndarray
    theta_axis: np.ndarray
    mean_coherence: np.ndarray
    labels: np.ndarray
    seeds: np.ndarray
    diagnostics: np.ndarray
    config: WalkConfig
    thresholds: ClassifierThresholds
    errors: dict[tuple[int, int], str] = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.chi_axis), len(self.theta_axis)

    def label_names(self) -> list[list[str | None]]:
        return [[None if k is None else k.value for k in row] for row in self.labels]


def phase_diagram(chi_axis, theta_axis, template: WalkConfig,
                  thresholds: ClassifierThresholds = ClassifierThresholds(),
                  threads: int = 1, n_seeds: int = 1) -> PhaseDiagramGrid:
    """Evolve, classify and average every (chi, theta) cell.

    Cell (i, j) realization k uses ``cell_seed(template.seed, i, j, k)``.
    With ``n_seeds > 1`` diagnostics and mean coherence are averaged over the
    realizations before labelling.  A failing cell is recorded in ``errors``
    and left as NaN / None.
    """
    chi_axis = np.asarray(chi_axis, dtype=float)
    theta_axis = np.asarray(theta_axis, dtype=float)
    if chi_axis.size == 0 or theta_axis.size == 0:
        raise ValueError("phase diagram axes must be non-empty")
    shape = (chi_axis.size, theta_axis.size)
    seeds = np.zeros(shape + (n_seeds,), dtype=np.uint64)
    for i in range(shape[0]):
        for j in range(shape[1]):
            for k in range(n_seeds):
                seeds[i, j, k] = cell_seed(template.seed, i, j, k)

    recorder = Recorder(density_stride=0, keep_final_state=False)

    def cell(ij):
        i, j = ij
        try:
            diags, means = [], []
            for k in range(n_seeds):
                cfg = template.with_(chi=float(chi_axis[i]), theta=float(theta_axis[j]),
                                     seed=int(seeds[i, j, k]))
                rec = evolve(cfg, recorder)
                diags.append(diagnose(rec))
                means.append(long_time_average(rec.coherence, cfg.transient_steps))
            d = diags[0] if n_seeds == 1 else RegimeDiagnostics.mean_of(diags)
            return float(np.mean(means)), label_from_diagnostics(d, thresholds), d, None
        except Exception as exc:  # recorded per cell
            return math.nan, None, None, f"{type(exc).__name__}: {exc}"

    cells = [(i, j) for i in range(shape[0]) for j in range(shape[1])]
    results = _pmap(cell, cells, threads)

    mean = np.full(shape, np.nan)
    labels = np.empty(shape, dtype=object)
    diagnostics = np.empty(shape, dtype=object)
    errors = {}
    for (i, j), (m, lab, d, err) in zip(cells, results):
        mean[i, j], labels[i, j], diagnostics[i, j] = m, lab, d
        if err is not None:
            errors[(i, j)] = err
    return PhaseDiagramGrid(chi_axis, theta_axis, mean, labels, seeds, diagnostics,
                            template, thresholds, errors)
