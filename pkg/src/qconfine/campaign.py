"""Monte-Carlo campaigns: validation, distance studies, convergence and efficiency.

Each trial draws from its own seed derived from the campaign seed and the
trial key, so results do not depend on how trials are spread over workers.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from typing import (
    Any,
    Callable,
    Dict,
    Iterable,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    TypeVar,
)

import numpy as np

from .core import (
    HermitianOperator,
    QConfineError,
    analytic_peaks,
    exact_leakage,
    optional_bounds,
)
from .decoherence import DecoherenceConfig, evolve_bloch, max_resolution
from .estimate import analyse_trace, significance_confinement
from .simulate import (
    DEFAULT_COUPLING_RANGE,
    SamplingPlan,
    derive_seed,
    family,
    ideal_trace,
    random_leaky_hamiltonian,
    resample,
    sample_trace,
)
from .spectral import DEFAULT_GUARD, DEFAULT_MIN_PERIODS, third_peak_test

logger = logging.getLogger(__name__)

J = TypeVar("J")
R = TypeVar("R")

METHOD_CONFINEMENT = "confinement"
METHOD_THIRD_PEAK = "third_peak"
METHODS = (METHOD_CONFINEMENT, METHOD_THIRD_PEAK)


class CampaignError(QConfineError):
    """Raised when a trial fails; ``partial`` holds the results collected so far."""

    def __init__(self, message: str, partial: Optional[List[Any]] = None) -> None:
        super().__init__(message)
        self.partial = partial or []


def run_parallel(
    fn: Callable[[J], R],
    jobs: Sequence[J],
    workers: int = 1,
    on_result: Optional[Callable[[R], None]] = None,
) -> List[R]:
    """Run ``fn`` over ``jobs``, in-process or on a process pool.

    Results arrive in completion order; ``on_result`` sees each as it lands.

    Raises:
        CampaignError: On the first failing job, carrying the finished results
    """
    results: List[R] = []

    def collect(result: R) -> None:
        results.append(result)
        if on_result is not None:
            on_result(result)

    if workers <= 1:
        for job in jobs:
            try:
                result = fn(job)
            except Exception as e:
                raise CampaignError(f"Trial failed: {e}", partial=results) from e
            collect(result)
        return results

    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, job) for job in jobs]
        try:
            for future in as_completed(futures):
                collect(future.result())
        except Exception as e:
            for future in futures:
                future.cancel()
            raise CampaignError(f"Worker failed: {e}", partial=results) from e
    return results


@dataclass(frozen=True)
class TrialSettings:
    """Sampling and analysis settings shared by every trial of a campaign."""

    cycles: float = 30.0
    samples_per_period: int = 20
    guard: int = DEFAULT_GUARD
    min_periods: float = DEFAULT_MIN_PERIODS
    coupling_range: Tuple[float, float] = DEFAULT_COUPLING_RANGE


# Validation, distance and convergence trials

RECORD_FIELDS = (
    "trial",
    "seed",
    "dim",
    "ensemble_size",
    "eps_exact",
    "eps_analytic",
    "eps_low",
    "eps_high",
    "d_eps_low",
    "d_eps_high",
    "distance",
    "success",
    "flags",
)


def _opt_float(value: Any) -> Optional[float]:
    if value is None or value == "":
        return None
    return float(value)


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one simulated experiment against the analytic upper bound."""

    trial: int
    seed: int
    dim: int
    ensemble_size: int
    eps_exact: float
    eps_analytic: Optional[float]
    eps_low: float
    eps_high: Optional[float]
    d_eps_low: float
    d_eps_high: Optional[float]
    distance: Optional[float]
    flags: Tuple[str, ...] = ()

    @property
    def success(self) -> bool:
        """d - 3 delta_d <= 0."""
        if self.distance is None or self.d_eps_high is None:
            return False
        return self.distance - 3.0 * self.d_eps_high <= 0.0

    def to_row(self) -> Dict[str, Any]:
        row = asdict(self)
        row["success"] = int(self.success)
        row["flags"] = list(self.flags)
        return row

    @classmethod
    def from_row(cls, row: Mapping[str, str]) -> "TrialRecord":
        flags = row.get("flags") or ""
        return cls(
            trial=int(row["trial"]),
            seed=int(row["seed"]),
            dim=int(row["dim"]),
            ensemble_size=int(row["ensemble_size"]),
            eps_exact=float(row["eps_exact"]),
            eps_analytic=_opt_float(row.get("eps_analytic")),
            eps_low=float(row["eps_low"]),
            eps_high=_opt_float(row.get("eps_high")),
            d_eps_low=float(row["d_eps_low"]),
            d_eps_high=_opt_float(row.get("d_eps_high")),
            distance=_opt_float(row.get("distance")),
            flags=tuple(flag for flag in flags.split(";") if flag),
        )


class TrialJob(NamedTuple):
    trial: int
    seed: int
    ensemble_size: int
    settings: TrialSettings
    hamiltonian: Optional[HermitianOperator]


def run_trial(job: TrialJob) -> TrialRecord:
    """Simulate, estimate and compare one trial.

    A missing Hamiltonian means a fresh random leaky one is drawn from the
    trial seed. ``ensemble_size`` 0 gives a noiseless trace.
    """
    settings = job.settings
    hamiltonian = job.hamiltonian
    if hamiltonian is None:
        hamiltonian = random_leaky_hamiltonian(
            derive_seed(job.seed, 0), settings.coupling_range
        )
    _, eps_analytic = optional_bounds(analytic_peaks(hamiltonian))
    plan = SamplingPlan.for_hamiltonian(
        hamiltonian,
        cycles=settings.cycles,
        samples_per_period=settings.samples_per_period,
        ensemble_size=job.ensemble_size,
        seed=derive_seed(job.seed, 1),
    )
    trace = sample_trace(hamiltonian, plan)
    _, _, est = analyse_trace(trace, settings.guard, settings.min_periods)

    flags = list(est.flags)
    distance: Optional[float] = None
    if est.eps_high is None or eps_analytic is None:
        flags.append("distance_undefined")
    else:
        distance = abs(est.eps_high - eps_analytic)
    return TrialRecord(
        trial=job.trial,
        seed=job.seed,
        dim=hamiltonian.dim,
        ensemble_size=job.ensemble_size,
        eps_exact=exact_leakage(hamiltonian),
        eps_analytic=eps_analytic,
        eps_low=est.eps_low,
        eps_high=est.eps_high,
        d_eps_low=est.d_eps_low,
        d_eps_high=est.d_eps_high,
        distance=distance,
        flags=tuple(flags),
    )


@dataclass
class ValidationStats:
    """Distances d = |eps_high - eps_high'| and their uncertainties."""

    records: List[TrialRecord]

    @property
    def distances(self) -> np.ndarray:
        return np.array(
            [math.nan if r.distance is None else r.distance for r in self.records]
        )

    @property
    def errors(self) -> np.ndarray:
        return np.array(
            [math.nan if r.d_eps_high is None else r.d_eps_high for r in self.records]
        )

    @property
    def ratio(self) -> float:
        """Fraction of trials with d - 3 delta_d <= 0."""
        if not self.records:
            return 0.0
        return sum(r.success for r in self.records) / len(self.records)

    @property
    def mean_error(self) -> float:
        errors = self.errors
        finite = errors[np.isfinite(errors)]
        return float(np.mean(finite)) if finite.size else math.nan

    @property
    def coverage_radius(self) -> float:
        """3 * mean(delta_d)."""
        return 3.0 * self.mean_error

    @property
    def coverage(self) -> float:
        """Fraction of distances within ``coverage_radius``."""
        if not self.records:
            return 0.0
        distances = self.distances
        inside = np.isfinite(distances) & (distances <= self.coverage_radius)
        return float(np.count_nonzero(inside)) / len(self.records)

    def histogram(self, bins: int = 30) -> Tuple[np.ndarray, np.ndarray]:
        distances = self.distances
        finite = distances[np.isfinite(distances)]
        if finite.size == 0:
            return np.zeros(bins, dtype=int), np.linspace(0.0, 1.0, bins + 1)
        upper = max(float(np.max(finite)), self.coverage_radius, 1e-12)
        return np.histogram(finite, bins=bins, range=(0.0, upper))

    def summary(self, bins: int = 30) -> Dict[str, Any]:
        counts, edges = self.histogram(bins)
        distances = self.distances
        finite = distances[np.isfinite(distances)]
        return {
            "trials": len(self.records),
            "ratio": self.ratio,
            "mean_d_eps_high": self.mean_error,
            "coverage_radius": self.coverage_radius,
            "coverage": self.coverage,
            "mean_distance": float(np.mean(finite)) if finite.size else None,
            "undefined": int(np.count_nonzero(~np.isfinite(distances))),
            "histogram": {
                "counts": [int(c) for c in counts],
                "edges": [float(e) for e in edges],
            },
        }


def _run_trials(
    jobs: List[TrialJob],
    completed: Sequence[TrialRecord],
    workers: int,
    on_record: Optional[Callable[[TrialRecord], None]],
) -> List[TrialRecord]:
    done = {record.trial for record in completed}
    pending = [job for job in jobs if job.trial not in done]
    if done:
        logger.info("Resuming: %d trials done, %d to go", len(done), len(pending))
    try:
        fresh = run_parallel(run_trial, pending, workers, on_record)
    except CampaignError as e:
        e.partial = sorted(list(completed) + e.partial, key=lambda r: r.trial)
        raise
    return sorted(list(completed) + fresh, key=lambda r: r.trial)


def validation_campaign(
    n_trials: int,
    ensemble_size: int,
    settings: TrialSettings = TrialSettings(),
    seed: int = 0,
    workers: int = 1,
    completed: Sequence[TrialRecord] = (),
    on_record: Optional[Callable[[TrialRecord], None]] = None,
    hamiltonian: Optional[HermitianOperator] = None,
) -> ValidationStats:
    """Estimate leakage for random leaky Hamiltonians and compare to the analytic bound.

    Passing ``hamiltonian`` repeats the experiment on one known system
    instead. Records in ``completed`` are kept and their trials skipped.
    """
    jobs = [
        TrialJob(index, derive_seed(seed, index), ensemble_size, settings, hamiltonian)
        for index in range(n_trials)
    ]
    return ValidationStats(_run_trials(jobs, completed, workers, on_record))


def distance_study(
    hamiltonian: HermitianOperator,
    n_trials: int,
    ensemble_size: int,
    settings: TrialSettings = TrialSettings(),
    seed: int = 0,
    workers: int = 1,
    completed: Sequence[TrialRecord] = (),
    on_record: Optional[Callable[[TrialRecord], None]] = None,
) -> ValidationStats:
    """Distance distribution of repeated experiments on one Hamiltonian."""
    return validation_campaign(
        n_trials,
        ensemble_size,
        settings,
        seed,
        workers,
        completed,
        on_record,
        hamiltonian=hamiltonian,
    )


@dataclass(frozen=True)
class ConvergencePoint:
    ensemble_size: int
    trials: int
    median_eps_high: Optional[float]
    q25_eps_high: Optional[float]
    q75_eps_high: Optional[float]
    mean_d_eps_high: Optional[float]
    median_distance: Optional[float]

    @property
    def spread(self) -> Optional[float]:
        if self.q25_eps_high is None or self.q75_eps_high is None:
            return None
        return self.q75_eps_high - self.q25_eps_high


def summarize_convergence(records: Iterable[TrialRecord]) -> List[ConvergencePoint]:
    grouped: Dict[int, List[TrialRecord]] = {}
    for record in records:
        grouped.setdefault(record.ensemble_size, []).append(record)

    def stat(values: List[float], fn: Callable[[np.ndarray], Any]) -> Optional[float]:
        return float(fn(np.array(values))) if values else None

    points = []
    for ensemble_size in sorted(grouped):
        group = grouped[ensemble_size]
        eps = [r.eps_high for r in group if r.eps_high is not None]
        errors = [r.d_eps_high for r in group if r.d_eps_high is not None]
        distances = [r.distance for r in group if r.distance is not None]
        points.append(
            ConvergencePoint(
                ensemble_size=ensemble_size,
                trials=len(group),
                median_eps_high=stat(eps, np.median),
                q25_eps_high=stat(eps, lambda a: np.percentile(a, 25)),
                q75_eps_high=stat(eps, lambda a: np.percentile(a, 75)),
                mean_d_eps_high=stat(errors, np.mean),
                median_distance=stat(distances, np.median),
            )
        )
    return points


def convergence_sweep(
    hamiltonian: HermitianOperator,
    ensemble_sizes: Sequence[int],
    n_seeds: int,
    settings: TrialSettings = TrialSettings(),
    seed: int = 0,
    workers: int = 1,
    completed: Sequence[TrialRecord] = (),
    on_record: Optional[Callable[[TrialRecord], None]] = None,
) -> Tuple[List[ConvergencePoint], List[TrialRecord]]:
    """eps_high statistics of one Hamiltonian across ensemble sizes.

    Trial ``i * n_seeds + s`` is seed ``s`` at ``ensemble_sizes[i]``.
    """
    jobs = []
    for i, ensemble_size in enumerate(ensemble_sizes):
        for s in range(n_seeds):
            index = i * n_seeds + s
            jobs.append(
                TrialJob(
                    index,
                    derive_seed(seed, ensemble_size, s),
                    ensemble_size,
                    settings,
                    hamiltonian,
                )
            )
    records = _run_trials(jobs, completed, workers, on_record)
    return summarize_convergence(records), records


# Efficiency curves


@dataclass(frozen=True)
class EfficiencySettings:
    """Ensemble-size search grid and per-point majority vote."""

    ne_min: int = 16
    ne_max: int = 2**20
    n_seeds: int = 11
    cycles: float = 30.0
    samples_per_period: int = 20
    guard: int = DEFAULT_GUARD
    min_periods: float = DEFAULT_MIN_PERIODS

    def __post_init__(self) -> None:
        if self.ne_min < 1 or self.ne_max < self.ne_min:
            raise ValueError("Need 1 <= ne_min <= ne_max")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be at least 1")

    def grid(self) -> List[int]:
        """Doubling grid from ne_min up to ne_max."""
        values = []
        ne = self.ne_min
        while ne <= self.ne_max:
            values.append(ne)
            ne *= 2
        return values


EFFICIENCY_FIELDS = (
    "index",
    "gamma",
    "eps_analytic",
    "ne_confinement",
    "ne_third_peak",
    "flags",
)


@dataclass(frozen=True)
class EfficiencyPoint:
    """Smallest grid ensemble size at which each criterion holds for most seeds.

    None marks a criterion not met anywhere on the grid (flagged).
    """

    gamma: float
    eps_analytic: float
    ne_confinement: Optional[int]
    ne_third_peak: Optional[int]
    index: int = 0
    flags: Tuple[str, ...] = field(default=())

    def to_row(self) -> Dict[str, Any]:
        row = asdict(self)
        row["flags"] = list(self.flags)
        return row

    @classmethod
    def from_row(cls, row: Mapping[str, str]) -> "EfficiencyPoint":
        def opt_int(value: Optional[str]) -> Optional[int]:
            return int(value) if value else None

        return cls(
            gamma=float(row["gamma"]),
            eps_analytic=float(row["eps_analytic"]),
            ne_confinement=opt_int(row.get("ne_confinement")),
            ne_third_peak=opt_int(row.get("ne_third_peak")),
            index=int(row["index"]),
            flags=tuple(f for f in (row.get("flags") or "").split(";") if f),
        )


class EfficiencyJob(NamedTuple):
    index: int
    family_name: str
    gamma: float
    methods: Tuple[str, ...]
    settings: EfficiencySettings
    seed: int


def run_efficiency_point(job: EfficiencyJob) -> EfficiencyPoint:
    """Scan the ensemble-size grid for one coupling strength."""
    settings = job.settings
    hamiltonian = family(job.family_name, job.gamma)
    peaks = analytic_peaks(hamiltonian)
    eps_low_analytic, _ = optional_bounds(peaks)
    candidates = [t.omega for t in peaks.leakage_transitions()]
    plan = SamplingPlan.for_hamiltonian(
        hamiltonian,
        cycles=settings.cycles,
        samples_per_period=settings.samples_per_period,
        ensemble_size=0,
    )
    ideal = ideal_trace(hamiltonian, plan)

    required: Dict[str, Optional[int]] = {method: None for method in job.methods}
    for ensemble_size in settings.grid():
        pending = [m for m in job.methods if required[m] is None]
        if not pending:
            break
        votes = {method: 0 for method in pending}
        for s in range(settings.n_seeds):
            trace = resample(
                ideal, ensemble_size, derive_seed(job.seed, job.index, ensemble_size, s)
            )
            _, spectrum, est = analyse_trace(
                trace, settings.guard, settings.min_periods
            )
            if METHOD_CONFINEMENT in votes and significance_confinement(
                est, eps_low_analytic
            ):
                votes[METHOD_CONFINEMENT] += 1
            if METHOD_THIRD_PEAK in votes and third_peak_test(spectrum, candidates):
                votes[METHOD_THIRD_PEAK] += 1
        for method, count in votes.items():
            if 2 * count > settings.n_seeds:
                required[method] = ensemble_size
                logger.debug(
                    "%s(%g): %s holds at N_e=%d",
                    job.family_name,
                    job.gamma,
                    method,
                    ensemble_size,
                )

    flags = tuple(
        f"{method}_unreachable" for method in job.methods if required[method] is None
    )
    return EfficiencyPoint(
        gamma=job.gamma,
        eps_analytic=exact_leakage(hamiltonian),
        ne_confinement=required.get(METHOD_CONFINEMENT),
        ne_third_peak=required.get(METHOD_THIRD_PEAK),
        index=job.index,
        flags=flags,
    )


def efficiency_curve(
    family_name: str,
    gammas: Sequence[float],
    methods: Sequence[str] = METHODS,
    settings: EfficiencySettings = EfficiencySettings(),
    seed: int = 0,
    workers: int = 1,
    completed: Sequence[EfficiencyPoint] = (),
    on_point: Optional[Callable[[EfficiencyPoint], None]] = None,
) -> List[EfficiencyPoint]:
    """Ensemble sizes needed by each leakage criterion across a coupling grid.

    The confinement criterion compares the measured lower bound with the
    analytic one; the third-peak criterion looks for a peak at the known
    leakage transition frequencies.
    """
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"Unknown method(s) {unknown}. Must be in {list(METHODS)}")
    family(family_name, 0.0)
    done = {point.index for point in completed}
    jobs = [
        EfficiencyJob(index, family_name, float(gamma), tuple(methods), settings, seed)
        for index, gamma in enumerate(gammas)
        if index not in done
    ]
    try:
        fresh = run_parallel(run_efficiency_point, jobs, workers, on_point)
    except CampaignError as e:
        e.partial = sorted(list(completed) + e.partial, key=lambda p: p.index)
        raise
    return sorted(list(completed) + fresh, key=lambda p: p.index)


# Decoherence


DECOHERENCE_FIELDS = (
    "zeta",
    "delta_omega_bound",
    "t_ob_max",
    "t_ob",
    "num_samples",
    "eps_low",
    "eps_high",
    "d_eps_high",
    "within_target",
    "flags",
)


@dataclass(frozen=True)
class DecoherencePoint:
    zeta: float
    delta_omega_bound: float
    t_ob_max: float
    t_ob: float
    num_samples: int
    eps_low: float
    eps_high: Optional[float]
    d_eps_high: Optional[float]
    flags: Tuple[str, ...] = ()

    @property
    def within_target(self) -> bool:
        return self.eps_high is not None and self.eps_high <= self.zeta

    def to_row(self) -> Dict[str, Any]:
        row = asdict(self)
        row["within_target"] = int(self.within_target)
        row["flags"] = list(self.flags)
        return row


def decoherence_sweep(
    cfg: DecoherenceConfig,
    zetas: Sequence[float],
    resolution_factor: float = 10.0,
    samples_per_period: int = 20,
    guard: int = DEFAULT_GUARD,
    min_periods: float = DEFAULT_MIN_PERIODS,
) -> List[DecoherencePoint]:
    """Run the estimator on decohered traces sized by the resolution bound.

    For each target ``zeta`` the record length is the longest allowed
    observation time divided by ``resolution_factor``.
    """
    if resolution_factor < 1.0:
        raise ValueError("resolution_factor must be at least 1")
    gamma = max(cfg.gamma_alpha, cfg.gamma_beta)
    dt = cfg.rabi_period / samples_per_period
    points = []
    for zeta in zetas:
        bound = max_resolution(gamma, zeta)
        t_ob = bound.t_ob / resolution_factor
        num_samples = int(round(t_ob / dt))
        trace = evolve_bloch(cfg, np.arange(num_samples) * dt)
        _, _, est = analyse_trace(trace, guard, min_periods)
        points.append(
            DecoherencePoint(
                zeta=float(zeta),
                delta_omega_bound=bound.delta_omega,
                t_ob_max=bound.t_ob,
                t_ob=num_samples * dt,
                num_samples=num_samples,
                eps_low=est.eps_low,
                eps_high=est.eps_high,
                d_eps_high=est.d_eps_high,
                flags=est.flags,
            )
        )
        logger.info(
            "zeta=%g: eps_high=%s over %d samples", zeta, est.eps_high, num_samples
        )
    return points
