"""qconfine command-line interface with Click.

Every command writes its data to files under ``--out-dir`` together with a
run manifest. Diagnostics and summary tables go to standard error.
"""

import logging
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, NoReturn, Optional, Sequence

import click
import numpy as np
from rich.console import Console
from rich.logging import RichHandler

from . import __version__
from .campaign import (
    DECOHERENCE_FIELDS,
    EFFICIENCY_FIELDS,
    METHODS,
    RECORD_FIELDS,
    CampaignError,
    EfficiencyPoint,
    EfficiencySettings,
    TrialRecord,
    TrialSettings,
    ValidationStats,
    convergence_sweep,
    decoherence_sweep,
    distance_study,
    efficiency_curve,
    summarize_convergence,
    validation_campaign,
)
from .config import SEED_ENV_VAR, Config, ConfigError, get_config
from .core import (
    HermitianOperator,
    NonHermitianInput,
    QConfineError,
    analytic_peaks,
    exact_leakage,
    optional_bounds,
)
from .decoherence import (
    DecoherenceConfig,
    RegimeViolation,
    SingularResolvent,
    analytic_spectrum,
    evolve_bloch,
    lorentzian_peaks,
    max_resolution,
    peak_area,
)
from .estimate import OutOfRangePeaks, analyse_trace
from .formats import (
    UNITS,
    HamiltonianFormatError,
    RunManifest,
    TraceFormatError,
    append_record_csv,
    compute_data_hash,
    load_hamiltonian,
    load_manifest,
    read_json,
    read_records_csv,
    read_trace,
    write_json,
    write_records_csv,
    write_spectrum,
    write_trace,
)
from .render import (
    render_convergence,
    render_decoherence,
    render_efficiency,
    render_estimate,
    render_settings,
    render_validation,
)
from .simulate import FAMILY_NAMES, MAX_SEED, SamplingPlan, family, sample_trace
from .spectral import DEFAULT_MIN_PERIODS, NonUniformSampling, TooShort

console = Console(stderr=True)
logger = logging.getLogger("qconfine")

EXIT_MALFORMED = 2
EXIT_NON_HERMITIAN = 3
EXIT_TOO_SHORT = 4
EXIT_CAMPAIGN = 5

CAMPAIGN_KINDS = ("validate", "efficiency", "convergence", "decoherence")


def fail(message: str, code: int = EXIT_MALFORMED) -> NoReturn:
    """Print an error on stderr and exit with ``code``."""
    console.print(f"[red]Error: {message}[/red]")
    sys.exit(code)


def setup_logging(verbose: bool) -> None:
    """Route the package logger through rich on stderr."""
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = RichHandler(console=console, show_path=False, show_time=False)
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)


def load_settings() -> Optional[Config]:
    """User defaults, or None (with a warning) when the config file is broken."""
    try:
        return get_config()
    except ConfigError as e:
        console.print(f"[yellow]Warning: Configuration error: {e}[/yellow]")
        return None


def default(settings: Optional[Config], key: str) -> Any:
    if settings is None:
        return Config.DEFAULT_CONFIG[key]
    return getattr(settings, key)


def resolve_seed(seed: Optional[int], settings: Optional[Config]) -> int:
    """--seed, then QCONFINE_SEED, then the configured default."""
    if seed is None:
        try:
            if settings is not None:
                seed = settings.seed
            else:
                seed = int(os.environ.get(SEED_ENV_VAR) or 0)
        except (ConfigError, ValueError) as e:
            fail(str(e))
    if not 0 <= seed < MAX_SEED:
        fail(f"seed must be in [0, 2**64), got {seed}")
    return seed


def out_dir_option(fn: Callable[..., Any]) -> Callable[..., Any]:
    return click.option(
        "--out-dir",
        type=click.Path(file_okay=False, path_type=Path),
        default=Path("."),
        show_default=True,
        help="Directory for output files.",
    )(fn)


@click.group()
@click.version_option(version=__version__, prog_name="qconfine")
@click.option("--verbose", "-v", is_flag=True, help="Show debug diagnostics.")
def qconfine(verbose: bool) -> None:
    """Bound qubit subspace leakage from Rabi oscillation spectra."""
    setup_logging(verbose)


# simulate


def _load_system(
    family_name: Optional[str], gamma: float, hamiltonian_path: Optional[Path]
) -> HermitianOperator:
    if (family_name is None) == (hamiltonian_path is None):
        fail("Give exactly one of --family or --hamiltonian")
    if hamiltonian_path is None:
        return family(str(family_name), gamma)
    try:
        return load_hamiltonian(hamiltonian_path)
    except HamiltonianFormatError as e:
        fail(f"{hamiltonian_path}: {e}")
    except NonHermitianInput as e:
        fail(f"{hamiltonian_path}: {e}", EXIT_NON_HERMITIAN)


@qconfine.command()
@click.option(
    "--family",
    "family_name",
    type=click.Choice(FAMILY_NAMES),
    default=None,
    help="Built-in trial Hamiltonian.",
)
@click.option("--gamma", type=float, default=0.0, help="Family coupling strength.")
@click.option(
    "--hamiltonian",
    "hamiltonian_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Hamiltonian JSON file {dim, real, imag}.",
)
@click.option(
    "--ne",
    type=int,
    default=None,
    help="Shots per time point; 0 gives a noiseless trace.",
)
@click.option("--cycles", type=float, default=None, help="Length in Rabi periods.")
@click.option(
    "--samples-per-period", type=int, default=None, help="Time steps per period."
)
@click.option("--dt", type=float, default=None, help="Explicit time step.")
@click.option("--seed", type=int, default=None, help="Random seed.")
@out_dir_option
@click.option("--name", default="trace", show_default=True, help="Output file stem.")
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["csv", "json"]),
    default="csv",
    show_default=True,
)
def simulate(
    family_name: Optional[str],
    gamma: float,
    hamiltonian_path: Optional[Path],
    ne: Optional[int],
    cycles: Optional[float],
    samples_per_period: Optional[int],
    dt: Optional[float],
    seed: Optional[int],
    out_dir: Path,
    name: str,
    fmt: str,
) -> None:
    """Simulate a Rabi oscillation record."""
    settings = load_settings()
    ensemble_size = default(settings, "ensemble_size") if ne is None else ne
    cycles = default(settings, "cycles") if cycles is None else cycles
    if samples_per_period is None:
        samples_per_period = default(settings, "samples_per_period")
    seed = resolve_seed(seed, settings)

    hamiltonian = _load_system(family_name, gamma, hamiltonian_path)
    try:
        plan = SamplingPlan.for_hamiltonian(
            hamiltonian,
            cycles=cycles,
            samples_per_period=samples_per_period,
            ensemble_size=ensemble_size,
            seed=seed,
            dt=dt,
        )
    except (ValueError, QConfineError) as e:
        fail(str(e))
    trace = sample_trace(hamiltonian, plan)

    manifest = RunManifest(
        command="simulate",
        inputs=[str(hamiltonian_path)] if hamiltonian_path else [],
        seed=seed,
        parameters={
            "family": family_name,
            "gamma": gamma,
            "ensemble_size": ensemble_size,
            "cycles": cycles,
            "samples_per_period": samples_per_period,
            "dt": plan.dt,
            "num_samples": plan.num_samples,
            "rabi_period": plan.rabi_period,
            "format": fmt,
        },
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    path = write_trace(trace, out_dir / f"{name}.{fmt}")
    manifest.add_output(path)
    manifest.write(out_dir / f"{name}.manifest.json")
    console.print(f"[green]Wrote {len(trace)} samples to {path}[/green]")


# estimate


@qconfine.command()
@click.argument(
    "trace_file", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@click.option("--guard", type=int, default=None, help="Guard channels around peaks.")
@click.option(
    "--min-periods",
    type=float,
    default=DEFAULT_MIN_PERIODS,
    show_default=True,
    help="Shortest phase-matched window in Rabi periods.",
)
@out_dir_option
@click.option("--name", default=None, help="Output file stem (default: trace stem).")
def estimate(
    trace_file: Path,
    guard: Optional[int],
    min_periods: float,
    out_dir: Path,
    name: Optional[str],
) -> None:
    """Estimate leakage bounds from a trace file."""
    settings = load_settings()
    guard = default(settings, "guard_channels") if guard is None else guard
    stem = name or trace_file.stem

    try:
        trace = read_trace(trace_file)
        matched, spectrum, est = analyse_trace(trace, guard, min_periods)
    except TooShort as e:
        fail(str(e), EXIT_TOO_SHORT)
    except (TraceFormatError, NonUniformSampling, OutOfRangePeaks) as e:
        fail(f"{trace_file}: {e}")
    except ValueError as e:
        fail(str(e))

    omega_p, _ = spectrum.primary_peak
    result = dict(
        est.to_dict(),
        source=str(trace_file),
        ensemble_size=trace.ensemble_size,
        samples_total=len(trace),
        samples_used=len(matched),
        omega_p=omega_p,
        resolution=spectrum.resolution,
        noise_mean=spectrum.noise_mean,
        spectrum_flags=list(spectrum.flags),
        units=UNITS,
    )

    manifest = RunManifest(
        command="estimate",
        inputs=[str(trace_file)],
        seed=trace.seed,
        parameters={"guard": guard, "min_periods": min_periods},
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = [write_json(result, out_dir / f"{stem}.estimate.json")]
    outputs += write_spectrum(
        spectrum, out_dir / f"{stem}.spectrum.csv", out_dir / f"{stem}.spectrum.json"
    )
    for path in outputs:
        manifest.add_output(path)
    manifest.write(out_dir / f"{stem}.estimate.manifest.json")
    render_estimate(est, spectrum, console)


# campaign


class CampaignConfig:
    """Typed access to a campaign JSON file; errors name the offending field."""

    def __init__(self, path: Path) -> None:
        self.path = path
        try:
            data = read_json(path)
        except ValueError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}")
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: campaign config must be a JSON object")
        self.data: Dict[str, Any] = data

    def get(self, key: str, kind: Callable[[Any], Any], fallback: Any = ...) -> Any:
        if self.data.get(key) is None:
            if fallback is ...:
                raise ConfigError(f"{self.path}: missing field '{key}'")
            return fallback
        try:
            return kind(self.data[key])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{self.path}: bad value for field '{key}': {e}")

    def get_list(
        self, key: str, kind: Callable[[Any], Any], fallback: Any = ...
    ) -> List[Any]:
        values = self.get(key, list, fallback)
        try:
            return [kind(v) for v in values]
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{self.path}: bad entry in field '{key}': {e}")

    def hamiltonian(self, required: bool) -> Optional[HermitianOperator]:
        """The system named by 'hamiltonian' (a file) or 'family' plus 'gamma'."""
        if self.data.get("hamiltonian") is not None:
            return load_hamiltonian(self.path.parent / str(self.data["hamiltonian"]))
        if self.data.get("family") is not None:
            try:
                return family(str(self.data["family"]), self.get("gamma", float, 0.0))
            except QConfineError as e:
                raise ConfigError(f"{self.path}: bad value for field 'family': {e}")
        if required:
            raise ConfigError(f"{self.path}: missing field 'family' or 'hamiltonian'")
        return None

    def sampling(self, settings: Optional[Config]) -> Dict[str, Any]:
        return {
            "cycles": self.get("cycles", float, default(settings, "cycles")),
            "samples_per_period": self.get(
                "samples_per_period", int, default(settings, "samples_per_period")
            ),
            "guard": self.get("guard", int, default(settings, "guard_channels")),
            "min_periods": self.get("min_periods", float, DEFAULT_MIN_PERIODS),
        }

    def trial_settings(self, settings: Optional[Config]) -> TrialSettings:
        low, high = self.get_list("coupling_range", float, [0.005, 0.02])
        return TrialSettings(coupling_range=(low, high), **self.sampling(settings))


class CampaignFiles:
    """CSV, summary and manifest paths of one campaign, plus resume state."""

    def __init__(self, out_dir: Path, kind: str, fieldnames: Sequence[str]) -> None:
        self.csv = out_dir / f"{kind}.csv"
        self.summary = out_dir / f"{kind}_summary.json"
        self.manifest_path = out_dir / f"{kind}.manifest.json"
        self.fieldnames = fieldnames
        out_dir.mkdir(parents=True, exist_ok=True)

    def completed_rows(self, config_hash: str, fresh: bool) -> List[Dict[str, str]]:
        """Rows left by an earlier run of the same configuration and seed."""
        previous = load_manifest(self.manifest_path)
        same = (
            previous is not None
            and previous.get("parameters", {}).get("config_hash") == config_hash
        )
        if fresh or not same:
            if self.csv.exists():
                logger.info("Starting %s afresh", self.csv.name)
                self.csv.unlink()
            return []
        rows = read_records_csv(self.csv)
        if rows:
            console.print(f"[yellow]Resuming with {len(rows)} completed rows[/yellow]")
        return rows

    def start(self, manifest: RunManifest) -> None:
        manifest.parameters["status"] = "running"
        manifest.write(self.manifest_path)

    def append(self, row: Mapping[str, Any]) -> None:
        append_record_csv(row, self.fieldnames, self.csv)

    def finish(
        self,
        manifest: RunManifest,
        rows: Sequence[Mapping[str, Any]],
        summary: Optional[Dict[str, Any]],
        status: str,
    ) -> None:
        """Rewrite the CSV in canonical order and close the manifest."""
        write_records_csv(rows, self.fieldnames, self.csv)
        manifest.outputs = []
        manifest.add_output(self.csv)
        if summary is not None:
            write_json(summary, self.summary)
            manifest.add_output(self.summary)
        manifest.parameters["status"] = status
        manifest.write(self.manifest_path)


class CampaignRun:
    """Everything a campaign handler needs."""

    def __init__(
        self,
        cfg: CampaignConfig,
        settings: Optional[Config],
        files: CampaignFiles,
        manifest: RunManifest,
        seed: int,
        workers: int,
        fresh: bool,
    ) -> None:
        self.cfg = cfg
        self.settings = settings
        self.files = files
        self.manifest = manifest
        self.seed = seed
        self.workers = workers
        self.fresh = fresh

    @property
    def config_hash(self) -> str:
        return str(self.manifest.parameters["config_hash"])

    def trials(self, kind: str, runner: Callable[..., Any]) -> List[TrialRecord]:
        """Run a trial-based campaign with resume and incremental CSV rows."""
        completed = [
            TrialRecord.from_row(row)
            for row in self.files.completed_rows(self.config_hash, self.fresh)
        ]
        self.files.start(self.manifest)
        try:
            return runner(
                completed=completed,
                on_record=lambda r: self.files.append(r.to_row()),
            )
        except CampaignError as e:
            rows = [r.to_row() for r in e.partial]
            self.files.finish(self.manifest, rows, None, "failed")
            fail(f"{kind} campaign stopped: {e}", EXIT_CAMPAIGN)


def _validate(run: CampaignRun) -> None:
    cfg = run.cfg
    trials = cfg.get("trials", int)
    ensemble_size = cfg.get("ne", int, default(run.settings, "ensemble_size"))
    bins = cfg.get("bins", int, 30)
    hamiltonian = cfg.hamiltonian(required=False)
    trial_settings = cfg.trial_settings(run.settings)

    def runner(**kwargs: Any) -> List[TrialRecord]:
        common = dict(seed=run.seed, workers=run.workers, **kwargs)
        if hamiltonian is None:
            stats = validation_campaign(trials, ensemble_size, trial_settings, **common)
        else:
            stats = distance_study(
                hamiltonian, trials, ensemble_size, trial_settings, **common
            )
        return stats.records

    records = run.trials("validate", runner)
    stats = ValidationStats(records)
    summary = dict(
        stats.summary(bins),
        ensemble_size=ensemble_size,
        fixed_hamiltonian=hamiltonian is not None,
        seed=run.seed,
    )
    run.files.finish(run.manifest, [r.to_row() for r in records], summary, "complete")
    render_validation(summary, console)


def _convergence(run: CampaignRun) -> None:
    cfg = run.cfg
    hamiltonian = cfg.hamiltonian(required=True)
    assert hamiltonian is not None
    if "ne_grid" in cfg.data:
        grid = cfg.get_list("ne_grid", int)
    else:
        low = cfg.get("ne_min_exp", int, 4)
        high = cfg.get("ne_max_exp", int, 14)
        grid = [2**k for k in range(low, high + 1)]
    n_seeds = cfg.get("seeds", int, 50)
    trial_settings = cfg.trial_settings(run.settings)

    def runner(**kwargs: Any) -> List[TrialRecord]:
        _, records = convergence_sweep(
            hamiltonian,
            grid,
            n_seeds,
            trial_settings,
            seed=run.seed,
            workers=run.workers,
            **kwargs,
        )
        return records

    records = run.trials("convergence", runner)
    points = summarize_convergence(records)
    eps_low, eps_high = optional_bounds(analytic_peaks(hamiltonian))
    summary = {
        "points": [dict(asdict(p), spread=p.spread) for p in points],
        "analytic": {
            "eps_low": eps_low,
            "eps_high": eps_high,
            "eps_exact": exact_leakage(hamiltonian),
        },
        "seeds": n_seeds,
        "seed": run.seed,
    }
    run.files.finish(run.manifest, [r.to_row() for r in records], summary, "complete")
    render_convergence(points, console)


def _efficiency(run: CampaignRun) -> None:
    cfg = run.cfg
    family_name = cfg.get("family", str)
    if family_name not in FAMILY_NAMES:
        raise ConfigError(f"{cfg.path}: bad value for field 'family': {family_name}")
    gammas = cfg.get_list("gammas", float)
    methods = cfg.get_list("methods", str, list(METHODS))
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ConfigError(f"{cfg.path}: bad value for field 'methods': {unknown}")
    try:
        settings = EfficiencySettings(
            ne_min=cfg.get("ne_min", int, 16),
            ne_max=cfg.get("ne_max", int, 2**20),
            n_seeds=cfg.get("seeds", int, 11),
            **cfg.sampling(run.settings),
        )
    except ValueError as e:
        raise ConfigError(f"{cfg.path}: {e}")

    completed = [
        EfficiencyPoint.from_row(row)
        for row in run.files.completed_rows(run.config_hash, run.fresh)
    ]
    run.files.start(run.manifest)
    try:
        points = efficiency_curve(
            family_name,
            gammas,
            methods,
            settings,
            seed=run.seed,
            workers=run.workers,
            completed=completed,
            on_point=lambda p: run.files.append(p.to_row()),
        )
    except CampaignError as e:
        rows = [p.to_row() for p in e.partial]
        run.files.finish(run.manifest, rows, None, "failed")
        fail(f"efficiency campaign stopped: {e}", EXIT_CAMPAIGN)

    confinement_cheaper = third_peak_cheaper = 0
    for point in points:
        if point.ne_confinement is None or point.ne_third_peak is None:
            continue
        confinement_cheaper += point.ne_confinement < point.ne_third_peak
        third_peak_cheaper += point.ne_third_peak < point.ne_confinement
    summary = {
        "family": family_name,
        "methods": methods,
        "grid": settings.grid(),
        "points": [p.to_row() for p in points],
        "confinement_cheaper": confinement_cheaper,
        "third_peak_cheaper": third_peak_cheaper,
        "seed": run.seed,
    }
    run.files.finish(run.manifest, [p.to_row() for p in points], summary, "complete")
    render_efficiency(points, console)


def _decoherence(run: CampaignRun) -> None:
    cfg = run.cfg
    try:
        qubit = DecoherenceConfig.from_dict(
            cfg.data, regime_ratio=default(run.settings, "regime_ratio")
        )
    except KeyError as e:
        raise ConfigError(f"{cfg.path}: missing field {e}")
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{cfg.path}: {e}")
    zetas = cfg.get_list("zetas", float)
    sampling = cfg.sampling(run.settings)
    sampling.pop("cycles")
    try:
        points = decoherence_sweep(
            qubit,
            zetas,
            resolution_factor=cfg.get("resolution_factor", float, 10.0),
            **sampling,
        )
    except ValueError as e:
        raise ConfigError(f"{cfg.path}: {e}")
    summary = {
        "config": qubit.to_dict(),
        "gamma_alpha": qubit.gamma_alpha,
        "gamma_beta": qubit.gamma_beta,
        "all_within_target": all(p.within_target for p in points),
        "points": [p.to_row() for p in points],
        "units": UNITS,
    }
    run.files.finish(run.manifest, [p.to_row() for p in points], summary, "complete")
    render_decoherence(points, console)


CAMPAIGNS: Dict[str, Any] = {
    "validate": (_validate, RECORD_FIELDS),
    "convergence": (_convergence, RECORD_FIELDS),
    "efficiency": (_efficiency, EFFICIENCY_FIELDS),
    "decoherence": (_decoherence, DECOHERENCE_FIELDS),
}


@qconfine.command()
@click.argument("kind", type=click.Choice(CAMPAIGN_KINDS))
@click.argument(
    "config_file", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@out_dir_option
@click.option("--workers", type=int, default=None, help="Worker processes.")
@click.option("--seed", type=int, default=None, help="Campaign seed.")
@click.option("--fresh", is_flag=True, help="Discard results of an earlier run.")
def campaign(
    kind: str,
    config_file: Path,
    out_dir: Path,
    workers: Optional[int],
    seed: Optional[int],
    fresh: bool,
) -> None:
    """Run a validation, efficiency, convergence or decoherence campaign.

    CONFIG_FILE is a JSON object of campaign parameters. Rows are appended to
    KIND.csv as trials finish; rerunning the same configuration and seed
    resumes from them.
    """
    settings = load_settings()
    workers = default(settings, "workers") if workers is None else workers

    handler, fieldnames = CAMPAIGNS[kind]
    try:
        cfg = CampaignConfig(config_file)
        if seed is None:
            seed = cfg.get("seed", int, None)
    except ConfigError as e:
        fail(str(e))
    seed = resolve_seed(seed, settings)

    try:
        manifest = RunManifest(
            command=f"campaign {kind}",
            inputs=[str(config_file)],
            seed=seed,
            parameters={
                "config": cfg.data,
                "config_hash": compute_data_hash({"config": cfg.data, "seed": seed}),
                "workers": workers,
            },
        )
        files = CampaignFiles(out_dir, kind, fieldnames)
        handler(CampaignRun(cfg, settings, files, manifest, seed, workers, fresh))
    except NonHermitianInput as e:
        fail(str(e), EXIT_NON_HERMITIAN)
    except (ConfigError, HamiltonianFormatError) as e:
        fail(str(e))
    except QConfineError as e:
        fail(f"{config_file}: {e}")


# decoherence


@qconfine.command()
@click.argument(
    "config_file", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@click.option("--cycles", type=float, default=None, help="Length in Rabi periods.")
@click.option(
    "--samples-per-period", type=int, default=None, help="Time steps per period."
)
@click.option(
    "--omega-points",
    type=click.IntRange(min=2),
    default=401,
    show_default=True,
    help="Points on the analytic spectrum grid.",
)
@click.option("--omega-max", type=float, default=None, help="Grid end (default 2d).")
@click.option("--eta", type=float, default=None, help="Peak integration half-width.")
@click.option("--zeta", type=float, default=None, help="Leakage target to resolve.")
@out_dir_option
@click.option(
    "--name", default="decoherence", show_default=True, help="Output file stem."
)
def decoherence(
    config_file: Path,
    cycles: Optional[float],
    samples_per_period: Optional[int],
    omega_points: int,
    omega_max: Optional[float],
    eta: Optional[float],
    zeta: Optional[float],
    out_dir: Path,
    name: str,
) -> None:
    """Evolve a decohering qubit and summarise its spectrum.

    CONFIG_FILE holds {theta, d, gx, gy, gz}.
    """
    settings = load_settings()
    cycles = default(settings, "cycles") if cycles is None else cycles
    if samples_per_period is None:
        samples_per_period = default(settings, "samples_per_period")
    try:
        qubit = DecoherenceConfig.from_dict(
            read_json(config_file), regime_ratio=default(settings, "regime_ratio")
        )
    except KeyError as e:
        fail(f"{config_file}: missing field {e}")
    except (TypeError, ValueError, AttributeError) as e:
        fail(f"{config_file}: {e}")

    dt = qubit.rabi_period / samples_per_period
    times = np.arange(int(round(cycles * samples_per_period))) * dt
    trace = evolve_bloch(qubit, times)
    flags: List[str] = []
    result: Dict[str, Any] = {
        "config": qubit.to_dict(),
        "gamma_alpha": qubit.gamma_alpha,
        "gamma_beta": qubit.gamma_beta,
        "regime_ratio": qubit.regime_ratio,
        "units": UNITS,
    }

    try:
        result["lorentzian"] = asdict(lorentzian_peaks(qubit))
    except RegimeViolation as e:
        logger.warning("%s", e)
        result["lorentzian"] = None
        flags.append("regime_violation")

    if eta is None:
        eta = 2.0 * math.pi / (len(trace) * dt)
    try:
        h0, h01 = peak_area(qubit, eta)
    except ValueError as e:
        fail(str(e))
    result["peak_area"] = {"eta": eta, "h0": h0, "h01": h01}

    if zeta is not None:
        try:
            bound = max_resolution(max(qubit.gamma_alpha, qubit.gamma_beta), zeta)
        except (QConfineError, ValueError) as e:
            fail(str(e))
        result["resolution_bound"] = bound._asdict()

    try:
        _, spectrum, est = analyse_trace(trace, default(settings, "guard_channels"))
    except TooShort as e:
        fail(str(e), EXIT_TOO_SHORT)
    result["estimate"] = est.to_dict()

    manifest = RunManifest(
        command="decoherence",
        inputs=[str(config_file)],
        parameters={
            "cycles": cycles,
            "samples_per_period": samples_per_period,
            "omega_points": omega_points,
            "omega_max": omega_max,
            "eta": eta,
            "zeta": zeta,
        },
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest.add_output(write_trace(trace, out_dir / f"{name}_trace.csv"))

    end = 2.0 * qubit.gap if omega_max is None else omega_max
    grid = np.linspace(0.0, end, omega_points)
    try:
        values = analytic_spectrum(qubit, grid)
    except SingularResolvent as e:
        console.print(f"[yellow]Warning: analytic spectrum skipped: {e}[/yellow]")
        flags.append("singular_resolvent")
    else:
        rows = [
            {"omega": float(w), "re": float(v.real), "im": float(v.imag)}
            for w, v in zip(grid, values)
        ]
        path = write_records_csv(
            rows, ("omega", "re", "im"), out_dir / f"{name}_spectrum.csv"
        )
        manifest.add_output(path)

    result["flags"] = flags
    manifest.add_output(write_json(result, out_dir / f"{name}.json"))
    manifest.write(out_dir / f"{name}.manifest.json")
    render_estimate(est, spectrum, console)


# config


@qconfine.command()
@click.option("--show", is_flag=True, help="Show current configuration.")
@click.option(
    "--set",
    "set_option",
    type=(str, str),
    multiple=True,
    help="Set configuration option (key value pairs).",
)
@click.option("--reset", "reset_keys", multiple=True, help="Restore a key's default.")
@click.option("--path", is_flag=True, help="Show configuration file path.")
def config(show: bool, set_option: tuple, reset_keys: tuple, path: bool) -> None:
    """Show or edit default settings."""
    try:
        config_manager = get_config()
    except ConfigError as e:
        fail(f"loading configuration: {e}")

    if path:
        console.print("[bold]Configuration file path:[/bold]")
        console.print(f"[cyan]{config_manager.config_path}[/cyan]")
        return

    updated = False
    for key, value in set_option:
        try:
            config_manager.set_from_string(key, value)
        except (ConfigError, ValueError) as e:
            console.print(f"[red]Error setting {key}: {e}[/red]")
            continue
        updated = True
        console.print(f"Set [cyan]{key}[/cyan] = [green]{value}[/green]")

    for key in reset_keys:
        try:
            config_manager.reset(key)
        except ConfigError as e:
            console.print(f"[red]Error: {e}[/red]")
            continue
        updated = True
        console.print(f"Reset [cyan]{key}[/cyan]")

    if updated:
        try:
            config_manager.save()
        except ConfigError as e:
            fail(f"saving configuration: {e}")
        console.print(f"[green]Saved to {config_manager.config_path}[/green]")

    if show or not (set_option or reset_keys):
        console.print("[bold]Current Configuration:[/bold]")
        console.print(f"[dim]Location: {config_manager.config_path}[/dim]")
        render_settings(config_manager.get_all(), console)


if __name__ == "__main__":
    qconfine()
