"""
Render results as rich tables on standard error.

Data files are the real output of every command; these tables are a human
summary and never go to stdout.
"""

from typing import Any, Dict, Optional, Sequence

from rich.console import Console
from rich.table import Table
from rich.text import Text

from .campaign import ConvergencePoint, DecoherencePoint, EfficiencyPoint
from .estimate import LeakageEstimate
from .spectral import Spectrum

stderr_console = Console(stderr=True)


def format_value(value: Optional[float], error: Optional[float] = None) -> str:
    """Format a number (and optional uncertainty) in compact scientific notation."""
    if value is None:
        return "undefined"
    if error is None:
        return f"{value:.4e}"
    return f"{value:.4e} ± {error:.2e}"


def _flags_text(flags: Sequence[str]) -> Text:
    if not flags:
        return Text("-", style="dim")
    return Text(", ".join(flags), style="yellow")


def render_estimate(
    est: LeakageEstimate,
    spectrum: Optional[Spectrum] = None,
    console: Optional[Console] = None,
) -> None:
    """Show leakage bounds and the peak heights they came from."""
    console = console or stderr_console
    table = Table(
        title="Leakage estimate", show_header=True, header_style="bold magenta"
    )
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", style="green", justify="right")

    table.add_row("eps_low", format_value(est.eps_low, est.d_eps_low))
    table.add_row("eps_high", format_value(est.eps_high, est.d_eps_high))
    table.add_row("h0", format_value(est.h0))
    table.add_row("h01", format_value(est.h01))
    table.add_row("delta_h", format_value(est.delta_h))
    if spectrum is not None:
        omega_p, _ = spectrum.primary_peak
        table.add_row("omega_p", format_value(omega_p))
        table.add_row("resolution", format_value(spectrum.resolution))
        table.add_row("samples used", str(spectrum.num_samples))
    table.add_row("flags", _flags_text(est.flags))
    console.print(table)


def render_validation(
    summary: Dict[str, Any], console: Optional[Console] = None
) -> None:
    console = console or stderr_console
    table = Table(title="Validation", show_header=True, header_style="bold magenta")
    table.add_column("Statistic", style="cyan")
    table.add_column("Value", style="green", justify="right")

    ratio = summary["ratio"]
    style = "bold green" if ratio >= 0.99 else "bold red"
    table.add_row("trials", str(summary["trials"]))
    table.add_row("R", Text(f"{ratio:.2%}", style=style))
    table.add_row("3 x mean(delta_d)", format_value(summary["coverage_radius"]))
    table.add_row("coverage", f"{summary['coverage']:.2%}")
    table.add_row("undefined", str(summary["undefined"]))
    console.print(table)


def render_efficiency(
    points: Sequence[EfficiencyPoint], console: Optional[Console] = None
) -> None:
    """Ensemble sizes per criterion; the cheaper criterion is highlighted."""
    console = console or stderr_console
    table = Table(title="Efficiency", show_header=True, header_style="bold magenta")
    table.add_column("gamma", style="cyan", justify="right")
    table.add_column("eps", justify="right")
    table.add_column("N_e confinement", justify="right")
    table.add_column("N_e third peak", justify="right")

    for point in points:
        conf = point.ne_confinement
        third = point.ne_third_peak
        conf_style = third_style = ""
        if conf is not None and (third is None or conf < third):
            conf_style = "bold green"
        elif third is not None and (conf is None or third < conf):
            third_style = "bold green"
        table.add_row(
            f"{point.gamma:g}",
            format_value(point.eps_analytic),
            Text("unreached" if conf is None else str(conf), style=conf_style),
            Text("unreached" if third is None else str(third), style=third_style),
        )
    console.print(table)


def render_convergence(
    points: Sequence[ConvergencePoint], console: Optional[Console] = None
) -> None:
    console = console or stderr_console
    table = Table(title="Convergence", show_header=True, header_style="bold magenta")
    table.add_column("N_e", style="cyan", justify="right")
    table.add_column("trials", justify="right")
    table.add_column("median eps_high", justify="right")
    table.add_column("IQR", justify="right")
    table.add_column("mean d_eps_high", justify="right")

    for point in points:
        table.add_row(
            str(point.ensemble_size),
            str(point.trials),
            format_value(point.median_eps_high),
            format_value(point.spread),
            format_value(point.mean_d_eps_high),
        )
    console.print(table)


def render_decoherence(
    points: Sequence[DecoherencePoint], console: Optional[Console] = None
) -> None:
    console = console or stderr_console
    table = Table(title="Decoherence", show_header=True, header_style="bold magenta")
    table.add_column("zeta", style="cyan", justify="right")
    table.add_column("t_ob max", justify="right")
    table.add_column("t_ob used", justify="right")
    table.add_column("eps_high", justify="right")
    table.add_column("within", justify="center")

    for point in points:
        if point.within_target:
            within = Text("yes", style="green")
        else:
            within = Text("no", style="red")
        table.add_row(
            f"{point.zeta:g}",
            format_value(point.t_ob_max),
            format_value(point.t_ob),
            format_value(point.eps_high, point.d_eps_high),
            within,
        )
    console.print(table)


def render_settings(
    settings: Dict[str, Any], console: Optional[Console] = None
) -> None:
    console = console or stderr_console
    table = Table(show_header=True, header_style="bold blue")
    table.add_column("Setting", style="cyan")
    table.add_column("Value", style="green")
    for key, value in settings.items():
        table.add_row(key, "(not set)" if value is None else str(value))
    console.print(table)
