"""Command-line interface with rich library."""

import time
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn
from rich.table import Table

from .config import ExperimentConfig, get_thread_count
from .experiment import ExperimentRunner, RunManifest, aggregate_rows
from .logger import ExperimentLogger
from .metrics import EvalReport
from .utils import format_duration


class CLI:
    """Command-line interface for unmixing experiments."""

    def __init__(self, config: ExperimentConfig, console: Optional[Console] = None):
        """Initialize CLI.

        Args:
            config: Experiment configuration.
            console: Console to print to (a new one by default).
        """
        self.config = config
        self.console = console or Console()
        self.logger = None
        self.runner = None

    def _ensure_logger(self) -> None:
        """Ensure logger is initialized (lazy initialization)."""
        if self.logger is None:
            self.logger = ExperimentLogger(self.config.log_dir)
            self.logger.log_config(self.config)
            self.runner = ExperimentRunner(self.config, self.logger)

    def close(self) -> None:
        if self.logger is not None:
            self.logger.close()

    def show_banner(self) -> None:
        """Display application banner."""
        self.console.print(Panel(
            "[bold]Spatial-Spectral Unmixing[/bold]\n"
            "Joint unmixing and clustering of hyperspectral images",
            border_style="cyan",
            expand=False,
        ))

    def show_config(self) -> None:
        """Display current configuration."""
        cfg = self.config
        config_table = Table(title="Configuration", box=box.ROUNDED)
        config_table.add_column("Setting", style="cyan")
        config_table.add_column("Value", style="yellow")

        config_table.add_row("Method", cfg.method)
        config_table.add_row("Seeds", ", ".join(str(s) for s in cfg.seed_list))
        config_table.add_row("Scene", f"{cfg.height}x{cfg.width}, {cfg.n_bands} bands, "
                                      f"{cfg.n_regions} regions")
        config_table.add_row("Sizes", f"R1={cfg.R1}  R2={cfg.R2}  K={cfg.K}  w={cfg.patch_size}")
        config_table.add_row("Weights", f"l0~={cfg.lambda0_tilde}  l1~={cfg.lambda1_tilde}  "
                                        f"l2={cfg.lambda2}  lz={cfg.lambda_z}")
        config_table.add_row("Solver", f"alpha={cfg.alpha}  rel_tol={cfg.rel_tol:g}  "
                                       f"max_iters={cfg.max_iters}")
        config_table.add_row("Threads", str(get_thread_count()))
        config_table.add_row("Log Directory", str(cfg.log_dir))

        self.console.print(config_table)
        self.console.print()

    def _progress(self) -> Progress:
        return Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TaskProgressColumn(),
            console=self.console,
            transient=True,
        )

    def cmd_generate(self, out_dir: Path) -> List[Path]:
        """Generate one synthetic scene per seed.

        Args:
            out_dir: Output root; scenes go to ``seed_<n>`` subdirectories.

        Returns:
            Scene directories written.
        """
        self._ensure_logger()
        seeds = self.config.seed_list
        with self._progress() as progress:
            task = progress.add_task("Generating scenes...", total=len(seeds))
            written = self.runner.generate(out_dir, seeds,
                                           on_seed=lambda _: progress.update(task, advance=1))
        for path in written:
            self.console.print(f"[green]✓[/green] {path}")
        self._show_summary()
        return written

    def cmd_run(self, data_dir: Path, out_dir: Path) -> RunManifest:
        """Run the configured method on every seed.

        Args:
            data_dir: Scene directory (or root of ``seed_<n>`` scene directories).
            out_dir: Output root.

        Returns:
            The run manifest.
        """
        self._ensure_logger()
        seeds = self.config.seed_list
        start = time.perf_counter()
        with self._progress() as progress:
            task = progress.add_task(f"Running {self.config.method}...", total=len(seeds))
            manifest = self.runner.run_seeds(data_dir, out_dir, seeds,
                                             on_seed=lambda _: progress.update(task, advance=1))
        elapsed = time.perf_counter() - start

        runs_table = Table(title=f"{self.config.method} runs", box=box.ROUNDED)
        runs_table.add_column("Seed", justify="right")
        runs_table.add_column("Iterations", justify="right", style="magenta")
        runs_table.add_column("Converged")
        runs_table.add_column("Objective", justify="right", style="yellow")
        for run in manifest.runs:
            runs_table.add_row(
                str(run["seed"]),
                str(run["iterations"]),
                "[green]yes[/green]" if run["converged"] else "[yellow]no[/yellow]",
                f"{run['final_objective']:.6e}",
            )
        self.console.print(runs_table)
        self.console.print(f"[dim]Finished in {format_duration(elapsed)}[/dim]")

        if manifest.metrics:
            self._show_metric_table([
                (row["seed"], row["asam"], row["re"], row["rmse"], None)
                for row in manifest.metrics
            ])
        self._show_summary()
        return manifest

    def cmd_eval(self, truth_dir: Path, results_dir: Path) -> List[Tuple[int, EvalReport]]:
        """Score results against ground truth and write ``metrics.csv``.

        Args:
            truth_dir: Scene directory (or root of ``seed_<n>`` scene directories).
            results_dir: Output root of a run.

        Returns:
            ``(seed, report)`` pairs.
        """
        self._ensure_logger()
        reports = self.runner.evaluate(truth_dir, results_dir)
        self._show_metric_table([
            (seed, r.asam, r.re, r.rmse, r.wall_time) for seed, r in reports
        ])
        self.console.print(f"[dim]Metrics: {Path(results_dir) / 'metrics.csv'}[/dim]")
        self._show_summary()
        return reports

    def _show_metric_table(self, rows: Sequence[tuple]) -> None:
        metric_table = Table(title="Results", box=box.ROUNDED)
        metric_table.add_column("Seed", justify="right", style="cyan")
        metric_table.add_column("aSAM(M)", justify="right")
        metric_table.add_column("RE", justify="right")
        metric_table.add_column("RMSE(A)", justify="right")
        metric_table.add_column("Time (s)", justify="right", style="dim")

        for seed, a, re_, r, t in rows:
            metric_table.add_row(str(seed), f"{a:.4f}", f"{re_:.3e}", f"{r:.4f}",
                                 "-" if t is None else f"{t:.2f}")

        if len(rows) > 1:
            records = [{"asam": a, "re": re_, "rmse": r} for _, a, re_, r, _ in rows]
            agg = aggregate_rows(records, ("asam", "re", "rmse"))
            times = [t for *_, t in rows if t is not None]
            mean_t = f"{sum(times) / len(times):.2f}" if times else "-"
            metric_table.add_row(
                "[bold]mean[/bold]",
                f"{agg['mean']['asam']:.4f} ± {agg['std']['asam']:.4f}",
                f"{agg['mean']['re']:.3e}",
                f"{agg['mean']['rmse']:.4f} ± {agg['std']['rmse']:.4f}",
                mean_t,
            )
        self.console.print(metric_table)

    def _show_summary(self) -> None:
        """Show run summary."""
        stats = self.runner.get_stats()

        summary_table = Table(title="Summary", box=box.ROUNDED, style="bold")
        summary_table.add_column("Operation", style="cyan")
        summary_table.add_column("Count", style="magenta", justify="right")

        summary_table.add_row("Seeds", str(stats['total']))
        summary_table.add_row("Generated", f"[green]{stats['generated']}[/green]")
        summary_table.add_row("Solved", f"[green]{stats['solved']}[/green]")
        summary_table.add_row("Not converged", f"[yellow]{stats['not_converged']}[/yellow]")
        summary_table.add_row("Evaluated", f"[green]{stats['evaluated']}[/green]")
        summary_table.add_row("Errors", f"[red]{stats['errors']}[/red]")

        self.console.print()
        self.console.print(summary_table)

        self.console.print()
        self.console.print(f"[dim]Log file: {self.logger.get_log_path()}[/dim]")
