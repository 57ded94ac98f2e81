"""Logging system for unmixing experiments."""

import logging
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Optional

LOGGER_NAME = "spsu"


class EventType(Enum):
    """Types of experiment events."""
    GENERATED = "GENERATED"
    INITIALIZED = "INITIALIZED"
    ITERATION = "ITERATION"
    SOLVED = "SOLVED"
    EXPORTED = "EXPORTED"
    EVALUATED = "EVALUATED"
    SKIPPED = "SKIPPED"
    ERROR = "ERROR"


class ExperimentLogger:
    """Logger for experiment runs with structured, pipe-delimited records.

    Library modules log through children of the ``spsu`` logger
    (``spsu.solver``, ``spsu.features``, ...), so their records land in the
    same file.
    """

    def __init__(self, log_dir: Path, console_level: int = logging.WARNING):
        """Initialize logger.

        Args:
            log_dir: Directory to store log files.
            console_level: Minimum level echoed to the terminal.
        """
        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)

        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        log_file = self.log_dir / f"spsu_{timestamp}.log"

        self.logger = logging.getLogger(LOGGER_NAME)
        self.logger.setLevel(logging.INFO)
        for handler in list(self.logger.handlers):
            self.logger.removeHandler(handler)
            handler.close()

        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setLevel(logging.INFO)

        console_handler = logging.StreamHandler()
        console_handler.setLevel(console_level)

        formatter = logging.Formatter(
            "%(asctime)s | %(levelname)-8s | %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S"
        )
        file_handler.setFormatter(formatter)
        console_handler.setFormatter(formatter)

        self.logger.addHandler(file_handler)
        self.logger.addHandler(console_handler)

        self.log_file = log_file
        self._log_session_start()

    def _log_session_start(self) -> None:
        self.logger.info("=" * 80)
        self.logger.info("Unmixing Session Started")
        self.logger.info("=" * 80)

    def log_config(self, config) -> None:
        """Log the configuration snapshot, one line per field."""
        for key, value in config.as_dict().items():
            self.logger.info(f"CONFIG | {key:18s} | {value}")

    def log_generated(self, seed: int, out_dir: Path, shape: tuple) -> None:
        """Log a generated scene.

        Args:
            seed: Scene seed.
            out_dir: Directory the scene was written to.
            shape: ``(bands, height, width)`` of the cube.
        """
        self.logger.info(
            f"{EventType.GENERATED.value} | seed {seed:<6d} | "
            f"{'x'.join(str(s) for s in shape):15s} | {out_dir}"
        )

    def log_initialized(self, seed: int, method: str, objective: float) -> None:
        self.logger.info(
            f"{EventType.INITIALIZED.value} | seed {seed:<6d} | {method:8s} | f0={objective:.6e}"
        )

    def log_solved(self, seed: int, method: str, iterations: int, converged: bool,
                   objective: float, wall_time: float) -> None:
        """Log the end of a solve.

        Args:
            seed: Run seed.
            method: Method name.
            iterations: PALM sweeps performed.
            converged: Whether the stopping rule was met.
            objective: Final objective value.
            wall_time: Seconds, initialization included.
        """
        status = "converged" if converged else "max_iters"
        self.logger.info(
            f"{EventType.SOLVED.value} | seed {seed:<6d} | {method:8s} | {status:9s} | "
            f"iters={iterations} | f={objective:.6e} | {wall_time:.2f}s"
        )

    def log_exported(self, seed: int, out_dir: Path, n_files: int) -> None:
        self.logger.info(
            f"{EventType.EXPORTED.value} | seed {seed:<6d} | {n_files:3d} files | {out_dir}"
        )

    def log_evaluated(self, seed: int, asam: float, re: float, rmse: float) -> None:
        self.logger.info(
            f"{EventType.EVALUATED.value} | seed {seed:<6d} | aSAM={asam:.6f} | "
            f"RE={re:.6e} | RMSE={rmse:.6f}"
        )

    def log_skip(self, seed: int, reason: str) -> None:
        """Log a skipped seed.

        Args:
            seed: Seed that was skipped.
            reason: Reason for skipping.
        """
        self.logger.info(f"{EventType.SKIPPED.value} | seed {seed:<6d} | {reason}")

    def log_error(self, seed: Optional[int], error: Exception) -> None:
        """Log an error raised while processing a seed.

        Args:
            seed: Seed being processed, if any.
            error: Exception that occurred.
        """
        where = f"seed {seed:<6d}" if seed is not None else "session    "
        self.logger.error(
            f"{EventType.ERROR.value} | {where} | {type(error).__name__:24s} | {error}"
        )

    def log_summary(self, stats: dict) -> None:
        """Log session summary.

        Args:
            stats: Dictionary with run statistics.
        """
        self.logger.info("=" * 80)
        self.logger.info("Session Summary:")
        self.logger.info(f"  Seeds requested: {stats.get('total', 0)}")
        self.logger.info(f"  Generated: {stats.get('generated', 0)}")
        self.logger.info(f"  Solved: {stats.get('solved', 0)}")
        self.logger.info(f"  Not converged: {stats.get('not_converged', 0)}")
        self.logger.info(f"  Evaluated: {stats.get('evaluated', 0)}")
        self.logger.info(f"  Errors: {stats.get('errors', 0)}")
        self.logger.info("=" * 80)

    def close(self) -> None:
        """Detach and close the handlers."""
        for handler in list(self.logger.handlers):
            self.logger.removeHandler(handler)
            handler.close()

    def get_log_path(self) -> Path:
        """Get path to current log file.

        Returns:
            Path to log file.
        """
        return self.log_file
