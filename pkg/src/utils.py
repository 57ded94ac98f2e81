"""Utility functions for seeds, output paths and formatting."""

from pathlib import Path
from typing import List

from .errors import ConfigError


def parse_seed_range(text: str) -> List[int]:
    """Parse a seed range.

    Accepts a single seed (``"3"``), an inclusive range (``"0..9"``) or a
    comma-separated mix of both (``"0..2,7"``).

    Args:
        text: Seed range.

    Returns:
        Seeds in the order given, duplicates removed.

    Raises:
        ConfigError: If the text does not parse or a range is reversed.
    """
    seeds: List[int] = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        try:
            if ".." in part:
                first, last = (int(v) for v in part.split("..", 1))
                if last < first:
                    raise ConfigError(f"seed range {part!r} is reversed")
                seeds.extend(range(first, last + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise ConfigError(f"invalid seed range {text!r}")
    if not seeds:
        raise ConfigError("empty seed range")
    return list(dict.fromkeys(seeds))


def seed_dir(base_path: Path, seed: int) -> Path:
    """Per-seed subdirectory of ``base_path``."""
    return base_path / f"seed_{seed}"


def create_output_dir(path: Path) -> Path:
    """Create an output directory (and its parents) if needed.

    Args:
        path: Directory path.

    Returns:
        The same path.

    Raises:
        NotADirectoryError: If ``path`` exists and is a file.
    """
    path = Path(path)
    if path.exists() and not path.is_dir():
        raise NotADirectoryError(f"output path is not a directory: {path}")
    path.mkdir(parents=True, exist_ok=True)
    return path


def format_duration(seconds: float) -> str:
    """Format a duration in human-readable form.

    Args:
        seconds: Duration in seconds.

    Returns:
        Formatted string (e.g., "850 ms", "12.3 s", "2 min 05 s").
    """
    if seconds < 1.0:
        return f"{seconds * 1000:.0f} ms"
    if seconds < 60.0:
        return f"{seconds:.1f} s"
    minutes, rest = divmod(int(round(seconds)), 60)
    return f"{minutes} min {rest:02d} s"
