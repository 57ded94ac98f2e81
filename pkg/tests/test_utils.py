"""Unit tests for utility functions."""

import pytest

from src.errors import ConfigError
from src.utils import create_output_dir, format_duration, parse_seed_range, seed_dir


class TestParseSeedRange:
    """Tests for parse_seed_range function."""

    def test_single_seed(self):
        """A lone number is one seed."""
        assert parse_seed_range("3") == [3]

    def test_inclusive_range(self):
        """Both ends of a range are included."""
        assert parse_seed_range("0..4") == [0, 1, 2, 3, 4]

    def test_mixed_list(self):
        """Ranges and single seeds combine in order."""
        assert parse_seed_range("0..2, 7") == [0, 1, 2, 7]

    def test_duplicates_removed(self):
        """Repeated seeds are kept once."""
        assert parse_seed_range("1..3,2,1") == [1, 2, 3]

    @pytest.mark.parametrize("text", ["", "a", "3..1", "1..x", ","])
    def test_invalid(self, text):
        """Malformed and reversed ranges are rejected."""
        with pytest.raises(ConfigError):
            parse_seed_range(text)


class TestOutputPaths:
    """Tests for output directory helpers."""

    def test_seed_dir(self, tmp_path):
        """Seed directories are named seed_<n>."""
        assert seed_dir(tmp_path, 12) == tmp_path / "seed_12"

    def test_create_output_dir(self, tmp_path):
        """Nested directories are created."""
        target = tmp_path / "a" / "b"
        assert create_output_dir(target) == target
        assert target.is_dir()

    def test_create_output_dir_existing(self, tmp_path):
        """An existing directory is accepted."""
        assert create_output_dir(tmp_path) == tmp_path

    def test_create_output_dir_over_file(self, tmp_path):
        """A file in the way is an error."""
        blocker = tmp_path / "out"
        blocker.write_text("x")
        with pytest.raises(NotADirectoryError):
            create_output_dir(blocker)


class TestFormatDuration:
    """Tests for format_duration function."""

    def test_milliseconds(self):
        """Test sub-second durations."""
        assert format_duration(0.25) == "250 ms"

    def test_seconds(self):
        """Test durations under a minute."""
        assert format_duration(12.34) == "12.3 s"

    def test_minutes(self):
        """Test durations of a minute or more."""
        assert format_duration(125.0) == "2 min 05 s"
