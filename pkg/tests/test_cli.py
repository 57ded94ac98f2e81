"""End-to-end tests of the command line on tiny scenes."""

import numpy as np
import pytest

from src.__main__ import build_config, main, parse_arguments
from src.file_formats import read_json, read_matrix, write_matrix
from src.model import Variant

TINY = [
    "height=8", "width=8", "n_bands=10", "R1=2", "R2=3", "K=4",
    "patch_size=3", "max_iters=20", "potts_sweeps=5",
]


def _overrides(tmp_path, *extra):
    args = []
    for pair in (*TINY, f"log_dir={tmp_path / 'logs'}", *extra):
        args += ["--override", pair]
    return args


def _read_metrics(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


@pytest.fixture(autouse=True)
def single_thread(monkeypatch):
    monkeypatch.delenv("SPSU_THREADS", raising=False)


@pytest.fixture
def scenes(tmp_path):
    out = tmp_path / "scenes"
    assert main(["generate", "--seeds", "0..1", "--out", str(out), *_overrides(tmp_path)]) == 0
    return out


class TestArguments:
    """Tests for argument parsing and configuration assembly."""

    def test_run_arguments(self):
        """Subcommand, method and paths are parsed."""
        args = parse_arguments(["run", "--method", "nmf", "--data", "d", "--out", "o"])
        assert args["command"] == "run"
        assert args["method"] == "nmf"
        assert str(args["data"]) == "d"

    def test_flags_become_config(self):
        """--method, --seeds and overrides end up in the configuration."""
        args = parse_arguments(["run", "--method", "cspu", "--seeds", "2..4", "--data", "d",
                                "--out", "o", "--override", "K=7"])
        config = build_config(args)
        assert config.variant is Variant.CSPU
        assert config.seed_list == [2, 3, 4]
        assert config.K == 7

    def test_single_seed(self):
        """--seed alone selects one run."""
        config = build_config(parse_arguments(["generate", "--seed", "5", "--out", "o"]))
        assert config.seed_list == [5]

    def test_unknown_method_exit_code(self, tmp_path):
        """argparse rejects unknown methods with exit code 2."""
        assert main(["run", "--method", "ica", "--data", str(tmp_path), "--out", str(tmp_path)]) == 2

    def test_bad_override_exit_code(self, tmp_path):
        """Invalid configuration values exit with 2."""
        code = main(["generate", "--out", str(tmp_path / "s"), *_overrides(tmp_path, "R1=abc")])
        assert code == 2


class TestGenerate:
    """Tests for the generate command."""

    def test_writes_scene_files(self, scenes):
        """Each seed directory holds the cube, the pan image and the ground truth."""
        for seed in (0, 1):
            d = scenes / f"seed_{seed}"
            assert read_matrix(d / "Y.bin").shape == (10, 64)
            assert read_matrix(d / "M_true.bin").shape == (10, 2)
            A = read_matrix(d / "A_true.bin")
            np.testing.assert_allclose(A.sum(axis=0), 1.0, atol=1e-12)
            assert (d / "pan.pgm").is_file()
            assert read_json(d / "scene.json")["seed"] == seed

    def test_single_region(self, tmp_path):
        """n_regions = 1 gives a constant label map."""
        out = tmp_path / "one"
        assert main(["generate", "--seed", "3", "--out", str(out),
                     *_overrides(tmp_path, "n_regions=1")]) == 0
        np.testing.assert_array_equal(read_matrix(out / "seed_3" / "labels.bin"), np.zeros((8, 8)))


class TestRun:
    """Tests for the run command."""

    @pytest.mark.parametrize("method", [v.value for v in Variant])
    def test_every_method_runs(self, tmp_path, scenes, method):
        """All methods finish and export their factors."""
        out = tmp_path / method
        code = main(["run", "--method", method, "--data", str(scenes), "--seed", "0",
                     "--out", str(out), *_overrides(tmp_path)])
        assert code == 0
        result = out / "seed_0"
        A = read_matrix(result / "A.bin")
        assert A.shape == (2, 64)
        assert (result / "abundance_0.pgm").is_file()
        assert (result / "objective_trace.csv").is_file()
        manifest = read_json(out / "manifest.json")
        assert manifest["method"] == method
        assert [run["seed"] for run in manifest["runs"]] == [0]

    def test_sp2u_exports_clusters(self, tmp_path, scenes):
        """SP2U writes every block and the cluster report."""
        out = tmp_path / "sp2u"
        assert main(["run", "--method", "sp2u", "--data", str(scenes / "seed_1"), "--seed", "1",
                     "--out", str(out), *_overrides(tmp_path)]) == 0
        result = out / "seed_1"
        for block, shape in {"M": (10, 2), "D": (9, 3), "U": (3, 64), "B": (5, 4), "Z": (4, 64)}.items():
            assert read_matrix(result / f"{block}.bin").shape == shape
        rows = (result / "clusters" / "clusters.csv").read_text().splitlines()
        assert rows[0] == "rank,cluster,population"
        assert sum(int(r.split(",")[2]) for r in rows[1:]) == 64

    def test_objective_trace_is_monotone(self, tmp_path, scenes):
        """The exported trace never goes up."""
        out = tmp_path / "trace"
        main(["run", "--method", "sp2u", "--data", str(scenes), "--seed", "0",
              "--out", str(out), *_overrides(tmp_path)])
        lines = (out / "seed_0" / "objective_trace.csv").read_text().splitlines()
        assert lines[0] == "iteration,objective,spectral,spatial,clustering,orthogonality"
        values = np.array([float(line.split(",")[1]) for line in lines[1:]])
        assert np.all(np.diff(values) <= 1e-9 + 1e-12 * np.abs(values[:-1]))

    def test_relaxed_variant_exports_normalized_abundances(self, tmp_path, scenes):
        """Without sum-to-one on A the normalized maps are written too."""
        out = tmp_path / "relaxed"
        assert main(["run", "--method", "nmf", "--data", str(scenes), "--seed", "0",
                     "--out", str(out), *_overrides(tmp_path, "sum_to_one_on_A=false")]) == 0
        A = read_matrix(out / "seed_0" / "A_normalized.bin")
        np.testing.assert_allclose(A.sum(axis=0), 1.0, atol=1e-12)
        np.testing.assert_allclose(read_matrix(out / "seed_0" / "M.bin").sum(axis=0), 1.0, atol=1e-12)

    def test_deterministic(self, tmp_path, scenes):
        """Two runs with the same seeds produce identical files."""
        outs = [tmp_path / "first", tmp_path / "second"]
        for out in outs:
            assert main(["run", "--method", "sp2u", "--data", str(scenes), "--seeds", "0..1",
                         "--out", str(out), *_overrides(tmp_path)]) == 0
        assert (outs[0] / "manifest.json").read_bytes() == (outs[1] / "manifest.json").read_bytes()
        for name in ("M.bin", "A.bin", "Z.bin"):
            assert (outs[0] / "seed_1" / name).read_bytes() == (outs[1] / "seed_1" / name).read_bytes()

    def test_missing_data_exit_code(self, tmp_path):
        """A scene directory without Y.bin exits with 3."""
        empty = tmp_path / "empty"
        empty.mkdir()
        code = main(["run", "--method", "nmf", "--data", str(empty), "--seed", "0",
                     "--out", str(tmp_path / "out"), *_overrides(tmp_path)])
        assert code == 3
        assert (tmp_path / "out" / "manifest.json").is_file()


class TestEval:
    """Tests for the eval command."""

    def test_metrics_file_with_mean_row(self, tmp_path, scenes):
        """metrics.csv has one row per seed, then mean and std."""
        out = tmp_path / "nmf"
        assert main(["run", "--method", "nmf", "--data", str(scenes), "--seeds", "0..1",
                     "--out", str(out), *_overrides(tmp_path)]) == 0
        assert main(["eval", "--truth", str(scenes), "--results", str(out),
                     *_overrides(tmp_path)]) == 0

        header, rows = _read_metrics(out / "metrics.csv")
        assert header == ["seed", "asam", "re", "rmse", "time_s", "permutation"]
        assert [row[0] for row in rows] == ["0", "1", "mean", "std"]
        for column in range(1, 5):
            per_seed = [float(rows[0][column]), float(rows[1][column])]
            assert float(rows[2][column]) == pytest.approx(np.mean(per_seed), rel=1e-12)
        assert float(rows[0][4]) > 0.0

    def test_truth_against_itself(self, tmp_path, scenes):
        """Scoring the ground truth as an estimate gives zero error."""
        results = tmp_path / "oracle"
        target = results / "seed_0"
        target.mkdir(parents=True)
        write_matrix(target / "M.bin", read_matrix(scenes / "seed_0" / "M_true.bin"))
        write_matrix(target / "A.bin", read_matrix(scenes / "seed_0" / "A_true.bin"))
        assert main(["eval", "--truth", str(scenes), "--results", str(results),
                     *_overrides(tmp_path)]) == 0

        _, rows = _read_metrics(results / "metrics.csv")
        asam_value, re_value, rmse_value = (float(v) for v in rows[0][1:4])
        assert asam_value == pytest.approx(0.0, abs=1e-7)
        assert rmse_value == 0.0
        assert re_value == pytest.approx(0.0, abs=1e-12)
        assert rows[0][5] == "0 1"

    def test_no_results_exit_code(self, tmp_path, scenes):
        """An empty results directory is a data error."""
        empty = tmp_path / "none"
        empty.mkdir()
        assert main(["eval", "--truth", str(scenes), "--results", str(empty),
                     *_overrides(tmp_path)]) == 3

    def test_missing_truth_exit_code(self, tmp_path, scenes):
        """A truth directory without the reference files is a data error."""
        out = tmp_path / "nmf"
        assert main(["run", "--method", "nmf", "--data", str(scenes), "--seed", "0",
                     "--out", str(out), *_overrides(tmp_path)]) == 0
        truth = tmp_path / "truth" / "seed_0"
        truth.mkdir(parents=True)
        assert main(["eval", "--truth", str(truth.parent), "--results", str(out),
                     *_overrides(tmp_path)]) == 3
