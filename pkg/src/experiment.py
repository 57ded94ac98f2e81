"""Experiment orchestration: scene generation, per-seed runs, exports and evaluation."""

import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import ExperimentConfig, get_thread_count
from .errors import DataError, DimensionMismatchError, UnmixingError
from .features import ImageCube, PanchromaticImage, extract_patches, synthesize_panchromatic
from .file_formats import read_json, read_matrix, read_pgm, write_json, write_matrix, write_pgm
from .initialization import initialize
from .logger import ExperimentLogger
from .metrics import EvalReport, evaluate, summarize_clusters
from .model import (
    BLOCK_ORDER,
    FactorState,
    ProblemSpec,
    Variant,
    eval_smooth,
    normalize_abundances,
)
from .solver import SolveResult, solve
from .synthgen import SyntheticScene, default_scene_spec, synthesize_scene, synthetic_library
from .utils import create_output_dir, seed_dir

TERM_NAMES = ("spectral", "spatial", "clustering", "orthogonality")
METRIC_COLUMNS = ("asam", "re", "rmse", "time_s")
SEED_DIR = re.compile(r"^seed_(\d+)$")


@dataclass
class MethodResult:
    """Outcome of initialization plus solve for one seed."""
    seed: int
    spec: ProblemSpec
    state: FactorState
    initial_objective: float
    solve_result: Optional[SolveResult]
    wall_time: float
    height: int
    width: int

    @property
    def iterations(self) -> int:
        return self.solve_result.iterations if self.solve_result else 0

    @property
    def converged(self) -> bool:
        return self.solve_result.converged if self.solve_result else True

    @property
    def final_objective(self) -> float:
        return self.solve_result.final_objective if self.solve_result else self.initial_objective


@dataclass
class RunManifest:
    """Deterministic record of a multi-seed run.

    Aggregates are recomputed from ``metrics`` by ``aggregate_rows``.
    """
    config: Dict[str, object]
    method: str
    seeds: List[int]
    runs: List[Dict[str, object]] = field(default_factory=list)
    metrics: List[Dict[str, object]] = field(default_factory=list)

    @property
    def aggregate(self) -> Dict[str, Dict[str, float]]:
        return aggregate_rows(self.metrics, ("asam", "re", "rmse"))

    def to_dict(self) -> Dict[str, object]:
        return {
            "config": self.config,
            "method": self.method,
            "seeds": self.seeds,
            "runs": self.runs,
            "metrics": self.metrics,
            "aggregate": self.aggregate,
        }

    def write(self, path: Path) -> None:
        write_json(path, self.to_dict())


def aggregate_rows(rows: Sequence[Dict[str, object]],
                   columns: Sequence[str] = METRIC_COLUMNS) -> Dict[str, Dict[str, float]]:
    """Mean and population standard deviation of numeric columns over rows.

    Args:
        rows: Per-seed records.
        columns: Keys to aggregate.

    Returns:
        ``{"mean": {...}, "std": {...}}``; empty dicts when there are no rows.
    """
    if not rows:
        return {"mean": {}, "std": {}}
    table = np.array([[float(row[c]) for c in columns] for row in rows])
    return {
        "mean": {c: float(v) for c, v in zip(columns, table.mean(axis=0))},
        "std": {c: float(v) for c, v in zip(columns, table.std(axis=0))},
    }


class ExperimentRunner:
    """Generates scenes, runs unmixing methods and evaluates them, one seed at a time."""

    def __init__(self, config: ExperimentConfig, logger: Optional[ExperimentLogger] = None):
        """Initialize runner.

        Args:
            config: Experiment configuration.
            logger: Logger for experiment events.
        """
        self.config = config
        self.logger = logger
        self.stats = {
            'total': 0,
            'generated': 0,
            'solved': 0,
            'not_converged': 0,
            'evaluated': 0,
            'errors': 0
        }
        self._stats_lock = threading.Lock()

    def _count(self, key: str) -> None:
        with self._stats_lock:
            self.stats[key] += 1

    # scenes

    def load_library(self, seed: int) -> np.ndarray:
        """Endmember library: the configured file, or generated spectra.

        Raises:
            DataError: If the library file has fewer than ``R1`` spectra.
        """
        cfg = self.config
        if cfg.library_path is None:
            return synthetic_library(cfg.n_bands, cfg.R1, seed)
        library = read_matrix(cfg.library_path)
        if library.shape[1] < cfg.R1:
            raise DataError(
                f"library {cfg.library_path} holds {library.shape[1]} spectra, R1={cfg.R1} requested"
            )
        if library.shape[0] <= cfg.R1:
            raise DataError(f"library {cfg.library_path} has too few bands ({library.shape[0]})")
        return library[:, :cfg.R1].copy()

    def build_scene(self, seed: int) -> SyntheticScene:
        """Generate the synthetic scene of one seed."""
        cfg = self.config
        spec = default_scene_spec(
            cfg.height, cfg.width, cfg.n_regions, cfg.n_bands, cfg.R1, seed,
            texture_kinds=cfg.texture_kinds,
            library=self.load_library(seed),
            potts_beta=cfg.potts_beta,
            potts_sweeps=cfg.potts_sweeps,
            psi_concentration=cfg.psi_concentration,
            quantize_pan=cfg.quantize_pan,
        )
        return synthesize_scene(spec)

    def export_scene(self, scene: SyntheticScene, out_dir: Path, seed: int) -> Path:
        """Write a scene and its ground truth to ``out_dir``.

        Returns:
            The directory written.
        """
        out_dir = create_output_dir(out_dir)
        write_matrix(out_dir / "Y.bin", scene.Y)
        write_matrix(out_dir / "pan.bin", scene.pan.values)
        write_pgm(out_dir / "pan.pgm", scene.pan.values)
        write_matrix(out_dir / "M_true.bin", scene.endmembers)
        write_matrix(out_dir / "A_true.bin", scene.abundances)
        write_matrix(out_dir / "labels.bin", scene.labels.astype(np.float64))
        write_json(out_dir / "scene.json", {
            "height": scene.cube.height,
            "width": scene.cube.width,
            "bands": scene.cube.bands,
            "regions": self.config.n_regions,
            "endmembers": int(scene.endmembers.shape[1]),
            "seed": seed,
        })
        return out_dir

    def generate(self, out_dir: Path, seeds: Optional[Sequence[int]] = None,
                 on_seed: Optional[Callable[[int], None]] = None) -> List[Path]:
        """Generate and export one scene per seed under ``out_dir/seed_<n>``."""
        seeds = list(seeds) if seeds is not None else self.config.seed_list
        self.stats['total'] = len(seeds)
        written = []
        for seed in seeds:
            scene = self.build_scene(seed)
            path = self.export_scene(scene, seed_dir(Path(out_dir), seed), seed)
            self._count("generated")
            if self.logger:
                self.logger.log_generated(seed, path, scene.cube.values.shape)
            if on_seed:
                on_seed(seed)
            written.append(path)
        return written

    # runs

    @staticmethod
    def resolve_data_dir(data_dir: Path, seed: int) -> Path:
        """Per-seed scene directory when present, else ``data_dir`` itself."""
        candidate = seed_dir(Path(data_dir), seed)
        return candidate if candidate.is_dir() else Path(data_dir)

    def load_data(self, data_dir: Path) -> Tuple[np.ndarray, PanchromaticImage]:
        """Read ``Y`` and the panchromatic image of a scene directory.

        The image comes from ``pan.bin``, else from the 8-bit ``pan.pgm``, else it is
        synthesized from the cube folded to the size recorded in ``scene.json``.

        Raises:
            DataError: If ``Y.bin`` is missing, or no image and no ``scene.json`` exist.
            DimensionMismatchError: If ``pan`` does not hold one value per pixel.
        """
        data_dir = Path(data_dir)
        if not (data_dir / "Y.bin").is_file():
            raise DataError(f"no Y.bin in scene directory {data_dir}")
        Y = read_matrix(data_dir / "Y.bin")
        if (data_dir / "pan.bin").is_file():
            pan = PanchromaticImage(read_matrix(data_dir / "pan.bin"))
        elif (data_dir / "pan.pgm").is_file():
            pan = PanchromaticImage(read_pgm(data_dir / "pan.pgm"))
        else:
            meta = read_json(data_dir / "scene.json")
            cube = ImageCube.from_matrix(Y, int(meta["height"]), int(meta["width"]))
            pan = synthesize_panchromatic(cube, quantize=self.config.quantize_pan)
        if pan.height * pan.width != Y.shape[1]:
            raise DimensionMismatchError("Y", Y.shape, "pan", pan.values.shape,
                                         "pixel counts differ")
        return Y, pan

    def build_problem(self, Y: np.ndarray, pan: PanchromaticImage) -> ProblemSpec:
        """Problem of the configured method, with renormalized weights."""
        cfg = self.config
        variant = cfg.variant
        S = None
        if variant in (Variant.SP2U, Variant.NSP2U):
            S = extract_patches(pan, cfg.patch_size)
        return ProblemSpec(
            Y=Y,
            S=S,
            R1=cfg.R1,
            R2=cfg.R2,
            K=cfg.K,
            weights=cfg.renormalized_weights(Y, S),
            variant=variant,
            sum_to_one_on_A=cfg.sum_to_one_on_A,
        )

    def run_method(self, Y: np.ndarray, pan: PanchromaticImage, seed: int,
                   on_iteration: Optional[Callable[[int, float], None]] = None) -> MethodResult:
        """Initialize and solve; wall time covers both."""
        start = time.perf_counter()
        spec = self.build_problem(Y, pan)
        state = initialize(spec, seed)
        f0 = eval_smooth(spec, state)
        if self.logger:
            self.logger.log_initialized(seed, spec.variant.value, f0)

        result = None
        if spec.variant is not Variant.FCLS:
            result = solve(spec, state, self.config.solver_config(), on_iteration)
            state = result.state
        wall_time = time.perf_counter() - start

        outcome = MethodResult(seed=seed, spec=spec, state=state, initial_objective=f0,
                               solve_result=result, wall_time=wall_time,
                               height=pan.height, width=pan.width)
        self._count("solved")
        if not outcome.converged:
            self._count("not_converged")
        if self.logger:
            self.logger.log_solved(seed, spec.variant.value, outcome.iterations,
                                   outcome.converged, outcome.final_objective, wall_time)
        return outcome

    def export_result(self, outcome: MethodResult, out_dir: Path) -> Dict[str, List[float]]:
        """Write factors, abundance maps, the objective trace and cluster summaries.

        Returns:
            ``{pgm file name: [min, max]}`` scale of every grayscale map written.
        """
        out_dir = create_output_dir(out_dir)
        state = outcome.state
        H, W = outcome.height, outcome.width
        scales: Dict[str, List[float]] = {}

        for block in BLOCK_ORDER:
            value = state.get(block)
            if value is not None:
                write_matrix(out_dir / f"{block.value}.bin", value)

        for r in range(state.A.shape[0]):
            name = f"abundance_{r}.pgm"
            scales[name] = list(write_pgm(out_dir / name, state.A[r].reshape(H, W)))

        if not outcome.spec.sum_to_one_on_A:
            A_norm = normalize_abundances(state.A)
            write_matrix(out_dir / "A_normalized.bin", A_norm)
            for r in range(A_norm.shape[0]):
                name = f"abundance_normalized_{r}.pgm"
                scales[name] = list(write_pgm(out_dir / name, A_norm[r].reshape(H, W)))

        self._write_trace(outcome, out_dir / "objective_trace.csv")

        if state.B is not None and state.Z is not None:
            scales.update(self._export_clusters(outcome, out_dir))
        return scales

    @staticmethod
    def _write_trace(outcome: MethodResult, path: Path) -> None:
        lines = ["iteration,objective," + ",".join(TERM_NAMES)]
        if outcome.solve_result is not None:
            for k, (f, terms) in enumerate(zip(outcome.solve_result.objective_trace,
                                               outcome.solve_result.term_trace)):
                values = ",".join(repr(float(terms[t])) for t in TERM_NAMES)
                lines.append(f"{k},{float(f)!r},{values}")
        else:
            lines.append(f"0,{outcome.initial_objective!r}," + ",".join("nan" for _ in TERM_NAMES))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    def _export_clusters(self, outcome: MethodResult, out_dir: Path) -> Dict[str, List[float]]:
        H, W = outcome.height, outcome.width
        patch = self.config.patch_size if outcome.spec.variant is Variant.SP2U else None
        summaries = summarize_clusters(outcome.state, patch)
        cluster_dir = create_output_dir(out_dir / "clusters")
        scales: Dict[str, List[float]] = {}

        rows = ["rank,cluster,population"]
        spectra = np.column_stack([s.spectral_signature for s in summaries])
        write_matrix(cluster_dir / "spectral_signatures.bin", spectra)
        for rank, summary in enumerate(summaries):
            rows.append(f"{rank},{summary.index},{summary.population}")
            mask_name = f"cluster_{summary.index}_mask.pgm"
            write_pgm(cluster_dir / mask_name, summary.mask.reshape(H, W).astype(np.float64))
            if summary.thumbnail is not None:
                name = f"cluster_{summary.index}_spatial.pgm"
                scales[f"clusters/{name}"] = list(write_pgm(cluster_dir / name, summary.thumbnail))
        (cluster_dir / "clusters.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        return scales

    def _truth_metrics(self, data_dir: Path, Y: np.ndarray,
                       outcome: MethodResult) -> Optional[EvalReport]:
        m_path, a_path = data_dir / "M_true.bin", data_dir / "A_true.bin"
        if not (m_path.is_file() and a_path.is_file()):
            return None
        return evaluate(Y, read_matrix(m_path), read_matrix(a_path), outcome.state.M,
                        self._reported_abundances(outcome), outcome.wall_time,
                        A_model=outcome.state.A)

    @staticmethod
    def _reported_abundances(outcome: MethodResult) -> np.ndarray:
        if outcome.spec.sum_to_one_on_A:
            return outcome.state.A
        return normalize_abundances(outcome.state.A)

    def run_seed(self, data_dir: Path, out_dir: Path, seed: int,
                 on_iteration: Optional[Callable[[int, float], None]] = None):
        """Run, export and (when ground truth is present) score one seed."""
        source = self.resolve_data_dir(data_dir, seed)
        Y, pan = self.load_data(source)
        outcome = self.run_method(Y, pan, seed, on_iteration)
        target = seed_dir(Path(out_dir), seed)
        scales = self.export_result(outcome, target)
        if self.logger:
            self.logger.log_exported(seed, target, sum(1 for p in target.rglob("*") if p.is_file()))
        report = self._truth_metrics(source, Y, outcome)
        return outcome, scales, report

    def run_seeds(self, data_dir: Path, out_dir: Path, seeds: Optional[Sequence[int]] = None,
                  on_seed: Optional[Callable[[int], None]] = None) -> RunManifest:
        """Run the configured method on every seed, in parallel up to ``SPSU_THREADS``.

        Each seed writes to its own ``seed_<n>`` directory; ``manifest.json`` and
        ``timings.json`` are written once all seeds finish.

        Raises:
            UnmixingError: The first failure among the seeds, after all have finished.
        """
        seeds = list(seeds) if seeds is not None else self.config.seed_list
        self.stats['total'] = len(seeds)
        out_dir = create_output_dir(out_dir)

        def task(seed: int):
            try:
                return seed, self.run_seed(data_dir, out_dir, seed), None
            except (UnmixingError, OSError) as e:
                return seed, None, e
            finally:
                if on_seed:
                    on_seed(seed)

        with ThreadPoolExecutor(max_workers=min(get_thread_count(), len(seeds))) as pool:
            results = sorted(pool.map(task, seeds), key=lambda item: item[0])

        manifest = RunManifest(config=self.config.as_dict(), method=self.config.method, seeds=seeds)
        timings = {}
        first_error = None
        for seed, payload, error in results:
            if error is not None:
                self._count("errors")
                if self.logger:
                    self.logger.log_error(seed, error)
                first_error = first_error or error
                continue
            outcome, scales, report = payload
            timings[str(seed)] = outcome.wall_time
            manifest.runs.append({
                "seed": seed,
                "iterations": outcome.iterations,
                "converged": outcome.converged,
                "initial_objective": outcome.initial_objective,
                "final_objective": outcome.final_objective,
                "pgm_scales": scales,
            })
            if report is not None:
                manifest.metrics.append({"seed": seed, "asam": report.asam, "re": report.re,
                                         "rmse": report.rmse,
                                         "permutation": [int(i) for i in report.permutation]})

        manifest.write(out_dir / "manifest.json")
        write_json(out_dir / "timings.json", {"wall_time_s": timings})
        if self.logger:
            self.logger.log_summary(self.stats)
        if first_error is not None:
            raise first_error
        return manifest

    # evaluation

    @staticmethod
    def discover_seeds(results_dir: Path) -> List[int]:
        """Seeds of the ``seed_<n>`` directories under ``results_dir``, sorted."""
        found = []
        for child in Path(results_dir).iterdir():
            match = SEED_DIR.match(child.name)
            if match and child.is_dir():
                found.append(int(match.group(1)))
        return sorted(found)

    def evaluate(self, truth_dir: Path, results_dir: Path,
                 seeds: Optional[Sequence[int]] = None) -> List[Tuple[int, EvalReport]]:
        """Score every result seed against ground truth and write ``metrics.csv``.

        Seeds whose result directory holds no ``M.bin`` are skipped.

        Raises:
            DataError: If no results are found.
            DimensionMismatchError: If an estimate does not match its ground truth.
        """
        results_dir = Path(results_dir)
        seeds = list(seeds) if seeds is not None else self.discover_seeds(results_dir)
        if not seeds:
            raise DataError(f"no seed_<n> result directories under {results_dir}")

        timings = {}
        timing_path = results_dir / "timings.json"
        if timing_path.is_file():
            timings = read_json(timing_path).get("wall_time_s", {})

        reports = []
        for seed in seeds:
            truth = self.resolve_data_dir(truth_dir, seed)
            result = seed_dir(results_dir, seed)
            if not (result / "M.bin").is_file():
                if self.logger:
                    self.logger.log_skip(seed, f"no M.bin in {result}")
                continue
            Y = read_matrix(truth / "Y.bin")
            M_ref = read_matrix(truth / "M_true.bin")
            A_ref = read_matrix(truth / "A_true.bin")
            M = read_matrix(result / "M.bin")
            A_model = read_matrix(result / "A.bin")
            a_norm = result / "A_normalized.bin"
            A = read_matrix(a_norm) if a_norm.is_file() else A_model
            if M.shape != M_ref.shape:
                raise DimensionMismatchError("M_true", M_ref.shape, "M", M.shape,
                                             f"seed {seed}")
            if A.shape != A_ref.shape:
                raise DimensionMismatchError("A_true", A_ref.shape, "A", A.shape,
                                             f"seed {seed}")
            if A_model.shape != A.shape:
                raise DimensionMismatchError("A_normalized", A.shape, "A", A_model.shape,
                                             f"seed {seed}")
            report = evaluate(Y, M_ref, A_ref, M, A, float(timings.get(str(seed), 0.0)),
                              A_model=A_model)
            reports.append((seed, report))
            self._count("evaluated")
            if self.logger:
                self.logger.log_evaluated(seed, report.asam, report.re, report.rmse)

        if not reports:
            raise DataError(f"no estimates to evaluate under {results_dir}")
        self.write_metrics(results_dir / "metrics.csv", reports)
        return reports

    @staticmethod
    def write_metrics(path: Path, reports: Sequence[Tuple[int, EvalReport]]) -> None:
        """Write per-seed metric rows followed by ``mean`` and ``std`` rows."""
        rows = [dict(seed=seed, **report.as_row()) for seed, report in reports]
        lines = ["seed," + ",".join(METRIC_COLUMNS) + ",permutation"]
        for row in rows:
            values = ",".join(repr(float(row[c])) for c in METRIC_COLUMNS)
            lines.append(f"{row['seed']},{values},{row['permutation']}")
        aggregate = aggregate_rows(rows)
        for label in ("mean", "std"):
            values = ",".join(repr(aggregate[label][c]) for c in METRIC_COLUMNS)
            lines.append(f"{label},{values},")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def get_stats(self) -> Dict[str, int]:
        """Get current run statistics.

        Returns:
            Statistics dictionary.
        """
        return self.stats.copy()
