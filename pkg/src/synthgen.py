"""Synthetic benchmark scenes: Potts region maps, textured abundances and noiseless cubes."""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ConfigError, DataError
from .features import ImageCube, PanchromaticImage, synthesize_panchromatic
from .tensor_core import as_matrix

TEXTURE_KINDS = ("smoothed-noise", "stripes", "checker-blur")
TEXTURE_RANGE = (0.05, 0.95)
WAVELENGTH_RANGE = (400.0, 2500.0)
PSI_TOL = 1e-12


def _neighbor_counts(labels: np.ndarray, J: int) -> np.ndarray:
    """Number of 4-neighbours carrying each label, shape ``(J, H, W)``."""
    onehot = (labels[np.newaxis, :, :] == np.arange(J)[:, np.newaxis, np.newaxis]).astype(np.float64)
    counts = np.zeros_like(onehot)
    counts[:, 1:, :] += onehot[:, :-1, :]
    counts[:, :-1, :] += onehot[:, 1:, :]
    counts[:, :, 1:] += onehot[:, :, :-1]
    counts[:, :, :-1] += onehot[:, :, 1:]
    return counts


def sample_potts(height: int, width: int, J: int, beta: float, sweeps: int = 200,
                 seed: int = 0) -> np.ndarray:
    """Draw a label map from a Potts random field by Gibbs sampling.

    Sites are updated in checkerboard order: all sites of one colour are
    conditionally independent given the other colour, so each half-sweep is a
    single vectorized draw.

    Args:
        height: Rows of the map.
        width: Columns of the map.
        J: Number of classes.
        beta: Interaction strength (0 gives independent uniform labels).
        sweeps: Number of full Gibbs sweeps.
        seed: Random seed.

    Returns:
        Integer array of shape ``(height, width)`` with values in ``[0, J)``.

    Raises:
        ConfigError: On invalid sizes, ``J``, ``beta`` or ``sweeps``.
    """
    if height < 1 or width < 1:
        raise ConfigError(f"label map must be at least 1x1, got {height}x{width}")
    if J < 1:
        raise ConfigError(f"number of classes must be >= 1, got {J}")
    if beta < 0:
        raise ConfigError(f"potts_beta must be >= 0, got {beta}")
    if sweeps < 1:
        raise ConfigError(f"potts_sweeps must be >= 1, got {sweeps}")

    if J == 1:
        return np.zeros((height, width), dtype=np.int64)

    rng = np.random.default_rng(seed)
    labels = rng.integers(0, J, size=(height, width))
    rows, cols = np.indices((height, width))
    colours = [(rows + cols) % 2 == 0, (rows + cols) % 2 == 1]

    for _ in range(sweeps):
        for mask in colours:
            logits = beta * _neighbor_counts(labels, J)[:, mask]
            logits -= logits.max(axis=0, keepdims=True)
            prob = np.exp(logits)
            cdf = np.cumsum(prob / prob.sum(axis=0, keepdims=True), axis=0)
            u = rng.random(logits.shape[1])
            labels[mask] = np.minimum((u[np.newaxis, :] >= cdf).sum(axis=0), J - 1)

    return labels.astype(np.int64)


def _rescale(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    span = x.max() - x.min()
    if span == 0:
        return np.full_like(x, 0.5 * (lo + hi))
    out = lo + (x - x.min()) * ((hi - lo) / span)
    return np.clip(out, lo, hi)


def make_texture(height: int, width: int, kind: str, seed: int = 0, period: float = 16.0,
                 blur_sigma: float = 5.0, cell: int = 8) -> np.ndarray:
    """Procedural grayscale texture with values in ``[0.05, 0.95]``.

    Kinds:
        smoothed-noise: Gaussian-blurred white noise (``blur_sigma``).
        stripes: Vertical sinusoidal grating with the given ``period`` in pixels.
        checker-blur: Checkerboard of ``cell``-pixel squares, blurred.

    Raises:
        ConfigError: If ``kind`` is unknown.
    """
    rng = np.random.default_rng(seed)
    if kind == "smoothed-noise":
        raw = gaussian_filter(rng.standard_normal((height, width)), blur_sigma, mode="wrap")
    elif kind == "stripes":
        phase = rng.uniform(0.0, 2.0 * np.pi)
        cols = np.arange(width, dtype=np.float64)
        raw = np.broadcast_to(np.sin(2.0 * np.pi * cols / period + phase), (height, width)).copy()
    elif kind == "checker-blur":
        dr, dc = rng.integers(0, 2 * cell, size=2)
        rows, cols = np.indices((height, width))
        board = (((rows + dr) // cell + (cols + dc) // cell) % 2).astype(np.float64)
        raw = gaussian_filter(board, blur_sigma / 2.0, mode="reflect")
    else:
        raise ConfigError(f"unknown texture kind {kind!r} (choose from {', '.join(TEXTURE_KINDS)})")
    return _rescale(raw, *TEXTURE_RANGE)


def wavelengths(n_bands: int) -> np.ndarray:
    """Band centres in nanometres, evenly spread over 400-2500 nm."""
    return np.linspace(*WAVELENGTH_RANGE, n_bands)


def synthetic_library(n_bands: int = 100, R1: int = 4, seed: int = 0) -> np.ndarray:
    """Smooth reflectance-like spectra built from Gaussian absorption and emission bumps.

    Returns:
        ``n_bands x R1`` matrix with entries in ``(0, 1]``.
    """
    if n_bands < 2 or R1 < 1:
        raise ConfigError(f"library needs n_bands >= 2 and R1 >= 1, got {n_bands}, {R1}")
    rng = np.random.default_rng(seed)
    lam = wavelengths(n_bands)
    lo, hi = WAVELENGTH_RANGE
    spectra = np.empty((n_bands, R1))
    for r in range(R1):
        n_bumps = int(rng.integers(3, 6))
        centres = rng.uniform(lo, hi, n_bumps)
        widths = rng.uniform(100.0, 400.0, n_bumps)
        amplitudes = rng.uniform(-0.4, 1.0, n_bumps)
        curve = rng.uniform(0.2, 0.5) + np.sum(
            amplitudes[:, np.newaxis]
            * np.exp(-0.5 * ((lam[np.newaxis, :] - centres[:, np.newaxis]) / widths[:, np.newaxis]) ** 2),
            axis=0,
        )
        spectra[:, r] = curve
    spectra -= spectra.min() - 0.05
    return spectra / spectra.max()


def _fit_texture(texture: np.ndarray, height: int, width: int) -> np.ndarray:
    """Tile a texture that is too small and crop one that is too large."""
    texture = np.asarray(texture, dtype=np.float64)
    reps = (-(-height // texture.shape[0]), -(-width // texture.shape[1]))
    return np.tile(texture, reps)[:height, :width]


@dataclass
class SyntheticSceneSpec:
    """Recipe of a synthetic scene.

    ``psi[j, 0]`` and ``psi[j, 1]`` are the two extreme abundance vectors of
    region ``j``; when omitted they are drawn from a Dirichlet distribution.
    Textures are generated from ``texture_kinds`` when omitted.
    """
    height: int
    width: int
    n_regions: int
    endmembers: np.ndarray
    potts_beta: float = 1.0
    potts_sweeps: int = 200
    psi: Optional[np.ndarray] = None
    textures: Optional[List[np.ndarray]] = None
    texture_kinds: Tuple[str, ...] = TEXTURE_KINDS
    psi_concentration: float = 1.0
    quantize_pan: bool = False
    seed: int = 0

    def __post_init__(self):
        self.endmembers = as_matrix(self.endmembers)
        self.validate()

    @property
    def R1(self) -> int:
        return self.endmembers.shape[1]

    def validate(self) -> None:
        """Check the recipe.

        Raises:
            ConfigError: On invalid sizes or texture kinds.
            DataError: If a psi vector is off the simplex or a texture leaves [0, 1].
        """
        if self.n_regions < 1:
            raise ConfigError(f"n_regions must be >= 1, got {self.n_regions}")
        if np.any(self.endmembers < 0):
            raise DataError("endmember library has negative reflectance")
        for kind in self.texture_kinds:
            if kind not in TEXTURE_KINDS:
                raise ConfigError(f"unknown texture kind {kind!r}")
        if not self.texture_kinds and self.textures is None:
            raise ConfigError("texture_kinds is empty and no textures were given")
        if self.psi_concentration <= 0:
            raise ConfigError(f"psi_concentration must be > 0, got {self.psi_concentration}")

        if self.psi is not None:
            psi = np.asarray(self.psi, dtype=np.float64)
            expected = (self.n_regions, 2, self.R1)
            if psi.shape != expected:
                raise DataError(f"psi must have shape {expected}, got {psi.shape}")
            if psi.min() < -PSI_TOL or np.max(np.abs(psi.sum(axis=2) - 1.0)) > PSI_TOL:
                raise DataError("every psi vector must lie on the probability simplex")
            self.psi = psi

        if self.textures is not None:
            if len(self.textures) != self.n_regions:
                raise DataError(f"need one texture per region ({self.n_regions}), "
                                f"got {len(self.textures)}")
            for j, t in enumerate(self.textures):
                t = np.asarray(t, dtype=np.float64)
                if t.ndim != 2 or t.min() < 0.0 or t.max() > 1.0:
                    raise DataError(f"texture {j} must be a 2-D image with values in [0, 1]")


@dataclass
class SyntheticScene:
    """Generated scene with its ground truth."""
    labels: np.ndarray
    abundances: np.ndarray
    cube: ImageCube
    pan: PanchromaticImage
    psi: np.ndarray
    textures: List[np.ndarray] = field(default_factory=list)
    endmembers: Optional[np.ndarray] = None

    @property
    def Y(self) -> np.ndarray:
        return self.cube.to_matrix()


def synthesize_scene(spec: SyntheticSceneSpec) -> SyntheticScene:
    """Generate region map, abundances, cube and panchromatic image for ``spec``.

    Each pixel ``p`` in region ``j`` gets ``a_p = t_p psi[j, 0] + (1 - t_p) psi[j, 1]``
    where ``t`` is the region's texture, and ``y_p = M a_p`` with no noise.
    """
    potts_seed, psi_seed, texture_seed = np.random.SeedSequence(spec.seed).generate_state(3)
    H, W, J = spec.height, spec.width, spec.n_regions

    labels = sample_potts(H, W, J, spec.potts_beta, spec.potts_sweeps, int(potts_seed))

    if spec.psi is not None:
        psi = spec.psi
    else:
        rng = np.random.default_rng(int(psi_seed))
        psi = rng.dirichlet(np.full(spec.R1, spec.psi_concentration), size=(J, 2))

    if spec.textures is not None:
        textures = [_fit_texture(t, H, W) for t in spec.textures]
    else:
        kinds = spec.texture_kinds
        textures = [
            make_texture(H, W, kinds[j % len(kinds)], seed=int(texture_seed) + j)
            for j in range(J)
        ]

    flat_labels = labels.reshape(-1)
    t = np.stack(textures).reshape(J, -1)[flat_labels, np.arange(H * W)]
    A = psi[flat_labels, 0, :].T * t + psi[flat_labels, 1, :].T * (1.0 - t)

    Y = spec.endmembers @ A
    cube = ImageCube.from_matrix(Y, H, W)
    pan = synthesize_panchromatic(cube, quantize=spec.quantize_pan)
    return SyntheticScene(
        labels=labels,
        abundances=A,
        cube=cube,
        pan=pan,
        psi=psi,
        textures=textures,
        endmembers=spec.endmembers,
    )


def default_scene_spec(height: int, width: int, n_regions: int, n_bands: int, R1: int,
                       seed: int, texture_kinds: Sequence[str] = TEXTURE_KINDS,
                       library: Optional[np.ndarray] = None, **kwargs) -> SyntheticSceneSpec:
    """Scene recipe over ``library``, or over a generated one of ``n_bands x R1`` when omitted."""
    if library is None:
        library = synthetic_library(n_bands, R1, seed)
    return SyntheticSceneSpec(height=height, width=width, n_regions=n_regions,
                              endmembers=library, texture_kinds=tuple(texture_kinds),
                              seed=seed, **kwargs)
