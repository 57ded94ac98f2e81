"""Panchromatic band synthesis and patch features."""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, DataError, DimensionMismatchError, ZeroMeanBandError
from .tensor_core import as_matrix

logger = logging.getLogger("spsu.features")

PAN_MAX = 255.0


@dataclass
class ImageCube:
    """Hyperspectral image stored band-major as ``values[band, row, col]``.

    Pixels are flattened row-major over ``(row, col)``: pixel ``p`` sits at
    ``row = p // width``, ``col = p % width``.
    """
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3 or min(self.values.shape) < 1:
            raise DataError(f"image cube must be a non-empty (bands, height, width) array, "
                            f"got shape {self.values.shape}")

    @property
    def bands(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]

    @property
    def n_pixels(self) -> int:
        return self.height * self.width

    def to_matrix(self) -> np.ndarray:
        """Flatten to the ``bands x P`` data matrix Y."""
        return self.values.reshape(self.bands, self.n_pixels).copy()

    @classmethod
    def from_matrix(cls, Y: np.ndarray, height: int, width: int) -> "ImageCube":
        """Fold a ``bands x P`` matrix back into a cube.

        Raises:
            DimensionMismatchError: If ``P != height * width``.
        """
        Y = as_matrix(Y)
        if Y.shape[1] != height * width:
            raise DimensionMismatchError("Y", Y.shape, "image", (height, width),
                                         "pixel count differs from height*width")
        return cls(Y.reshape(Y.shape[0], height, width).copy())


@dataclass
class PanchromaticImage:
    """Grayscale image with values in ``[0, 255]``."""
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or min(self.values.shape) < 1:
            raise DataError(f"panchromatic image must be a non-empty 2-D array, "
                            f"got shape {self.values.shape}")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def flatten(self) -> np.ndarray:
        """Row-major pixel vector, in the same order as the cube's columns."""
        return self.values.reshape(-1).copy()


def synthesize_panchromatic(cube: ImageCube, quantize: bool = False) -> PanchromaticImage:
    """Divide every band by its mean over the pixels, sum the bands and stretch to [0, 255].

    Args:
        cube: Hyperspectral image.
        quantize: Round to integers, giving an 8-bit image.

    Returns:
        PanchromaticImage spanning exactly ``[0, 255]``; all zeros for a constant image.

    Raises:
        ZeroMeanBandError: If a band has zero mean.
    """
    means = cube.values.mean(axis=(1, 2))
    zero = np.flatnonzero(means == 0)
    if zero.size:
        raise ZeroMeanBandError(int(zero[0]))

    summed = np.sum(cube.values / means[:, np.newaxis, np.newaxis], axis=0)
    lo, hi = float(summed.min()), float(summed.max())
    if hi == lo:
        logger.warning("constant panchromatic image; contrast stretch maps it to zeros")
        return PanchromaticImage(np.zeros_like(summed))

    pan = (summed - lo) * (PAN_MAX / (hi - lo))
    pan = np.clip(pan, 0.0, PAN_MAX)
    if quantize:
        pan = np.round(pan)
    return PanchromaticImage(pan)


def extract_patches(pan: PanchromaticImage, w: int) -> np.ndarray:
    """Vectorized ``w x w`` neighbourhood of every pixel.

    The image is extended by symmetric reflection at its borders. Within a
    patch, values are ordered row-major, so a column reshaped to ``(w, w)``
    renders the neighbourhood.

    Args:
        pan: Grayscale image.
        w: Odd patch size, at least 1.

    Returns:
        ``w**2 x P`` feature matrix, columns in pixel order.

    Raises:
        ConfigError: If ``w`` is even or smaller than 1.
    """
    if w < 1 or w % 2 == 0:
        raise ConfigError(f"patch size must be an odd integer >= 1, got {w}")
    half = w // 2
    padded = np.pad(pan.values, half, mode="symmetric")
    windows = sliding_window_view(padded, (w, w))
    P = pan.height * pan.width
    return np.ascontiguousarray(windows.reshape(P, w * w).T)


def patch_thumbnail(atom: np.ndarray, w: int) -> np.ndarray:
    """Reshape a patch-feature column into its ``w x w`` image."""
    atom = np.asarray(atom, dtype=np.float64).reshape(-1)
    if atom.size != w * w:
        raise DimensionMismatchError("atom", atom.shape, "patch", (w, w))
    return atom.reshape(w, w)
