"""
PolSAR Data Pipeline
====================
Synthetic complex-Wishart scenes, coherency-raster file I/O, patch
extraction, normalization and the per-class labeled / unlabeled split.

Pixel layout (9 reals per pixel, the CTM1 record order):
    T11, T22, T33, ReT12, ImT12, ReT13, ImT13, ReT23, ImT23

Patch layout (6 complex channels):
    T11, T22, T33, T12, T13, T23   (diagonal channels carry zero imaginary parts)
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la
from numpy.lib.stride_tricks import sliding_window_view

from .ctensor import ComplexTensor, concatenate
from .errors import (
    BadMagicError,
    ConfigError,
    DimensionOverflowError,
    FileFormatError,
    LayoutError,
    NonPsdSigmaError,
    QuotaError,
    ShapeMismatchError,
    TruncatedFileError,
)

logger = logging.getLogger(__name__)

PIXEL_FIELDS  = ("T11", "T22", "T33", "ReT12", "ImT12", "ReT13", "ImT13", "ReT23", "ImT23")
CHANNELS      = ("T11", "T22", "T33", "T12", "T13", "T23")
N_CHANNELS    = len(CHANNELS)
DEFAULT_LOOKS = 8
PSD_TOL       = 1e-9

CTM_MAGIC   = b"CTM1"
LBL_MAGIC   = b"LBL1"
HEADER_SIZE = 12
MAX_PIXELS  = 1 << 30

# (re index, im index or None) into the 9-float pixel record, per channel
_CHANNEL_SOURCE = ((0, None), (1, None), (2, None), (3, 4), (5, 6), (7, 8))
# (row, col) of each channel inside the 3x3 matrix
_CHANNEL_POS    = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


# ==============================================================================
# PIXELS AND MATRICES
# ==============================================================================

def pixel_to_matrix(pixel: np.ndarray) -> np.ndarray:
    """[..., 9] record -> [..., 3, 3] Hermitian complex matrix."""
    p = np.asarray(pixel, dtype=np.float64)
    T = np.zeros(p.shape[:-1] + (3, 3), dtype=np.complex128)
    for ch, ((r, c), (ire, iim)) in enumerate(zip(_CHANNEL_POS, _CHANNEL_SOURCE)):
        val = p[..., ire] + (1j * p[..., iim] if iim is not None else 0.0)
        T[..., r, c] = val
        if r != c:
            T[..., c, r] = np.conj(val)
    return T


def matrix_to_pixel(T: np.ndarray) -> np.ndarray:
    """[..., 3, 3] -> [..., 9]; only the diagonal and upper triangle are read."""
    T   = np.asarray(T)
    out = np.empty(T.shape[:-2] + (9,), dtype=np.float64)
    for (r, c), (ire, iim) in zip(_CHANNEL_POS, _CHANNEL_SOURCE):
        out[..., ire] = np.real(T[..., r, c])
        if iim is not None:
            out[..., iim] = np.imag(T[..., r, c])
    return out


def is_psd(T: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """
    Principal-minor PSD test on [..., 3, 3] matrices (or [..., 9] pixels).
    Returns a boolean array over the leading axes.
    """
    T = np.asarray(T)
    if T.shape[-1] == 9 and T.ndim >= 1 and T.shape[-2:] != (3, 3):
        T = pixel_to_matrix(T)
    ok = np.ones(T.shape[:-2], dtype=bool)
    for i in range(3):
        ok &= np.real(T[..., i, i]) >= -tol
    for i, j in ((0, 1), (0, 2), (1, 2)):
        sub = T[..., [i, j]][..., [i, j], :]
        ok &= np.real(np.linalg.det(sub)) >= -tol
    ok &= np.real(np.linalg.det(T)) >= -tol
    return ok


def _cholesky_factor(sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=np.complex128)
    if sigma.shape != (3, 3):
        raise ShapeMismatchError(f"sigma must be 3x3, got {sigma.shape}")
    if not np.allclose(sigma, sigma.conj().T):
        raise NonPsdSigmaError("sigma is not Hermitian", leading_minor=0)
    try:
        return la.cholesky(sigma, lower=True)
    except la.LinAlgError:
        for k in range(1, 4):
            minor = float(np.real(np.linalg.det(sigma[:k, :k])))
            if minor <= 0:
                raise NonPsdSigmaError(
                    f"sigma is not positive definite: leading minor {k} = {minor:.3g}",
                    leading_minor=k,
                ) from None
        raise NonPsdSigmaError("Cholesky factorization failed", leading_minor=3) from None


def _wishart_from_factor(factor: np.ndarray, looks: int, n: int,
                         rng: np.random.Generator) -> np.ndarray:
    g = (rng.standard_normal((n, looks, 3))
         + 1j * rng.standard_normal((n, looks, 3))) / np.sqrt(2.0)
    s = g @ factor.T                                   # rows are s_k = L g_k
    T = np.einsum("nli,nlj->nij", s, s.conj()) / looks
    return matrix_to_pixel(T)


def sample_wishart_batch(sigma: np.ndarray, looks: int, n: int,
                         rng: np.random.Generator) -> np.ndarray:
    """n independent draws of sample_wishart, returned as [n, 9] records."""
    if looks < 1:
        raise ConfigError(f"looks must be >= 1, got {looks}")
    return _wishart_from_factor(_cholesky_factor(sigma), looks, n, rng)


def sample_wishart(sigma: np.ndarray, looks: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw one coherency pixel T = (1/L) sum_k s_k s_k^H, s_k ~ CN(0, sigma).

    Parameters
    ----------
    sigma : 3x3 Hermitian positive definite matrix, E[T] = sigma
    looks : number of looks L >= 1
    rng   : np.random.Generator

    Returns
    -------
    np.ndarray [9]  pixel record
    """
    return sample_wishart_batch(sigma, looks, 1, rng)[0]


# ==============================================================================
# SYNTHETIC SCENES
# ==============================================================================

# diagonal scales (T11, T22, T33) and off-diagonal phases (T12, T13, T23)
_DEFAULT_DIAG = (
    (1.00, 0.30, 0.20),
    (0.25, 0.90, 0.35),
    (0.40, 0.25, 1.10),
    (1.60, 1.20, 0.15),
    (0.15, 0.45, 0.50),
    (0.70, 0.70, 0.70),
    (2.20, 0.40, 0.90),
    (0.50, 1.80, 1.30),
)
_DEFAULT_PHASE = (
    ( 0.0,  0.5, -0.3),
    ( 1.2, -0.8,  0.4),
    (-1.5,  2.0,  1.0),
    ( 2.5, -2.2, -1.1),
    ( 0.7,  1.4,  2.6),
    (-2.8, -0.4,  0.9),
    ( 1.9,  2.9, -2.4),
    (-0.9, -1.7,  1.8),
)
_DEFAULT_RHO = (0.30, 0.20, 0.15)


def default_class_sigmas(num_classes: int) -> list:
    """Built-in diagonal-dominant class covariances; seed-independent."""
    if num_classes > len(_DEFAULT_DIAG):
        raise ConfigError(
            f"only {len(_DEFAULT_DIAG)} built-in class sigmas; "
            f"pass class_sigmas for {num_classes} classes"
        )
    sigmas = []
    for diag, phase in zip(_DEFAULT_DIAG[:num_classes], _DEFAULT_PHASE[:num_classes]):
        d = np.sqrt(np.asarray(diag))
        R = np.eye(3, dtype=np.complex128)
        for (i, j), rho, phi in zip(((0, 1), (0, 2), (1, 2)), _DEFAULT_RHO, phase):
            R[i, j] = rho * np.exp(1j * phi)
            R[j, i] = np.conj(R[i, j])
        sigmas.append(d[:, None] * R * d[None, :])
    return sigmas


def layout_grid(layout: Union[str, np.ndarray], num_classes: int) -> np.ndarray:
    """
    Block grid of class ids.

    'stripes' -> one row of K vertical stripes.
    'blocks'  -> ceil(sqrt(K)) columns, classes assigned row-major and
                 cycled to fill the grid.
    An explicit 2-D integer array is used as is.
    """
    if isinstance(layout, str):
        if layout == "stripes":
            grid = np.arange(1, num_classes + 1)[None, :]
        elif layout == "blocks":
            cols = math.ceil(math.sqrt(num_classes))
            rows = math.ceil(num_classes / cols)
            grid = (np.arange(rows * cols) % num_classes + 1).reshape(rows, cols)
        else:
            raise LayoutError(f"unknown layout {layout!r}; expected 'blocks' or 'stripes'")
    else:
        grid = np.asarray(layout, dtype=np.int64)
        if grid.ndim != 2 or grid.size == 0:
            raise LayoutError(f"layout grid must be a non-empty 2-D array, got {grid.shape}")

    present = set(np.unique(grid).tolist())
    if not present <= set(range(1, num_classes + 1)):
        raise LayoutError(f"layout uses classes {sorted(present)} but K = {num_classes}")
    if len(present) != num_classes:
        missing = sorted(set(range(1, num_classes + 1)) - present)
        raise LayoutError(f"layout grid never places classes {missing}")
    return grid


def render_layout(grid: np.ndarray, height: int, width: int) -> np.ndarray:
    rows, cols = grid.shape
    if rows > height or cols > width:
        raise LayoutError(f"{rows}x{cols} layout does not fit a {height}x{width} raster")
    ry = np.arange(height) * rows // height
    cx = np.arange(width) * cols // width
    return grid[ry[:, None], cx[None, :]].astype(np.int16)


@dataclass
class CoherencyRaster:
    """
    H x W grid of coherency pixels plus labels (0 = unlabeled, 1..K classes).

    pixels : np.ndarray [H, W, 9] float32
    labels : np.ndarray [H, W] int16
    """

    pixels: np.ndarray
    labels: np.ndarray = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 9:
            raise ShapeMismatchError(f"pixels must be [H, W, 9], got {self.pixels.shape}")
        if self.labels is None:
            self.labels = np.zeros(self.pixels.shape[:2], dtype=np.int16)
        self.labels = np.asarray(self.labels, dtype=np.int16)
        if self.labels.shape != self.pixels.shape[:2]:
            raise ShapeMismatchError(
                f"label grid {self.labels.shape} does not match pixel grid {self.pixels.shape[:2]}"
            )
        if self.labels.size and self.labels.min() < 0:
            raise ShapeMismatchError("labels must be >= 0")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0

    def psd_mask(self, tol: float = PSD_TOL) -> np.ndarray:
        return is_psd(self.pixels, tol=tol)


def generate_scene(
    num_classes:  int,
    class_sigmas: Optional[Sequence[np.ndarray]] = None,
    layout:       Union[str, np.ndarray] = "blocks",
    looks:        int = DEFAULT_LOOKS,
    seed:         int = 0,
    height:       int = 128,
    width:        int = 128,
) -> CoherencyRaster:
    """
    Synthetic labeled scene, every pixel Wishart-sampled from its class sigma.

    Parameters
    ----------
    num_classes  : K >= 2
    class_sigmas : K pairwise-distinct Hermitian PD matrices; built-in table if None
    layout       : 'blocks', 'stripes' or an explicit block grid of class ids
    looks        : number of looks L
    seed         : rows draw from SeedSequence(seed).spawn(height), so any row
                   can be generated independently of the others

    Returns
    -------
    CoherencyRaster
    """
    if num_classes < 2:
        raise ConfigError(f"a scene needs at least 2 classes, got {num_classes}")
    sigmas = default_class_sigmas(num_classes) if class_sigmas is None else list(class_sigmas)
    if len(sigmas) != num_classes:
        raise LayoutError(f"{len(sigmas)} class sigmas given for K = {num_classes}")
    for a in range(num_classes):
        for b in range(a + 1, num_classes):
            if np.allclose(sigmas[a], sigmas[b]):
                raise ConfigError(f"class sigmas {a + 1} and {b + 1} are identical")

    factors = [_cholesky_factor(s) for s in sigmas]
    labels  = render_layout(layout_grid(layout, num_classes), height, width)
    pixels  = np.empty((height, width, 9), dtype=np.float32)
    streams = np.random.SeedSequence(seed).spawn(height)

    for y in range(height):
        rng = np.random.default_rng(streams[y])
        row = labels[y]
        for c in range(1, num_classes + 1):
            cols = np.flatnonzero(row == c)
            if cols.size:
                pixels[y, cols] = _wishart_from_factor(factors[c - 1], looks, cols.size, rng)

    logger.info(f"[synth] {height}x{width} scene, K={num_classes}, L={looks}, seed={seed}")
    return CoherencyRaster(pixels, labels)


# ==============================================================================
# PATCHES
# ==============================================================================

@dataclass
class Patch:
    data:   ComplexTensor    # [6, P, P]
    label:  int
    center: Tuple[int, int] = (0, 0)


@dataclass
class PatchSet:
    """Batched patches: data [N, 6, P, P], labels [N], centers [N, 2]."""

    data:    ComplexTensor
    labels:  np.ndarray
    centers: np.ndarray = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.centers is None:
            self.centers = np.zeros((len(self.labels), 2), dtype=np.int64)
        if self.data.shape[0] != len(self.labels):
            raise ShapeMismatchError(
                f"{self.data.shape[0]} patches but {len(self.labels)} labels"
            )

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i: int) -> Patch:
        return Patch(self.data[i], int(self.labels[i]), tuple(self.centers[i]))

    @property
    def patch_size(self) -> int:
        return self.data.shape[-1]

    def subset(self, idx) -> "PatchSet":
        idx = np.asarray(idx, dtype=np.int64)
        return PatchSet(self.data[idx], self.labels[idx], self.centers[idx])

    def strip_labels(self) -> "PatchSet":
        return PatchSet(self.data, np.zeros_like(self.labels), self.centers)

    def astype(self, dtype) -> "PatchSet":
        return PatchSet(self.data.astype(dtype), self.labels, self.centers)


def raster_to_planes(pixels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """[H, W, 9] -> (re, im), each [6, H, W] float64."""
    p  = np.asarray(pixels, dtype=np.float64)
    re = np.stack([p[..., ire] for ire, _ in _CHANNEL_SOURCE])
    im = np.stack([p[..., iim] if iim is not None else np.zeros(p.shape[:2])
                   for _, iim in _CHANNEL_SOURCE])
    return re, im


def planes_to_pixels(re: np.ndarray, im: np.ndarray) -> np.ndarray:
    """(re, im) [6, H, W] -> [H, W, 9]; imaginary parts of diagonal channels are dropped."""
    out = np.empty(re.shape[1:] + (9,), dtype=np.float64)
    for ch, (ire, iim) in enumerate(_CHANNEL_SOURCE):
        out[..., ire] = re[ch]
        if iim is not None:
            out[..., iim] = im[ch]
    return out


def extract_patches(raster: CoherencyRaster, patch_size: int,
                    stride: Optional[int] = None) -> PatchSet:
    """
    Sliding-window patches; each takes the label of its center pixel
    (row top + P // 2, column left + P // 2).

    Parameters
    ----------
    raster     : CoherencyRaster
    patch_size : P
    stride     : window step, defaults to P (non-overlapping)
    """
    P      = patch_size
    stride = stride or P
    if stride < 1 or P < 1:
        raise ConfigError(f"patch size and stride must be >= 1, got {P}, {stride}")
    if raster.height < P or raster.width < P:
        raise ShapeMismatchError(
            f"raster {raster.height}x{raster.width} is smaller than patch size {P}"
        )
    re, im = raster_to_planes(raster.pixels)
    win_re = sliding_window_view(re, (P, P), axis=(1, 2))[:, ::stride, ::stride]
    win_im = sliding_window_view(im, (P, P), axis=(1, 2))[:, ::stride, ::stride]
    ny, nx = win_re.shape[1:3]
    data_re = win_re.transpose(1, 2, 0, 3, 4).reshape(ny * nx, N_CHANNELS, P, P)
    data_im = win_im.transpose(1, 2, 0, 3, 4).reshape(ny * nx, N_CHANNELS, P, P)

    tops, lefts = np.meshgrid(np.arange(ny) * stride, np.arange(nx) * stride, indexing="ij")
    centers = np.stack([tops.ravel() + P // 2, lefts.ravel() + P // 2], axis=1)
    labels  = raster.labels[centers[:, 0], centers[:, 1]]
    return PatchSet(ComplexTensor(data_re.copy(), data_im.copy()), labels, centers)


def patches_to_matrices(patches: PatchSet) -> np.ndarray:
    """[N, 6, P, P] channels -> [N, P, P, 3, 3] coherency matrices."""
    d = patches.data
    T = np.zeros((len(patches),) + d.shape[2:] + (3, 3), dtype=np.complex128)
    for ch, (r, c) in enumerate(_CHANNEL_POS):
        val = d.re[:, ch] + 1j * d.im[:, ch]
        T[..., r, c] = val
        if r != c:
            T[..., c, r] = np.conj(val)
    return T


def tile_patches(patches: Union[PatchSet, ComplexTensor],
                 ncols: Optional[int] = None) -> CoherencyRaster:
    """
    Tile patches row-major into one raster (default: a single row).
    Unfilled cells of the last row stay zero; labels are carried per tile.
    """
    if isinstance(patches, PatchSet):
        data, labels = patches.data, patches.labels
    else:
        data, labels = patches, np.zeros(patches.shape[0], dtype=np.int64)
    n, _, P, _ = data.shape
    ncols = ncols or n
    nrows = math.ceil(n / ncols)
    re = np.zeros((N_CHANNELS, nrows * P, ncols * P))
    im = np.zeros_like(re)
    lab = np.zeros((nrows * P, ncols * P), dtype=np.int16)
    for k in range(n):
        r, c = divmod(k, ncols)
        re[:, r * P:(r + 1) * P, c * P:(c + 1) * P] = data.re[k]
        im[:, r * P:(r + 1) * P, c * P:(c + 1) * P] = data.im[k]
        lab[r * P:(r + 1) * P, c * P:(c + 1) * P] = labels[k]
    return CoherencyRaster(planes_to_pixels(re, im), lab)


# ==============================================================================
# SPLITS
# ==============================================================================

@dataclass(frozen=True)
class SplitSpec:
    """
    Per-class labeled quota (exactly one of ratio / count), unlabeled
    fraction of all patches, and the split seed.
    """

    labeled_ratio:      Optional[float] = None
    labeled_count:      Optional[int] = None
    unlabeled_fraction: float = 0.1
    seed:               int = 0

    def __post_init__(self):
        if (self.labeled_ratio is None) == (self.labeled_count is None):
            raise ConfigError("give exactly one of labeled_ratio and labeled_count")
        if self.labeled_ratio is not None and not 0 < self.labeled_ratio <= 1:
            raise ConfigError(f"labeled_ratio must be in (0, 1], got {self.labeled_ratio}")
        if self.labeled_count is not None and self.labeled_count < 1:
            raise ConfigError(f"labeled_count must be >= 1, got {self.labeled_count}")
        if not 0 <= self.unlabeled_fraction <= 1:
            raise ConfigError(
                f"unlabeled_fraction must be in [0, 1], got {self.unlabeled_fraction}"
            )

    def quota(self, population: int) -> int:
        """Count as given; ratio -> floor(ratio * N), at least 1."""
        if self.labeled_count is not None:
            return self.labeled_count
        return max(1, math.floor(self.labeled_ratio * population + 1e-9))


@dataclass
class Splits:
    labeled:   PatchSet
    unlabeled: PatchSet
    test:      PatchSet
    classes:   list = field(default_factory=list)


def split(patches: PatchSet, spec: SplitSpec,
          rng: Optional[np.random.Generator] = None) -> Splits:
    """
    Draw per-class labeled quotas without replacement; the rest of each
    class is the test set. The unlabeled pool is a fraction of ALL patches,
    labeled or not, with labels stripped.
    """
    rng     = rng if rng is not None else np.random.default_rng(spec.seed)
    labels  = patches.labels
    classes = sorted(int(c) for c in np.unique(labels[labels > 0]))

    lab_idx, test_idx = [], []
    for c in classes:
        members = np.flatnonzero(labels == c)
        q       = spec.quota(len(members))
        if q > len(members):
            raise QuotaError(
                f"class {c} has {len(members)} patches, quota {q} cannot be met",
                class_id=c,
            )
        perm = rng.permutation(members)
        lab_idx.append(np.sort(perm[:q]))
        test_idx.append(np.sort(perm[q:]))
        if q == len(members):
            logger.warning(f"[split] class {c}: every patch is labeled, test set empty")
        logger.info(f"[split] class {c}: {q} labeled, {len(members) - q} test")

    n_unl   = math.floor(spec.unlabeled_fraction * len(patches) + 1e-9)
    unl_idx = np.sort(rng.choice(len(patches), size=n_unl, replace=False))

    empty = np.zeros(0, dtype=np.int64)
    return Splits(
        labeled   = patches.subset(np.concatenate(lab_idx) if lab_idx else empty),
        unlabeled = patches.subset(unl_idx).strip_labels(),
        test      = patches.subset(np.concatenate(test_idx) if test_idx else empty),
        classes   = classes,
    )


# ==============================================================================
# NORMALIZATION
# ==============================================================================

@dataclass
class NormalizationStats:
    """Per channel, per plane: mean and std arrays of shape [6, 2] (re, im)."""

    mean:    np.ndarray
    std:     np.ndarray
    epsilon: float = 1e-8

    def scale(self) -> np.ndarray:
        return np.maximum(self.std, self.epsilon)


def fit_normalization(*sets: PatchSet, epsilon: float = 1e-8) -> NormalizationStats:
    """Fit on the training pools only (labeled + unlabeled)."""
    data = concatenate([s.data for s in sets if len(s)])
    axes = (0, 2, 3)
    mean = np.stack([data.re.mean(axis=axes), data.im.mean(axis=axes)], axis=1)
    std  = np.stack([data.re.std(axis=axes), data.im.std(axis=axes)], axis=1)
    return NormalizationStats(mean.astype(np.float64), std.astype(np.float64), epsilon)


def _affine(x: ComplexTensor, stats: NormalizationStats, inverse: bool) -> ComplexTensor:
    mean  = stats.mean.reshape(1, N_CHANNELS, 2, 1, 1)
    scale = stats.scale().reshape(1, N_CHANNELS, 2, 1, 1)
    if inverse:
        re = x.re * scale[:, :, 0] + mean[:, :, 0]
        im = x.im * scale[:, :, 1] + mean[:, :, 1]
    else:
        re = (x.re - mean[:, :, 0]) / scale[:, :, 0]
        im = (x.im - mean[:, :, 1]) / scale[:, :, 1]
    return ComplexTensor(re.astype(x.dtype), im.astype(x.dtype))


def normalize(patches: Union[PatchSet, ComplexTensor],
              stats: NormalizationStats) -> Union[PatchSet, ComplexTensor]:
    if isinstance(patches, PatchSet):
        return PatchSet(_affine(patches.data, stats, False), patches.labels, patches.centers)
    return _affine(patches, stats, False)


def denormalize(patches: Union[PatchSet, ComplexTensor],
                stats: NormalizationStats) -> Union[PatchSet, ComplexTensor]:
    if isinstance(patches, PatchSet):
        return PatchSet(_affine(patches.data, stats, True), patches.labels, patches.centers)
    return _affine(patches, stats, True)


# ==============================================================================
# FILE I/O
# ==============================================================================

def _write_header(magic: bytes, height: int, width: int) -> bytes:
    return magic + np.array([height, width], dtype="<u4").tobytes()


def _read_header(buf: bytes, magic: bytes, path) -> Tuple[int, int]:
    if len(buf) < HEADER_SIZE:
        raise TruncatedFileError(
            f"{path}: header needs {HEADER_SIZE} bytes, file has {len(buf)}",
            expected=HEADER_SIZE, actual=len(buf),
        )
    if buf[:4] != magic:
        raise BadMagicError(f"{path}: expected magic {magic!r}, found {buf[:4]!r}")
    height, width = (int(v) for v in np.frombuffer(buf, dtype="<u4", count=2, offset=4))
    if height == 0 or width == 0:
        raise FileFormatError(f"{path}: empty raster {height}x{width}")
    if height * width > MAX_PIXELS:
        raise DimensionOverflowError(
            f"{path}: {height}x{width} exceeds the {MAX_PIXELS}-pixel limit"
        )
    return height, width


def _read_payload(buf: bytes, path, n_bytes: int) -> None:
    expected = HEADER_SIZE + n_bytes
    if len(buf) < expected:
        raise TruncatedFileError(
            f"{path}: expected {expected} bytes, file has {len(buf)}",
            expected=expected, actual=len(buf),
        )
    if len(buf) > expected:
        raise FileFormatError(f"{path}: {len(buf) - expected} trailing bytes after payload")


def save_raster(raster: CoherencyRaster, path, labels_path=None) -> None:
    """Write CTM1 pixels and, when labels_path is given, LBL1 labels."""
    h, w = raster.height, raster.width
    Path(path).write_bytes(
        _write_header(CTM_MAGIC, h, w) + raster.pixels.astype("<f4").tobytes()
    )
    if labels_path is not None:
        Path(labels_path).write_bytes(
            _write_header(LBL_MAGIC, h, w) + raster.labels.astype("<i2").tobytes()
        )


def load_raster(path, labels_path=None) -> CoherencyRaster:
    """
    Read a CTM1 file (and optionally its LBL1 labels).

    Raises
    ------
    BadMagicError, TruncatedFileError, DimensionOverflowError, FileFormatError
    """
    buf  = Path(path).read_bytes()
    h, w = _read_header(buf, CTM_MAGIC, path)
    _read_payload(buf, path, h * w * 9 * 4)
    pixels = np.frombuffer(buf, dtype="<f4", offset=HEADER_SIZE).astype(np.float32)
    pixels = pixels.reshape(h, w, 9)

    labels = None
    if labels_path is not None:
        lbuf   = Path(labels_path).read_bytes()
        lh, lw = _read_header(lbuf, LBL_MAGIC, labels_path)
        if (lh, lw) != (h, w):
            raise FileFormatError(
                f"labels {lh}x{lw} ({labels_path}) do not match raster {h}x{w} ({path})"
            )
        _read_payload(lbuf, labels_path, h * w * 2)
        labels = np.frombuffer(lbuf, dtype="<i2", offset=HEADER_SIZE).astype(np.int16)
        labels = labels.reshape(h, w)
        if labels.min() < 0:
            raise FileFormatError(f"{labels_path}: negative labels")
    return CoherencyRaster(pixels, labels)
