"""Dense local descriptors: colour uniform-LBP histograms, gradient
orientation histograms and multiscale sampling.

Patches are fully interior (no padding). Per-pixel LBP codes and image
gradients use replicate borders.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from PIL import Image as PILImage

from .errors import FormatError, ValidationError

log = logging.getLogger(__name__)

LUMA = np.array([0.299, 0.587, 0.114])

# neighbour offsets (dy, dx), clockwise from east with y pointing down; bit i
# of the code belongs to entry i
LBP_NEIGHBOURS = ((0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1))


@dataclass(frozen=True)
class Image:
    """Row-major pixels in [0, 1], shape (height, width, channels)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] not in (1, 3) or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValidationError(f"image must be H x W x {{1,3}}, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or p.min() < 0 or p.max() > 1:
            raise ValidationError("pixel values must be finite and lie in [0, 1]")

    @classmethod
    def from_array(cls, arr) -> "Image":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        return cls(arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def gray(self) -> np.ndarray:
        if self.channels == 1:
            return self.pixels[:, :, 0]
        return self.pixels @ LUMA


def load_image(path) -> Image:
    """Decode an 8-bit PNG or PNM file (grayscale or RGB)."""
    try:
        with PILImage.open(path) as im:
            mode = "L" if im.mode in ("1", "L", "I", "I;16", "F") else "RGB"
            arr = np.asarray(im.convert(mode), dtype=np.float64) / 255.0
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot read image {path}: {exc}") from exc
    return Image.from_array(arr)


@dataclass(frozen=True)
class DescriptorSet:
    data: np.ndarray  # (N, D)
    positions: np.ndarray | None = None  # (N, 3): x, y, scale
    source_id: str = ""

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ValidationError(f"descriptor data must be 2-D, got shape {self.data.shape}")
        if self.positions is not None and self.positions.shape != (self.data.shape[0], 3):
            raise ValidationError("positions must hold one (x, y, scale) triple per descriptor")
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("descriptor data contain non-finite values")

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def _grid(length: int, patch: int, step: int) -> np.ndarray:
    return np.arange(0, length - patch + 1, step)


def uniform_patterns() -> np.ndarray:
    """All 8-bit codes with at most two circular 0/1 transitions, ascending."""
    codes = []
    for c in range(256):
        bits = [(c >> i) & 1 for i in range(8)]
        transitions = sum(bits[i] != bits[(i + 1) % 8] for i in range(8))
        if transitions <= 2:
            codes.append(c)
    return np.array(codes)


UNIFORM_PATTERNS = uniform_patterns()
LBP_BINS = UNIFORM_PATTERNS.size + 1
_CODE_TO_BIN = np.full(256, UNIFORM_PATTERNS.size, dtype=np.intp)
_CODE_TO_BIN[UNIFORM_PATTERNS] = np.arange(UNIFORM_PATTERNS.size)


def lbp_codes(channel: np.ndarray) -> np.ndarray:
    """Radius-1, 8-neighbour LBP code per pixel; a neighbour >= the centre
    sets its bit."""
    h, w = channel.shape
    padded = np.pad(channel, 1, mode="edge")
    codes = np.zeros((h, w), dtype=np.intp)
    for bit, (dy, dx) in enumerate(LBP_NEIGHBOURS):
        nb = padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        codes |= (nb >= channel).astype(np.intp) << bit
    return codes


def dense_lbp(image: Image, patch: int = 16, step: int = 8) -> DescriptorSet:
    """Per-channel 59-bin uniform LBP histograms over a dense patch grid,
    each L1-normalised, concatenated channel by channel (D = 177)."""
    if image.channels != 3:
        raise ValidationError(f"dense_lbp needs an RGB image, got {image.channels} channel(s)")
    if patch < 1 or step < 1:
        raise ValidationError("patch and step must be positive")
    if patch > min(image.width, image.height):
        raise ValidationError(f"patch {patch} exceeds image size {image.width}x{image.height}")
    ys, xs = _grid(image.height, patch, step), _grid(image.width, patch, step)
    n = ys.size * xs.size
    data = np.zeros((n, 3 * LBP_BINS))
    for c in range(3):
        bins = _CODE_TO_BIN[lbp_codes(image.pixels[:, :, c])]
        onehot = np.zeros(bins.shape + (LBP_BINS,))
        np.put_along_axis(onehot, bins[..., None], 1.0, axis=2)
        # integral image over the one-hot planes gives every patch histogram
        integral = np.zeros((bins.shape[0] + 1, bins.shape[1] + 1, LBP_BINS))
        integral[1:, 1:] = onehot.cumsum(0).cumsum(1)
        y0, x0 = np.meshgrid(ys, xs, indexing="ij")
        y0, x0 = y0.reshape(-1), x0.reshape(-1)
        hist = (integral[y0 + patch, x0 + patch] - integral[y0, x0 + patch]
                - integral[y0 + patch, x0] + integral[y0, x0])
        data[:, c * LBP_BINS:(c + 1) * LBP_BINS] = hist / (patch * patch)
    return DescriptorSet(data, _positions(ys, xs, patch, 1.0))


def _positions(ys: np.ndarray, xs: np.ndarray, patch: int, scale: float) -> np.ndarray:
    y0, x0 = np.meshgrid(ys, xs, indexing="ij")
    cy = (y0.reshape(-1) + patch / 2.0) / scale
    cx = (x0.reshape(-1) + patch / 2.0) / scale
    return np.column_stack([cx, cy, np.full(cx.size, scale)])


def image_gradients(gray: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central differences with replicated borders."""
    p = np.pad(gray, 1, mode="edge")
    gx = 0.5 * (p[1:-1, 2:] - p[1:-1, :-2])
    gy = 0.5 * (p[2:, 1:-1] - p[:-2, 1:-1])
    return gx, gy


def dense_gradhist(image: Image, bins: int = 8, cells: int = 4, cell_px: int = 4,
                   step: int = 4) -> DescriptorSet:
    """SIFT-like grid of magnitude-weighted orientation histograms.

    Orientations are folded into [0, pi); bin ``b`` is centred at
    ``b * pi / bins`` and each gradient is split linearly between the two
    nearest bins (circularly). Each descriptor is L2-normalised, clipped at
    0.2 and renormalised; an all-zero descriptor stays zero.
    """
    if min(bins, cells, cell_px, step) < 1:
        raise ValidationError("bins, cells, cell_px and step must be positive")
    patch = cells * cell_px
    if patch > min(image.width, image.height):
        raise ValidationError(f"patch {patch} exceeds image size {image.width}x{image.height}")
    gx, gy = image_gradients(image.gray())
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    pos = theta / (np.pi / bins)
    lo = np.floor(pos).astype(np.intp) % bins
    frac = pos - np.floor(pos)
    hi = (lo + 1) % bins
    h, w = mag.shape
    planes = np.zeros((h, w, bins))
    rr, cc = np.indices((h, w))
    planes[rr, cc, lo] = mag * (1.0 - frac)
    planes[rr, cc, hi] += mag * frac
    integral = np.zeros((h + 1, w + 1, bins))
    integral[1:, 1:] = planes.cumsum(0).cumsum(1)

    ys, xs = _grid(h, patch, step), _grid(w, patch, step)
    y0, x0 = np.meshgrid(ys, xs, indexing="ij")
    y0, x0 = y0.reshape(-1), x0.reshape(-1)
    out = np.empty((y0.size, cells, cells, bins))
    for i in range(cells):
        for j in range(cells):
            ya, xa = y0 + i * cell_px, x0 + j * cell_px
            yb, xb = ya + cell_px, xa + cell_px
            out[:, i, j] = (integral[yb, xb] - integral[ya, xb]
                            - integral[yb, xa] + integral[ya, xa])
    data = out.reshape(y0.size, -1)
    data = np.maximum(data, 0.0)  # cancels cumulative-sum round-off
    data = _sift_normalize(data)
    return DescriptorSet(data, _positions(ys, xs, patch, 1.0))


def _sift_normalize(data: np.ndarray, clip: float = 0.2) -> np.ndarray:
    norms = np.linalg.norm(data, axis=1, keepdims=True)
    nz = norms[:, 0] > 1e-12
    data = data.copy()
    data[~nz] = 0.0
    data[nz] = data[nz] / norms[nz]
    data[nz] = np.minimum(data[nz], clip)
    data[nz] = data[nz] / np.linalg.norm(data[nz], axis=1, keepdims=True)
    return data


def resize_bilinear(pixels: np.ndarray, ratio: float) -> np.ndarray:
    """Bilinear resampling by ``ratio`` using pixel-centre alignment."""
    h, w = pixels.shape[:2]
    nh, nw = max(1, int(round(h * ratio))), max(1, int(round(w * ratio)))
    if (nh, nw) == (h, w):
        return pixels.copy()

    def axis(n_out, n_in):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0, n_in - 1)
        i0 = np.floor(src).astype(np.intp)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, src - i0

    y0, y1, fy = axis(nh, h)
    x0, x1, fx = axis(nw, w)
    extra = (None,) * (pixels.ndim - 2)
    fy = fy[(slice(None), None) + extra]
    fx = fx[(None, slice(None)) + extra]
    top = pixels[y0][:, x0] * (1 - fx) + pixels[y0][:, x1] * fx
    bot = pixels[y1][:, x0] * (1 - fx) + pixels[y1][:, x1] * fx
    return np.clip(top * (1 - fy) + bot * fy, 0.0, 1.0)


def scale_ratios(num_scales: int = 7, ratio_max: float = 2.0, factor: float = np.sqrt(2.0)):
    return [ratio_max * factor ** -s for s in range(num_scales)]


def multiscale(image: Image, extractor: Callable[[Image], DescriptorSet], num_scales: int = 7,
               ratio_max: float = 2.0, factor: float = np.sqrt(2.0)) -> DescriptorSet:
    """Run ``extractor`` on bilinear resamplings of ``image`` at ratios
    ``ratio_max * factor**-s`` and stack the results scale by scale.

    Scales at which the image is too small for the extractor are skipped.
    Positions are reported in original-image coordinates.
    """
    if num_scales < 1:
        raise ValidationError("num_scales must be at least 1")
    sets = []
    for ratio in scale_ratios(num_scales, ratio_max, factor):
        scaled = Image(resize_bilinear(image.pixels, ratio))
        try:
            ds = extractor(scaled)
        except ValidationError as exc:
            log.warning("skipping scale %.3f: %s", ratio, exc)
            continue
        pos = ds.positions.copy()
        pos[:, :2] /= ratio
        pos[:, 2] = ratio
        sets.append(DescriptorSet(ds.data, pos))
    if not sets:
        raise ValidationError("image is too small for the extractor at every scale")
    return DescriptorSet(np.concatenate([s.data for s in sets]),
                         np.concatenate([s.positions for s in sets]))


EXTRACTORS = {
    "lbp": dense_lbp,
    "gradhist": dense_gradhist,
}
