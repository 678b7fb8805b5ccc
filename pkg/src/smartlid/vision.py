"""Thermal-vision pipeline: normalization, heat-map rendering, segmentation,
component statistics, contours, and the pixel-mass growth proxy.

Raw thermal frames are uint16 radiometric counts in centikelvin
(kelvin * 100), the usual convention for radiometric cameras. All rounding
is to nearest with halves away from zero; HSV hue is scaled to 0..255 over
0..360 degrees and YUV is full-range BT.601 with a 128 chroma offset, so
golden tests can be bit-exact.
"""

import importlib.resources
from dataclasses import dataclass

import numpy as np

from . import kernels
from .images import ColorImage, GrayImage

KELVIN_OFFSET_C = 273.15
DEFAULT_MIXED_DELTA = 20  # intensity change marking a pixel as "mixed"
DEFAULT_MIN_COMPONENT_AREA = 25  # px; speckle filter ahead of the proxy
CONTOUR_COLOR = (255, 0, 0)


class VisionError(ValueError):
    pass


def _round_half_up(x: np.ndarray) -> np.ndarray:
    # inputs are guaranteed non-negative, so half-up == half away from zero
    return np.floor(x + 0.5)


# -- thermal normalization and heat map --------------------------------------


def celsius_to_raw(t_c) -> np.ndarray:
    """Temperature in degrees C -> uint16 centikelvin counts."""
    counts = _round_half_up((np.asarray(t_c, dtype=np.float64) + KELVIN_OFFSET_C) * 100.0)
    return np.clip(counts, 0, 65535).astype(np.uint16)


def raw_to_celsius(raw) -> np.ndarray:
    """uint16 centikelvin counts -> temperature in degrees C."""
    return np.asarray(raw, dtype=np.float64) / 100.0 - KELVIN_OFFSET_C


def normalize_thermal(raw: np.ndarray, t_lo: float, t_hi: float) -> GrayImage:
    """Map a raw thermal grid onto 0..255 over the [t_lo, t_hi] C window.

    Linear map with clamping: 255 * clamp((t - t_lo)/(t_hi - t_lo), 0, 1),
    rounded to nearest (halves up).
    """
    if not t_lo < t_hi:
        raise VisionError(f"degenerate thermal window [{t_lo}, {t_hi}]")
    t = raw_to_celsius(raw)
    u = np.clip((t - t_lo) / (t_hi - t_lo), 0.0, 1.0)
    return GrayImage(_round_half_up(u * 255.0).astype(np.uint8))


_INFERNO_TABLE: np.ndarray | None = None


def inferno_table() -> np.ndarray:
    """256x3 uint8 heat-map table shipped with the package."""
    global _INFERNO_TABLE
    if _INFERNO_TABLE is None:
        text = (
            importlib.resources.files("smartlid.data")
            .joinpath("inferno_rgb.txt")
            .read_text(encoding="utf-8")
        )
        rows = [
            [int(v) for v in line.split()]
            for line in text.splitlines()
            if line and not line.startswith("#")
        ]
        table = np.array(rows, dtype=np.uint8)
        if table.shape != (256, 3):
            raise VisionError(f"inferno table has shape {table.shape}, want (256, 3)")
        _INFERNO_TABLE = table
    return _INFERNO_TABLE


def apply_inferno(g: GrayImage) -> ColorImage:
    """Per-pixel lookup of the 256-entry inferno table; output tagged RGB."""
    return ColorImage(inferno_table()[g.pixels], colorspace="RGB")


# -- colorspace transforms ----------------------------------------------------


def _as_rgb(c: ColorImage) -> np.ndarray:
    if c.colorspace == "RGB":
        return c.pixels.astype(np.float64)
    if c.colorspace == "BGR":
        return c.pixels[:, :, ::-1].astype(np.float64)
    raise VisionError(f"expected an RGB/BGR image, got {c.colorspace}")


def rgb_to_hsv(c: ColorImage) -> ColorImage:
    """HSV with hue scaled to 0..255 over 0..360 degrees; S, V in 0..255."""
    rgb = _as_rgb(c)
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    v = rgb.max(axis=2)
    diff = v - rgb.min(axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        h_deg = np.select(
            [diff == 0, v == r, v == g],
            [
                0.0,
                60.0 * np.mod((g - b) / diff, 6.0),
                60.0 * ((b - r) / diff + 2.0),
            ],
            default=60.0 * ((r - g) / diff + 4.0),
        )
        s = np.where(v > 0, diff / v * 255.0, 0.0)
    out = np.stack(
        [
            _round_half_up(h_deg * 255.0 / 360.0),
            _round_half_up(s),
            v,
        ],
        axis=2,
    )
    return ColorImage(out.astype(np.uint8), colorspace="HSV")


def rgb_to_yuv(c: ColorImage) -> ColorImage:
    """Full-range BT.601 YUV: U = 0.492(B-Y)+128, V = 0.877(R-Y)+128."""
    rgb = _as_rgb(c)
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    u = 0.492 * (b - y) + 128.0
    v = 0.877 * (r - y) + 128.0
    out = np.stack([y, u, v], axis=2)
    out = _round_half_up(np.clip(out, 0.0, 255.0))
    return ColorImage(out.astype(np.uint8), colorspace="YUV")


# -- segmentation -------------------------------------------------------------


@dataclass(frozen=True)
class Histogram256:
    """Intensity histogram feeding threshold selection."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (256,):
            raise VisionError("histogram must have exactly 256 bins")
        if (counts < 0).any():
            raise VisionError("histogram counts must be >= 0")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def of_image(cls, g: GrayImage) -> "Histogram256":
        return cls(np.bincount(g.pixels.ravel(), minlength=256))


def otsu_threshold(h: Histogram256) -> int:
    """Threshold maximizing inter-class variance; ties break to smallest t.

    Classes split as background <= t < foreground, matching segment(). The
    maximization runs in exact integer arithmetic: with W0, S0 the count and
    intensity sum at or below t, and N, S the totals, the inter-class
    variance is proportional to (S0*N - S*W0)^2 / (W0*(N - W0)), so
    candidates compare exactly by cross-multiplication.
    """
    counts = [int(v) for v in h.counts]
    n_total = sum(counts)
    s_total = sum(i * v for i, v in enumerate(counts))
    if sum(1 for v in counts if v > 0) < 2:
        raise VisionError("degenerate histogram: fewer than two occupied bins")
    best_t = -1
    best_num = 0  # (S0*N - S*W0)^2
    best_den = 1  # W0*(N - W0)
    w0 = 0
    s0 = 0
    for t in range(256):
        w0 += counts[t]
        s0 += t * counts[t]
        if w0 == 0 or w0 == n_total:
            continue
        num = (s0 * n_total - s_total * w0) ** 2
        den = w0 * (n_total - w0)
        if best_t < 0 or num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def segment(g: GrayImage, t: int) -> np.ndarray:
    """Boolean foreground mask: pixels strictly brighter than t."""
    return g.pixels > t


# -- connected components and contours ----------------------------------------


@dataclass(frozen=True)
class LabelImage:
    """Row-major component labels; 0 is background, labels run 1..count."""

    labels: np.ndarray
    count: int

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class Component:
    label: int
    area: int
    centroid: tuple[float, float]  # (row, col), arithmetic mean of pixels
    bbox: tuple[int, int, int, int]  # (row_min, col_min, row_max, col_max)


@dataclass(frozen=True)
class ComponentSet:
    components: tuple[Component, ...]

    def __len__(self) -> int:
        return len(self.components)

    def total_area(self) -> int:
        return sum(c.area for c in self.components)


def connected_components(mask: np.ndarray) -> tuple[LabelImage, ComponentSet]:
    """8-connectivity labeling with per-component statistics.

    Labels are deterministic: numbered in the order components are first
    met in a row-major scan.
    """
    mask8 = np.ascontiguousarray(np.asarray(mask).astype(np.uint8))
    labels, count = kernels.label_components(mask8)
    areas, cr, cc, bbox = kernels.component_stats(labels, count)
    comps = tuple(
        Component(
            label=k + 1,
            area=int(areas[k]),
            centroid=(float(cr[k]), float(cc[k])),
            bbox=(int(bbox[k, 0]), int(bbox[k, 1]), int(bbox[k, 2]), int(bbox[k, 3])),
        )
        for k in range(count)
    )
    return LabelImage(labels, count), ComponentSet(comps)


def filter_components(cs: ComponentSet, min_area: int = DEFAULT_MIN_COMPONENT_AREA) -> ComponentSet:
    """Drop speckle components below min_area; label ids are kept as-is."""
    return ComponentSet(tuple(c for c in cs.components if c.area >= min_area))


def extract_contours(mask: np.ndarray) -> list[np.ndarray]:
    """Outer border of each component: Moore boundary tracing, clockwise,
    from the component's topmost-leftmost pixel. One (n, 2) array of
    (row, col) pixels per component, in label order.
    """
    mask8 = np.ascontiguousarray(np.asarray(mask).astype(np.uint8))
    labels, count = kernels.label_components(mask8)
    flat = labels.ravel()
    fg = np.flatnonzero(flat)
    contours: list[np.ndarray] = []
    if count == 0:
        return contours
    _, first_pos = np.unique(flat[fg], return_index=True)
    width = labels.shape[1]
    for k in range(1, count + 1):
        start = int(fg[first_pos[k - 1]])
        contours.append(
            kernels.trace_contour(labels, k, start // width, start % width)
        )
    return contours


def overlay_contours(
    base: ColorImage,
    contours: list[np.ndarray],
    color: tuple[int, int, int] = CONTOUR_COLOR,
) -> ColorImage:
    """Recolor exactly the contour pixels; everything else is untouched."""
    px = base.pixels.copy()
    h, w = px.shape[:2]
    for contour in contours:
        pts = np.asarray(contour)
        if len(pts) == 0:
            continue
        if (
            pts[:, 0].min() < 0
            or pts[:, 1].min() < 0
            or pts[:, 0].max() >= h
            or pts[:, 1].max() >= w
        ):
            raise VisionError("contour pixel out of image bounds")
        px[pts[:, 0], pts[:, 1]] = color
    return ColorImage(px, colorspace=base.colorspace)


# -- growth proxy and mixing metrics ------------------------------------------


def growth_proxy(cs: ComponentSet) -> int:
    """Pixel-mass proxy for larvae biomass: total segmented component area."""
    return cs.total_area()


def mixed_mask(
    before: GrayImage, after: GrayImage, delta: int = DEFAULT_MIXED_DELTA
) -> np.ndarray:
    """Pixels whose intensity changed by more than delta between frames."""
    if before.pixels.shape != after.pixels.shape:
        raise VisionError("frame sizes differ")
    diff = np.abs(after.pixels.astype(np.int16) - before.pixels.astype(np.int16))
    return diff > delta


@dataclass(frozen=True)
class MixReport:
    """Aeration quality metrics from mixed/unmixed pixel counts."""

    mixed_pixels: int
    unmixed_pixels: int
    coverage_fraction: float
    efficacy_ratio: float | None = None


def mix_report(
    mixed_px: int, unmixed_px: int, baseline_mixed_px: int | None = None
) -> MixReport:
    """Coverage = mixed/(mixed+unmixed); efficacy = mixed/baseline."""
    if mixed_px < 0 or unmixed_px < 0:
        raise VisionError("pixel counts must be >= 0")
    total = mixed_px + unmixed_px
    if total == 0:
        raise VisionError("mixed + unmixed must be > 0")
    efficacy = None
    if baseline_mixed_px is not None:
        if baseline_mixed_px <= 0:
            raise VisionError("baseline_mixed_px must be > 0")
        efficacy = mixed_px / baseline_mixed_px
    return MixReport(mixed_px, unmixed_px, mixed_px / total, efficacy)
