import io
from dataclasses import dataclass
from typing import Tuple

import matplotlib
import numpy as np
from matplotlib.colors import to_rgb
from matplotlib.figure import Figure

from regionlab.models.errors import UnsupportedStyleError
from regionlab.models.network import NetworkModel, forward_batch, pattern_digest

STYLES = ("region", "class")
FORMATS = ("ppm", "svg")
CLASS_COLORS = [
    "#09b542",
    "#008fd5",
    "#fc4f30",
    "#e5ae38",
    "#810f7c",
    "#6d904f",
    "#8b8b8b",
    "#e377c2",
    "#17becf",
    "#bcbd22",
]
BOUNDARY_RGB = (128, 128, 128)
OUTSIDE_RGB = (255, 255, 255)


@dataclass(frozen=True)
class SlicePlane:
    """Plane origin + s * u + t * v sampled at the centers of a W x H pixel grid"""

    origin: np.ndarray
    u: np.ndarray
    v: np.ndarray
    extent: Tuple[float, float, float, float] = (-1.0, 1.0, -1.0, 1.0)
    resolution: Tuple[int, int] = (200, 200)

    def __post_init__(self):
        for name in ("origin", "u", "v"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64).reshape(-1))
        if abs(np.linalg.norm(self.u) - 1.0) > 1e-9 or abs(np.linalg.norm(self.v) - 1.0) > 1e-9:
            raise ValueError("slice axes must have unit length")
        if abs(self.u @ self.v) > 1e-9:
            raise ValueError("slice axes must be orthogonal")
        width, height = (int(r) for r in self.resolution)
        if width <= 0 or height <= 0:
            raise ValueError("slice resolution must be positive")
        object.__setattr__(self, "resolution", (width, height))
        object.__setattr__(self, "extent", tuple(float(value) for value in self.extent))

    @classmethod
    def axes(cls, dim=2, extent=(-1.0, 1.0, -1.0, 1.0), resolution=(200, 200)):
        eye = np.eye(dim)
        return cls(np.zeros(dim), eye[0], eye[1], extent, resolution)

    @classmethod
    def from_points(cls, p0, p1, p2, resolution=(200, 200), margin=0.25):
        """Plane through three points, origin at p0, axes by Gram-Schmidt on the differences"""
        p0, p1, p2 = (np.asarray(p, dtype=np.float64) for p in (p0, p1, p2))
        u = p1 - p0
        if np.linalg.norm(u) == 0.0:
            raise ValueError("the first two slice points coincide")
        u /= np.linalg.norm(u)
        v = p2 - p0
        v -= (u @ v) * u
        v -= (u @ v) * u
        if np.linalg.norm(v) <= 1e-12:
            raise ValueError("the three slice points are collinear")
        v /= np.linalg.norm(v)
        s = np.array([0.0, (p1 - p0) @ u, (p2 - p0) @ u])
        t = np.array([0.0, 0.0, (p2 - p0) @ v])
        pad_s = margin * (s.max() - s.min())
        pad_t = margin * max(t.max() - t.min(), s.max() - s.min())
        extent = (s.min() - pad_s, s.max() + pad_s, t.min() - pad_t, t.max() + pad_t)
        return cls(p0, u, v, extent, resolution)

    @classmethod
    def random(cls, dim, seed=0, origin=None, extent=(-1.0, 1.0, -1.0, 1.0), resolution=(200, 200)):
        rng = np.random.default_rng(seed)
        q, r = np.linalg.qr(rng.standard_normal((dim, 2)))
        q = q * np.sign(np.diag(r))
        origin = np.zeros(dim) if origin is None else origin
        return cls(origin, q[:, 0], q[:, 1], extent, resolution)

    def pixel_coordinates(self):
        """(s, t) of every pixel center; row 0 is the top of the image (largest t)"""
        width, height = self.resolution
        u_min, u_max, v_min, v_max = self.extent
        s = u_min + (np.arange(width) + 0.5) * (u_max - u_min) / width
        t = v_max - (np.arange(height) + 0.5) * (v_max - v_min) / height
        return np.meshgrid(s, t)

    def points(self) -> np.ndarray:
        s, t = self.pixel_coordinates()
        return self.origin + s[..., None] * self.u + t[..., None] * self.v


@dataclass(frozen=True)
class SliceRaster:
    """Per-pixel results of a slice, every grid shaped (H, W)"""

    pattern_hash: np.ndarray
    activation_rate: np.ndarray
    predicted_class: np.ndarray
    boundary_mask: np.ndarray
    out_of_bounds: np.ndarray

    @property
    def shape(self):
        return self.pattern_hash.shape


def boundary_from_hashes(hashes: np.ndarray) -> np.ndarray:
    mask = np.zeros(hashes.shape, dtype=bool)
    vertical = hashes[1:, :] != hashes[:-1, :]
    horizontal = hashes[:, 1:] != hashes[:, :-1]
    mask[1:, :] |= vertical
    mask[:-1, :] |= vertical
    mask[:, 1:] |= horizontal
    mask[:, :-1] |= horizontal
    return mask


def rasterize(model: NetworkModel, plane: SlicePlane, chunk_size=65536) -> SliceRaster:
    points = plane.points()
    height, width, dim = points.shape
    flat = points.reshape(-1, dim)
    hashes = np.empty(flat.shape[0], dtype=np.uint64)
    rates = np.empty(flat.shape[0])
    classes = np.empty(flat.shape[0], dtype=np.int64)
    for begin in range(0, flat.shape[0], chunk_size):
        logits, bits = forward_batch(model, flat[begin : begin + chunk_size])
        end = begin + logits.shape[0]
        if bits.shape[1]:
            unique, inverse = np.unique(bits, axis=0, return_inverse=True)
            digests = np.array([pattern_digest(row) for row in unique], dtype=np.uint64)
            hashes[begin:end] = digests[np.asarray(inverse).reshape(-1)]
            rates[begin:end] = bits.mean(axis=1)
        else:
            hashes[begin:end] = pattern_digest(bits[0] if bits.shape[0] else np.zeros(0, dtype=bool))
            rates[begin:end] = 0.0
        classes[begin:end] = logits.argmax(axis=1)
    outside = np.any(flat < model.box_lo, axis=1) | np.any(flat > model.box_hi, axis=1)
    hashes = hashes.reshape(height, width)
    return SliceRaster(
        hashes,
        rates.reshape(height, width),
        classes.reshape(height, width),
        boundary_from_hashes(hashes),
        outside.reshape(height, width),
    )


def unique_region_count(raster: SliceRaster) -> int:
    return int(np.unique(raster.pattern_hash).size)


def raster_rgb(raster: SliceRaster, style="region") -> np.ndarray:
    if style == "region":
        colormap = matplotlib.colormaps["viridis"]
        rgb = np.rint(colormap(raster.activation_rate)[..., :3] * 255).astype(np.uint8)
        rgb[raster.boundary_mask] = BOUNDARY_RGB
    elif style == "class":
        palette = np.array([np.rint(np.array(to_rgb(c)) * 255) for c in CLASS_COLORS], dtype=np.uint8)
        rgb = palette[raster.predicted_class % len(palette)]
    else:
        raise UnsupportedStyleError(f"unknown render style {style}, expected one of {STYLES}")
    rgb[raster.out_of_bounds] = OUTSIDE_RGB
    return rgb


def encode_ppm(rgb: np.ndarray) -> bytes:
    height, width, _ = rgb.shape
    return b"P6\n%d %d\n255\n" % (width, height) + np.ascontiguousarray(rgb, dtype=np.uint8).tobytes()


def encode_svg(rgb: np.ndarray, title=None) -> bytes:
    height, width, _ = rgb.shape
    fig = Figure(figsize=(6.0, 6.0 * height / width))
    ax = fig.add_axes([0.0, 0.0, 1.0, 1.0])
    ax.imshow(rgb, interpolation="nearest")
    ax.set_axis_off()
    if title:
        ax.set_title(title)
    buffer = io.BytesIO()
    with matplotlib.rc_context({"svg.hashsalt": "regionlab"}):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def render(raster: SliceRaster, style="region", fmt="ppm") -> bytes:
    """Region map (activation-rate colors, gray boundaries) or class map,
    encoded as binary PPM or SVG. Out-of-bounds pixels are white."""
    if fmt not in FORMATS:
        raise UnsupportedStyleError(f"unknown image format {fmt}, expected one of {FORMATS}")
    rgb = raster_rgb(raster, style)
    if fmt == "ppm":
        return encode_ppm(rgb)
    return encode_svg(rgb)
