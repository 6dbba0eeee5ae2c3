"""Glyph geometry: shape profiles, marking dots, color tables, deformation model.

A subject is a closed radial outline r(theta) carrying a fill color, a dot
marking pattern in a secondary color, and a dark rim. Every shape includes a
"nose" lobe at theta=0 so that in-plane orientation is never ambiguous.
Identity-relevant factors: shape index, fill hue, marking hue offset, dot
pattern. Identity-irrelevant factors: in-plane rotation (pose) and a
frequency-1 outline deformation (expression), which no identity factor uses.
"""

from __future__ import annotations

import colorsys
import math
from functools import lru_cache

import numpy as np

# (angular frequency, amplitude) of the base outline wave; index = shape code.
SHAPE_WAVES = [
    (0, 0.00),
    (2, 0.22),
    (2, 0.35),
    (3, 0.18),
    (3, 0.32),
    (4, 0.18),
    (4, 0.32),
    (5, 0.18),
    (5, 0.32),
    (6, 0.18),
    (6, 0.30),
    (7, 0.22),
]
N_SHAPES = len(SHAPE_WAVES)

NOSE_HEIGHT = 0.22
NOSE_WIDTH = 0.30  # radians (gaussian sigma)

# Expression: multiplicative frequency-1 outline wobble, amplitude grows with e.
DEFORM_AMP = 0.28
DEFORM_PHASE = 1.1

N_HUES = 24
N_MARK_OFFSETS = 8
MARK_HUE_BASE_SHIFT = 3  # hue steps; marking hue = fill + base + 2*offset

DOT_ANGLES = np.deg2rad(np.array([90.0, 162.0, 234.0, 306.0, 18.0]))
DOT_RADIUS_POS = 0.38  # anchor distance from center, glyph units
DOT_RADIUS = 0.13  # dot size, glyph units

OUTLINE_WIDTH = 0.07
OUTLINE_COLOR = np.array([0.07, 0.07, 0.09], dtype=np.float32)

# 16 dot patterns over 5 anchors, each with 2 or 3 dots set.
def _build_dot_patterns() -> np.ndarray:
    twos = [m for m in range(32) if bin(m).count("1") == 2]
    threes = [m for m in range(32) if bin(m).count("1") == 3]
    masks = twos + threes[: 16 - len(twos)]
    out = np.zeros((16, 5), dtype=bool)
    for i, m in enumerate(masks):
        for b in range(5):
            out[i, b] = bool(m >> b & 1)
    return out


DOT_PATTERNS = _build_dot_patterns()
N_DOT_PATTERNS = len(DOT_PATTERNS)


def _hsv(h: float, s: float, v: float) -> np.ndarray:
    return np.array(colorsys.hsv_to_rgb(h % 1.0, s, v), dtype=np.float32)


FILL_RGB = np.stack([_hsv(i / N_HUES, 0.82, 0.85) for i in range(N_HUES)])
MARK_RGB = np.stack([_hsv(i / N_HUES, 0.90, 0.42) for i in range(N_HUES)])

COLOR_WORDS = ["red", "orange", "gold", "green", "teal", "blue", "violet", "magenta"]
HUES_PER_WORD = N_HUES // len(COLOR_WORDS)


def hue_to_color_word(hue_index: int) -> str:
    return COLOR_WORDS[(hue_index % N_HUES) // HUES_PER_WORD]


def mark_hue_index(fill_hue: int, mark_offset: int) -> int:
    return (fill_hue + MARK_HUE_BASE_SHIFT + 2 * mark_offset) % N_HUES


@lru_cache(maxsize=None)
def _profile_norm(shape_code: int) -> float:
    theta = np.linspace(0.0, 2.0 * math.pi, 720, endpoint=False)
    return float(np.max(_raw_profile(shape_code, theta)))


def _raw_profile(shape_code: int, theta: np.ndarray) -> np.ndarray:
    k, amp = SHAPE_WAVES[shape_code]
    wrapped = np.mod(theta + math.pi, 2.0 * math.pi) - math.pi
    nose = NOSE_HEIGHT * np.exp(-0.5 * (wrapped / NOSE_WIDTH) ** 2)
    return 1.0 + amp * np.cos(k * theta) + nose


def shape_profile(shape_code: int, theta: np.ndarray) -> np.ndarray:
    """Canonical outline radius (max-normalized to 1) at glyph-local angles."""
    return _raw_profile(shape_code, theta) / _profile_norm(shape_code)


def outline_radius(shape_code: int, theta: np.ndarray, expression: float) -> np.ndarray:
    deform = 1.0 + DEFORM_AMP * expression * np.sin(theta + DEFORM_PHASE)
    return shape_profile(shape_code, theta) * deform


def deformation_magnitude(expression: float) -> float:
    """The generator's own per-frame deformation measure."""
    return DEFORM_AMP * float(expression)


def dot_anchor_xy(rotation_rad: float) -> np.ndarray:
    """Anchor coordinates (x right, y up) in glyph units for a rotated glyph."""
    angles = DOT_ANGLES + rotation_rad
    return np.stack([DOT_RADIUS_POS * np.cos(angles), DOT_RADIUS_POS * np.sin(angles)], axis=1)


def max_extent(expression: float = 1.0) -> float:
    """Largest possible outline radius in glyph units, any shape."""
    return 1.0 + DEFORM_AMP * expression + OUTLINE_WIDTH


def render_glyph_patch(
    shape_code: int,
    fill_rgb: np.ndarray,
    mark_rgb: np.ndarray,
    dot_pattern: np.ndarray,
    radius_px: float,
    rotation_rad: float,
    expression: float,
    patch_h: int,
    patch_w: int,
    center_xy: tuple[float, float],
    supersample: int = 3,
) -> tuple[np.ndarray, np.ndarray]:
    """Rasterize one glyph into an (rgb, alpha) patch.

    center_xy is in patch pixel coordinates (x right, y down). Rendering is a
    pure function of the arguments; antialiasing comes from box-filtered
    supersampling, so identical inputs give bit-identical output.
    """
    ss = supersample
    nh, nw = patch_h * ss, patch_w * ss
    ys, xs = np.mgrid[0:nh, 0:nw]
    # supersampled pixel centers in patch coordinates
    px = (xs + 0.5) / ss
    py = (ys + 0.5) / ss
    dx = (px - center_xy[0]) / radius_px
    dy = (center_xy[1] - py) / radius_px  # flip: glyph-local y points up
    # rotate into glyph-local frame
    c, s = math.cos(-rotation_rad), math.sin(-rotation_rad)
    lx = c * dx - s * dy
    ly = s * dx + c * dy
    r = np.hypot(lx, ly)
    theta = np.arctan2(ly, lx)
    boundary = outline_radius(shape_code, theta, expression)
    inside = r <= boundary
    rim = inside & (r > boundary - OUTLINE_WIDTH)

    rgb = np.zeros((nh, nw, 3), dtype=np.float32)
    rgb[inside] = fill_rgb
    anchors = dot_anchor_xy(0.0)  # glyph-local; lx/ly already derotated
    for on, (ax, ay) in zip(dot_pattern, anchors):
        if not on:
            continue
        dot = (lx - ax) ** 2 + (ly - ay) ** 2 <= DOT_RADIUS**2
        rgb[dot & inside] = mark_rgb
    rgb[rim] = OUTLINE_COLOR
    alpha = inside.astype(np.float32)

    rgb = rgb.reshape(patch_h, ss, patch_w, ss, 3).mean(axis=(1, 3))
    alpha = alpha.reshape(patch_h, ss, patch_w, ss).mean(axis=(1, 3))
    return rgb, alpha


@lru_cache(maxsize=None)
def background_template(code: int, height: int, width: int) -> np.ndarray:
    """Deterministic grayscale backdrop for a background code."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    if code == 0:
        g = np.full((height, width), 0.16)
    elif code == 1:
        g = np.full((height, width), 0.82)
    elif code == 2:
        g = 0.25 + 0.40 * xs / max(width - 1, 1)
    elif code == 3:
        g = 0.65 - 0.40 * ys / max(height - 1, 1)
    elif code == 4:
        g = np.where(((xs // 8) + (ys // 8)) % 2 == 0, 0.30, 0.55)
    elif code == 5:
        g = np.where(((xs + ys) // 7) % 2 == 0, 0.35, 0.60)
    else:
        raise ValueError(f"unknown background code {code}")
    return np.repeat(g[:, :, None], 3, axis=2).astype(np.float32)


N_BACKGROUNDS = 6
BACKGROUND_WORDS = ["charcoal", "ivory", "sunrise", "twilight", "checkered", "striped"]
