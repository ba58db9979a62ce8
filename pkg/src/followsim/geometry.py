"""Planar geometry helpers shared by the world, sensing, and planning code."""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


def point_segment_distance(px: float, py: float, ax: float, ay: float, bx: float, by: float) -> float:
    """Distance from point (px, py) to segment (a, b)."""
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / L2
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def point_rect_distance(px: float, py: float, x0: float, y0: float, x1: float, y1: float) -> float:
    """Distance from a point to an axis-aligned rectangle (0 inside)."""
    dx = max(x0 - px, 0.0, px - x1)
    dy = max(y0 - py, 0.0, py - y1)
    return math.hypot(dx, dy)


def segment_intersects_rect(ax, ay, bx, by, x0, y0, x1, y1) -> bool:
    """True if segment (a, b) touches the axis-aligned rectangle interior or boundary."""
    # Liang-Barsky clipping.
    dx, dy = bx - ax, by - ay
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, ax - x0), (dx, x1 - ax), (-dy, ay - y0), (dy, y1 - ay)):
        if p == 0.0:
            if q < 0.0:
                return False
        else:
            r = q / p
            if p < 0.0:
                if r > t1:
                    return False
                if r > t0:
                    t0 = r
            else:
                if r < t0:
                    return False
                if r < t1:
                    t1 = r
    return True


def segment_intersects_circle(ax, ay, bx, by, cx, cy, r) -> bool:
    """True if segment (a, b) passes within r of center (c)."""
    return point_segment_distance(cx, cy, ax, ay, bx, by) <= r


def ray_segments_hits(ox: float, oy: float, dirs: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """Closest hit distance per ray against a batch of segments.

    dirs: (R, 2) unit direction vectors; segs: (S, 4) as (ax, ay, bx, by).
    Returns (R,) distances, inf where a ray misses every segment.
    """
    if len(segs) == 0:
        return np.full(len(dirs), np.inf)
    ex = segs[:, 2] - segs[:, 0]
    ey = segs[:, 3] - segs[:, 1]
    wx = segs[:, 0] - ox
    wy = segs[:, 1] - oy
    dx = dirs[:, 0:1]
    dy = dirs[:, 1:2]
    denom = dx * ey[None, :] - dy * ex[None, :]  # (R, S)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (wx[None, :] * ey[None, :] - wy[None, :] * ex[None, :]) / denom
        u = (wx[None, :] * dy - wy[None, :] * dx) / denom
    valid = (np.abs(denom) > 1e-12) & (t > 1e-9) & (u >= 0.0) & (u <= 1.0)
    t = np.where(valid, t, np.inf)
    return t.min(axis=1)


def ray_circles_hits(ox: float, oy: float, dirs: np.ndarray, circles: np.ndarray) -> np.ndarray:
    """Closest hit distance per ray against circles given as (cx, cy, r) rows."""
    if len(circles) == 0:
        return np.full(len(dirs), np.inf)
    fx = ox - circles[:, 0]
    fy = oy - circles[:, 1]
    b = dirs[:, 0:1] * fx[None, :] + dirs[:, 1:2] * fy[None, :]  # (R, C)
    c = (fx * fx + fy * fy - circles[:, 2] ** 2)[None, :]
    disc = b * b - c
    with np.errstate(invalid="ignore"):
        sq = np.sqrt(np.maximum(disc, 0.0))
    t = -b - sq
    t2 = -b + sq
    t = np.where(t > 1e-9, t, np.where(t2 > 1e-9, t2, np.inf))
    t = np.where(disc >= 0.0, t, np.inf)
    return t.min(axis=1)


def rect_segments(x0: float, y0: float, x1: float, y1: float) -> list[tuple[float, float, float, float]]:
    return [
        (x0, y0, x1, y0),
        (x1, y0, x1, y1),
        (x1, y1, x0, y1),
        (x0, y1, x0, y0),
    ]
