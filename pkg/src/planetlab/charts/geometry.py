"""Vector helpers for the chart maps."""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi
K_AXIS = np.array([0.0, 0.0, 1.0])
I_AXIS = np.array([1.0, 0.0, 0.0])


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def oriented_angle(axis, a, b) -> float:
    """Angle from ``a`` to ``b`` counterclockwise around ``axis``, in ``[0, 2 pi)``.

    Components of ``a`` and ``b`` along ``axis`` are ignored.
    """
    v = unit(axis)
    s = np.cross(a, b) @ v
    c = a @ b - (a @ v) * (b @ v)
    return float(wrap(np.arctan2(s, c)))


def rotate_about(axis, v, angle) -> np.ndarray:
    """Rotate ``v`` counterclockwise about the unit vector ``axis`` (Rodrigues)."""
    k = unit(axis)
    c, s = np.cos(angle), np.sin(angle)
    return v * c + np.cross(k, v) * s + k * (k @ v) * (1.0 - c)


def align_to_k(N) -> np.ndarray:
    """Rotation matrix taking the unit vector ``N`` to ``k`` along their common node.

    Regular as ``N -> k``; undefined only for ``N = -k``.
    """
    c = np.cross(N, K_AXIS)
    cx = np.array([[0.0, -c[2], c[1]], [c[2], 0.0, -c[0]], [-c[1], c[0], 0.0]])
    return np.eye(3) + cx + cx @ cx / (1.0 + N @ K_AXIS)


def circular_distance(a, b):
    """Distance between angles on the circle, in ``[0, pi]``."""
    d = np.mod(np.asarray(a) - np.asarray(b), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def wrap(angle):
    """Reduce to ``[0, 2 pi)``; tiny negative inputs would otherwise round to ``2 pi``."""
    out = np.mod(angle, TWO_PI)
    return np.where(out >= TWO_PI, 0.0, out) if np.ndim(out) else (0.0 if out >= TWO_PI else float(out))
