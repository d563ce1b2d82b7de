"""Sample curves and surfaces used by the demos and the test-suite."""

from __future__ import annotations

import numpy as np

from .manifold import MESH, POLYLINE, SampledManifold


def _loop(points) -> SampledManifold:
    return SampledManifold(POLYLINE, np.asarray(points, dtype=float))


def circle(n: int = 360, radius: float = 1.0, center=(0.0, 0.0), phase: float = 0.0) -> SampledManifold:
    t = phase + 2 * np.pi * np.arange(n) / n
    return _loop(np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)]))


def ellipse(n: int = 400, a: float = 2.0, b: float = 1.0, phase: float = 0.0) -> SampledManifold:
    t = phase + 2 * np.pi * np.arange(n) / n
    return _loop(np.column_stack([a * np.cos(t), b * np.sin(t)]))


def trefoil(n: int = 2000) -> SampledManifold:
    t = 2 * np.pi * np.arange(n) / n
    return _loop(np.column_stack([np.sin(t) + 2 * np.sin(2 * t), np.cos(t) - 2 * np.cos(2 * t), -np.sin(3 * t)]))


def figure_eight(n: int = 400) -> SampledManifold:
    """Lemniscate ``(sin t, sin t cos t)``; vertices ``0`` and ``n/2`` both sit on the double point."""
    if n % 2:
        raise ValueError("use an even sample count so the double point is sampled twice")
    t = 2 * np.pi * np.arange(n) / n
    return _loop(np.column_stack([np.sin(t), np.sin(t) * np.cos(t)]))


def square(per_side: int = 1, side: float = 1.0) -> SampledManifold:
    """Boundary of ``[0, side]^2`` counter-clockwise from the origin, ``per_side`` samples per edge."""
    s = np.arange(per_side) / per_side * side
    z = np.zeros(per_side)
    f = np.full(per_side, side)
    pts = np.concatenate(
        [np.column_stack([s, z]), np.column_stack([f, s]), np.column_stack([side - s, f]), np.column_stack([z, side - s])]
    )
    return _loop(pts)


def star(points: int = 5, r_outer: float = 1.0, r_inner: float = 0.4, per_edge: int = 1) -> SampledManifold:
    """Star polygon with tips at ``90 + 360 k / points`` degrees."""
    ang = np.pi / 2 + np.pi * np.arange(2 * points) / points
    r = np.where(np.arange(2 * points) % 2 == 0, r_outer, r_inner)
    corners = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    return _loop(_densify(corners, per_edge))


def u_shape(per_edge: int = 1) -> SampledManifold:
    corners = np.array([[0, 0], [3, 0], [3, 2], [2, 2], [2, 1], [1, 1], [1, 2], [0, 2]], dtype=float)
    return _loop(_densify(corners, per_edge))


def random_convex_polygon(rng: np.random.Generator, n: int) -> SampledManifold:
    """Random polygon inscribed in a random rotated ellipse, hence strictly convex."""
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    while np.min(np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))) < 1e-6:
        ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    a, b = rng.uniform(0.5, 2.0, 2)
    rot = rng.uniform(0, np.pi)
    c, s = np.cos(rot), np.sin(rot)
    pts = np.column_stack([a * np.cos(ang), b * np.sin(ang)]) @ np.array([[c, s], [-s, c]])
    return _loop(pts + rng.uniform(-1, 1, 2))


def _densify(corners, per_edge):
    if per_edge <= 1:
        return corners
    nxt = np.roll(corners, -1, axis=0)
    s = np.arange(per_edge) / per_edge
    return (corners[:, None, :] + s[None, :, None] * (nxt - corners)[:, None, :]).reshape(-1, 2)


def octahedron() -> SampledManifold:
    V = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    T = [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]]
    return SampledManifold(MESH, V, T)


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> SampledManifold:
    """Subdivided icosahedron; ``20 * 4**subdivisions`` triangles."""
    p = (1 + 5**0.5) / 2
    V = [[-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0], [0, -1, p], [0, 1, p],
         [0, -1, -p], [0, 1, -p], [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1]]
    T = [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4],
         [11, 10, 2], [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8],
         [3, 8, 9], [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    V = [np.array(v, dtype=float) / np.linalg.norm(v) for v in V]
    for _ in range(subdivisions):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = V[a] + V[b]
                V.append(m / np.linalg.norm(m))
                cache[key] = len(V) - 1
            return cache[key]

        new = []
        for a, b, c in T:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        T = new
    return SampledManifold(MESH, radius * np.array(V), T)
