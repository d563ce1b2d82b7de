"""Distance, distance and distance-squared mappings, and general position.

Points are plain ``numpy`` arrays.  Functions that take a single point also
accept an ``(N, n)`` stack of points and broadcast over the leading axis.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, GeneralPositionError, SqmapError

DEFAULT_RANK_TOL = 1e-9


def as_point(x, dim: Optional[int] = None) -> np.ndarray:
    """Validate ``x`` as a finite point (or stack of points) of dimension ``dim``."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim > 2 or arr.shape[-1] < 1:
        raise DimensionError(f"expected a point or a stack of points, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SqmapError("point coordinates must be finite")
    if dim is not None and arr.shape[-1] != dim:
        raise DimensionError(f"expected dimension {dim}, got {arr.shape[-1]}")
    return arr


def euclidean_distance(x, y) -> float:
    x = as_point(x)
    y = as_point(y, x.shape[-1])
    return np.sqrt(np.sum((x - y) ** 2, axis=-1))


@dataclass(frozen=True, eq=False)
class AnchorSet:
    """Ordered anchors ``p_1, ..., p_l``; ``p_1`` is the basepoint of the difference vectors.

    ``shared_last_coord`` is set when every anchor has the same last
    coordinate (the level-fold hypothesis); it is checked bit-exactly.
    """

    points: np.ndarray
    shared_last_coord: Optional[float] = None
    tolerance: float = DEFAULT_RANK_TOL
    rank: int = 0

    def __init__(self, points, shared_last_coord=None, tolerance=DEFAULT_RANK_TOL):
        pts = as_point(points)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        pts = pts.copy()
        pts.setflags(write=False)
        if shared_last_coord is not None:
            shared_last_coord = float(shared_last_coord)
            if not np.all(pts[:, -1] == shared_last_coord):
                raise SqmapError("anchors do not share the declared last coordinate")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "shared_last_coord", shared_last_coord)
        object.__setattr__(self, "tolerance", float(tolerance))
        object.__setattr__(self, "rank", is_general_position(pts, tolerance)[1])

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def general_position(self) -> bool:
        return self.count == 1 or self.rank == self.count - 1

    def to_dict(self) -> dict:
        return {
            "points": self.points.tolist(),
            "sharedLastCoord": self.shared_last_coord,
            "tolerance": self.tolerance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AnchorSet":
        return cls(
            data["points"],
            shared_last_coord=data.get("sharedLastCoord"),
            tolerance=data.get("tolerance", DEFAULT_RANK_TOL),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AnchorSet":
        return cls.from_dict(json.loads(text))


def _anchor_points(anchors) -> np.ndarray:
    if isinstance(anchors, AnchorSet):
        return anchors.points
    pts = as_point(anchors)
    return pts.reshape(1, -1) if pts.ndim == 1 else pts


def distance_squared_map(anchors, x) -> np.ndarray:
    """``D(x) = (|x - p_1|^2, ..., |x - p_l|^2)``."""
    P = _anchor_points(anchors)
    x = as_point(x, P.shape[1])
    diff = x[..., None, :] - P
    return np.einsum("...jk,...jk->...j", diff, diff)


def distance_map(anchors, x) -> np.ndarray:
    return np.sqrt(distance_squared_map(anchors, x))


def sqrt_map(v) -> np.ndarray:
    v = as_point(v)
    if np.any(v < 0):
        raise SqmapError("sqrt_map is only defined on the nonnegative orthant")
    return np.sqrt(v)


def distance_squared_jacobian(anchors, x) -> np.ndarray:
    """Exact Jacobian of ``D``: row ``j`` is ``2 (x - p_j)``; shape ``(..., l, n)``."""
    P = _anchor_points(anchors)
    x = as_point(x, P.shape[1])
    return 2.0 * (x[..., None, :] - P)


def numerical_rank(matrix, tol: float = DEFAULT_RANK_TOL) -> int:
    """Rank counted as singular values above ``tol`` times the largest one."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.size == 0:
        return 0
    s = np.linalg.svd(matrix, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def is_general_position(points, tol: float = DEFAULT_RANK_TOL) -> tuple[bool, int]:
    """Return ``(in_general_position, rank)`` for an ordered list of points.

    True for a single point; otherwise the difference vectors ``p_j - p_1``
    must have full rank ``len(points) - 1``.
    """
    pts = as_point(points)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.shape[0] == 0:
        raise SqmapError("need at least one point")
    if not tol > 0:
        raise SqmapError("tolerance must be positive")
    if pts.shape[0] == 1:
        return True, 0
    rank = numerical_rank(pts[1:] - pts[0], tol)
    return rank == pts.shape[0] - 1, rank


def extend_to_general_position(
    points,
    ell: int,
    level: float,
    rng: np.random.Generator,
    max_attempts: int = 100,
    tol: float = DEFAULT_RANK_TOL,
) -> AnchorSet:
    """Complete points lying in ``R^(l-1) x {level}`` to ``ell`` anchors in general position.

    New points are drawn uniformly from a box of side ``2 max(diam, 1)``
    centred at the first point inside the hyperplane; their last coordinate is
    set to ``level`` exactly.
    """
    pts = as_point(points)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    level = float(level)
    if pts.shape[1] != ell:
        raise DimensionError(f"points live in R^{pts.shape[1]}, expected R^{ell}")
    if pts.shape[0] > ell:
        raise SqmapError("more points than anchors requested")
    if not np.all(pts[:, -1] == level):
        raise SqmapError("input points are not on the hyperplane x_l = level")
    if not is_general_position(pts, tol)[0]:
        raise GeneralPositionError("input points are not in general position")

    diam = 0.0
    if pts.shape[0] > 1:
        diam = float(np.max(np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)))
    half = max(diam, 1.0)
    center = pts[0, :-1]
    out = [p for p in pts]
    while len(out) < ell:
        for _ in range(max_attempts):
            cand = np.empty(ell)
            cand[:-1] = center + rng.uniform(-half, half, size=ell - 1)
            cand[-1] = level
            if is_general_position(np.vstack(out + [cand]), tol)[0]:
                out.append(cand)
                break
        else:
            raise GeneralPositionError(
                f"no general-position completion found in {max_attempts} attempts"
            )
    return AnchorSet(np.vstack(out), shared_last_coord=level, tolerance=tol)


def read_points_csv(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise SqmapError(f"{path}:{lineno}: cannot parse {row!r}") from exc
    if not rows:
        raise SqmapError(f"{path}: no points")
    if len({len(r) for r in rows}) != 1:
        raise DimensionError(f"{path}: rows have differing dimensions")
    return as_point(np.array(rows))


def write_points_csv(path, points: Sequence) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for p in np.atleast_2d(points):
            writer.writerow([repr(float(c)) for c in p])
