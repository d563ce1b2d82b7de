"""Anchor selection making ``D_(p_1..p_l) o i`` an embedding (or a normal-crossings immersion).

Pipeline, all in a frame rotated so the height direction is the last axis:

1. ``choose_direction``  -- random height direction whose height function on
   the samples has a unique minimizer, separated extrema and no flat edges;
2. ``compute_thresholds`` -- ``k0`` (minimum), a graph neighbourhood of the
   minimizer, ``k1`` (its top), ``k2`` (lowest height outside it) and
   ``k3 = min{k0 + 1, k0 + (k2 - k0)/3, k1}``;
3. ``choose_level``      -- a regular level ``a`` in ``(k0, k3)``;
4. ``select_slice_anchors`` -- ``m + 1`` general-position points on the slice;
5. completion to ``l`` anchors inside the hyperplane ``x_l = a``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import GeneralPositionError, ManifoldError, SelectionError
from .geometry import DEFAULT_RANK_TOL, AnchorSet, extend_to_general_position, is_general_position
from .manifold import (
    POLYLINE,
    GraphNeighborhood,
    SampledManifold,
    Slice,
    graph_neighborhood,
    height_extrema,
    slice_with_hyperplane,
)

DIRECTION_TOL = 1e-9
PARALLEL_TOL = 1e-6


def rotation_to_last_axis(u) -> np.ndarray:
    """Proper orthogonal ``R`` with ``R @ u = e_l`` for a unit vector ``u``."""
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    k = u.size
    e = np.zeros(k)
    e[-1] = 1.0
    # reflect along the better-conditioned of u - e and u + e
    sign = -1.0 if u[-1] < 0 else 1.0
    v = u + sign * e
    v = v / np.linalg.norm(v)
    R = -sign * (np.eye(k) - 2.0 * np.outer(v, v))
    if np.linalg.det(R) < 0:
        # Row 0 is orthogonal to e_l after the reflection, so flipping it keeps R u = e_l.
        R[0] = -R[0]
    return R


def direction_defect(M: SampledManifold, u, tol: float = DIRECTION_TOL) -> Optional[str]:
    """Reason why the height ``x -> <u, x>`` is not Morse-like on the samples, or ``None``."""
    h = M.vertices @ np.asarray(u, dtype=float)
    extent = float(h.max() - h.min())
    if extent <= 0:
        return "height is constant"
    eps = tol * extent
    lowest = np.partition(h, 1)[:2]
    if abs(lowest[1] - lowest[0]) <= eps:
        return "minimizer is not unique"
    E = M.edges
    dh = np.abs(h[E[:, 0]] - h[E[:, 1]])
    if np.any(dh <= eps):
        e = E[int(np.argmin(dh))]
        return f"edge ({int(e[0])}, {int(e[1])}) is orthogonal to the direction"
    A = M.adjacency
    nb = h[A.indices]
    nb_min = np.minimum.reduceat(nb, A.indptr[:-1])
    nb_max = np.maximum.reduceat(nb, A.indptr[:-1])
    extrema = np.sort(h[(h < nb_min) | (h > nb_max)])
    if extrema.size > 1 and np.min(np.diff(extrema)) <= eps:
        return "two local extrema share a height"
    return None


@dataclass
class DirectionChoice:
    direction: np.ndarray
    rotation: np.ndarray
    rotated: SampledManifold
    tries: int
    rejections: list = field(default_factory=list)


def choose_direction(
    M: SampledManifold,
    rng: np.random.Generator,
    max_tries: int = 200,
    candidates: Optional[Iterable] = None,
    tol: float = DIRECTION_TOL,
) -> DirectionChoice:
    """Rejection-sample a height direction (uniform on the sphere).

    ``candidates`` are tried first, in order, before random draws.
    """
    rejections = []
    proposals = [np.asarray(c, dtype=float) for c in (candidates or [])]
    best = None
    for attempt in range(max_tries):
        if attempt < len(proposals):
            u = proposals[attempt]
        else:
            u = rng.standard_normal(M.ambient_dim)
        u = u / np.linalg.norm(u)
        defect = direction_defect(M, u, tol)
        if defect is None:
            R = rotation_to_last_axis(u)
            return DirectionChoice(u, R, M.with_vertices(M.vertices @ R.T), attempt + 1, rejections)
        rejections.append({"direction": u.tolist(), "defect": defect})
        best = best or (u, defect)
    raise SelectionError(
        "choose_direction",
        f"no admissible direction in {max_tries} tries (first candidate {best[0].tolist()}: {best[1]})",
        rejections,
    )


def level_upper_bound(k0: float, k1: float, k2: float) -> float:
    return min(k0 + 1.0, k0 + (k2 - k0) / 3.0, k1)


@dataclass
class Thresholds:
    k0: float
    k1: float
    k2: float
    k3: float
    q: int
    neighborhood: GraphNeighborhood


def compute_thresholds(M_rot: SampledManifold, cap_fraction: float = 0.5, tol: float = DIRECTION_TOL) -> Thresholds:
    axis = M_rot.ambient_dim - 1
    h = M_rot.vertices[:, axis]
    ext = height_extrema(M_rot, axis, tol)
    if not ext.unique:
        raise SelectionError("compute_thresholds", f"{len(ext.minimizers)} height minimizers")
    q = int(ext.minimizers[0])
    try:
        nb = graph_neighborhood(M_rot, q, axis, cap_fraction=cap_fraction, tol=tol)
    except ManifoldError as exc:
        raise SelectionError("compute_thresholds", str(exc)) from exc
    outside = np.ones(M_rot.num_vertices, dtype=bool)
    outside[nb.members] = False
    if not outside.any():
        raise SelectionError("compute_thresholds", "graph neighbourhood swallowed the whole manifold")
    k0 = ext.k0
    k1 = float(h[nb.members].max())
    k2 = float(h[outside].min())
    k3 = level_upper_bound(k0, k1, k2)
    if not k0 < k3:
        raise SelectionError("compute_thresholds", f"empty level interval: k0={k0!r}, k3={k3!r}")
    return Thresholds(k0, k1, k2, k3, q, nb)


def _level_defect(M_rot, th: Thresholds, a, tol) -> Optional[str]:
    axis = M_rot.ambient_dim - 1
    h = M_rot.vertices[:, axis]
    extent = float(h.max() - h.min())
    if not th.k0 < a < th.k3:
        return "outside (k0, k3)"
    if np.min(np.abs(h - a)) <= tol * extent:
        return "a vertex lies on the level"
    sl = slice_with_hyperplane(M_rot, axis, a)
    if len(sl) == 0:
        return "empty slice"
    if M_rot.kind == POLYLINE:
        V = M_rot.vertices
        d = V[sl.edges[:, 1]] - V[sl.edges[:, 0]]
        slope = np.abs(d[:, axis]) / np.linalg.norm(d, axis=1)
        if slope.min() <= PARALLEL_TOL:
            return "an edge is nearly parallel to the level set"
        if len(sl) < 2:
            return "fewer than two slice points"
    if not np.all(np.isin(sl.edges, th.neighborhood.members)):
        return "slice leaves the graph neighbourhood"
    return None


def choose_level(
    M_rot: SampledManifold,
    th: Thresholds,
    rng: np.random.Generator,
    max_tries: int = 100,
    tol: float = DIRECTION_TOL,
) -> tuple[float, Slice, list]:
    """Draw ``a`` uniformly from ``(k0, k3)`` until it passes the regularity rules."""
    if not th.k0 < th.k3:
        raise SelectionError("choose_level", "empty level interval")
    rejections = []
    for _ in range(max_tries):
        a = float(rng.uniform(th.k0, th.k3))
        defect = _level_defect(M_rot, th, a, tol)
        if defect is None:
            sl = slice_with_hyperplane(M_rot, M_rot.ambient_dim - 1, a)
            return a, sl, rejections
        rejections.append({"level": a, "defect": defect})
    raise SelectionError("choose_level", f"no regular level in {max_tries} tries", rejections)


def select_slice_anchors(points, m: int, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Greedy choice of ``m + 1`` slice points maximising the smallest singular value."""
    P = np.asarray(points, dtype=float)
    if len(P) < m + 1:
        raise SelectionError("select_slice_anchors", f"slice has {len(P)} points, need {m + 1}")
    first = int(np.argmax(np.linalg.norm(P - P.mean(axis=0), axis=1)))
    chosen = [first]
    while len(chosen) < m + 1:
        base = P[chosen[0]]
        diffs = P[chosen[1:]] - base
        best, best_s = None, 0.0
        for k in range(len(P)):
            if k in chosen:
                continue
            D = np.vstack([diffs, P[k] - base])
            s = np.linalg.svd(D, compute_uv=False)[-1]
            if s > best_s:
                best, best_s = k, s
        if best is None:
            raise SelectionError("select_slice_anchors", "slice points are all coincident")
        chosen.append(best)
    out = P[chosen]
    ok, rank = is_general_position(out, tol)
    if not ok:
        raise SelectionError(
            "select_slice_anchors", f"slice spans affine dimension {rank} < {m}; sampling too coarse"
        )
    return out


@dataclass
class AnchorSelectionState:
    seed: Optional[int]
    direction: np.ndarray
    rotation: np.ndarray
    k0: float
    k1: float
    k2: float
    k3: float
    q: int
    neighborhood: GraphNeighborhood
    level: float
    slice_anchors: np.ndarray
    anchors_rotated: AnchorSet
    anchors: AnchorSet
    cap_fraction: float
    rotated: SampledManifold
    diagnostics: list = field(default_factory=list)

    @property
    def thresholds(self) -> Thresholds:
        return Thresholds(self.k0, self.k1, self.k2, self.k3, self.q, self.neighborhood)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "direction": self.direction.tolist(),
            "rotation": self.rotation.tolist(),
            "k0": self.k0,
            "k1": self.k1,
            "k2": self.k2,
            "k3": self.k3,
            "level": self.level,
            "q": self.q,
            "capFraction": self.cap_fraction,
            "neighborhood": {
                "paramAxes": list(self.neighborhood.param_axes),
                "size": int(len(self.neighborhood.members)),
                "cap": self.neighborhood.cap,
            },
            "sliceAnchors": self.slice_anchors.tolist(),
            "anchorsRotated": self.anchors_rotated.to_dict(),
            "anchors": self.anchors.to_dict(),
            "diagnostics": self.diagnostics,
        }


def build_anchor_set(
    M: SampledManifold,
    ell: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    seed: Optional[int] = None,
    max_restarts: int = 10,
    max_shrinks: int = 6,
    tol: float = DIRECTION_TOL,
) -> AnchorSelectionState:
    """Run the whole selection; deterministic for a fixed ``seed`` (or generator state)."""
    if ell is not None and ell != M.ambient_dim:
        raise SelectionError("build_anchor_set", f"anchors must live in the ambient R^{M.ambient_dim}")
    ell = M.ambient_dim
    m = M.intrinsic_dim
    if rng is None:
        rng = np.random.default_rng(seed)
    diagnostics = []
    for restart in range(max_restarts):
        choice = choose_direction(M, rng, tol=tol)
        diagnostics += [dict(stage="choose_direction", **r) for r in choice.rejections]
        Mr = choice.rotated
        cap_fraction = 0.5
        for _ in range(max_shrinks):
            try:
                th = compute_thresholds(Mr, cap_fraction, tol)
                a, sl, rej = choose_level(Mr, th, rng, tol=tol)
                diagnostics += [dict(stage="choose_level", **r) for r in rej]
                slice_pts = select_slice_anchors(sl.points, m)
                full = extend_to_general_position(slice_pts, ell, a, rng)
            except (SelectionError, GeneralPositionError) as exc:
                diagnostics.append({"stage": getattr(exc, "stage", "extend_to_general_position"),
                                    "defect": str(exc), "capFraction": cap_fraction})
                cap_fraction *= 0.5
                continue
            original = AnchorSet(full.points @ choice.rotation, tolerance=full.tolerance)
            return AnchorSelectionState(
                seed=seed,
                direction=choice.direction,
                rotation=choice.rotation,
                k0=th.k0,
                k1=th.k1,
                k2=th.k2,
                k3=th.k3,
                q=th.q,
                neighborhood=th.neighborhood,
                level=a,
                slice_anchors=slice_pts,
                anchors_rotated=full,
                anchors=original,
                cap_fraction=cap_fraction,
                rotated=Mr,
                diagnostics=diagnostics,
            )
    raise SelectionError("build_anchor_set", f"gave up after {max_restarts} directions", diagnostics)
