"""Two anchors that make the distance mapping injective on a planar closed curve.

A support-function scan splits curves into two cases.  If every direction has
a single contact point the curve must be convex; the anchors are then taken on
a horizontal slice at two thirds of the height after moving the diameter pair
to ``(0, 0)`` and ``(1, 0)``.  Otherwise two contact points of a supporting
line with several contacts are used directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial.distance import cdist

from .errors import ClassificationError, DimensionError, ManifoldError
from .manifold import POLYLINE, SampledManifold, slice_with_hyperplane

CASE_I = "I"
CASE_II = "II"
DEFAULT_GRID = 720
TWO_PI = 2 * np.pi


def _vertices(curve) -> np.ndarray:
    if isinstance(curve, SampledManifold):
        if curve.kind != POLYLINE:
            raise ManifoldError("expected a closed polyline")
        V = curve.vertices
    else:
        V = np.atleast_2d(np.asarray(curve, dtype=float))
    if V.shape[1] != 2:
        raise DimensionError(f"expected a planar curve, got points in R^{V.shape[1]}")
    return V


def _extent(V: np.ndarray) -> float:
    return float(np.linalg.norm(V.max(axis=0) - V.min(axis=0)))


@dataclass
class SupportProbe:
    """Maximum of ``cos(theta) x1 + sin(theta) x2`` over the vertices."""

    theta: float
    k_theta: float
    maximizers: np.ndarray
    indices: np.ndarray

    @property
    def spread(self) -> float:
        """Largest distance between two maximizers."""
        M = self.maximizers
        if len(M) < 2:
            return 0.0
        return float(np.max(np.linalg.norm(M[:, None] - M[None, :], axis=-1)))

    def to_dict(self) -> dict:
        return {"theta": self.theta, "kTheta": self.k_theta, "maximizers": self.maximizers, "indices": self.indices}


def support_value(curve, theta: float, tol: float = 1e-9) -> SupportProbe:
    V = _vertices(curve)
    theta = float(np.mod(theta, TWO_PI))
    vals = V @ np.array([np.cos(theta), np.sin(theta)])
    k = float(vals.max())
    idx = np.flatnonzero(vals >= k - tol * _extent(V))
    return SupportProbe(theta, k, V[idx].copy(), idx)


def theta_grid(count: int) -> np.ndarray:
    """Uniform grid of directions starting at ``pi/2``."""
    return np.mod(np.pi / 2 + TWO_PI * np.arange(count) / count, TWO_PI)


def convexity_certificate(curve, tol: float = 1e-9) -> dict:
    """Distance from the vertices to their convex-hull boundary, plus a cyclic-order test.

    For a convex curve the hull vertices are visited in the same cyclic order
    as along the curve, and every vertex lies on the hull boundary.
    """
    V = _vertices(curve)
    hull = ConvexHull(V)
    H = hull.vertices  # counter-clockwise
    # inside a convex polygon the boundary distance is the nearest facet line
    N, c = hull.equations[:, :2], hull.equations[:, 2]
    dist = np.empty(len(V))
    for start in range(0, len(V), 512):
        blk = V[start : start + 512]
        dist[start : start + len(blk)] = np.maximum(-(blk @ N.T + c), 0).min(axis=1)
    worst = int(np.argmax(dist))
    # hull vertices in curve order must be a cyclic shift of either orientation
    n = len(H)
    shifts = np.diff(np.concatenate([H, H[:1]]))
    steps = np.mod(shifts, len(V))
    ordered = bool(np.sum(steps) == len(V) or np.sum(np.mod(-shifts, len(V))) == len(V))
    bound = tol * _extent(V)
    return {
        "hausdorff": float(dist[worst]),
        "bound": bound,
        "worstVertex": worst,
        "hullVertices": n,
        "cyclicOrder": ordered,
        "passed": bool(dist[worst] < bound and ordered),
    }


@dataclass
class CaseDecision:
    case: str
    probe: Optional[SupportProbe] = None
    certificate: Optional[dict] = None
    grid: int = DEFAULT_GRID

    def to_dict(self) -> dict:
        return {"case": self.case, "probe": self.probe, "certificate": self.certificate, "grid": self.grid}


def detect_case(curve, theta_grid_size: int = DEFAULT_GRID, tol: float = 1e-9) -> CaseDecision:
    """Case II at the first grid direction with spread-out maximizers, else certified case I.

    Raises
    ------
    ClassificationError
        No direction on the grid shows two contacts but the curve is not
        within tolerance of its hull boundary; a finer grid is needed.
    """
    if theta_grid_size < 8:
        raise ValueError("theta grid needs at least 8 directions")
    V = _vertices(curve)
    bound = tol * _extent(V)
    for theta in theta_grid(theta_grid_size):
        probe = support_value(V, theta, tol)
        if len(probe.indices) >= 2 and probe.spread > bound:
            return CaseDecision(CASE_II, probe, None, theta_grid_size)
    cert = convexity_certificate(V, tol)
    if not cert["passed"]:
        raise ClassificationError(
            f"grid too coarse: unique contacts on {theta_grid_size} directions but the curve is "
            f"{cert['hausdorff']:.3g} from its hull boundary; increase the theta grid"
        )
    return CaseDecision(CASE_I, None, cert, theta_grid_size)


def diameter_pair(curve, chunk: int = 1024) -> tuple:
    """Most distant pair of vertices by brute force; returns ``(a, a', k, (i, j))``."""
    V = _vertices(curve)
    if len(V) < 2:
        raise ManifoldError("need at least two vertices")
    best, pair = -1.0, (0, 0)
    for start in range(0, len(V), chunk):
        block = V[start : start + chunk]
        d2 = cdist(block, V, "sqeuclidean")
        k = int(np.argmax(d2))
        if d2.flat[k] > best:
            best = float(d2.flat[k])
            pair = (start + k // len(V), k % len(V))
    if best <= 0:
        raise ManifoldError("all vertices coincide")
    i, j = sorted(pair)
    return V[i].copy(), V[j].copy(), float(np.sqrt(best)), (i, j)


@dataclass
class PlanarFrame:
    """``x' = matrix @ (x - origin)``; a similarity or a rotation."""

    matrix: np.ndarray
    origin: np.ndarray
    flipped: bool = False
    inverse_matrix: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, float)
        self.origin = np.asarray(self.origin, float)
        if self.inverse_matrix is None:
            self.inverse_matrix = np.linalg.inv(self.matrix)

    def apply(self, x) -> np.ndarray:
        return (np.asarray(x, float) - self.origin) @ self.matrix.T

    def invert(self, y) -> np.ndarray:
        return np.asarray(y, float) @ self.inverse_matrix.T + self.origin

    def to_dict(self) -> dict:
        return {"matrix": self.matrix, "origin": self.origin, "flipped": self.flipped}


def _rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def normalize_frame_case1(curve, a, a_prime) -> tuple:
    """Similarity sending ``a`` to the origin and ``a'`` to ``(1, 0)``.

    The second axis is flipped when the curve reaches further below the first
    axis than above it.  Returns the transformed vertices and the frame.
    """
    V = _vertices(curve)
    a = np.asarray(a, float)
    v = np.asarray(a_prime, float) - a
    k = float(np.linalg.norm(v))
    if k == 0:
        raise ManifoldError("diameter endpoints coincide")
    c, s = v / k
    R = np.array([[c, s], [-s, c]])
    S = R / k
    W = (V - a) @ S.T
    flipped = bool(abs(W[:, 1].min()) > abs(W[:, 1].max()))
    if flipped:
        F = np.diag([1.0, -1.0])
        S = F @ S
        W = W @ F
    frame = PlanarFrame(S, a, flipped, inverse_matrix=k * (R.T @ (np.diag([1.0, -1.0]) if flipped else np.eye(2))))
    return W, frame


def select_pair_case1(normalized, tol: float = 1e-9) -> tuple:
    """Extreme-``x1`` crossings of the line ``x2 = 2 k / 3`` where ``k = max x2``."""
    W = _vertices(normalized)
    k = float(W[:, 1].max())
    if k <= tol * _extent(W):
        raise ClassificationError("normalized curve does not rise above the first axis")
    level = 2 * k / 3
    sl = slice_with_hyperplane(SampledManifold(POLYLINE, W), axis=1, level=level)
    if len(sl.points) < 2:
        raise ClassificationError(f"slice at x2={level!r} has {len(sl.points)} points")
    order = np.argsort(sl.points[:, 0], kind="stable")
    return sl.points[order[0]].copy(), sl.points[order[-1]].copy(), level


def select_pair_case2(curve, theta1: float, tol: float = 1e-9) -> tuple:
    """Two outermost contact points of the supporting line with direction ``theta1``.

    Returns ``(p1, p2, frame)``; ``frame`` rotates the support direction to
    ``+x2`` so the curve lies below the contact level.
    """
    V = _vertices(curve)
    probe = support_value(V, theta1, tol)
    if len(probe.indices) < 2 or probe.spread <= tol * _extent(V):
        raise ClassificationError(f"direction {theta1!r} has a single contact point")
    t = np.array([np.sin(probe.theta), -np.cos(probe.theta)])
    pos = probe.maximizers @ t
    p1 = probe.maximizers[int(np.argmin(pos))].copy()
    p2 = probe.maximizers[int(np.argmax(pos))].copy()
    frame = PlanarFrame(_rotation(np.pi / 2 - probe.theta), np.zeros(2))
    return p1, p2, frame


@dataclass
class CircleAnchorResult:
    case: str
    frame: PlanarFrame
    p1: np.ndarray
    p2: np.ndarray
    evidence: dict

    @property
    def anchors(self) -> np.ndarray:
        return np.stack([self.p1, self.p2])

    def to_dict(self) -> dict:
        return {"case": self.case, "frame": self.frame, "p1": self.p1, "p2": self.p2, "evidence": self.evidence}


def select_circle_anchors(curve, theta_grid_size: int = DEFAULT_GRID, tol: float = 1e-9) -> CircleAnchorResult:
    """Classify the curve and pick its two anchors in the original frame.

    Injectivity of the resulting distance mapping is not assumed here; run
    :func:`sqmap.verification.injectivity_check` on the result.
    """
    V = _vertices(curve)
    decision = detect_case(V, theta_grid_size, tol)
    if decision.case == CASE_II:
        p1, p2, frame = select_pair_case2(V, decision.probe.theta, tol)
        evidence = {"theta1": decision.probe.theta, "probe": decision.probe, "grid": theta_grid_size}
        return CircleAnchorResult(CASE_II, frame, p1, p2, evidence)
    a, a2, k, pair = diameter_pair(V)
    W, frame = normalize_frame_case1(V, a, a2)
    q1, q2, level = select_pair_case1(W, tol)
    evidence = {
        "diameterPair": {"a": a, "aPrime": a2, "k": k, "indices": list(pair)},
        "convexity": decision.certificate,
        "kTheta0": 1.5 * level,
        "kTilde": float(W[:, 1].min()),
        "level": level,
        "normalizedAnchors": [q1, q2],
        "grid": theta_grid_size,
    }
    return CircleAnchorResult(CASE_I, frame, frame.invert(q1), frame.invert(q2), evidence)
