"""Numerical certificates for embedding, immersion, fold-side and normal-crossings claims."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .errors import SqmapError
from .geometry import AnchorSet, distance_squared_jacobian, distance_squared_map, numerical_rank
from .manifold import MESH, POLYLINE, SampledManifold
from .normal_form import build_level_fold
from .report import Check, VerificationReport

COLLISION_TOL = 1e-9
RANK_TOL = 1e-7
SEPARATION_FACTOR = 3.0
MAX_LISTED = 50


def _anchor_points(anchors):
    return anchors.points if isinstance(anchors, AnchorSet) else np.atleast_2d(np.asarray(anchors, float))


def _separation_rows(M: SampledManifold, rows: np.ndarray, arc=None, total=None, dist=None) -> np.ndarray:
    if M.kind == POLYLINE:
        d = np.abs(arc[rows][:, None] - arc[None, :])
        return np.minimum(d, total - d)
    return dist[rows]


def find_multiple_points(
    M: SampledManifold,
    tol: float = COLLISION_TOL,
    separation_factor: float = SEPARATION_FACTOR,
) -> list:
    """Clusters of vertices that coincide in ``R^l`` but are far apart on the manifold."""
    V = M.vertices
    pairs = cKDTree(V).query_pairs(tol * M.diameter_bound, output_type="ndarray")
    if len(pairs) == 0:
        return []
    min_sep = separation_factor * M.max_edge_length
    sep = np.array([M.graph_distances([i])[0, j] for i, j in pairs])
    pairs = pairs[sep >= min_sep]
    if len(pairs) == 0:
        return []
    n = M.num_vertices
    G = scipy.sparse.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = scipy.sparse.csgraph.connected_components(G, directed=False)
    involved = np.unique(pairs)
    clusters = {}
    for v in involved:
        clusters.setdefault(int(labels[v]), []).append(int(v))
    return sorted(sorted(c) for c in clusters.values())


def injectivity_check(
    M: SampledManifold,
    anchors,
    separation_factor: float = SEPARATION_FACTOR,
    tol: float = COLLISION_TOL,
    exempt_pairs=None,
    chunk: int = 512,
) -> Check:
    """Brute-force O(N^2) scan for vertex pairs whose images under ``D`` collide.

    Only pairs at least ``separation_factor * max_edge_length`` apart on the
    manifold are compared.  A pair collides when its image distance is at most
    ``tol`` times the image bounding-box diagonal.
    """
    P = _anchor_points(anchors)
    Y = distance_squared_map(P, M.vertices)
    n = len(Y)
    extent = float(np.linalg.norm(Y.max(axis=0) - Y.min(axis=0))) or 1.0
    min_sep = separation_factor * M.max_edge_length
    exempt = {tuple(sorted(map(int, p))) for p in (exempt_pairs or [])}

    arc = total = dist = None
    if M.kind == POLYLINE:
        arc = np.concatenate([[0.0], np.cumsum(M.edge_lengths)])
        total, arc = arc[-1], arc[:-1]
    else:
        dist = M.graph_distances()

    best = np.inf
    best_pair = None
    failures = []
    exempted = []
    cols = np.arange(n)
    for start in range(0, n, chunk):
        rows = np.arange(start, min(start + chunk, n))
        d_img = cdist(Y[rows], Y)
        eligible = (_separation_rows(M, rows, arc, total, dist) >= min_sep) & (cols[None, :] > rows[:, None])
        if not eligible.any():
            continue
        d_img = np.where(eligible, d_img, np.inf)
        for r, c in zip(*np.nonzero(d_img <= tol * extent)):
            pair = (int(rows[r]), int(c))
            (exempted if pair in exempt else failures).append(pair)
            if pair in exempt:
                d_img[r, c] = np.inf
        k = int(np.argmin(d_img))
        val = d_img.flat[k]
        if val < best:
            best = float(val)
            best_pair = (int(rows[k // n]), int(k % n))

    margin = best / extent if np.isfinite(best) else np.inf
    worst = failures[0] if failures else best_pair
    witness = None
    if worst is not None:
        witness = {"pair": list(worst), "points": M.vertices[list(worst)], "images": Y[list(worst)]}
    return Check(
        name="injectivity",
        passed=not failures,
        margin=float(margin),
        witness=witness,
        parameters={
            "separationFactor": separation_factor,
            "minSeparation": min_sep,
            "tolerance": tol,
            "failingPairs": failures[:MAX_LISTED],
            "failingCount": len(failures),
            "exemptedPairs": exempted,
        },
    )


def fold_side_check(
    M_rot: SampledManifold,
    anchors_rotated: AnchorSet,
    level: float,
    k2: float,
    k0: Optional[float] = None,
    neighborhood=None,
) -> Check:
    """Check that folding at ``x_l = level`` cannot glue a below-level vertex to the rest.

    The folded height ``(h - a)^2 + a`` of every vertex below the level must
    stay under ``k2`` and strictly above its own height; when a neighbourhood
    is supplied, all vertices below ``k2`` must belong to it.
    """
    a = float(level)
    if not k2 > a:
        raise SqmapError(f"k2={k2!r} must exceed the level a={a!r}")
    V = M_rot.vertices
    h = V[:, -1]
    k0 = float(h.min()) if k0 is None else float(k0)
    H = build_level_fold(anchors_rotated)
    below = np.flatnonzero(h < a)
    params = {"level": a, "k0": k0, "k2": k2, "belowCount": int(len(below))}
    if len(below) == 0:
        return Check("fold_side", True, float(np.inf), None, params, note="vacuous: no vertex below the level")

    Y = H.apply_target(distance_squared_map(anchors_rotated, V[below]))
    folded = Y[:, -1]
    scale = max(1.0, float(np.max(np.abs(V))))
    drift = float(np.max(np.abs(Y[:, :-1] - V[below, :-1]))) / scale
    margin_high = k2 - float(folded.max())
    margin_graph = float(np.min(folded - h[below]))
    gap = a - k0
    chain = [(k0 - a) ** 2 + a, 2 * gap + a, k2]
    params.update(
        maxFolded=float(folded.max()),
        marginAboveK2=margin_high,
        marginGraph=margin_graph,
        parameterDrift=drift,
        proofChain=chain,
    )
    ok = margin_high > 0 and margin_graph > 0 and drift < 1e-8
    ok = ok and 0 < gap < 1 and chain[0] < chain[1] < chain[2]
    note = None
    if neighborhood is not None:
        low = np.flatnonzero(h < k2)
        missing = np.setdiff1d(low, neighborhood.members)
        params["outsideNeighborhood"] = missing[:MAX_LISTED].tolist()
        if len(missing):
            ok = False
            note = "vertices below k2 fall outside the graph neighbourhood"
    worst = int(below[np.argmax(folded)])
    return Check("fold_side", bool(ok), float(min(margin_high, margin_graph)), {"vertex": worst, "point": V[worst]}, params, note)


@dataclass
class TangentSample:
    """Tangent directions of the sampled manifold at one vertex."""

    vertex: int
    base_point: np.ndarray
    basis: np.ndarray

    @property
    def independent(self) -> bool:
        s = np.linalg.svd(self.basis, compute_uv=False)
        return bool(s[-1] > RANK_TOL * s[0])


def tangent_sample(M: SampledManifold, v: int) -> TangentSample:
    return TangentSample(int(v), M.vertices[v].copy(), M.tangent_basis(v))


def _tangent_stack(M: SampledManifold) -> np.ndarray:
    if M.kind == POLYLINE:
        V = M.vertices
        return (np.roll(V, -1, axis=0) - np.roll(V, 1, axis=0))[:, None, :]
    return np.stack([M.tangent_basis(v) for v in range(M.num_vertices)])


def immersion_check(M: SampledManifold, anchors, tol: float = RANK_TOL) -> Check:
    """Rank of the pushed tangent basis ``J_D(x) T`` at every vertex."""
    P = _anchor_points(anchors)
    T = _tangent_stack(M)
    sT = np.linalg.svd(T, compute_uv=False)
    bad_basis = np.flatnonzero(sT[:, -1] <= tol * sT[:, 0])
    J = distance_squared_jacobian(P, M.vertices)
    W = J @ np.swapaxes(T, 1, 2)
    sW = np.linalg.svd(W, compute_uv=False)
    sJ = np.linalg.norm(J, ord=2, axis=(1, 2))
    ratio = sW[:, M.intrinsic_dim - 1] / np.maximum(sJ * sT[:, 0], np.finfo(float).tiny)
    worst = int(np.argmin(ratio))
    params = {"tolerance": tol, "rank": M.intrinsic_dim}
    note = None
    passed = bool(ratio[worst] > tol)
    if len(bad_basis):
        passed = False
        note = f"degenerate tangent basis at {len(bad_basis)} vertices (data defect)"
        params["degenerateVertices"] = bad_basis[:MAX_LISTED].tolist()
    failing = np.flatnonzero(ratio <= tol)
    params["failingVertices"] = failing[:MAX_LISTED].tolist()
    return Check("immersion", passed, float(ratio[worst]), {"vertex": worst, "point": M.vertices[worst]}, params, note)


def _complement_basis(W: np.ndarray, tol: float) -> tuple:
    U, s, _ = np.linalg.svd(W, full_matrices=True)
    r = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    return r, U[:, r:]


def normal_crossings_check(
    M: SampledManifold,
    anchors,
    clusters=None,
    tol: float = RANK_TOL,
) -> Check:
    """Codimension identity for the pushed tangent spaces at every multiple point."""
    P = _anchor_points(anchors)
    ell = M.ambient_dim
    if clusters is None:
        clusters = find_multiple_points(M)
    params = {"tolerance": tol, "multiplePoints": [list(c) for c in clusters]}
    if not clusters:
        return Check("normal_crossings", True, float(np.inf), None, params, note="vacuous: no multiple points")
    if M.kind == MESH:
        return Check("normal_crossings", False, 0.0, {"cluster": clusters[0]}, params,
                     note="multiple points on meshes are flagged, not checked")
    worst_margin, worst = np.inf, None
    passed = True
    note = None
    for cluster in clusters:
        spaces = []
        for v in cluster:
            W = distance_squared_jacobian(P, M.vertices[v]) @ M.tangent_basis(v).T
            spaces.append(_complement_basis(W, tol))
        for s in range(2, len(cluster) + 1):
            for subset in combinations(range(len(cluster)), s):
                comps = [spaces[j][1] for j in subset]
                expected = sum(ell - spaces[j][0] for j in subset)
                if expected > ell:
                    passed = False
                    note = "multiplicity too high for transversality (non-generic input)"
                    worst = {"cluster": cluster, "subset": [cluster[j] for j in subset]}
                    worst_margin = 0.0
                    continue
                stacked = np.hstack(comps)
                got = numerical_rank(stacked, tol)
                sv = np.linalg.svd(stacked, compute_uv=False)
                margin = float(sv[expected - 1]) if expected else np.inf
                if got != expected:
                    passed = False
                    margin = 0.0 if got < expected else margin
                if margin < worst_margin:
                    worst_margin = margin
                    worst = {"cluster": cluster, "subset": [cluster[j] for j in subset],
                             "codimIntersection": got, "codimSum": expected}
    return Check("normal_crossings", passed, float(worst_margin), worst, params, note)


def run_full_verification(
    M: SampledManifold,
    state,
    immersed: bool = False,
    separation_factor: float = SEPARATION_FACTOR,
) -> VerificationReport:
    """All certificates for a completed anchor selection.

    With ``immersed=True`` the collisions at the input's own multiple points
    are exempted from the injectivity check.
    """
    report = VerificationReport()
    clusters = find_multiple_points(M, separation_factor=separation_factor)
    double_pairs = [tuple(p) for c in clusters for p in combinations(c, 2)]
    inj = injectivity_check(
        M, state.anchors, separation_factor, exempt_pairs=double_pairs if immersed else None
    )
    if not inj.passed and clusters:
        if set(map(tuple, inj.parameters["failingPairs"])) <= set(double_pairs) and inj.parameters["failingCount"] <= len(double_pairs):
            inj.note = "expected for immersed input: collisions only at the input's multiple points"
    report.add(inj)
    report.add(
        fold_side_check(state.rotated, state.anchors_rotated, state.level, state.k2, state.k0, state.neighborhood)
    )
    report.add(immersion_check(M, state.anchors))
    if clusters:
        report.add(normal_crossings_check(M, state.anchors, clusters))
    return report
