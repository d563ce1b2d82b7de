"""Sampled closed manifolds: closed polylines (m=1) and closed triangle meshes (m=2).

File formats
------------
Polyline CSV
    One vertex per line, ``x1,x2,...,xl``; the loop closes implicitly from the
    last vertex back to the first.
Mesh (``OFFLIKE``)
    Line 1 is ``OFFLIKE l nv nt``, followed by ``nv`` vertex lines of ``l``
    reals and ``nt`` lines of three 0-based vertex indices.  Fields may be
    separated by whitespace or commas.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Optional

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph

from .errors import DimensionError, ManifoldError
from .geometry import as_point, read_points_csv

POLYLINE = "closedPolyline"
MESH = "triangleMesh"


class SampledManifold:
    """Vertices in ``R^l`` plus an edge ring (polyline) or triangle list (mesh).

    Invariants are checked on construction; instances are treated as
    read-only afterwards.
    """

    def __init__(self, kind, vertices, triangles=None, allow_components=False):
        if kind not in (POLYLINE, MESH):
            raise ManifoldError(f"unknown manifold kind {kind!r}")
        V = as_point(vertices)
        if V.ndim != 2:
            raise DimensionError("vertices must be an (N, l) array")
        V = V.copy()
        V.setflags(write=False)
        self.kind = kind
        self.vertices = V
        if kind == POLYLINE:
            self.triangles = None
            self.intrinsic_dim = 1
            self._check_polyline()
        else:
            if triangles is None:
                raise ManifoldError("a triangle mesh needs a triangle list")
            T = np.asarray(triangles, dtype=int)
            if T.ndim != 2 or T.shape[1] != 3:
                raise ManifoldError("triangles must be an (M, 3) integer array")
            T = T.copy()
            T.setflags(write=False)
            self.triangles = T
            self.intrinsic_dim = 2
            self._check_mesh(allow_components)
        if self.intrinsic_dim + 1 > self.ambient_dim:
            raise DimensionError(f"need m+1 <= l, got m={self.intrinsic_dim}, l={self.ambient_dim}")

    # -- validation -------------------------------------------------------

    def _check_polyline(self):
        V = self.vertices
        if V.shape[0] < 3:
            raise ManifoldError("a closed polyline needs at least three vertices")
        step = np.linalg.norm(np.roll(V, -1, axis=0) - V, axis=1)
        if np.any(step == 0.0):
            i = int(np.flatnonzero(step == 0.0)[0])
            raise ManifoldError(f"consecutive vertices {i} and {(i + 1) % len(V)} coincide")

    def _check_mesh(self, allow_components):
        T = self.triangles
        nv = self.vertices.shape[0]
        if T.size == 0:
            raise ManifoldError("empty triangle list")
        if T.min() < 0 or T.max() >= nv:
            raise ManifoldError("triangle index out of range")
        if np.any((T[:, 0] == T[:, 1]) | (T[:, 1] == T[:, 2]) | (T[:, 0] == T[:, 2])):
            raise ManifoldError("degenerate triangle with repeated vertex")
        e = np.sort(np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]]), axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        bad = uniq[counts != 2]
        if len(bad):
            kind = "boundary" if np.any(counts == 1) else "non-manifold"
            raise ManifoldError(f"{kind} edge {tuple(int(i) for i in bad[0])} (mesh must be closed)")
        used = np.unique(T)
        if len(used) != nv:
            raise ManifoldError("mesh has vertices not used by any triangle")
        if not allow_components:
            ncomp, _ = scipy.sparse.csgraph.connected_components(self.adjacency, directed=False)
            if ncomp != 1:
                raise ManifoldError(f"mesh has {ncomp} components")

    # -- structure --------------------------------------------------------

    @property
    def ambient_dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @cached_property
    def edges(self) -> np.ndarray:
        if self.kind == POLYLINE:
            i = np.arange(self.num_vertices)
            return np.stack([i, (i + 1) % self.num_vertices], axis=1)
        T = self.triangles
        e = np.sort(np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]]), axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def adjacency(self) -> scipy.sparse.csr_matrix:
        e = self.edges
        w = np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)
        n = self.num_vertices
        A = scipy.sparse.coo_matrix((w, (e[:, 0], e[:, 1])), shape=(n, n))
        return (A + A.T).tocsr()

    def neighbors(self, v: int) -> np.ndarray:
        A = self.adjacency
        return A.indices[A.indptr[v] : A.indptr[v + 1]]

    @cached_property
    def vertex_triangles(self) -> list:
        out = [[] for _ in range(self.num_vertices)]
        if self.triangles is not None:
            for t, tri in enumerate(self.triangles):
                for v in tri:
                    out[v].append(t)
        return out

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    @property
    def max_edge_length(self) -> float:
        return float(self.edge_lengths.max())

    @cached_property
    def diameter_bound(self) -> float:
        """Length of the bounding-box diagonal."""
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))

    def graph_distances(self, sources=None) -> np.ndarray:
        """Intrinsic (shortest edge-path) distances from ``sources`` to every vertex."""
        if self.kind == POLYLINE:
            arc = np.concatenate([[0.0], np.cumsum(self.edge_lengths)])
            total, arc = arc[-1], arc[:-1]
            src = np.arange(self.num_vertices) if sources is None else np.atleast_1d(sources)
            d = np.abs(arc[src][:, None] - arc[None, :])
            return np.minimum(d, total - d)
        return scipy.sparse.csgraph.dijkstra(self.adjacency, directed=False, indices=sources)

    def tangent_basis(self, v: int) -> np.ndarray:
        """``(m, l)`` tangent directions at vertex ``v``.

        Polylines use the central chord; meshes use the two edges of the
        best-conditioned incident triangle.
        """
        V = self.vertices
        if self.kind == POLYLINE:
            n = self.num_vertices
            return (V[(v + 1) % n] - V[(v - 1) % n])[None, :]
        best, best_s = None, -1.0
        for t in self.vertex_triangles[v]:
            others = [w for w in self.triangles[t] if w != v]
            basis = V[others] - V[v]
            s = np.linalg.svd(basis, compute_uv=False)
            score = s[-1] / s[0]
            if score > best_s:
                best, best_s = basis, score
        return best

    def with_vertices(self, vertices) -> "SampledManifold":
        return SampledManifold(self.kind, vertices, self.triangles, allow_components=True)

    def to_offlike(self) -> str:
        if self.kind != MESH:
            raise ManifoldError("only meshes use the OFFLIKE format")
        lines = [f"OFFLIKE {self.ambient_dim} {self.num_vertices} {len(self.triangles)}"]
        lines += [" ".join(repr(float(c)) for c in v) for v in self.vertices]
        lines += [" ".join(str(int(i)) for i in t) for t in self.triangles]
        return "\n".join(lines) + "\n"


def _split_fields(line: str) -> list:
    return line.replace(",", " ").split()


def read_offlike(path) -> SampledManifold:
    with open(path) as fh:
        lines = [ln for ln in (raw.strip() for raw in fh) if ln and not ln.startswith("#")]
    if not lines:
        raise ManifoldError(f"{path}: empty file")
    header = _split_fields(lines[0])
    if len(header) != 4 or header[0] != "OFFLIKE":
        raise ManifoldError(f"{path}: expected header 'OFFLIKE l nv nt', got {lines[0]!r}")
    try:
        ell, nv, nt = (int(h) for h in header[1:])
        V = np.array([[float(c) for c in _split_fields(ln)] for ln in lines[1 : 1 + nv]])
        T = np.array([[int(c) for c in _split_fields(ln)] for ln in lines[1 + nv : 1 + nv + nt]])
    except ValueError as exc:
        raise ManifoldError(f"{path}: {exc}") from exc
    if V.shape != (nv, ell) or T.shape != (nt, 3) or len(lines) != 1 + nv + nt:
        raise ManifoldError(f"{path}: counts in header do not match the file body")
    return SampledManifold(MESH, V, T)


def load_manifold(path, kind: Optional[str] = None) -> SampledManifold:
    """Load a polyline CSV or an OFFLIKE mesh; ``kind`` is sniffed from the header when omitted."""
    if kind is None:
        with open(path) as fh:
            first = fh.readline()
        kind = MESH if first.strip().startswith("OFFLIKE") else POLYLINE
    if kind == MESH:
        return read_offlike(path)
    return SampledManifold(POLYLINE, read_points_csv(path))


def save_manifold(path, M: SampledManifold) -> None:
    if M.kind == MESH:
        with open(path, "w") as fh:
            fh.write(M.to_offlike())
    else:
        from .geometry import write_points_csv

        write_points_csv(path, M.vertices)


# -- height queries ------------------------------------------------------------


@dataclass
class HeightExtrema:
    k0: float
    minimizers: np.ndarray

    @property
    def unique(self) -> bool:
        return len(self.minimizers) == 1

    def __iter__(self):
        return iter((self.k0, self.minimizers))


def height_extrema(M: SampledManifold, axis: int, tol: float = 1e-9) -> HeightExtrema:
    """Minimum of coordinate ``axis`` (0-based) and every vertex within ``tol * extent`` of it."""
    h = M.vertices[:, axis]
    k0 = float(h.min())
    extent = max(float(h.max() - k0), 1e-300)
    return HeightExtrema(k0, np.flatnonzero(h <= k0 + tol * extent))


@dataclass
class GraphNeighborhood:
    base: int
    axis: int
    param_axes: tuple
    members: np.ndarray
    values: np.ndarray
    cap: float

    def contains(self, vertices) -> np.ndarray:
        return np.isin(vertices, self.members)


def _choose_param_axes(M: SampledManifold, q: int, axis: int, tol: float) -> tuple:
    V = M.vertices
    others = [k for k in range(M.ambient_dim) if k != axis]
    if M.kind == POLYLINE:
        n = M.num_vertices
        fwd = V[(q + 1) % n] - V[q]
        bwd = V[(q - 1) % n] - V[q]
        scale = np.linalg.norm(fwd) + np.linalg.norm(bwd)
        best, best_val = None, tol * scale
        for k in others:
            if fwd[k] * bwd[k] < 0 and abs(fwd[k] - bwd[k]) > best_val:
                best, best_val = k, abs(fwd[k] - bwd[k])
        if best is None:
            raise ManifoldError(f"no coordinate projects the neighbors of vertex {q} to opposite sides")
        return (best,)
    nbrs = M.neighbors(q)
    offsets = V[nbrs] - V[q]
    _, s, Vt = np.linalg.svd(offsets, full_matrices=False)
    T = Vt[:2]
    best, best_val = None, tol
    for pair in combinations(others, 2):
        d = abs(np.linalg.det(T[:, list(pair)]))
        if d > best_val:
            best, best_val = pair, d
    if best is None:
        raise ManifoldError(f"tangent plane at vertex {q} does not project onto any coordinate plane")
    return tuple(best)


def graph_neighborhood(
    M: SampledManifold,
    q: int,
    axis: int,
    cap: Optional[float] = None,
    cap_fraction: float = 0.5,
    tol: float = 1e-9,
) -> GraphNeighborhood:
    """Grow a vertex set around the height minimizer ``q`` that is a graph over ``m`` coordinates.

    Growth is breadth-first and stops at vertices whose height reaches
    ``cap`` (default ``k0 + cap_fraction * (max - k0)``) or whose addition would
    break injectivity of the projection onto the parameter coordinates.
    """
    V = M.vertices
    h = V[:, axis]
    ext = height_extrema(M, axis, tol)
    if not ext.unique or ext.minimizers[0] != q:
        raise ManifoldError(f"vertex {q} is not the unique height minimizer along axis {axis}")
    diam = M.diameter_bound
    dup = np.flatnonzero(np.linalg.norm(V - V[q], axis=1) <= tol * diam)
    if len(dup) > 1:
        raise ManifoldError(f"vertex {q} coincides with vertex {int(dup[dup != q][0])}; projection not injective")
    if cap is None:
        cap = ext.k0 + cap_fraction * (float(h.max()) - ext.k0)
    params = _choose_param_axes(M, q, axis, tol)
    proj = V[:, list(params)]
    sep = tol * diam

    if M.kind == POLYLINE:
        members = _grow_polyline(M, q, params[0], h, cap, sep)
    else:
        members = _grow_mesh(M, q, params, h, cap, proj, sep)
    members = np.array(sorted(members), dtype=int)
    rest = [k for k in range(M.ambient_dim) if k not in params]
    return GraphNeighborhood(q, axis, params, members, V[np.ix_(members, rest)], float(cap))


def _grow_polyline(M, q, p, h, cap, sep):
    n = M.num_vertices
    x = M.vertices[:, p]
    members = {q}
    first_dir = np.sign(x[(q + 1) % n] - x[q])
    for step, direction in ((1, first_dir), (-1, -first_dir)):
        prev, j = q, (q + step) % n
        while j not in members and h[j] < cap:
            dx = x[j] - x[prev]
            if np.sign(dx) != direction or abs(dx) <= sep:
                break
            members.add(j)
            prev, j = j, (j + step) % n
    return members


def _signed_area(P):
    return (P[1, 0] - P[0, 0]) * (P[2, 1] - P[0, 1]) - (P[1, 1] - P[0, 1]) * (P[2, 0] - P[0, 0])


def _grow_mesh(M, q, params, h, cap, proj, sep):
    T = M.triangles
    star = M.vertex_triangles[q]
    areas = np.array([_signed_area(proj[T[t]]) for t in star])
    ref = np.sign(areas[0])
    if ref == 0 or np.any(np.sign(areas) != ref):
        raise ManifoldError(f"projection folds over at vertex {q}")
    members = {q}
    member_list = [q]
    queue = deque(int(w) for w in M.neighbors(q))
    seen = {q} | set(queue)
    while queue:
        v = queue.popleft()
        if h[v] >= cap:
            continue
        if np.min(np.linalg.norm(proj[member_list] - proj[v], axis=1)) <= sep:
            continue
        ok = True
        for t in M.vertex_triangles[v]:
            tri = T[t]
            if all(w in members or w == v for w in tri):
                if np.sign(_signed_area(proj[tri])) != ref:
                    ok = False
                    break
        if not ok:
            continue
        members.add(v)
        member_list.append(v)
        for w in M.neighbors(v):
            w = int(w)
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return members


# -- slicing ---------------------------------------------------------------


@dataclass
class Slice:
    """Intersection of a sampled manifold with ``{x : x[axis] = level}``.

    ``edges[i]`` is the manifold edge that produced ``points[i]``; for meshes
    ``loops`` lists the closed cross-section polylines as point indices.
    """

    axis: int
    level: float
    points: np.ndarray
    edges: np.ndarray
    segments: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    loops: list = field(default_factory=list)
    perturbed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __len__(self):
        return len(self.points)


def slice_with_hyperplane(M: SampledManifold, axis: int, level: float, tol: float = 1e-12) -> Slice:
    """Linearly interpolated crossings of every edge straddling the level.

    Vertices within ``tol * max(1, extent)`` of the level are treated as
    lying just above it; their indices are reported in ``perturbed``.
    """
    V = M.vertices
    level = float(level)
    h = V[:, axis].astype(float)
    eps = tol * max(1.0, float(h.max() - h.min()))
    on_level = np.abs(h - level) <= eps
    h_eff = np.where(on_level, level + eps, h)
    E = M.edges
    s0 = h_eff[E[:, 0]] - level
    s1 = h_eff[E[:, 1]] - level
    cross = np.flatnonzero(s0 * s1 < 0)
    i, j = E[cross, 0], E[cross, 1]
    t = (level - h_eff[i]) / (h_eff[j] - h_eff[i])
    pts = V[i] + t[:, None] * (V[j] - V[i])
    pts[:, axis] = level
    result = Slice(axis, level, pts, E[cross], perturbed=np.flatnonzero(on_level))
    if M.kind == MESH and len(cross):
        result.segments, result.loops = _chain_mesh_slice(M, E[cross], h_eff, level)
    return result


def _chain_mesh_slice(M, crossing_edges, h_eff, level):
    index = {(int(a), int(b)): k for k, (a, b) in enumerate(crossing_edges)}
    segments = []
    for tri in M.triangles:
        hit = []
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            if key in index:
                hit.append(index[key])
        if len(hit) == 2:
            segments.append(hit)
    segments = np.array(segments, dtype=int).reshape(-1, 2)
    nbr = [[] for _ in range(len(crossing_edges))]
    for a, b in segments:
        nbr[a].append(b)
        nbr[b].append(a)
    loops, seen = [], set()
    for start in range(len(crossing_edges)):
        if start in seen or len(nbr[start]) != 2:
            continue
        loop, prev, cur = [start], None, start
        seen.add(start)
        while True:
            nxt = nbr[cur][0] if nbr[cur][0] != prev else nbr[cur][1]
            if nxt == start or nxt in seen:
                break
            loop.append(nxt)
            seen.add(nxt)
            prev, cur = cur, nxt
        loops.append(np.array(loop, dtype=int))
    return segments, loops
