"""Coordinate-change chains reducing distance-squared mappings to normal forms.

Three reductions are built, each as an explicit list of invertible stages on
the source and target side:

* fold (``2 <= l <= n``): ``D`` becomes ``(x_1, ..., x_{l-1}, x_l^2 + ... + x_n^2)``;
* inclusion (``n < l``): ``D`` becomes ``(x_1, ..., x_n, 0, ..., 0)``;
* level fold (``l = n``, anchors on ``x_l = a``): a target map ``H`` with
  ``H o D = (x_1, ..., x_{l-1}, (x_l - a)^2 + a)``.

Every stage stores its inverse at construction time.  Points are row vectors
(or ``(N, k)`` stacks); an affine stage acts as ``y = M x + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import DimensionError, GeneralPositionError, SqmapError
from .geometry import (
    AnchorSet,
    as_point,
    distance_squared_jacobian,
    distance_squared_map,
    is_general_position,
)
from .report import Check, VerificationReport

FOLD = "fold"
INCLUSION = "inclusion"
LEVEL_FOLD = "levelFold"

RESIDUAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class AffineMap:
    matrix: np.ndarray
    offset: np.ndarray
    side: str
    inverse_matrix: np.ndarray
    name: str = ""

    @classmethod
    def build(cls, matrix, offset=None, side="target", name="", inverse=None, tol=1e-13):
        matrix = np.array(matrix, dtype=float)
        k = matrix.shape[0]
        if matrix.shape != (k, k):
            raise DimensionError("affine stage must be square")
        offset = np.zeros(k) if offset is None else np.array(offset, dtype=float)
        s = np.linalg.svd(matrix, compute_uv=False)
        if s[-1] <= tol * s[0]:
            raise SqmapError(f"stage {name!r} is not invertible (sigma_min/sigma_max = {s[-1] / s[0]:.2e})")
        if inverse is None:
            inverse = np.linalg.solve(matrix, np.eye(k))
        return cls(matrix, offset, side, np.array(inverse, dtype=float), name)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x):
        return x @ self.matrix.T + self.offset

    def invert(self, y):
        return (y - self.offset) @ self.inverse_matrix.T

    def jacobian(self, x):
        x = np.asarray(x)
        return np.broadcast_to(self.matrix, x.shape[:-1] + self.matrix.shape)

    def to_dict(self) -> dict:
        return {
            "kind": "affine",
            "name": self.name,
            "side": self.side,
            "matrix": self.matrix.tolist(),
            "offset": self.offset.tolist(),
            "inverse": self.inverse_matrix.tolist(),
        }


@dataclass(frozen=True, eq=False)
class QuadraticShear:
    """``y = x`` except ``y[target] = x[target] + x[I]^T Q x[I]``, then ``y += offset``.

    ``I`` (``indices``) never contains ``target``, so the map is triangular
    and inverts exactly.
    """

    dim: int
    target: int
    indices: np.ndarray
    coeffs: np.ndarray
    side: str = "target"
    offset: Optional[np.ndarray] = None
    name: str = ""

    @classmethod
    def build(cls, dim, target, indices, coeffs, side="target", offset=None, name=""):
        indices = np.array(indices, dtype=int)
        if target in set(indices.tolist()):
            raise SqmapError("the sheared coordinate may not feed its own quadratic form")
        coeffs = np.array(coeffs, dtype=float)
        coeffs = 0.5 * (coeffs + coeffs.T)
        offset = np.zeros(dim) if offset is None else np.array(offset, dtype=float)
        return cls(dim, int(target), indices, coeffs, side, offset, name)

    def _quad(self, x):
        xs = x[..., self.indices]
        return np.einsum("...i,ij,...j->...", xs, self.coeffs, xs)

    def apply(self, x):
        y = np.array(x, dtype=float, copy=True)
        y[..., self.target] += self._quad(x)
        return y + self.offset

    def invert(self, y):
        x = np.array(y, dtype=float, copy=True) - self.offset
        x[..., self.target] -= self._quad(x)
        return x

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        J = np.broadcast_to(np.eye(self.dim), x.shape[:-1] + (self.dim, self.dim)).copy()
        grad = 2.0 * x[..., self.indices] @ self.coeffs
        J[..., self.target, self.indices] += grad
        return J

    def to_dict(self) -> dict:
        return {
            "kind": "quadshear",
            "name": self.name,
            "side": self.side,
            "dim": self.dim,
            "target": self.target,
            "indices": self.indices.tolist(),
            "coeffs": self.coeffs.tolist(),
            "offset": self.offset.tolist(),
        }


def stage_from_dict(data: dict):
    if data["kind"] == "affine":
        return AffineMap.build(
            data["matrix"], data["offset"], data["side"], data.get("name", ""), inverse=data.get("inverse")
        )
    if data["kind"] == "quadshear":
        return QuadraticShear.build(
            data["dim"], data["target"], data["indices"], data["coeffs"],
            data["side"], data.get("offset"), data.get("name", ""),
        )
    raise SqmapError(f"unknown stage kind {data['kind']!r}")


@dataclass(frozen=True, eq=False)
class DiffeoChain:
    """``targets o D_anchors o sources``; both lists are in order of application."""

    source_maps: tuple
    target_maps: tuple
    anchors: AnchorSet
    kind: str
    info: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.anchors.dim

    @property
    def ell(self) -> int:
        return self.anchors.count

    def apply_source(self, x):
        for s in self.source_maps:
            x = s.apply(x)
        return x

    def apply_target(self, y):
        for t in self.target_maps:
            y = t.apply(y)
        return y

    def normal_form(self, x):
        x = as_point(x, self.n)
        ell, n = self.ell, self.n
        if self.kind == FOLD:
            last = np.sum(x[..., ell - 1 :] ** 2, axis=-1)
            return np.concatenate([x[..., : ell - 1], last[..., None]], axis=-1)
        if self.kind == INCLUSION:
            pad = np.zeros(x.shape[:-1] + (ell - n,))
            return np.concatenate([x, pad], axis=-1)
        a = self.anchors.points[0, -1]
        last = (x[..., -1] - a) ** 2 + a
        return np.concatenate([x[..., :-1], last[..., None]], axis=-1)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "anchors": self.anchors.to_dict(),
            "stages": [s.to_dict() for s in self.source_maps + self.target_maps],
            "info": self.info,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DiffeoChain":
        stages = [stage_from_dict(s) for s in data["stages"]]
        return cls(
            tuple(s for s in stages if s.side == "source"),
            tuple(s for s in stages if s.side == "target"),
            AnchorSet.from_dict(data["anchors"]),
            data["kind"],
            dict(data.get("info", {})),
        )


def evaluate_chain(chain: DiffeoChain, x) -> np.ndarray:
    x = as_point(x, chain.n)
    return chain.apply_target(distance_squared_map(chain.anchors, chain.apply_source(x)))


def chain_jacobian(chain: DiffeoChain, x) -> np.ndarray:
    """Exact Jacobian of the conjugated map by the chain rule; shape ``(..., l, n)``."""
    x = as_point(x, chain.n)
    J = np.broadcast_to(np.eye(chain.n), x.shape[:-1] + (chain.n, chain.n))
    for s in chain.source_maps:
        J = s.jacobian(x) @ J
        x = s.apply(x)
    J = distance_squared_jacobian(chain.anchors, x) @ J
    y = distance_squared_map(chain.anchors, x)
    for t in chain.target_maps:
        J = t.jacobian(y) @ J
        y = t.apply(y)
    return J


def _require_anchor_set(anchors) -> AnchorSet:
    return anchors if isinstance(anchors, AnchorSet) else AnchorSet(anchors)


def _first_reduction(P: np.ndarray) -> AffineMap:
    """Target stage turning ``D`` into ``((x-p_1).(p_k-p_1))_{k>=2}, |x-p_1|^2)``."""
    ell = P.shape[0]
    M = np.zeros((ell, ell))
    inv = np.zeros((ell, ell))
    off = np.zeros(ell)
    for k in range(ell - 1):
        M[k, 0] = 0.5
        M[k, k + 1] = -0.5
        off[k] = 0.5 * np.sum((P[0] - P[k + 1]) ** 2)
        inv[k + 1, ell - 1] = 1.0
        inv[k + 1, k] = -2.0
    M[ell - 1, 0] = 1.0
    inv[0, ell - 1] = 1.0
    return AffineMap.build(M, off, "target", "H1", inverse=inv)


def _block_target(B: np.ndarray, B_inv: np.ndarray, name: str) -> AffineMap:
    """``(X_1..X_{l-1}) -> (X_1..X_{l-1}) B``, last coordinate untouched."""
    k = B.shape[0] + 1
    M = np.eye(k)
    M[:-1, :-1] = B.T
    inv = np.eye(k)
    inv[:-1, :-1] = B_inv.T
    return AffineMap.build(M, None, "target", name, inverse=inv)


def _check_general_position(P, tol, what="anchors"):
    ok, rank = is_general_position(P, tol)
    if not ok:
        raise GeneralPositionError(f"{what} are not in general position (rank {rank})")


def build_fold_reduction(anchors, tol: Optional[float] = None) -> DiffeoChain:
    """Chain conjugating ``D`` to ``(x_1, ..., x_{l-1}, x_l^2 + ... + x_n^2)``.

    Source pivot coordinates come from a column-pivoted QR of the difference
    matrix; the residual quadratic form in ``x_l..x_n`` is completed exactly
    through a Cholesky factor, so cross terms between the ``alpha`` rows are
    handled.
    """
    anchors = _require_anchor_set(anchors)
    tol = anchors.tolerance if tol is None else tol
    P = anchors.points
    ell, n = P.shape
    if ell > n:
        raise SqmapError(f"fold reduction needs l <= n (got l={ell}, n={n}); use build_inclusion_reduction")
    if ell < 2:
        raise SqmapError("fold reduction needs at least two anchors")
    _check_general_position(P, tol)

    # A has one column per difference vector p_k - p_1 and one row per source coordinate.
    A = (P[1:] - P[0]).T
    _, _, piv = scipy.linalg.qr(A.T, pivoting=True, mode="economic")
    pivots = list(piv[: ell - 1])
    perm = pivots + sorted(set(range(n)) - set(pivots))
    S = np.zeros((n, n))
    S[perm, np.arange(n)] = 1.0
    A_perm = A[perm]
    A_top = A_perm[: ell - 1]
    B = np.linalg.solve(A_top, np.eye(ell - 1))
    AB = A_perm @ B
    alpha = AB[ell - 1 :]

    t = n - ell + 1
    I_s = np.eye(ell - 1)
    I_t = np.eye(t)
    C_inv_T = np.block([[I_s, -alpha.T], [np.zeros((t, ell - 1)), I_t]])
    C_T = np.block([[I_s, alpha.T], [np.zeros((t, ell - 1)), I_t]])

    # |w_s - alpha^T w_t|^2 + |w_t|^2
    #   = (w_t - G^{-1} alpha w_s)^T G (w_t - G^{-1} alpha w_s) + w_s^T R w_s
    G = alpha @ alpha.T + I_t
    R = np.linalg.solve(I_s + alpha.T @ alpha, I_s)
    L = np.linalg.cholesky(G)
    L_inv_T = scipy.linalg.solve_triangular(L, I_t, lower=True).T
    shift = np.linalg.solve(G, alpha)
    M6 = np.block([[I_s, np.zeros((ell - 1, t))], [shift, L_inv_T]])
    M6_inv = np.block([[I_s, np.zeros((ell - 1, t))], [-L.T @ shift, L.T]])

    sources = (
        AffineMap.build(M6, None, "source", "H6", inverse=M6_inv),
        AffineMap.build(C_inv_T, None, "source", "H4", inverse=C_T),
        AffineMap.build(S, None, "source", "pivot", inverse=S.T),
        AffineMap.build(np.eye(n), P[0], "source", "H2", inverse=np.eye(n)),
    )
    targets = (
        _first_reduction(P),
        _block_target(B, A_top, "H3"),
        QuadraticShear.build(ell, ell - 1, np.arange(ell - 1), -R, "target", name="H5"),
    )
    info = {
        "pivots": [int(i) for i in pivots],
        "alpha": alpha.tolist(),
        "condition": float(np.linalg.cond(A_top)),
        "factorizationResidual": float(np.max(np.abs(AB[: ell - 1] - I_s))),
    }
    return DiffeoChain(sources, targets, anchors, FOLD, info)


def build_inclusion_reduction(anchors, tol: Optional[float] = None) -> DiffeoChain:
    """Chain conjugating ``D`` to ``(x_1, ..., x_n, 0, ..., 0)`` when ``n < l``."""
    anchors = _require_anchor_set(anchors)
    tol = anchors.tolerance if tol is None else tol
    P = anchors.points
    ell, n = P.shape
    if not n < ell:
        raise SqmapError(f"inclusion reduction needs n < l (got l={ell}, n={n})")
    _check_general_position(P[: n + 1], tol, "the first n+1 anchors")

    A = (P[1:] - P[0]).T
    A1, A2 = A[:, :n], A[:, n:]
    A1_inv = np.linalg.solve(A1, np.eye(n))
    r = ell - 1 - n
    B = np.block([[A1_inv, -A1_inv @ A2], [np.zeros((r, n)), np.eye(r)]])
    B_inv = np.block([[A1, A2], [np.zeros((r, n)), np.eye(r)]])

    sources = (AffineMap.build(np.eye(n), P[0], "source", "H2", inverse=np.eye(n)),)
    targets = (
        _first_reduction(P),
        _block_target(B, B_inv, "H3"),
        QuadraticShear.build(ell, ell - 1, np.arange(n), -np.eye(n), "target", name="H4~"),
    )
    info = {"condition": float(np.linalg.cond(A1))}
    return DiffeoChain(sources, targets, anchors, INCLUSION, info)


def build_level_fold(anchors, tol: Optional[float] = None) -> DiffeoChain:
    """Target map ``H = H4' o H3 o H1`` with ``H o D = (x_1, ..., x_{l-1}, (x_l - a)^2 + a)``.

    Returned as a chain with no source stages.
    """
    anchors = _require_anchor_set(anchors)
    tol = anchors.tolerance if tol is None else tol
    P = anchors.points
    ell, n = P.shape
    if ell != n or ell < 2:
        raise SqmapError(f"level fold needs l = n >= 2 (got l={ell}, n={n})")
    a = P[0, -1]
    if not np.all(P[:, -1] == a):
        raise SqmapError("anchors do not share their last coordinate")
    if anchors.shared_last_coord is None:
        anchors = AnchorSet(P, shared_last_coord=a, tolerance=anchors.tolerance)
    _check_general_position(P, tol)

    A_top = (P[1:, :-1] - P[0, :-1]).T
    B = np.linalg.solve(A_top, np.eye(ell - 1))
    offset = np.concatenate([P[0, :-1], [a]])
    targets = (
        _first_reduction(P),
        _block_target(B, A_top, "H3"),
        QuadraticShear.build(ell, ell - 1, np.arange(ell - 1), -np.eye(ell - 1), "target", offset, "H4'"),
    )
    info = {"level": float(a), "condition": float(np.linalg.cond(A_top))}
    return DiffeoChain((), targets, anchors, LEVEL_FOLD, info)


def build_reduction(anchors, tol: Optional[float] = None) -> DiffeoChain:
    """Pick the fold or inclusion reduction from the anchor count."""
    anchors = _require_anchor_set(anchors)
    if anchors.count > anchors.dim:
        return build_inclusion_reduction(anchors, tol)
    return build_fold_reduction(anchors, tol)


def relative_residual(chain: DiffeoChain, x) -> np.ndarray:
    """Per-point ``|F(x) - N(x)|_inf / max(1, |N(x)|_inf)``."""
    F = evaluate_chain(chain, x)
    N = chain.normal_form(x)
    return np.max(np.abs(F - N), axis=-1) / np.maximum(1.0, np.max(np.abs(N), axis=-1))


def verify_fold_form(
    chain: DiffeoChain,
    sample_count: int = 1000,
    box: float = 10.0,
    rng: Optional[np.random.Generator] = None,
    tol: float = RESIDUAL_TOL,
) -> VerificationReport:
    """Compare the conjugated map with its declared normal form on random samples."""
    rng = np.random.default_rng(0) if rng is None else rng
    x = rng.uniform(-box, box, size=(sample_count, chain.n))
    res = relative_residual(chain, x)
    worst = int(np.argmax(res))
    report = VerificationReport()
    report.add(
        Check(
            name=f"{chain.kind}_normal_form",
            passed=bool(res[worst] < tol),
            margin=float(res[worst]),
            witness=x[worst],
            parameters={
                "samples": sample_count,
                "box": box,
                "tolerance": tol,
                "condition": chain.info.get("condition"),
            },
        )
    )
    return report
