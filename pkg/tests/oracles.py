"""Independent reference computations used to derive and freeze expected values.

Nothing here imports the library's algorithms; everything is done with
plain loops, closed forms or a different scipy routine.
"""

import math

import numpy as np
from scipy.spatial import ConvexHull


def d2_loop(anchors, x):
    """Squared distances by explicit summation."""
    return np.array([sum((xi - pi) ** 2 for xi, pi in zip(x, p)) for p in anchors])


def fd_jacobian(f, x, h=1e-5):
    x = np.asarray(x, float)
    cols = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def fold_normal(x, ell):
    x = np.asarray(x, float)
    return np.concatenate([x[: ell - 1], [np.sum(x[ell - 1 :] ** 2)]])


def inclusion_normal(x, ell):
    x = np.asarray(x, float)
    return np.concatenate([x, np.zeros(ell - len(x))])


def level_fold_normal(x, a):
    x = np.asarray(x, float)
    return np.concatenate([x[:-1], [(x[-1] - a) ** 2 + a]])


def cyclic_arc(V):
    """Arc-length matrix of a closed polyline, pair by pair."""
    n = len(V)
    seg = [math.dist(V[i], V[(i + 1) % n]) for i in range(n)]
    pos = np.concatenate([[0.0], np.cumsum(seg)])
    total = pos[-1]
    pos = pos[:-1]
    d = np.abs(pos[:, None] - pos[None, :])
    return np.minimum(d, total - d), max(seg)


def brute_injectivity(V, anchors, factor=3.0, tol=1e-9):
    """All vertex pairs of a closed polyline whose images collide."""
    Y = np.array([d2_loop(anchors, v) for v in V])
    sep, emax = cyclic_arc(V)
    extent = np.linalg.norm(Y.max(0) - Y.min(0))
    bad = []
    n = len(V)
    for i in range(n):
        for j in range(i + 1, n):
            if sep[i, j] >= factor * emax and np.linalg.norm(Y[i] - Y[j]) <= tol * extent:
                bad.append((i, j))
    return bad


def hull_support(V, theta):
    """Support function evaluated on convex-hull vertices only."""
    H = V[ConvexHull(V).vertices]
    return float(np.max(H @ [math.cos(theta), math.sin(theta)]))


def circle_slice_x(level, radius=1.0):
    return math.sqrt(radius**2 - level**2)


def normalized_circle_anchors():
    """Closed form for the unit-diameter circle centred at ``(1/2, 0)`` cut at ``x2 = 1/3``."""
    r = math.sqrt(5) / 6
    return np.array([[0.5 - r, 1 / 3], [0.5 + r, 1 / 3]])


def rank_by_determinants(vectors):
    """Rank as the size of the largest non-vanishing minor (tiny inputs only)."""
    from itertools import combinations

    A = np.atleast_2d(np.asarray(vectors, float))
    for k in range(min(A.shape), 0, -1):
        for rows in combinations(range(A.shape[0]), k):
            for cols in combinations(range(A.shape[1]), k):
                if abs(np.linalg.det(A[np.ix_(rows, cols)])) > 1e-9:
                    return k
    return 0
