"""Reducing distance-squared maps to their normal forms.

Three situations are covered, each with its own closed form:

* fewer anchors than dimensions: ``(x_1, ..., x_{l-1}, x_l^2 + ... + x_n^2)``;
* more anchors than dimensions: ``(x_1, ..., x_n, 0, ..., 0)``;
* as many anchors as dimensions, all at height ``a``: ``(x_1, ..., (x_l - a)^2 + a)``.

Run with ``python3 demos/normal_forms.py``.
"""

import numpy as np

from sqmap import build_fold_reduction, build_inclusion_reduction, build_level_fold, verify_fold_form
from sqmap.normal_form import chain_jacobian, evaluate_chain

rng = np.random.default_rng(2024)

# %% The smallest fold: two anchors in the plane.
chain = build_fold_reduction([[0, 0], [1, 0]])
print("fold chain stages:", [s.name for s in chain.source_maps], "->", [s.name for s in chain.target_maps])
print("F(3, 2) =", evaluate_chain(chain, [3, 2]), " (expected [3, 4])")
print("J(3, 0) =\n", chain_jacobian(chain, [3, 0]).round(12), "\n  rank drops on the fold locus x_2 = 0")

# %% A random fold in R^5 with three anchors.  The report's margin is the worst relative residual.
P = rng.uniform(-5, 5, size=(3, 5))
chain = build_fold_reduction(P)
report = verify_fold_form(chain, 1000, rng=rng)
print("\nR^5, 3 anchors:", report.summary())
print("pivot coordinates:", chain.info["pivots"], " condition:", round(chain.info["condition"], 2))

# %% Inclusion: four anchors in R^2 straighten the surface to a coordinate plane.
chain = build_inclusion_reduction(rng.uniform(-5, 5, size=(4, 2)))
print("\ninclusion R^2 -> R^4:", evaluate_chain(chain, [2.0, -1.0]).round(10))

# %% Level fold: anchors on the line x_2 = 0.7.
a = 0.7
H = build_level_fold([[-1.0, a], [2.0, a]])
x = np.array([[1.5, a], [1.5, a + 0.5], [1.5, a - 0.5]])
print("\nlevel fold at a = 0.7:")
for xi, yi, d in zip(x, evaluate_chain(H, x), np.linalg.det(chain_jacobian(H, x))):
    print(f"  x = {xi}  ->  {yi.round(12)}   det J = {d:+.3f}")
print("points mirrored across the level share an image: the fold glues the two sides.")
