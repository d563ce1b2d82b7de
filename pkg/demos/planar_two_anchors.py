"""Two anchors for planar closed curves.

Convex curves with single-point supporting lines (case I) get anchors on the
line at two thirds of the height, after moving a diameter to ``(0,0)-(1,0)``.
Curves with a supporting line touching in two places (case II) use those two
contact points.  Injectivity of ``x -> (|x - p1|, |x - p2|)`` is then checked
by brute force over all well-separated vertex pairs.

Run with ``python3 demos/planar_two_anchors.py``; it also writes
``demo_image_points.csv`` for plotting the image curve of the circle.
"""

import csv

import numpy as np

from sqmap import injectivity_check, select_circle_anchors, shapes

curves = {
    "circle N=10000": shapes.circle(10000),
    "random convex 60-gon": shapes.random_convex_polygon(np.random.default_rng(1), 60),
    "square": shapes.square(per_side=40),
    "five-pointed star": shapes.star(per_edge=20),
    "U shape": shapes.u_shape(per_edge=20),
}

for label, M in curves.items():
    r = select_circle_anchors(M)
    c = injectivity_check(M, r.anchors)
    print(f"{label:<22} case {r.case:<2}  p1={r.p1.round(4)}  p2={r.p2.round(4)}  injective={c.passed}")

r = select_circle_anchors(curves["circle N=10000"])
q = r.frame.apply(r.anchors)
exact = np.array([[0.5 - 5**0.5 / 6, 1 / 3], [0.5 + 5**0.5 / 6, 1 / 3]])
print("\nnormalized circle anchors:", q.round(8).tolist())
print("closed form:              ", exact.round(8).tolist())

d = np.linalg.norm(curves["circle N=10000"].vertices[:, None, :] - r.anchors[None], axis=-1)
with open("demo_image_points.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["index", "d1", "d2"])
    w.writerows([i, *row] for i, row in enumerate(d.tolist()))
print("wrote demo_image_points.csv")
