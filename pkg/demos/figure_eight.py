"""An immersed curve: the figure eight.

The anchors chosen by the pipeline cannot separate the two sheets through the
double point (they are the same point of the plane), so injectivity fails
there and only there.  What survives is that the image is still an immersion
and the two branches still cross transversally.  Anchors on the curve's axis
of symmetry destroy that transversality.

Run with ``python3 demos/figure_eight.py``.
"""

from sqmap import build_anchor_set, normal_crossings_check, run_full_verification, shapes

M = shapes.figure_eight(400)
state = build_anchor_set(M, seed=3)
report = run_full_verification(M, state)
for c in report.checks:
    print(f"{c.name:<17} {'pass' if c.passed else 'FAIL'}  {c.note or ''}")
print("colliding pairs:", report["injectivity"].parameters["failingPairs"])

exempt = run_full_verification(M, state, immersed=True)
print("with the double point exempted, overall:", exempt.overall)

bad = normal_crossings_check(M, [[1.0, 0.0], [-1.0, 0.0]])
print("\nanchors (+-1, 0): normal crossings", "pass" if bad.passed else "FAIL", bad.witness)
