"""Command-line interface: ``sqmap {anchors,normalform,circle,verify,embed}``.

Exit codes are 0 on success, 1 for usage and I/O errors, and 2 when a
mathematical step fails (the JSON output then carries the witness).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .anchors import build_anchor_set
from .circle import DEFAULT_GRID, select_circle_anchors
from .errors import ClassificationError, GeneralPositionError, SelectionError, SqmapError
from .geometry import AnchorSet, distance_squared_map
from .manifold import load_manifold
from .normal_form import RESIDUAL_TOL, build_level_fold, build_reduction, verify_fold_form
from .report import dumps
from .verification import injectivity_check, run_full_verification

log = logging.getLogger("sqmap")

EXIT_OK, EXIT_IO, EXIT_MATH = 0, 1, 2
MATH_ERRORS = (SelectionError, GeneralPositionError, ClassificationError)


class InputError(Exception):
    pass


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    log.info("wrote %s", path)
    return path


def _write_rows(out: Path, name: str, header, rows) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / name, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(header)
        for row in rows:
            w.writerow(row)


def _load(path: str):
    if not Path(path).is_file():
        raise InputError(f"no such file: {path}")
    return load_manifold(path)


def _threads() -> int | None:
    raw = os.environ.get("SQMAP_THREADS")
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"SQMAP_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise InputError("SQMAP_THREADS must be a positive integer")
    return n


def cmd_anchors(args) -> int:
    M = _load(args.input)
    kw = {} if args.tol is None else {"tol": args.tol}
    try:
        state = build_anchor_set(M, seed=args.seed, **kw)
    except SelectionError as exc:
        _write(args.out, "state.json", dumps({"error": str(exc), "stage": exc.stage, "diagnostics": exc.diagnostics}))
        raise
    _write(args.out, "state.json", dumps(state))
    return EXIT_OK


def _read_anchor_json(path: str) -> AnchorSet:
    if not Path(path).is_file():
        raise InputError(f"no such file: {path}")
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: {exc}") from exc
    if isinstance(data, list):
        return AnchorSet(data)
    if "anchors" in data:
        data = data["anchors"]
    if not isinstance(data, dict) or "points" not in data:
        raise InputError(f"{path}: expected an anchor set with a 'points' field")
    return AnchorSet.from_dict(data)


def cmd_normalform(args) -> int:
    anchors = _read_anchor_json(args.input)
    if anchors.shared_last_coord is not None and anchors.count == anchors.dim:
        chain = build_level_fold(anchors)
    else:
        chain = build_reduction(anchors)
    rng = np.random.default_rng(args.seed)
    report = verify_fold_form(chain, sample_count=args.samples, rng=rng, tol=args.tol or RESIDUAL_TOL)
    _write(args.out, "chain.json", dumps(chain))
    _write(args.out, "foldcheck.json", dumps(report))
    return EXIT_OK if report.overall else EXIT_MATH


def cmd_circle(args) -> int:
    M = _load(args.input)
    tol = 1e-9 if args.tol is None else args.tol
    try:
        result = select_circle_anchors(M, args.theta_grid, tol)
    except ClassificationError as exc:
        raise ClassificationError(f"{exc} (increase --theta-grid)") from exc
    check = injectivity_check(M, result.anchors)
    d = np.sqrt(distance_squared_map(result.anchors, M.vertices))
    _write(args.out, "circle_result.json", dumps({"result": result, "injectivity": check}))
    _write_rows(args.out, "image_points.csv", ["index", "d1", "d2"],
                ([i, repr(float(a)), repr(float(b))] for i, (a, b) in enumerate(d)))
    return EXIT_OK if check.passed else EXIT_MATH


def _pipeline(args, write_embedding: bool) -> int:
    M = _load(args.input)
    kw = {} if args.tol is None else {"tol": args.tol}
    state = build_anchor_set(M, seed=args.seed, **kw)
    report = run_full_verification(M, state, immersed=args.immersed)
    _write(args.out, "state.json", dumps(state))
    _write(args.out, "report.json", dumps(report))
    if write_embedding:
        Y = distance_squared_map(state.anchors, M.vertices)
        _write_rows(args.out, "embedded.csv", None, ([repr(float(c)) for c in y] for y in Y))
    if not report.overall:
        for c in report.checks:
            if not c.passed:
                print(f"FAIL {c.name}: witness {dumps(c.witness).strip()}", file=sys.stderr)
    return EXIT_OK if report.overall else EXIT_MATH


def cmd_verify(args) -> int:
    return _pipeline(args, write_embedding=False)


def cmd_embed(args) -> int:
    return _pipeline(args, write_embedding=True)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sqmap", description="Distance-squared mappings of sampled manifolds.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(name, helptext, func):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--in", dest="input", required=True, help="input file")
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--tol", type=float, default=None, help="override the command's tolerance")
        s.set_defaults(func=func)
        return s

    common("anchors", "select anchors for a sampled manifold", cmd_anchors)
    s = common("normalform", "reduce a distance-squared map to its normal form", cmd_normalform)
    s.add_argument("--samples", type=int, default=1000)
    s = common("circle", "two-anchor selection for a planar closed curve", cmd_circle)
    s.add_argument("--theta-grid", type=int, default=DEFAULT_GRID)
    for name, func, text in (("verify", cmd_verify, "select anchors and certify"),
                             ("embed", cmd_embed, "select anchors, certify and write image coordinates")):
        s = common(name, text, func)
        s.add_argument("--immersed", action="store_true", help="exempt the input's own multiple points")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_IO
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        threads = _threads()
        if threads is not None:
            log.info("SQMAP_THREADS=%d (all commands run single-threaded)", threads)
        return args.func(args)
    except MATH_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MATH
    except (InputError, SqmapError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
