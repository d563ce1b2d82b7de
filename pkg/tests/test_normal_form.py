import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import fd_jacobian, fold_normal, inclusion_normal, level_fold_normal
from sqmap.errors import GeneralPositionError, SqmapError
from sqmap.geometry import AnchorSet, is_general_position
from sqmap.normal_form import (
    AffineMap,
    DiffeoChain,
    QuadraticShear,
    build_fold_reduction,
    build_inclusion_reduction,
    build_level_fold,
    build_reduction,
    chain_jacobian,
    evaluate_chain,
    verify_fold_form,
)
from sqmap.report import dumps


def random_anchors(rng, ell, n, level=None):
    while True:
        P = rng.uniform(-5, 5, size=(ell, n))
        if level is not None:
            P[:, -1] = level
        if is_general_position(P[: min(ell, n + 1)])[0]:
            return P


FOLD_22 = [[0, 0], [1, 0]]


# -- worked examples --------------------------------------------------------


def test_fold_plane_example():
    chain = build_fold_reduction(FOLD_22)
    np.testing.assert_allclose(evaluate_chain(chain, [3, 2]), [3, 4], atol=1e-12)
    np.testing.assert_allclose(chain_jacobian(chain, [3, 2]), [[1, 0], [0, 4]], atol=1e-12)
    np.testing.assert_allclose(chain_jacobian(chain, [3, 0]), [[1, 0], [0, 0]], atol=1e-12)
    for t in (-4.0, 0.0, 2.5):
        np.testing.assert_allclose(evaluate_chain(chain, [t, 0]), [t, 0], atol=1e-12)


def test_fold_three_space_example():
    chain = build_fold_reduction([[0, 0, 0], [1, 0, 0]])
    np.testing.assert_allclose(evaluate_chain(chain, [1, 1, 1]), [1, 2], atol=1e-12)


def test_fold_rejects_collinear_and_wrong_case():
    with pytest.raises(SqmapError):
        build_fold_reduction([[0, 0], [1, 0], [2, 0]])
    with pytest.raises(GeneralPositionError):
        build_fold_reduction([[0, 0, 0], [1, 0, 0], [2, 0, 0]])
    with pytest.raises(SqmapError):
        build_fold_reduction([[0, 0], [1, 0], [0, 1]])


def test_inclusion_examples():
    line = build_inclusion_reduction([[0.0], [1.0]])
    np.testing.assert_allclose(evaluate_chain(line, [5.0]), [5, 0], atol=1e-12)
    np.testing.assert_allclose(evaluate_chain(line, [0.0]), [0, 0], atol=1e-12)
    for x in (-3.0, 0.5, 7.0):
        np.testing.assert_allclose(chain_jacobian(line, [x]), [[1], [0]], atol=1e-12)
    plane = build_inclusion_reduction([[0, 0], [1, 0], [0, 1]])
    np.testing.assert_allclose(evaluate_chain(plane, [2, 3]), [2, 3, 0], atol=1e-12)
    with pytest.raises(GeneralPositionError):
        build_inclusion_reduction([[1.0], [1.0]])


def test_level_fold_examples():
    H = build_level_fold(AnchorSet(FOLD_22, shared_last_coord=0))
    np.testing.assert_allclose(evaluate_chain(H, [2, -3]), [2, 9], atol=1e-12)
    np.testing.assert_allclose(evaluate_chain(H, [5, 0]), [5, 0], atol=1e-12)
    H1 = build_level_fold([[0, 1], [1, 1]])
    np.testing.assert_allclose(evaluate_chain(H1, [0, 2]), [0, 2], atol=1e-12)


def test_build_reduction_dispatch():
    assert build_reduction(FOLD_22).kind == "fold"
    assert build_reduction([[0, 0], [1, 0], [0, 1]]).kind == "inclusion"


# -- verification reports ---------------------------------------------------


def test_verify_fold_form_passes_on_examples():
    rep = verify_fold_form(build_fold_reduction(FOLD_22), 1000)
    assert rep.overall and rep.checks[0].margin < 1e-10
    assert verify_fold_form(build_inclusion_reduction([[0.0], [1.0]]), 1000).overall


def test_verify_fold_form_catches_corrupted_alpha():
    rng = np.random.default_rng(5)
    chain = build_fold_reduction(random_anchors(rng, 2, 4))
    h4 = chain.source_maps[1]
    bad = h4.matrix.copy()
    bad[0, 1:] += 0.3
    corrupted = AffineMap.build(bad, None, "source", "H4")
    broken = dataclasses.replace(chain, source_maps=(chain.source_maps[0], corrupted) + chain.source_maps[2:])
    rep = verify_fold_form(broken, 1000)
    check = rep.checks[0]
    assert not rep.overall and check.margin > 1e-4
    x = np.asarray(check.witness)
    assert np.max(np.abs(evaluate_chain(broken, x) - fold_normal(x, 2))) > 1e-8


# -- stage invariants -------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.integers(0, 4))
def test_fold_matches_closed_form(seed, n, gap):
    rng = np.random.default_rng(seed)
    ell = max(2, n - gap)
    chain = build_fold_reduction(random_anchors(rng, ell, n))
    X = rng.uniform(-10, 10, size=(50, n))
    F = evaluate_chain(chain, X)
    N = np.array([fold_normal(x, ell) for x in X])
    assert np.max(np.abs(F - N) / np.maximum(1, np.abs(N).max(axis=1, keepdims=True))) < 1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 5))
def test_inclusion_matches_closed_form(seed, n, extra):
    rng = np.random.default_rng(seed)
    ell = min(6, n + extra)
    chain = build_inclusion_reduction(random_anchors(rng, ell, n))
    X = rng.uniform(-10, 10, size=(50, n))
    N = np.array([inclusion_normal(x, ell) for x in X])
    assert np.max(np.abs(evaluate_chain(chain, X) - N) / np.maximum(1, np.abs(N).max(axis=1, keepdims=True))) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.floats(-3, 3))
def test_level_fold_matches_closed_form(seed, ell, a):
    rng = np.random.default_rng(seed)
    H = build_level_fold(random_anchors(rng, ell, ell, level=a))
    X = rng.uniform(-10, 10, size=(50, ell))
    N = np.array([level_fold_normal(x, a) for x in X])
    assert np.max(np.abs(evaluate_chain(H, X) - N) / np.maximum(1, np.abs(N).max(axis=1, keepdims=True))) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_every_stage_round_trips(seed, n):
    rng = np.random.default_rng(seed)
    ell = int(rng.integers(2, n + 1))
    chain = build_fold_reduction(random_anchors(rng, ell, n))
    for stage in chain.source_maps + chain.target_maps:
        x = rng.uniform(-10, 10, size=(20, stage.dim))
        scale = max(1.0, float(np.max(np.abs(x))))
        assert np.max(np.abs(stage.invert(stage.apply(x)) - x)) / scale < 1e-12, stage.name
        assert np.max(np.abs(stage.apply(stage.invert(x)) - x)) / scale < 1e-12, stage.name


def test_round_trip_tight_on_unit_scale():
    rng = np.random.default_rng(6)
    ell, n = 3, 5
    chain = build_fold_reduction(random_anchors(rng, ell, n))
    for stage in chain.source_maps + chain.target_maps:
        x = rng.uniform(-10, 10, size=(100, stage.dim))
        err = np.max(np.abs(stage.invert(stage.apply(x)) - x)) / max(1, np.max(np.abs(x)))
        assert err < 1e-12, stage.name


def test_quadratic_shear_refuses_self_dependence():
    with pytest.raises(SqmapError):
        QuadraticShear.build(3, 1, [0, 1], np.eye(2))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_chain_jacobian_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    ell = int(rng.integers(2, n + 1))
    chain = build_fold_reduction(random_anchors(rng, ell, n))
    x = rng.uniform(-3, 3, size=n)
    J = chain_jacobian(chain, x)
    Jfd = fd_jacobian(lambda y: evaluate_chain(chain, y), x, h=1e-4)
    assert np.max(np.abs(J - Jfd)) < 1e-5 * max(1, np.max(np.abs(J)))


def test_fold_singular_set_rank():
    rng = np.random.default_rng(8)
    n, ell = 5, 3
    chain = build_fold_reduction(random_anchors(rng, ell, n))
    x = rng.uniform(-5, 5, size=n)
    on = x.copy()
    on[ell - 1 :] = 0
    assert np.linalg.matrix_rank(chain_jacobian(chain, on), tol=1e-9) == ell - 1
    assert np.linalg.matrix_rank(chain_jacobian(chain, x), tol=1e-9) == ell


def test_fold_factorization_shape():
    rng = np.random.default_rng(9)
    P = random_anchors(rng, 3, 5)
    chain = build_fold_reduction(P)
    A = (P[1:] - P[0]).T
    piv = chain.info["pivots"]
    perm = piv + sorted(set(range(5)) - set(piv))
    B = np.linalg.inv(A[piv])
    AB = A[perm] @ B
    np.testing.assert_allclose(AB[:2], np.eye(2), atol=1e-10)
    np.testing.assert_allclose(AB[2:], chain.info["alpha"], atol=1e-10)
    assert chain.info["factorizationResidual"] < 1e-10


def test_chain_json_round_trip():
    rng = np.random.default_rng(10)
    chain = build_fold_reduction(random_anchors(rng, 3, 4))
    data = json.loads(dumps(chain))
    assert {s["kind"] for s in data["stages"]} <= {"affine", "quadshear"}
    again = DiffeoChain.from_dict(data)
    X = rng.uniform(-5, 5, size=(10, 4))
    np.testing.assert_array_equal(evaluate_chain(again, X), evaluate_chain(chain, X))
