import numpy as np
import pytest

from oracles import qp_dual_projected_gradient
from shadowroad.svmseg import (
    DegenerateLabels,
    SvmModel,
    TrainingNotConverged,
    build_training_set,
    classify,
    decision,
    decision_expansion,
    dual_objective,
    segment,
    train,
)


def blobs(seed, n=20, gap=1.5, d=3):
    rng = np.random.default_rng(seed)
    x = np.concatenate([rng.normal(gap, 1.0, (n // 2, d)), rng.normal(-gap, 1.0, (n // 2, d))])
    y = np.concatenate([np.ones(n // 2), -np.ones(n // 2)])
    return x, y


def test_two_point_analytic():
    x = np.array([[1.0, 0, 0], [-1.0, 0, 0]])
    y = np.array([1.0, -1.0])
    model = train(x, y, C=np.inf, tol=1e-9)
    np.testing.assert_allclose(model.w, [1, 0, 0], atol=1e-12)
    assert model.b == pytest.approx(0, abs=1e-12)
    np.testing.assert_allclose(model.lambdas, [0.5, 0.5], atol=1e-12)
    assert model.converged and not model.degenerate


def test_identical_points_opposite_labels():
    x = np.array([[0.3, 0.3, 0.3]] * 2)
    y = np.array([1.0, -1.0])
    model = train(x, y, C=1.0)
    assert model.degenerate
    with pytest.raises(TrainingNotConverged):
        train(x, y, C=np.inf)


def test_single_class_rejected():
    with pytest.raises(DegenerateLabels, match="degenerate labels"):
        train(np.zeros((3, 3)), np.ones(3))


def test_bad_arguments():
    x, y = blobs(0)
    with pytest.raises(ValueError):
        train(x, y, C=0)
    with pytest.raises(ValueError):
        train(x, np.zeros_like(y))


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("C", [0.1, 10.0])
def test_dual_matches_qp_oracle(seed, C):
    x, y = blobs(seed, gap=0.7)
    model = train(x, y, C=C, tol=1e-8)
    best, _ = qp_dual_projected_gradient(x, y, C)
    ours = dual_objective(x, y, model.lambdas)
    assert abs(ours - best) <= 1e-6 * max(1.0, abs(best))


@pytest.mark.parametrize("seed", range(5))
def test_kkt_conditions(seed):
    C, tol = 5.0, 1e-6
    x, y = blobs(seed, gap=0.6)
    model = train(x, y, C=C, tol=tol)
    lam = model.lambdas
    assert abs(lam @ y) <= 1e-9
    assert lam.min() >= 0 and lam.max() <= C
    margin = y * decision(model, x)
    slack = 1e-4
    assert np.all(margin[lam == 0] >= 1 - slack)
    free = (lam > 0) & (lam < C)
    assert np.all(np.abs(margin[free] - 1) <= slack)
    assert np.all(margin[lam == C] <= 1 + slack)


def test_decision_examples():
    model = SvmModel(w=np.array([1.0, 0, 0]), b=-0.5, lambdas=np.zeros(0),
                     support_vectors=np.zeros((0, 3)), support_labels=np.zeros(0),
                     support_lambdas=np.zeros(0), C=1.0, converged=True, iterations=0)
    assert decision(model, [0.5, 0.9, 0.1]) == pytest.approx(0)
    assert classify(model, np.array([[0.4, 0, 0], [0.6, 0, 0], [0.5, 0, 0]])).tolist() == [-1, 1, 1]


def test_expansion_equals_primal():
    x, y = blobs(3, n=30, gap=0.8)
    model = train(x, y, C=2.0, tol=1e-8)
    q = np.random.default_rng(1).normal(size=(15, 3))
    np.testing.assert_allclose(decision(model, q), decision_expansion(model, q), atol=1e-9)


def test_scaling_invariance_hard_margin():
    x, y = blobs(7, gap=3.0)
    a = train(x, y, C=np.inf, tol=1e-10)
    b = train(2 * x, y, C=np.inf, tol=1e-10)
    q = np.random.default_rng(2).normal(size=(50, 3))
    np.testing.assert_array_equal(classify(a, q), classify(b, 2 * q))
    np.testing.assert_allclose(b.w, a.w / 2, rtol=1e-6, atol=1e-9)


def test_model_file_round_trip(tmp_path):
    x, y = blobs(2)
    model = train(x, y)
    model.save(tmp_path / "svm.txt")
    back = SvmModel.load(tmp_path / "svm.txt")
    np.testing.assert_array_equal(back.w, model.w)
    assert back.b == model.b


def test_segment_color_separation():
    img = np.zeros((4, 6, 3))
    img[:, :3] = [0.4, 0.4, 0.45]
    img[:, 3:] = [0.7, 0.6, 0.4]
    cand = np.zeros((4, 6), bool)
    cand[:, :3] = True
    x, y = build_training_set(img, cand, n_per_class=12, seed=0)
    mask = segment(img, train(x, y))
    assert np.array_equal(mask, cand)


def test_build_training_set_counts_and_determinism():
    rng = np.random.default_rng(0)
    img = rng.random((30, 40, 3))
    cand = np.zeros((30, 40), bool)
    cand[10:, 5:35] = True
    x, y = build_training_set(img, cand, n_per_class=100, seed=9)
    assert x.shape == (200, 3)
    assert (y[:100] == 1).all() and (y[100:] == -1).all()
    assert len({tuple(r) for r in x}) == 200  # without replacement
    flat = img.reshape(-1, 3)
    road = {tuple(r) for r in flat[cand.ravel()]}
    assert all(tuple(r) in road for r in x[:100])
    x2, _ = build_training_set(img, cand, n_per_class=100, seed=9)
    np.testing.assert_array_equal(x, x2)


def test_build_training_set_small_class():
    img = np.random.default_rng(1).random((5, 5, 3))
    cand = np.ones((5, 5), bool)
    cand[0, 0] = False
    x, y = build_training_set(img, cand, n_per_class=500)
    assert (y == 1).sum() == 24 and (y == -1).sum() == 1


def test_build_training_set_needs_both_classes():
    with pytest.raises(DegenerateLabels):
        build_training_set(np.zeros((3, 3, 3)), np.ones((3, 3), bool))
