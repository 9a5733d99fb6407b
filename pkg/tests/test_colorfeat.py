import numpy as np
import pytest

from shadowroad.colorfeat import (
    DEFAULT_D_MAX,
    InsufficientTrainingData,
    RoadColorModel,
    default_training_polygon,
    extract_candidates,
    fit_road_model,
    mahalanobis,
    polygon_mask,
    training_pixels,
)


def test_fit_flat_pixels():
    model = fit_road_model(np.full((20, 3), 0.5))
    np.testing.assert_allclose(model.mean, [0.5, 0.5, 0.5])
    np.testing.assert_allclose(model.covariance, 1e-6 * np.eye(3), atol=1e-15)


def test_fit_two_point_cloud():
    pts = np.array([[0, 0, 0], [1, 0, 0]] * 8, dtype=float)
    model = fit_road_model(pts)
    np.testing.assert_allclose(model.mean, [0.5, 0, 0])
    # sample variance (n - 1 denominator) of eight 0s and eight 1s
    assert model.covariance[0, 0] == pytest.approx(16 * 0.25 / 15 + 1e-6, abs=1e-12)


def test_fit_needs_16_pixels():
    with pytest.raises(InsufficientTrainingData, match="insufficient training data"):
        fit_road_model(np.zeros((15, 3)))


def test_covariance_inverse_cached():
    rng = np.random.default_rng(1)
    model = fit_road_model(rng.random((100, 3)))
    np.testing.assert_allclose(model.covariance_inverse @ model.covariance, np.eye(3), atol=1e-9)


def test_mahalanobis_examples():
    ident = RoadColorModel.from_moments(np.zeros(3), np.eye(3))
    assert mahalanobis(ident, [0, 0, 0]) == 0
    assert mahalanobis(ident, [3, 4, 0]) == pytest.approx(5)
    stretched = RoadColorModel.from_moments(np.zeros(3), np.diag([4.0, 1, 1]))
    assert mahalanobis(stretched, [2, 0, 0]) == pytest.approx(1)


def test_mahalanobis_matches_linear_solve():
    rng = np.random.default_rng(7)
    for _ in range(50):
        a = rng.normal(size=(3, 3))
        cov = a @ a.T + 0.1 * np.eye(3)
        mean, x = rng.normal(size=3), rng.normal(size=3)
        model = RoadColorModel.from_moments(mean, cov)
        z = np.linalg.solve(cov, mean - x)
        assert mahalanobis(model, x) ** 2 == pytest.approx((mean - x) @ z, rel=1e-9, abs=1e-12)


def test_mahalanobis_affine_invariance():
    rng = np.random.default_rng(11)
    pts = rng.random((200, 3))
    a = rng.normal(size=(3, 3)) + 2 * np.eye(3)
    t = rng.normal(size=3)
    query = rng.random((20, 3))
    d0 = mahalanobis(fit_road_model(pts, eps=0.0), query)
    d1 = mahalanobis(fit_road_model(pts @ a.T + t, eps=0.0), query @ a.T + t)
    np.testing.assert_allclose(d0, d1, atol=1e-6)


def test_extract_uniform_image():
    model = RoadColorModel.from_moments([0.3, 0.4, 0.5], np.eye(3) * 1e-3)
    img = np.broadcast_to(np.array([0.3, 0.4, 0.5]), (4, 5, 3))
    assert extract_candidates(img, model).all()


def test_extract_boundary_inclusion_at_zero():
    model = RoadColorModel.from_moments([0.3, 0.4, 0.5], np.eye(3) * 1e-3)
    img = np.zeros((2, 2, 3))
    img[1, 0] = [0.3, 0.4, 0.5]
    mask = extract_candidates(img, model, d_max=0.0)
    assert mask.sum() == 1 and mask[1, 0]


def test_extract_two_tone():
    sd = 0.02
    model = RoadColorModel.from_moments([0.4, 0.4, 0.45], np.eye(3) * sd**2)
    road, sky = np.array([0.42, 0.41, 0.46]), np.array([0.7, 0.8, 0.95])
    # road tone sits ~1.2 sd away, sky tone tens of sd away
    assert mahalanobis(model, road) < DEFAULT_D_MAX < mahalanobis(model, sky)
    img = np.empty((4, 6, 3))
    img[2:] = road
    img[:2] = sky
    mask = extract_candidates(img, model)
    assert mask[2:].all() and not mask[:2].any()


def test_extract_monotone_in_threshold():
    rng = np.random.default_rng(2)
    img = rng.random((20, 20, 3))
    model = fit_road_model(rng.random((50, 3)))
    prev = extract_candidates(img, model, 0.1)
    for d in (0.5, 1.0, 2.0, 5.0):
        cur = extract_candidates(img, model, d)
        assert not (prev & ~cur).any()
        prev = cur


def test_model_file_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    model = fit_road_model(rng.random((30, 3)))
    model.save(tmp_path / "road.txt")
    back = RoadColorModel.load(tmp_path / "road.txt")
    np.testing.assert_array_equal(back.mean, model.mean)
    np.testing.assert_array_equal(back.covariance, model.covariance)


def test_polygon_mask_rectangle():
    m = polygon_mask((6, 8), [(2, 1), (6, 1), (6, 4), (2, 4)])
    expected = np.zeros((6, 8), bool)
    expected[1:4, 2:6] = True
    assert np.array_equal(m, expected)


def test_default_training_region():
    img = np.zeros((240, 320, 3))
    poly = default_training_polygon(img.shape[:2])
    mask = polygon_mask(img.shape[:2], poly)
    ys, xs = np.nonzero(mask)
    assert ys.min() >= 192 and ys.max() == 239
    assert xs.min() >= 80 and xs.max() < 240
    assert training_pixels(img).shape == (mask.sum(), 3)


def test_training_region_outside_frame():
    with pytest.raises(ValueError):
        training_pixels(np.zeros((10, 10, 3)), [(0, 0), (20, 0), (20, 5)])
