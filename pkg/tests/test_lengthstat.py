import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import line_network
from netlength.distance import neighbor_lengths, neighbor_structure
from netlength.lengthstat import (
    CurveSamples,
    ScaleGrid,
    count_matrix,
    derivative,
    detect_scale,
    extract_aggregation,
    length_k,
    length_l,
    local_length_l,
    minima_prominence,
    precision_recall,
)
from netlength.network import PointSet
from netlength.process import Intensity, generate_csr, intensity_global
from netlength.synth import case_spec, compose_case, grid_network


def collinear():
    net = line_network()
    pts = PointSet(net, [0, 0, 0], [0.0, 0.4, 1.0])
    rows, profiles = neighbor_structure(pts)
    return net, pts, rows, profiles


def curve(h, l_obs, l_prime=None):
    h = np.asarray(h, float)
    l_obs = np.asarray(l_obs, float)
    return CurveSamples(h, l_obs + h, h.copy(), l_obs, None if l_prime is None else np.asarray(l_prime, float))


# -- grid ----------------------------------------------------------------


def test_default_grid():
    net = grid_network(3, 3)
    g = ScaleGrid.default(net)
    assert g.step == pytest.approx(12 / 500) and g.h_max == 6.0
    v = g.values
    assert v[0] == pytest.approx(g.step) and v[-1] == pytest.approx(6.0) and v.size == 250
    assert np.allclose(np.diff(v), g.step)


def test_grid_errors():
    with pytest.raises(ValueError):
        ScaleGrid(0.0, 1.0)
    with pytest.raises(ValueError):
        ScaleGrid(2.0, 1.0)
    with pytest.raises(ValueError):
        ScaleGrid(0.1, 20.0).check(grid_network(3, 3))


# -- K and L ---------------------------------------------------------------


def test_collinear_counts_by_hand():
    # end points see one arm (l(r) = r); the middle point has two arms until
    # the nearer dead end at 0.4, so l(0.4) = 0.8 and l(0.6) = 1.0
    net, pts, rows, profiles = collinear()
    counts = count_matrix(rows, profiles, [0.5, 0.9, 1.0])
    np.testing.assert_array_equal(counts, [[1, 1, 2], [0, 1, 2], [0, 1, 2]])
    k = length_k(pts, rows, profiles, Intensity(3.0), ScaleGrid(0.1, 1.0))
    assert k.k_obs[4] == pytest.approx(1 / 9)
    assert k.k_obs[8] == pytest.approx(1 / 3)
    assert k.k_obs[9] == pytest.approx(2 / 3)
    np.testing.assert_allclose(k.k_expected, k.h)


def test_two_far_points_give_zero():
    net = line_network(10.0)
    pts = PointSet(net, [0, 0], [1.0, 9.0])
    rows, profiles = neighbor_structure(pts)
    k = length_k(pts, rows, profiles, intensity_global(2, net), ScaleGrid(0.5, 5.0))
    assert np.all(k.k_obs == 0)


def test_length_k_errors():
    net, pts, rows, profiles = collinear()
    with pytest.raises(ValueError, match="intensity"):
        length_k(pts, rows, profiles, Intensity(0.0), ScaleGrid(0.1, 1.0))
    with pytest.raises(ValueError, match="at least 2"):
        length_k(pts, rows[:1], profiles[:1], Intensity(1.0), ScaleGrid(0.1, 1.0))


def test_length_l_subtracts_h():
    h = np.linspace(0.1, 1, 10)
    c = length_l(CurveSamples(h, h.copy(), h.copy()))
    assert np.all(c.l_obs == 0)
    k = h.copy()
    k[3] += 2
    assert length_l(CurveSamples(h, k, h.copy())).l_obs[3] == pytest.approx(2)


def test_local_l_examples():
    net = line_network(10.0)
    pts = PointSet(net, [0, 0], [1.0, 9.0])
    rows, profiles = neighbor_structure(pts)
    assert local_length_l(0, pts, rows, profiles, Intensity(1.0), 0.7) == pytest.approx(-0.7)
    pts = PointSet(net, [0, 0], [5.0, 5.001])
    rows, profiles = neighbor_structure(pts)
    assert local_length_l(0, pts, rows, profiles, Intensity(1.0), 0.5) == pytest.approx(0.5 - 0.5)
    assert local_length_l(0, pts, rows, profiles, Intensity(1.0), 0.3) == pytest.approx(0.5 - 0.3)
    assert local_length_l(0, pts, rows, profiles, Intensity(1.0), 0.3, normalize=True) == pytest.approx(1 - 0.3)
    with pytest.raises(ValueError):
        local_length_l(0, pts, rows, profiles, Intensity(1.0), 0.0)


# -- derivative ------------------------------------------------------------


def test_derivative_examples():
    h = np.arange(1, 101) * 0.01
    np.testing.assert_allclose(derivative(curve(h, np.full(h.size, 3.0))).l_prime, 0.0, atol=1e-9)
    np.testing.assert_allclose(derivative(curve(h, -h)).l_prime, -1.0)
    np.testing.assert_allclose(derivative(curve(h, np.sin(h))).l_prime, np.cos(h), atol=1e-2)
    # interior samples use central differences with truncation error h^2/6
    np.testing.assert_allclose(derivative(curve(h, np.sin(h))).l_prime[1:-1], np.cos(h[1:-1]), atol=1e-3)
    with pytest.raises(ValueError):
        derivative(curve(h[:2], h[:2]))


# -- minima and detection ----------------------------------------------------


def test_minima_prominence_by_hand():
    idx, prom = minima_prominence([3, 1, 2, 0, 4])
    assert idx.tolist() == [1, 3]
    np.testing.assert_allclose(prom, [1, 3])
    idx, prom = minima_prominence([2, 1, 1, 1, 3])
    assert idx.tolist() == [2] and prom.tolist() == [1]
    idx, _ = minima_prominence([1, 2, 3, 4])
    assert idx.size == 0


def test_no_interior_minima_means_no_detection():
    h = np.linspace(0.1, 5, 50)
    c = derivative(curve(h, h ** 2))
    est = detect_scale(c)
    assert not est.detected and est.h_hat is None
    assert not detect_scale(c, rule="prominence").detected


def _two_dips():
    # L peaks at 2; L' has a shallow dip at 4.6 and a deep one at 5.4
    h = np.round(np.arange(1, 101) * 0.1, 10)
    l_obs = -(h - 2.0) ** 2
    lp = np.where(h < 4.0, 1.0, 0.0)
    lp = lp - 0.3 * np.exp(-((h - 4.6) / 0.1) ** 2) - 2.0 * np.exp(-((h - 5.4) / 0.1) ** 2)
    return curve(h, l_obs, lp)


def test_shallow_first_minimum_is_skipped():
    c = _two_dips()
    for rule in ("depth", "prominence"):
        est = detect_scale(c, rule=rule)
        assert est.detected
        assert est.argmax_L == pytest.approx(2.0)
        assert est.chosen_minimum == pytest.approx(5.4)
        assert est.h_hat == pytest.approx(2.7)
        assert [m.h for m in est.minima] == pytest.approx([4.6, 5.4])


def test_depth_rule_takes_first_deep_minimum():
    # two equally deep dips: the depth rule keeps the first, prominence its tie-break
    h = np.round(np.arange(1, 101) * 0.1, 10)
    lp = 1.0 - np.exp(-((h - 3.0) / 0.1) ** 2) - 1.2 * np.exp(-((h - 7.0) / 0.1) ** 2)
    c = curve(h, -(h - 1.0) ** 2, lp)
    assert detect_scale(c, rule="depth").chosen_minimum == pytest.approx(3.0)
    assert detect_scale(c, rule="prominence").chosen_minimum == pytest.approx(7.0)
    assert detect_scale(c, rule="depth", depth_tolerance=0.05).chosen_minimum == pytest.approx(7.0)


def test_minima_before_argmax_are_ignored():
    h = np.round(np.arange(1, 101) * 0.1, 10)
    lp = 1.0 - 2 * np.exp(-((h - 1.0) / 0.1) ** 2) - 0.5 * np.exp(-((h - 6.0) / 0.1) ** 2)
    c = curve(h, -(h - 4.0) ** 2, lp)
    est = detect_scale(c)
    assert est.chosen_minimum == pytest.approx(6.0)
    assert all(m.h >= est.argmax_L for m in est.minima)


def test_estimate_json_shape():
    d = detect_scale(_two_dips()).as_dict()
    assert set(d) == {"h_hat", "argmax_L", "chosen_minimum", "minima", "detected"}
    assert set(d["minima"][0]) == {"h", "prominence"}


def test_unknown_rule():
    with pytest.raises(ValueError):
        detect_scale(_two_dips(), rule="first")


def test_detection_stable_under_grid_refinement():
    f = lambda h: np.tanh(3 * (h - 1)) * np.exp(-0.3 * h) - 0.2 * np.exp(-((h - 3.1) / 0.2) ** 2)
    coarse = np.arange(1, 301) * 0.02
    fine = np.arange(1, 601) * 0.01
    a = detect_scale(derivative(curve(coarse, f(coarse))))
    b = detect_scale(derivative(curve(fine, f(fine))))
    assert a.detected and b.detected
    assert abs(a.chosen_minimum - b.chosen_minimum) <= 0.02 + 1e-12
    again = detect_scale(derivative(curve(coarse, f(coarse))))
    assert again.chosen_minimum == a.chosen_minimum


# -- extraction ----------------------------------------------------------------


def test_precision_recall():
    labels = np.array([1, 1, 1, 0, 0], bool)
    p, r = precision_recall(np.array([0, 1, 3]), labels, 5)
    assert (p, r) == (pytest.approx(2 / 3), pytest.approx(2 / 3))
    assert precision_recall(np.array([0]), None, 5) == (None, None)


def test_extraction_all_members():
    net = line_network(2.0)
    pts = PointSet(net, [0] * 4, [0.9, 0.95, 1.0, 1.05], [True] * 4)
    rows, profiles = neighbor_structure(pts)
    agg = extract_aggregation(pts, rows, profiles, intensity_global(4, net), 1.0)
    assert agg.precision == 1 and agg.recall == 1
    assert agg.center in agg.members


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(3, 40), st.floats(0.2, 4.0))
def test_extraction_properties(seed, n, h_hat):
    net = grid_network(4, 4)
    pts = generate_csr(net, n, seed)
    rows, profiles = neighbor_structure(pts)
    lam = intensity_global(n, net)
    a = extract_aggregation(pts, rows, profiles, lam, h_hat)
    b = extract_aggregation(pts, rows, profiles, lam, h_hat, normalize=True)
    # the 1/n factor is a positive scaling of every local value
    assert a.center == b.center and np.array_equal(a.members, b.members)
    counts = count_matrix(rows, profiles, [h_hat])[:, 0]
    assert counts[a.center] == counts.max()
    assert a.center == int(np.flatnonzero(counts == counts.max())[0])
    lengths = neighbor_lengths(rows[a.center], profiles[a.center])
    inside = set(rows[a.center].order[lengths <= h_hat + 1e-9].tolist())
    assert set(a.members.tolist()) == inside | {a.center}
    # dropping any non-center member lowers the center's count
    assert len(a.members) - 1 == counts[a.center]


def test_invalid_h_hat():
    net, pts, rows, profiles = collinear()
    with pytest.raises(ValueError):
        extract_aggregation(pts, rows, profiles, Intensity(3.0), 0.0)


def test_case1_signature():
    net, pts = compose_case(case_spec(1, seed=0))
    rows, profiles = neighbor_structure(pts)
    lam = intensity_global(pts.n, net)
    grid = ScaleGrid.default(net)
    c = derivative(length_l(length_k(pts, rows, profiles, lam, grid)))
    np.testing.assert_allclose(c.l_obs, c.k_obs - c.h)
    k_max = int(np.argmax(c.l_obs))
    assert c.h[k_max] < grid.h_max
    est = detect_scale(c)
    agg = extract_aggregation(pts, rows, profiles, lam, est.h_hat)
    assert pts.point_ids[agg.center].startswith("linear")
