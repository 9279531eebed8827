from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualtrack.scene import BBox, Frame
from dualtrack.segmentation import (alpha_expansion, build_stgraph, confidence_map, crf_energy, fit_gmm,
                                    grabcut_init, maxflow, pairwise_weight, potts_energy, slic,
                                    spatial_neighbors, superpixel_unaries, temporal_neighbors)
from dualtrack.segmentation.expansion import expansion_move
from dualtrack.segmentation.slic import SuperpixelMap, slic_labels


def brute_min_cut(src, snk, edges, caps):
    n = len(src)
    best = np.inf
    for bits in product([False, True], repeat=n):
        side = np.array(bits)
        v = src[~side].sum() + snk[side].sum()
        for (u, w), c in zip(edges, caps):
            if side[u] and not side[w]:
                v += c
        best = min(best, v)
    return best


def random_cut_problem(rng, n, integer=True):
    draw = (lambda size: rng.integers(0, 10, size).astype(float)) if integer else (lambda size: rng.uniform(0, 10, size))
    src, snk = draw(n), draw(n)
    src[rng.random(n) < 0.3] = 0
    snk[rng.random(n) < 0.3] = 0
    pairs = [(u, w) for u in range(n) for w in range(n) if u != w and rng.random() < 0.3]
    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    return src, snk, edges, draw(len(edges))


def test_single_node_cut():
    val, side = maxflow([3.0], [5.0])
    assert val == 3.0 and not side[0]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 8))
def test_min_cut_matches_partition_search(seed, n):
    rng = np.random.default_rng(seed)
    src, snk, edges, caps = random_cut_problem(rng, n)
    val, side = maxflow(src, snk, edges, caps)
    assert val == brute_min_cut(src, snk, edges, caps)
    assert float(val).is_integer()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 8))
def test_min_cut_real_capacities(seed, n):
    rng = np.random.default_rng(seed)
    src, snk, edges, caps = random_cut_problem(rng, n, integer=False)
    val, _ = maxflow(src, snk, edges, caps)
    assert val == pytest.approx(brute_min_cut(src, snk, edges, caps), rel=1e-6, abs=1e-6)


def test_negative_capacity_rejected():
    with pytest.raises(ValueError):
        maxflow([-1.0], [1.0])


def brute_potts(unaries, edges, weights):
    n, L = unaries.shape
    return min(potts_energy(unaries, edges, weights, np.array(z)) for z in product(range(L), repeat=n))


def random_potts(rng, n, L=3):
    unaries = rng.uniform(0, 5, (n, L))
    pairs = [(u, w) for u in range(n) for w in range(u + 1, n) if rng.random() < 0.4]
    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    return unaries, edges, rng.uniform(0, 3, len(edges))


def test_decoupled_nodes_take_unary_argmin():
    rng = np.random.default_rng(0)
    u = rng.uniform(0, 1, (6, 3))
    edges = np.array([[0, 1], [1, 2]])
    res = alpha_expansion(u, edges, np.zeros(2))
    assert np.array_equal(res.labels, u.argmin(axis=1))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 7))
def test_expansion_within_bound_and_monotone(seed, n):
    rng = np.random.default_rng(seed)
    u, e, w = random_potts(rng, n)
    res = alpha_expansion(u, e, w)
    opt = brute_potts(u, e, w)
    assert res.energy <= 2 * opt + 1e-9
    trace = [potts_energy(u, e, w, np.zeros(n, int))] + [m[1] for m in res.moves]
    assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 6), st.integers(0, 2))
def test_single_move_is_optimal_over_its_move_space(seed, n, alpha):
    rng = np.random.default_rng(seed)
    u, e, w = random_potts(rng, n)
    cur = rng.integers(0, 3, n)
    got = potts_energy(u, e, w, expansion_move(u, e, w, cur, alpha))
    best = np.inf
    for take in product([False, True], repeat=n):
        z = np.where(take, alpha, cur)
        best = min(best, potts_energy(u, e, w, z))
    assert got == pytest.approx(best, abs=1e-6)


def test_gmm_single_color():
    g = fit_gmm(np.tile([50.0, 10.0, -5.0], (40, 1)), K=3)
    assert g.K == 1
    assert np.allclose(g.means[0], [50, 10, -5])
    assert np.allclose(g.covs[0], 1e-4 * np.eye(3))


def test_gmm_two_clusters():
    rng = np.random.default_rng(0)
    a = rng.normal([40, 0, 0], 0.5, (300, 3))
    b = rng.normal([90, 0, 0], 0.5, (200, 3))
    g = fit_gmm(np.vstack([a, b]), K=2)
    means = g.means[np.argsort(g.means[:, 0])]
    assert np.abs(means[0] - a.mean(axis=0)).max() < 1
    assert np.abs(means[1] - b.mean(axis=0)).max() < 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 5))
def test_em_log_likelihood_never_drops(seed, K):
    rng = np.random.default_rng(seed)
    X = rng.normal(0, 10, (150, 3)) + rng.integers(0, 3, (150, 1)) * 30
    h = fit_gmm(X, K, iters=40, tol=0.0, seed=seed).loglik_history
    assert all(b >= a - 1e-9 for a, b in zip(h, h[1:]))


def test_gmm_density_matches_scipy():
    from scipy.stats import multivariate_normal
    rng = np.random.default_rng(5)
    g = fit_gmm(rng.normal(0, 5, (200, 3)), K=2)
    X = rng.normal(0, 5, (20, 3))
    ref = sum(w * multivariate_normal(m, c).pdf(X) for w, m, c in zip(g.weights, g.means, g.covs))
    assert np.allclose(np.exp(g.log_density(X)), ref)


def two_color_frame():
    img = np.zeros((30, 40, 3), np.uint8)
    img[:, :] = (30, 160, 40)
    img[8:22, 10:20] = (220, 30, 30)
    img[8:22, 26:34] = (30, 30, 220)
    return Frame(img)


def test_confidence_maps():
    assert np.all(confidence_map(fit_gmm(np.ones((5, 3)), 1), Frame(np.full((4, 4, 3), 9, np.uint8))) == 1.0)
    f = two_color_frame()
    g = fit_gmm(f.lab[8:22, 10:20].reshape(-1, 3), 2)
    conf = confidence_map(g, f)
    assert conf[8:22, 10:20].min() > 0.5
    assert conf[8:22, 26:34].max() < 0.1


def test_grabcut_recovers_rectangle():
    f = two_color_frame()
    mask = grabcut_init(f, BBox(10, 8, 10, 14), label=3)
    ref = np.zeros((30, 40), np.int32)
    ref[8:22, 10:20] = 3
    assert np.array_equal(mask.labels, ref)


def test_grabcut_uniform_image_falls_back_to_box():
    f = Frame(np.full((20, 20, 3), 128, np.uint8))
    mask = grabcut_init(f, BBox(5, 5, 6, 8))
    assert mask.labels.sum() == 48 and mask.labels[5:13, 5:11].all()


def test_slic_single_superpixel():
    f = two_color_frame()
    sp = slic(f, 1)
    assert sp.n == 1 and sp.sizes[0] == 30 * 40


def test_slic_aligns_with_checkerboard():
    rng = np.random.default_rng(0)
    colors = rng.integers(0, 256, (16, 3))
    sq = np.arange(64) // 16
    index = sq[:, None] * 4 + sq[None, :]
    f = Frame(colors[index].astype(np.uint8))
    lab = slic_labels(np.asarray(f.lab), 16, compactness=1.0)
    # majority superpixel of every square covers almost all of it
    agree = sum(np.bincount(lab[index == k]).max() for k in range(16))
    assert agree / lab.size >= 0.95


def test_slic_superpixels_are_connected():
    from skimage.measure import label
    rng = np.random.default_rng(1)
    f = Frame(rng.integers(0, 256, (40, 50, 3)).astype(np.uint8))
    a = slic(f, 30).assignment
    for k in range(a.max() + 1):
        assert label(a == k, connectivity=1).max() == 1


def test_pairwise_weight_values():
    assert pairwise_weight([50, 0, 0], [50, 0, 0], [1, 0], [2, 0]) == 1
    assert pairwise_weight([50, 0, 0], [50, 0, 0], [1, 0], [-1, 0]) == 0
    assert pairwise_weight([50, 0, 0], [53, 0, 0], [1, 0], [0, 1]) == 0
    assert pairwise_weight([50, 0, 0], [53, 0, 0], [0, 0], [0, 1]) == 0.25


def _map(assign):
    assign = np.asarray(assign)
    return SuperpixelMap.from_assignment(assign, np.zeros(assign.shape + (3,)))


def test_temporal_edges():
    a = np.repeat(np.arange(4), 4).reshape(4, 4)   # rows are superpixels
    sp = _map(a)
    same = temporal_neighbors(sp, sp, np.zeros((4, 4, 2)))
    assert same.tolist() == [[0, 0], [1, 1], [2, 2], [3, 3]]

    down = np.zeros((4, 4, 2))
    down[..., 1] = 1.0
    assert temporal_neighbors(sp, sp, down).tolist() == [[0, 1], [1, 2], [2, 3]]

    cols = _map(np.tile(np.arange(4), (4, 1)))
    assert len(temporal_neighbors(sp, cols, np.zeros((4, 4, 2)))) == 0


def test_crf_energy_two_nodes():
    sp = _map([[0, 1]]).with_flow(np.zeros((1, 2, 2)))
    g = build_stgraph([sp], [], beta1=2.0)
    u = np.array([[1.0, 4.0], [3.0, 0.5]])
    expected = {(0, 0): 4.0, (0, 1): 1.5 + 2.0, (1, 0): 7.0 + 2.0, (1, 1): 4.5}
    for z, e in expected.items():
        assert crf_energy(g, np.array(z), u) == pytest.approx(e)
    with pytest.raises(ValueError):
        crf_energy(g, np.array([0, 2]), u)


def test_stgraph_unaries_and_expand():
    sp = _map([[0, 0, 1, 1]]).with_flow(np.zeros((1, 4, 2)))
    g = build_stgraph([sp, sp], [np.zeros((1, 4, 2))])
    assert g.n_nodes == 4 and g.temporal.tolist() == [[0, 2], [1, 3]]
    bg = [np.array([[1.0, 1.0, 0.5, 0.5]])] * 2
    fg = [[np.array([[0.25, 0.25, 1.0, 1.0]])]] * 2
    Q = superpixel_unaries(g, fg, bg)
    assert np.allclose(Q[0], [0, np.log(4)]) and np.allclose(Q[1], [np.log(2), 0])
    assert g.expand(np.array([0, 1, 1, 0]), 1).tolist() == [[1, 1, 0, 0]]
    assert spatial_neighbors(sp.assignment).tolist() == [[0, 1]]
