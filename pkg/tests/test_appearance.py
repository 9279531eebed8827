import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from dualtrack.appearance import (AppearanceModel, LearningConfig, SearchSpace, UntrainableTargetError,
                                  cutting_plane, load_model, most_violated_index, pa_update, primal_objective,
                                  save_model, score, solve_working_set, structured_loss, train_initial,
                                  most_violated)
from dualtrack.features import DEFAULT_FEATURES, joint_feature
from dualtrack.scene import BBox, Frame, iou
from dualtrack.synthetic import SyntheticScene, SyntheticTarget, generate_synthetic

STRIPES = ((240, 240, 240), (20, 20, 20), (240, 240, 240), (20, 20, 20))


@pytest.fixture(scope="module")
def striped():
    tg = SyntheticTarget(1, (20, 36), ((0, 80, 60), (1, 84, 60)), STRIPES, noise=3)
    d = generate_synthetic(SyntheticScene(n_frames=2, targets=(tg,), noise=3), seed=0)
    f0 = Frame(d.frames[0], 0)
    gt = d.tracks[1].boxes[0]
    return f0, Frame(d.frames[1], 1), gt, d.tracks[1].boxes[1], train_initial(f0, gt, LearningConfig(stride=4))


def test_structured_loss():
    a = BBox(0, 0, 10, 10)
    assert structured_loss(a, a) == 0
    assert structured_loss(a, BBox(50, 0, 10, 10)) == 1
    assert structured_loss(a, BBox(5, 0, 10, 10)) == pytest.approx(2 / 3)


def test_search_space_grid_and_order():
    sp = SearchSpace(BBox(40, 40, 10, 20), radius=4, stride=2)
    boxes = sp.boxes()
    assert len(boxes) == 5 * 5 * 3
    assert [b.scale for b in boxes[::25]] == [0.95, 1.0, 1.05]
    assert boxes[0].center == pytest.approx((41.0, 46.0))


def test_most_violated_with_zero_weights_picks_largest_loss():
    rng = np.random.default_rng(0)
    feats = rng.normal(size=(50, 7))
    losses = rng.uniform(0, 1, 50)
    losses[[11, 30]] = 2.0
    assert most_violated_index(np.zeros(7), feats, losses) == 11


@given(st.integers(0, 10_000))
def test_most_violated_matches_scan(seed):
    rng = np.random.default_rng(seed)
    feats = rng.integers(-2, 3, (50, 4)).astype(float)
    losses = rng.integers(0, 3, 50) / 2.0
    w = rng.integers(-1, 2, 4).astype(float)
    vals = [float(f @ w) + l for f, l in zip(feats, losses)]
    best = max(vals)
    assert most_violated_index(w, feats, losses) == vals.index(best)


@pytest.mark.parametrize("C, margin", [(10.0, 1.0), (0.1, 0.2)])
def test_single_constraint_svm_closed_form(C, margin):
    phi_gt = np.array([1.0, 0.0])
    neg = np.array([[0.0, 1.0]])
    w, work, _ = cutting_plane(phi_gt, neg, np.array([1.0]), C, epsilon=1e-9)
    # optimum is w = a (phi_gt - neg) with a = min(C, 1 / |d|^2)
    assert w @ (phi_gt - neg[0]) == pytest.approx(margin)
    assert w == pytest.approx(min(C, 0.5) * (phi_gt - neg[0]))


def _qp_oracle(D, losses, C):
    n = D.shape[1]
    fun = lambda v: 0.5 * v[:n] @ v[:n] + C * v[n]
    cons = [{"type": "ineq", "fun": lambda v, j=j: D[j] @ v[:n] - losses[j] + v[n]} for j in range(len(D))]
    cons.append({"type": "ineq", "fun": lambda v: v[n]})
    res = minimize(fun, np.zeros(n + 1), constraints=cons, method="SLSQP", options={"ftol": 1e-12, "maxiter": 500})
    return res.fun


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(2, 5), st.floats(0.05, 5.0), st.integers(0, 10_000))
def test_working_set_solver_matches_generic_qp(m, n, C, seed):
    rng = np.random.default_rng(seed)
    D = rng.normal(size=(m, n))
    losses = rng.uniform(0.1, 1.0, m)
    a = solve_working_set(D, losses, C)
    assert a.min() >= 0 and a.sum() <= C + 1e-9
    assert primal_objective(a @ D, D, losses, C) == pytest.approx(_qp_oracle(D, losses, C), rel=1e-5, abs=1e-7)


def test_cutting_plane_objective_trace(striped):
    hist = striped[4].history
    ws = [r["working_set"] for r in hist]
    assert all(b >= a - 1e-9 for a, b in zip(ws, ws[1:]))
    assert all(r["full"] >= r["working_set"] - 1e-9 for r in hist)
    assert hist[-1]["full"] - hist[-1]["working_set"] <= 10.0 * 1e-2


def test_untrainable_target():
    with pytest.raises(UntrainableTargetError, match="untrainable-target"):
        cutting_plane(np.zeros(3), np.ones((2, 3)), np.ones(2), 1.0)


def test_score_zero_weights():
    f = Frame(np.full((20, 20, 3), 90, np.uint8))
    m = AppearanceModel(1, np.zeros(DEFAULT_FEATURES.length))
    assert score(m, f, BBox(2, 2, 8, 8)) == 0.0


def test_trained_model_prefers_gt(striped):
    f0, f1, gt, gt1, m = striped
    rival = most_violated(m, f0, gt, SearchSpace(gt, radius=40, stride=4))
    assert score(m, f0, gt) > score(m, f0, rival)
    sp = SearchSpace(gt.moved(*gt.center, frame=1), radius=8, stride=4).boxes()
    best = max(sp, key=lambda b: score(m, f1, b))
    assert iou(best, gt1) == 1.0


def test_pa_update_passive_and_improving(striped):
    f0, f1, gt, gt1, m = striped
    space = SearchSpace(gt1, radius=8, stride=4)
    big = AppearanceModel(1, m.w * 100)
    assert pa_update(big, f1, gt1, space) is big

    w0 = AppearanceModel(1, np.zeros_like(m.w))
    upd = pa_update(w0, f1, gt1, space, C_pa=0.1)
    rival = most_violated(w0, f1, gt1, space)
    d = joint_feature(f1, gt1) - joint_feature(f1, rival)
    before = max(0.0, structured_loss(gt1, rival) - w0.w @ d)
    after = max(0.0, structured_loss(gt1, rival) - upd.w @ d)
    assert after <= before and not np.array_equal(upd.w, w0.w)


def test_pa_update_zero_direction():
    f = Frame(np.full((40, 40, 3), 120, np.uint8))
    m = AppearanceModel(1, np.zeros(DEFAULT_FEATURES.length))
    # a flat image gives every box the same feature, so the update direction vanishes
    assert pa_update(m, f, BBox(10, 10, 8, 16), SearchSpace(BBox(10, 10, 8, 16), radius=4, stride=2)) is m


def test_training_is_deterministic(striped, tmp_path):
    f0, _, gt, _, m = striped
    again = train_initial(f0, gt, LearningConfig(stride=4))
    assert np.array_equal(again.w, m.w)
    save_model(m, tmp_path / "m.bin")
    back = load_model(tmp_path / "m.bin")
    assert back.target_id == 1 and np.array_equal(back.w, m.w)
