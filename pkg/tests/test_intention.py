import numpy as np
import pytest

from conftest import LIE_X, SHAPE, STAND, TOL, posed, scene_graph_of
from teleassist.geometry import Pose
from teleassist.intention import (
    ACTION_CLASSES,
    FRAME_RATE_HZ,
    HandObs,
    IntentError,
    ModelWeights,
    ObservationWindow,
    WINDOW_FRAMES,
    attention_adjacency,
    encode_entities,
    entity_features,
    gnn_forward,
    gnn_layers,
    hand_velocities,
    heuristic_intent,
    positional_encode,
    positional_pattern,
    predict,
    velocity_embed,
)
from teleassist.planner import GoalLibrary, TASK_LABELS
from teleassist.scene_graph import SceneGraph, build_scene_graph


def make_window(rng, n_blocks=5):
    poses = rng.normal(size=(WINDOW_FRAMES, n_blocks + 2, 7))
    return ObservationWindow(poses)


def still_window(n_blocks=5):
    return ObservationWindow(np.zeros((WINDOW_FRAMES, n_blocks + 2, 7)))


# ---------------------------------------------------------------------------
# window and features

def test_window_validation():
    with pytest.raises(IntentError):
        ObservationWindow(np.zeros((WINDOW_FRAMES - 1, 7, 7)))
    with pytest.raises(IntentError):
        ObservationWindow(np.zeros((WINDOW_FRAMES, 7, 6)))
    with pytest.raises(IntentError):
        ObservationWindow(np.zeros((WINDOW_FRAMES, 1, 7)))
    with pytest.raises(IntentError):
        ObservationWindow(np.full((WINDOW_FRAMES, 7, 7), np.nan))
    with pytest.raises(IntentError):
        ObservationWindow(np.zeros((WINDOW_FRAMES, 7, 7)), rate_hz=10.0)


def test_window_copies_input():
    buf = np.zeros((WINDOW_FRAMES, 7, 7))
    w = ObservationWindow(buf)
    buf[0, 0, 0] = 5.0  # caller's rolling buffer stays writable
    assert w.poses[0, 0, 0] == 0.0


def test_zero_window_encodes_to_pure_pattern():
    enc = positional_encode(still_window())
    pat = positional_pattern()
    assert enc.shape == (WINDOW_FRAMES, 7, 14)
    for e in range(7):
        assert np.array_equal(enc[:, e, :], pat)


def test_positional_encode_deterministic():
    w = make_window(np.random.default_rng(3))
    assert np.array_equal(positional_encode(w), positional_encode(w))


def test_time_code_stays_with_the_slot():
    # Reordering frames moves the content but not the time code: stripping
    # the pattern recovers the permuted pose features.
    rng = np.random.default_rng(4)
    w = make_window(rng)
    perm = rng.permutation(WINDOW_FRAMES)
    w2 = ObservationWindow(w.poses[perm])
    pat = positional_pattern()[:, None, :]
    got = (positional_encode(w2) - pat)[:, :, :7]
    want = (positional_encode(w) - pat)[perm][:, :, :7]
    assert np.allclose(got, want, atol=1e-12)


def test_velocity_rows_zero_for_blocks():
    rng = np.random.default_rng(5)
    feats = entity_features(make_window(rng))
    assert np.all(feats[:, 2:, 7:] == 0.0)
    assert np.any(feats[:, :2, 7:] != 0.0)


# ---------------------------------------------------------------------------
# encoder

def test_encoder_shape_five_blocks():
    w = ModelWeights.random(0)
    out = encode_entities(still_window(5), w)
    assert out.shape == (7, 32)


def test_encoder_shape_three_blocks():
    w = ModelWeights.random(0, n_blocks=3)
    out = encode_entities(still_window(3), w)
    assert out.shape == (5, 32)


def test_encoder_finite_fuzz():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        out = encode_entities(make_window(rng), ModelWeights.random(seed))
        assert np.all(np.isfinite(out))


# ---------------------------------------------------------------------------
# adjacency

def test_adjacency_uniform_when_scores_equal():
    w = ModelWeights.random(1)
    t = dict(w.tensors)
    t["attn.wq"] = np.zeros_like(t["attn.wq"])
    w0 = ModelWeights(t, n_entities=w.n_entities)
    F = encode_entities(make_window(np.random.default_rng(1)), w0)
    adj = attention_adjacency(F, w0)
    assert np.allclose(adj.row_stochastic, 1.0 / 7.0)
    # an already-symmetric attention matrix is a fixed point of the averaging
    assert np.allclose(adj.matrix, adj.row_stochastic)


def test_adjacency_invariants_fuzz():
    for seed in range(200):
        rng = np.random.default_rng(seed)
        w = ModelWeights.random(seed)
        F = encode_entities(make_window(rng), w)
        adj = attention_adjacency(F, w)
        assert np.abs(adj.matrix - adj.matrix.T).max() <= 1e-9
        assert np.abs(adj.row_stochastic.sum(axis=1) - 1.0).max() <= 1e-9
        assert adj.matrix.min() >= 0.0 and adj.matrix.max() <= 1.0


# ---------------------------------------------------------------------------
# graph convolutions

def _single_identity_layer_weights():
    w = ModelWeights.random(0, gnn_dims=(32,))
    t = dict(w.tensors)
    t["gnn.w0"] = np.eye(32, dtype=np.float32)
    return ModelWeights(t, n_entities=7)


def test_gnn_identity_layer_passes_through():
    w = _single_identity_layer_weights()
    F0 = np.random.default_rng(2).normal(size=(7, 32))
    layers = gnn_layers(np.eye(7), F0, w)
    assert len(layers) == 1
    # final layer has no activation, so negatives survive untouched
    assert np.array_equal(layers[0], F0)


def test_gnn_zero_input_stays_zero():
    w = ModelWeights.random(3)
    F0 = np.zeros((7, 32))
    A = np.full((7, 7), 1.0 / 7.0)
    for layer in gnn_layers(A, F0, w):
        assert np.all(layer == 0.0)
    assert np.all(gnn_forward(A, F0, w) == 0.0)  # zero biases in random init


def test_gnn_shape_chain():
    w = ModelWeights.random(4)
    win = make_window(np.random.default_rng(4))
    F0 = encode_entities(win, w)
    adj = attention_adjacency(F0, w)
    layers = gnn_layers(adj.matrix, F0, w)
    assert [l.shape for l in layers] == [(7, 32), (7, 16)]
    g = gnn_forward(adj.matrix, F0, w)
    assert g.shape == (32,)


def test_gnn_dimension_error_names_layer():
    w = ModelWeights.random(5)
    with pytest.raises(IntentError, match="gnn.w0"):
        gnn_layers(np.eye(7), np.zeros((7, 16)), w)
    t = dict(w.tensors)
    t["gnn.w1"] = np.zeros((31, 16), dtype=np.float32)
    with pytest.raises(IntentError, match="gnn.w1"):
        ModelWeights(t, n_entities=7)


# ---------------------------------------------------------------------------
# velocity branch

def test_velocities_zero_when_stationary():
    assert np.all(hand_velocities(still_window()) == 0.0)


def test_velocities_constant_for_constant_motion():
    poses = np.zeros((WINDOW_FRAMES, 7, 7))
    t = np.arange(WINDOW_FRAMES)
    poses[:, 0, 0] = 0.01 * t   # left hand drifts +x
    poses[:, 1, 2] = -0.02 * t  # right hand drifts -z
    vel = hand_velocities(ObservationWindow(poses))
    assert np.allclose(vel[1:, 0], 0.01 * FRAME_RATE_HZ)
    assert np.allclose(vel[1:, 9], -0.02 * FRAME_RATE_HZ)
    assert np.all(vel[0] == 0.0)


def test_velocity_embed_deterministic_fuzz():
    for seed in range(30):
        rng = np.random.default_rng(seed)
        w = ModelWeights.random(seed)
        win = make_window(rng)
        out = velocity_embed(win, w)
        assert out.shape == (16,)
        assert np.all(np.isfinite(out))
        assert np.array_equal(out, velocity_embed(win, w))


# ---------------------------------------------------------------------------
# predict

def test_predict_zero_heads_give_neutral_outputs():
    w = ModelWeights.random(6)
    t = dict(w.tensors)
    for name in ("task.w", "task.b", "left.w", "left.b", "right.w", "right.b"):
        t[name] = np.zeros_like(t[name])
    est = predict(make_window(np.random.default_rng(6)), ModelWeights(t, n_entities=7))
    assert all(p == 0.5 for p in est.task_probs.values())
    assert np.allclose(est.left_action, 1.0 / len(ACTION_CLASSES))
    assert np.allclose(est.right_action, 1.0 / len(ACTION_CLASSES))


def test_predict_fuzz_invariants():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        w = ModelWeights.random(seed)
        win = make_window(rng)
        est = predict(win, w)
        assert set(est.task_probs) == set(TASK_LABELS)
        assert all(0.0 <= p <= 1.0 for p in est.task_probs.values())
        assert abs(est.left_action.sum() - 1.0) <= 1e-6
        assert abs(est.right_action.sum() - 1.0) <= 1e-6
        again = predict(win, w)
        assert est.task_probs == again.task_probs
        assert np.array_equal(est.left_action, again.left_action)


def test_predict_rejects_mismatched_entity_count():
    w = ModelWeights.random(7)          # sized for 5 blocks
    with pytest.raises(IntentError, match="entities"):
        predict(still_window(3), w)


# ---------------------------------------------------------------------------
# weights file

def test_weights_roundtrip(tmp_path):
    w = ModelWeights.random(8)
    path = tmp_path / "w.taw"
    w.save(path)
    back = ModelWeights.load(path)
    assert back.n_entities == w.n_entities
    assert set(back.tensors) == set(w.tensors)
    for name in w.tensors:
        assert np.array_equal(back.tensors[name], w.tensors[name])
    predict(still_window(), back)  # loaded weights drive the forward pass


def test_weights_bad_file(tmp_path):
    p = tmp_path / "junk.taw"
    p.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(IntentError, match="magic"):
        ModelWeights.load(p)
    w = ModelWeights.random(9)
    good = tmp_path / "good.taw"
    w.save(good)
    clipped = tmp_path / "clipped.taw"
    clipped.write_bytes(good.read_bytes()[:-40])
    with pytest.raises(IntentError, match="truncated"):
        ModelWeights.load(clipped)


def test_weights_dimension_chain_errors_name_tensor():
    w = ModelWeights.random(10)
    t = dict(w.tensors)
    t["task.w"] = np.zeros((32, 5), dtype=np.float32)
    with pytest.raises(IntentError, match="task.w"):
        ModelWeights(t, n_entities=7)
    t2 = dict(w.tensors)
    del t2["encoder.b"]
    with pytest.raises(IntentError, match="encoder.b"):
        ModelWeights(t2, n_entities=7)


# ---------------------------------------------------------------------------
# rule-based route

LIB = GoalLibrary.builtin()


def idle_hands():
    far = Pose((2.0, 2.0, 1.0))
    return [HandObs(far), HandObs(far)]


def test_heuristic_idle_far_and_still():
    est = heuristic_intent(SceneGraph(), {"B1": posed(LIE_X)}, idle_hands(), LIB)
    assert est.top_action("left") == "idle"
    assert est.top_action("right") == "idle"


def test_heuristic_pickup_when_approaching_nearby_block():
    block = posed(LIE_X)
    hand = HandObs(Pose((0.05, 0.0, 0.0075)), velocity=(-0.05, 0.0, 0.0))
    est = heuristic_intent(SceneGraph(), {"B1": block}, [hand, idle_hands()[1]], LIB)
    assert est.top_action("left") == "pick_up"
    assert est.top_action("right") == "idle"


def test_heuristic_withdraw_when_receding():
    hand = HandObs(Pose((0.2, 0.0, 0.05)), velocity=(0.5, 0.0, 0.0))
    est = heuristic_intent(SceneGraph(), {"B1": posed(LIE_X)}, [hand, idle_hands()[1]], LIB)
    assert est.top_action("left") == "withdraw"


def test_heuristic_place_classes():
    placed = {"B1": posed(LIE_X)}
    g = scene_graph_of(placed)
    held_near = posed(STAND, x=0.02, z=0.12)
    blocks = dict(placed, B2=held_near)
    hand = HandObs(Pose((0.02, 0.0, 0.15)), velocity=(0.0, 0.0, -0.05), held="B2")
    est = heuristic_intent(g, blocks, [hand, idle_hands()[1]], LIB)
    assert est.top_action("left") == "stand_on_block"
    # same descent far from the structure reads as a table placement
    blocks["B2"] = posed(STAND, x=1.5, y=1.5, z=0.12)
    hand_far = HandObs(Pose((1.5, 1.5, 0.15)), velocity=(0.0, 0.0, -0.05), held="B2")
    est = heuristic_intent(g, blocks, [hand_far, idle_hands()[1]], LIB)
    assert est.top_action("left") == "stand"


def test_heuristic_completed_goal_pins_task():
    for label in LIB.available_labels:
        goal = LIB.variants_of(label)[0]
        placed = {bid: goal.pose_of(bid) for bid in goal.node_ids}
        est = heuristic_intent(build_scene_graph(placed, SHAPE, TOL), placed, idle_hands(), LIB)
        assert est.task_probs[label] == 1.0
        for other in LIB.available_labels:
            if other != label:
                assert est.task_probs[other] < 1.0 - 1e-6


def test_heuristic_task_argmax_from_two_blocks_on():
    # every prefix of every shipped assembly identifies its task strictly,
    # whatever ids the blocks happen to carry
    for label in LIB.available_labels:
        goal = LIB.variants_of(label)[0]
        ids = sorted(goal.node_ids)
        for k in range(2, len(ids) + 1):
            placed = {f"X{9 - i}": goal.pose_of(bid) for i, bid in enumerate(ids[:k])}
            g = build_scene_graph(placed, SHAPE, TOL)
            est = heuristic_intent(g, placed, idle_hands(), LIB)
            ranked = sorted(est.task_probs, key=est.task_probs.get, reverse=True)
            assert ranked[0] == label, (label, k, est.task_probs)
            assert est.task_probs[ranked[0]] > est.task_probs[ranked[1]] + 1e-9


def test_heuristic_undecided_below_two_blocks():
    for placed in ({}, {"B1": posed(LIE_X)}):
        g = scene_graph_of(placed) if placed else SceneGraph()
        est = heuristic_intent(g, placed, idle_hands(), LIB)
        top = [l for l in LIB.available_labels if est.task_probs[l] == 1.0]
        assert len(top) == len(LIB.available_labels)  # exact tie, undecided
        for label in set(TASK_LABELS) - set(LIB.available_labels):
            assert est.task_probs[label] == 0.0
