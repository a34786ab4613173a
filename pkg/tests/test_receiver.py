import numpy as np
import pytest

from skpura import channel, receiver
from skpura.bigamp import BigAmpOpts
from skpura.config import preset

FAST = receiver.ReceiverOpts(t_max=4, outer_iters=6, seed=0,
                             bigamp=BigAmpOpts(max_iter=50, tol=1e-5))


def scripted(outputs):
    """Stub trial function from a list of per-trial packet lists."""
    return lambda t: [np.array(p, dtype=np.uint8) for p in outputs[min(t, len(outputs) - 1)]]


def test_algorithm_early_stop_at_priority_threshold():
    packets = [[1, 0, 1], [0, 1, 1]]
    opts = receiver.ReceiverOpts(p_thr=3, t_max=30)
    res = receiver.run_trials(scripted([packets] * 30), 2, opts)
    assert res.trials_used == 3
    assert sorted(p.tolist() for p in res.packets) == sorted(packets)


def test_algorithm_alternating_disjoint_sets_no_early_stop():
    a = [[1, 0, 0], [0, 0, 1]]
    b = [[1, 1, 1], [0, 1, 0]]
    outputs = [a if t % 2 == 0 else b for t in range(6)]
    opts = receiver.ReceiverOpts(p_thr=4, t_max=6)
    res = receiver.run_trials(lambda t: scripted([outputs[t]])(0), 2, opts)
    assert res.trials_used == 6
    # both sets got 3 votes; earliest-seen wins the tie
    assert sorted(p.tolist() for p in res.packets) == sorted(a)


def test_algorithm_tmax_one_returns_single_trial():
    packets = [[0, 0, 1], [1, 1, 0]]
    opts = receiver.ReceiverOpts(p_thr=3, t_max=1)
    res = receiver.run_trials(scripted([packets]), 2, opts)
    assert res.trials_used == 1
    assert sorted(p.tolist() for p in res.packets) == sorted(packets)


def test_algorithm_priority_accumulates_within_trial_duplicates():
    # a trial emitting the same packet twice bumps its priority twice
    packets = [[1, 1, 0], [1, 1, 0]]
    opts = receiver.ReceiverOpts(p_thr=4, t_max=2)
    res = receiver.run_trials(scripted([packets] * 2), 2, opts)
    assert res.trials_used == 2
    assert res.pending_size == 1


def test_algorithm_top_k_tie_breaks_lexicographic():
    outputs = [[[1, 0], [0, 1]], [[1, 1], [0, 0]]]
    opts = receiver.ReceiverOpts(p_thr=9, t_max=2)
    res = receiver.run_trials(lambda t: scripted([outputs[t]])(0), 3, opts)
    # all four packets have priority 1; first_seen then lexicographic bits
    got = [p.tolist() for p in res.packets]
    assert got == [[0, 1], [1, 0], [0, 0]]


def test_evaluate_pupe_cases():
    truth = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.uint8)
    assert receiver.evaluate_pupe(truth, list(truth)) == 0.0
    assert receiver.evaluate_pupe(truth, list(truth[:-1])) == 0.25
    dup = np.array([[1, 1], [1, 1]], dtype=np.uint8)
    assert receiver.evaluate_pupe(dup, list(dup)) == 1.0
    assert receiver.evaluate_pupe(truth, []) == 1.0


def test_pending_list_distinct_and_bounded():
    pend = receiver.PendingList()
    pend.merge([np.array([0, 1], dtype=np.uint8)] * 3, 0)
    pend.merge([np.array([1, 1], dtype=np.uint8)], 1)
    assert len(pend) == 2
    top = pend.top(5)
    assert len(top) == 2


def test_decode_frame_deterministic():
    cfg = preset(1, M=4, K_a=2, ebn0_db=15.0)
    truth = channel.simulate_frame(cfg, channel.frame_seed(3, 0, 0))
    r1 = receiver.decode_frame(truth.Y, cfg, FAST)
    r2 = receiver.decode_frame(truth.Y, cfg, FAST)
    assert r1.trials_used == r2.trials_used
    assert all(np.array_equal(a, b) for a, b in zip(r1.packets, r2.packets))


def test_decode_output_bounded_and_distinct():
    cfg = preset(1, M=4, K_a=3, ebn0_db=12.0)
    truth = channel.simulate_frame(cfg, channel.frame_seed(4, 0, 0))
    res = receiver.decode_frame(truth.Y, cfg, FAST)
    assert len(res.packets) <= cfg.K_a
    keys = {p.tobytes() for p in res.packets}
    assert len(keys) == len(res.packets)


def test_high_snr_small_system_recovers():
    cfg = preset(1, M=4, K_a=2, ebn0_db=20.0)
    perfect = 0
    for f in range(5):
        truth = channel.simulate_frame(cfg, channel.frame_seed(5, 0, f))
        opts = receiver.ReceiverOpts(t_max=4, outer_iters=6, seed=f,
                                     bigamp=BigAmpOpts(max_iter=50, tol=1e-5))
        res = receiver.decode_frame(truth.Y, cfg, opts)
        perfect += receiver.evaluate_pupe(truth.packets, res.packets) == 0
    assert perfect >= 4


@pytest.mark.acceptance
def test_single_user_high_snr_fifty_frames():
    cfg = preset(1, M=8, K_a=1, ebn0_db=20.0)
    for f in range(50):
        truth = channel.simulate_frame(cfg, channel.frame_seed(50, 0, f))
        opts = receiver.ReceiverOpts(t_max=6, outer_iters=6, seed=f,
                                     bigamp=BigAmpOpts(max_iter=60, tol=1e-5))
        res = receiver.decode_frame(truth.Y, cfg, opts)
        assert receiver.evaluate_pupe(truth.packets, res.packets) == 0.0


def test_permutation_invariance_of_output_set():
    cfg = preset(1, M=4, K_a=3, ebn0_db=18.0)
    truth = channel.simulate_frame(cfg, channel.frame_seed(6, 0, 1))
    res = receiver.decode_frame(truth.Y, cfg, FAST)
    base = receiver.evaluate_pupe(truth.packets, res.packets)
    perm = truth.packets[::-1]
    assert receiver.evaluate_pupe(perm, res.packets) == base


def test_noise_floor_returns_garbage_not_crash():
    cfg = preset(1, M=2, K_a=2, ebn0_db=-30.0)
    truth = channel.simulate_frame(cfg, channel.frame_seed(7, 0, 0))
    opts = receiver.ReceiverOpts(t_max=2, outer_iters=3, seed=0,
                                 bigamp=BigAmpOpts(max_iter=30, tol=1e-4))
    res = receiver.decode_frame(truth.Y, cfg, opts)
    assert receiver.evaluate_pupe(truth.packets, res.packets) == 1.0
