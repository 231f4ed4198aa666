import time

import numpy as np
import pytest

from hmsbl.metrics import (
    MatchCountError,
    MatchReport,
    aggregate_trials,
    match_and_rmse,
    timeit,
)
from hmsbl.signal_model import Scene, Source


def test_match_exact_identity():
    truth = np.array([[0.1, 0.2], [-0.3, 0.4]])
    rep = match_and_rmse(truth.copy(), truth)
    assert rep.rmse == 0.0
    assert rep.assignment == (0, 1)
    assert not rep.unmatched


def test_match_permutation_invariance():
    rng = np.random.default_rng(0)
    truth = rng.uniform(-0.7, 0.7, size=(5, 2))
    est = truth + rng.normal(0, 0.01, size=truth.shape)
    base = match_and_rmse(est, truth)
    for _ in range(10):
        perm = rng.permutation(5)
        rep = match_and_rmse(est[perm], truth)
        assert rep.rmse == pytest.approx(base.rmse, rel=1e-12)
        # assignment composed with the permutation recovers the same pairing
        np.testing.assert_array_equal(np.array(perm)[list(rep.assignment)],
                                      list(base.assignment))


def test_match_finds_optimal_not_greedy():
    # classic greedy trap: nearest-first pairing strands the last truth point
    truth = np.array([[0.0, 0.0], [0.3, 0.0]])
    est = np.array([[0.1, 0.0], [-0.4, 0.0]])
    rep = match_and_rmse(est, truth)
    best = min(
        np.sqrt(((0.1) ** 2 + (0.3 - (-0.4)) ** 2) / 2),
        np.sqrt(((0.4) ** 2 + (0.3 - 0.1) ** 2) / 2),
    )
    assert rep.rmse == pytest.approx(best, rel=1e-12)


def test_match_accepts_scene_and_paired_inputs():
    scene = Scene(sources=(Source(0.1, 0.2), Source(-0.3, 0.4)), seed=0)
    est = np.array([[-0.3, 0.4], [0.1, 0.2]])
    rep = match_and_rmse(est, scene)
    assert rep.rmse == 0.0
    assert rep.assignment == (1, 0)


def test_match_count_mismatch_raises_with_partial():
    truth = np.array([[0.0, 0.0], [0.5, 0.5], [-0.5, 0.2]])
    est = np.array([[0.01, 0.0], [0.5, 0.49]])
    with pytest.raises(MatchCountError) as ei:
        match_and_rmse(est, truth)
    partial = ei.value.partial_report
    assert partial.unmatched
    assert len([a for a in partial.assignment if a >= 0]) == 2
    assert partial.rmse > 0


def test_match_large_k_uses_assignment_solver():
    # 9 sources exercises the non-exhaustive path; verify against identity
    rng = np.random.default_rng(1)
    truth = np.column_stack([np.linspace(-0.8, 0.8, 9), np.zeros(9)])
    est = truth + rng.normal(0, 1e-3, size=truth.shape)
    perm = rng.permutation(9)
    rep = match_and_rmse(est[perm], truth)
    np.testing.assert_array_equal(np.array(perm)[list(rep.assignment)], np.arange(9))


def test_exhaustive_and_hungarian_agree():
    rng = np.random.default_rng(2)
    for _ in range(20):
        truth = rng.uniform(-0.7, 0.7, size=(4, 2))
        est = rng.uniform(-0.7, 0.7, size=(4, 2))
        r = match_and_rmse(est, truth)
        # brute force over all 24 permutations
        from itertools import permutations
        best = min(
            np.sqrt(np.mean([np.sum((truth[i] - est[p[i]]) ** 2) for i in range(4)]))
            for p in permutations(range(4))
        )
        assert r.rmse == pytest.approx(best, rel=1e-12)


def test_match_empty_truth_rejected():
    with pytest.raises(ValueError):
        match_and_rmse(np.zeros((1, 2)), np.zeros((0, 2)))


def test_aggregate_trials():
    reports = [
        MatchReport(assignment=(0,), per_source_sq_err=(e ** 2,), rmse=e)
        for e in (0.01, 0.02, 0.09)
    ]
    s = aggregate_trials(reports, success_rmse=0.05)
    assert s.count == 3
    assert s.mean_rmse == pytest.approx(0.04)
    assert s.std_rmse == pytest.approx(np.std([0.01, 0.02, 0.09]))  # population std
    assert s.success_rate == pytest.approx(2 / 3)


def test_aggregate_single_report_has_zero_std():
    s = aggregate_trials([MatchReport(assignment=(0,), per_source_sq_err=(0.01,),
                                      rmse=0.1)])
    assert s.std_rmse == 0.0
    assert s.count == 1


def test_aggregate_empty_rejected():
    with pytest.raises(ValueError):
        aggregate_trials([])


def test_timeit_medians_and_warmup():
    calls = []

    def fn():
        calls.append(time.perf_counter())
        time.sleep(0.004)
        return None

    t = timeit(fn, repetitions=3)
    assert len(calls) == 4  # one discarded warm-up + 3 timed
    assert t.repetitions == 3
    assert t.median_seconds >= 0.004
    assert t.per_iteration_seconds is None  # result carries no iteration count


def test_timeit_per_iteration_from_diagnostics():
    class FakeDiag:
        n_iters = 10

    t = timeit(lambda: FakeDiag(), repetitions=3)
    assert t.per_iteration_seconds == pytest.approx(t.median_seconds / 10)

    # tuple results are searched for an iteration-bearing item
    t2 = timeit(lambda: ("state", FakeDiag()), repetitions=2)
    assert t2.per_iteration_seconds == pytest.approx(t2.median_seconds / 10)


def test_timeit_zero_iterations_gives_none():
    class FakeDiag:
        n_iters = 0

    t = timeit(lambda: FakeDiag(), repetitions=2)
    assert t.per_iteration_seconds is None
