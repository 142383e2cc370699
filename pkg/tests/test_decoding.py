import itertools

import numpy as np
import pytest

from tubeground.decoding import (
    TubePrediction,
    greedy_tube,
    pair_link_score,
    temporal_decode,
    tube_energy,
    viterbi_tube,
)
from tubeground.localizer import candidate_clips
from tubeground.metrics import box_iou


def brute_force_best(scores, boxes, t_start, t_end, theta):
    """Exhaustive oracle: enumerate every region sequence, score it with an
    inline loop, and keep the best (lexicographically smallest on ties)."""
    k = scores.shape[1]
    length = t_end - t_start + 1
    best_energy, best_path = -np.inf, None
    for path in itertools.product(range(k), repeat=length):
        if length == 1:
            energy = scores[t_start - 1, path[0]]
        else:
            total = 0.0
            for step, t in enumerate(range(t_start, t_end)):
                i, j = path[step], path[step + 1]
                total += (
                    scores[t - 1, i]
                    + scores[t, j]
                    + theta * box_iou(boxes[t - 1, i], boxes[t, j])
                )
            energy = total / (t_end - t_start)
        if energy > best_energy:  # first-seen wins ties: product is lexicographic
            best_energy, best_path = energy, path
    return best_energy, best_path


def random_instance(rng, n, k):
    scores = rng.uniform(0, 1, size=(n, k))
    boxes = np.stack(
        [
            rng.uniform(0.2, 0.8, size=(n, k)),
            rng.uniform(0.2, 0.8, size=(n, k)),
            rng.uniform(0.05, 0.4, size=(n, k)),
            rng.uniform(0.05, 0.4, size=(n, k)),
        ],
        axis=2,
    )
    return scores, boxes


class TestTemporalDecode:
    def test_zero_offsets(self):
        n = 20
        cands = candidate_clips(n, [4, 8])
        scores = np.zeros((n, 2))
        scores[9, 0] = 1.0  # step t=10, width 4 -> (8, 12)
        ts, te = temporal_decode(scores, np.zeros((n, 2, 2)), cands, n)
        assert (ts, te) == (8, 12)

    def test_offsets_applied(self):
        n = 20
        cands = candidate_clips(n, [8])
        scores = np.zeros((n, 1))
        scores[9, 0] = 1.0  # t=10, width 8 -> (6, 14)
        offsets = np.zeros((n, 1, 2))
        offsets[9, 0] = [1.0, 2.0]
        assert temporal_decode(scores, offsets, cands, n) == (5, 12)

    def test_tie_breaks_to_earliest_narrowest(self):
        n = 10
        cands = candidate_clips(n, [2, 4])
        scores = np.full((n, 2), 0.5)
        ts, te = temporal_decode(scores, np.zeros((n, 2, 2)), cands, n)
        # t=1, width 2 -> (0, 2), clamped to (1, 2).
        assert (ts, te) == (1, 2)

    def test_clamped_to_video(self):
        n = 10
        cands = candidate_clips(n, [8])
        scores = np.zeros((n, 1))
        scores[0, 0] = 1.0  # (-3, 5)
        assert temporal_decode(scores, np.zeros((n, 1, 2)), cands, n) == (1, 5)

    def test_inverted_collapses_to_center(self):
        n = 10
        cands = candidate_clips(n, [2])
        scores = np.zeros((n, 1))
        scores[4, 0] = 1.0  # t=5 -> (4, 6)
        offsets = np.zeros((n, 1, 2))
        offsets[4, 0] = [-3.0, 3.0]  # decoded (7, 3): inverted
        ts, te = temporal_decode(scores, offsets, cands, n)
        assert ts == te == 5


class TestPairLinkScore:
    def test_pinned_value(self):
        # Boxes engineered to IoU 0.5 exactly.
        a, b = [0.5, 0.5, 2.0, 1.0], [0.5, 0.5, 1.0, 1.0]
        assert pair_link_score(0.5, 0.7, a, b, theta=0.2) == pytest.approx(1.3, abs=1e-9)

    def test_disjoint_boxes(self):
        a, b = [0.2, 0.2, 0.1, 0.1], [0.8, 0.8, 0.1, 0.1]
        assert pair_link_score(0.4, 0.3, a, b, theta=0.2) == pytest.approx(0.7)

    def test_default_theta(self):
        a = [0.5, 0.5, 0.2, 0.2]
        assert pair_link_score(0.0, 0.0, a, a) == pytest.approx(0.2)


class TestViterbi:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(17)
        for trial in range(40):
            k = int(rng.integers(2, 5))
            length = int(rng.integers(1, 7))
            n = length + int(rng.integers(0, 3))
            t_start = int(rng.integers(1, n - length + 2))
            t_end = t_start + length - 1
            scores, boxes = random_instance(rng, n, k)
            tube = viterbi_tube(scores, boxes, t_start, t_end, theta=0.2)
            oracle_energy, oracle_path = brute_force_best(scores, boxes, t_start, t_end, 0.2)
            assert tube.energy == pytest.approx(oracle_energy, abs=1e-9)
            assert tuple(tube.region_indices[t] for t in range(t_start, t_end + 1)) == oracle_path

    def test_single_frame_argmax(self):
        scores = np.array([[0.1, 0.9, 0.3]])
        boxes = np.tile(np.array([0.5, 0.5, 0.2, 0.2]), (1, 3, 1))
        tube = viterbi_tube(scores, boxes, 1, 1)
        assert tube.region_indices == {1: 1}
        assert tube.energy == pytest.approx(0.9)

    def test_k1_forced(self):
        rng = np.random.default_rng(2)
        scores, boxes = random_instance(rng, 4, 1)
        tube = viterbi_tube(scores, boxes, 1, 4)
        assert all(i == 0 for i in tube.region_indices.values())

    def test_ties_lexicographic(self):
        scores = np.full((3, 3), 0.5)
        boxes = np.tile(np.array([0.5, 0.5, 0.2, 0.2]), (3, 3, 1))
        tube = viterbi_tube(scores, boxes, 1, 3)
        assert list(tube.region_indices.values()) == [0, 0, 0]

    def test_respects_valid_mask(self):
        scores = np.array([[0.9, 0.1], [0.9, 0.1]])
        boxes = np.tile(np.array([0.5, 0.5, 0.2, 0.2]), (2, 2, 1))
        valid = np.array([[False, True], [False, True]])
        tube = viterbi_tube(scores, boxes, 1, 2, valid=valid)
        assert list(tube.region_indices.values()) == [1, 1]


class TestGreedy:
    def test_per_frame_argmax(self):
        scores = np.array([[0.9, 0.1], [0.2, 0.8]])
        boxes = np.tile(np.array([0.5, 0.5, 0.2, 0.2]), (2, 2, 1))
        tube = greedy_tube(scores, boxes, 1, 2)
        assert list(tube.region_indices.values()) == [0, 1]

    def test_never_beats_viterbi(self):
        rng = np.random.default_rng(29)
        for _ in range(100):
            k = int(rng.integers(2, 5))
            n = int(rng.integers(1, 7))
            scores, boxes = random_instance(rng, n, k)
            g = greedy_tube(scores, boxes, 1, n, theta=0.2)
            v = viterbi_tube(scores, boxes, 1, n, theta=0.2)
            assert g.energy <= v.energy + 1e-12

    def test_energy_consistent(self):
        rng = np.random.default_rng(31)
        scores, boxes = random_instance(rng, 5, 3)
        tube = greedy_tube(scores, boxes, 2, 5, theta=0.2)
        assert tube.energy == pytest.approx(
            tube_energy(scores, boxes, 2, 5, tube.region_indices, 0.2)
        )


class TestTubePrediction:
    def test_requires_box_per_frame(self):
        with pytest.raises(ValueError):
            TubePrediction(1, 3, {1: 0, 2: 0}, {1: [0, 0, 1, 1], 2: [0, 0, 1, 1]}, 0.0)

    def test_round_trips_to_dict(self):
        box = [0.5, 0.5, 0.25, 0.25]
        tube = TubePrediction(2, 3, {2: 1, 3: 0}, {2: box, 3: box}, 0.75)
        d = tube.to_dict()
        assert d["t_start"] == 2 and d["boxes"]["3"] == box
