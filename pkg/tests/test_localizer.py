import math

import numpy as np
import pytest
import torch

from tubeground.localizer import (
    DEFAULT_WIDTHS,
    FrameAggregator,
    SpatialHead,
    Targets,
    TemporalHead,
    best_candidate_index,
    candidate_clips,
    clip_iou_targets,
    compute_losses,
    compute_targets,
    smooth_l1,
)

from helpers import softmax_np


class TestCandidates:
    def test_default_widths(self):
        assert DEFAULT_WIDTHS == (8, 16, 32, 64, 96, 128, 164, 196)
        cands = candidate_clips(200, DEFAULT_WIDTHS)
        assert cands.shape == (200, 8, 2)

    def test_boundaries_from_center_and_width(self):
        cands = candidate_clips(20, [8])
        assert tuple(cands[9, 0]) == (6.0, 14.0)  # t=10, w=8

    def test_one_candidate_per_step(self):
        assert candidate_clips(20, [8]).shape == (20, 1, 2)

    def test_unclamped(self):
        cands = candidate_clips(10, [8])
        assert cands[0, 0, 0] == -3.0  # t=1 extends past the start

    def test_empty_widths_rejected(self):
        with pytest.raises(ValueError):
            candidate_clips(10, [])


class TestTargets:
    def test_delta_definition(self):
        cands = candidate_clips(20, [8])
        scores = np.zeros((20, 1))
        scores[9, 0] = 1.0  # best candidate (6, 14)
        boxes = np.tile([0.5, 0.5, 0.2, 0.2], (20, 3, 1))
        gt_boxes = {t: [0.5, 0.5, 0.2, 0.2] for t in range(5, 13)}
        targets = compute_targets(cands, (5, 12), boxes, gt_boxes, scores)
        assert targets.delta == (1.0, 2.0)
        assert (targets.best_step, targets.best_width) == (9, 0)

    def test_candidate_equal_to_gt_scores_one(self):
        cands = candidate_clips(20, [8])
        ious = clip_iou_targets(cands, (6, 14), 20)
        assert ious[9, 0] == pytest.approx(1.0)

    def test_interval_arithmetic(self):
        cands = np.array([[[0.0, 10.0]]])
        ious = clip_iou_targets(cands, (5, 15), 100)
        # Clamp turns (0, 10) into (1, 10): overlap 5 over union 14.
        assert ious[0, 0] == pytest.approx(5.0 / 14.0, abs=1e-9)

    def test_tie_breaks_earlier_then_narrower(self):
        scores = np.full((4, 2), 0.7)
        assert best_candidate_index(scores) == (0, 0)
        scores[2, 1] = 0.9
        assert best_candidate_index(scores) == (2, 1)

    def test_spatial_targets_only_inside_clip(self):
        cands = candidate_clips(10, [4])
        boxes = np.tile([0.5, 0.5, 0.2, 0.2], (10, 2, 1))
        gt_boxes = {t: [0.5, 0.5, 0.2, 0.2] for t in range(3, 6)}
        targets = compute_targets(cands, (3, 5), boxes, gt_boxes, np.zeros((10, 1)))
        assert targets.clip_frames == [3, 4, 5]
        assert targets.spatial_iou.shape == (3, 2)
        assert targets.spatial_iou == pytest.approx(np.ones((3, 2)))

    def test_empty_clip_rejected(self):
        cands = candidate_clips(10, [4])
        with pytest.raises(ValueError):
            compute_targets(cands, (5, 3), np.zeros((10, 2, 4)), {}, np.zeros((10, 1)))


class TestHeads:
    def test_zero_params_give_half_and_zero(self):
        torch.manual_seed(0)
        head = TemporalHead(6, 4, num_widths=3).double()
        spatial = SpatialHead(5, 4, 6).double()
        with torch.no_grad():
            for p in list(head.parameters()) + list(spatial.parameters()):
                p.zero_()
        frames = torch.randn(7, 6, dtype=torch.float64)
        query = torch.randn(4, dtype=torch.float64)
        regions = torch.randn(7, 2, 5, dtype=torch.float64)
        scores, offsets = head(frames, query)
        assert torch.all(scores == 0.5)
        assert torch.all(offsets == 0.0)
        assert torch.all(spatial(regions, query, frames) == 0.5)

    def test_shapes(self):
        torch.manual_seed(1)
        head = TemporalHead(6, 4, num_widths=8).double()
        scores, offsets = head(torch.randn(5, 6, dtype=torch.float64), torch.randn(4, dtype=torch.float64))
        assert scores.shape == (5, 8)
        assert offsets.shape == (5, 8, 2)

    def test_matches_affine_sigmoid_oracle(self):
        torch.manual_seed(2)
        head = TemporalHead(3, 2, num_widths=2).double()
        spatial = SpatialHead(3, 2, 3).double()
        rng = np.random.default_rng(5)
        frames = torch.as_tensor(rng.normal(size=(4, 3)))
        query = torch.as_tensor(rng.normal(size=2))
        regions = torch.as_tensor(rng.normal(size=(4, 2, 3)))
        scores, offsets = head(frames, query)
        s = spatial(regions, query, frames)

        wc = head.confidence.weight.detach().numpy()
        bc = head.confidence.bias.detach().numpy()
        wo = head.offset.weight.detach().numpy()
        bo = head.offset.bias.detach().numpy()
        wm = spatial.matcher.weight.detach().numpy()[0]
        bm = float(spatial.matcher.bias.detach().numpy()[0])
        for t in range(4):
            x = np.concatenate([frames[t].numpy(), query.numpy()])
            assert np.allclose(scores[t].detach().numpy(), 1 / (1 + np.exp(-(wc @ x + bc))), atol=1e-9)
            assert np.allclose(offsets[t].detach().numpy().ravel(), wo @ x + bo, atol=1e-9)
            for i in range(2):
                xi = np.concatenate([regions[t, i].numpy(), query.numpy(), frames[t].numpy()])
                assert s[t, i].detach().numpy() == pytest.approx(1 / (1 + np.exp(-(wm @ xi + bm))), abs=1e-9)


class TestAggregator:
    def test_single_region(self):
        torch.manual_seed(0)
        agg = FrameAggregator(5, 4, 3, hidden_dim=4).double()
        regions = torch.randn(3, 1, 5, dtype=torch.float64)
        pooled, beta = agg.attend(regions, torch.randn(4, dtype=torch.float64), torch.ones(3, 1, dtype=torch.bool))
        assert torch.allclose(pooled, regions[:, 0])
        assert torch.allclose(beta, torch.ones(3, 1, dtype=torch.float64))

    def test_identical_regions(self):
        torch.manual_seed(1)
        agg = FrameAggregator(5, 4, 3, hidden_dim=4).double()
        regions = torch.randn(2, 1, 5, dtype=torch.float64).expand(2, 3, 5)
        pooled, _ = agg.attend(regions, torch.randn(4, dtype=torch.float64), torch.ones(2, 3, dtype=torch.bool))
        assert torch.allclose(pooled, regions[:, 0], atol=1e-12)

    def test_matches_scalar_oracle(self):
        torch.manual_seed(2)
        agg = FrameAggregator(5, 4, 3, hidden_dim=4).double()
        rng = np.random.default_rng(7)
        regions = torch.as_tensor(rng.normal(size=(2, 3, 5)))
        query = torch.as_tensor(rng.normal(size=4))
        pooled, beta = agg.attend(regions, query, torch.ones(2, 3, dtype=torch.bool))

        w1 = agg.region_key.weight.detach().numpy()
        w2 = agg.query_key.weight.detach().numpy()
        bf = agg.query_key.bias.detach().numpy()
        wf = agg.score.weight.detach().numpy()[0]
        for t in range(2):
            logits = np.array([wf @ np.tanh(w1 @ regions[t, i].numpy() + w2 @ query.numpy() + bf) for i in range(3)])
            alpha = softmax_np(logits)
            expected = sum(alpha[i] * regions[t, i].numpy() for i in range(3))
            assert np.allclose(beta[t].detach().numpy(), alpha, atol=1e-9)
            assert np.allclose(pooled[t].detach().numpy(), expected, atol=1e-9)

    def test_invalid_regions_excluded(self):
        torch.manual_seed(3)
        agg = FrameAggregator(5, 4, 3, hidden_dim=4).double()
        regions = torch.randn(1, 3, 5, dtype=torch.float64)
        valid = torch.tensor([[True, False, True]])
        _, beta = agg.attend(regions, torch.randn(4, dtype=torch.float64), valid)
        assert beta[0, 1] == 0.0

    def test_gru_output_dim(self):
        torch.manual_seed(4)
        agg = FrameAggregator(5, 4, 3, hidden_dim=6).double()
        h, _ = agg(
            torch.randn(4, 2, 5, dtype=torch.float64),
            torch.randn(4, 3, dtype=torch.float64),
            torch.randn(4, dtype=torch.float64),
            torch.ones(4, 2, dtype=torch.bool),
        )
        assert h.shape == (4, 12)


def _targets_for(clip_iou, spatial_iou, clip_frames, gt_clip):
    return Targets(
        clip_iou=clip_iou,
        best_step=0,
        best_width=0,
        delta=(0.0, 0.0),
        clip_frames=clip_frames,
        spatial_iou=spatial_iou,
        gt_clip=gt_clip,
    )


class TestLosses:
    def test_smooth_l1(self):
        x = torch.tensor([0.5, -2.0], dtype=torch.float64)
        assert smooth_l1(x).tolist() == pytest.approx([0.125, 1.5], abs=1e-12)

    def test_perfect_confident_match(self):
        n, p = 3, 2
        scores = torch.ones(n, p, dtype=torch.float64)
        offsets = torch.zeros(n, p, 2, dtype=torch.float64)
        spatial = torch.ones(n, 2, dtype=torch.float64)
        cands = candidate_clips(n, [2, 4])
        targets = _targets_for(np.ones((n, p)), np.ones((1, 2)), [2], (2, 2))
        # delta target for best candidate (t=1, w=2): (0-2, 2-2) = (-2, 0).
        losses = compute_losses(scores, offsets, spatial, targets, cands, weights=(1.0, 0.0, 1.0))
        assert float(losses.alignment) == pytest.approx(0.0, abs=1e-6)
        assert float(losses.spatial) == pytest.approx(0.0, abs=1e-6)

    def test_singleton_half_is_ln2(self):
        scores = torch.full((1, 1), 0.5, dtype=torch.float64)
        offsets = torch.zeros(1, 1, 2, dtype=torch.float64)
        spatial = torch.full((1, 1), 0.5, dtype=torch.float64)
        cands = candidate_clips(1, [2])
        targets = _targets_for(np.full((1, 1), 0.5), np.full((1, 1), 0.5), [1], (1, 1))
        losses = compute_losses(scores, offsets, spatial, targets, cands, weights=(1.0, 0.0, 0.0))
        assert float(losses.alignment) == pytest.approx(math.log(2.0), abs=1e-9)

    def test_regression_hand_case(self):
        n = 5
        cands = candidate_clips(n, [2])
        scores = torch.zeros(n, 1, dtype=torch.float64)
        scores[2, 0] = 1.0  # best candidate: t=3, (2, 4)
        offsets = torch.zeros(n, 1, 2, dtype=torch.float64)
        gs, ge = 2, 4  # so delta targets are (0, 0)
        offsets[2, 0, 0] = 0.5
        offsets[2, 0, 1] = 2.0
        targets = _targets_for(np.zeros((n, 1)), np.ones((3, 1)), [2, 3, 4], (gs, ge))
        losses = compute_losses(scores, offsets, torch.full((n, 1), 0.5, dtype=torch.float64),
                                targets, cands, weights=(0.0, 1.0, 0.0))
        assert float(losses.regression) == pytest.approx(1.625, abs=1e-9)

    def test_spatial_ignores_frames_outside_clip(self):
        n, k = 6, 2
        cands = candidate_clips(n, [2])
        scores = torch.full((n, 1), 0.5, dtype=torch.float64)
        offsets = torch.zeros(n, 1, 2, dtype=torch.float64)
        spatial_a = torch.full((n, k), 0.5, dtype=torch.float64)
        spatial_b = spatial_a.clone()
        spatial_b[0] = 0.99  # outside the clip
        spatial_b[5] = 0.01
        targets = _targets_for(np.zeros((n, 1)), np.full((3, k), 0.5), [2, 3, 4], (2, 4))
        la = compute_losses(scores, offsets, spatial_a, targets, cands)
        lb = compute_losses(scores, offsets, spatial_b, targets, cands)
        assert float(la.spatial) == pytest.approx(float(lb.spatial), abs=1e-12)

    def test_total_is_weighted_sum(self):
        n = 4
        cands = candidate_clips(n, [2])
        torch.manual_seed(0)
        scores = torch.rand(n, 1, dtype=torch.float64)
        offsets = torch.randn(n, 1, 2, dtype=torch.float64)
        spatial = torch.rand(n, 2, dtype=torch.float64)
        targets = _targets_for(np.random.default_rng(0).uniform(size=(n, 1)),
                               np.full((2, 2), 0.3), [2, 3], (2, 3))
        weights = (1.0, 0.001, 1.0)
        losses = compute_losses(scores, offsets, spatial, targets, cands, weights)
        expected = (
            weights[0] * float(losses.alignment)
            + weights[1] * float(losses.regression)
            + weights[2] * float(losses.spatial)
        )
        assert float(losses.total) == pytest.approx(expected, abs=1e-12)
        assert float(losses.alignment) >= 0 and float(losses.regression) >= 0 and float(losses.spatial) >= 0

    def test_alignment_minimized_at_target(self):
        # Per-element: -[(1-c*)log(1-c) + c*·log c] over a grid of c.
        target = 0.3
        grid = np.linspace(0.01, 0.99, 99)
        values = [-( (1 - target) * math.log(1 - c) + target * math.log(c)) for c in grid]
        assert grid[int(np.argmin(values))] == pytest.approx(target, abs=1e-2)

    def test_default_lambdas(self):
        from tubeground.config import RunConfig

        run = RunConfig()
        assert run.loss_weights == (1.0, 0.001, 1.0)
