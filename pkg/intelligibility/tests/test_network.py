"""
Tests for the branch network, attention, fusion, pooling, objective and
prediction.
"""
import unittest

import numpy as np
import torch

from intelligibility.exceptions import ValidationError
from intelligibility.models import AVERAGE_FUSION, FrameScores, FusionWeights, LossWeights, UtteranceScore
from intelligibility.network import (
    BinauralPredictor,
    BranchInputs,
    FusionLayer,
    SingleBranchPredictor,
    batch_objective,
    branch_forward,
    compute_loss,
    fuse_average,
    fuse_linear,
    global_average_pool,
    multiplicative_attention,
    predict,
)
from intelligibility.tests.fixtures import TINY_FEATURES, TINY_MODEL, TINY_SSL_DIM, extend_bundle, random_bundle


def tiny_predictor(seed, fusion_mode='linear', dtype=torch.float32):
    torch.manual_seed(seed)
    return BinauralPredictor(TINY_FEATURES, TINY_MODEL, TINY_SSL_DIM, fusion_mode).to(dtype)


def frames(values, branch='left', mask=None):
    return FrameScores(values, branch, mask)


class AttentionTests(unittest.TestCase):
    """Test multiplicative_attention"""

    def setUp(self):
        self.rng = np.random.default_rng(0)

    def test_single_frame_returns_input(self):
        """Should give C = H for one frame"""
        H = torch.from_numpy(self.rng.normal(size=(1, 4)))
        np.testing.assert_allclose(multiplicative_attention(H, torch.eye(4, dtype=torch.float64)), H)

    def test_zero_matrix_averages_valid_rows(self):
        """Should attend uniformly over valid frames when W_att = 0"""
        H = torch.from_numpy(self.rng.normal(size=(5, 3)))
        mask = torch.tensor([True, True, False, True, False])
        context = multiplicative_attention(H, torch.zeros(3, 3, dtype=torch.float64), mask)
        expected = H[mask].mean(dim=0)
        for row in context:
            np.testing.assert_allclose(row, expected, atol=1e-12)

    def test_rows_are_distributions_over_valid_frames(self):
        """Should give nonnegative rows summing to 1 with zero weight on masked frames"""
        for _ in range(20):
            F = int(self.rng.integers(2, 9))
            H = torch.from_numpy(self.rng.normal(size=(2, F, 4)))
            W = torch.from_numpy(self.rng.normal(size=(4, 4)))
            mask = torch.from_numpy(self.rng.random((2, F)) < 0.7)
            mask[:, 0] = True
            _, weights = multiplicative_attention(H, W, mask, return_weights=True)
            self.assertTrue(torch.all(weights >= 0))
            np.testing.assert_allclose(weights.sum(dim=-1), 1.0, atol=1e-6)
            self.assertTrue(torch.all(weights.masked_select(~mask.unsqueeze(-2).expand_as(weights)) == 0))

    def test_matches_direct_formula(self):
        """Should equal softmax(H W H^T / sqrt(d)) H"""
        H = self.rng.normal(size=(4, 3))
        W = self.rng.normal(size=(3, 3))
        scores = H @ W @ H.T / np.sqrt(3)
        weights = np.exp(scores - scores.max(axis=1, keepdims=True))
        weights /= weights.sum(axis=1, keepdims=True)
        context = multiplicative_attention(torch.from_numpy(H), torch.from_numpy(W))
        np.testing.assert_allclose(context.numpy(), weights @ H, atol=1e-12)

    def test_rejects_wrong_matrix_shape(self):
        """Should reject an attention matrix of the wrong size"""
        with self.assertRaises(ValueError):
            multiplicative_attention(torch.zeros(3, 4), torch.zeros(3, 3))


class FusionTests(unittest.TestCase):
    """Test fuse_linear, fuse_average and FusionLayer"""

    def test_average_example(self):
        """Should average [0.2, 0.4] and [0.6, 0.8] to [0.4, 0.6]"""
        fused = fuse_average(frames([0.2, 0.4]), frames([0.6, 0.8], 'right'))
        np.testing.assert_allclose(fused.scores, [0.4, 0.6])
        self.assertEqual(fused.branch, 'fused')

    def test_projection_and_constant(self):
        """Should pass the left input through and produce a constant bias"""
        left, right = frames([0.1, 0.9]), frames([0.3, 0.5], 'right')
        np.testing.assert_array_equal(fuse_linear(left, right, FusionWeights(1, 0, 0)).scores, left.scores)
        np.testing.assert_array_equal(fuse_linear(left, right, FusionWeights(0, 0, 0.7)).scores, [0.7, 0.7])

    def test_equal_inputs_are_fixed_points_of_average(self):
        """Should return equal inputs unchanged"""
        values = np.random.default_rng(1).random(7)
        np.testing.assert_array_equal(fuse_average(frames(values), frames(values, 'right')).scores, values)

    def test_average_equals_linear_half_weights(self):
        """Should match fuse_linear(0.5, 0.5, 0) bitwise on random pairs"""
        rng = np.random.default_rng(2)
        for _ in range(1000):
            n = int(rng.integers(1, 30))
            left = frames(rng.normal(size=n))
            right = frames(rng.normal(size=int(rng.integers(1, 30))), 'right')
            a = fuse_average(left, right)
            b = fuse_linear(left, right, FusionWeights(0.5, 0.5, 0.0))
            np.testing.assert_array_equal(a.scores, b.scores)
            np.testing.assert_array_equal(a.valid_mask(), b.valid_mask())

    def test_pads_and_masks_shorter_branch(self):
        """Should keep only frames valid in both branches"""
        fused = fuse_average(frames([0.2, 0.4, 0.6]), frames([0.6, 0.8], 'right'))
        self.assertEqual(len(fused), 3)
        np.testing.assert_array_equal(fused.valid_mask(), [True, True, False])
        self.assertAlmostEqual(global_average_pool(fused).value, 0.5)

    def test_rejects_two_empty_inputs(self):
        """Should refuse to fuse empty sequences"""
        with self.assertRaises(ValidationError):
            fuse_linear(frames([]), frames([], 'right'), AVERAGE_FUSION)

    def test_swapping_inputs_and_weights(self):
        """Should give identical output when inputs and weights are swapped"""
        rng = np.random.default_rng(3)
        left, right = frames(rng.random(6)), frames(rng.random(6), 'right')
        a = fuse_linear(left, right, FusionWeights(0.3, 0.9, 0.1))
        b = fuse_linear(frames(right.scores), frames(left.scores, 'right'), FusionWeights(0.9, 0.3, 0.1))
        np.testing.assert_array_equal(a.scores, b.scores)

    def test_fusion_layer_modes(self):
        """Should train linear weights and keep average weights fixed"""
        linear, average = FusionLayer('linear'), FusionLayer('average')
        self.assertEqual(len(list(linear.parameters())), 1)
        self.assertEqual(list(average.parameters()), [])
        self.assertEqual(list(average.state_dict()), [])
        self.assertEqual(average.fusion_weights(), AVERAGE_FUSION)
        left, right = torch.rand(2, 5), torch.rand(2, 5)
        torch.testing.assert_close(average(left, right), 0.5 * left + 0.5 * right)
        with self.assertRaises(ValidationError):
            FusionLayer('max')


class PoolingAndLossTests(unittest.TestCase):
    """Test global_average_pool, compute_loss and batch_objective"""

    def test_pool_examples(self):
        """Should average valid frames only"""
        self.assertAlmostEqual(global_average_pool(frames([0.2, 0.4, 0.6])).value, 0.4)
        self.assertAlmostEqual(global_average_pool(frames([0.3] * 4)).value, 0.3)
        self.assertAlmostEqual(global_average_pool(frames([0.2, 0.4, 9.9]), [True, True, False]).value, 0.3)

    def test_pool_rejects_no_valid_frames(self):
        """Should refuse to pool zero valid frames"""
        with self.assertRaises(ValidationError):
            global_average_pool(frames([0.2, 0.4]), [False, False])

    def test_hand_worked_loss(self):
        """Should give 0.04 + 0.01 + 0 + 0.05 = 0.10"""
        loss = compute_loss(
            0.8, 0.6,
            fused=frames([0.7, 0.9], 'fused'),
            left=frames([0.8, 0.8]),
            right=frames([0.5, 0.7], 'right'),
            lw=LossWeights(1.0, 1.0, 1.0),
        )
        self.assertAlmostEqual(loss, 0.10, delta=1e-12)

    def test_zero_weights_reduce_to_utterance_term(self):
        """Should give (I - P)^2 when every frame weight is zero"""
        loss = compute_loss(0.8, UtteranceScore(0.5), frames([0.1, 0.2], 'fused'), frames([0.3]),
                            frames([0.9], 'right'), LossWeights(0.0, 0.0, 0.0))
        self.assertAlmostEqual(loss, 0.09, delta=1e-12)

    def test_perfect_fit_is_zero(self):
        """Should be zero when every prediction equals the label"""
        loss = compute_loss(0.4, 0.4, frames([0.4] * 3, 'fused'), frames([0.4] * 3), frames([0.4] * 3, 'right'))
        self.assertEqual(loss, 0.0)

    def test_matches_direct_oracle(self):
        """Should agree with a term-by-term evaluation on random instances"""
        rng = np.random.default_rng(4)
        for _ in range(1000):
            n = int(rng.integers(1, 12))
            target, pooled = rng.random(), rng.random()
            m, l, r = rng.random(n), rng.random(n), rng.random(n)
            alphas = rng.random(3) * 2
            expected = (target - pooled) ** 2
            for alpha, seq in zip(alphas, (m, l, r)):
                expected += alpha / n * sum((target - s) ** 2 for s in seq)
            loss = compute_loss(target, pooled, frames(m, 'fused'), frames(l), frames(r, 'right'), LossWeights(*alphas))
            self.assertGreaterEqual(loss, 0.0)
            self.assertAlmostEqual(loss, expected, delta=1e-9)

    def test_masked_frames_are_ignored(self):
        """Should leave masked frames out of every frame term"""
        mask = [True, True, False]
        loss = compute_loss(0.8, 0.6, frames([0.7, 0.9, 5.0], 'fused'), frames([0.8, 0.8, 5.0]),
                            frames([0.5, 0.7, 5.0], 'right'), mask=mask)
        self.assertAlmostEqual(loss, 0.10, delta=1e-12)

    def test_batch_objective_is_mean_of_utterance_losses(self):
        """Should average the per-utterance objective over padded rows"""
        rng = np.random.default_rng(5)
        lengths = [4, 2, 3]
        scores = {b: torch.from_numpy(rng.random((3, 4))) for b in ('fused', 'left', 'right')}
        targets = torch.from_numpy(rng.random(3))
        pooled = torch.stack([scores['fused'][i, :n].mean() for i, n in enumerate(lengths)])
        lw = LossWeights(0.5, 1.0, 2.0)
        value = batch_objective(targets, pooled, [
            (lw.alpha_m, scores['fused'], lengths),
            (lw.alpha_l, scores['left'], lengths),
            (lw.alpha_r, scores['right'], lengths),
        ])
        per_item = [
            compute_loss(
                float(targets[i]), float(pooled[i]),
                frames(scores['fused'][i, :n].numpy(), 'fused'),
                frames(scores['left'][i, :n].numpy()),
                frames(scores['right'][i, :n].numpy(), 'right'),
                lw,
            )
            for i, n in enumerate(lengths)
        ]
        self.assertAlmostEqual(float(value), float(np.mean(per_item)), delta=1e-12)


class BranchNetworkTests(unittest.TestCase):
    """Test branch_forward and masking behavior"""

    def setUp(self):
        self.rng = np.random.default_rng(6)

    def test_single_frame_bundle(self):
        """Should score a one-frame bundle"""
        model = tiny_predictor(0)
        scores = branch_forward(random_bundle(self.rng, 1), model.left)
        self.assertEqual(len(scores), 1)
        self.assertTrue(np.all(np.isfinite(scores.scores)))

    def test_repeated_calls_identical(self):
        """Should be bitwise deterministic"""
        model = tiny_predictor(1)
        bundle = random_bundle(self.rng, 5)
        a = branch_forward(bundle, model.left)
        b = branch_forward(bundle, model.left)
        np.testing.assert_array_equal(a.scores, b.scores)

    def test_rejects_shape_mismatch(self):
        """Should reject bundles whose dimensions do not fit the network"""
        model = tiny_predictor(2)
        with self.assertRaises(ValidationError):
            branch_forward(random_bundle(self.rng, 3, ssl_dim=TINY_SSL_DIM + 1), model.left)

    def test_rejects_bad_mask(self):
        """Should reject wrong-length and all-false masks"""
        model = tiny_predictor(3)
        bundle = random_bundle(self.rng, 3)
        with self.assertRaises(ValidationError):
            branch_forward(bundle, model.left, mask=[True, True])
        with self.assertRaises(ValidationError):
            branch_forward(bundle, model.left, mask=[False, False, False])

    def test_masked_tail_has_no_influence(self):
        """Should leave valid scores and the pooled score unchanged by masked frames"""
        for seed in range(100):
            model = tiny_predictor(seed)
            num_frames = int(self.rng.integers(1, 6))
            extra = int(self.rng.integers(1, 51))
            bundle = random_bundle(self.rng, num_frames)
            longer = extend_bundle(bundle, extra, self.rng)
            mask = np.arange(num_frames + extra) < num_frames

            short = branch_forward(bundle, model.left)
            padded = branch_forward(longer, model.left, mask=mask)
            np.testing.assert_array_equal(padded.scores[:num_frames], short.scores)
            self.assertEqual(global_average_pool(padded).value, global_average_pool(short).value)

            inputs = {b: BranchInputs.from_bundles([bundle]) for b in ('left', 'right')}
            padded_inputs = {b: BranchInputs.from_bundles([bundle], num_frames + extra) for b in ('left', 'right')}
            with torch.no_grad():
                plain = model(inputs)
                wide = model(padded_inputs)
            torch.testing.assert_close(wide['fused'][:, :num_frames], plain['fused'], rtol=0, atol=0)
            torch.testing.assert_close(wide['pooled'], plain['pooled'], rtol=0, atol=0)

    def test_padding_mismatch_between_ears(self):
        """Should require both ears padded to the same frame count"""
        model = tiny_predictor(4)
        bundle = random_bundle(self.rng, 3)
        inputs = {'left': BranchInputs.from_bundles([bundle]), 'right': BranchInputs.from_bundles([bundle], 5)}
        with self.assertRaises(ValidationError):
            model(inputs)

    def test_batch_mask(self):
        """Should mark padded frames invalid"""
        inputs = BranchInputs.from_bundles([random_bundle(self.rng, 10), random_bundle(self.rng, 7)])
        mask = inputs.mask()
        self.assertEqual(inputs.num_frames, 10)
        self.assertEqual(int((~mask[1]).sum()), 3)
        self.assertTrue(bool(mask[0].all()))


class GradientTests(unittest.TestCase):
    """Test end-to-end objective gradients against central differences"""

    def check_instance(self, seed):
        rng = np.random.default_rng(seed)
        model = tiny_predictor(seed, dtype=torch.float64)
        lengths = rng.integers(1, 6, size=2)
        bundles = [random_bundle(rng, int(n)) for n in lengths]
        right = [random_bundle(rng, int(n)) for n in lengths]
        inputs = {
            'left': BranchInputs.from_bundles(bundles, dtype=torch.float64),
            'right': BranchInputs.from_bundles(right, dtype=torch.float64),
        }
        targets = torch.from_numpy(rng.random(2))
        lw = LossWeights(*rng.uniform(0.2, 1.5, 3))

        def objective():
            return model.objective(model(inputs), targets, lw)

        model.zero_grad()
        objective().backward()

        named = dict(model.named_parameters())
        coords = []
        for name, param in named.items():
            if 'filter_bank' in name or 'attention' in name:
                coords += [(name, k) for k in range(param.numel())]
        sampled = rng.choice(sum(p.numel() for p in named.values()), size=40, replace=False)
        flat = [(name, k) for name, p in named.items() for k in range(p.numel())]
        coords += [flat[i] for i in sampled]

        for name, k in coords:
            param = named[name]
            step = 1e-3 if 'filter_bank' in name else 1e-6
            flat_param = param.data.view(-1)
            original = flat_param[k].item()
            with torch.no_grad():
                flat_param[k] = original + step
                plus = objective().item()
                flat_param[k] = original - step
                minus = objective().item()
                flat_param[k] = original
            numeric = (plus - minus) / (2 * step)
            analytic = param.grad.view(-1)[k].item()
            self.assertLessEqual(
                abs(analytic - numeric), 1e-4 * max(abs(analytic), abs(numeric)) + 1e-8,
                f"seed {seed}: {name}[{k}] analytic {analytic} numeric {numeric}",
            )

    def test_gradients_match_finite_differences(self):
        """Should match central differences on random tiny instances"""
        for seed in range(20):
            self.check_instance(seed)


class PredictTests(unittest.TestCase):
    """Test predict on binaural and single-branch models"""

    def setUp(self):
        self.rng = np.random.default_rng(7)
        self.left = random_bundle(self.rng, 4)
        self.right = random_bundle(self.rng, 4)

    def test_output_in_percent_range(self):
        """Should clamp the interface value to [0, 100]"""
        model = tiny_predictor(0)
        for bias in (-50.0, 0.0, 50.0):
            with torch.no_grad():
                model.fusion.weights[2] = bias
            percent = predict(model, self.left, self.right).percent
            self.assertGreaterEqual(percent, 0.0)
            self.assertLessEqual(percent, 100.0)
        self.assertEqual(percent, 100.0)

    def test_deterministic(self):
        """Should give identical outputs for identical inputs"""
        model = tiny_predictor(1)
        a = predict(model, self.left, self.right)
        b = predict(model, self.left, self.right)
        self.assertEqual(a.score, b.score)
        np.testing.assert_array_equal(a.frames['fused'].scores, b.frames['fused'].scores)

    def test_swapping_ears_and_fusion_weights(self):
        """Should be symmetric under swapping inputs and fusion weights"""
        model = tiny_predictor(2)
        model.right.load_state_dict(model.left.state_dict())
        with torch.no_grad():
            model.fusion.weights.copy_(torch.tensor([0.3, 0.8, 0.05]))
        a = predict(model, self.left, self.right)
        with torch.no_grad():
            model.fusion.weights.copy_(torch.tensor([0.8, 0.3, 0.05]))
        b = predict(model, self.right, self.left)
        np.testing.assert_array_equal(a.frames['fused'].scores, b.frames['fused'].scores)

    def test_average_model_pools_mean_of_branches(self):
        """Should pool the mean of the two branch scores in average mode"""
        model = tiny_predictor(3, fusion_mode='average')
        result = predict(model, self.left, self.right)
        expected = np.mean((result.frames['left'].scores + result.frames['right'].scores) / 2)
        self.assertAlmostEqual(result.score.value, expected, places=12)

    def test_single_branch_needs_only_its_ear(self):
        """Should score with the own-ear bundle and refuse without it"""
        torch.manual_seed(0)
        model = SingleBranchPredictor(TINY_FEATURES, TINY_MODEL, TINY_SSL_DIM, ear='right')
        self.assertEqual(model.kind, 'single-right')
        self.assertIsNone(model.fusion_mode)
        result = predict(model, bundle_right=self.right)
        self.assertEqual(set(result.frames), {'right'})
        with self.assertRaises(ValidationError):
            predict(model, bundle_left=self.left)

    def test_binaural_needs_both_ears(self):
        """Should refuse a binaural prediction without the right bundle"""
        with self.assertRaises(ValidationError):
            predict(tiny_predictor(4), self.left)


if __name__ == '__main__':
    unittest.main()
