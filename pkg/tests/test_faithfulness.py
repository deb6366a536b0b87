import numpy as np
import pytest

from salbench.faithfulness import (
    FaithfulnessConfig,
    faithfulness_correlation,
    faithfulness_estimate,
    monotonicity_arya_ratio,
    monotonicity_nguyen,
    pixel_flipping_curve,
    selectivity_curve,
)
from salbench.models import PlantedEvidenceModel, make_planted_model
from salbench.perturb import BaselineSpec
from salbench.sentinel import is_undefined
from salbench.tensors import DimensionError

from oracles import pearson_bruteforce, replay_pixel_flipping, spearman_bruteforce


def planted_setup(seed=0, shape=(1, 4, 4), weight_scale=0.4):
    """Planted model plus a zero-background image lighting up its region."""
    model = make_planted_model(shape, seed=seed, weight_scale=weight_scale)
    image = np.zeros(shape)
    rng = np.random.default_rng(seed + 100)
    _, h, w = shape
    vals = rng.uniform(0.3, 1.0, size=model.region.size)
    image[:, model.region // w, model.region % w] = vals
    return model, image, model.ground_truth_map(image)


class ConstantModel:
    input_shape = (1, 4, 4)
    num_classes = 2

    def predict(self, image):
        return np.array([0.4, 0.6])


BLACK = FaithfulnessConfig(baseline=BaselineSpec("black"), steps=16, seed=0)


class TestFaithfulnessCorrelation:
    def test_ground_truth_near_one(self):
        model, image, gmap = planted_setup()
        cfg = FaithfulnessConfig(
            baseline=BaselineSpec("black"), subset_size=3, runs=100, seed=0
        )
        assert faithfulness_correlation(model, image, gmap, cfg) >= 0.99

    def test_negated_map_near_minus_one(self):
        model, image, gmap = planted_setup()
        cfg = FaithfulnessConfig(
            baseline=BaselineSpec("black"), subset_size=3, runs=100, seed=0
        )
        assert faithfulness_correlation(model, image, -gmap, cfg) <= -0.99

    def test_constant_model_sentinel(self):
        cfg = FaithfulnessConfig(subset_size=2, runs=10, seed=0)
        value = faithfulness_correlation(
            ConstantModel(), np.ones((1, 4, 4)), np.ones((4, 4)), cfg
        )
        assert is_undefined(value)

    def test_run_count_validation(self):
        with pytest.raises(ValueError):
            faithfulness_correlation(
                ConstantModel(), np.ones((1, 4, 4)), np.ones((4, 4)),
                FaithfulnessConfig(runs=1),
            )

    def test_matches_bruteforce_series(self):
        # replay the exact subset draws and recompute Pearson independently
        model, image, gmap = planted_setup(seed=2)
        cfg = FaithfulnessConfig(
            baseline=BaselineSpec("black"), subset_size=4, runs=25, seed=5
        )
        result = faithfulness_correlation(model, image, gmap, cfg)
        rng = np.random.default_rng(cfg.seed)
        target = int(np.argmax(model.predict(image)))
        p0 = model.predict(image)[target]
        drops, sums = [], []
        for _ in range(cfg.runs):
            idx = rng.choice(16, size=4, replace=False)
            x = image.copy()
            x.reshape(1, 16)[:, idx] = 0.0
            drops.append(p0 - model.predict(x)[target])
            sums.append(gmap.ravel()[idx].sum())
        assert result == pytest.approx(pearson_bruteforce(drops, sums), abs=1e-10)


class TestFaithfulnessEstimate:
    def test_ground_truth_near_one(self):
        model, image, gmap = planted_setup()
        assert faithfulness_estimate(model, image, gmap, BLACK) >= 0.99

    def test_constant_map_sentinel(self):
        model, image, _ = planted_setup()
        assert is_undefined(
            faithfulness_estimate(model, image, np.ones((4, 4)), BLACK)
        )

    def test_random_map_null_mean(self):
        model, image, _ = planted_setup(weight_scale=0.4)
        values = []
        for seed in range(100):
            rmap = np.random.default_rng(seed).random((4, 4))
            cfg = FaithfulnessConfig(
                baseline=BaselineSpec("black"), steps=16, seed=seed
            )
            v = faithfulness_estimate(model, image, rmap, cfg)
            if not is_undefined(v):
                values.append(v)
        assert abs(np.mean(values)) < 0.1


class TestMonotonicityArya:
    def test_ground_truth_perfect(self):
        model, image, gmap = planted_setup()
        assert monotonicity_arya_ratio(model, image, gmap, BLACK) == 1.0

    def test_input_ignoring_model_all_ties(self):
        value = monotonicity_arya_ratio(
            ConstantModel(), np.ones((1, 4, 4)), np.arange(16.0).reshape(4, 4), BLACK
        )
        assert value == 1.0

    def test_reversed_map_matches_replay(self):
        model, image, gmap = planted_setup(seed=4)
        reversed_map = gmap.max() - gmap  # inverts the insertion order
        result = monotonicity_arya_ratio(model, image, reversed_map, BLACK)
        # independent replay of the same insertion schedule
        from salbench.tensors import descending_order

        ascending = descending_order(reversed_map)[::-1]
        current = np.zeros_like(image)
        prev = model.predict(current)[1]
        good = 0
        for idx in ascending:
            current.reshape(1, 16)[:, idx] = image.reshape(1, 16)[:, idx]
            p = model.predict(current)[1]
            good += p >= prev
            prev = p
        assert result == good / 16


class TestMonotonicityNguyen:
    def test_ground_truth_near_one(self):
        model, image, gmap = planted_setup()
        assert monotonicity_nguyen(model, image, gmap, BLACK) >= 0.99

    def test_constant_map_sentinel(self):
        model, image, _ = planted_setup()
        assert is_undefined(
            monotonicity_nguyen(model, image, np.full((4, 4), 2.0), BLACK)
        )

    def test_three_feature_toy(self):
        # drops [0.3, 0.2, 0.1] against attributions [3, 2, 1]
        assert spearman_bruteforce([3, 2, 1], [0.3, 0.2, 0.1]) == pytest.approx(1.0)

        class ToyModel:
            # three live features in the top row of a 2x3 plane
            input_shape = (1, 2, 3)
            num_classes = 2
            table = {0: 0.3, 1: 0.2, 2: 0.1}

            def predict(self, image):
                drop = sum(
                    self.table[i] for i in range(3) if image[0, 0, i] == 0.0
                )
                p1 = 0.9 - drop
                return np.array([1 - p1, p1])

        image = np.ones((1, 2, 3))
        smap = np.array([[3.0, 2.0, 1.0], [0.0, 0.0, 0.0]])
        cfg = FaithfulnessConfig(baseline=BaselineSpec("black"), steps=6)
        assert monotonicity_nguyen(ToyModel(), image, smap, cfg) == pytest.approx(1.0)


class TestPixelFlipping:
    def test_step_zero_is_unperturbed(self):
        model, image, gmap = planted_setup()
        values, grid = pixel_flipping_curve(model, image, gmap, BLACK)
        assert values[0] == model.predict(image)[1]
        assert grid[0] == 0.0 and grid[-1] == 1.0
        assert len(values) == 17

    def test_full_removal_endpoint(self):
        model, image, gmap = planted_setup()
        values, _ = pixel_flipping_curve(model, image, gmap, BLACK)
        assert values[-1] == model.predict(np.zeros_like(image))[1]

    def test_non_increasing_for_ground_truth(self):
        model, image, gmap = planted_setup()
        values, _ = pixel_flipping_curve(model, image, gmap, BLACK)
        assert np.all(np.diff(values) <= 1e-12)

    def test_matches_replay_oracle(self):
        model, image, gmap = planted_setup(seed=3)
        values, _ = pixel_flipping_curve(model, image, gmap, BLACK)
        expected = replay_pixel_flipping(model, image, gmap, 0.0)
        np.testing.assert_allclose(values, expected, atol=1e-10)


class TestSelectivity:
    def test_single_patch_two_points(self):
        model, image, gmap = planted_setup()
        cfg = FaithfulnessConfig(baseline=BaselineSpec("black"), patch_size=4)
        values, grid = selectivity_curve(model, image, gmap, cfg)
        assert len(values) == 2
        assert values[0] == model.predict(image)[1]
        assert values[1] == model.predict(np.zeros_like(image))[1]

    def test_patch_one_equals_pixel_flipping(self):
        model, image, gmap = planted_setup()
        pf_cfg = FaithfulnessConfig(baseline=BaselineSpec("black"), steps=16)
        sel_cfg = FaithfulnessConfig(baseline=BaselineSpec("black"), patch_size=1)
        pf, _ = pixel_flipping_curve(model, image, gmap, pf_cfg)
        sel, _ = selectivity_curve(model, image, gmap, sel_cfg)
        np.testing.assert_allclose(pf, sel, atol=1e-12)

    def test_decisive_patch_first(self):
        region = np.array([0, 1, 4, 5])  # top-left 2x2 patch of a 4x4 plane
        model = PlantedEvidenceModel(
            input_shape=(1, 4, 4), region=region, weights=np.full(4, 2.0)
        )
        image = np.zeros((1, 4, 4))
        image.reshape(1, 16)[:, region] = 1.0
        gmap = model.ground_truth_map(image)
        cfg = FaithfulnessConfig(baseline=BaselineSpec("black"), patch_size=2)
        values, _ = selectivity_curve(model, image, gmap, cfg)
        no_evidence = model.predict(np.zeros((1, 4, 4)))[1]
        assert values[1] == pytest.approx(no_evidence, abs=1e-12)

    def test_non_divisible_patch(self):
        model, image, gmap = planted_setup()
        cfg = FaithfulnessConfig(patch_size=3)
        with pytest.raises(DimensionError):
            selectivity_curve(model, image, gmap, cfg)


class TestEngineSanity:
    def test_self_baseline_constant_curves(self):
        # black baseline on an all-zero image replaces features with their
        # own values, so every drop is zero and the curve is flat
        model, _, _ = planted_setup()
        zero_image = np.zeros((1, 4, 4))
        values, _ = pixel_flipping_curve(
            model, zero_image, np.arange(16.0).reshape(4, 4),
            FaithfulnessConfig(baseline=BaselineSpec("black"), steps=16),
        )
        np.testing.assert_allclose(values, values[0])

    def test_bruteforce_equivalence_all_metrics(self):
        """Every metric matches a straightforward replay on <= 16 features."""
        model, image, gmap = planted_setup(seed=8)
        cfg = FaithfulnessConfig(baseline=BaselineSpec("black"), steps=16, seed=1)

        from salbench.tensors import descending_order

        order = descending_order(gmap)
        target = int(np.argmax(model.predict(image)))

        def prob(x):
            return model.predict(x)[target]

        # faithfulness estimate series
        current = image.copy()
        drops, sums = [], []
        prev = prob(current)
        for idx in order:
            current.reshape(1, 16)[:, idx] = 0.0
            p = prob(current)
            drops.append(prev - p)
            sums.append(gmap.ravel()[idx])
            prev = p
        expected_fe = pearson_bruteforce(drops, sums)
        assert faithfulness_estimate(model, image, gmap, cfg) == pytest.approx(
            expected_fe, abs=1e-10
        )

        # monotonicity nguyen series
        diffs = []
        p0 = prob(image)
        for idx in order:
            x = image.copy()
            x.reshape(1, 16)[:, idx] = 0.0
            diffs.append(abs(p0 - prob(x)))
        expected_mn = spearman_bruteforce(sums, diffs)
        assert monotonicity_nguyen(model, image, gmap, cfg) == pytest.approx(
            expected_mn, abs=1e-10
        )
