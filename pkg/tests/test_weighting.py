"""Weighting schemes: hand oracles, simplex and limit properties."""

import math
import warnings

import numpy as np
import pytest

from camweight import (
    CameraRig,
    DegenerateRigWarning,
    DegenerateWeightsError,
    Pose,
    SchemeConfig,
    ShapeMismatchError,
    check_weights,
    compute_weights,
    error_weighting,
    gaussian_weighting,
    init_caw,
    look_at,
    norm_weighting,
    normalize,
    uniform_weights,
    weighted_aggregate,
)


def pose_at(x, y, z, target=(0, 0, 0)):
    return look_at((x, y, z), target)


def rig_on_sphere(rng, n_sources, radius=4.0):
    """Random rig of look-at poses on a sphere, avoiding the up-axis poles."""
    poses = []
    while len(poses) < n_sources + 1:
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        if abs(v[1]) > 0.99:
            continue
        poses.append(look_at(radius * v, (0, 0, 0)))
    return CameraRig(poses[0], tuple(poses[1:]))


ALL_SCHEME_CONFIGS = (
    SchemeConfig("mean"),
    SchemeConfig("l1"),
    SchemeConfig("fro"),
    SchemeConfig("gauss", beta=0.3),
    SchemeConfig("gauss", beta=1.0),
    SchemeConfig("err", alpha=0.0),
    SchemeConfig("err", alpha=0.5),
    SchemeConfig("err", alpha=1.0),
    SchemeConfig("caw"),
)


class TestNormalize:
    def test_basic(self):
        np.testing.assert_allclose(normalize([1, 1, 2]), [0.25, 0.25, 0.5])

    def test_single_entry(self):
        np.testing.assert_allclose(normalize([5.0]), [1.0])

    def test_equal_entries(self):
        np.testing.assert_allclose(normalize([0.3] * 4), [0.25] * 4)

    def test_all_zero_raises(self):
        with pytest.raises(DegenerateWeightsError):
            normalize([0.0, 0.0])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            normalize([1.0, -0.1])


class TestUniformWeights:
    @pytest.mark.parametrize("s", [1, 4, 5])
    def test_values(self, s):
        w = uniform_weights(s)
        np.testing.assert_allclose(w, np.full(s, 1.0 / s))

    def test_invalid_count(self):
        with pytest.raises(ValueError):
            uniform_weights(0)


class TestNormWeighting:
    def test_coincident_source_dominates(self):
        target = pose_at(0, 0, 4)
        rig = CameraRig(target, (target, pose_at(4, 0, 0), pose_at(0, 4.0, 1)))
        for kind in ("l1", "fro"):
            w = norm_weighting(rig, kind)
            assert w[0] > 0.9999
            assert np.argmax(w) == 0

    def test_identical_sources_uniform(self):
        src = pose_at(4, 0, 0)
        rig = CameraRig(pose_at(0, 0, 4), (src, src, src))
        for kind in ("l1", "fro"):
            np.testing.assert_allclose(norm_weighting(rig, kind), [1 / 3] * 3, atol=1e-12)

    def test_hand_oracle_l1_one_and_three(self):
        # independent scalar evaluation of the inverse-norm formula for
        # sources at L1 distances 1 and 3 from the target
        eps = 1e-6
        w1p, w2p = 1.0 / (eps + 1.0), 1.0 / (eps + 3.0)
        expected = np.array([w1p, w2p]) / (w1p + w2p)
        np.testing.assert_allclose(expected, [0.75, 0.25], atol=2e-7)

        target = Pose(np.eye(4))
        m1 = np.eye(4)
        m1[0, 3] = 1.0  # L1 distance 1
        m2 = np.eye(4)
        m2[0, 3] = 1.0
        m2[1, 3] = 2.0  # L1 distance 3
        rig = CameraRig(target, (Pose(m1), Pose(m2)))
        np.testing.assert_allclose(norm_weighting(rig, "l1"), expected, atol=1e-12)


class TestGaussianWeighting:
    def test_hand_oracle_distances_zero_one(self):
        # exp(0) and exp(-1), normalized: an independent scalar evaluation
        w1p, w2p = math.exp(0.0), math.exp(-1.0)
        expected = np.array([w1p, w2p]) / (w1p + w2p)
        np.testing.assert_allclose(expected, [0.731059, 0.268941], atol=1e-6)

        target = Pose(np.eye(4))
        m = np.eye(4)
        m[0, 3] = 1.0
        rig = CameraRig(target, (target, Pose(m)))
        np.testing.assert_allclose(gaussian_weighting(rig, 1.0), expected, atol=1e-12)

    def test_beta_to_zero_recovers_uniform(self):
        rig = CameraRig(pose_at(0, 0, 4), (pose_at(4, 0, 0), pose_at(0, 1, -4), pose_at(2, 2, 2)))
        w = gaussian_weighting(rig, 1e-12)
        np.testing.assert_allclose(w, [1 / 3] * 3, atol=1e-9)

    def test_large_beta_is_nearly_one_hot(self):
        rig = CameraRig(pose_at(0, 0, 4), (pose_at(0, 1, 4), pose_at(4, 0, 0), pose_at(0, 0, -4)))
        w = gaussian_weighting(rig, 1e4)
        assert np.argmax(w) == 0
        assert w[0] > 0.999

    def test_extreme_beta_underflow_falls_back_to_uniform(self):
        rig = CameraRig(pose_at(0, 0, 4), (pose_at(4, 0, 0), pose_at(0, 0, -4)))
        with pytest.warns(DegenerateRigWarning):
            w = gaussian_weighting(rig, 1e308)
        np.testing.assert_allclose(w, [0.5, 0.5])


class TestErrorWeighting:
    def test_hand_oracle_alpha_one(self):
        # angles 0 and pi/2: w' = (1/eps, 1/(eps + 0.5))
        eps = 1e-6
        w1p, w2p = 1.0 / eps, 1.0 / (eps + 0.5)
        expected = np.array([w1p, w2p]) / (w1p + w2p)
        np.testing.assert_allclose(expected, [0.999998, 0.000002], atol=1e-6)

        target = pose_at(0, 0, 4)
        rig = CameraRig(target, (pose_at(0, 0, 5), pose_at(4, 0, 0)))
        np.testing.assert_allclose(error_weighting(rig, 1.0), expected, atol=1e-9)

    def test_equal_angles_uniform(self):
        target = pose_at(0, 0, 4)
        rig = CameraRig(target, (pose_at(4, 0, 0), pose_at(-4, 0, 0), pose_at(0, 4.0, 0.01)))
        w = error_weighting(rig, 1.0)
        angles = [math.pi / 2, math.pi / 2]
        assert abs(w[0] - w[1]) < 1e-12  # the two exactly-90-degree sources tie

    def test_hand_oracle_alpha_zero(self):
        # distances 1 and 2, normalizer 2: w' = (1/(eps+0.5), 1/(eps+1))
        eps = 1e-6
        w1p, w2p = 1.0 / (eps + 0.5), 1.0 / (eps + 1.0)
        expected = np.array([w1p, w2p]) / (w1p + w2p)
        np.testing.assert_allclose(expected, [0.6667, 0.3333], atol=1e-4)

        target = Pose(np.eye(4))
        m1 = np.eye(4)
        m1[0, 3] = 1.0
        m2 = np.eye(4)
        m2[0, 3] = 2.0
        rig = CameraRig(target, (Pose(m1), Pose(m2)))
        np.testing.assert_allclose(error_weighting(rig, 0.0), expected, atol=1e-12)

    def test_single_source_gets_everything(self):
        rig = CameraRig(pose_at(0, 0, 4), (pose_at(4, 0, 0),))
        np.testing.assert_allclose(error_weighting(rig, 0.5), [1.0])

    def test_degenerate_rig_warns_and_uses_uniform(self):
        target = pose_at(0, 0, 4)
        rotated = look_at((0, 0, 4), (1, 0, 0))  # same center, different axis
        rig = CameraRig(target, (target, rotated))
        with pytest.warns(DegenerateRigWarning):
            w = error_weighting(rig, 0.5)
        np.testing.assert_allclose(w, [0.5, 0.5])

    def test_alpha_one_ignores_centers(self):
        target = pose_at(0, 0, 4)
        rig = CameraRig(target, (target, look_at((0, 0, 4), (1, 0, 0))))
        w = error_weighting(rig, 1.0)  # no distance term, no degeneracy
        assert w[0] > 0.99


class TestComputeWeights:
    def test_mean_dispatch(self):
        rig = CameraRig(pose_at(0, 0, 4), (pose_at(4, 0, 0),) * 3)
        np.testing.assert_allclose(compute_weights(rig, SchemeConfig("mean")), [1 / 3] * 3)

    def test_err_argmax_matches_brute_force(self):
        rng = np.random.default_rng(5)
        rig = rig_on_sphere(rng, 4)
        w = compute_weights(rig, SchemeConfig("err", alpha=1.0))
        from camweight import angle_between

        angles = [angle_between(s, rig.target) for s in rig.sources]
        assert np.argmax(w) == np.argmin(angles)

    def test_untrained_caw_with_zero_params_is_uniform(self):
        module = init_caw(seed=0)
        for w in module.embedding.mlp.weights:
            w[:] = 0.0
        rig = CameraRig(pose_at(0, 0, 4), (pose_at(4, 0, 0), pose_at(0, 4, 0.5), pose_at(0, 0, -4)))
        np.testing.assert_allclose(compute_weights(rig, SchemeConfig("caw"), module), [1 / 3] * 3)

    def test_caw_requires_module(self):
        rig = CameraRig(pose_at(0, 0, 4), (pose_at(4, 0, 0),))
        with pytest.raises(ValueError, match="caw"):
            compute_weights(rig, SchemeConfig("caw"))

    def test_module_rejected_for_other_schemes(self):
        rig = CameraRig(pose_at(0, 0, 4), (pose_at(4, 0, 0),))
        with pytest.raises(ValueError):
            compute_weights(rig, SchemeConfig("mean"), init_caw())


class TestSchemeConfig:
    def test_gauss_requires_beta(self):
        with pytest.raises(ValueError):
            SchemeConfig("gauss")

    def test_err_requires_alpha_in_range(self):
        with pytest.raises(ValueError):
            SchemeConfig("err", alpha=1.5)

    def test_foreign_parameters_rejected(self):
        with pytest.raises(ValueError):
            SchemeConfig("mean", beta=1.0)
        with pytest.raises(ValueError):
            SchemeConfig("l1", alpha=0.5)

    def test_param_labels(self):
        assert SchemeConfig("gauss", beta=0.3).param_label() == "beta=0.3"
        assert SchemeConfig("err", alpha=1.0).param_label() == "alpha=1"
        assert SchemeConfig("mean").param_label() == ""


class TestWeightedAggregate:
    def test_one_hot_selects_column(self):
        lat = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        np.testing.assert_array_equal(weighted_aggregate(lat, [0, 1, 0]), [2.0, 5.0])

    def test_uniform_is_mean(self):
        lat = np.array([[1.0, 3.0], [1.0, 3.0]])
        np.testing.assert_allclose(weighted_aggregate(lat, [0.5, 0.5]), [2.0, 2.0])

    def test_hand_dot_product(self):
        lat = np.array([[4.0, 0.0], [0.0, 4.0]])
        np.testing.assert_allclose(weighted_aggregate(lat, [0.25, 0.75]), [1.0, 3.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            weighted_aggregate(np.ones((3, 2)), [1.0, 0.0, 0.0])

    def test_uniform_matches_arithmetic_mean(self):
        rng = np.random.default_rng(3)
        for s in (2, 3, 5, 7):
            lat = rng.normal(size=(6, s))
            np.testing.assert_allclose(
                weighted_aggregate(lat, uniform_weights(s)), lat.mean(axis=1), atol=1e-12
            )


class TestSchemeProperties:
    """Simplex, dominance, permutation and mean-recovery invariants."""

    def test_simplex_for_random_rigs_all_schemes(self):
        rng = np.random.default_rng(123)
        caw = init_caw(seed=9)
        for trial in range(200):
            rig = rig_on_sphere(rng, int(rng.integers(1, 9)))
            for cfg in ALL_SCHEME_CONFIGS:
                w = compute_weights(rig, cfg, caw if cfg.scheme == "caw" else None)
                assert check_weights(w, tol=1e-9), f"{cfg.scheme} broke the simplex"

    def test_coincident_view_dominance(self):
        rng = np.random.default_rng(77)
        for trial in range(20):
            rig = rig_on_sphere(rng, 4)
            sources = (rig.target,) + rig.sources[1:]
            spiked = CameraRig(rig.target, sources)
            for cfg in (
                SchemeConfig("l1"),
                SchemeConfig("fro"),
                SchemeConfig("err", alpha=0.0),
                SchemeConfig("err", alpha=0.5),
                SchemeConfig("err", alpha=1.0),
                SchemeConfig("gauss", beta=0.3),
                SchemeConfig("gauss", beta=1.0),
            ):
                w = compute_weights(spiked, cfg)
                assert np.argmax(w) == 0, f"{cfg.scheme} {cfg.param_label()} missed the coincident view"

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(11)
        caw = init_caw(seed=2)
        rig = rig_on_sphere(rng, 5)
        perm = rng.permutation(5)
        permuted = CameraRig(rig.target, tuple(rig.sources[i] for i in perm))
        for cfg in ALL_SCHEME_CONFIGS:
            module = caw if cfg.scheme == "caw" else None
            w = compute_weights(rig, cfg, module)
            wp = compute_weights(permuted, cfg, module)
            np.testing.assert_allclose(wp, w[perm], atol=1e-12)

    def test_mean_recovery_limits(self):
        rng = np.random.default_rng(21)
        rig = rig_on_sphere(rng, 6)
        uniform = uniform_weights(6)
        # gauss at beta -> 0
        np.testing.assert_allclose(gaussian_weighting(rig, 1e-12), uniform, atol=1e-6)
        # equal angles and distances: sources mirrored around the target axis
        target = pose_at(0, 0, 4)
        ring = CameraRig(target, (pose_at(4, 0, 0), pose_at(-4, 0, 0), pose_at(0, 0.01, -4)))
        w = error_weighting(ring, 1.0)
        assert abs(w[0] - w[1]) < 1e-12
        # equal norms: identical sources
        same = CameraRig(target, (pose_at(4, 0, 0),) * 4)
        np.testing.assert_allclose(norm_weighting(same, "l1"), uniform_weights(4), atol=1e-6)
        np.testing.assert_allclose(norm_weighting(same, "fro"), uniform_weights(4), atol=1e-6)
