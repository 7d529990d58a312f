"""Tests for the MVAR model container, sampling, simulation and fit."""

from __future__ import annotations

import numpy as np
import pytest

from beambench.errors import (
    RankDeficientRegressor,
    StabilitySearchExhausted,
    UnstableModel,
)
from beambench.mvar import (
    ROLE_BACKGROUND,
    ROLE_INTEREST,
    CompositeMvar,
    MaskMatrix,
    MvarModel,
    block_diagonal,
    fit,
    is_stable,
    make_mask,
    sample_stable_mvar,
    simulate,
)


def scalar_model(a: float, noise: float = 1.0) -> MvarModel:
    return MvarModel(
        dim=1, order=1, coeffs=np.array([[[a]]]), noise_cov=np.array([[noise]])
    )


class TestMvarModel:
    def test_valid_model_stores_float_arrays(self):
        model = MvarModel(2, 1, np.zeros((1, 2, 2), dtype=int), np.eye(2, dtype=int))
        assert model.coeffs.dtype == float
        assert model.noise_cov.dtype == float

    def test_coeffs_shape_must_match_order_and_dim(self):
        with pytest.raises(ValueError, match="coeffs shape"):
            MvarModel(2, 2, np.zeros((1, 2, 2)), np.eye(2))

    def test_noise_cov_shape_must_match_dim(self):
        with pytest.raises(ValueError, match="noise_cov shape"):
            MvarModel(2, 1, np.zeros((1, 2, 2)), np.eye(3))

    def test_noise_cov_must_be_symmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            MvarModel(2, 1, np.zeros((1, 2, 2)), np.array([[1.0, 0.1], [0.0, 1.0]]))

    def test_noise_cov_must_be_positive_semidefinite(self):
        bad = np.array([[1.0, 0.0], [0.0, -0.5]])
        with pytest.raises(ValueError, match="semidefinite"):
            MvarModel(2, 1, np.zeros((1, 2, 2)), bad)

    def test_non_finite_entries_rejected(self):
        coeffs = np.zeros((1, 2, 2))
        coeffs[0, 0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            MvarModel(2, 1, coeffs, np.eye(2))

    def test_companion_layout(self):
        a1 = np.array([[0.1, 0.2], [0.3, 0.4]])
        a2 = np.array([[0.5, 0.6], [0.7, 0.8]])
        model = MvarModel(2, 2, np.stack([a1, a2]), np.eye(2))
        comp = model.companion()
        assert comp.shape == (4, 4)
        assert np.array_equal(comp[:2, :2], a1)
        assert np.array_equal(comp[:2, 2:], a2)
        assert np.array_equal(comp[2:, :2], np.eye(2))
        assert np.array_equal(comp[2:, 2:], np.zeros((2, 2)))

    def test_coeff_stack_is_horizontal(self):
        a1 = np.full((2, 2), 1.0)
        a2 = np.full((2, 2), 2.0)
        model = MvarModel(2, 2, np.stack([a1, a2]), np.eye(2))
        assert np.array_equal(model.coeff_stack(), np.hstack([a1, a2]))

    def test_json_round_trip_is_exact(self):
        rng = np.random.default_rng(5)
        model = sample_stable_mvar(3, 2, make_mask(3, 0.5, rng), 0.95, (-0.4, 0.4), 200, rng)
        again = MvarModel.from_json(model.to_json())
        assert again.dim == model.dim
        assert again.order == model.order
        assert np.array_equal(again.coeffs, model.coeffs)
        assert np.array_equal(again.noise_cov, model.noise_cov)


class TestMakeMask:
    def test_zero_fraction_gives_identity(self):
        mask = make_mask(3, 0.0, np.random.default_rng(0))
        assert np.array_equal(mask.entries, np.eye(3))

    def test_full_fraction_gives_all_ones(self):
        mask = make_mask(3, 1.0, np.random.default_rng(0))
        assert np.array_equal(mask.entries, np.ones((3, 3)))

    def test_default_fraction_count_dim9(self):
        mask = make_mask(9, 0.2, np.random.default_rng(1))
        off = mask.entries[~np.eye(9, dtype=bool)]
        assert int(off.sum()) == 14  # round(0.2 * 9 * 8)
        assert np.all(np.diag(mask.entries) == 1.0)

    def test_exact_count_for_every_fraction(self):
        rng = np.random.default_rng(2)
        for dim, frac in ((2, 0.5), (5, 0.33), (7, 0.8)):
            mask = make_mask(dim, frac, rng)
            off = mask.entries[~np.eye(dim, dtype=bool)]
            assert int(off.sum()) == round(frac * dim * (dim - 1))

    def test_deterministic_given_seed(self):
        a = make_mask(6, 0.4, np.random.default_rng(42))
        b = make_mask(6, 0.4, np.random.default_rng(42))
        assert np.array_equal(a.entries, b.entries)

    def test_mask_type_rejects_broken_diagonal(self):
        entries = np.eye(2)
        entries[0, 0] = 0.0
        with pytest.raises(ValueError, match="diagonal"):
            MaskMatrix(dim=2, entries=entries)

    def test_mask_type_rejects_non_binary(self):
        entries = np.eye(2)
        entries[0, 1] = 0.5
        with pytest.raises(ValueError, match="0 or 1"):
            MaskMatrix(dim=2, entries=entries)


class TestIsStable:
    def test_diagonal_half(self):
        model = MvarModel(3, 1, 0.5 * np.eye(3)[None], np.eye(3))
        stable, radius = is_stable(model, 1.0)
        assert stable
        assert radius == pytest.approx(0.5, abs=1e-12)

    def test_unit_diagonal_is_boundary(self):
        model = MvarModel(3, 1, np.eye(3)[None], np.eye(3))
        stable, radius = is_stable(model, 1.0)
        assert not stable
        assert radius == pytest.approx(1.0, abs=1e-12)

    def test_nilpotent_companion_has_zero_radius(self):
        a1 = np.array([[0.0, 1.0], [0.0, 0.0]])
        model = MvarModel(2, 2, np.stack([a1, np.zeros((2, 2))]), np.eye(2))
        stable, radius = is_stable(model, 1.0)
        assert stable
        assert radius < 1e-6

    def test_limit_tightens_the_verdict(self):
        model = scalar_model(0.7)
        assert is_stable(model, 0.8)[0]
        assert not is_stable(model, 0.6)[0]


class TestSampleStableMvar:
    def test_scalar_ar1_stays_in_range(self):
        rng = np.random.default_rng(3)
        mask = make_mask(1, 0.0, rng)
        model = sample_stable_mvar(1, 1, mask, 1.0, (0.4, 0.6), 100, rng)
        a = float(model.coeffs[0, 0, 0])
        assert 0.4 <= a <= 0.6
        stable, radius = is_stable(model, 1.0)
        assert stable
        assert radius == pytest.approx(abs(a), abs=1e-12)

    def test_degenerate_range_forces_diagonal_half(self):
        rng = np.random.default_rng(4)
        model = sample_stable_mvar(2, 1, make_mask(2, 0.0, rng), 1.0, (0.5, 0.5), 10, rng)
        assert np.allclose(model.coeffs[0], 0.5 * np.eye(2))
        assert is_stable(model, 1.0)[1] == pytest.approx(0.5, abs=1e-12)

    def test_mask_zeroes_survive_sampling(self):
        rng = np.random.default_rng(6)
        mask = make_mask(5, 0.2, rng)
        model = sample_stable_mvar(5, 3, mask, 0.95, (-0.4, 0.4), 1000, rng)
        zero = mask.entries == 0.0
        for lag in range(model.order):
            assert np.all(model.coeffs[lag][zero] == 0.0)

    def test_hundred_seeded_draws_stay_below_limit(self):
        for seed in range(100):
            rng = np.random.default_rng(np.random.SeedSequence(seed))
            model = sample_stable_mvar(
                9, 6, make_mask(9, 0.2, rng), 0.95, (-0.3, 0.3), 1000, rng
            )
            stable, radius = is_stable(model, 0.95)
            assert stable
            assert radius < 0.95

    def test_exhausted_search_raises(self):
        rng = np.random.default_rng(7)
        mask = make_mask(1, 0.0, rng)
        with pytest.raises(StabilitySearchExhausted):
            sample_stable_mvar(1, 1, mask, 0.5, (0.9, 0.99), 5, rng)

    def test_deterministic_given_seed(self):
        draws = []
        for _ in range(2):
            rng = np.random.default_rng(np.random.SeedSequence(11))
            draws.append(
                sample_stable_mvar(4, 2, make_mask(4, 0.3, rng), 0.95, (-0.5, 0.5), 500, rng)
            )
        assert np.array_equal(draws[0].coeffs, draws[1].coeffs)


class TestSimulate:
    def test_zero_noise_gives_exact_zeros(self):
        model = MvarModel(2, 1, 0.5 * np.eye(2)[None], np.zeros((2, 2)))
        out = simulate(model, 50, np.random.default_rng(0))
        assert out.shape == (2, 50)
        assert np.all(out == 0.0)

    def test_ar1_stationary_variance(self):
        out = simulate(scalar_model(0.9), 100000, np.random.default_rng(12))
        expected = 1.0 / (1.0 - 0.81)
        assert float(out.var()) == pytest.approx(expected, rel=0.05)

    def test_independent_channels_are_uncorrelated(self):
        coeffs = np.diag([0.6, -0.4])[None]
        model = MvarModel(2, 1, coeffs, np.eye(2))
        n = 20000
        out = simulate(model, n, np.random.default_rng(13))
        corr = float(np.corrcoef(out)[0, 1])
        assert abs(corr) <= 3.0 / np.sqrt(n)

    def test_unstable_model_rejected(self):
        with pytest.raises(UnstableModel):
            simulate(scalar_model(1.0), 10, np.random.default_rng(0))

    def test_deterministic_given_seed(self):
        model = scalar_model(0.5)
        a = simulate(model, 100, np.random.default_rng(99))
        b = simulate(model, 100, np.random.default_rng(99))
        assert np.array_equal(a, b)

    def test_burn_in_changes_consumed_samples(self):
        model = scalar_model(0.5)
        a = simulate(model, 100, np.random.default_rng(1), burn_in=0)
        b = simulate(model, 100, np.random.default_rng(1), burn_in=10)
        assert not np.array_equal(a, b)

    def test_singular_noise_cov_is_simulated(self):
        cov = np.array([[1.0, 1.0], [1.0, 1.0]])  # rank one
        model = MvarModel(2, 1, np.zeros((1, 2, 2)), cov)
        out = simulate(model, 2000, np.random.default_rng(3))
        # both channels ride the same innovation
        assert np.allclose(out[0], out[1], atol=1e-12)


class TestFit:
    def test_ar1_coefficient_recovery(self):
        series = simulate(scalar_model(0.5), 20000, np.random.default_rng(21))
        fitted = fit(series, 1)
        assert float(fitted.coeffs[0, 0, 0]) == pytest.approx(0.5, abs=0.05)

    def test_all_zero_series_is_rank_deficient(self):
        with pytest.raises(RankDeficientRegressor):
            fit(np.zeros((2, 500)), 2)

    def test_round_trip_error_small_and_shrinking(self):
        rng = np.random.default_rng(22)
        model = sample_stable_mvar(5, 2, make_mask(5, 0.2, rng), 0.95, (-0.3, 0.3), 1000, rng)
        errors = []
        for n in (20000, 80000):
            series = simulate(model, n, rng)
            fitted = fit(series, 2)
            errors.append(float(np.max(np.abs(fitted.coeffs - model.coeffs))))
        assert errors[0] <= 0.05
        assert errors[1] < errors[0]

    def test_noise_cov_estimate_is_symmetric_psd(self):
        rng = np.random.default_rng(23)
        model = sample_stable_mvar(3, 2, make_mask(3, 0.4, rng), 0.95, (-0.4, 0.4), 500, rng)
        fitted = fit(simulate(model, 5000, rng), 2)
        assert np.array_equal(fitted.noise_cov, fitted.noise_cov.T)
        assert np.linalg.eigvalsh(fitted.noise_cov).min() >= -1e-10

    def test_short_series_rejected(self):
        with pytest.raises(ValueError, match="too short"):
            fit(np.random.default_rng(0).standard_normal((3, 12)), 3)


class TestComposite:
    def test_block_diagonal_layout_and_roles(self):
        rng = np.random.default_rng(30)
        first = sample_stable_mvar(2, 1, make_mask(2, 0.0, rng), 0.95, (-0.5, 0.5), 200, rng)
        second = sample_stable_mvar(3, 2, make_mask(3, 0.3, rng), 0.95, (-0.4, 0.4), 500, rng)
        joint = block_diagonal([first, second], [ROLE_INTEREST, ROLE_BACKGROUND])
        assert joint.blocks.dim == 5
        assert joint.blocks.order == 2
        assert joint.channel_roles == ("interest",) * 2 + ("background",) * 3
        assert joint.role_count(ROLE_INTEREST) == 2
        # first block is zero-padded to the joint order
        assert np.array_equal(joint.blocks.coeffs[0, :2, :2], first.coeffs[0])
        assert np.all(joint.blocks.coeffs[1, :2, :2] == 0.0)
        assert np.array_equal(joint.blocks.coeffs[:2, 2:, 2:], second.coeffs)
        assert np.all(joint.blocks.coeffs[:, :2, 2:] == 0.0)
        assert np.all(joint.blocks.coeffs[:, 2:, :2] == 0.0)

    def test_role_count_must_match_channels(self):
        model = scalar_model(0.5)
        with pytest.raises(ValueError, match="one role tag per channel"):
            CompositeMvar(blocks=model, channel_roles=("interest", "interest"))

    def test_unknown_role_rejected(self):
        model = scalar_model(0.5)
        with pytest.raises(ValueError, match="unknown channel role"):
            CompositeMvar(blocks=model, channel_roles=("cortex",))
