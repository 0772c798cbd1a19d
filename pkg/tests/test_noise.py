"""
Tests for core/noise.py

Validates:
- DarkCountModel admissibility and closed forms
- Chain statistics, determinism and edge cases
- NoiseSpec kinds and the fidelity-matching mixture
- copy_state / noise_component / iid and palette ensembles
"""

import math

import numpy as np
import pytest

from core.algebra import DensityMatrix, GhzLabel, fidelity, ghz_density, ghz_overlap_matrix
from core.exceptions import NoiseModelError
from core.noise import (DarkCountModel, NoiseSpec, constant_ensemble, copy_state,
                        dark_count_chain, dark_count_ensemble, iid_ensemble,
                        noise_component, random_orthogonal_noise)
from utils.helpers import make_rng

TARGET = GhzLabel.parse("+000")


class TestDarkCountModel:
    """Parameter checks and closed forms."""

    def test_transition_matrix_is_column_stochastic(self):
        """Columns sum to one; off-diagonals are delta p and delta (1 - p)."""
        matrix = DarkCountModel(0.3, 0.8).transition_matrix()
        assert np.allclose(matrix.sum(axis=0), 1.0)
        assert matrix[1, 0] == pytest.approx(0.8 * 0.3)
        assert matrix[0, 1] == pytest.approx(0.8 * 0.7)

    def test_stationary_law_is_invariant(self):
        """(1 - p_dark, p_dark) is a fixed point."""
        model = DarkCountModel(0.3, 0.8)
        assert np.allclose(model.transition_matrix() @ model.stationary(), model.stationary())

    @pytest.mark.parametrize("p_dark,delta", [(0.5, 2.0), (0.2, 1.25), (0.9, 1.0 / 0.9), (0.0, 1.0)])
    def test_admissible_boundaries(self, p_dark, delta):
        """delta may reach min(1/p, 1/(1 - p))."""
        assert DarkCountModel(p_dark, delta).delta == delta

    @pytest.mark.parametrize("p_dark,delta", [(0.5, 2.1), (0.5, 0.0), (1.2, 0.5), (-0.1, 0.5), (0.8, 1.3)])
    def test_inadmissible_parameters(self, p_dark, delta):
        """Out-of-range p_dark or delta raises."""
        with pytest.raises(NoiseModelError):
            DarkCountModel(p_dark, delta)

    def test_from_correlation(self):
        """Correlation c maps to delta = 1 - c."""
        model = DarkCountModel.from_correlation(0.5, 0.25)
        assert model.delta == pytest.approx(0.75)
        assert model.lag1_correlation() == pytest.approx(0.25)


class TestDarkCountChain:
    """Sampling the chain."""

    @pytest.mark.parametrize("p_dark,delta", [
        (0.5, 0.5),
        (0.5, 0.05),
        (0.1, 0.1),
        (0.3, 1.0),
        (0.5, 2.0),
        (0.9, 0.5),
    ])
    def test_stationary_share_and_lag_one_correlation(self, p_dark, delta):
        """Dark share tends to p_dark and neighbours correlate as 1 - delta."""
        n = 400_000
        chain = dark_count_chain(DarkCountModel(p_dark, delta), n, make_rng(3))
        assert chain.dtype == np.int8
        correlation = 1.0 - delta
        # standard error of the mean of a correlated chain
        spread = math.sqrt(p_dark * (1 - p_dark) * (1 + correlation) / ((1 - correlation) * n))
        assert chain.mean() == pytest.approx(p_dark, abs=5 * spread + 1e-3)
        lag1 = np.corrcoef(chain[:-1], chain[1:])[0, 1]
        assert lag1 == pytest.approx(correlation, abs=0.02)

    def test_transition_frequency(self):
        """Pr[0 -> 1] is delta * p_dark."""
        chain = dark_count_chain(DarkCountModel(0.3, 0.6), 200_000, make_rng(4))
        from_zero = chain[:-1] == 0
        up_rate = chain[1:][from_zero].mean()
        assert up_rate == pytest.approx(0.6 * 0.3, abs=0.01)

    @pytest.mark.parametrize("p_dark", [0.0, 1.0])
    @pytest.mark.parametrize("delta", [0.05, 1.0])
    def test_degenerate_rates_give_constant_chains(self, p_dark, delta):
        """p_dark of 0 or 1 never leaves its only state, whatever delta."""
        model = DarkCountModel(p_dark, delta)
        chain = dark_count_chain(model, 5000, make_rng(6))
        assert np.all(chain == int(p_dark))
        assert model.stationary().tolist() == [1.0 - p_dark, p_dark]
        assert np.allclose(model.transition_matrix() @ model.stationary(), model.stationary())

    def test_seeded_chain_is_reproducible(self):
        """Without a generator the model seed fixes the chain."""
        model = DarkCountModel(0.5, 0.5, seed=7)
        assert np.array_equal(dark_count_chain(model, 5000), dark_count_chain(model, 5000))

    def test_different_seeds_differ(self):
        """Different seeds give different chains."""
        a = dark_count_chain(DarkCountModel(0.5, 0.5, seed=1), 5000)
        b = dark_count_chain(DarkCountModel(0.5, 0.5, seed=2), 5000)
        assert not np.array_equal(a, b)

    def test_empty_chain(self):
        """n = 0 is allowed."""
        assert len(dark_count_chain(DarkCountModel(0.5, 0.5), 0)) == 0

    def test_negative_length(self):
        """Negative n raises."""
        with pytest.raises(NoiseModelError):
            dark_count_chain(DarkCountModel(0.5, 0.5), -1)

    @pytest.mark.parametrize("n", [1, 2, 17, 1001])
    def test_exact_length(self, n):
        """Sojourn chunks are cut to exactly n states."""
        assert len(dark_count_chain(DarkCountModel(0.5, 0.1), n, make_rng(n))) == n


class TestNoiseSpec:
    """Degraded states and fidelity matching."""

    def test_alias_maps_to_white(self):
        """"dark-replaced" is another name for white."""
        assert NoiseSpec("dark-replaced").kind == "white"

    def test_unknown_kind(self):
        """Unknown kinds raise."""
        with pytest.raises(NoiseModelError):
            NoiseSpec("pink")

    @pytest.mark.parametrize("spec,expected", [
        (NoiseSpec("white"), 1 / 8),
        (NoiseSpec("perfect"), 1.0),
        (NoiseSpec("adversarial-minus"), 0.0),
        (NoiseSpec.of("dephased", coherence=0.5), 0.75),
        (NoiseSpec.of("custom-mixture", white=1.0, minus=1.0), 1 / 16),
    ])
    def test_degraded_fidelity_matches_state(self, spec, expected):
        """The closed-form fidelity matches the degraded state."""
        assert spec.degraded_fidelity(3) == pytest.approx(expected)
        assert fidelity(spec.degraded_state(TARGET), TARGET) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("kind", ["white", "adversarial-minus"])
    def test_mixture_hits_requested_fidelity(self, kind):
        """mixture_for lands on the requested fidelity."""
        state = NoiseSpec(kind).mixture_for(0.7, TARGET)
        assert fidelity(state, TARGET) == pytest.approx(0.7, abs=1e-12)

    def test_adversarial_mixture_is_ghz_diagonal(self):
        """All the noise sits on the sign-flipped target."""
        coefficients = ghz_overlap_matrix(NoiseSpec("adversarial-minus").mixture_for(0.7, TARGET))
        # +000 is index 0, -000 is index 4 in ghz_labels order
        assert coefficients[0, 0].real == pytest.approx(0.7)
        assert coefficients[4, 4].real == pytest.approx(0.3)

    def test_unreachable_fidelity(self):
        """Fidelities below the degraded state's raise."""
        with pytest.raises(NoiseModelError):
            NoiseSpec("white").mixture_for(0.1, TARGET)
        with pytest.raises(NoiseModelError):
            NoiseSpec("perfect").mixture_for(0.9, TARGET)

    def test_fidelity_one_is_the_ghz_state(self):
        """f = 1 returns the target projector."""
        assert NoiseSpec("white").mixture_for(1.0, TARGET) == ghz_density(TARGET)

    @pytest.mark.parametrize("params", [
        {"coherence": 1.5},
        {"coherence": 0.5, "baseline_fidelity": 1.2},
    ])
    def test_bad_dephased_parameters(self, params):
        """Coherence and baseline fidelity are range-checked."""
        with pytest.raises(NoiseModelError):
            NoiseSpec.of("dephased", **params)

    def test_negative_mixture_weight(self):
        """Mixture weights must be non-negative."""
        with pytest.raises(NoiseModelError):
            NoiseSpec.of("custom-mixture", white=1.0, minus=-0.5)

    def test_parameters_are_order_insensitive(self):
        """Keyword order does not change equality."""
        a = NoiseSpec.of("custom-mixture", white=1.0, minus=2.0)
        b = NoiseSpec("custom-mixture", {"minus": 2.0, "white": 1.0})
        assert a == b


class TestCopies:
    """Copy states and noise components."""

    def test_copy_state_by_dark_bit(self):
        """Bit 0 gives the target, bit 1 the degraded state."""
        spec = NoiseSpec("white")
        assert copy_state(0, TARGET, spec) == ghz_density(TARGET)
        assert copy_state(1, TARGET, spec) == DensityMatrix.maximally_mixed(3)

    def test_baseline_fidelity_applies_to_clean_copies(self):
        """Clean copies can start below fidelity one."""
        spec = NoiseSpec.of("white", baseline_fidelity=0.9)
        assert fidelity(copy_state(0, TARGET, spec), TARGET) == pytest.approx(0.9)

    def test_bad_dark_bit(self):
        """Only 0 and 1 are dark-count bits."""
        with pytest.raises(NoiseModelError):
            copy_state(2, TARGET, NoiseSpec("white"))

    def test_noise_component_is_orthogonal_to_target(self):
        """The noise part has unit trace and no target weight."""
        rho = NoiseSpec("white").mixture_for(0.8, TARGET)
        component = noise_component(rho, TARGET)
        assert np.trace(component).real == pytest.approx(1.0)
        vec = np.zeros(8)
        vec[0] = vec[7] = 1 / np.sqrt(2)
        assert (vec @ component @ vec).real == pytest.approx(0.0, abs=1e-12)

    def test_noise_component_of_pure_target(self):
        """A pure target has no noise part."""
        with pytest.raises(NoiseModelError):
            noise_component(ghz_density(TARGET), TARGET, f=1.0)

    def test_random_orthogonal_noise(self, rng):
        """Random noise states are orthogonal to the target."""
        assert fidelity(random_orthogonal_noise(TARGET, rng), TARGET) == pytest.approx(0.0, abs=1e-12)


class TestEnsembles:
    """iid and palette ensembles."""

    def test_iid_ensemble_shares_one_state(self):
        """Identical copies share one object."""
        copies = iid_ensemble(4, 0.8, TARGET, NoiseSpec("white"))
        assert len(copies) == 4
        assert all(c is copies[0] for c in copies)

    def test_randomized_iid_ensemble(self):
        """Randomized copies differ but keep f, reproducibly."""
        copies = iid_ensemble(5, 0.6, TARGET, NoiseSpec("white"), seed=3, randomize=True)
        for rho in copies:
            assert fidelity(rho, TARGET) == pytest.approx(0.6, abs=1e-12)
        assert copies[0] != copies[1]
        again = iid_ensemble(5, 0.6, TARGET, NoiseSpec("white"), seed=3, randomize=True)
        assert copies == again

    def test_negative_size(self):
        """Negative sizes raise."""
        with pytest.raises(NoiseModelError):
            iid_ensemble(-1, 0.8, TARGET, NoiseSpec("white"))

    def test_dark_count_ensemble(self):
        """The ensemble indexes its palette by the chain."""
        model = DarkCountModel(0.5, 0.5)
        ensemble = dark_count_ensemble(model, 300, TARGET, NoiseSpec("white"), make_rng(9))
        chain = dark_count_chain(model, 300, make_rng(9))
        assert ensemble.size == 300
        assert np.array_equal(ensemble.indices, chain)
        assert np.allclose(ensemble.palette_fidelities, [1.0, 1 / 8])
        assert np.allclose(ensemble.fidelities(), np.where(chain == 1, 1 / 8, 1.0))
        assert ensemble.states([0])[0] is ensemble.palette[chain[0]]

    def test_constant_ensemble(self):
        """One palette state at the requested fidelity."""
        ensemble = constant_ensemble(10, 0.8, TARGET, NoiseSpec("white"))
        assert len(ensemble.palette) == 1
        assert np.allclose(ensemble.fidelities(), 0.8)
