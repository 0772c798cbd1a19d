"""
Tests for core/protocols.py

Validates:
- Setting draws (frequencies, supported sizes)
- z and x/y rounds on states with deterministic outcomes
- run_protocol bookkeeping and unbiasedness
- Closed-form variance / lower bound / sampling error
- Exact per-round laws of all three protocols and the vectorized sampler
"""

import numpy as np
import pytest
from scipy import stats

from core.algebra import (BitString, DensityMatrix, GhzLabel, even_parity_strings,
                          fidelity, ghz_density, ghz_labels, random_density_matrix)
from core.config_manager import ConfigManager
from core.exceptions import ConfigError, DimensionError, InvalidLabelError
from core.noise import NoiseSpec
from core.protocols import (DfeProtocol, GuhneProtocol, ProposedProtocol,
                            RoundDistribution, _even_strings, _guhne_operators,
                            cumulative_table,
                            dfe_estimate, draw_settings, error_lower_bound,
                            error_probability, flagged_outcome, get_protocol,
                            guhne_estimate, per_round_error_probability,
                            per_round_variance, play_round, run_protocol,
                            theoretical_conditional_variance,
                            theoretical_sampling_error, xy_round, z_round)
from models.records import EstimateSummary, RoundRecord, RoundSettings
from utils.helpers import make_rng

PLUS = GhzLabel.parse("+000")
ALL_PROTOCOLS = [ProposedProtocol(), GuhneProtocol(0.5), DfeProtocol()]


def bits(text: str) -> BitString:
    return BitString.from_str(text)


class TestDrawSettings:
    """Basis-class and string draws."""

    def test_frequencies(self):
        """z with probability 1/3, each even k equally often otherwise."""
        rng = make_rng(101)
        strings = [str(k) for k in even_parity_strings(3)]
        counts = dict.fromkeys(["z"] + strings, 0)
        draws = 30_000
        for _ in range(draws):
            settings = draw_settings(3, rng)
            counts["z" if settings.is_z_round else str(settings.k)] += 1
        expected = [draws / 3] + [draws * 2 / 3 / 4] * 4
        _, p_value = stats.chisquare(list(counts.values()), expected)
        assert p_value > 1e-4

    def test_two_qubit_strings(self):
        """For L = 2 the x/y strings are 00 and 11."""
        rng = make_rng(102)
        seen = {str(s.k) for s in (draw_settings(2, rng) for _ in range(200)) if not s.is_z_round}
        assert seen == {"00", "11"}

    def test_even_strings_are_built_once_per_length(self, rng):
        """Even-weight strings are cached per L."""
        _even_strings.cache_clear()
        for _ in range(50):
            draw_settings(4, rng)
        assert _even_strings.cache_info().misses == 1
        assert list(_even_strings(4)) == even_parity_strings(4)

    def test_single_qubit_rejected(self, rng):
        """L = 1 raises."""
        with pytest.raises(DimensionError):
            draw_settings(1, rng)

    def test_odd_string_rejected(self):
        """x/y settings need an even-weight k."""
        with pytest.raises(InvalidLabelError):
            RoundSettings(a=1, k=bits("010"))


class TestRounds:
    """Single z and x/y rounds."""

    def test_z_round_on_target(self, rng):
        """The target only yields t or its complement."""
        for _ in range(50):
            record = z_round(ghz_density(PLUS), PLUS, rng)
            assert str(record.raw_outcome) in ("000", "111")
            assert record.error_bit == 0

    def test_z_round_outside_pair(self, rng):
        """Any other z outcome is an error."""
        rho = DensityMatrix.basis_state(bits("010"))
        assert all(z_round(rho, PLUS, rng).error_bit == 1 for _ in range(20))

    def test_z_round_on_maximally_mixed(self):
        """2 of 8 outcomes are accepted."""
        rho = DensityMatrix.maximally_mixed(3)
        rng = make_rng(103)
        rounds = 20_000
        ok = sum(1 - z_round(rho, PLUS, rng).error_bit for _ in range(rounds))
        # Pr[r = 0] = 1/4, sd about 0.003
        assert ok / rounds == pytest.approx(0.25, abs=0.015)

    def test_flagged_outcome(self):
        """The flagged sign depends on |k|/2, k.t and the target sign."""
        assert flagged_outcome(bits("000"), PLUS) == -1
        assert flagged_outcome(bits("000"), PLUS.flipped()) == 1
        assert flagged_outcome(bits("011"), GhzLabel.parse("+001")) == -1

    def test_xy_round_on_target_never_errs(self, rng):
        """The target never shows the flagged outcome."""
        for k in even_parity_strings(3):
            for _ in range(10):
                record = xy_round(ghz_density(PLUS), PLUS, k, rng)
                assert record.error_bit == 0
        record = xy_round(ghz_density(PLUS), PLUS, bits("000"), rng)
        assert record.raw_outcome == 1

    def test_xy_round_on_opposite_sign_always_errs(self, rng):
        """The sign-flipped target always does."""
        rho = ghz_density(PLUS.flipped())
        for k in even_parity_strings(3):
            assert xy_round(rho, PLUS, k, rng).error_bit == 1

    def test_xy_round_rejects_odd_string(self, rng):
        """Odd-weight k raises."""
        with pytest.raises(InvalidLabelError):
            xy_round(ghz_density(PLUS), PLUS, bits("100"), rng)

    def test_dimension_mismatch(self, rng):
        """Copy and target sizes must agree."""
        with pytest.raises(DimensionError):
            z_round(DensityMatrix.maximally_mixed(2), PLUS, rng)

    def test_play_round_keeps_copy_index(self, rng):
        """The record carries the copy index."""
        record = play_round(ghz_density(PLUS), PLUS, rng, copy_index=7)
        assert isinstance(record, RoundRecord)
        assert record.copy_index == 7


class TestRunProtocol:
    """Estimates from one round per copy."""

    def test_summary_arithmetic(self):
        """f_hat = 1 - 1.5 e / M."""
        summary = EstimateSummary.from_errors(100, 10)
        assert summary.qber == pytest.approx(0.1)
        assert summary.f_hat == pytest.approx(0.85)

    def test_pure_copies(self, rng):
        """Pure copies give no errors and one record per copy."""
        records = []
        summary = run_protocol([ghz_density(PLUS)] * 200, PLUS, rng, records)
        assert summary.e == 0 and summary.f_hat == 1.0
        assert len(records) == 200
        assert [r.copy_index for r in records] == list(range(200))

    def test_estimate_is_not_clamped(self):
        """Estimates below zero are kept."""
        assert EstimateSummary.from_errors(10, 8).f_hat == pytest.approx(-0.2)

    def test_empty_copies(self, rng):
        """No copies raises."""
        with pytest.raises(ValueError):
            run_protocol([], PLUS, rng)

    def test_unbiased_on_iid_copies(self):
        """The mean estimate matches f within 4 sigma."""
        rho = NoiseSpec("white").mixture_for(0.7, PLUS)
        rng = make_rng(104)
        estimates = [run_protocol([rho] * 200, PLUS, rng).f_hat for _ in range(300)]
        # per-round variance 0.4389 / 200 rounds / 300 trials
        sigma = np.sqrt(2.25 * per_round_variance(0.7) / 200 / 300)
        assert np.mean(estimates) == pytest.approx(0.7, abs=4 * sigma)

    def test_adversarial_error_rate(self):
        """Sign-flip noise errs at (2/3)(1 - f)."""
        rho = NoiseSpec("adversarial-minus").mixture_for(0.7, PLUS)
        rng = make_rng(105)
        summary = run_protocol([rho] * 40_000, PLUS, rng)
        # Pr[r=1] = 0.2, sd 0.002
        assert summary.qber == pytest.approx(0.2, abs=0.008)


class TestFormulas:
    """Closed forms."""

    @pytest.mark.parametrize("f,expected", [(1.0, 0.0), (0.0, 2 / 3), (0.7, 0.2)])
    def test_per_round_error_probability(self, f, expected):
        """(2/3)(1 - f) at a few points."""
        assert per_round_error_probability(f) == pytest.approx(expected)

    def test_per_round_error_probability_rejects_bad_fidelity(self):
        """f outside [0, 1] raises."""
        with pytest.raises(ValueError):
            per_round_error_probability(1.2)

    @pytest.mark.parametrize("f,expected", [(0.25, 0.25), (0.0, 2 / 9), (0.5, 2 / 9), (1.0, 0.0)])
    def test_per_round_variance(self, f, expected):
        """(2f + 1)(2 - 2f)/9 at a few points."""
        assert per_round_variance(f) == pytest.approx(expected)

    def test_conditional_variance_examples(self):
        """Worked values of the conditional variance."""
        assert theoretical_conditional_variance([1.0] * 10) == 0.0
        assert theoretical_conditional_variance([0.5], 1) == pytest.approx(0.5)
        assert theoretical_conditional_variance([0.8] * 1000) == pytest.approx(2.6e-4)

    def test_conditional_variance_matches_round_variance(self):
        """It equals 2.25 times the summed round variances over M^2."""
        f = np.array([0.2, 0.5, 0.9, 1.0])
        expected = 9 / (4 * len(f) ** 2) * sum(per_round_variance(x) for x in f)
        assert theoretical_conditional_variance(f) == pytest.approx(expected)

    def test_conditional_variance_length_check(self):
        """M must match the number of fidelities."""
        with pytest.raises(ValueError):
            theoretical_conditional_variance([0.5, 0.5], 3)

    def test_lower_bound_examples(self):
        """Worked values of the lower bound."""
        assert error_lower_bound([1.0] * 20, 10) == 0.0
        assert error_lower_bound([0.9] * 2000, 1000, 2000) == pytest.approx(1.4e-4)
        assert error_lower_bound([0.8] * 2000, 1000) == pytest.approx(2.6e-4)

    def test_lower_bound_equals_variance_when_measuring_everything(self):
        """At M = N the bound is the conditional variance."""
        f = [0.6] * 50
        assert error_lower_bound(f, 50) == pytest.approx(theoretical_conditional_variance(f))

    def test_lower_bound_rejects_m_above_n(self):
        """M > N raises."""
        with pytest.raises(ValueError):
            error_lower_bound([0.9] * 10, 11)

    def test_sampling_error(self):
        """Closed form on a two-valued ensemble and on a constant one."""
        f = np.array([1.0, 0.0, 1.0, 0.0])
        # sigma^2 = 1/4: 16 * 0.25 / (2 * 2 * 3)
        assert theoretical_sampling_error(f, 2) == pytest.approx(1 / 3)
        assert theoretical_sampling_error([0.7] * 10, 5) == pytest.approx(0.0, abs=1e-20)

    def test_sampling_error_matches_enumeration(self):
        """The closed form equals the average over all subsets."""
        import itertools

        f = np.array([0.9, 0.2, 0.6, 0.6, 1.0])
        m = 2
        deviations = []
        for subset in itertools.combinations(range(len(f)), m):
            rest = [i for i in range(len(f)) if i not in subset]
            deviations.append((f[list(subset)].mean() - f[rest].mean()) ** 2)
        assert theoretical_sampling_error(f, m) == pytest.approx(np.mean(deviations))

    def test_sampling_error_needs_unsampled_copies(self):
        """M = N leaves nothing to compare against."""
        with pytest.raises(ValueError):
            theoretical_sampling_error([0.5, 0.5], 2)


class TestErrorProbability:
    """Exact Pr[r = 1] of the proposed protocol."""

    def test_examples(self):
        """Target, flipped target and white noise."""
        assert error_probability(ghz_density(PLUS), PLUS) == pytest.approx(0.0, abs=1e-12)
        assert error_probability(ghz_density(PLUS.flipped()), PLUS) == pytest.approx(2 / 3)
        assert error_probability(DensityMatrix.maximally_mixed(3), PLUS) == pytest.approx(7 / 12)

    def test_other_label_gives_fair_coin_on_xy(self):
        """Another GHZ label errs on every z round and half the x/y ones."""
        rho = ghz_density(GhzLabel.parse("+011"))
        # z rounds always err, x/y rounds err half the time
        assert error_probability(rho, PLUS) == pytest.approx(1 / 3 + 2 / 3 * 1 / 2)

    @pytest.mark.parametrize("length", [2, 3, 4])
    def test_matches_fidelity_on_random_states(self, rng, length):
        """Pr[r = 1] = (2/3)(1 - f) on random states."""
        for target in ghz_labels(length)[:3]:
            rho = random_density_matrix(length, rng)
            expected = per_round_error_probability(fidelity(rho, target))
            assert error_probability(rho, target) == pytest.approx(expected, abs=1e-12)


class TestGuhneDecomposition:
    """Population/coherence operators."""

    @pytest.mark.parametrize("length", [2, 3, 4, 5])
    def test_every_label_decomposes(self, length):
        """L coherence observables, each squaring to the identity."""
        for target in ghz_labels(length):
            population, coherences = _guhne_operators(target)
            assert len(coherences) == length
            for operator in coherences:
                assert np.allclose(operator @ operator, np.eye(2 ** length), atol=1e-12)

    def test_two_qubit_observables(self):
        """For +00 the second observable is YY."""
        _, coherences = _guhne_operators(GhzLabel.parse("+00"))
        yy = np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]])
        assert np.allclose(coherences[1], yy, atol=1e-12)

    def test_share_from_settings(self):
        """Without an argument the share comes from the settings."""
        ConfigManager.get_instance().set("protocols.guhne_population_share", 0.25)
        assert GuhneProtocol().population_share == 0.25

    @pytest.mark.parametrize("share", [0.0, 1.0, -0.5])
    def test_bad_share(self, share):
        """Shares outside (0, 1) raise."""
        with pytest.raises(ConfigError):
            GuhneProtocol(share)


class TestRoundDistributions:
    """Exact per-round laws."""

    @pytest.mark.parametrize("protocol", ALL_PROTOCOLS, ids=lambda p: p.name)
    def test_mean_is_the_fidelity(self, rng, protocol):
        """Each protocol's round mean is the copy fidelity."""
        for length in (2, 3):
            target = ghz_labels(length)[1]
            rho = random_density_matrix(length, rng)
            table = protocol.outcome_distribution(rho, target)
            assert table.probs.sum() == pytest.approx(1.0)
            assert table.mean == pytest.approx(fidelity(rho, target), abs=1e-12)

    @pytest.mark.parametrize("protocol", ALL_PROTOCOLS, ids=lambda p: p.name)
    def test_pure_target_is_deterministic(self, protocol):
        """No variance and no errors on the target."""
        table = protocol.outcome_distribution(ghz_density(PLUS), PLUS)
        assert table.variance == pytest.approx(0.0, abs=1e-12)
        assert table.error_probability == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("protocol,expected", [
        (ProposedProtocol(), 35 / 144 * 2.25),
        (GuhneProtocol(0.5), 0.625 - 1 / 64),
        (DfeProtocol(), 1 - 1 / 64),
    ], ids=["proposed", "guhne", "dfe"])
    def test_variance_on_maximally_mixed(self, protocol, expected):
        """Per-round variances on I/8."""
        table = protocol.outcome_distribution(DensityMatrix.maximally_mixed(3), PLUS)
        assert table.variance == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("protocol,expected", [
        (ProposedProtocol(), 0.1 * 35 / 144 * 2.25),
        (GuhneProtocol(1 / 2), 0.1 * (0.625 - 1 / 64)),
        (GuhneProtocol(1 / 3), 0.9 * 0.125 + 0.1 * (0.5625 - 1 / 64)),
        (GuhneProtocol(1 / 4), 0.9 / 3 + 0.1 * (0.25 + 1 / 3 - 1 / 64)),
        (DfeProtocol(), 0.1 * (1 - 1 / 64)),
    ], ids=["proposed", "guhne-1/2", "guhne-1/3", "guhne-1/4", "dfe"])
    def test_variance_over_a_dark_ensemble(self, protocol, expected):
        """Copy-weighted round variance with one dark copy in ten."""
        mixed = protocol.outcome_distribution(DensityMatrix.maximally_mixed(3), PLUS)
        pure = protocol.outcome_distribution(ghz_density(PLUS), PLUS)
        assert 0.9 * pure.variance + 0.1 * mixed.variance == pytest.approx(expected, abs=1e-12)

    def test_only_an_even_guhne_split_beats_dfe(self):
        """Below an even split the guhne baseline loses to dfe on a dark ensemble."""
        def weighted(protocol):
            mixed = protocol.outcome_distribution(DensityMatrix.maximally_mixed(3), PLUS)
            pure = protocol.outcome_distribution(ghz_density(PLUS), PLUS)
            return 0.9 * pure.variance + 0.1 * mixed.variance

        proposed, dfe = weighted(ProposedProtocol()), weighted(DfeProtocol())
        assert proposed < weighted(GuhneProtocol(1 / 2)) < dfe
        assert weighted(GuhneProtocol(1 / 3)) > dfe

    def test_proposed_error_probability_matches(self, rng):
        """The table's error mass equals error_probability."""
        rho = random_density_matrix(3, rng)
        table = ProposedProtocol().outcome_distribution(rho, PLUS)
        assert table.error_probability == pytest.approx(error_probability(rho, PLUS))

    def test_cumulative_table(self):
        """Row-wise CDFs end at exactly 1."""
        tables = [RoundDistribution(np.array([1.0, -0.5]), np.array([0.25, 0.75]), np.array([0, 1])),
                  RoundDistribution(np.array([1.0, -0.5]), np.array([1.0, 0.0]), np.array([0, 1]))]
        cdf = cumulative_table(tables)
        assert np.allclose(cdf, [[0.25, 1.0], [1.0, 1.0]])


class TestSampleEstimate:
    """Vectorized sampler against the round-by-round law."""

    @pytest.mark.parametrize("protocol", ALL_PROTOCOLS, ids=lambda p: p.name)
    def test_pure_palette(self, rng, protocol):
        """A pure palette always gives f_hat = 1."""
        tables = [protocol.outcome_distribution(ghz_density(PLUS), PLUS)]
        summary = protocol.sample_estimate(tables, np.zeros(500, dtype=np.intp), rng)
        assert summary.f_hat == pytest.approx(1.0)
        assert summary.e == 0

    @pytest.mark.parametrize("protocol", ALL_PROTOCOLS, ids=lambda p: p.name)
    def test_mixed_palette_mean(self, protocol):
        """The vectorized mean matches the palette average."""
        palette = [ghz_density(PLUS), DensityMatrix.maximally_mixed(3)]
        tables = [protocol.outcome_distribution(rho, PLUS) for rho in palette]
        indices = np.tile([0, 1], 50_000)
        summary = protocol.sample_estimate(tables, indices, make_rng(106))
        expected = (1.0 + 1 / 8) / 2
        # 100k rounds, per-round variance below 1.1
        assert summary.f_hat == pytest.approx(expected, abs=4 * np.sqrt(1.1 / len(indices)))

    def test_proposed_summary_uses_error_count(self, rng):
        """The proposed estimate is rebuilt from e."""
        protocol = ProposedProtocol()
        tables = [protocol.outcome_distribution(DensityMatrix.maximally_mixed(3), PLUS)]
        summary = protocol.sample_estimate(tables, np.zeros(1000, dtype=np.intp), rng)
        assert summary.f_hat == pytest.approx(1 - 1.5 * summary.e / 1000)

    def test_empty_indices(self, rng):
        """No sampled copies raises."""
        protocol = ProposedProtocol()
        tables = [protocol.outcome_distribution(ghz_density(PLUS), PLUS)]
        with pytest.raises(ValueError):
            protocol.sample_estimate(tables, np.zeros(0, dtype=np.intp), rng)


class TestBaselines:
    """Round-by-round baseline estimates."""

    def test_pure_target(self, rng):
        """Both baselines are exact on the target."""
        copies = [ghz_density(PLUS)] * 200
        assert guhne_estimate(copies, PLUS, rng).f_hat == pytest.approx(1.0)
        assert dfe_estimate(copies, PLUS, rng).f_hat == pytest.approx(1.0)

    @pytest.mark.parametrize("estimator", [guhne_estimate, dfe_estimate], ids=["guhne", "dfe"])
    def test_unbiased_on_white_noise(self, estimator):
        """Mean estimate within 4 sigma of f."""
        rho = NoiseSpec("white").mixture_for(0.8, PLUS)
        rng = make_rng(107)
        estimates = [estimator([rho] * 200, PLUS, rng).f_hat for _ in range(100)]
        # per-round variance at most 1
        assert np.mean(estimates) == pytest.approx(0.8, abs=4 * np.sqrt(1.0 / 20_000))

    def test_protocol_names(self, rng):
        """Summaries name their protocol."""
        copies = [ghz_density(PLUS)] * 5
        assert guhne_estimate(copies, PLUS, rng).protocol == "guhne"
        assert dfe_estimate(copies, PLUS, rng).protocol == "dfe"

    def test_empty_copies(self, rng):
        """No copies raises."""
        with pytest.raises(ValueError):
            dfe_estimate([], PLUS, rng)


class TestRegistry:
    """get_protocol."""

    @pytest.mark.parametrize("name,cls", [("proposed", ProposedProtocol), ("guhne", GuhneProtocol),
                                          ("dfe", DfeProtocol)])
    def test_known_names(self, name, cls):
        """Each name builds its class."""
        protocol = get_protocol(name)
        assert isinstance(protocol, cls)
        assert protocol.name == name

    def test_unknown_name(self):
        """Unknown names raise ConfigError."""
        with pytest.raises(ConfigError):
            get_protocol("tomography")

    def test_population_share_reaches_guhne(self):
        """The share is passed to guhne and ignored by the others."""
        assert get_protocol("guhne", population_share=0.25).population_share == 0.25
        assert isinstance(get_protocol("dfe", population_share=0.25), DfeProtocol)
