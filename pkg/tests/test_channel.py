"""Fading generator and channel-draw tests.

The Doppler-shaping checks compare against the closed-form Bessel
autocorrelation of the isotropic-scattering spectrum; the normalization
check against a scalar re-derivation of the power rule.
"""

import numpy as np
import pytest
from scipy import stats
from scipy.special import j0

from stcdma import channel as ch


def normalized_amplitudes_oracle(gains_db):
    """Independent scalar re-derivation: p_l ~ 10^(dB/20), sum p^2 = 1."""
    amps = [10.0 ** (g / 20.0) for g in gains_db]
    norm = sum(a * a for a in amps) ** 0.5
    return [a / norm for a in amps]


class TestPowerDelayProfile:
    def test_three_path_preset_values(self):
        prof = ch.load_profile("three-path-0-3-6")
        assert np.allclose(prof.gains_db, [0.0, -3.0, -6.0])

    def test_normalization_closed_form(self):
        prof = ch.load_profile("three-path-0-3-6")
        want = normalized_amplitudes_oracle([0.0, -3.0, -6.0])
        assert np.allclose(prof.amplitudes, want, atol=1e-12)
        # frozen values from the oracle above
        assert np.allclose(prof.amplitudes, [0.755416, 0.534794, 0.378605], atol=1e-3)

    def test_unit_power_for_any_profile(self):
        for db in ([0.0], [0.0, -3.0], [-2.0, -7.5, -11.0, -20.0]):
            prof = ch.load_profile(db)
            assert abs(np.sum(prof.amplitudes**2) - 1.0) < 1e-12

    def test_single_path(self):
        assert np.allclose(ch.load_profile([0.0]).amplitudes, [1.0])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ch.load_profile([])

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            ch.load_profile("urban-z")

    def test_vehicular_a_preset(self):
        prof = ch.load_profile("vehicular-a")
        assert prof.num_paths == 6
        assert prof.delays_chips is not None
        assert prof.delays_chips[0] == 0
        assert abs(np.sum(prof.amplitudes**2) - 1.0) < 1e-12


class TestFadingProcess:
    def test_empirical_unit_power(self):
        proc = ch.make_fading_process(1e-4, 10**6, seed=5)
        power = np.mean(np.abs(proc.gains) ** 2)
        assert 0.98 <= power <= 1.02

    def test_determinism(self):
        a = ch.make_fading_process(1e-3, 4096, seed=11)
        b = ch.make_fading_process(1e-3, 4096, seed=11)
        assert np.array_equal(a.gains, b.gains)

    def test_fdT_range_errors(self):
        for bad in (0.0, -0.1, 0.5, 0.7):
            with pytest.raises(ValueError):
                ch.make_fading_process(bad, 100, seed=0)

    def test_autocorrelation_tracks_bessel(self):
        # averaged over 120 realizations; tolerance 0.05 absolute up to
        # lag 1000 at fdT = 1e-4
        fdT = 1e-4
        n, reps = 20000, 120
        rng = np.random.default_rng(2024)
        lags = np.arange(0, 1001, 100)
        acc = np.zeros(len(lags), dtype=complex)
        for _ in range(reps):
            g = ch.fading_matrix(fdT, 1, n, rng, normalize="empirical")[0]
            for i, lag in enumerate(lags):
                acc[i] += np.mean(g[lag:] * np.conj(g[: n - lag]))
        emp = (acc / reps).real
        want = j0(2 * np.pi * fdT * lags)
        assert np.max(np.abs(emp - want)) < 0.05

    def test_rayleigh_envelope_ks(self):
        # subsample to quasi-independent points before the KS check
        fdT = 1e-3
        g = ch.make_fading_process(fdT, 400000, seed=77).gains
        step = int(1.0 / fdT)
        env = np.abs(g[::step])
        # unit-power complex Gaussian -> Rayleigh with scale 1/sqrt(2)
        res = stats.kstest(env, "rayleigh", args=(0, 1 / np.sqrt(2)))
        assert res.pvalue > 0.01

    def test_stationarity_across_window_positions(self):
        # mean power per 1e5-sample window, averaged over an ensemble of
        # seeds, stays within 10% of unity at every window position
        fdT = 1e-4
        n, windows, reps = 10**6, 10, 24
        acc = np.zeros(windows)
        for s in range(reps):
            g = ch.make_fading_process(fdT, n, seed=1000 + s).gains
            acc += np.mean(np.abs(g.reshape(windows, -1)) ** 2, axis=1)
        acc /= reps
        assert np.max(np.abs(acc - 1.0)) < 0.10

    def test_ensemble_normalization_mean_power(self):
        rng = np.random.default_rng(3)
        g = ch.fading_matrix(5e-3, 200, 4096, rng, normalize="ensemble")
        assert abs(np.mean(np.abs(g) ** 2) - 1.0) < 0.05


class TestSampleChannel:
    def draw(self, seed=0, synchronous=False, hd_synchronous=False):
        return ch.sample_channel(
            "three-path-0-3-6", 3, 2, 7, 31, 50, 12, 1e-4, seed,
            synchronous=synchronous, hd_synchronous=hd_synchronous,
        )

    def test_doa_range(self):
        for seed in range(30):
            real = self.draw(seed)
            for user in real.users():
                assert np.all(np.abs(user.doas) < np.pi / 3)

    def test_delay_structure(self):
        for seed in range(30):
            real = self.draw(seed)
            for user in real.users():
                d = user.path_delays
                assert d[0] == 0
                spacing = np.diff(d)
                assert np.all((spacing >= 1) & (spacing <= 3))

    def test_asynchronism_ranges(self):
        for seed in range(30):
            real = self.draw(seed)
            for user in real.hd_users:
                assert 0 <= user.asynchronism < 7
            for user in real.ld_users:
                assert 0 <= user.asynchronism < 31

    def test_synchronous_flags(self):
        real = self.draw(3, hd_synchronous=True)
        assert all(u.asynchronism == 0 for u in real.hd_users)
        real = self.draw(3, synchronous=True)
        assert all(u.asynchronism == 0 for u in real.users())

    def test_unit_average_path_power(self):
        # E[|h|^2] summed over paths = 1 (profile normalized, unit fading)
        acc = []
        for seed in range(40):
            real = self.draw(seed)
            for user in real.users():
                acc.append(np.sum(np.mean(np.abs(user.path_gains) ** 2, axis=1)))
        assert abs(np.mean(acc) - 1.0) < 0.1

    def test_profile_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ch.PowerDelayProfile([0.0, -3.0], delays_chips=[0])
