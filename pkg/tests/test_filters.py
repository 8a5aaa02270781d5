import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from jtfs import filters as fl

from oracles import brute_force_kappa, closed_form_morlet


class TestMorlet:
    def test_dc_exactly_zero(self):
        f = fl.design_morlet(0.1, 8, 1024)
        assert f.taps_freq[0] == 0

    @pytest.mark.parametrize("center", [0.01, 0.1, 0.25, 0.4])
    def test_peak_within_one_bin(self, center):
        f = fl.design_morlet(center, 8, 1024)
        k = int(np.argmax(np.abs(f.taps_freq)))
        assert abs(k - center * 1024) <= 1.0

    def test_peak_normalized(self):
        f = fl.design_morlet(0.25, 8, 1024)
        assert_allclose(np.abs(f.taps_freq).max(), 1.0, atol=1e-3)

    def test_kappa_matches_brute_force_dft(self):
        center, n_grid = 0.25, 1024
        sigma = fl.relative_bandwidth(8) * center
        resp, kappa = fl.morlet_response(np.fft.fftfreq(n_grid), center, sigma)
        assert_allclose(kappa, brute_force_kappa(n_grid, center, sigma), rtol=1e-10, atol=1e-14)
        dft = np.fft.fft(closed_form_morlet(n_grid, center, sigma, kappa))
        assert_allclose(dft, resp, atol=1e-10)

    def test_kappa_nontrivial_for_wide_filter(self):
        center = 0.1
        sigma = center / 3.7
        _, kappa = fl.morlet_response(np.fft.fftfreq(256), center, sigma)
        assert 1e-4 < kappa < 1e-2
        assert_allclose(kappa, brute_force_kappa(256, center, sigma), rtol=1e-10)

    def test_rejects_bad_center(self):
        with pytest.raises(ValueError):
            fl.design_morlet(0.6, 8, 1024)
        with pytest.raises(ValueError):
            fl.design_morlet(0.0, 8, 1024)

    def test_rejects_non_pow2_grid(self):
        with pytest.raises(ValueError):
            fl.design_morlet(0.1, 8, 1000)

    def test_rejects_leaky_filter(self):
        with pytest.raises(ValueError, match="negative frequencies"):
            fl.design_morlet(0.05, 1, 256, sigma=0.05)

    @settings(max_examples=40, deadline=None)
    @given(
        center=st.floats(min_value=0.005, max_value=0.4),
        q=st.integers(min_value=1, max_value=24),
        log_n=st.integers(min_value=9, max_value=13),
    )
    def test_analytic_and_zero_mean(self, center, q, log_n):
        center = min(center, fl.max_center_freq(q))
        f = fl.design_morlet(center, q, 2**log_n)
        assert f.negative_energy_fraction() <= 1e-6
        assert abs(f.taps_freq[0]) <= 1e-6 * np.abs(f.taps_freq).max()


class TestFirstOrderBank:
    def test_count_q8(self):
        bank = fl.build_first_order_bank(8, 4096, 65536)
        assert len(bank.wavelets) == 72
        assert bank.j_max == 9
        assert len(bank) == 72 + len(bank.low_freq_fillers)
        assert 1 <= len(bank.low_freq_fillers) <= 7

    def test_degenerate_depth(self):
        bank = fl.build_first_order_bank(1, 2, 64)
        assert bank.j_max == 1
        assert len(bank.wavelets) == 1

    def test_grid_too_small_names_minimum(self):
        minimum = fl.min_grid_size(8, 4096)
        with pytest.raises(ValueError, match=f"minimum grid size is {minimum}"):
            fl.build_first_order_bank(8, 4096, minimum // 2)

    def test_adjacent_ratio(self):
        bank = fl.build_first_order_bank(8, 4096, 65536)
        c = np.array([f.center_freq for f in bank.wavelets])
        assert_allclose(c[1:] / c[:-1], 2 ** (-1 / 8), rtol=1e-2)

    def test_descending_centers(self):
        bank = fl.build_first_order_bank(8, 4096, 65536)
        assert np.all(np.diff(bank.center_log_freqs) < 0)

    def test_scale_constraint(self):
        bank = fl.build_first_order_bank(8, 4096, 65536)
        for f in bank.wavelets:
            octave = (-f.index) // 8
            assert 2**octave * 8 <= 4096

    def test_every_filter_analytic(self):
        bank = fl.build_first_order_bank(8, 4096, 65536)
        for f in bank.filters:
            assert f.negative_energy_fraction() <= 1e-6
            assert abs(f.taps_freq[0]) <= 1e-6

    def test_peak_at_declared_center(self):
        bank = fl.build_first_order_bank(8, 512, 8192)
        for f in bank.filters:
            k = int(np.argmax(np.abs(f.taps_freq)))
            assert abs(k - round(f.center_freq * 8192)) <= 0.5

    def test_littlewood_paley_direct_summation(self):
        bank = fl.build_first_order_bank(8, 4096, 65536)
        # Oracle: re-transform each filter's time taps and sum one at a time.
        lp = np.abs(np.fft.fft(bank.lowpass.taps_time())) ** 2
        for f in bank.filters:
            lp += np.abs(np.fft.fft(f.taps_time())) ** 2
        band = lp[bank.passband()]
        assert band.min() >= 1 - bank.delta
        assert lp.max() <= 1 + bank.delta
        assert_allclose(max(1 - band.min(), lp.max() - 1), bank.measured_delta, atol=1e-9)
        # Frozen from this construction.
        assert_allclose(bank.measured_delta, 0.1262, atol=1e-3)

    def test_dilation_covariance(self):
        bank = fl.build_first_order_bank(8, 4096, 65536)
        by_index = {f.index: f for f in bank.wavelets}
        k = np.arange(65536 // 2)
        for m in (-16, -24, -40):
            lo, hi = by_index[m], by_index[m + 8]
            a = lo.taps_freq[k]
            b = hi.taps_freq[(2 * k) % 65536]
            assert np.max(np.abs(a - b)) <= 1e-3 * np.max(np.abs(a))

    def test_lowpass_unit_dc(self):
        bank = fl.build_first_order_bank(4, 256, 4096)
        assert_allclose(bank.lowpass.taps_freq[0], 1.0, atol=1e-12)
        assert np.all(np.real(bank.lowpass.taps_time()) >= -1e-15)

    @settings(max_examples=15, deadline=None)
    @given(q=st.integers(min_value=1, max_value=16), log_t=st.integers(min_value=5, max_value=12))
    def test_frame_bounds_hold(self, q, log_t):
        t_scale = 2**log_t
        if t_scale < 2 * q:
            return
        bank = fl.build_first_order_bank(q, t_scale, fl.min_grid_size(q, t_scale))
        lower, upper = bank.frame_bounds()
        assert lower >= 1 - bank.delta
        assert upper <= 1 + bank.delta
        assert len(bank.wavelets) == q * int(math.floor(math.log2(t_scale / q)))


class TestSecondOrderBank:
    def test_count(self):
        assert len(fl.build_second_order_bank(1024, 8192).wavelets) == 10
        assert len(fl.build_second_order_bank(2, 64).wavelets) == 1

    def test_scale_constraint(self):
        bank = fl.build_second_order_bank(1024, 8192)
        for f in bank.wavelets:
            assert 2.0 ** (-f.index) <= 1024

    def test_flatness_direct_summation(self):
        bank = fl.build_second_order_bank(1024, 8192)
        lp = np.abs(np.fft.fft(bank.lowpass.taps_time())) ** 2
        for f in bank.filters:
            lp += np.abs(np.fft.fft(f.taps_time())) ** 2
        band = lp[bank.passband()]
        assert band.min() >= 1 - bank.delta
        assert lp.max() <= 1 + bank.delta
        # An analytic Q = 1 Morlet bank dips to about 0.4 between filters.
        assert_allclose(band.min(), 0.4035, atol=2e-3)
        assert lp.max() <= 1 + fl.DEFAULT_DELTA


class TestFrequencyBank:
    def test_f4_q8(self):
        bank = fl.build_frequency_bank(4, 8)
        assert [f.index for f in bank.filters] == [3, 2, 1, 0, -1, -2]
        assert bank.lowpass.kind == "lowpass"

    def test_f1_q1(self):
        bank = fl.build_frequency_bank(1, 1)
        assert [f.index for f in bank.filters] == [0]

    @pytest.mark.parametrize("f_oct", [2, 4, 8])
    def test_lowpass_width(self, f_oct):
        bank = fl.build_frequency_bank(f_oct, 8)
        assert_allclose(fl.lowpass_width_octaves(bank), f_oct, rtol=0.1)

    def test_lowpass_real_nonnegative(self):
        bank = fl.build_frequency_bank(4, 8)
        taps = bank.lowpass.taps_time()
        assert np.max(np.abs(taps.imag)) < 1e-15
        assert np.all(taps.real >= -1e-15)
        # Truncation at five standard deviations leaves ripples below 1e-6.
        assert np.all(np.real(bank.lowpass.taps_freq) >= -1e-6)

    def test_extent_error(self):
        with pytest.raises(ValueError, match="exceeds"):
            fl.build_frequency_bank(16, 8, n_bins=72)

    def test_scale_below_nyquist(self):
        bank = fl.build_frequency_bank(4, 8)
        for f in bank.filters:
            assert f.center_freq < 0.5
            assert f.negative_energy_fraction() <= 1e-6


class TestJointFilters:
    def setup_method(self):
        self.second = fl.build_second_order_bank(1024, 8192)
        self.freq = fl.build_frequency_bank(4, 8)
        self.joint = fl.build_joint_filters(self.second, self.freq)

    def test_count(self):
        assert len(self.joint) == 10 * (6 * 2 + 1) == 130

    def test_lowpass_row_spin(self):
        lows = [w for w in self.joint if w.ell == -math.inf]
        assert len(lows) == 10
        assert all(w.spin == 1 for w in lows)

    def test_spin_reflection(self):
        ups = [w for w in self.joint if w.spin == 1 and w.ell != -math.inf]
        downs = [w for w in self.joint if w.spin == -1]
        assert len(ups) == len(downs) == 60
        for up, down in zip(ups, downs):
            assert (up.mu, up.ell, up.spin, down.spin) == (down.mu, down.ell, 1, -1)
            m = up.taps_freq_axis.size
            reflected = np.conj(up.taps_freq_axis[(-np.arange(m)) % m])
            assert_allclose(down.taps_freq_axis, reflected, atol=0)

    def test_separable_closed_form(self):
        w = next(x for x in self.joint if x.mu_index == 4 and x.ell == 1 and x.spin == 1)
        g = self.second.wavelets[4]
        f = next(x for x in self.freq.filters if x.index == 1)
        _, kg = fl.morlet_response(np.zeros(1), g.center_freq, g.sigma)
        _, kf = fl.morlet_response(np.zeros(1), f.center_freq, f.sigma)
        tg = closed_form_morlet(g.grid_size, g.center_freq, g.sigma, kg)
        tf = closed_form_morlet(f.grid_size, f.center_freq, f.sigma, kf)
        expected = np.outer(tg, tf)
        realized = w.spatial()
        scale = np.abs(expected).max()
        assert np.max(np.abs(realized - expected)) <= 1e-5 * scale

    def test_spin_minus_is_lambda_reversed(self):
        up = next(x for x in self.joint if x.mu_index == 2 and x.ell == 0 and x.spin == 1)
        down = next(x for x in self.joint if x.mu_index == 2 and x.ell == 0 and x.spin == -1)
        a = up.spatial()
        b = down.spatial()
        m = a.shape[1]
        assert_allclose(b, a[:, (-np.arange(m)) % m], atol=1e-15)


def test_dump_round_trip(tmp_path):
    bank = fl.build_first_order_bank(4, 64, 512)
    fl.dump_bank(bank, tmp_path / "bank")
    meta = json.loads((tmp_path / "bank.json").read_text())
    assert meta["Q"] == 4 and meta["J"] == 4
    assert len(meta["filters"]) == len(bank) + 1
    raw = np.fromfile(tmp_path / "bank.f32", dtype="<f4").reshape(len(bank) + 1, 512, 2)
    taps = raw[..., 0] + 1j * raw[..., 1]
    assert_allclose(taps[:-1], bank.matrix(), atol=1e-6)
    assert_allclose(taps[-1], bank.lowpass.taps_freq, atol=1e-6)
