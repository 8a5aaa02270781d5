import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from jtfs import chirp as ch
from jtfs import engine as en
from jtfs import filters as fl
from jtfs import scattering as sc

LEMMA_TU = 32768


def tone_error_spec(alpha):
    # Four octaves of sweep centered on 0.04 cycles/sample.
    duration = int(4 * LEMMA_TU / abs(alpha))
    return ch.chirp_through(alpha, duration, LEMMA_TU, 0.04)


class TestChirpSpec:
    def test_alpha_zero_is_unit_tone(self):
        spec = ch.ChirpSpec(0.0, 256, 32.0)
        x = ch.exponential_chirp(spec)
        assert_allclose(x, np.exp(2j * np.pi * np.arange(256) / 32.0), atol=1e-12)

    def test_frequency_doubles_each_quarter_unit(self):
        spec = ch.ChirpSpec(4.0, 4096, 4096.0)
        f = spec.inst_freq(np.array([0.0, 0.25, 0.5]))
        assert_allclose(f[1:] / f[:-1], 2.0)

    def test_zero_crossings_halve(self):
        spec = ch.ChirpSpec(4.0, 4096, 4096.0, t_start=1.0, real=True)
        x = ch.exponential_chirp(spec)
        crossings = np.nonzero(np.diff(np.signbit(x)))[0]

        def spacing(n):
            i = int(np.searchsorted(crossings, n))
            return crossings[i + 1] - crossings[i]

        # A quarter time unit is 1024 samples.
        assert spacing(2024) / spacing(1000) == pytest.approx(0.5, rel=0.05)

    def test_nyquist_error_names_duration(self):
        with pytest.raises(ch.ChirpError, match="maximal admissible duration"):
            ch.ChirpSpec(4.0, 100000, 1000.0)

    def test_negative_alpha_positive_frequency(self):
        spec = ch.chirp_through(-2.0, 4096, 4096.0, 0.05)
        x = ch.exponential_chirp(spec)
        spectrum = np.abs(np.fft.fft(x)) ** 2
        f = np.fft.fftfreq(x.size)
        assert spectrum[f < 0].sum() <= 1e-3 * spectrum.sum()

    def test_scalogram_ridge_slope(self):
        n, alpha = 2**14, 4.0
        tu = n * alpha / 5
        spec = ch.chirp_through(alpha, n, tu, 0.04)
        cfg = sc.ScatteringConfig(q_factor=8, t_scale=1024, transform_kind="mel", boundary="zero")
        plan = sc.get_plan(cfg, n)
        scal = plan.scalogram(ch.exponential_chirp(spec))
        t_samples = np.arange(scal.values.shape[0]) * scal.time_step + scal.offset
        keep = (t_samples > 2048) & (t_samples < n - 2048)
        ridge = scal.log_freqs[np.argmax(scal.values[keep], axis=1)]
        slope = np.polyfit(t_samples[keep] / tu, ridge, 1)[0]
        assert slope == pytest.approx(alpha, rel=0.05)


class TestToneApproximation:
    def test_c0_matches_direct_integration(self):
        b = fl.relative_bandwidth(8)
        w = np.linspace(1e-6, 3, 2_000_001)
        k = math.exp(-1 / (2 * b * b))
        psi = (np.exp(-((w - 1) ** 2) / (2 * b * b)) - k * np.exp(-(w**2) / (2 * b * b))) / (1 - k * k)
        direct = np.trapezoid(np.abs(psi) / (w * math.log(2)), w)
        assert ch.c0_constant(8) == pytest.approx(direct, rel=1e-8)
        assert ch.c0_constant(8) == pytest.approx(0.180702618788149, rel=1e-10)

    def test_pure_tone_exact(self):
        spec = ch.ChirpSpec(0.0, 8192, 64.0)
        err, shape = ch.lemma1_check(spec, 0.0, 8)
        assert err <= 1e-9
        assert shape == 0

    def test_error_decreases_with_lambda(self):
        spec = tone_error_spec(2.0)
        errs = [ch.lemma1_check(spec, lam, 8)[0] for lam in (9, 10, 11, 12)]
        assert all(b < a for a, b in zip(errs, errs[1:]))

    def test_error_quarters_per_octave(self):
        # The Morlet spectrum is real and symmetric, so the first-order
        # correction cancels and the deviation scales as alpha**2 2**(-2 lambda).
        spec = tone_error_spec(2.0)
        lams = [9, 10, 11, 12]
        errs = [ch.lemma1_check(spec, lam, 8)[0] for lam in lams]
        assert ch.loglog_slope(lams, errs) == pytest.approx(-2.0, abs=0.05)

    def test_fitted_bound_holds_at_fresh_points(self):
        calib, fresh = [], []
        for alpha in (1.0, 2.0, 4.0):
            spec = tone_error_spec(alpha)
            calib += [ch.lemma1_check(spec, lam, 8) for lam in (9.0, 10.0, 11.0, 12.0)]
            fresh += [ch.lemma1_check(spec, lam, 8) for lam in (9.5, 10.5, 11.5)]
        c = ch.fit_constant([e for e, _ in calib], [s for _, s in calib])
        for err, shape in fresh:
            assert err <= c * shape

    def test_lambda_outside_band(self):
        with pytest.raises(ch.ChirpError):
            ch.lemma1_check(tone_error_spec(2.0), 15.0, 8)


JOINT = sc.ScatteringConfig(q_factor=8, t_scale=4096, f_scale=2, transform_kind="joint", boundary="zero")


@pytest.fixture(scope="module")
def ridge_model_runs():
    runs = {}
    for key in ((2.0, 8000.0, 0.05), (-2.0, 8000.0, 0.05), (-4.0, 16000.0, 0.03), (2.0, 8000.0, 0.1)):
        spec = ch.chirp_through(key[0], 2**14, key[1], key[2])
        runs[key] = (spec, sc.joint_scattering(ch.exponential_chirp(spec), JOINT))
    return runs


def ridge_cells(spec, frame, lam):
    """Cells on the ridge diagonal: temporal octave and log-quefrency move together."""
    plan = sc.get_plan(JOINT, spec.duration)
    spin = -int(np.sign(spec.alpha))
    n_mu = len(plan.mus)
    cells = []
    for k in (n_mu - 3, n_mu - 2, n_mu - 1):
        ell = math.log2(JOINT.q_factor) - (k - (n_mu - 3))
        fr = next(j for j, (e, s) in enumerate(plan.fr_rows) if s == spin and e == ell)
        cells.append((frame, lam, k, fr))
    return cells


class TestRidgeModel:
    def test_spin_asymmetry(self, ridge_model_runs):
        for (alpha, _, _), (spec, out) in ridge_model_runs.items():
            plan = sc.get_plan(JOINT, spec.duration)
            for frame, lam in ch.ridge_points(spec, plan):
                for cell in ridge_cells(spec, frame, lam):
                    anti = (cell[0], cell[1], cell[2], cell[3] + (1 if plan.fr_rows[cell[3]][1] == 1 else -1))
                    on, off = ch.theorem1_check(spec, [cell, anti], JOINT, out)
                    assert on.spin == -np.sign(alpha)
                    assert on.predicted >= 100 * off.predicted
                    assert on.actual >= 10 * off.actual

    def test_residual_shrinks_along_ridge(self, ridge_model_runs):
        for spec, out in ridge_model_runs.values():
            plan = sc.get_plan(JOINT, spec.duration)
            for frame, lam in ch.ridge_points(spec, plan):
                rows = ch.theorem1_check(spec, ridge_cells(spec, frame, lam), JOINT, out)
                res = [r.residual for r in rows]
                assert res[0] > res[1] > res[2]

    def test_fitted_bound(self, ridge_model_runs):
        keys = list(ridge_model_runs)
        calib, fresh = keys[:3], keys[3:]

        def rows_for(key):
            spec, out = ridge_model_runs[key]
            plan = sc.get_plan(JOINT, spec.duration)
            cells = [c for f, lam in ch.ridge_points(spec, plan) for c in ridge_cells(spec, f, lam)]
            return ch.theorem1_check(spec, cells, JOINT, out)

        cal = [r for k in calib for r in rows_for(k)]
        c = ch.fit_constant([r.residual for r in cal], [r.bound_shape for r in cal])
        for r in (r for k in fresh for r in rows_for(k)):
            assert r.residual <= c * r.bound_shape

    def test_rejects_time_kind(self):
        spec = ch.chirp_through(2.0, 2**12, 2000.0, 0.05)
        with pytest.raises(ch.ChirpError):
            ch.theorem1_check(spec, [], sc.ScatteringConfig(q_factor=8, t_scale=256, transform_kind="time"))


SMALL = sc.ScatteringConfig(q_factor=8, t_scale=1024, f_scale=2, transform_kind="joint", boundary="zero")


class TestEstimate:
    @pytest.mark.parametrize("alpha", [1.0, 2.0, 4.0, -1.0, -2.0, -4.0])
    def test_ridge_law(self, alpha):
        n = 2**14
        tu = n * abs(alpha) / 5
        spec = ch.chirp_through(alpha, n, tu, 0.04)
        plan = sc.get_plan(SMALL, n)
        out = plan.forward(ch.exponential_chirp(spec))
        pts = ch.ridge_points(spec, plan)
        assert len(pts) >= 10
        est = [ch.estimate_chirp_rate(out, f, lam, tu) for f, lam in pts]
        assert all(s == -np.sign(alpha) for _, s in est)
        hits = [abs(math.log2(abs(a)) - math.log2(abs(alpha))) <= 1 for a, _ in est]
        assert np.mean(hits) >= 0.9

    def test_pure_tone_rejected(self):
        n = 2**14
        plan = sc.get_plan(SMALL, n)
        f0 = round(plan.bank.filters[20].center_freq * n) / n
        out = plan.forward(np.exp(2j * np.pi * f0 * np.arange(n)))
        with pytest.raises(ch.ChirpError, match="no modulation|lowpass row"):
            ch.estimate_chirp_rate(out, out.n_frames // 2, 20)

    def test_lowpass_row_argmax_rejected(self):
        s2 = np.zeros((1, 1, 2, 3))
        s2[0, 0, 1, 0] = 1.0
        s2[0, 0, 0, 1] = 0.5
        out = sc.ScatteringOutput(
            s1=np.ones((1, 1)),
            s2_joint=s2,
            fr_rows=[(-math.inf, 1), (3.0, 1), (3.0, -1)],
            meta={"mu_freqs": [0.1, 0.05], "fr_log_quefrencies": [-math.inf, 1.0, 1.0]},
        )
        with pytest.raises(ch.ChirpError, match="lowpass row"):
            ch.estimate_chirp_rate(out, 0, 0)

    def test_zero_slice_rejected(self):
        out = sc.joint_scattering(np.zeros(4096), sc.ScatteringConfig(q_factor=8, t_scale=256, transform_kind="joint"))
        with pytest.raises(ch.ChirpError, match="zero"):
            ch.estimate_chirp_rate(out, 0, 10)

    def test_needs_joint(self):
        with pytest.raises(ch.ChirpError):
            ch.estimate_chirp_rate(sc.ScatteringOutput(s1=np.ones((2, 3))), 0, 0)


class TestShift:
    def _scalogram(self):
        rng = np.random.default_rng(0)
        return en.Scalogram(rng.random((256, 12)), 4, 4, -np.arange(12) / 4.0)

    def test_zero_shift_identity(self):
        X = self._scalogram()
        Y = ch.frequency_dependent_shift(X, lambda lf: 0.0)
        assert_allclose(Y.values, X.values, atol=1e-12)

    def test_constant_shift_is_roll(self):
        X = self._scalogram()
        Y = ch.frequency_dependent_shift(X, lambda lf: 12.0)
        assert_allclose(Y.values, np.roll(X.values, 3, axis=0), atol=1e-12)

    def test_linear_shift_per_channel(self):
        X = self._scalogram()
        Y = ch.frequency_dependent_shift(X, lambda lf: -8.0 * lf * 4)
        for j, lf in enumerate(X.log_freqs):
            assert_allclose(Y.values[:, j], np.roll(X.values[:, j], int(round(-8 * lf))), atol=1e-12)

    def test_constant_shift_matches_engine_shift(self):
        n = 8192
        cfg = sc.ScatteringConfig(q_factor=8, t_scale=512, transform_kind="time", boundary="periodic")
        plan = sc.get_plan(cfg, n)
        x = np.random.default_rng(2).standard_normal(n)
        c = 64
        scal = plan.scalogram(x)
        moved = ch.frequency_dependent_shift(scal, lambda lf: float(c))
        a = plan.forward_from_u1(np.ascontiguousarray(moved.values.T))
        b = plan.forward(np.roll(x, c))
        assert sc.relative_distance(b, a) <= 1e-10
        assert sc.relative_distance(plan.forward(x), a) <= 0.1
