"""Exponential chirps and the joint-scattering chirp-rate law.

Conventions: a chirp ``exp(2 pi i sign(alpha) 2**(alpha t))`` with ``t`` in
time units of ``time_unit`` samples has instantaneous frequency
``|alpha| log(2) 2**(alpha t)`` cycles per time unit, so its scalogram ridge
is ``lambda = alpha t + log2(|alpha| log 2)`` with ``lambda`` the log2 of a
frequency in cycles per time unit.  The sign factor keeps decreasing chirps
(``alpha < 0``) at positive frequencies.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.fft as sfft
from scipy import integrate

from . import engine as en
from .filters import LOWPASS_TRUNCATION, _normalized_morlet, next_pow2, relative_bandwidth
from .scattering import ScatteringConfig, ScatteringOutput, ScatteringPlan, get_plan

LN2 = math.log(2.0)


class ChirpError(ValueError):
    """Invalid chirp parameters or an uninformative coefficient slice."""


@dataclass(frozen=True)
class ChirpSpec:
    """``alpha`` in octaves per time unit, ``duration`` in samples,
    ``time_unit`` in samples per unit, ``t_start`` in time units."""

    alpha: float
    duration: int
    time_unit: float
    t_start: float = 0.0
    real: bool = False

    def __post_init__(self):
        if self.duration < 2:
            raise ChirpError("duration must be at least 2 samples")
        if not self.time_unit > 0:
            raise ChirpError("time_unit must be positive")
        peak = float(np.max(self.inst_freq(self.times())))
        if peak >= 0.5:
            raise ChirpError(
                f"instantaneous frequency reaches {peak:.3g} cycles/sample; "
                f"maximal admissible duration is {self.max_duration()} samples"
            )

    def times(self) -> np.ndarray:
        return self.t_start + np.arange(self.duration) / self.time_unit

    def inst_freq(self, t) -> np.ndarray:
        """Instantaneous frequency in cycles per sample."""
        t = np.asarray(t, dtype=np.float64)
        if self.alpha == 0:
            return np.full(t.shape, 1.0 / self.time_unit)
        return abs(self.alpha) * LN2 * np.exp2(self.alpha * t) / self.time_unit

    def ridge(self, t) -> np.ndarray:
        """log2 instantaneous frequency in cycles per sample."""
        return np.log2(self.inst_freq(t))

    def max_duration(self) -> int:
        """Longest duration from ``t_start`` keeping the frequency below Nyquist."""
        if self.alpha <= 0:
            f0 = float(self.inst_freq(self.t_start))
            return 0 if f0 >= 0.5 else np.iinfo(np.int64).max
        t_max = math.log2(0.5 * self.time_unit / (self.alpha * LN2)) / self.alpha
        return max(0, int(math.floor((t_max - self.t_start) * self.time_unit)))


def chirp_through(alpha: float, duration: int, time_unit: float, mid_freq: float, real: bool = False) -> ChirpSpec:
    """Chirp whose instantaneous frequency at the middle sample is
    ``mid_freq`` cycles per sample."""
    t_mid = 0.0
    if alpha != 0:
        t_mid = math.log2(mid_freq * time_unit / (abs(alpha) * LN2)) / alpha
    t_start = t_mid - (duration // 2) / time_unit
    return ChirpSpec(alpha, duration, time_unit, t_start, real)


def exponential_chirp(spec: ChirpSpec) -> np.ndarray:
    """Samples of ``exp(2 pi i sign(alpha) 2**(alpha t))``, or their real part.

    ``alpha = 0`` gives the tone ``exp(2 pi i t)`` at one cycle per time unit.
    """
    t = spec.times()
    if spec.alpha == 0:
        cycles = t
    else:
        # Subtract the integer part of the start phase to keep the argument small.
        c0 = 2.0 ** (spec.alpha * spec.t_start)
        cycles = math.copysign(1.0, spec.alpha) * (np.exp2(spec.alpha * t) - math.floor(c0))
    x = np.exp(2j * np.pi * np.mod(cycles, 1.0))
    return np.real(x) if spec.real else x


# ---------------------------------------------------------------------------
# Stationary-phase approximation of the scalogram


def morlet_log_profile(u, q_factor: int) -> np.ndarray:
    """``|psi_hat(2**u)|`` for the unit-center Morlet of quality ``Q``."""
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    b = relative_bandwidth(q_factor)
    # Evaluate at center 1/8 cycles/sample, where periodization is negligible.
    c = 0.125
    return np.abs(_normalized_morlet(c * np.exp2(u), c, c * b))


def c0_constant(q_factor: int) -> float:
    """``c0 = int |psi_hat(2**u)| du`` by adaptive quadrature."""
    b = relative_bandwidth(q_factor)
    lo = math.log2(max(1e-12, 1.0 - 12 * b))
    hi = math.log2(1.0 + 12 * b)
    val, _ = integrate.quad(lambda u: float(morlet_log_profile(u, q_factor)[0]), lo, hi, limit=200, epsabs=1e-13)
    return val


def lemma1_check(spec: ChirpSpec, lam: float, q_factor: int = 8, constant: float = 1.0) -> tuple[float, float]:
    """Compare ``|x * psi_lambda|`` with ``|psi_hat(log(2**alpha) 2**(alpha t - lambda))|``.

    ``lam`` is the log2 center frequency of ``psi_lambda`` in cycles per time
    unit.  Returns the maximal deviation over samples whose filter support
    lies inside the signal, and ``constant * |alpha| 2**-lam``.
    """
    xi = 2.0**lam / spec.time_unit
    if not 0 < xi < 0.5:
        raise ChirpError(f"lambda = {lam} puts the filter outside (0, 1/2) cycles/sample")
    sigma = relative_bandwidth(q_factor) * xi
    x = exponential_chirp(spec)
    n = spec.duration
    support = int(math.ceil(8 / (2 * math.pi * sigma)))
    grid = next_pow2(n + 2 * support)
    resp = _normalized_morlet(sfft.fftfreq(grid), xi, sigma)
    padded = np.zeros(grid, dtype=np.complex128)
    padded[:n] = x
    actual = np.abs(sfft.ifft(sfft.fft(padded) * resp))[:n]
    predicted = np.abs(_normalized_morlet(spec.inst_freq(spec.times()), xi, sigma))
    valid = slice(support, n - support)
    if valid.start >= valid.stop:
        raise ChirpError("signal too short for the filter support")
    err = float(np.max(np.abs(actual[valid] - predicted[valid])))
    return err, constant * abs(spec.alpha) * 2.0 ** (-lam)


def fit_constant(errors: Sequence[float], shapes: Sequence[float]) -> float:
    """Smallest ``C`` with ``error <= C * shape`` on a calibration sweep."""
    ratios = [e / s for e, s in zip(errors, shapes) if s > 0]
    if not ratios:
        raise ChirpError("no calibration points")
    return float(max(ratios))


def loglog_slope(lams: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log2 error`` against ``lambda``."""
    return float(np.polyfit(np.asarray(lams, float), np.log2(np.asarray(errors, float)), 1)[0])


# ---------------------------------------------------------------------------
# Joint coefficients on chirps


def _row_response(plan: ScatteringPlan, fr: int, freq_cycles_per_bin: float) -> float:
    """Magnitude response of log-frequency row ``fr`` at a given frequency,
    interpolated on its grid; zero beyond the half-bin rate, where the
    continuous filter has no energy."""
    if abs(freq_cycles_per_bin) >= 0.5:
        return 0.0
    resp = np.abs(plan.freq_bank_rows_resp[fr])
    size = resp.size
    grid = np.arange(size + 1) / size
    return float(np.interp(np.mod(freq_cycles_per_bin, 1.0), grid, np.append(resp, resp[0])))


def _mu_envelope(plan: ScatteringPlan, k: int) -> np.ndarray:
    """``|psi_mu| * phi_T`` on the full-rate grid, indexed by circular lag."""
    g = plan.mus[k].resample(plan.grid, 1)
    env = np.abs(sfft.ifft(g))
    return np.real(sfft.ifft(sfft.fft(env) * plan.lowpass.resample(plan.grid, 1)))


def _attach_rows(plan: ScatteringPlan) -> None:
    if not hasattr(plan, "freq_bank_rows_resp"):
        from .filters import frequency_axis_filters

        plan.freq_bank_rows_resp = [r[2] for r in frequency_axis_filters(plan.freq_bank)]


@dataclass
class RidgeModelRow:
    frame: int
    lam: int
    mu: int
    fr: int
    ell: float
    spin: int
    actual: float
    predicted: float
    residual: float
    bound_shape: float
    bound: float


def frame_time(plan: ScatteringPlan, frame: int) -> int:
    """Original-time sample index at the center of output frame ``frame``."""
    if plan.global_mode:
        return plan.length // 2
    return frame * plan.hop


def theorem1_check(
    spec: ChirpSpec,
    points: Iterable[tuple[int, int, int, int]],
    cfg: ScatteringConfig,
    out: ScatteringOutput | None = None,
    constant: float = 1.0,
) -> list[RidgeModelRow]:
    """Joint coefficients of a chirp against the stationary-phase prediction
    ``(c0 / |a|) |psi_hat_fr(-nu_mu / (Q a))| (|psi_mu| * phi_T)(n - n0(lambda))``.

    ``points`` are ``(frame, lambda index, mu index, fr index)``.  ``a`` is
    the chirp rate in octaves per sample and ``n0(lambda)`` the sample where
    the ridge crosses channel ``lambda``.  The bound shape is
    ``|alpha| 2**(-lambda + 2**-ell A) + 2**(2 mu) |alpha|**-2 + 2**(2 mu - ell) |alpha|**-2``
    in time units, with ``A`` the 4-sigma half-support of the log-frequency
    wavelet at ``ell = 0``.
    """
    if cfg.transform_kind != "joint":
        raise ChirpError("ridge-model check needs joint scattering")
    if spec.alpha == 0:
        raise ChirpError("ridge-model check needs a nonzero chirp rate")
    x = exponential_chirp(spec)
    plan = get_plan(cfg, spec.duration)
    if out is None:
        out = plan.forward(x)
    _attach_rows(plan)
    q = cfg.q_factor
    tu = spec.time_unit
    a = spec.alpha / tu
    c0 = c0_constant(q)
    log_rate = math.log2(abs(spec.alpha) * LN2 / tu)
    envelopes: dict[int, np.ndarray] = {}
    rows = []
    for frame, lam, k, fr in points:
        lam_log = plan.bank.filters[lam].center_log_freq
        n0 = ((lam_log - log_rate) / spec.alpha - spec.t_start) * tu
        nu = plan.mus[k].center_freq
        resp = _row_response(plan, fr, -nu / (q * a))
        if k not in envelopes:
            envelopes[k] = _mu_envelope(plan, k)
        env = envelopes[k]
        lag = frame_time(plan, frame) - n0
        e_val = float(np.interp(np.mod(lag, plan.grid), np.arange(plan.grid + 1), np.append(env, env[0])))
        predicted = c0 / abs(a) * resp * e_val
        actual = float(out.s2_joint[frame, lam, k, fr])
        ell, spin = plan.fr_rows[fr]
        shape = _ridge_bound_shape(plan, spec, lam, k, fr)
        rows.append(
            RidgeModelRow(frame, lam, k, fr, ell, spin, actual, predicted, abs(actual - predicted), shape, constant * shape)
        )
    return rows


def _ridge_bound_shape(plan: ScatteringPlan, spec: ChirpSpec, lam: int, k: int, fr: int) -> float:
    tu = spec.time_unit
    alpha = abs(spec.alpha)
    lam_u = math.log2(plan.bank.filters[lam].center_freq * tu)
    mu_u = math.log2(plan.mus[k].center_freq * tu)
    fb = plan.freq_bank
    top = fb.filters[0]
    q = plan.cfg.q_factor
    # 4-sigma half-support (octaves) of the log-frequency wavelet, rescaled to ell = 0.
    quef0 = top.center_freq * q
    half_support = 4.0 / (2 * math.pi * top.sigma) / q
    a_const = half_support * quef0
    if fr == 0:
        ell_u = math.log2(1.0 / plan.cfg.f_scale)
    else:
        ell_u = plan.fr_quefrencies[fr]
    return (
        alpha * 2.0 ** (-lam_u + 2.0 ** (-ell_u) * a_const)
        + 2.0 ** (2 * mu_u) / alpha**2
        + 2.0 ** (2 * mu_u - ell_u) / alpha**2
    )


def estimate_chirp_rate(
    out: ScatteringOutput, t: int, lam: int, time_unit: float = 1.0, rel_floor: float = 1e-6
) -> tuple[float, int]:
    """Chirp rate from the joint-coefficient argmax at frame ``t`` and
    channel index ``lam``.

    Returns ``alpha_hat = -s 2**(mu - ell)`` in octaves per time unit, with
    ``2**mu`` the temporal center frequency and ``2**ell`` the log-frequency
    center in cycles per octave, and the spin ``s``.  Raises when the slice
    is numerically zero or its maximum sits on the log-frequency lowpass row.
    """
    if out.s2_joint is None:
        raise ChirpError("estimate needs joint scattering output")
    sl = out.s2_joint[t, lam]  # [mu, fr]
    scale = max(float(out.s1[t, lam]) if out.s1.ndim == 2 else float(out.s1[t, lam, 0]), 0.0)
    peak = float(sl.max()) if sl.size else 0.0
    if peak <= rel_floor * max(scale, np.finfo(float).tiny) or peak == 0:
        raise ChirpError("coefficient slice is zero: no modulation to estimate")
    k, fr = np.unravel_index(int(np.argmax(sl)), sl.shape)
    ell, spin = out.fr_rows[fr]
    if not math.isfinite(ell):
        raise ChirpError("maximum lies on the log-frequency lowpass row: no frequency modulation")
    nu = out.meta["mu_freqs"][k] * time_unit
    quef = 2.0 ** out.meta["fr_log_quefrencies"][fr]
    return -spin * nu / quef, int(spin)


def ridge_points(
    spec: ChirpSpec, plan: ScatteringPlan, edge_octaves: float = 1.0, edge_time: float | None = None
) -> list[tuple[int, int]]:
    """``(frame, lambda index)`` on the chirp ridge, at least ``edge_octaves``
    from either end of the wavelet range and ``edge_time`` samples (default
    ``T``) from either end of the signal."""
    edge_time = plan.cfg.t_scale if edge_time is None else edge_time
    wav = plan.bank.wavelets
    logs = np.array([f.center_log_freq for f in wav])
    hi, lo = logs.max() - edge_octaves, logs.min() + edge_octaves
    pts = []
    for frame in range(plan.n_frames):
        n = frame_time(plan, frame)
        if n < edge_time or n > spec.duration - 1 - edge_time:
            continue
        r = float(spec.ridge(spec.t_start + n / spec.time_unit))
        if not lo <= r <= hi:
            continue
        pts.append((frame, int(np.argmin(np.abs(logs - r)))))
    return pts


# ---------------------------------------------------------------------------
# Frequency-dependent time shifts


def frequency_dependent_shift(X: en.Scalogram, tau: Callable[[float], float]) -> en.Scalogram:
    """Circularly delay each channel by ``tau(log_freq)`` samples, with
    fractional delays applied as phase ramps."""
    values = np.asarray(X.values, dtype=np.float64)
    n = values.shape[0]
    f = sfft.fftfreq(n)
    delays = np.array([float(tau(lf)) for lf in X.log_freqs]) / X.time_step
    spec = sfft.fft(values, axis=0)
    ramp = np.exp(-2j * np.pi * np.outer(f, delays))
    if n % 2 == 0:
        # The Nyquist bin is shared by both directions; keep it real.
        ramp[n // 2] = np.cos(np.pi * delays * 1.0)
    shifted = np.real(sfft.ifft(spec * ramp, axis=0))
    return en.Scalogram(
        values=shifted,
        time_step=X.time_step,
        q_factor=X.q_factor,
        log_freqs=X.log_freqs,
        offset=X.offset,
    )


def dirac_pair_distances(cfg_time: ScatteringConfig, cfg_joint: ScatteringConfig, length: int, tau) -> dict:
    """Relative distances between a centered Dirac and its frequency-warped
    version, for time and joint scattering.  The warped version is obtained
    by shifting the Dirac's scalogram channels by ``tau(log_freq)`` samples."""
    from .scattering import relative_distance

    x = np.zeros(length)
    x[length // 2] = 1.0
    res = {}
    for name, cfg in (("time", cfg_time), ("joint", cfg_joint)):
        plan = get_plan(cfg, length)
        sc = plan.scalogram(x)
        warped = frequency_dependent_shift(sc, tau)
        a = plan.forward_from_u1(np.ascontiguousarray(sc.values.T))
        b = plan.forward_from_u1(np.ascontiguousarray(warped.values.T))
        res[name] = relative_distance(a, b)
    return res


# ---------------------------------------------------------------------------
# CSV output


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v
