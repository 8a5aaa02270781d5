"""Constant-Q Morlet filter banks, Gaussian lowpass filters and separable
time-frequency wavelets.

Every filter is stored as its frequency response on a power-of-two DFT grid
following the NumPy convention ``x_hat[k] = sum_n x[n] exp(-2i pi k n / N)``,
with frequencies measured in cycles per sample (``np.fft.fftfreq``).  Bandpass
filters are peak-normalized (``max |psi_hat| = 1``), lowpass filters have unit
DC gain.  Time-domain taps are obtained on demand by inverse FFT.

Log-frequency bookkeeping
-------------------------
First-order wavelets are indexed by ``m = -j*Q - k`` (octave ``j >= 1``,
suboctave ``0 <= k < Q``) and the nominal log-frequency ``lambda = m / Q``.
The actual center frequency is ``xi_max * 2 ** ((m + Q) / Q)``, where
``xi_max`` is the highest center that keeps the Gaussian bump four standard
deviations below Nyquist.  ``center_log_freq`` always stores the *actual*
``log2`` of the center frequency, so ``2 ** center_log_freq`` is the bin where
the response peaks.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

#: Half-width of a Gaussian bump, in standard deviations, that must fit
#: between the center and Nyquist (or DC).
SUPPORT_SIGMAS = 4.0
#: Lower bound on ``center / sigma``; keeps negative-frequency energy < 1e-6.
MIN_CENTER_OVER_SIGMA = 3.7
#: Default Littlewood-Paley flatness tolerance.
DEFAULT_DELTA = 0.15
#: Achievable tolerances for banks with few filters per octave, where an
#: analytic Morlet is too narrow to fill the gap between neighbors.
LOW_Q_DELTA = {1: 0.65, 2: 0.3, 3: 0.2}
#: Gaussian lowpass filters are truncated at this many standard deviations.
LOWPASS_TRUNCATION = 5.0

_SQRT_LN2 = math.sqrt(math.log(2.0))


def is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    return 1 << max(0, int(math.ceil(math.log2(max(n, 1)))))


def relative_bandwidth(q_factor: float) -> float:
    """Frequency standard deviation over center frequency for a Morlet of
    quality factor ``q_factor``.

    Adjacent filters of a bank with ``q_factor`` filters per octave cross at
    -3 dB.  For small ``q_factor`` the ratio is clipped so the filter stays
    analytic to 1e-6 in energy.
    """
    rel = (1.0 - 2.0 ** (-1.0 / q_factor)) / (2.0 * _SQRT_LN2)
    return min(rel, 1.0 / MIN_CENTER_OVER_SIGMA)


def max_center_freq(q_factor: float) -> float:
    """Highest admissible center frequency (cycles/sample) for a Morlet of
    quality factor ``q_factor``."""
    return 0.5 / (1.0 + SUPPORT_SIGMAS * relative_bandwidth(q_factor))


@dataclass(frozen=True, eq=False)
class AnalyticFilter:
    """One filter of a bank, held in the frequency domain.

    ``center_log_freq`` is ``log2`` of the center in cycles per sample (or
    cycles per log-frequency bin for filters along the scalogram's frequency
    axis) and is ``-inf`` for lowpass filters.
    """

    taps_freq: np.ndarray
    center_log_freq: float
    bandwidth_octaves: float
    kind: str
    sigma: float
    index: int | None = None

    @property
    def grid_size(self) -> int:
        return self.taps_freq.shape[0]

    @property
    def center_freq(self) -> float:
        return 2.0**self.center_log_freq

    def taps_time(self) -> np.ndarray:
        """Circular time-domain taps, zero lag at index 0."""
        return np.fft.ifft(self.taps_freq)

    def negative_energy_fraction(self) -> float:
        freqs = np.fft.fftfreq(self.grid_size)
        energy = np.abs(self.taps_freq) ** 2
        return float(energy[freqs < 0].sum() / energy.sum())

    def resample(self, grid_size: int, step: int = 1) -> np.ndarray:
        """Frequency response on another grid whose samples are ``step``
        original samples apart.

        Filters are rebuilt analytically from their parameters, which keeps
        them exact on coarse grids.
        """
        return _realize(self, grid_size, step)


def _periodized_gaussian(freqs: np.ndarray, center: float, sigma: float) -> np.ndarray:
    # Sampling in time periodizes the spectrum with period one cycle/sample.
    n_periods = 1 + int(math.ceil(SUPPORT_SIGMAS * 2 * sigma))
    out = np.zeros(freqs.shape, dtype=np.float64)
    for p in range(-n_periods, n_periods + 1):
        out += np.exp(-((freqs + p - center) ** 2) / (2.0 * sigma**2))
    return out


def morlet_response(freqs: np.ndarray, center: float, sigma: float) -> tuple[np.ndarray, float]:
    """Unnormalized periodized Morlet response and its correction coefficient.

    The Morlet is a Gabor bump minus ``kappa`` times a Gaussian bump at DC,
    with ``kappa`` solved so the response vanishes at zero frequency.
    """
    gabor = _periodized_gaussian(freqs, center, sigma)
    low = _periodized_gaussian(freqs, 0.0, sigma)
    zero = np.zeros(1)
    kappa = float(_periodized_gaussian(zero, center, sigma)[0] / _periodized_gaussian(zero, 0.0, sigma)[0])
    resp = gabor - kappa * low
    resp[freqs == 0.0] = 0.0
    return resp, kappa


def _normalized_morlet(freqs: np.ndarray, center: float, sigma: float) -> np.ndarray:
    # Unit response at the exact center, independent of where the bins fall.
    resp, _ = morlet_response(freqs, center, sigma)
    peak, _ = morlet_response(np.array([center]), center, sigma)
    return resp / peak[0]


def design_morlet(
    center_freq: float,
    bandwidth_param: float,
    grid_size: int,
    sigma: float | None = None,
    index: int | None = None,
) -> AnalyticFilter:
    """Zero-mean Morlet wavelet on a ``grid_size``-point frequency grid.

    Parameters
    ----------
    center_freq : float
        Center frequency in cycles per sample, ``0 < center_freq < 1/2``.
    bandwidth_param : float
        Quality factor; sets ``sigma = relative_bandwidth(Q) * center_freq``.
    grid_size : int
        Power-of-two number of frequency bins.
    sigma : float, optional
        Explicit frequency standard deviation, overriding ``bandwidth_param``.

    Returns
    -------
    AnalyticFilter
        Peak-normalized, with an exact zero at DC.
    """
    if not 0.0 < center_freq < 0.5:
        raise ValueError(f"center_freq must lie in (0, 1/2), got {center_freq}")
    if not is_pow2(grid_size):
        raise ValueError(f"grid_size must be a power of two, got {grid_size}")
    if sigma is None:
        if bandwidth_param <= 0:
            raise ValueError(f"bandwidth_param must be positive, got {bandwidth_param}")
        sigma = relative_bandwidth(bandwidth_param) * center_freq
    freqs = np.fft.fftfreq(grid_size)
    resp = _normalized_morlet(freqs, center_freq, sigma)
    half = _SQRT_LN2 * sigma
    lo = max(center_freq - half, 1e-300)
    filt = AnalyticFilter(
        taps_freq=resp.astype(np.complex128),
        center_log_freq=math.log2(center_freq),
        bandwidth_octaves=math.log2((center_freq + half) / lo),
        kind="bandpass",
        sigma=sigma,
        index=index,
    )
    frac = filt.negative_energy_fraction()
    if frac > 1e-3:
        raise ValueError(
            f"Morlet at {center_freq:.4g} with sigma {sigma:.4g} leaks {frac:.2e} "
            "of its energy into negative frequencies"
        )
    return filt


def gaussian_taps(sigma_time: float, grid_size: int) -> np.ndarray:
    """Unit-sum Gaussian truncated at ``LOWPASS_TRUNCATION`` standard
    deviations, wrapped onto a circular grid."""
    half = int(math.floor(LOWPASS_TRUNCATION * sigma_time))
    n = np.arange(-half, half + 1)
    g = np.exp(-(n.astype(np.float64) ** 2) / (2.0 * sigma_time**2))
    taps = np.zeros(grid_size)
    np.add.at(taps, n % grid_size, g)
    return taps / taps.sum()


def design_lowpass(sigma_time: float, grid_size: int) -> AnalyticFilter:
    """Gaussian lowpass with time-domain standard deviation ``sigma_time``
    samples, unit DC gain."""
    if sigma_time <= 0:
        raise ValueError("sigma_time must be positive")
    taps = gaussian_taps(sigma_time, grid_size)
    return AnalyticFilter(
        taps_freq=np.fft.fft(taps),
        center_log_freq=-math.inf,
        bandwidth_octaves=math.nan,
        kind="lowpass",
        sigma=1.0 / (2.0 * math.pi * sigma_time),
    )


def _realize(filt: AnalyticFilter, grid_size: int, step: int) -> np.ndarray:
    if filt.kind == "lowpass":
        sigma_time = 1.0 / (2.0 * math.pi * filt.sigma) / step
        if sigma_time * LOWPASS_TRUNCATION < 0.5:
            return np.ones(grid_size, dtype=np.complex128)
        return np.fft.fft(gaussian_taps(sigma_time, grid_size))
    resp = _normalized_morlet(np.fft.fftfreq(grid_size), filt.center_freq * step, filt.sigma * step)
    return resp.astype(np.complex128)


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Ordered bandpass filters (descending center) plus a lowpass.

    ``filters`` holds the constant-Q wavelets followed by the
    constant-bandwidth low-frequency fillers.  ``nominal`` gives, for each
    wavelet, the nominal log-frequency (``m / Q`` for time banks, the integer
    log-quefrency for frequency banks); fillers carry ``nan``.
    """

    filters: list[AnalyticFilter]
    q_factor: int
    j_max: int
    lowpass: AnalyticFilter
    low_freq_fillers: list[AnalyticFilter] = field(default_factory=list)
    delta: float = DEFAULT_DELTA
    measured_delta: float = 0.0
    t_scale: float = 0.0
    f_scale: float = 0.0
    q_grid: int = 0

    @property
    def wavelets(self) -> list[AnalyticFilter]:
        return self.filters[: len(self.filters) - len(self.low_freq_fillers)]

    @property
    def grid_size(self) -> int:
        return self.lowpass.grid_size

    def __len__(self) -> int:
        return len(self.filters)

    def matrix(self) -> np.ndarray:
        """``[filter, frequency]`` responses (cached, do not modify)."""
        return self._matrix

    @cached_property
    def _matrix(self) -> np.ndarray:
        return np.stack([f.taps_freq for f in self.filters])

    @property
    def center_log_freqs(self) -> np.ndarray:
        return np.array([f.center_log_freq for f in self.filters])

    @property
    def nominal(self) -> np.ndarray:
        out = np.full(len(self.filters), np.nan)
        for i, f in enumerate(self.wavelets):
            out[i] = f.index / self.q_factor if self.f_scale == 0 else f.index
        return out

    def littlewood_paley(self) -> np.ndarray:
        """``|phi_hat|^2 + sum |psi_hat|^2`` on the bank's grid."""
        lp = np.abs(self.lowpass.taps_freq) ** 2
        for f in self.filters:
            lp = lp + np.abs(f.taps_freq) ** 2
        return lp

    def passband(self) -> np.ndarray:
        """Mask of grid frequencies between the lowest and highest bandpass
        centers, where the lower frame bound is asserted."""
        freqs = np.fft.fftfreq(self.grid_size)
        centers = [f.center_freq for f in self.filters]
        mask = (freqs >= min(centers)) & (freqs <= max(centers))
        if not mask.any():
            mask[int(np.argmin(np.abs(freqs - centers[0])))] = True
        return mask

    def frame_bounds(self) -> tuple[float, float]:
        """``(A, B)``: minimum of the Littlewood-Paley sum over the passband
        and its maximum over all frequencies."""
        lp = self.littlewood_paley()
        return float(lp[self.passband()].min()), float(lp.max())

    def frame_delta(self) -> float:
        lower, upper = self.frame_bounds()
        return max(1.0 - lower, upper - 1.0)


def _filler_centers(lowest_center: float, sigma: float, count: int) -> list[float]:
    # Linear spacing at the -3 dB crossing distance, stopping where a filler
    # would no longer be analytic.
    spacing = 2.0 * _SQRT_LN2 * sigma
    out = []
    for i in range(1, count + 1):
        center = lowest_center - i * spacing
        if center < MIN_CENTER_OVER_SIGMA * sigma:
            break
        out.append(center)
    return out


def _time_bank_layout(q_factor: int, t_scale: float) -> tuple[int, list[tuple[int, float]], list[float], float, float]:
    """Grid-independent layout: ``(J, [(m, center)], filler centers,
    filler sigma, lowpass time std)``."""
    if q_factor < 1 or int(q_factor) != q_factor:
        raise ValueError(f"q_factor must be an integer >= 1, got {q_factor}")
    if t_scale < 2 * q_factor:
        raise ValueError(f"t_scale must be at least 2*Q = {2 * q_factor}, got {t_scale}")
    j_max = int(math.floor(math.log2(t_scale / q_factor) + 1e-9))
    xi_max = max_center_freq(q_factor)
    wavelets = []
    for j in range(1, j_max + 1):
        for k in range(q_factor):
            m = -j * q_factor - k
            wavelets.append((m, xi_max * 2.0 ** ((m + q_factor) / q_factor)))
    sigma_min = relative_bandwidth(q_factor) * wavelets[-1][1]
    fillers = _filler_centers(wavelets[-1][1], sigma_min, q_factor - 1)
    lowest = fillers[-1] if fillers else wavelets[-1][1]
    # Lowpass frequency std at half the lowest bandpass center: it fills the
    # band below that filter while adding < 2% to the sum at its center.
    sigma_time = 1.0 / (math.pi * lowest)
    return j_max, wavelets, fillers, sigma_min, sigma_time


def min_grid_size(q_factor: int, t_scale: float) -> int:
    """Smallest power-of-two grid holding ``T`` samples and the full
    truncated lowpass."""
    *_, sigma_time = _time_bank_layout(q_factor, t_scale)
    support = 2 * int(math.floor(LOWPASS_TRUNCATION * sigma_time)) + 1
    return next_pow2(int(math.ceil(max(t_scale, support))))


def default_delta(q_factor: int) -> float:
    return LOW_Q_DELTA.get(int(q_factor), DEFAULT_DELTA)


def _time_bank(q_factor: int, t_scale: float, grid_size: int, delta: float | None) -> FilterBank:
    j_max, wavelet_layout, filler_centers, sigma_min, sigma_time = _time_bank_layout(q_factor, t_scale)
    if not is_pow2(grid_size):
        raise ValueError(f"grid_size must be a power of two, got {grid_size}")
    minimum = min_grid_size(q_factor, t_scale)
    if grid_size < minimum:
        raise ValueError(
            f"grid of {grid_size} samples cannot support T = {t_scale} at Q = {q_factor}; "
            f"minimum grid size is {minimum}"
        )
    if delta is None:
        delta = default_delta(q_factor)
    wavelets = [design_morlet(c, q_factor, grid_size, index=m) for m, c in wavelet_layout]
    fillers = [design_morlet(c, 0, grid_size, sigma=sigma_min) for c in filler_centers]
    bank = FilterBank(
        filters=wavelets + fillers,
        q_factor=q_factor,
        j_max=j_max,
        lowpass=design_lowpass(sigma_time, grid_size),
        low_freq_fillers=fillers,
        delta=delta,
        t_scale=t_scale,
    )
    measured = bank.frame_delta()
    object.__setattr__(bank, "measured_delta", measured)
    if measured > delta:
        raise ValueError(f"Littlewood-Paley deviation {measured:.3f} exceeds delta = {delta}")
    return bank


def build_first_order_bank(
    q_factor: int, t_scale: float, grid_size: int, delta: float | None = None
) -> FilterBank:
    """Constant-Q Morlet bank with ``J = floor(log2(T/Q))`` octaves of ``Q``
    wavelets, up to ``Q - 1`` constant-bandwidth fillers and a Gaussian
    lowpass.

    Parameters
    ----------
    q_factor : int
        Wavelets per octave.
    t_scale : float
        Averaging scale ``T`` in samples, at least ``2 * q_factor``.
    grid_size : int
        Power-of-two frequency grid, at least ``min_grid_size(Q, T)``.
    delta : float, optional
        Littlewood-Paley tolerance; defaults to 0.15 (looser for Q < 4).

    Raises
    ------
    ValueError
        If the grid is too small (the message names the minimum) or the
        measured Littlewood-Paley deviation exceeds ``delta``.
    """
    return _time_bank(q_factor, t_scale, grid_size, delta)


def build_second_order_bank(t_scale: float, grid_size: int, delta: float | None = None) -> FilterBank:
    """Q = 1 bank of ``floor(log2 T)`` modulation wavelets."""
    return _time_bank(1, t_scale, grid_size, delta)


def frequency_lowpass_sigma(f_octaves: float, q_grid: int) -> float:
    """Standard deviation in bins of the Gaussian whose -3 dB width is
    ``f_octaves`` octaves."""
    return f_octaves * q_grid / (2.0 * _SQRT_LN2)


def frequency_grid_size(f_octaves: float, q_grid: int, n_bins: int) -> int:
    """Zero-padded log-frequency grid long enough that the widest
    log-frequency filter does not wrap around onto the channels."""
    ell_min = -int(math.floor(math.log2(f_octaves) + 1e-9))
    lowest = max_center_freq(1) * 2.0**ell_min / q_grid
    sigma_bins = 1.0 / (2.0 * math.pi * relative_bandwidth(1) * lowest)
    sigma_bins = max(sigma_bins, LOWPASS_TRUNCATION / SUPPORT_SIGMAS * frequency_lowpass_sigma(f_octaves, q_grid))
    return next_pow2(n_bins + 2 * int(math.ceil(SUPPORT_SIGMAS * sigma_bins)))


def build_frequency_bank(
    f_octaves: float,
    q_grid: int,
    grid_size: int | None = None,
    n_bins: int | None = None,
) -> FilterBank:
    """Q = 1 wavelets along the log-frequency axis plus the lowpass of width
    ``f_octaves``.

    Log-quefrencies are the integers ``ell`` with ``1/Q <= 2**-ell <= F``.
    The wavelet for ``ell`` is centered at ``xi * 2**ell / Q`` cycles per bin,
    with ``xi`` the highest Nyquist-safe Q = 1 center, so ``ell = log2 Q`` maps
    to the top of the axis.

    Parameters
    ----------
    f_octaves : float
        Maximum log-frequency scale ``F`` (octaves), at least 1.
    q_grid : int
        Bins per octave of the scalogram.
    grid_size : int, optional
        Zero-padded length of the log-frequency axis.
    n_bins : int, optional
        Number of scalogram channels; ``F * Q`` may not exceed it.
    """
    if f_octaves < 1:
        raise ValueError(f"F must be at least 1 octave, got {f_octaves}")
    if n_bins is not None and f_octaves * q_grid > n_bins:
        raise ValueError(
            f"F = {f_octaves} octaves exceeds the log-frequency axis ({n_bins / q_grid:.3g} octaves)"
        )
    ell_min = -int(math.floor(math.log2(f_octaves) + 1e-9))
    ell_max = int(math.floor(math.log2(q_grid) + 1e-9))
    xi = max_center_freq(1)
    if grid_size is None:
        grid_size = frequency_grid_size(f_octaves, q_grid, n_bins or 1)
    wavelets = []
    for ell in range(ell_max, ell_min - 1, -1):
        wavelets.append(design_morlet(xi * 2.0**ell / q_grid, 1, grid_size, index=ell))
    lowpass = design_lowpass(frequency_lowpass_sigma(f_octaves, q_grid), grid_size)
    bank = FilterBank(
        filters=wavelets,
        q_factor=1,
        j_max=len(wavelets),
        lowpass=lowpass,
        f_scale=f_octaves,
        q_grid=q_grid,
    )
    object.__setattr__(bank, "measured_delta", bank.frame_delta())
    object.__setattr__(bank, "delta", max(DEFAULT_DELTA, bank.measured_delta))
    return bank


def lowpass_width_octaves(bank: FilterBank) -> float:
    """Width of the log-frequency lowpass taps at 1/sqrt(2) of their peak
    (-3 dB), in octaves."""
    taps = np.fft.fftshift(np.real(np.fft.ifft(bank.lowpass.taps_freq)))
    n = np.arange(taps.size) - taps.size // 2
    peak = taps.max()
    above = n[taps >= peak / math.sqrt(2.0)]
    # Linear interpolation at both edges.
    width = float(above[-1] - above[0])
    for edge, direction in ((above[-1], 1), (above[0], -1)):
        i = edge + taps.size // 2
        a, b = taps[i], taps[i + direction]
        width += (a - peak / math.sqrt(2.0)) / (a - b)
    return width / bank.q_grid


@dataclass(frozen=True, eq=False)
class JointWavelet:
    """Separable wavelet ``g_mu[n] * f_{ell,s}[m]``.

    ``ell`` is ``-inf`` for the frequency-lowpass row, which exists only for
    ``spin = +1``.  ``taps_time`` and ``taps_freq_axis`` are frequency
    responses (time grid and zero-padded log-frequency grid respectively).
    """

    mu: float
    ell: float
    spin: int
    taps_time: np.ndarray
    taps_freq_axis: np.ndarray
    mu_index: int
    fr_index: int
    log2_freq: float
    log2_quefrency: float
    time_filter: AnalyticFilter | None = None
    freq_filter: AnalyticFilter | None = None

    def spatial(self, n_time: int | None = None, n_freq: int | None = None) -> np.ndarray:
        """Realized 2-D taps, shape ``[time, log-frequency]``, circular."""
        g = np.fft.ifft(self.taps_time)
        f = np.fft.ifft(self.taps_freq_axis)
        out = np.outer(g, f)
        return out[:n_time, :n_freq]


def frequency_axis_filters(freq_bank: FilterBank) -> list[tuple[float, int, np.ndarray, float, AnalyticFilter]]:
    """``(ell, spin, response, log2 quefrency in cycles/octave, filter)`` for
    the lowpass row followed by both spins of each wavelet.

    The spin -1 response is the reflected spin +1 response.
    """
    q = freq_bank.q_grid
    rows = [(-math.inf, 1, freq_bank.lowpass.taps_freq, -math.inf, freq_bank.lowpass)]
    for f in freq_bank.filters:
        up = f.taps_freq
        down = np.roll(up[::-1], 1)
        quef = f.center_log_freq + math.log2(q)
        rows.append((float(f.index), 1, up, quef, f))
        rows.append((float(f.index), -1, down, quef, f))
    return rows


def build_joint_filters(second_order: FilterBank, freq_bank: FilterBank) -> list[JointWavelet]:
    """Cartesian product ``mu x (ell, spin)`` with a single lowpass row.

    The position in the returned list is the flat filter number.
    """
    if second_order.grid_size < 2 or freq_bank.grid_size < 2:
        raise ValueError("incompatible grids")
    rows = frequency_axis_filters(freq_bank)
    out = []
    for mu_index, g in enumerate(second_order.wavelets):
        for fr_index, (ell, spin, resp, quef, ffilt) in enumerate(rows):
            out.append(
                JointWavelet(
                    mu=float(g.index),
                    ell=ell,
                    spin=spin,
                    taps_time=g.taps_freq,
                    taps_freq_axis=resp,
                    mu_index=mu_index,
                    fr_index=fr_index,
                    log2_freq=g.center_log_freq,
                    log2_quefrency=quef,
                    time_filter=g,
                    freq_filter=ffilt,
                )
            )
    return out


def dump_bank(bank: FilterBank, path: str | Path, extra: dict | None = None) -> None:
    """Write ``<path>.json`` metadata and ``<path>.f32`` interleaved complex
    taps (little-endian float32, filters in bank order, lowpass last)."""
    path = Path(path)
    meta = {
        "format": "jtfs-filterbank",
        "version": 1,
        "Q": bank.q_factor,
        "T": bank.t_scale,
        "F": bank.f_scale,
        "J": bank.j_max,
        "delta": bank.delta,
        "measured_delta": bank.measured_delta,
        "grid_size": bank.grid_size,
        "filters": [
            {
                "index": f.index,
                "kind": f.kind,
                "center_log_freq": _finite_or_none(f.center_log_freq),
                "bandwidth_octaves": _finite_or_none(f.bandwidth_octaves),
                "sigma": f.sigma,
            }
            for f in bank.filters + [bank.lowpass]
        ],
    }
    if extra:
        meta.update(extra)
    taps = np.stack([f.taps_freq for f in bank.filters + [bank.lowpass]])
    inter = np.empty(taps.shape + (2,), dtype="<f4")
    inter[..., 0] = taps.real
    inter[..., 1] = taps.imag
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, allow_nan=False))
    inter.tofile(path.with_suffix(".f32"))


def _finite_or_none(value: float) -> float | None:
    return value if math.isfinite(value) else None
