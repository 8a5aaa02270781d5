"""FFT convolution engine: boundary extension, convolution with subsampling,
complex modulus, Gaussian averaging and the separable time/log-frequency
convolution, each with an explicit adjoint.

Arrays are laid out time-last internally (``[..., time]``) so that every FFT
runs over contiguous memory; public results follow the ``[frame, channel]``
convention.  All subsampling factors are powers of two.

The inner product used for adjoints is ``<a, b> = Re sum conj(a) * b``, under
which a real-valued gradient of a loss with respect to a complex array ``z``
is ``dE/dRe(z) + 1j * dE/dIm(z)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .filters import (
    SUPPORT_SIGMAS,
    AnalyticFilter,
    FilterBank,
    JointWavelet,
    is_pow2,
)

#: Modulus gradient is zeroed where |z| < MODULUS_GUARD * max |z|.
MODULUS_GUARD = 1e-12


class EngineError(ValueError):
    """Invalid input to an engine operation."""


@dataclass(frozen=True)
class Signal:
    """Uniformly sampled 1-D sequence; all internal scales are in samples."""

    samples: np.ndarray
    sample_rate: float = 1.0

    def __post_init__(self):
        x = np.asarray(self.samples)
        if x.ndim != 1 or x.size < 2:
            raise EngineError("a signal is a 1-D array of at least two samples")
        if not np.all(np.isfinite(x)):
            raise EngineError("signal contains non-finite values")
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return self.samples.size


def as_samples(x) -> np.ndarray:
    return x.samples if isinstance(x, Signal) else Signal(np.asarray(x)).samples


@dataclass
class Scalogram:
    """Nonnegative ``values[frame, channel]`` on a common time grid.

    ``log_freqs`` holds ``log2`` of each channel's center frequency in cycles
    per sample (descending).  ``time_step`` is the frame hop in samples and
    ``offset`` the original-time position of frame 0.
    """

    values: np.ndarray
    time_step: int
    q_factor: int
    log_freqs: np.ndarray
    offset: int = 0
    native_steps: list[int] = field(default_factory=list)
    subbands: list[np.ndarray] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return self.offset + self.time_step * np.arange(self.values.shape[0])


# ---------------------------------------------------------------------------
# Boundary extension


@dataclass(frozen=True)
class Boundary:
    """Extend a length-``length`` signal to a ``grid``-point circle.

    Sample ``t`` of the original signal lands at grid position ``t + pad``.
    ``mode`` is ``"reflect"`` (symmetric, edge sample repeated), ``"zero"`` or
    ``"periodic"`` (requires ``grid == length`` and ``pad == 0``).
    """

    length: int
    grid: int
    pad: int
    mode: str = "reflect"
    index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.mode not in ("reflect", "zero", "periodic"):
            raise EngineError(f"unknown boundary mode {self.mode!r}")
        if self.length > self.grid:
            raise EngineError(
                f"signal of {self.length} samples exceeds the {self.grid}-point grid; "
                "use a larger grid or split the signal into blocks"
            )
        if self.mode == "periodic" and (self.grid != self.length or self.pad != 0):
            raise EngineError("periodic boundary needs grid == length and no padding")
        t = np.arange(self.grid) - self.pad
        if self.mode == "reflect":
            period = 2 * self.length
            r = np.mod(t, period)
            idx = np.where(r < self.length, r, period - 1 - r)
        elif self.mode == "zero":
            idx = np.where((t >= 0) & (t < self.length), t, -1)
        else:
            idx = np.mod(t, self.length)
        object.__setattr__(self, "index", idx.astype(np.int64))

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        out = np.zeros(x.shape[:-1] + (self.grid,), dtype=x.dtype)
        valid = self.index >= 0
        out[..., valid] = x[..., self.index[valid]]
        return out

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        valid = self.index >= 0
        out = np.zeros(y.shape[:-1] + (self.length,), dtype=y.dtype)
        np.add.at(out, (Ellipsis, self.index[valid]), y[..., valid])
        return out


# ---------------------------------------------------------------------------
# Convolution with subsampling


def fold_ifft(spectrum: np.ndarray, step: int) -> np.ndarray:
    """Time samples ``w[step * n]`` of ``w = ifft(spectrum)``."""
    n = spectrum.shape[-1]
    if step == 1:
        return sfft.ifft(spectrum, axis=-1)
    folded = spectrum.reshape(spectrum.shape[:-1] + (step, n // step)).sum(axis=-2)
    return sfft.ifft(folded, axis=-1) / step


def tile_fft(z: np.ndarray, step: int) -> np.ndarray:
    """Spectrum of the zero-stuffed upsampling of ``z`` by ``step``; adjoint of
    decimation composed with ``fold_ifft``'s inverse transform."""
    zh = sfft.fft(z, axis=-1)
    if step == 1:
        return zh
    return np.tile(zh, (1,) * (zh.ndim - 1) + (step,))


def convolve_subsample(y_hat: np.ndarray, h_hat: np.ndarray, step: int) -> np.ndarray:
    """``(y * h)[step * n]`` from the spectrum of ``y``."""
    return fold_ifft(y_hat * h_hat, step)


def convolve_subsample_adjoint(z_bar: np.ndarray, h_hat: np.ndarray, step: int) -> np.ndarray:
    """Spectrum of the adjoint applied to ``z_bar``; ``ifft`` gives the
    time-domain result.  Convolution by the adjoint filter ``conj(h(-t))`` is
    multiplication by ``conj(h_hat)``."""
    return tile_fft(z_bar, step) * np.conj(h_hat)


def modulus(z: np.ndarray) -> np.ndarray:
    return np.abs(z)


def modulus_backward(z: np.ndarray, u: np.ndarray, u_bar: np.ndarray) -> np.ndarray:
    """Gradient through ``u = |z|``: ``u_bar * z / |z|``, zero where
    ``|z|`` is below ``MODULUS_GUARD`` times its maximum."""
    peak = u.max() if u.size else 0.0
    safe = u > MODULUS_GUARD * peak
    out = np.zeros(z.shape, dtype=np.complex128)
    np.divide(u_bar * z, u, out=out, where=safe)
    return out


# ---------------------------------------------------------------------------
# Sampling rules


def critical_step(width: float) -> int:
    """Largest power-of-two step at which a complex band of ``width``
    cycles/sample is alias-free."""
    if width <= 0:
        return 1 << 30
    return 1 << max(0, int(math.floor(math.log2(1.0 / width) + 1e-12)))


def band_width(filt: AnalyticFilter) -> float:
    """Width of the retained band ``center +- SUPPORT_SIGMAS * sigma``."""
    return 2.0 * SUPPORT_SIGMAS * filt.sigma


def oversampled_step(width: float, oversampling: int, cap: int | None = None) -> int:
    step = max(1, critical_step(width) >> max(0, oversampling))
    if cap is not None:
        step = min(step, cap)
    return step


def first_order_step(bank: FilterBank, oversampling: int) -> int:
    """Common hop for all first-order channels: set by the widest one."""
    return oversampled_step(max(band_width(f) for f in bank.filters), oversampling)


def frame_step(t_scale: float, oversampling: int) -> int:
    """Output frame hop: the largest power of two not above ``T / 2**os``."""
    return 1 << max(0, int(math.floor(math.log2(max(t_scale, 1) / 2**oversampling) + 1e-12)))


def check_alias_free(filt: AnalyticFilter, step: int, what: str = "filter") -> None:
    top = filt.center_freq + SUPPORT_SIGMAS * filt.sigma
    if top * step > 0.5 + 1e-12:
        raise EngineError(
            f"{what} at {filt.center_freq:.4g} cycles/sample aliases on a grid with step {step}; "
            f"its band reaches {top:.4g} > {0.5 / step:.4g}"
        )


# ---------------------------------------------------------------------------
# First order


def grid_layout(length: int, t_scale: float, min_grid: int, boundary: str, step: int) -> tuple[int, int]:
    """``(grid, pad)`` for a signal of ``length`` samples: padding of about
    ``T`` rounded up to a multiple of ``step``, grid a power of two."""
    if boundary == "periodic":
        if not is_pow2(length):
            raise EngineError("periodic boundary needs a power-of-two signal length")
        if length < min_grid:
            raise EngineError(f"periodic boundary needs at least {min_grid} samples at this T")
        return length, 0
    pad = int(math.ceil(t_scale / step)) * step
    grid = max(1 << int(math.ceil(math.log2(length + 2 * pad))), min_grid)
    return grid, pad


def first_order_subbands(
    y_hat: np.ndarray, bank: FilterBank, step: int, chunk: int = 16
) -> np.ndarray:
    """Complex ``x * psi_lambda`` at hop ``step`` for every bank filter,
    shape ``[channel, time]``."""
    n = y_hat.shape[-1]
    out = np.empty((len(bank.filters), n // step), dtype=np.complex128)
    mat = bank.matrix()
    for start in range(0, mat.shape[0], chunk):
        block = mat[start : start + chunk]
        out[start : start + block.shape[0]] = fold_ifft(y_hat[None, :] * block, step)
    return out


def _fit_pad(length: int, grid: int, t_scale: float, boundary: str, step: int) -> int:
    # About T on each side, shrunk to what the bank's grid can hold.
    if boundary == "periodic":
        return 0
    pad = int(math.ceil(t_scale / step)) * step
    room = ((grid - length) // 2) // step * step
    return max(0, min(pad, room))


def _crop_frames(length: int, pad: int, step: int, n_frames_grid: int) -> slice:
    first = pad // step
    count = int(math.ceil(length / step))
    return slice(first, min(first + count, n_frames_grid))


def scalogram_direct(
    x,
    bank: FilterBank,
    oversampling: int = 1,
    boundary: str = "reflect",
) -> Scalogram:
    """``|x * psi_lambda|`` for every bank filter on one common time grid.

    The signal is extended by about ``T`` samples at each end (see
    ``Boundary``), convolved by FFT, and every channel is sampled at the hop
    of the widest channel divided by ``2**oversampling``.  Frames outside the
    original extent are cropped.
    """
    x = as_samples(x)
    step = first_order_step(bank, oversampling)
    grid = bank.grid_size
    pad = _fit_pad(x.size, grid, bank.t_scale, boundary, step)
    bnd = Boundary(x.size, grid, pad, boundary)
    y_hat = sfft.fft(bnd.apply(x.astype(np.complex128)))
    u = np.abs(first_order_subbands(y_hat, bank, step))
    keep = _crop_frames(x.size, pad, step, u.shape[-1])
    return Scalogram(
        values=np.ascontiguousarray(u[:, keep].T),
        time_step=step,
        q_factor=bank.q_factor,
        log_freqs=bank.center_log_freqs,
        offset=0,
    )


# ---------------------------------------------------------------------------
# Multirate cascade


def halfband_response(grid_size: int) -> np.ndarray:
    """One-sided complex halfband ``h``: unit gain on ``[-0.05, 0.3]``,
    raised-cosine roll-off to zero at ``-0.2`` and ``0.45`` cycles/sample.

    After filtering and keeping every other sample, ``[0, 1/4]`` maps onto
    ``[0, 1/2]`` of the coarse grid without aliasing; everything that folds
    back lands on negative frequencies, which analytic wavelets ignore.
    """
    f = np.fft.fftfreq(grid_size)
    h = np.zeros(grid_size)
    h[(f >= -0.05) & (f <= 0.3)] = 1.0
    left = (f > -0.2) & (f < -0.05)
    h[left] = 0.5 * (1 + np.cos(np.pi * (f[left] + 0.05) / 0.15))
    right = (f > 0.3) & (f < 0.45)
    h[right] = 0.5 * (1 + np.cos(np.pi * (f[right] - 0.3) / 0.15))
    return h.astype(np.complex128)


def scalogram_cascade(
    x,
    bank: FilterBank,
    oversampling: int = 1,
    boundary: str = "reflect",
) -> Scalogram:
    """Octave-recursive scalogram.

    ``a_j = (a_{j-1} * h)[2n]`` and ``d_{j,k} = (a_{j-1} * g_k)[2n]`` with
    ``g_k`` the first-octave wavelets, so octave ``j`` is produced at hop
    ``2**j``.  Those native subbands are kept in ``subbands``; each is then
    band-limited interpolated to the common first-order hop so the result is
    comparable with ``scalogram_direct``.  Low-frequency fillers are computed
    directly from the full-rate spectrum.
    """
    x = as_samples(x)
    q = bank.q_factor
    step = first_order_step(bank, oversampling)
    grid = bank.grid_size
    pad = _fit_pad(x.size, grid, bank.t_scale, boundary, step)
    bnd = Boundary(x.size, grid, pad, boundary)
    y_hat = sfft.fft(bnd.apply(x.astype(np.complex128)))
    top = bank.wavelets[:q]
    n_common = grid // step
    rows = []
    native, native_steps = [], []
    a_hat = y_hat
    for j in range(1, bank.j_max + 1):
        n_j = a_hat.shape[-1]
        octave = bank.wavelets[(j - 1) * q : j * q]
        lo = min(f.center_freq - SUPPORT_SIGMAS * f.sigma for f in octave)
        hi = max(f.center_freq + SUPPORT_SIGMAS * f.sigma for f in octave)
        center = 0.5 * (lo + hi)
        rate = 2.0**-j
        if hi - lo >= rate:
            raise EngineError(f"octave {j} is too wide for hop {2**j}")
        for g in top:
            d = fold_ifft(a_hat * g.resample(n_j), 2)
            native.append(d)
            native_steps.append(2**j)
            rows.append(_to_common_grid(d, 2**j, step, center, n_common))
        a_hat = a_hat * halfband_response(n_j)
        a_hat = a_hat.reshape(2, n_j // 2).sum(axis=0) / 2
    for f in bank.low_freq_fillers:
        rows.append(fold_ifft(y_hat * f.taps_freq, step))
    u = np.abs(np.stack(rows))
    keep = _crop_frames(x.size, pad, step, u.shape[-1])
    return Scalogram(
        values=np.ascontiguousarray(u[:, keep].T),
        time_step=step,
        q_factor=q,
        log_freqs=bank.center_log_freqs,
        native_steps=native_steps,
        subbands=native,
    )


def _to_common_grid(d: np.ndarray, native_step: int, step: int, center: float, n_common: int) -> np.ndarray:
    if native_step == step:
        return d
    if native_step < step:
        return d[:: step // native_step]
    ratio = native_step // step
    spec = np.tile(sfft.fft(d), ratio) * ratio
    f = np.fft.fftfreq(n_common) / step
    dist = np.mod(f - center + 0.5 / step, 1.0 / step) - 0.5 / step
    spec[np.abs(dist) >= 0.5 / native_step] = 0.0
    return sfft.ifft(spec)


# ---------------------------------------------------------------------------
# Averaging


def lowpass_subsample(
    env,
    lowpass: AnalyticFilter,
    t_scale: float,
    oversampling: int = 1,
    in_step: int | None = None,
) -> np.ndarray | Scalogram:
    """Average by ``phi_T`` and subsample to hop ``T / 2**oversampling``.

    ``env`` is a ``Scalogram`` or a 1-D envelope sampled at ``in_step``
    (default 1).  The envelope is extended periodically; when ``T`` is at
    least the envelope duration a single frame holding the mean is returned.
    """
    if isinstance(env, Scalogram):
        values = env.values.T
        step = env.time_step
    else:
        values = np.asarray(env, dtype=np.float64)[None, :]
        step = in_step or 1
    duration = values.shape[-1] * step
    if t_scale >= duration:
        out = values.mean(axis=-1, keepdims=True)
        out_step = duration
    else:
        out_step = max(step, frame_step(t_scale, oversampling))
        n = 1 << int(math.ceil(math.log2(values.shape[-1])))
        padded = np.zeros(values.shape[:-1] + (n,))
        padded[..., : values.shape[-1]] = values
        # Periodic extension of the envelope onto the power-of-two grid.
        rest = n - values.shape[-1]
        if rest:
            padded[..., values.shape[-1] :] = np.resize(values, values.shape[:-1] + (rest,))
        phi = lowpass.resample(n, step)
        rel = out_step // step
        out = np.real(fold_ifft(sfft.fft(padded, axis=-1) * phi, rel))
        out = out[..., : int(math.ceil(values.shape[-1] / rel))]
    if isinstance(env, Scalogram):
        return Scalogram(
            values=np.ascontiguousarray(out.T),
            time_step=out_step,
            q_factor=env.q_factor,
            log_freqs=env.log_freqs,
            offset=env.offset,
        )
    return out[0]


# ---------------------------------------------------------------------------
# Log-frequency axis


def frequency_matrix(taps_freq_axis: np.ndarray, n_channels: int) -> np.ndarray:
    """Linear convolution along the channel axis with zero extension, as a
    ``[out, in]`` matrix.

    Channels are ordered by decreasing log-frequency, channel ``i`` sitting at
    ``lambda_i = lambda_0 - i / Q``, so ``F[i', i] = f[(i - i') / Q]`` with
    ``f`` the log-frequency filter sampled every ``1/Q`` octave.
    """
    f = sfft.ifft(taps_freq_axis)
    size = f.size
    if size < 2 * n_channels - 1:
        raise EngineError("log-frequency grid shorter than twice the channel count")
    i = np.arange(n_channels)
    return f[np.mod(i[None, :] - i[:, None], size)]


def joint_step(w: JointWavelet, in_step: int, oversampling: int, cap: int) -> int:
    width = 2.0 * SUPPORT_SIGMAS * w.time_filter.sigma
    return max(in_step, oversampled_step(width, oversampling, cap))


def joint_convolve(
    values: np.ndarray,
    w: JointWavelet,
    in_step: int,
    out_step: int,
    values_hat: np.ndarray | None = None,
) -> np.ndarray:
    """Complex ``X * Psi`` for ``values[channel, time]`` sampled at
    ``in_step``; returned as ``[channel, time]`` at ``out_step``."""
    n = values.shape[-1]
    if values_hat is None:
        values_hat = sfft.fft(values, axis=-1)
    g = w.time_filter.resample(n, in_step)
    z = fold_ifft(values_hat * g, out_step // in_step)
    fmat = frequency_matrix(w.taps_freq_axis, values.shape[0])
    return fmat @ z


def joint_convolve_modulus(X: Scalogram, w: JointWavelet, oversampling: int = 1) -> Scalogram:
    """``|X * Psi_{mu,ell,s}|``: FFT along time with the ``mu`` wavelet,
    zero-extended convolution along log-frequency, complex modulus.

    The output hop is the critical hop of the time wavelet over
    ``2**oversampling`` (never finer than ``X``'s hop).
    """
    check_alias_free(w.time_filter, X.time_step, "time wavelet")
    values = X.values.T.astype(np.complex128)
    n = values.shape[-1]
    if not is_pow2(n):
        size = 1 << int(math.ceil(math.log2(n)))
        values = np.concatenate([values, np.zeros((values.shape[0], size - n))], axis=-1)
    out_step = joint_step(w, X.time_step, oversampling, X.time_step * values.shape[-1])
    y = np.abs(joint_convolve(values, w, X.time_step, out_step))
    keep = int(math.ceil(n * X.time_step / out_step))
    return Scalogram(
        values=np.ascontiguousarray(y[:, :keep].T),
        time_step=out_step,
        q_factor=X.q_factor,
        log_freqs=X.log_freqs,
        offset=X.offset,
    )
