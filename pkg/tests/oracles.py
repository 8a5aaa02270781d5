"""Independent reference implementations shared by the tests."""
import math

import numpy as np


def closed_form_morlet(n_grid, center, sigma, kappa):
    """Time-domain Morlet sampled at the integers and wrapped onto the grid.

    The continuous transform of this function is a unit Gaussian bump at
    ``center`` minus ``kappa`` times one at zero.
    """
    half = int(12 / (2 * math.pi * sigma)) + n_grid
    t = np.arange(-half, half + 1, dtype=np.float64)
    env = sigma * math.sqrt(2 * math.pi) * np.exp(-2 * math.pi**2 * sigma**2 * t**2)
    vals = env * (np.exp(2j * math.pi * center * t) - kappa)
    out = np.zeros(n_grid, dtype=np.complex128)
    np.add.at(out, (t.astype(np.int64)) % n_grid, vals)
    return out


def brute_force_kappa(n_grid, center, sigma):
    half = int(12 / (2 * math.pi * sigma)) + n_grid
    t = np.arange(-half, half + 1, dtype=np.float64)
    env = np.exp(-2 * math.pi**2 * sigma**2 * t**2)
    # Zero-mean condition on the sampled sequence: sum_t env (e^{i c t} - k) = 0.
    return float(np.real(np.sum(env * np.exp(2j * math.pi * center * t))) / np.sum(env))


def bandlimited_noise(n, lo, hi, seed):
    """Real Gaussian noise with a flat spectrum on ``[lo, hi]`` cycles/sample."""
    rng = np.random.default_rng(seed)
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n)
    spec[(f < lo) | (f > hi)] = 0
    return np.fft.irfft(spec, n)


def conv2_lambda_ascending(values, taps_time, taps_freq_axis):
    """Full 2-D circular convolution with the outer-product filter.

    ``values`` is ``[channel, time]`` with channels in decreasing
    log-frequency; the channel axis is flipped to increasing log-frequency,
    zero-extended to the filter's log-frequency grid, convolved, and flipped
    back.
    """
    m, n = values.shape
    size = taps_freq_axis.size
    grid = np.zeros((n, size), dtype=np.complex128)
    grid[:, :m] = values[::-1].T
    kernel = np.outer(np.fft.ifft(taps_time), np.fft.ifft(taps_freq_axis))
    out = np.fft.ifft2(np.fft.fft2(grid) * np.fft.fft2(kernel))
    return out[:, :m][:, ::-1].T


def impulse_train_ripple(phi_hat, period):
    """Upper bound on the relative peak deviation from the mean of an
    impulse train of the given period after filtering by ``phi_hat``."""
    n = phi_hat.size
    harmonics = np.arange(1, n // period)
    return 2.0 * float(np.sum(np.abs(phi_hat[(harmonics * (n // period)) % n]))) / abs(phi_hat[0])
