"""Mel-spectrogram, time scattering and joint time-frequency scattering.

A ``ScatteringPlan`` fixes every grid, hop and filter for one configuration
and one signal length.  It runs the forward cascade

    U1 = |x * psi_lambda|                      (first order, hop s1)
    S1 = U1 * phi_T                            (frames at hop T / 2**os)
    S2 = |U1 * psi_mu| * phi_T                 (time scattering)
    S2 = |U1 * psi_mu *_lambda psi_{ell,s}| * phi_T   (joint scattering)

and its reverse pass, which propagates a gradient on (S1, S2) back to the
signal through adjoint filters and the modulus subgradient.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from . import engine as en
from .filters import (
    SUPPORT_SIGMAS,
    FilterBank,
    build_first_order_bank,
    build_frequency_bank,
    build_second_order_bank,
    design_lowpass,
    frequency_axis_filters,
    frequency_lowpass_sigma,
    max_center_freq,
    min_grid_size,
    next_pow2,
    relative_bandwidth,
)

KINDS = ("mel", "time", "joint")
#: Floor used by the log transform when the first order is identically zero.
LOG_FLOOR_FALLBACK = 1e-10


class ScatteringError(ValueError):
    """Invalid configuration or incompatible inputs."""


@dataclass(frozen=True)
class ScatteringConfig:
    """Parameters of a transform.

    ``t_scale`` is in samples and ``f_scale`` in octaves.  ``log_epsilon``
    ``None`` selects ``1e-6`` times the median nonzero first-order value.
    ``boundary`` is one of ``reflect``, ``zero`` or ``periodic``.
    """

    q_factor: int = 8
    t_scale: float = 4096
    f_scale: float = 1.0
    oversampling: int = 1
    transform_kind: str = "mel"
    transposition_invariant: bool = False
    log_epsilon: float | None = None
    boundary: str = "reflect"
    threads: int = 1

    def __post_init__(self):
        if self.transform_kind not in KINDS:
            raise ScatteringError(f"transform_kind must be one of {KINDS}, got {self.transform_kind!r}")
        if int(self.q_factor) != self.q_factor or self.q_factor < 1:
            raise ScatteringError(f"Q must be a positive integer, got {self.q_factor}")
        if self.t_scale < 2 * self.q_factor:
            raise ScatteringError(f"T = {self.t_scale} samples is below 2Q = {2 * self.q_factor}")
        if (self.transform_kind == "joint" or self.transposition_invariant) and self.f_scale < 1:
            raise ScatteringError(f"F must be at least 1 octave, got {self.f_scale}")
        if self.log_epsilon is not None and not self.log_epsilon > 0:
            raise ScatteringError("log_epsilon must be positive")
        if self.oversampling < 0:
            raise ScatteringError("oversampling must be nonnegative")
        if self.boundary not in ("reflect", "zero", "periodic"):
            raise ScatteringError(f"unknown boundary {self.boundary!r}")
        if self.threads < 1:
            raise ScatteringError("threads must be at least 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ScatteringOutput:
    """First- and second-order coefficients on a shared frame grid.

    ``s1`` is ``[frame, lambda]``; ``s2_time`` is ``[frame, lambda, mu]``
    with pruned paths held at zero and flagged by ``s2_mask``; ``s2_joint``
    is ``[frame, lambda, mu, fr]`` where ``fr`` enumerates ``fr_rows``
    (``(-inf, +1)`` first, then ``(ell, +1), (ell, -1)`` by decreasing
    ``ell``).  After the transposition-invariant step ``s1`` gains a trailing
    ``fr`` axis.
    """

    s1: np.ndarray
    s2_time: np.ndarray | None = None
    s2_joint: np.ndarray | None = None
    s2_mask: np.ndarray | None = None
    lambdas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mus: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fr_rows: list[tuple[float, int]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def n_frames(self) -> int:
        return self.s1.shape[0]

    def paths(self) -> list[tuple]:
        """Column labels of ``flat()``: ``("s1", lam[, fr])``,
        ``("time", lam, mu)`` or ``("joint", lam, mu, ell, spin)``, using
        integer positions along each axis except ``ell``/``spin``."""
        out: list[tuple] = []
        if self.s1.ndim == 2:
            out += [("s1", i) for i in range(self.s1.shape[1])]
        else:
            out += [("s1", i, j) for i in range(self.s1.shape[1]) for j in range(self.s1.shape[2])]
        if self.s2_time is not None:
            if self.s2_time.ndim == 3:
                lam, mu = np.nonzero(self.s2_mask)
                out += [("time", int(a), int(b)) for a, b in zip(lam, mu)]
            else:
                lam, mu = np.nonzero(self.s2_mask)
                out += [
                    ("time", int(a), int(b), j) for a, b in zip(lam, mu) for j in range(self.s2_time.shape[3])
                ]
        if self.s2_joint is not None:
            _, n_lam, n_mu, n_fr = self.s2_joint.shape
            for i in range(n_lam):
                for k in range(n_mu):
                    for j in range(n_fr):
                        ell, spin = self.fr_rows[j]
                        out.append(("joint", i, k, ell, spin))
        return out

    def flat(self) -> np.ndarray:
        """All coefficients as ``[frame, path]`` in ``paths()`` order."""
        blocks = [self.s1.reshape(self.n_frames, -1)]
        if self.s2_time is not None:
            lam, mu = np.nonzero(self.s2_mask)
            blocks.append(self.s2_time[:, lam, mu].reshape(self.n_frames, -1))
        if self.s2_joint is not None:
            blocks.append(self.s2_joint.reshape(self.n_frames, -1))
        return np.concatenate(blocks, axis=1)

    def energy(self) -> float:
        """Sum of squared coefficients weighted by the frame hop, comparable
        with the squared norm of the input signal."""
        hop = self.meta.get("frame_weight", 1.0)
        return float(hop * np.sum(self.flat() ** 2))


# ---------------------------------------------------------------------------
# Grids and closed-form counts


def first_order_hop(q_factor: int, oversampling: int) -> int:
    """Common first-order hop: set by the widest (top) wavelet."""
    width = 2 * SUPPORT_SIGMAS * relative_bandwidth(q_factor) * max_center_freq(q_factor)
    return en.oversampled_step(width, oversampling)


def n_fillers(q_factor: int) -> int:
    rho = 1.0 / relative_bandwidth(q_factor)
    spacing = 2.0 * math.sqrt(math.log(2.0))
    return max(0, min(q_factor - 1, int(math.floor((rho - 3.7) / spacing + 1e-12))))


def n_octaves(q_factor: int, t_scale: float) -> int:
    return int(math.floor(math.log2(t_scale / q_factor) + 1e-9))


def n_log_quefrencies(f_scale: float, q_factor: int) -> int:
    return int(math.floor(math.log2(q_factor) + 1e-9)) + int(math.floor(math.log2(f_scale) + 1e-9)) + 1


def path_counts(cfg: ScatteringConfig) -> dict:
    """Closed-form number of first- and second-order paths.

    First order: ``J Q`` wavelets plus fillers.  Second-order wavelets
    ``mu = -j``, ``1 <= j <= floor(log2 T)``, are kept when alias-free on the
    first-order grid, i.e. ``j >= 1 + log2 s1``.  Time scattering further
    keeps ``(lambda, mu)`` only when ``2**mu`` is below twice the bandwidth
    ``xi_lambda / Q`` of channel ``lambda``.  Joint scattering keeps every
    ``lambda`` and has ``2 n_ell + 1`` log-frequency rows.
    """
    q, t = cfg.q_factor, cfg.t_scale
    j1 = n_octaves(q, t)
    fill = n_fillers(q)
    n1 = j1 * q + fill
    counts = {"first": n1, "second": 0, "lambda": n1, "mu": 0, "ell": 0}
    if cfg.transform_kind == "mel":
        return counts
    s1 = first_order_hop(q, cfg.oversampling)
    j2 = int(math.floor(math.log2(t) + 1e-9))
    j_lo = 1 + int(round(math.log2(s1)))
    n_mu = max(0, j2 - j_lo + 1)
    counts["mu"] = n_mu
    if cfg.transform_kind == "joint":
        n_ell = n_log_quefrencies(cfg.f_scale, q)
        counts["ell"] = n_ell
        counts["second"] = n_mu * (2 * n_ell + 1) * n1
        return counts
    xi1 = max_center_freq(1)
    xiq = max_center_freq(q)
    total = 0
    for i in range(n1):
        # Channel bandwidth xi/Q; fillers share the lowest wavelet's.
        m = -q - min(i, j1 * q - 1)
        bw = xiq * 2.0 ** ((m + q) / q) / q
        j_min = max(j_lo, int(math.floor(math.log2(xi1 / bw) + 1e-12)) + 1)
        total += max(0, j2 - j_min + 1)
    counts["second"] = total
    return counts


# ---------------------------------------------------------------------------
# Plan


class ScatteringPlan:
    """All grids, hops and filters for ``cfg`` applied to ``length`` samples.

    Attributes of interest: ``grid`` (FFT size of the extended signal),
    ``pad`` (samples of extension before the signal), ``s1`` (first-order
    hop), ``hop`` (frame hop, ``None`` in global mode), ``mu_steps``.
    """

    def __init__(self, cfg: ScatteringConfig, length: int):
        self.cfg = cfg
        self.length = int(length)
        q, t = cfg.q_factor, cfg.t_scale
        os_ = cfg.oversampling
        self.s1 = first_order_hop(q, os_)
        self.global_mode = t >= length
        self.hop = None if self.global_mode else max(self.s1, en.frame_step(t, os_))
        unit = self.hop or self.s1
        min_grid = min_grid_size(q, t)
        if cfg.boundary == "periodic":
            if not en.is_pow2(length):
                raise ScatteringError("periodic boundary needs a power-of-two signal length")
            if length < min_grid:
                raise ScatteringError(
                    f"periodic boundary at Q = {q}, T = {t} needs at least {min_grid} samples"
                )
            self.pad, self.grid = 0, self.length
        else:
            self.pad = int(math.ceil(t / unit)) * unit
            self.grid = max(next_pow2(self.length + 2 * self.pad), min_grid)
        if self.grid % unit:
            raise ScatteringError("grid is not a multiple of the frame hop")
        self.boundary = en.Boundary(self.length, self.grid, self.pad, cfg.boundary)
        self.bank: FilterBank = build_first_order_bank(q, t, self.grid)
        self.n_lambda = len(self.bank.filters)
        self.n1 = self.grid // self.s1
        self.lowpass = self.bank.lowpass
        self._phi: dict[int, np.ndarray] = {}
        if self.global_mode:
            self.frame_slice = None
            self.n_frames = 1
        else:
            first = self.pad // self.hop
            count = int(math.ceil(self.length / self.hop))
            self.frame_slice = slice(first, first + count)
            self.n_frames = count

        self.mus = []
        self.mu_steps: list[int] = []
        self.mu_filters = []
        self.lambda_sets: list[np.ndarray] = []
        self.fr_rows: list[tuple[float, int]] = []
        self.fr_matrices: np.ndarray | None = None
        if cfg.transform_kind in ("time", "joint"):
            self._init_second_order()
        if cfg.transform_kind == "joint":
            self._init_joint()

    # -- setup -------------------------------------------------------------

    def _init_second_order(self):
        t = self.cfg.t_scale
        bank2 = build_second_order_bank(t, min_grid_size(1, t))
        self.bank2 = bank2
        cap = self.hop if self.hop else self.grid
        for g in bank2.wavelets:
            if (g.center_freq + SUPPORT_SIGMAS * g.sigma) * self.s1 > 0.5 + 1e-12:
                continue
            step = max(self.s1, en.oversampled_step(en.band_width(g), self.cfg.oversampling, cap))
            self.mus.append(g)
            self.mu_steps.append(step)
            self.mu_filters.append(g.resample(self.n1, self.s1))
        if self.cfg.transform_kind == "time":
            q = self.cfg.q_factor
            wav = self.bank.wavelets
            bws = np.array(
                [f.center_freq / q for f in wav] + [wav[-1].center_freq / q] * len(self.bank.low_freq_fillers)
            )
            for g in self.mus:
                self.lambda_sets.append(np.nonzero(g.center_freq < 2.0 * bws)[0])

    def _init_joint(self):
        fb = build_frequency_bank(self.cfg.f_scale, self.cfg.q_factor, n_bins=self.n_lambda)
        self.freq_bank = fb
        rows = frequency_axis_filters(fb)
        self.fr_rows = [(ell, spin) for ell, spin, *_ in rows]
        self.fr_matrices = np.stack([en.frequency_matrix(r[2], self.n_lambda) for r in rows])
        self.fr_quefrencies = np.array([r[3] for r in rows])

    def phi(self, step: int) -> np.ndarray:
        if step not in self._phi:
            self._phi[step] = self.lowpass.resample(self.grid // step, step)
        return self._phi[step]

    @property
    def frame_weight(self) -> float:
        return float(self.hop if self.hop else self.length)

    # -- averaging ---------------------------------------------------------

    def _extent(self, step: int) -> slice:
        return slice(self.pad // step, (self.pad + self.length + step - 1) // step)

    def average(self, u: np.ndarray, step: int) -> np.ndarray:
        """``u[..., grid/step]`` real -> ``[..., frames]``."""
        if self.global_mode:
            return u[..., self._extent(step)].mean(axis=-1, keepdims=True)
        spec = sfft.fft(u, axis=-1) * self.phi(step)
        out = np.real(en.fold_ifft(spec, self.hop // step))
        return out[..., self.frame_slice]

    def average_adjoint(self, s_bar: np.ndarray, step: int) -> np.ndarray:
        shape = s_bar.shape[:-1] + (self.grid // step,)
        if self.global_mode:
            ext = self._extent(step)
            out = np.zeros(shape)
            out[..., ext] = s_bar / (ext.stop - ext.start)
            return out
        full = np.zeros(s_bar.shape[:-1] + (self.grid // self.hop,))
        full[..., self.frame_slice] = s_bar
        spec = en.tile_fft(full, self.hop // step) * np.conj(self.phi(step))
        return np.real(sfft.ifft(spec, axis=-1))

    # -- forward -----------------------------------------------------------

    def first_order(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Complex subbands ``z1`` and modulus ``U1``, ``[lambda, grid/s1]``."""
        x = np.asarray(x)
        if x.shape != (self.length,):
            raise ScatteringError(f"expected {self.length} samples, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ScatteringError("non-finite input samples")
        y_hat = sfft.fft(self.boundary.apply(x))
        z1 = en.first_order_subbands(y_hat, self.bank, self.s1)
        return z1, np.abs(z1)

    def forward(self, x, want_tape: bool = False):
        z1, u1 = self.first_order(x)
        out = self.forward_from_u1(u1)
        if want_tape:
            return out, {"z1": z1, "u1": u1}
        return out

    def forward_from_u1(self, u1: np.ndarray) -> ScatteringOutput:
        """Scattering from a first-order modulus ``[lambda, grid/s1]`` on this
        plan's extended grid (e.g. an edited scalogram)."""
        s1 = self.average(u1, self.s1).T
        out = ScatteringOutput(
            s1=np.ascontiguousarray(s1),
            lambdas=self.bank.center_log_freqs,
            meta=self.meta(),
        )
        kind = self.cfg.transform_kind
        if kind == "mel":
            return out
        u1_hat = sfft.fft(u1, axis=-1)
        out.mus = np.array([g.center_log_freq for g in self.mus])
        if kind == "time":
            s2 = np.zeros((self.n_frames, self.n_lambda, len(self.mus)))
            mask = np.zeros((self.n_lambda, len(self.mus)), dtype=bool)
            for k, block in self._map(lambda k: self._time_mu(u1_hat, k), range(len(self.mus))):
                lam = self.lambda_sets[k]
                s2[:, lam, k] = block.T
                mask[lam, k] = True
            out.s2_time, out.s2_mask = s2, mask
        else:
            n_fr = len(self.fr_rows)
            s2 = np.zeros((self.n_frames, self.n_lambda, len(self.mus), n_fr))
            for k, block in self._map(lambda k: self._joint_mu(u1_hat, k), range(len(self.mus))):
                s2[:, :, k, :] = np.transpose(block, (2, 1, 0))
            out.s2_joint = s2
            out.fr_rows = list(self.fr_rows)
        return out

    def _map(self, fn, items):
        items = list(items)
        if self.cfg.threads > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.threads) as pool:
                results = list(pool.map(fn, items))
        else:
            results = [fn(i) for i in items]
        return list(zip(items, results))

    def _mu_subband(self, u1_hat: np.ndarray, k: int, rows=None) -> np.ndarray:
        spec = u1_hat if rows is None else u1_hat[rows]
        return en.fold_ifft(spec * self.mu_filters[k], self.mu_steps[k] // self.s1)

    def _time_mu(self, u1_hat: np.ndarray, k: int) -> np.ndarray:
        z = self._mu_subband(u1_hat, k, self.lambda_sets[k])
        return self.average(np.abs(z), self.mu_steps[k])

    def _joint_mu(self, u1_hat: np.ndarray, k: int) -> np.ndarray:
        """``[fr, lambda, frames]`` block for second-order wavelet ``k``."""
        z = self._mu_subband(u1_hat, k)
        out = np.empty((len(self.fr_rows), self.n_lambda, self.n_frames))
        for j, fmat in enumerate(self.fr_matrices):
            out[j] = self.average(np.abs(fmat @ z), self.mu_steps[k])
        return out

    # -- reverse -----------------------------------------------------------

    def backward(self, tape: dict, s1_bar: np.ndarray, s2_bar: np.ndarray | None) -> np.ndarray:
        """Gradient on the input samples given gradients on ``s1``
        (``[frame, lambda]``) and on ``s2_time`` / ``s2_joint``."""
        z1, u1 = tape["z1"], tape["u1"]
        u1_bar = self.average_adjoint(np.ascontiguousarray(s1_bar.T), self.s1)
        kind = self.cfg.transform_kind
        if kind != "mel" and s2_bar is not None and self.mus:
            u1_hat = sfft.fft(u1, axis=-1)
            acc = np.zeros((self.n_lambda, self.n1), dtype=np.complex128)
            fn = self._time_mu_backward if kind == "time" else self._joint_mu_backward
            for _, contrib in self._map(lambda k: fn(u1_hat, s2_bar, k), range(len(self.mus))):
                rows, spec = contrib
                if rows is None:
                    acc += spec
                else:
                    acc[rows] += spec
            u1_bar = u1_bar + np.real(sfft.ifft(acc, axis=-1))
        z1_bar = en.modulus_backward(z1, u1, u1_bar)
        mat = self.bank.matrix()
        y_bar_hat = np.zeros(self.grid, dtype=np.complex128)
        for start in range(0, self.n_lambda, 16):
            blk = slice(start, start + 16)
            y_bar_hat += np.sum(en.tile_fft(z1_bar[blk], self.s1) * np.conj(mat[blk]), axis=0)
        y_bar = np.real(sfft.ifft(y_bar_hat))
        return self.boundary.adjoint(y_bar)

    def _time_mu_backward(self, u1_hat, s2_bar, k):
        lam = self.lambda_sets[k]
        step = self.mu_steps[k]
        z = self._mu_subband(u1_hat, k, lam)
        u2 = np.abs(z)
        u2_bar = self.average_adjoint(np.ascontiguousarray(s2_bar[:, lam, k].T), step)
        z_bar = en.modulus_backward(z, u2, u2_bar)
        spec = en.tile_fft(z_bar, step // self.s1) * np.conj(self.mu_filters[k])
        return lam, spec

    def _joint_mu_backward(self, u1_hat, s2_bar, k):
        step = self.mu_steps[k]
        z = self._mu_subband(u1_hat, k)
        z_bar = np.zeros_like(z)
        for j, fmat in enumerate(self.fr_matrices):
            y = fmat @ z
            u2 = np.abs(y)
            u2_bar = self.average_adjoint(np.ascontiguousarray(s2_bar[:, :, k, j].T), step)
            z_bar += fmat.conj().T @ en.modulus_backward(y, u2, u2_bar)
        spec = en.tile_fft(z_bar, step // self.s1) * np.conj(self.mu_filters[k])
        return None, spec

    # -- bookkeeping -------------------------------------------------------

    def meta(self) -> dict:
        return {
            "config": self.cfg.to_dict(),
            "length": self.length,
            "grid": self.grid,
            "pad": self.pad,
            "first_order_hop": self.s1,
            "frame_hop": self.hop,
            "global": self.global_mode,
            "frame_weight": self.frame_weight,
            "delta": self.bank.delta,
            "measured_delta": self.bank.measured_delta,
            "mu_hops": list(self.mu_steps),
            "mu_freqs": [g.center_freq for g in self.mus],
            "fr_log_quefrencies": [float(q) for q in getattr(self, "fr_quefrencies", [])],
            "q_factor": self.cfg.q_factor,
        }

    def scalogram(self, x) -> en.Scalogram:
        """First-order modulus over the whole extended grid, as a
        ``Scalogram`` whose frame 0 sits at original time ``-pad``."""
        _, u1 = self.first_order(x)
        return en.Scalogram(
            values=np.ascontiguousarray(u1.T),
            time_step=self.s1,
            q_factor=self.cfg.q_factor,
            log_freqs=self.bank.center_log_freqs,
            offset=-self.pad,
        )


@lru_cache(maxsize=16)
def get_plan(cfg: ScatteringConfig, length: int) -> ScatteringPlan:
    return ScatteringPlan(cfg, length)


# ---------------------------------------------------------------------------
# Public transforms


def _run(x, cfg: ScatteringConfig, kind: str) -> ScatteringOutput:
    if cfg.transform_kind != kind:
        raise ScatteringError(f"configuration is for {cfg.transform_kind!r}, not {kind!r}")
    x = en.as_samples(x)
    out = get_plan(cfg, x.size).forward(x)
    if cfg.transposition_invariant:
        out = transposition_invariant(out, cfg)
    return out


def mel_spectrogram(x, cfg: ScatteringConfig) -> ScatteringOutput:
    """``|x * psi_lambda| * phi_T`` (first order only)."""
    return _run(x, cfg, "mel")


def time_scattering(x, cfg: ScatteringConfig) -> ScatteringOutput:
    """First order plus ``||x * psi_lambda| * psi_mu| * phi_T``."""
    return _run(x, cfg, "time")


def joint_scattering(x, cfg: ScatteringConfig) -> ScatteringOutput:
    """First order plus ``|U1 * Psi_{mu,ell,s}| * phi_T`` for the separable
    time/log-frequency wavelets."""
    return _run(x, cfg, "joint")


def scatter(x, cfg: ScatteringConfig) -> ScatteringOutput:
    return _run(x, cfg, cfg.transform_kind)


def scattering_from_scalogram(u1: np.ndarray, cfg: ScatteringConfig, length: int) -> ScatteringOutput:
    """Scattering of an externally supplied first-order modulus, given as
    ``[lambda, time]`` on the extended grid of ``get_plan(cfg, length)``."""
    plan = get_plan(cfg, length)
    if u1.shape != (plan.n_lambda, plan.n1):
        raise ScatteringError(f"scalogram must have shape {(plan.n_lambda, plan.n1)}, got {u1.shape}")
    return plan.forward_from_u1(u1)


# ---------------------------------------------------------------------------
# Log-frequency invariance


def lambda_average_matrix(f_scale: float, q_factor: int, n_channels: int) -> np.ndarray:
    """Zero-extended Gaussian averaging across ``f_scale`` octaves of a
    ``Q``-per-octave channel axis; the identity when ``F Q <= 1``."""
    if f_scale * q_factor <= 1:
        return np.eye(n_channels)
    sigma = frequency_lowpass_sigma(f_scale, q_factor)
    size = max(next_pow2(2 * n_channels), next_pow2(int(2 * 5 * sigma + 2)))
    phi = design_lowpass(sigma, size)
    return np.real(en.frequency_matrix(phi.taps_freq, n_channels))


def transposition_invariant(
    out: ScatteringOutput, cfg: ScatteringConfig, average: bool = True
) -> ScatteringOutput:
    """Scatter first-order coefficients along log-frequency and average
    second-order ones across ``F`` octaves.

    The first order becomes ``[frame, lambda, fr]`` with ``fr`` the
    ``(ell, spin)`` rows of the frequency bank: the lowpass row is
    ``S1 *_lambda phi_F``; bandpass rows are ``|S1 *_lambda psi_{ell,s}|``,
    followed by ``*_lambda phi_F`` unless ``average`` is false.  Joint
    second-order coefficients are averaged by ``phi_F`` along ``lambda``;
    time-scattering ones get the same treatment as the first order.
    """
    if out.s1.ndim != 2:
        raise ScatteringError("output is already transposition-invariant")
    n_lam = out.s1.shape[1]
    if cfg.f_scale * cfg.q_factor > n_lam:
        raise ScatteringError(
            f"F = {cfg.f_scale} octaves exceeds the log-frequency axis ({n_lam / cfg.q_factor:.3g} octaves)"
        )
    fb = build_frequency_bank(cfg.f_scale, cfg.q_factor, n_bins=n_lam)
    rows = frequency_axis_filters(fb)
    mats = np.stack([en.frequency_matrix(r[2], n_lam) for r in rows])
    avg = lambda_average_matrix(cfg.f_scale, cfg.q_factor, n_lam)

    def scatter_lambda(a: np.ndarray) -> np.ndarray:
        # a: [..., lambda] -> [..., lambda, fr]
        res = []
        for j, m in enumerate(mats):
            y = a @ m.T
            if j == 0:
                res.append(np.real(y))
            else:
                y = np.abs(y)
                res.append(y @ avg.T if average else y)
        return np.stack(res, axis=-1)

    new = replace(out, meta=dict(out.meta, transposition_invariant=True))
    new.fr_rows = [(ell, spin) for ell, spin, *_ in rows]
    new.s1 = scatter_lambda(out.s1)
    if out.s2_time is not None:
        moved = np.moveaxis(out.s2_time, 1, -1)  # [frame, mu, lambda]
        new.s2_time = np.moveaxis(scatter_lambda(moved), 2, 1)  # [frame, lambda, mu, fr]
    if out.s2_joint is not None:
        new.s2_joint = np.einsum("il,tlkj->tikj", avg, out.s2_joint)
        new.fr_rows = out.fr_rows
        new.meta["s1_fr_rows"] = [(ell, spin) for ell, spin, *_ in rows]
    return new


# ---------------------------------------------------------------------------
# Post-processing


def default_log_epsilon(out: ScatteringOutput) -> float:
    nz = out.s1[out.s1 > 0]
    if nz.size == 0:
        return LOG_FLOOR_FALLBACK
    return 1e-6 * float(np.median(nz))


def log_scattering(out: ScatteringOutput, log_epsilon: float | None = None) -> ScatteringOutput:
    """Elementwise ``log(coefficient + epsilon)``."""
    eps = log_epsilon if log_epsilon is not None else out.meta.get("config", {}).get("log_epsilon")
    if eps is None:
        eps = default_log_epsilon(out)
    if not eps > 0:
        raise ScatteringError("log_epsilon must be positive")
    new = replace(out, meta=dict(out.meta, log_epsilon=eps))
    new.s1 = np.log(out.s1 + eps)
    if out.s2_time is not None:
        new.s2_time = np.log(out.s2_time + eps)
    if out.s2_joint is not None:
        new.s2_joint = np.log(out.s2_joint + eps)
    return new


def relative_distance(a: ScatteringOutput, b: ScatteringOutput) -> float:
    """``||b - a|| / ||a||`` over all coefficients."""
    fa, fb = a.flat(), b.flat()
    if fa.shape != fb.shape:
        raise ScatteringError(f"shape mismatch: {fa.shape} vs {fb.shape}")
    na = np.linalg.norm(fa)
    if na == 0:
        raise ScatteringError("reference output is identically zero")
    return float(np.linalg.norm(fb - fa) / na)
