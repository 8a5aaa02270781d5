"""Texture synthesis by gradient descent on ``E(y) = ||Phi y - Phi x||^2``.

``Phi`` is any of the scattering transforms.  Gradients come from the
plan's reverse pass; the optimizer is momentum gradient descent with a bold
driver: the learning rate grows after an accepted step and shrinks after a
step that increased ``E``, which is then undone.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .scattering import ScatteringConfig, ScatteringOutput, get_plan

CHECKPOINT_VERSION = 1
_MAGIC = b"JTFSCKPT"


class SynthesisError(RuntimeError):
    """Numerical failure during synthesis; ``stage`` names where it happened."""

    def __init__(self, message: str, stage: str = "", history: list | None = None):
        super().__init__(f"[{stage}] {message}" if stage else message)
        self.stage = stage
        self.history = history or []


@dataclass(frozen=True)
class OptimizerConfig:
    """Bold-driver momentum descent parameters."""

    grow: float = 1.1
    shrink: float = 0.5
    momentum: float = 0.9
    initial_rate_scale: float = 0.1
    divergence_factor: float = 10.0
    divergence_patience: int = 5


@dataclass
class SynthesisState:
    """Everything needed to continue a run bit-exactly.

    ``error_history`` holds ``E`` after each accepted step (index 0 is the
    initial point); ``trial_history`` holds every evaluated ``E`` with an
    accepted flag.
    """

    current: np.ndarray
    velocity: np.ndarray
    learning_rate: float
    momentum_coeff: float
    error_history: list[float]
    rng_seed: int
    config: ScatteringConfig
    target: np.ndarray
    iteration: int = 0
    trial_history: list[tuple[float, bool]] = field(default_factory=list)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    target_energy: float = 0.0
    diverging: int = 0

    @property
    def relative_error(self) -> float:
        return self.error_history[-1] / self.target_energy if self.target_energy > 0 else 0.0


# ---------------------------------------------------------------------------
# Objective


def _residuals(out: ScatteringOutput, target: ScatteringOutput):
    r1 = out.s1 - target.s1
    r2 = None
    if out.s2_time is not None:
        r2 = out.s2_time - target.s2_time
    elif out.s2_joint is not None:
        r2 = out.s2_joint - target.s2_joint
    return r1, r2


def output_energy(out: ScatteringOutput) -> float:
    """``||Phi x||^2``: plain sum of squares of all coefficients."""
    return float(np.sum(out.flat() ** 2))


def scattering_gradient(y, target: ScatteringOutput, cfg: ScatteringConfig) -> tuple[float, np.ndarray]:
    """Return ``E = ||Phi y - target||^2`` and ``dE/dy``."""
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise SynthesisError("non-finite samples in the iterate", stage="input")
    plan = get_plan(cfg, y.size)
    out, tape = plan.forward(y, want_tape=True)
    if not np.all(np.isfinite(tape["u1"])):
        raise SynthesisError("non-finite first-order modulus", stage="first order")
    if out.s1.shape != target.s1.shape:
        raise SynthesisError(f"target shape {target.s1.shape} does not match {out.s1.shape}", stage="target")
    r1, r2 = _residuals(out, target)
    energy = float(np.sum(r1**2) + (0.0 if r2 is None else np.sum(r2**2)))
    if not math.isfinite(energy):
        raise SynthesisError("non-finite objective", stage="second order")
    grad = plan.backward(tape, 2.0 * r1, None if r2 is None else 2.0 * r2)
    if not np.all(np.isfinite(grad)):
        raise SynthesisError("non-finite gradient", stage="reverse pass")
    return energy, grad


# ---------------------------------------------------------------------------
# Initialization


def init_from_s1(target_s1: np.ndarray, length: int, seed: int, cfg: ScatteringConfig) -> np.ndarray:
    """Gaussian noise whose expected first-order coefficients match ``target_s1``.

    Each channel's time-averaged coefficient ``a`` is turned into a band power
    ``(4/pi) a**2`` (the mean of a Rayleigh variable is ``sqrt(pi)/2`` times
    its rms) spread uniformly over the channel's -3 dB passband.
    """
    target_s1 = np.asarray(target_s1, dtype=np.float64)
    if target_s1.ndim == 2:
        levels = target_s1.mean(axis=0)
    else:
        levels = target_s1.reshape(-1)
    plan = get_plan(cfg, length)
    if levels.size != plan.n_lambda:
        raise ValueError(f"target has {levels.size} channels, the bank has {plan.n_lambda}")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(length)
    psd = np.zeros(length)
    for filt, a in zip(plan.bank.filters, levels):
        if a <= 0:
            continue
        resp2 = np.abs(filt.resample(length, 1)) ** 2
        band = resp2 >= 0.5
        if not np.any(band):
            band = resp2 == resp2.max()
        psd[band] = length * (4.0 / math.pi) * a**2 / np.sum(resp2)
    half = length // 2
    sym = psd.copy()
    sym[half + 1 :] = psd[1 : length - half][::-1]
    spec = sfft.fft(noise) * np.sqrt(sym)
    return np.real(sfft.ifft(spec))


# ---------------------------------------------------------------------------
# Optimizer


def start_state(
    target_x,
    cfg: ScatteringConfig,
    seed: int = 0,
    init: np.ndarray | None = None,
    optimizer: OptimizerConfig | None = None,
) -> SynthesisState:
    target_x = np.asarray(target_x, dtype=np.float64)
    optimizer = optimizer or OptimizerConfig()
    plan = get_plan(cfg, target_x.size)
    target = plan.forward(target_x)
    y0 = init_from_s1(target.s1, target_x.size, seed, cfg) if init is None else np.array(init, dtype=np.float64)
    e0, g0 = scattering_gradient(y0, target, cfg)
    gnorm = float(np.linalg.norm(g0))
    xnorm = float(np.linalg.norm(target_x))
    lr = optimizer.initial_rate_scale * xnorm / gnorm if gnorm > 0 else optimizer.initial_rate_scale
    return SynthesisState(
        current=y0,
        velocity=np.zeros_like(y0),
        learning_rate=lr,
        momentum_coeff=optimizer.momentum,
        error_history=[e0],
        rng_seed=seed,
        config=cfg,
        target=target_x,
        trial_history=[(e0, True)],
        optimizer=optimizer,
        target_energy=output_energy(target),
    )


def resume(state: SynthesisState, more_iters: int) -> SynthesisState:
    """Run ``more_iters`` further iterations; each evaluates one trial step."""
    if more_iters < 0:
        raise ValueError("more_iters must be nonnegative")
    if more_iters == 0:
        return state
    cfg = state.config
    opt = state.optimizer
    target = get_plan(cfg, state.target.size).forward(state.target)
    y = state.current.copy()
    v = state.velocity.copy()
    lr = state.learning_rate
    e_cur, grad = scattering_gradient(y, target, cfg)
    history = list(state.error_history)
    trials = list(state.trial_history)
    diverging = state.diverging
    for _ in range(more_iters):
        v_new = state.momentum_coeff * v - lr * grad
        y_new = y + v_new
        e_new, g_new = scattering_gradient(y_new, target, cfg)
        if e_new <= e_cur:
            y, v, grad, e_cur = y_new, v_new, g_new, e_new
            lr *= opt.grow
            history.append(e_new)
            trials.append((e_new, True))
            diverging = diverging + 1 if e_new > opt.divergence_factor * history[0] else 0
            if diverging >= opt.divergence_patience:
                raise SynthesisError("objective diverged", stage="optimizer", history=history)
        else:
            lr *= opt.shrink
            v = np.zeros_like(v)
            trials.append((e_new, False))
    return SynthesisState(
        current=y,
        velocity=v,
        learning_rate=lr,
        momentum_coeff=state.momentum_coeff,
        error_history=history,
        rng_seed=state.rng_seed,
        config=cfg,
        target=state.target,
        iteration=state.iteration + more_iters,
        trial_history=trials,
        optimizer=opt,
        target_energy=state.target_energy,
        diverging=diverging,
    )


def synthesize(
    target_x, cfg: ScatteringConfig, max_iters: int, seed: int = 0, init: np.ndarray | None = None
) -> tuple[np.ndarray, list[float]]:
    """Synthesize a signal with the same scattering coefficients as ``target_x``.

    Returns the final signal and ``E`` after each accepted step.
    """
    if max_iters < 0:
        raise ValueError("max_iters must be nonnegative")
    state = resume(start_state(target_x, cfg, seed, init), max_iters)
    return state.current, state.error_history


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(state: SynthesisState, path: str) -> None:
    """Write a JSON header line followed by float32 ``current`` and
    ``velocity`` and then float64 copies of ``current``, ``velocity`` and
    the target, all little-endian.  The float64 section makes resumption
    bit-exact."""
    n = state.current.size
    header = {
        "version": CHECKPOINT_VERSION,
        "config": state.config.to_dict(),
        "iteration": state.iteration,
        "learning_rate": state.learning_rate.hex(),
        "learning_rate_value": state.learning_rate,
        "momentum_coeff": state.momentum_coeff,
        "seed": state.rng_seed,
        "length": n,
        "target_length": state.target.size,
        "error_history": [e.hex() for e in state.error_history],
        "trial_history": [[e.hex(), ok] for e, ok in state.trial_history],
        "target_energy": state.target_energy.hex(),
        "diverging": state.diverging,
        "optimizer": vars(state.optimizer),
        "sections": ["current:f32", "velocity:f32", "current:f64", "velocity:f64", "target:f64"],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for arr, dt in (
            (state.current, "<f4"),
            (state.velocity, "<f4"),
            (state.current, "<f8"),
            (state.velocity, "<f8"),
            (state.target, "<f8"),
        ):
            fh.write(np.asarray(arr).astype(dt).tobytes())
    os.replace(tmp, path)


def load_checkpoint(path: str) -> SynthesisState:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        if raw[:8] != _MAGIC:
            raise ValueError("bad magic")
        hlen = int.from_bytes(raw[8:16], "little")
        header = json.loads(raw[16 : 16 + hlen].decode())
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported version {header.get('version')}")
        n, m = int(header["length"]), int(header["target_length"])
        body = raw[16 + hlen :]
        expected = 4 * n * 2 + 8 * n * 2 + 8 * m
        if len(body) != expected:
            raise ValueError(f"payload has {len(body)} bytes, expected {expected}")
        off = 8 * n
        current = np.frombuffer(body, "<f8", n, off).copy()
        velocity = np.frombuffer(body, "<f8", n, off + 8 * n).copy()
        target = np.frombuffer(body, "<f8", m, off + 16 * n).copy()
        f32 = np.frombuffer(body, "<f4", n, 0)
        if not np.array_equal(f32, current.astype("<f4")):
            raise ValueError("float32 and float64 sections disagree")
        return SynthesisState(
            current=current,
            velocity=velocity,
            learning_rate=float.fromhex(header["learning_rate"]),
            momentum_coeff=float(header["momentum_coeff"]),
            error_history=[float.fromhex(e) for e in header["error_history"]],
            rng_seed=int(header["seed"]),
            config=ScatteringConfig(**header["config"]),
            target=target,
            iteration=int(header["iteration"]),
            trial_history=[(float.fromhex(e), bool(ok)) for e, ok in header["trial_history"]],
            optimizer=OptimizerConfig(**header["optimizer"]),
            target_energy=float.fromhex(header["target_energy"]),
            diverging=int(header["diverging"]),
        )
    except (OSError, ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise SynthesisError(f"corrupted checkpoint {path}: {exc}", stage="checkpoint") from exc
