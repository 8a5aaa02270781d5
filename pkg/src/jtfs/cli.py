"""Command-line front end.

Subcommands: ``extract``, ``synth``, ``chirp-report`` and ``plot-data``.

Exit codes: 0 success, 2 usage or configuration error, 3 unsupported WAV
encoding, 4 malformed WAV, 5 file I/O error, 6 numerical or transform
error, 7 unreadable checkpoint.
"""
from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import io as jio
from .chirp import ChirpError, chirp_through, estimate_chirp_rate, exponential_chirp, lemma1_check, ridge_points, write_csv
from .scattering import (
    ScatteringConfig,
    ScatteringError,
    get_plan,
    log_scattering,
    path_counts,
    scatter,
)

__version__ = "0.1.0"

_TRANSFORM_KEYS = {
    "transform": str,
    "Q": int,
    "T-ms": float,
    "F": float,
    "oversampling": int,
    "log": "flag",
    "transpose-invariant": "flag",
    "threads": int,
    "boundary": str,
    "log-epsilon": float,
}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(f"{self.prog}: {message}", jio.EXIT_USAGE)


def _add_transform_flags(p: argparse.ArgumentParser, default_transform: str = "mel") -> None:
    p.add_argument("--config", help="key = value file mirroring these flags; flags win")
    p.add_argument("--transform", choices=["mel", "time", "joint"], default=None)
    p.add_argument("--Q", type=int, default=None, help="wavelets per octave (default 8)")
    p.add_argument("--T-ms", dest="T_ms", type=float, default=None, help="averaging scale in ms (default 32)")
    p.add_argument("--F", type=float, default=None, help="log-frequency scale in octaves (default 1)")
    p.add_argument("--oversampling", type=int, default=None)
    p.add_argument("--log", action="store_true", default=None)
    p.add_argument("--transpose-invariant", dest="transpose_invariant", action="store_true", default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--boundary", choices=["reflect", "zero", "periodic"], default=None)
    p.add_argument("--log-epsilon", dest="log_epsilon", type=float, default=None)
    p.set_defaults(default_transform=default_transform)


def _resolve(args) -> dict:
    """Merge config-file values under command-line flags."""
    values = {
        "transform": args.default_transform,
        "Q": 8,
        "T-ms": 32.0,
        "F": 1.0,
        "oversampling": 1,
        "log": False,
        "transpose-invariant": False,
        "threads": 1,
        "boundary": "reflect",
        "log-epsilon": None,
    }
    if args.config:
        try:
            raw = jio.read_config_file(args.config)
        except OSError as exc:
            raise CliError(f"cannot read config: {exc}", jio.EXIT_IO) from exc
        except ValueError as exc:
            raise CliError(str(exc), jio.EXIT_USAGE) from exc
        for key, text in raw.items():
            kind = _TRANSFORM_KEYS.get(key)
            if kind is None:
                continue
            try:
                if kind == "flag":
                    values[key] = text.lower() in ("1", "true", "yes", "on")
                else:
                    values[key] = kind(text)
            except ValueError as exc:
                raise CliError(f"config key {key}: {exc}", jio.EXIT_USAGE) from exc
    flags = {
        "transform": args.transform,
        "Q": args.Q,
        "T-ms": args.T_ms,
        "F": args.F,
        "oversampling": args.oversampling,
        "log": args.log,
        "transpose-invariant": args.transpose_invariant,
        "threads": args.threads,
        "boundary": args.boundary,
        "log-epsilon": args.log_epsilon,
    }
    for key, val in flags.items():
        if val is not None:
            values[key] = val
    return values


def _make_config(values: dict, sample_rate: float) -> ScatteringConfig:
    t_samples = max(1, int(round(values["T-ms"] * sample_rate / 1000.0)))
    try:
        return ScatteringConfig(
            q_factor=values["Q"],
            t_scale=t_samples,
            f_scale=values["F"],
            oversampling=values["oversampling"],
            transform_kind=values["transform"],
            transposition_invariant=values["transpose-invariant"],
            log_epsilon=values["log-epsilon"],
            boundary=values["boundary"],
            threads=values["threads"],
        )
    except ScatteringError as exc:
        raise CliError(str(exc), jio.EXIT_USAGE) from exc


def _ingest(path: str):
    try:
        return jio.ingest_wav(path)
    except jio.IngestError as exc:
        raise CliError(str(exc), exc.code) from exc


# ---------------------------------------------------------------------------
# Subcommands


def cmd_extract(args) -> int:
    values = _resolve(args)
    sig = _ingest(args.input)
    cfg = _make_config(values, sig.sample_rate)
    try:
        out = scatter(sig.samples, cfg)
        if values["log"]:
            out = log_scattering(out, cfg.log_epsilon)
    except (ScatteringError, ValueError) as exc:
        raise CliError(f"[transform] {exc}", jio.EXIT_NUMERIC) from exc
    extra = {
        "creator": f"jtfs {__version__}",
        "input": os.path.basename(args.input),
        "input_sha256": jio.file_sha256(args.input),
        "sample_rate": sig.sample_rate,
        "flags": {k: v for k, v in values.items()},
        "path_counts": path_counts(cfg),
    }
    archive = jio.build_archive(out, extra)
    try:
        jio.write_archive(args.output, archive)
    except OSError as exc:
        raise CliError(f"cannot write {args.output}: {exc}", jio.EXIT_IO) from exc
    return jio.EXIT_OK


def cmd_synth(args) -> int:
    from .synthesis import SynthesisError, load_checkpoint, resume, save_checkpoint, start_state

    values = _resolve(args)
    if args.resume:
        try:
            state = load_checkpoint(args.checkpoint)
        except SynthesisError as exc:
            raise CliError(str(exc), jio.EXIT_CHECKPOINT) from exc
        sample_rate = args.sample_rate
    else:
        sig = _ingest(args.input)
        sample_rate = sig.sample_rate
        cfg = _make_config(values, sample_rate)
        try:
            state = start_state(sig.samples, cfg, seed=args.seed)
        except (SynthesisError, ScatteringError, ValueError) as exc:
            raise CliError(f"[init] {exc}", jio.EXIT_NUMERIC) from exc
    try:
        state = resume(state, args.iters)
    except SynthesisError as exc:
        raise CliError(str(exc), jio.EXIT_NUMERIC) from exc
    if args.checkpoint:
        try:
            save_checkpoint(state, args.checkpoint)
        except OSError as exc:
            raise CliError(f"cannot write checkpoint: {exc}", jio.EXIT_IO) from exc
    peak = float(np.max(np.abs(state.current))) if state.current.size else 0.0
    samples = state.current / peak if peak > 1.0 else state.current
    try:
        jio.write_wav(args.output, samples, sample_rate)
    except OSError as exc:
        raise CliError(f"cannot write {args.output}: {exc}", jio.EXIT_IO) from exc
    print(f"iterations {state.iteration} relative error {state.relative_error:.6g}")
    return jio.EXIT_OK


def _chirp_config(args) -> ScatteringConfig:
    try:
        return ScatteringConfig(
            q_factor=args.Q, t_scale=args.T, f_scale=args.F, transform_kind="joint", threads=args.threads
        )
    except ScatteringError as exc:
        raise CliError(str(exc), jio.EXIT_USAGE) from exc


def cmd_chirp_report(args) -> int:
    try:
        spec = chirp_through(args.alpha, args.duration, args.time_unit, args.mid_freq)
    except ChirpError as exc:
        raise CliError(str(exc), jio.EXIT_USAGE) from exc
    cfg = _chirp_config(args)
    plan = get_plan(cfg, spec.duration)
    out = plan.forward(exponential_chirp(spec))
    rows = []
    for frame, lam in ridge_points(spec, plan):
        sl = out.s2_joint[frame, lam]
        k, fr = np.unravel_index(int(np.argmax(sl)), sl.shape)
        ell, spin = out.fr_rows[fr]
        try:
            alpha_hat, _ = estimate_chirp_rate(out, frame, lam, spec.time_unit)
        except ChirpError:
            alpha_hat = math.nan
        ridge_law = (
            math.isfinite(alpha_hat)
            and np.sign(alpha_hat) == np.sign(args.alpha)
            and abs(math.log2(abs(alpha_hat)) - math.log2(abs(args.alpha))) <= 1
        )
        rows.append(
            (
                frame,
                lam,
                float(plan.bank.filters[lam].center_log_freq),
                int(k),
                "-inf" if not math.isfinite(ell) else ell,
                spin,
                args.alpha,
                alpha_hat,
                int(ridge_law),
            )
        )
    header = ["frame", "lambda_index", "log2_freq", "mu_index", "ell", "spin", "alpha", "alpha_hat", "ridge_law"]
    try:
        write_csv(args.output, header, rows)
        if args.tone_error_output:
            lrows = []
            for lam in np.arange(args.tone_error_min, args.tone_error_max + 1e-9, 1.0):
                err, shape = lemma1_check(spec, float(lam), cfg.q_factor)
                lrows.append((args.alpha, float(lam), err, shape))
            write_csv(args.tone_error_output, ["alpha", "lambda", "max_abs_error", "bound_shape"], lrows)
    except ChirpError as exc:
        raise CliError(str(exc), jio.EXIT_USAGE) from exc
    except OSError as exc:
        raise CliError(f"cannot write CSV: {exc}", jio.EXIT_IO) from exc
    return jio.EXIT_OK


def cmd_plot_data(args) -> int:
    if args.input:
        sig = _ingest(args.input)
        x = sig.samples
        t_samples = int(round(args.T_ms * sig.sample_rate / 1000.0)) if args.T_ms else args.T
    else:
        try:
            spec = chirp_through(args.alpha, args.duration, args.time_unit, args.mid_freq)
        except ChirpError as exc:
            raise CliError(str(exc), jio.EXIT_USAGE) from exc
        x = exponential_chirp(spec)
        t_samples = args.T
    try:
        cfg = ScatteringConfig(
            q_factor=args.Q,
            t_scale=t_samples,
            f_scale=args.F,
            transform_kind="joint" if args.joint_slice else "mel",
            threads=args.threads,
        )
        plan = get_plan(cfg, x.size)
    except ScatteringError as exc:
        raise CliError(str(exc), jio.EXIT_USAGE) from exc
    try:
        if args.joint_slice:
            frame, lam = (int(v) for v in args.joint_slice.split(","))
            out = plan.forward(x)
            if not (0 <= frame < out.n_frames and 0 <= lam < plan.n_lambda):
                raise CliError("joint slice index out of range", jio.EXIT_USAGE)
            sl = out.s2_joint[frame, lam]
            header = ["mu_index", "mu_log2_freq"] + [
                f"ell={'-inf' if not math.isfinite(e) else e};spin={s}" for e, s in out.fr_rows
            ]
            rows = [[k, math.log2(out.meta["mu_freqs"][k])] + list(sl[k]) for k in range(sl.shape[0])]
        else:
            sc = plan.scalogram(x)
            keep = (sc.times >= 0) & (sc.times < x.size)
            values = sc.values[keep]
            times = sc.times[keep]
            step = max(1, args.decimate)
            header = ["time_sample"] + [f"{lf:.6f}" for lf in sc.log_freqs]
            rows = [[int(times[i])] + list(values[i]) for i in range(0, values.shape[0], step)]
        write_csv(args.output, header, rows)
    except OSError as exc:
        raise CliError(f"cannot write CSV: {exc}", jio.EXIT_IO) from exc
    return jio.EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="jtfs", description="Scalograms and scattering transforms")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("extract", help="write a feature archive for one WAV file")
    e.add_argument("input")
    e.add_argument("--output", required=True)
    _add_transform_flags(e)
    e.set_defaults(func=cmd_extract)

    s = sub.add_parser("synth", help="synthesize a texture matching a WAV file")
    s.add_argument("input", nargs="?")
    s.add_argument("--output", required=True)
    s.add_argument("--iters", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--checkpoint", default=None)
    s.add_argument("--resume", action="store_true", help="continue from --checkpoint")
    s.add_argument("--sample-rate", dest="sample_rate", type=float, default=16000.0, help="output rate when resuming")
    _add_transform_flags(s, default_transform="joint")
    s.set_defaults(func=cmd_synth)

    for name, func, helptext in (
        ("chirp-report", cmd_chirp_report, "joint-scattering chirp-rate estimates along the ridge"),
        ("plot-data", cmd_plot_data, "scalogram or joint-slice matrices as CSV"),
    ):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--alpha", type=float, default=4.0, help="chirp rate, octaves per time unit")
        c.add_argument("--duration", type=int, default=2**16, help="samples")
        c.add_argument("--time-unit", dest="time_unit", type=float, default=40960.0, help="samples per time unit")
        c.add_argument("--mid-freq", dest="mid_freq", type=float, default=0.04, help="cycles/sample at the midpoint")
        c.add_argument("--Q", type=int, default=8)
        c.add_argument("--T", type=int, default=4096, help="averaging scale in samples")
        c.add_argument("--F", type=float, default=2.0)
        c.add_argument("--threads", type=int, default=1)
        c.add_argument("--output", required=True)
        c.set_defaults(func=func)
        if name == "chirp-report":
            c.add_argument("--tone-error-output", dest="tone_error_output", default=None)
            c.add_argument("--tone-error-min", dest="tone_error_min", type=float, default=9.0)
            c.add_argument("--tone-error-max", dest="tone_error_max", type=float, default=12.0)
        else:
            mode = c.add_mutually_exclusive_group(required=True)
            mode.add_argument("--scalogram", action="store_true")
            mode.add_argument("--joint-slice", dest="joint_slice", metavar="FRAME,LAMBDA")
            c.add_argument("--input", default=None, help="WAV file instead of a synthetic chirp")
            c.add_argument("--T-ms", dest="T_ms", type=float, default=None)
            c.add_argument("--decimate", type=int, default=1, help="keep every n-th scalogram frame")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "synth" and not args.resume and not args.input:
            raise CliError("synth needs an input WAV unless --resume is given", jio.EXIT_USAGE)
        if args.command == "synth" and args.resume and not args.checkpoint:
            raise CliError("--resume needs --checkpoint", jio.EXIT_USAGE)
        return args.func(args)
    except CliError as exc:
        print(f"jtfs: {exc}", file=sys.stderr)
        return exc.code
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
