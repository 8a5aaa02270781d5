"""Resynthesize amplitude-modulated noise from its scattering coefficients
and report the error trajectory."""
import argparse
import time
from dataclasses import dataclass

import numpy as np

from jtfs import scattering as sc
from jtfs import synthesis as sy


@dataclass
class SynthesisExperiment:
    length: int = 2**14
    modulation_period: int = 1024
    kind: str = "joint"
    q_factor: int = 8
    t_scale: int = 4096
    f_scale: float = 2.0
    iterations: int = 100
    seed: int = 1


def run(exp: SynthesisExperiment) -> None:
    t = np.arange(exp.length)
    rng = np.random.default_rng(exp.seed)
    x = rng.standard_normal(exp.length) * (1 + 0.8 * np.sin(2 * np.pi * t / exp.modulation_period))
    cfg = sc.ScatteringConfig(
        q_factor=exp.q_factor, t_scale=exp.t_scale, f_scale=exp.f_scale, transform_kind=exp.kind, boundary="periodic"
    )
    start = time.perf_counter()
    state = sy.start_state(x, cfg, seed=exp.seed)
    print(f"iter {state.iteration:4d}  rel_err {state.relative_error:.4f}")
    while state.iteration < exp.iterations:
        state = sy.resume(state, min(10, exp.iterations - state.iteration))
        print(f"iter {state.iteration:4d}  rel_err {state.relative_error:.4f}")
    print(f"{time.perf_counter() - start:.1f} s")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--kind", default="joint", choices=["mel", "time", "joint"])
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--seed", type=int, default=1)
    a = p.parse_args()
    run(SynthesisExperiment(kind=a.kind, iterations=a.iterations, seed=a.seed))
