"""Relative distance between scattering of noise and of its circular shift,
as a function of shift size, for each transform kind."""
import argparse
from dataclasses import dataclass

import numpy as np

from jtfs import scattering as sc


@dataclass
class ShiftExperiment:
    length: int = 8192
    q_factor: int = 8
    t_scale: int = 512
    f_scale: float = 2.0
    shifts: tuple = (1, 8, 32, 64, 128, 256)
    trials: int = 5
    seed: int = 100


def run(exp: ShiftExperiment) -> None:
    rng = np.random.default_rng(exp.seed)
    signals = [rng.standard_normal(exp.length) for _ in range(exp.trials)]
    print("kind   " + "  ".join(f"c={c:<5d}" for c in exp.shifts))
    for kind in ("mel", "time", "joint"):
        cfg = sc.ScatteringConfig(
            q_factor=exp.q_factor, t_scale=exp.t_scale, f_scale=exp.f_scale, transform_kind=kind, boundary="periodic"
        )
        base = [sc.scatter(x, cfg) for x in signals]
        row = []
        for c in exp.shifts:
            row.append(max(sc.relative_distance(b, sc.scatter(np.roll(x, c), cfg)) for b, x in zip(base, signals)))
        print(f"{kind:5s}  " + "  ".join(f"{v:7.4f}" for v in row))


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--trials", type=int, default=5)
    a = p.parse_args()
    run(ShiftExperiment(trials=a.trials))
