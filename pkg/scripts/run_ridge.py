"""Chirp-rate estimates along the scalogram ridge of exponential chirps."""
import argparse
import math
import time
from dataclasses import dataclass

import numpy as np

from jtfs import chirp as ch
from jtfs import scattering as sc


@dataclass
class RidgeExperiment:
    alphas: tuple = (4.0, -2.0, 1.0, -1.0)
    length: int = 2**16
    time_unit: float = 40960.0
    mid_freq: float = 0.04
    q_factor: int = 8
    t_scale: int = 4096
    f_scale: float = 2.0


def run(exp: RidgeExperiment) -> None:
    cfg = sc.ScatteringConfig(
        q_factor=exp.q_factor, t_scale=exp.t_scale, f_scale=exp.f_scale, transform_kind="joint", boundary="zero"
    )
    plan = sc.get_plan(cfg, exp.length)
    print("alpha  points  spin_ok  rate_ok  median_alpha_hat  seconds")
    for alpha in exp.alphas:
        start = time.perf_counter()
        spec = ch.chirp_through(alpha, exp.length, exp.time_unit, exp.mid_freq)
        out = plan.forward(ch.exponential_chirp(spec))
        est = [ch.estimate_chirp_rate(out, f, lam, exp.time_unit) for f, lam in ch.ridge_points(spec, plan)]
        a_hat = np.array([a for a, _ in est])
        spin_ok = np.mean([s == -np.sign(alpha) for _, s in est])
        rate_ok = np.mean([abs(math.log2(abs(a)) - math.log2(abs(alpha))) <= 1 for a in a_hat])
        print(
            f"{alpha:5g}  {len(est):6d}  {spin_ok:7.0%}  {rate_ok:7.0%}  {np.median(a_hat):16.3f}"
            f"  {time.perf_counter() - start:7.1f}"
        )


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--alphas", type=float, nargs="+", default=list(RidgeExperiment.alphas))
    p.add_argument("--length", type=int, default=RidgeExperiment.length)
    p.add_argument("--time-unit", type=float, default=RidgeExperiment.time_unit)
    a = p.parse_args()
    run(RidgeExperiment(alphas=tuple(a.alphas), length=a.length, time_unit=a.time_unit))
