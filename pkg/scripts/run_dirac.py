"""Distance between a Dirac and its frequency-warped copy under time and
joint scattering, for a range of warp strengths."""
import argparse
from dataclasses import dataclass

from jtfs import chirp as ch
from jtfs import scattering as sc


@dataclass
class DiracExperiment:
    length: int = 8192
    q_factor: int = 8
    f_scale: float = 2.0
    slopes: tuple = (128.0, 256.0, 512.0, 1024.0)


def run(exp: DiracExperiment) -> None:
    common = dict(q_factor=exp.q_factor, t_scale=exp.length, f_scale=exp.f_scale, boundary="zero")
    cfg_time = sc.ScatteringConfig(transform_kind="time", **common)
    cfg_joint = sc.ScatteringConfig(transform_kind="joint", **common)
    print("samples/octave  time_dist  joint_dist  ratio")
    for slope in exp.slopes:
        d = ch.dirac_pair_distances(cfg_time, cfg_joint, exp.length, lambda lf, s=slope: s * (lf + 4.0))
        print(f"{slope:14g}  {d['time']:9.4f}  {d['joint']:10.4f}  {d['joint'] / d['time']:5.1f}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--slopes", type=float, nargs="+", default=list(DiracExperiment.slopes))
    a = p.parse_args()
    run(DiracExperiment(slopes=tuple(a.slopes)))
