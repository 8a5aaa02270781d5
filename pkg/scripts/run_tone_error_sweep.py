"""Error of the local-tone approximation of an exponential chirp's scalogram
as a function of log-frequency, with its log-log slope."""
import argparse
from dataclasses import dataclass

import numpy as np

from jtfs import chirp as ch


@dataclass
class ToneErrorExperiment:
    alphas: tuple = (1.0, 2.0, 4.0)
    lambdas: tuple = (9.0, 9.5, 10.0, 10.5, 11.0, 11.5, 12.0)
    time_unit: float = 32768.0
    mid_freq: float = 0.04
    q_factor: int = 8


def run(exp: ToneErrorExperiment) -> None:
    print("alpha  lambda  max_abs_error  bound_shape")
    for alpha in exp.alphas:
        spec = ch.chirp_through(alpha, int(4 * exp.time_unit / alpha), exp.time_unit, exp.mid_freq)
        errs = []
        for lam in exp.lambdas:
            err, shape = ch.lemma1_check(spec, lam, exp.q_factor)
            errs.append(err)
            print(f"{alpha:5g}  {lam:6g}  {err:13.4e}  {shape:11.4e}")
        print(f"alpha {alpha:g}: slope {ch.loglog_slope(np.array(exp.lambdas), errs):.3f}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--alphas", type=float, nargs="+", default=list(ToneErrorExperiment.alphas))
    a = p.parse_args()
    run(ToneErrorExperiment(alphas=tuple(a.alphas)))
