"""E[e^{-tau}] on the half line against e^{-x}, for the plain and time-changed walks."""

import argparse
import math

from agmonlab.scenarios import exact_1d, solve_scenario
from agmonlab.stochastic import expected_discount


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--xs", default="0.5,1,2")
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--dt", type=float, default=1e-4)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    st = solve_scenario(exact_1d())
    print("x,walk,value,stderr,exact,z")
    for k, x in enumerate(float(v) for v in args.xs.split(",")):
        for tc in (False, True):
            e = expected_discount(st.V, st.lam, st.mask, (x,), args.samples, args.dt, 1e4,
                                  args.seed + k, time_change=tc)
            ex = math.exp(-x)
            print(f"{x:g},{'changed' if tc else 'plain'},{e.value:.6g},{e.stderr:.3g},{ex:.6g},"
                  f"{(e.value - ex) / e.stderr:.2f}", flush=True)


if __name__ == "__main__":
    main()
