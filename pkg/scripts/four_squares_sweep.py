"""Ground state of the four-square insulator for a range of barrier heights m."""

import argparse
import math

import numpy as np

from agmonlab.scenarios import four_squares, solve_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ms", default="1e2,1e3,1e4")
    ap.add_argument("--n", type=int, default=257)
    args = ap.parse_args()

    print("m,lambda,sup_u_v10,scaled,u_at_pole,rho_at_pole")
    for m in (float(v) for v in args.ms.split(",")):
        st = solve_scenario(four_squares(m, n=args.n))
        s = float(np.abs(st.u.values[st.V.values == 10.0]).max())
        i = st.grid.nearest_node((0.5, 0.5))
        print(f"{m:g},{st.lam:.8g},{s:.6g},{s * math.sqrt(m) / math.log(m):.6g},"
              f"{st.u.values[i]:.6g},{st.dist.rho.values[i]:.6g}", flush=True)


if __name__ == "__main__":
    main()
