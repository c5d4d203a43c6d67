"""Theorem 1 along the strip axis: minimising alpha and bound value against x."""

import argparse
import math

import numpy as np

from agmonlab.bounds import BoundConfig, BubbleMeasureCache, theorem1_bound
from agmonlab.scenarios import solve_scenario, strip


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilon", type=float, default=0.01)
    ap.add_argument("--xs", default="2,4,6,8,10")
    ap.add_argument("--c-eps", type=float, default=1.0)
    ap.add_argument("--eps", type=float, default=0.1)
    args = ap.parse_args()

    xs = [float(v) for v in args.xs.split(",")]
    st = solve_scenario(strip(epsilon=args.epsilon))
    cache = BubbleMeasureCache(st.dist)
    cfg = BoundConfig(c_eps=args.c_eps, eps=args.eps)
    print("x,rho,alpha_star,omega_star,thm1,agmon_ref")
    stars = []
    for x in xs:
        idx = st.grid.nearest_node((x, 0.0))
        r = theorem1_bound((x, 0.0), st.dist, lambda a: cache.at(a, idx), cfg, st.u_sup)
        stars.append(r.alpha_star)
        ref = math.exp(-math.sqrt(2 * args.epsilon) * x)
        print(f"{x:g},{st.dist.at((x, 0.0)):.6g},{r.alpha_star:.6g},{r.omega_star:.6g},"
              f"{r.value:.6g},{ref:.6g}")
    slope = np.polyfit(np.log(xs), np.log(stars), 1)[0]
    print(f"# slope of log alpha* vs log x: {slope:.3f}")


if __name__ == "__main__":
    main()
