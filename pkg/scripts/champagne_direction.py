"""Harmonic measure and Agmon distance at the champagne pole as bubbles multiply."""

import argparse

from agmonlab.bounds import BubbleMeasureCache
from agmonlab.scenarios import champagne, radius_sum, solve_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--counts", default="4,8,16,32")
    ap.add_argument("--radius-sum", type=float, default=0.8)
    ap.add_argument("--law", default="equal", choices=["equal", "geometric"])
    ap.add_argument("--alphas", default="1.5,2,4,10")
    args = ap.parse_args()

    alphas = [float(a) for a in args.alphas.split(",")]
    print("count,radius_sum,rho," + ",".join(f"omega_{a:g}" for a in alphas) + ",omega_full")
    for count in (int(c) for c in args.counts.split(",")):
        sc = champagne(count, args.law, args.radius_sum)
        st = solve_scenario(sc)
        idx = st.grid.nearest_node(sc.query_points[0])
        cache = BubbleMeasureCache(st.dist)
        om = [cache.at(a, idx) for a in alphas]
        print(f"{count},{radius_sum(sc):.6g},{st.dist.rho.values[idx]:.6g},"
              + ",".join(f"{w:.6g}" for w in om) + f",{st.omega_full.values[idx]:.6g}", flush=True)


if __name__ == "__main__":
    main()
