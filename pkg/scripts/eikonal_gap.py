"""Fast marching against graph Dijkstra: relative gap quantiles and upwind residual."""

import argparse

import numpy as np

from agmonlab.agmon import dijkstra_distance, eikonal_residual, relative_gap
from agmonlab.scenarios import CONSTRUCTORS, solve_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("scenarios", nargs="*", default=sorted(CONSTRUCTORS))
    args = ap.parse_args()

    print("scenario,max_gap,q50,q99,nodes_above_8pct,max_residual")
    for name in args.scenarios:
        st = solve_scenario(CONSTRUCTORS[name]())
        gap = relative_gap(st.dist, dijkstra_distance(st.V, st.lam, st.mask))
        f = st.mask.forbidden
        q50, q99 = np.quantile(gap[f], [0.5, 0.99])
        res = eikonal_residual(st.dist).values.max()
        print(f"{name},{np.nanmax(gap):.5f},{q50:.5f},{q99:.5f},{int((gap > 0.08).sum())},"
              f"{res:.2e}", flush=True)


if __name__ == "__main__":
    main()
