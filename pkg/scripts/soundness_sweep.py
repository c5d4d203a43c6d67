"""Bound reports at random forbidden points of each scenario, with violation counts."""

import argparse
import time

from agmonlab.bounds import bound_report, soundness_violations
from agmonlab.scenarios import CONSTRUCTORS, sample_forbidden_points, solve_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("scenarios", nargs="*", default=sorted(CONSTRUCTORS))
    ap.add_argument("--points", type=int, default=50)
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    for name in args.scenarios:
        t0 = time.perf_counter()
        st = solve_scenario(CONSTRUCTORS[name]())
        pts = sample_forbidden_points(st, args.points, args.seed)
        reps = bound_report(st, pts, n_samples=args.samples, seed=args.seed, check=False)
        bad = soundness_violations(reps)
        print(f"{name}: {len(reps)} points, {len(bad)} violations, "
              f"theorem3 valid {sum(r.delta_rho_flag for r in reps)}, "
              f"theorem4 valid {sum(r.fk_valid for r in reps)}, "
              f"{time.perf_counter() - t0:.1f}s", flush=True)
        for v in bad:
            print(f"  {v['bound']} at {v['point']}: {v['value']:.4g} < {v['u_abs']:.4g}")


if __name__ == "__main__":
    main()
