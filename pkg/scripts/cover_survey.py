"""Cover sums and count ratios for a two-stage exploratory schedule, one line per stage.

    python3 scripts/cover_survey.py [--next-M 3433] [--gamma 1.02]
"""

import argparse

from wellapprox import hausdorff as hd
from wellapprox.approx import make_alpha, make_chi, make_profile
from wellapprox.scales import build_schedule_slow


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--M", type=int, default=11)
    p.add_argument("--next-M", type=int, default=3433)
    p.add_argument("--gamma", type=float, default=1.02)
    args = p.parse_args()

    profile = make_profile({"kind": "power", "tau": 3.0})
    alpha = make_alpha({"kind": "power", "nu": 2.0 / 3.0})
    sched = build_schedule_slow(args.M, 2, profile, make_chi({"kind": "const"}), "exploratory",
                                next_M=[args.next_M],
                                policies=[{"policy": "min_sum"}, {"policy": "power", "gamma": args.gamma}])
    for k in (1, 2):
        c = hd.build_cover(sched, k, alpha, profile)
        print(f"k={k} primes={sched.stage_primes(k).size} cover_sum={c.cover_sum:.6g} "
              f"ratio in [{c.ratio_min:.3g}, {c.ratio_max:.3g}] contained={c.support_contained}")
    trend = hd.cover_sum_trend(sched, alpha, profile)
    print(f"trend {trend.status}: fitted exponent {trend.fitted_constant:.4g}")


if __name__ == "__main__":
    main()
