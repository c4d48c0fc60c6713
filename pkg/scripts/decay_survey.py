"""Fitted decay constant of a single factor against the theta envelope, across sweep radii.

A stable column means the envelope tracks the true decay; a growing one means it
is too optimistic at that radius.

    python3 scripts/decay_survey.py --tau 3 --M 11 --smax 65536
"""

import argparse

import numpy as np

from wellapprox import spectrum as sp
from wellapprox.approx import DecayEnvelope, make_chi, make_profile
from wellapprox.config import default_beta
from wellapprox.mollifier import build_mollifier
from wellapprox.scales import select_block


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--tau", type=float, default=3.0)
    p.add_argument("--M", type=int, default=11)
    p.add_argument("--chi", choices=("const", "loglog"), default="const")
    p.add_argument("--smax", type=int, default=1 << 16)
    args = p.parse_args()

    profile = make_profile({"kind": "power", "tau": args.tau})
    chi = make_chi({"kind": args.chi})
    moll = build_mollifier(default_beta(profile, "slow"))
    block = select_block(args.M, chi)
    f = sp.factor_from_block(block, profile, chi, moll)
    theta = DecayEnvelope(profile, chi)
    print(f"block M={block.M} beta={block.beta_M} primes={block.primes.size} C={block.C:.6f}")
    print(f"{'S':>8} {'max|g|/theta':>14} {'argmax':>8}")
    S = 1024
    while S <= args.smax:
        s = np.arange(1, S + 1)
        ratio = np.abs(f.table(S)[S + 1:]) / theta.theta(s.astype(float))
        i = int(np.argmax(ratio))
        print(f"{S:>8} {ratio[i]:>14.6f} {int(s[i]):>8}")
        S *= 2


if __name__ == "__main__":
    main()
