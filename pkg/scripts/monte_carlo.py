"""Time-domain estimate of the index for the oracle controller against its exact value."""

import argparse
import sys
import time

from perflim.config import build_plant
from perflim.oracle import j_of_parameters, monte_carlo_j, optimize_finite_basis
from perflim.perf_limits import ChannelModel, theorem1_jstar


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=float, default=2.0)
    ap.add_argument("--eps", type=float, default=0.5)
    ap.add_argument("--m", type=int, default=20)
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--horizon", type=float, default=200.0)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)
    P = build_plant({"kind": "integrating_nmp", "k": args.k})
    ch = ChannelModel.lowpass(3.0, 4.0, 1.0, 0.8)
    res = optimize_finite_basis(P, ch, args.eps, args.m)
    Q, R = res.parameter.Q(), res.parameter.R()
    exact = j_of_parameters(P, ch, args.eps, Q, R)[2]
    t0 = time.perf_counter()
    mc = monte_carlo_j(P, ch, Q, R, args.horizon, args.dt, args.runs, args.seed, epsilon=args.eps)
    dt = time.perf_counter() - t0
    z = (mc.estimate - exact) / mc.stderr
    print(f"J* (closed form)   {theorem1_jstar(P, ch, args.eps).j_star:.6f}")
    print(f"J(Q, R) exact      {exact:.6f}")
    print(f"Monte Carlo        {mc.estimate:.6f} +- {mc.stderr:.6f} ({args.runs} runs, {dt:.1f} s)")
    print(f"deviation          {z:+.2f} standard errors")
    return 0 if abs(z) <= 4 else 1


if __name__ == "__main__":
    sys.exit(main())
