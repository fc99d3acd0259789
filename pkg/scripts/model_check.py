#!/usr/bin/env python3
"""Numerical check of the guessability/time model at its operating point.

Prints the closed-form values for an 8-character password with a one-in-a-
million observer target, then cross-checks them against the exact observer
enumeration, a Monte-Carlo observer run, and the deterministic typist
simulation across the memory range."""
from __future__ import annotations

import argparse
import math

from keyreconf import security_model as sm
from keyreconf import simulation as sim
from keyreconf.layout import default_shuffle_group, load_bundled_layout
from keyreconf.shuffle import FullShuffle, RegionShuffle, shuffle


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=8)
    parser.add_argument("--p-target", type=float, default=1e-6)
    parser.add_argument("--trials", type=int, default=1_000_000)
    parser.add_argument("--seed", type=int, default=2026)
    args = parser.parse_args()

    k = sm.required_shuffle_size(args.p_target, args.n)
    p = sm.guess_probability(k, args.n)
    print(f"target p <= {args.p_target:g} at n={args.n}  ->  k = {k}  (p = {p:.4e})")

    for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
        timing = sm.TimingParams(alpha=alpha)
        t = sm.expected_entry_time(args.n, k, timing)
        cps, wpm = sm.predicted_entry_rate(args.n, k, timing)
        print(f"  alpha={alpha:4.2f}  T={t:6.2f} s  {cps:5.3f} cps  {wpm:5.2f} wpm")

    exact = sim.observer_attack(FullShuffle(), [str(i) for i in range(k)],
                                args.n, mode="exact")
    print(f"observer, exact enumeration: {exact.p:.4e}")
    sampled = sim.observer_attack(FullShuffle(), [str(i) for i in range(k)],
                                  args.n, trials=args.trials, seed=args.seed,
                                  mode="sample")
    sigma = math.sqrt(p * (1 - p) / args.trials)
    print(f"observer, {args.trials:.0e} trials: {sampled.p:.4e} "
          f"(ci95 [{sampled.ci95[0]:.3e}, {sampled.ci95[1]:.3e}], "
          f"{abs(sampled.p - p) / sigma:.2f} sigma off)")

    iso = load_bundled_layout("iso105")
    shuffled = shuffle(iso, default_shuffle_group(), RegionShuffle(k), args.seed)
    typist = sim.SimulatedTypist(sm.TimingParams(alpha=1.0))
    trial = sim.simulate_entry(typist, shuffled, "password"[: args.n])
    print(f"simulated region-shuffled entry (alpha=1): {trial.duration_s:.2f} s, "
          f"k_eff {trial.mean_candidates:.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
