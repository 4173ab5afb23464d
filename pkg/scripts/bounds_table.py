#!/usr/bin/env python3
"""Tabulate the aggregate failure bound against n and locate the feasibility frontier.

Prints, for a grid of copy counts n, the four log2 bound terms, the total,
and the composable insecurity -- demonstrating how far from desk scale the
verbatim constants push the finite-size statement.  Then asks the solver for
the minimal feasible n at each security level s.

Usage: python3 scripts/bounds_table.py [--s S] [--delta D]
"""

import argparse
import math

from pbitqkd.bounds import (
    BoundParams,
    choose_params,
    composable_insecurity,
    protocol_failure_bound,
    relaxation_budget,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--s", type=int, default=40)
    ap.add_argument("--delta", type=float, default=0.05)
    args = ap.parse_args()
    s, delta = args.s, args.delta

    print(f"s = {s}, delta = {delta}, d = 2, d' = 4 (t = 16)")
    print()
    header = f"{'n':>12}  {'bit_sampling':>13}  {'post_select':>12}  {'phase_groups':>12}  {'phase_tail':>11}  {'log2 f':>10}  insecurity"
    print(header)
    print("-" * len(header))
    for expo in (5, 6, 8, 10, 12, 14, 16, 18, 20):
        n = 10**expo
        sol = choose_params(s, delta, n=n)
        m_x = min(sol.m_x, n // 4)
        m_z = sol.m_z if (sol.m_z and sol.m_z + m_x < n) else (n - m_x) // 2
        r = relaxation_budget(s, n)
        params = BoundParams(n=n, m_x=m_x, m_z=m_z, delta=delta, r=r, s=s)
        fb = protocol_failure_bound(params)
        tv = fb.log2_terms
        ins = composable_insecurity(fb.f, params.beta)

        def fmt(x):
            return "   +inf" if math.isinf(x) else f"{x:10.1f}"

        print(f"{f'1e{expo}':>12}  {fmt(tv['bit_sampling']):>13}  {fmt(tv['post_selection']):>12}  "
              f"{fmt(tv['phase_groups']):>12}  {fmt(tv['phase_tail']):>11}  {fmt(fb.log2_f):>10}  "
              f"{'vacuous' if fb.vacuous else f'{ins:.3e}'}")

    print()
    print("minimal feasible n per the parameter constraints (item-by-item solver):")
    for s_try in (1, 5, 10, 20, 40):
        sol = choose_params(s_try, delta)
        if sol.feasible:
            print(f"  s = {s_try:>3}: n >= {sol.n:.3e}  (m_x = {sol.m_x}, m' = {sol.m_prime:.3e}, "
                  f"r = {sol.r}, binding: {sol.binding_constraint})")
        else:
            print(f"  s = {s_try:>3}: infeasible ({sol.message})")


if __name__ == "__main__":
    main()
