#!/usr/bin/env python3
"""Desk-check every identity of the worked hiding-state example and print a table.

Usage: python3 scripts/verify_worked_example.py [--p P] [--kappa K]
"""

import argparse
import sys

from pbitqkd.cli import cmd_verify_example


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=None)
    ap.add_argument("--kappa", type=float, default=None)
    args = ap.parse_args()

    import io, json, contextlib

    ns = argparse.Namespace(config=None, p=args.p, kappa=args.kappa, out=None)
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cmd_verify_example(ns)
    report = json.loads(buf.getvalue())

    print(f"p = {report['p']:.10f}  kappa = {report['kappa']}  "
          f"(critical p* = {report['p_star']:.10f})")
    print(f"asymptotic key rate at p (zero phase error): {report['key_rate_at_p']:.6f}")
    print()
    width = max(len(c["name"]) for c in report["checks"])
    for c in report["checks"]:
        flag = "PASS" if c["pass"] else "FAIL"
        print(f"  {c['name']:<{width}}  {flag}  value={c['value']:.3e}  tol={c['tolerance']:.0e}")
    print()
    print("all checks pass" if report["ok"] else "SOME CHECKS FAILED")
    return code


if __name__ == "__main__":
    sys.exit(main())
