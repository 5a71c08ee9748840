#!/usr/bin/env python3
"""Run the independent verification suite and print the report.

Every closed-form information term is re-derived by Monte-Carlo score
sampling, adaptive quadrature, or finite differences, and compared at the
stated tolerance (5% for Monte-Carlo, 1e-6 for quadrature).  Equivalent to
``crb-sbl verify --level quick``; pass ``full`` as the first argument for
the 1e5-sample version.
"""

import sys

from crb_sbl import verify_suite


def main() -> int:
    level = sys.argv[1] if len(sys.argv) > 1 else "quick"
    status, payload = verify_suite(level=level, output_path="verification_report.json")
    width = max(len(r["target"]) for r in payload["reports"])
    for r in payload["reports"]:
        flag = "pass" if r["pass"] else "FAIL"
        print(f"[{flag}] {r['target']:<{width}}  rel_error={r['rel_error']:.3e}  "
              f"(n={r['samples_or_nodes']})")
    print(f"\n{'all checks passed' if status == 0 else 'FAILURES PRESENT'} "
          f"(level={level}); report in verification_report.json")
    return status


if __name__ == "__main__":
    sys.exit(main())
