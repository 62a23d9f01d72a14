"""Mesh-refinement study for a built-in manufactured case.

Example:
    python scripts/run_convergence.py --case pot-trig --p 2 --levels 4 --oracle
"""

import argparse
from pathlib import Path

from dpgfem.manufactured import CASE_NAMES
from dpgfem.verify import eoc_study


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--case", default="conc-trig", choices=CASE_NAMES)
    ap.add_argument("--p", type=int, default=1)
    ap.add_argument("--delta-p", type=int, default=1)
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--base-n", type=int, default=8)
    ap.add_argument("--oracle", action="store_true",
                    help="also solve with the continuous Galerkin oracle")
    ap.add_argument("--csv", type=Path, help="write the study table here")
    args = ap.parse_args()

    report = eoc_study(args.case, args.p, args.levels, delta_p=args.delta_p,
                       base_n=args.base_n, with_oracle=args.oracle,
                       verbose=True)
    print()
    print(f"{'n':>5} {'e_field':>11} {'e_flux':>11} {'e_trace':>11} "
          f"{'eta':>11} {'eoc(comb)':>10} {'eoc(eta)':>9}")
    comb, eeta = report.eoc_combined(), report.eoc_eta()
    for i, row in enumerate(report.rows):
        rc = "-" if comb[i] is None else f"{comb[i]:.3f}"
        re_ = "-" if eeta[i] is None else f"{eeta[i]:.3f}"
        print(f"{row.n:>5} {row.e_field:>11.4e} {row.e_flux:>11.4e} "
              f"{row.e_trace:>11.4e} {row.eta:>11.4e} {rc:>10} {re_:>9}")
    if args.oracle:
        print("\nGalerkin oracle field errors:",
              " ".join(f"{r.oracle_e_field:.4e}" for r in report.rows))
    if args.csv:
        args.csv.write_text(report.to_csv_text())
        print(f"\nwrote {args.csv}")


if __name__ == "__main__":
    main()
