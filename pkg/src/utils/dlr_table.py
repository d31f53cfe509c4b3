import sys
from pathlib import Path

import pandas as pd

def main() -> None:
    if len(sys.argv) != 2:
        print("Usage: dlr_table.py <dlr.csv file>")
        sys.exit(1)

    reports = pd.read_csv(Path(sys.argv[1]))
    reports = reports.assign(abs_z=reports["z_score"].abs()).sort_values(["abs_z", "test_function", "delta"], ascending=[False, True, True])

    flagged = int((reports["abs_z"] > 3).sum())

    print(f"# DLR residuals ({len(reports):,.0f} checks, {flagged:,.0f} above 3 sigma)")
    print()
    print("Checks are sorted by the absolute z-score of the residual between the sampled mean and the mean of the inner conditional expectations.")
    print()
    print("| Function | Delta | LHS | RHS | Residual | z |")
    print("| -------- | ----- | --- | --- | -------- | - |")

    for row in reports.itertuples():
        print(f"| {row.test_function} | {row.delta} | {row.lhs:.4f} | {row.rhs:.4f} | {row.residual:+.4f} | {row.z_score:+.2f} |")

if __name__ == "__main__":
    main()
