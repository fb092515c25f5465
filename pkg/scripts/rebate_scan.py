"""Rebated variation of an equally weighted ETF-like portfolio against the amount invested.

    python scripts/rebate_scan.py [--c-lower 2] [--c-upper 100]
"""

import argparse

import numpy as np

from spectral_levy.fixtures import etf_mbg
from spectral_levy.portfolio import AmountProblem, PortfolioSpec, RebateSpec


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--c-lower", type=float, default=2.0)
    parser.add_argument("--c-upper", type=float, default=100.0)
    parser.add_argument("--chi", type=float, default=1.0)
    args = parser.parse_args()
    spec = PortfolioSpec(etf_mbg())
    problem = AmountProblem(spec, RebateSpec(args.c_lower, args.c_upper, args.chi))
    theta = np.full(spec.dim, 1.0 / spec.dim)
    curve = problem.curve(theta)
    print(f"{'varpi':>12} {'value':>12} {'c*':>10}")
    for varpi in np.r_[0.0, np.geomspace(10.0, 1e6, 11)]:
        value, c_star = problem.value(theta, varpi, curve)
        print(f"{varpi:12.4g} {value:12.5g} {c_star:10.4g}")
    varpi, value, c_star = problem.best_amount(theta)
    print(f"best amount {varpi:.6g} with value {value:.6g} at level c={c_star:.4g}")


if __name__ == "__main__":
    main()
