"""Upper and lower call prices for a strike strip, with the drift triple.

    python scripts/price_chain.py [--maturity 0.25] [--rate 0.01]
"""

import argparse

import numpy as np

from spectral_levy.distortions import exp_distortion_pair
from spectral_levy.fixtures import CHAIN_DISTORTION, SPY_ANNUAL_BG
from spectral_levy.pricing import DistortedPricer, drift_triple


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--maturity", type=float, default=0.25, help="years")
    parser.add_argument("--rate", type=float, default=0.01, help="annual rate")
    args = parser.parse_args()
    pair = exp_distortion_pair(CHAIN_DISTORTION)
    triple = drift_triple(SPY_ANNUAL_BG, pair)
    print(f"drifts: upper {triple.mu_upper:.6f}  base {triple.mu_base:.6f}  lower {triple.mu_lower:.6f}")
    pricer = DistortedPricer(SPY_ANNUAL_BG, pair, args.maturity, args.rate)
    print(f"{'strike':>8} {'bid':>10} {'ask':>10}")
    for strike in np.linspace(0.9, 1.1, 9):
        bid, ask = pricer.quotes(strike, "C")
        print(f"{strike:8.3f} {bid:10.6f} {ask:10.6f}")


if __name__ == "__main__":
    main()
