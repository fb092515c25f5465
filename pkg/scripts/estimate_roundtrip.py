"""Plant a distortion, simulate valuation paths, and re-estimate it.

    python scripts/estimate_roundtrip.py [--method gmm|dm] [--reps 5]
"""

import argparse

import numpy as np

from spectral_levy.distortions import exp_distortion_pair
from spectral_levy.estimation import dm_estimate, gmm_estimate
from spectral_levy.fixtures import DM_REGIME_DISTORTION, GMM_REGIME_DISTORTION, SPY_DAILY_BG, distorted_series
from spectral_levy.pricing import drift_triple


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--method", choices=("gmm", "dm"), default="gmm")
    parser.add_argument("--reps", type=int, default=5)
    parser.add_argument("--window", type=int, default=252)
    args = parser.parse_args()
    planted = GMM_REGIME_DISTORTION if args.method == "gmm" else DM_REGIME_DISTORTION
    estimate = gmm_estimate if args.method == "gmm" else dm_estimate
    truth = drift_triple(SPY_DAILY_BG, exp_distortion_pair(planted))
    print(f"planted charges: upper {truth.risk_charge_upper:.5f}  lower {truth.risk_charge_lower:.5f}")
    errors = []
    for seed in range(args.reps):
        series = distorted_series(SPY_DAILY_BG, planted, args.window + 1, seed)
        fit = estimate(series, args.window, SPY_DAILY_BG)
        err = (fit.risk_charge_upper / truth.risk_charge_upper - 1, fit.risk_charge_lower / truth.risk_charge_lower - 1)
        errors.append(err)
        d = fit.distortion
        print(f"seed {seed}: c={d.c:.4g} gamma={d.gamma:.4g} a={d.a:.4g} b={d.b:.4g}  "
              f"charge errors {err[0]:+.1%} / {err[1]:+.1%}")
    med = np.median(errors, axis=0)
    print(f"median errors: upper {med[0]:+.1%}  lower {med[1]:+.1%}")


if __name__ == "__main__":
    main()
