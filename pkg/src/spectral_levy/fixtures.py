"""Bundled synthetic fixtures standing in for market data.

Every generator is deterministic given its seed.  Parameter sets use
one trading day as the time unit unless the name says annual.
"""

import numpy as np

from .distortions import ExpDistortionParams, exp_distortion_pair
from .driver import distorted_density
from .estimation import ChainModel, OptionChain, ReturnSeries, bg_from_moments
from .levy import BGParams, MBGParams, make_jump_grid, simulate_bg_increments
from .pricing import simulate_distorted

SPY_DAILY_BG = BGParams(0.0075, 1.5592, 0.0181, 0.6308)
SPY_ANNUAL_BG = BGParams(0.0038, 614.5676, 0.0979, 3.7175)
GMM_REGIME_DISTORTION = ExpDistortionParams(0.01, 0.25, 100.0, 1.0)
DM_REGIME_DISTORTION = ExpDistortionParams(12.7092, 0.7689, 1.1216e-7, 0.9949)
CHAIN_DISTORTION = ExpDistortionParams(0.0021, 0.1996, 0.0011, 0.0067)


def distorted_series(p: BGParams, params: ExpDistortionParams, n_days=253, seed=0, n_per_side=2000):
    """Upper and lower valuation paths driven by the extreme distorted laws.

    Closes follow the upper path; the lower path is simulated with an
    independent seed.  Both start at 1.
    """
    pair = exp_distortion_pair(params)
    grid = make_jump_grid(p, n_per_side=n_per_side)
    paths = []
    for direction, offset in (("upper", 0), ("lower", 1)):
        levy = distorted_density(p, pair, direction, grid)
        steps = simulate_distorted(levy, 1.0, n_days - 1, seed=None if seed is None else 2 * seed + offset)
        paths.append(np.exp(np.concatenate([[0.0], np.cumsum(steps)])))
    upper, lower = paths
    return ReturnSeries(np.arange(n_days), upper, upper, lower)


def option_chain(
    p: BGParams = SPY_ANNUAL_BG,
    params: ExpDistortionParams = CHAIN_DISTORTION,
    spot=100.0,
    rate=0.01,
    maturities=(1 / 12, 0.25),
    strikes=None,
):
    """Out-of-the-money puts and calls priced by the model itself.

    Default: 10 strikes (85..98 puts, 102..115 calls) per maturity, so 20 quotes.
    """
    ks = np.asarray(strikes if strikes is not None else np.r_[np.linspace(85, 98, 5), np.linspace(102, 115, 5)], float)
    k = np.tile(ks, len(maturities))
    t = np.repeat(np.asarray(maturities, dtype=float), ks.size)
    flags = np.where(k < spot, "P", "C")
    blank = OptionChain(spot, k, t, flags, np.zeros(k.size), np.ones(k.size), rate)
    bid, ask = ChainModel(blank, p).quotes(exp_distortion_pair(params))
    return OptionChain(spot, k, t, flags, bid, ask, rate, "synthetic")


def etf_mbg(dim=10, zeta=5.0, rho=0.6, seed=7) -> MBGParams:
    """Daily MBG for ETF-like assets scattered around the SPY parameters."""
    rng = np.random.default_rng(seed)
    base = np.array(SPY_DAILY_BG.as_tuple())
    spread = np.exp(rng.uniform(-0.25, 0.25, size=(dim, 4)))
    pars = base[None, :] * spread
    corr = np.full((dim, dim), rho) + (1.0 - rho) * np.eye(dim)
    return MBGParams(pars[:, 0], pars[:, 1], pars[:, 2], pars[:, 3], zeta, corr)


def regime_prices(n_days=502, seed=11, p: BGParams = SPY_DAILY_BG, swing=0.004, period=180.0):
    """Closes from BG increments plus a slowly rotating drift."""
    steps = simulate_bg_increments(p, 1.0, n_days - 1, seed)
    drift = swing * np.sin(2 * np.pi * np.arange(n_days - 1) / period)
    return 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(steps + drift)]))


def bg_panel(n_days=250, window=252, seed=11):
    """Daily BG parameters from rolling moment fits on regime_prices."""
    closes = regime_prices(n_days + window, seed)
    rets = np.diff(np.log(closes))
    return [bg_from_moments(rets[i : i + window]) for i in range(n_days)]
