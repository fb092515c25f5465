"""Batch command-line front end.

    spectral-levy <command> --config run.json [--seed N] [--out DIR]

The config is one JSON document.  Shared blocks are ``bg`` and
``distortion``; each command reads its own block named after it.
Results go to CSV (surfaces, series, scans) and JSON (scalars, reports).
Failures print a JSON error object to stderr and exit with 2
(validation), 3 (numerical) or 4 (I/O).
"""

import argparse
import csv
import json
import logging
import os
import sys
import tempfile

import numpy as np

from . import fixtures
from .distortions import ExpDistortionParams, bg2bg_pair, exp_distortion_pair, pair_from_config, validate_distortion
from .driver import psi_monotone
from .errors import ConfigurationError, DataError, DomainError, SpectralLevyError
from .estimation import ChainModel, OptionChain, ReturnSeries, calibrate_spreads, dm_estimate, gmm_estimate
from .levy import BGParams, MBGParams, bg_cumulant, bg_levy_density, make_jump_grid
from .portfolio import (
    MyopicParams,
    PortfolioSpec,
    RebateSpec,
    ChargeCurve,
    myopic_allocate,
    optimal_amount_and_weights,
    optimal_theta_small_investor,
    rebated_variation,
)
from .pricing import (
    DistortedPricer,
    FourierEngine,
    FourierSpec,
    PIDEGrid,
    breakpoint_payoff,
    call_payoff,
    drift_triple,
    pide_solve_explicit,
    put_payoff,
    straddle_payoff,
)

log = logging.getLogger("spectral_levy")

COMMANDS = ("density", "pide", "price", "estimate", "calibrate", "portfolio", "rebate-scan")


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigurationError("config must be a JSON object")
    return cfg


def _block(cfg, name, required=True):
    block = cfg.get(name)
    if block is None:
        if required:
            raise ConfigurationError(f"config is missing the '{name}' block")
        return {}
    if not isinstance(block, dict):
        raise ConfigurationError(f"'{name}' must be a JSON object")
    return block


def _number(block, key, default=None, positive=False):
    val = block.get(key, default)
    if val is None:
        raise ConfigurationError(f"missing numeric field '{key}'")
    try:
        val = float(val)
    except (TypeError, ValueError):
        raise ConfigurationError(f"field '{key}' must be a number") from None
    if not np.isfinite(val) or (positive and val <= 0):
        raise ConfigurationError(f"field '{key}' must be {'positive' if positive else 'finite'}")
    return val


def parse_bg(block) -> BGParams:
    return BGParams(*(_number(block, k, positive=True) for k in ("b_p", "c_p", "b_n", "c_n")))


def parse_distortion(block, p: BGParams):
    """Distortion pair from a config block, validated before any computation."""
    try:
        pair = pair_from_config(block, p)
    except DomainError as exc:
        raise ConfigurationError(str(exc)) from None
    report = validate_distortion(pair)
    if not report.passed:
        raise ConfigurationError(f"distortion fails validation: {', '.join(report.failed())}")
    return pair


def parse_rebate(block) -> RebateSpec:
    return RebateSpec(
        _number(block, "c_lower", positive=True),
        _number(block, "c_upper", positive=True),
        _number(block, "chi", 1.0, positive=True),
        _number(block, "chi2", 1.0, positive=True),
    )


def parse_fourier(block) -> FourierSpec:
    half = block.get("half_width")
    return FourierSpec(
        n_points=int(block.get("n_points", 2**14)),
        n_std=_number(block, "n_std", 12.0, positive=True),
        half_width=None if half is None else _number(block, "half_width", positive=True),
    )


def _model(cfg):
    p = parse_bg(_block(cfg, "bg"))
    return p, parse_distortion(_block(cfg, "distortion"), p)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _atomic_write(path, writer):
    folder = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    def writer(fh):
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(v) for v in row])

    _atomic_write(path, writer)
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        val = float(obj)
        return val if np.isfinite(val) else str(val)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, payload):
    _atomic_write(path, lambda fh: fh.write(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"))
    return path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_density(cfg, out, seed):
    """Physical, upper and lower log-return densities and Lévy densities."""
    p, pair = _model(cfg)
    block = _block(cfg, "density", required=False)
    horizon = _number(block, "horizon", 1.0, positive=True)
    spec = parse_fourier(block)
    grid = make_jump_grid(p, n_per_side=int(block.get("n_per_side", 800)))
    psi = {d: psi_monotone(grid.nodes, p, pair, d) for d in ("upper", "lower")}
    engine = FourierEngine(p, horizon, spec, grid, psis=tuple(psi.values()))
    base = engine.density(np.zeros_like(grid.nodes))
    cols = [base.pdf]
    means = {"physical": base.mean()}
    for d in ("upper", "lower"):
        dens = engine.density(psi[d])
        means[d] = dens.mean()
        cols.append(np.interp(base.x, dens.x, dens.pdf, left=0.0, right=0.0))
    files = [write_csv(os.path.join(out, "density.csv"), ["x", "pdf_P", "pdf_upper", "pdf_lower"], zip(base.x, *cols))]
    kappa = bg_levy_density(grid.nodes, p)
    with np.errstate(divide="ignore"):
        logs = [np.log(kappa)] + [np.log(kappa * np.maximum(1.0 + psi[d], 0.0)) for d in ("upper", "lower")]
    files.append(write_csv(os.path.join(out, "levy.csv"), ["y", "log_kappa", "log_kappa_upper", "log_kappa_lower"], zip(grid.nodes, *logs)))
    files.append(write_json(os.path.join(out, "density_summary.json"), {"horizon": horizon, "means": means}))
    return files


def _payoff(block):
    kind = block.get("payoff", "call")
    if kind == "custom":
        bp = block.get("breakpoints") or {}
        return breakpoint_payoff(bp.get("prices", []), bp.get("values", [])), None
    strike = _number(block, "strike", positive=True)
    makers = {"call": call_payoff, "put": put_payoff, "straddle": straddle_payoff}
    if kind not in makers:
        raise ConfigurationError("payoff must be call, put, straddle or custom")
    return makers[kind](strike), strike


def cmd_pide(cfg, out, seed):
    """Explicit finite-difference valuation surface and risk charges."""
    p, pair = _model(cfg)
    block = _block(cfg, "pide")
    payoff, strike = _payoff(block)
    horizon = _number(block, "horizon", positive=True)
    rate = _number(block, "rate", 0.0)
    spot = _number(block, "spot", 1.0, positive=True)
    n_space, n_time = int(block.get("n_space", 400)), int(block.get("n_time", 50))
    half = _number(block, "n_std", 12.0, positive=True) * np.sqrt(bg_cumulant(2, p, horizon))
    center = float(np.log(spot))
    grid = PIDEGrid.centered(center, half, n_space, n_time, horizon, None if strike is None else float(np.log(strike)))
    direction = block.get("direction", "upper")
    surf = pide_solve_explicit(payoff, p, pair, grid, direction, rate)
    files = [
        write_csv(os.path.join(out, "surface.csv"), ["t", "x", "value", "risk_charge"], surf.to_rows()),
        write_csv(os.path.join(out, "risk_charge.csv"), ["x", "risk_charge_t0"], zip(surf.x, surf.risk_charge[0])),
    ]
    summary = {"value_at_spot": surf.value_at(center), "direction": direction, **surf.meta}
    files.append(write_json(os.path.join(out, "pide_summary.json"), summary))
    return files


def cmd_price(cfg, out, seed):
    """Model bid and ask for a strike list at one maturity."""
    p, pair = _model(cfg)
    block = _block(cfg, "price")
    strikes = np.asarray(block.get("strikes", []), dtype=float)
    if strikes.size == 0:
        raise ConfigurationError("price.strikes must list at least one strike")
    flags = block.get("flags", "C")
    flags = [flags] * strikes.size if isinstance(flags, str) else list(flags)
    if len(flags) != strikes.size:
        raise ConfigurationError("price.flags must be one flag or one per strike")
    pricer = DistortedPricer(
        p,
        pair,
        _number(block, "maturity", positive=True),
        _number(block, "rate", 0.0),
        _number(block, "spot", 1.0, positive=True),
        parse_fourier(block),
    )
    rows = []
    for k, f in zip(strikes, flags):
        bid, ask = pricer.quotes(k, f)
        rows.append((k, f.upper()[:1], bid, ask))
    triple = drift_triple(p, pair)
    files = [write_csv(os.path.join(out, "prices.csv"), ["strike", "flag", "bid_model", "ask_model"], rows)]
    files.append(write_json(os.path.join(out, "drifts.json"), triple.__dict__ | {
        "risk_charge_upper": triple.risk_charge_upper, "risk_charge_lower": triple.risk_charge_lower}))
    return files


def _series(block, seed):
    if "series" in block:
        return ReturnSeries.from_csv(block["series"], int(block.get("extreme_window", 5)))
    syn = block.get("synthetic")
    if not isinstance(syn, dict):
        raise ConfigurationError("estimate needs 'series' (CSV path) or a 'synthetic' block")
    p = parse_bg(syn.get("bg", fixtures.SPY_DAILY_BG.__dict__))
    d = syn.get("distortion", fixtures.GMM_REGIME_DISTORTION.__dict__)
    params = ExpDistortionParams(*(_number(d, k) for k in ("c", "gamma", "a", "b")))
    return fixtures.distorted_series(p, params, int(syn.get("n_days", 253)), seed)


def cmd_estimate(cfg, out, seed):
    """Rolling GMM and/or DM distortion estimates, one CSV row per day."""
    block = _block(cfg, "estimate")
    p = parse_bg(_block(cfg, "bg"))
    series = _series(block, seed)
    window = int(block.get("window", 252))
    step = int(block.get("step", 1))
    methods = block.get("methods", ["gmm", "dm"])
    if not set(methods) <= {"gmm", "dm"}:
        raise ConfigurationError("estimate.methods may contain gmm and dm")
    if len(series) < window + 1:
        raise ConfigurationError("series is shorter than window + 1 observations")
    days = range(window + 1, len(series) + 1, step)
    rows = []
    for end in days:
        part = ReturnSeries(series.dates[:end], series.close[:end], series.upper[:end], series.lower[:end])
        for method in methods:
            fit = gmm_estimate(part, window, p) if method == "gmm" else dm_estimate(part, window, p)
            d = fit.distortion
            rows.append((series.dates[end - 1], method, d.c, d.gamma, d.a, d.b, fit.risk_charge_upper,
                         fit.risk_charge_lower, fit.objective, int(fit.converged)))
    header = ["date", "method", "c", "gamma", "a", "b", "risk_charge_upper", "risk_charge_lower", "objective", "converged"]
    return [write_csv(os.path.join(out, "estimates.csv"), header, rows)]


def cmd_calibrate(cfg, out, seed):
    """Distortion fitted to a bid/ask chain with the BG law held fixed."""
    block = _block(cfg, "calibrate")
    p = parse_bg(_block(cfg, "bg"))
    if "chain" in block:
        chain = OptionChain.from_csv(block["chain"], _number(block, "rate", 0.0))
    elif block.get("synthetic"):
        chain = fixtures.option_chain(p)
    else:
        raise ConfigurationError("calibrate needs 'chain' (CSV path) or 'synthetic': true")
    family = block.get("family", "exponential")
    model = ChainModel(chain, p)
    fit = calibrate_spreads(chain, p, family=family, maxiter=int(block.get("maxiter", 400)), model=model)
    bid, ask = model.quotes(fit_pair(fit, p))
    rows = zip(chain.maturities, chain.strikes, chain.flags, chain.bids, chain.asks, bid, ask)
    files = [write_csv(os.path.join(out, "calibration_quotes.csv"),
                       ["maturity", "strike", "flag", "bid", "ask", "bid_model", "ask_model"], rows)]
    report = fit.as_dict() | {"bid_le_ask": bool(np.all(bid <= ask + 1e-12))}
    files.append(write_json(os.path.join(out, "calibration.json"), report))
    return files


def fit_pair(fit, p):
    d = fit.distortion
    if isinstance(d, ExpDistortionParams):
        return exp_distortion_pair(d)
    return bg2bg_pair(p, d.b_p_new, d.b_n_new)


def _assets(block):
    if "mbg" in block:
        m = block["mbg"]
        if m == "fixture":
            return fixtures.etf_mbg()
        return MBGParams(*(np.asarray(m[k], float) for k in ("b_p", "c_p", "b_n", "c_n")), float(m["zeta"]), np.asarray(m["corr"], float))
    assets = block.get("assets")
    if not assets:
        raise ConfigurationError("portfolio needs 'assets' (list of BG blocks) or 'mbg'")
    return [parse_bg(a) for a in assets]


def cmd_portfolio(cfg, out, seed):
    """Small-investor weights, joint amount and weights, or myopic allocation."""
    block = _block(cfg, "portfolio")
    mode = block.get("mode", "small-investor")
    if mode == "myopic":
        p = parse_bg(_block(cfg, "bg"))
        rb = block.get("rebate")
        params = MyopicParams(
            parse_rebate(rb) if rb else None,
            _number(block, "gamma", 0.01, positive=True),
            _number(block, "epsilon", 1.0, positive=True),
            _number(block, "eta", 3.0, positive=True),
        )
        res = myopic_allocate(
            block.get("objective", "rebated-variation"), p, _number(block, "rate", 0.0),
            _number(block, "horizon", 1 / 252, positive=True), _number(block, "varpi", 1000.0, positive=True), params,
        )
        return [write_json(os.path.join(out, "allocation.json"), res.as_dict())]
    spec = PortfolioSpec(
        _assets(block),
        block.get("short_limits"),
        _number(block, "leverage", 0.0),
        _number(block, "horizon", 1.0, positive=True),
        _number(block, "rate", 0.0),
        block.get("drifts"),
    )
    if mode == "small-investor":
        first = spec.charged_assets()[0]
        pair = parse_distortion(_block(cfg, "distortion"), first)
        res = optimal_theta_small_investor(spec, pair, n_starts=int(block.get("n_starts", 8)), seed=seed)
    elif mode == "amount":
        init = block.get("init")
        res = optimal_amount_and_weights(
            spec, parse_rebate(_block(block, "rebate")),
            None if init is None else (init["theta"], init["varpi"]),
            gamma=_number(block, "gamma", 0.01, positive=True),
            max_rounds=int(block.get("max_rounds", 6)),
        )
    else:
        raise ConfigurationError("portfolio.mode must be small-investor, amount or myopic")
    return [write_json(os.path.join(out, "allocation.json"), res.as_dict())]


def cmd_rebate_scan(cfg, out, seed):
    """Rebated variation over a grid of invested amounts."""
    block = _block(cfg, "rebate_scan")
    rebate = parse_rebate(_block(block, "rebate"))
    gamma = _number(block, "gamma", 0.01, positive=True)
    hi = _number(block, "varpi_max", 1e7, positive=True)
    lo = _number(block, "varpi_min", hi * 1e-6, positive=True)
    n = int(block.get("n", 121))
    if n < 3 or lo >= hi:
        raise ConfigurationError("rebate_scan needs n >= 3 and varpi_min < varpi_max")
    amounts = np.r_[0.0, np.geomspace(lo, hi, n - 1)]
    if block.get("portfolio") == "mbg-uniform":
        from .portfolio import AmountProblem

        spec = PortfolioSpec(fixtures.etf_mbg(), horizon=_number(block, "horizon", 1.0, positive=True))
        problem = AmountProblem(spec, rebate, gamma)
        theta = np.full(spec.dim, 1.0 / spec.dim)
        curve = problem.curve(theta)
        pts = [problem.value(theta, w, curve) for w in amounts]
    else:
        p = parse_bg(_block(cfg, "bg"))
        curve = ChargeCurve.single_asset(p, gamma)
        pts = [rebated_variation(w, p, rebate, gamma, curve, with_level=True) for w in amounts]
    values = np.array([v for v, _ in pts])
    secants = np.diff(values) / np.diff(amounts)
    rise = np.diff(secants)
    scale = max(1e-12, float(np.max(np.abs(secants))))
    top = int(np.argmax(values))
    summary = {
        "concave": bool(np.all(rise <= 1e-7 * scale)),
        "max_secant_increase": float(rise.max()),
        "argmax_varpi": float(amounts[top]),
        "max_value": float(values[top]),
        "interior_max": bool(0 < top < amounts.size - 1 and values[top] > 0),
    }
    files = [write_csv(os.path.join(out, "rebate_scan.csv"), ["varpi", "value", "c_star"],
                       [(w, v, c) for w, (v, c) in zip(amounts, pts)])]
    files.append(write_json(os.path.join(out, "rebate_scan_summary.json"), summary))
    return files


HANDLERS = {
    "density": cmd_density,
    "pide": cmd_pide,
    "price": cmd_price,
    "estimate": cmd_estimate,
    "calibrate": cmd_calibrate,
    "portfolio": cmd_portfolio,
    "rebate-scan": cmd_rebate_scan,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="spectral-levy", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=".", help="output directory (created if missing)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def run(command, cfg, out, seed=0):
    """Run one command on a parsed config; returns the written paths."""
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc}") from exc
    return HANDLERS[command](cfg, out, seed)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        files = run(args.command, load_config(args.config), args.out, args.seed)
    except SpectralLevyError as exc:
        print(json.dumps({"error": exc.kind, "message": str(exc), "exit_code": exc.exit_code}), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(json.dumps({"error": "io_error", "message": str(exc), "exit_code": 4}), file=sys.stderr)
        return 4
    print(json.dumps({"command": args.command, "files": files}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
