"""Estimation of distortions and BG parameters from prices and option quotes.

Distortion estimators take the BG law as given and fit the exponential
family parameters (c, gamma, a, b) through the reparameterisation

    log c = logistic box over [1e-4, 1e4],  gamma = logistic(u1),
    a = e^u2,  b = logistic(u3),

so Nelder-Mead works on an unconstrained space while every iterate stays
admissible.  Series are indexed in steps of ``dt`` time units (one
trading day for daily BG parameters).
"""

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.cluster.vq import kmeans2
from scipy.special import expit, logit

from .distortions import BG2BGParams, ExpDistortionParams, bg2bg_pair, exp_distortion_pair, validate_distortion
from .driver import psi_from_tail_masses
from .errors import ConfigurationError, DataError, DomainError, NumericalError
from .levy import BGParams, bg_cumulant, bg_mean_rate, bg_tail_mass, make_jump_grid
from .pricing import FourierEngine, FourierSpec, drift_triple

log = logging.getLogger(__name__)

_PENALTY = 1e12


# ---------------------------------------------------------------------------
# data containers
# ---------------------------------------------------------------------------


@dataclass
class ReturnSeries:
    """Closing prices with upper and lower valuation proxies.

    ``upper`` and ``lower`` default to the rolling ``extreme_window``-day
    maximum and minimum of closes; simulated valuation paths can be
    supplied directly instead.  Rows with a missing close are dropped
    with a warning and repeated dates are rejected.
    """

    dates: np.ndarray
    close: np.ndarray
    upper: np.ndarray | None = None
    lower: np.ndarray | None = None
    extreme_window: int = 5

    def __post_init__(self):
        dates = np.asarray(self.dates)
        close = np.asarray(self.close, dtype=float)
        if dates.shape != close.shape or close.ndim != 1:
            raise DataError("dates and close must be one-dimensional and of equal length")
        keep = np.isfinite(close)
        if not keep.all():
            warnings.warn(f"dropping {int((~keep).sum())} rows with missing prices", stacklevel=2)
        extra = {}
        for name in ("upper", "lower"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if arr.shape != close.shape:
                    raise DataError(f"{name} must match close in length")
                keep &= np.isfinite(arr)
                extra[name] = arr
        dates, close = dates[keep], close[keep]
        if np.unique(dates).size != dates.size:
            raise DataError("duplicated dates")
        if dates.size > 1 and np.any(dates[1:] <= dates[:-1]):
            raise DataError("dates must be strictly increasing")
        if np.any(close <= 0):
            raise DataError("prices must be strictly positive")
        self.dates, self.close = dates, close
        for name, arr in extra.items():
            arr = arr[keep]
            if np.any(arr <= 0):
                raise DataError(f"{name} values must be strictly positive")
            setattr(self, name, arr)
        if self.extreme_window < 1:
            raise DataError("extreme_window must be at least 1")

    def __len__(self):
        return self.close.size

    @property
    def log_returns(self):
        return np.diff(np.log(self.close))

    def _rolling(self, reducer):
        w = self.extreme_window
        if self.close.size < w:
            raise DataError("series shorter than the extreme window")
        return reducer(np.lib.stride_tricks.sliding_window_view(self.close, w), axis=1)

    @property
    def upper_series(self):
        return self.upper if self.upper is not None else self._rolling(np.max)

    @property
    def lower_series(self):
        return self.lower if self.lower is not None else self._rolling(np.min)

    def tail(self, n):
        """The last ``n`` observations."""
        if n > len(self):
            raise ConfigurationError(f"window {n} exceeds series length {len(self)}")
        pick = slice(len(self) - n, None)
        return ReturnSeries(
            self.dates[pick],
            self.close[pick],
            None if self.upper is None else self.upper[pick],
            None if self.lower is None else self.lower[pick],
            self.extreme_window,
        )

    @classmethod
    def from_csv(cls, path, extreme_window=5):
        """Read ``date,close`` (optionally ``upper,lower``) columns."""
        try:
            with open(path, newline="") as fh:
                rows = list(csv.DictReader(fh))
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from exc
        if not rows or "date" not in rows[0] or "close" not in rows[0]:
            raise DataError(f"{path}: expected columns date,close")

        def column(name):
            return np.array([float(r[name]) if r.get(name) not in (None, "") else np.nan for r in rows])

        dates = np.array([r["date"] for r in rows], dtype="datetime64[D]")
        has_bounds = "upper" in rows[0] and "lower" in rows[0]
        return cls(
            dates,
            column("close"),
            column("upper") if has_bounds else None,
            column("lower") if has_bounds else None,
            extreme_window,
        )

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            bounds = self.upper is not None and self.lower is not None
            out.writerow(["date", "close"] + (["upper", "lower"] if bounds else []))
            for i in range(len(self)):
                row = [str(self.dates[i]), repr(float(self.close[i]))]
                if bounds:
                    row += [repr(float(self.upper[i])), repr(float(self.lower[i]))]
                out.writerow(row)


@dataclass
class OptionChain:
    """European quotes on one date; maturities in the model's time unit."""

    spot: float
    strikes: np.ndarray
    maturities: np.ndarray
    flags: np.ndarray
    bids: np.ndarray
    asks: np.ndarray
    rate: float = 0.0
    quote_date: str = ""

    def __post_init__(self):
        self.strikes = np.asarray(self.strikes, dtype=float)
        self.maturities = np.asarray(self.maturities, dtype=float)
        self.flags = np.array([str(f).upper()[:1] for f in self.flags])
        self.bids = np.asarray(self.bids, dtype=float)
        self.asks = np.asarray(self.asks, dtype=float)
        n = self.strikes.size
        if any(a.size != n for a in (self.maturities, self.flags, self.bids, self.asks)):
            raise DataError("quote columns must have equal length")
        if not self.spot > 0 or np.any(self.strikes <= 0) or np.any(self.maturities <= 0):
            raise DataError("spot, strikes and maturities must be positive")
        if np.any(self.bids < 0) or np.any(self.bids > self.asks):
            raise DataError("quotes must satisfy 0 <= bid <= ask")
        if not set(self.flags) <= {"C", "P"}:
            raise DataError("flags must be C or P")

    def __len__(self):
        return self.strikes.size

    @property
    def mids(self):
        return 0.5 * (self.bids + self.asks)

    @classmethod
    def from_csv(cls, path, rate=0.0, year_days=365.0):
        """Read ``date,spot,expiry,strike,flag,bid,ask``; maturities are
        (expiry - date) / ``year_days``."""
        try:
            with open(path, newline="") as fh:
                rows = list(csv.DictReader(fh))
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from exc
        need = {"date", "spot", "expiry", "strike", "flag", "bid", "ask"}
        if not rows or not need <= set(rows[0]):
            raise DataError(f"{path}: expected columns {','.join(sorted(need))}")
        dates = {r["date"] for r in rows}
        if len(dates) != 1:
            raise DataError("an option chain must hold quotes from a single date")
        day = np.datetime64(rows[0]["date"], "D")
        mats = [(np.datetime64(r["expiry"], "D") - day).astype(float) / year_days for r in rows]
        return cls(
            float(rows[0]["spot"]),
            [float(r["strike"]) for r in rows],
            mats,
            [r["flag"] for r in rows],
            [float(r["bid"]) for r in rows],
            [float(r["ask"]) for r in rows],
            rate,
            rows[0]["date"],
        )


@dataclass
class EstimationResult:
    method: str
    distortion: ExpDistortionParams | BG2BGParams | None = None
    bg: BGParams | None = None
    objective: float = np.nan
    iterations: int = 0
    converged: bool = False
    risk_charge_upper: float = np.nan
    risk_charge_lower: float = np.nan
    history: list = field(default_factory=list, repr=False)

    def as_dict(self):
        out = {
            "method": self.method,
            "objective": float(self.objective),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "risk_charge_upper": float(self.risk_charge_upper),
            "risk_charge_lower": float(self.risk_charge_lower),
        }
        if isinstance(self.distortion, ExpDistortionParams):
            out.update(dict(zip(("c", "gamma", "a", "b"), map(float, self.distortion.as_tuple()))))
        elif isinstance(self.distortion, BG2BGParams):
            out.update({"b_p_new": float(self.distortion.b_p_new), "b_n_new": float(self.distortion.b_n_new)})
        if self.bg is not None:
            out.update(dict(zip(("b_p", "c_p", "b_n", "c_n"), map(float, self.bg.as_tuple()))))
        return out


# ---------------------------------------------------------------------------
# shared machinery
# ---------------------------------------------------------------------------


# c is boxed so that G- saturates on the validator's range of masses
C_BOX = (1e-4, 1e4)


def exp_params_from_vector(u) -> ExpDistortionParams:
    """Map an unconstrained 4-vector to admissible (c, gamma, a, b)."""
    u = np.clip(np.asarray(u, dtype=float), -40.0, 40.0)
    lo, hi = np.log(C_BOX[0]), np.log(C_BOX[1])
    c = float(np.exp(lo + (hi - lo) * expit(u[0])))
    gamma = float(np.clip(expit(u[1]), 1e-9, 1 - 1e-9))
    b = float(np.clip(expit(u[3]), 1e-12, 1.0))
    return ExpDistortionParams(c, gamma, float(np.exp(u[2])), b)


def exp_params_to_vector(params: ExpDistortionParams):
    c, g, a, b = params.as_tuple()
    lo, hi = np.log(C_BOX[0]), np.log(C_BOX[1])
    frac = np.clip((np.log(c) - lo) / (hi - lo), 1e-9, 1 - 1e-9)
    return np.array([logit(frac), logit(min(g, 1 - 1e-9)), np.log(a), logit(min(b, 1 - 1e-9))])


class ChargeModel:
    """Tail masses of one BG law on a fixed jump grid, reused across the
    many distortions an optimiser visits."""

    def __init__(self, p: BGParams, grid=None):
        self.p = p
        self.grid = grid if grid is not None else make_jump_grid(p)
        self.positive = self.grid.nodes > 0
        self.tail = bg_tail_mass(self.grid.nodes, p)
        self.gain = np.expm1(self.grid.nodes) * self.grid.weights
        self.mu = bg_mean_rate(p)

    def psi(self, pair, direction):
        return psi_from_tail_masses(self.positive, self.tail, pair, direction)

    def charges(self, pair):
        """(RC_U, RC_L), both nonnegative for admissible pairs."""
        return float(self.gain @ self.psi(pair, "upper")), -float(self.gain @ self.psi(pair, "lower"))

    def square_norms(self, pair):
        """int psi^2 dnu on the grid for both directions."""
        w = self.grid.weights
        return tuple(float(np.sum(self.psi(pair, d) ** 2 * w)) for d in ("upper", "lower"))


def _finish(method, pair, params, p, fit, history, charge_model=None):
    triple = drift_triple(p, pair, charge_model.grid if charge_model is not None else None)
    report = validate_distortion(pair)
    if not report.passed:
        raise NumericalError(f"{method} returned an inadmissible distortion: {report.failed()}")
    return EstimationResult(
        method,
        params,
        p,
        float(fit.fun),
        int(getattr(fit, "nit", 0)),
        bool(fit.success),
        triple.risk_charge_upper,
        triple.risk_charge_lower,
        history,
    )


def _nelder_mead(objective, start, maxiter, xatol=1e-6, fatol=1e-12):
    history = []

    def tracked(u):
        val = objective(u)
        if not history or val < history[-1]:
            history.append(float(val))
        return val

    fit = optimize.minimize(
        tracked,
        start,
        method="Nelder-Mead",
        options={"maxiter": maxiter, "xatol": xatol, "fatol": fatol, "adaptive": len(start) > 3},
    )
    if not fit.success:
        log.warning("Nelder-Mead stopped without convergence: %s", fit.message)
    return fit, history


DEFAULT_START = ExpDistortionParams(10.0, 0.25, 0.01, 0.9)


# ---------------------------------------------------------------------------
# generalised method of moments
# ---------------------------------------------------------------------------


def gmm_conditions(values, growth, orders=(1, 2), dt=1.0):
    """Sample conditions mean[(dV/V - (e^{growth dt} - 1)) (V/mean V)^h].

    ``growth`` is the exponential drift int (e^y - 1) nu(dy) of the
    valuation; compounding over one observation step makes the condition
    exact for discretely sampled Lévy valuations.
    """
    v = np.asarray(values, dtype=float)
    ret = v[1:] / v[:-1] - 1.0
    inst = v[:-1] / v[:-1].mean()
    resid = ret - np.expm1(growth * dt)
    return np.array([np.mean(resid * inst**h) for h in orders])


def gmm_estimate(
    series: ReturnSeries, window, p: BGParams, moment_orders=(1, 2), dt=1.0, start=None, maxiter=600, charge_model=None
) -> EstimationResult:
    """Distortion matching upper and lower valuation drifts by GMM.

    The upper series grows at mu + RC_U and the lower at mu - RC_L, where
    mu is the BG exponential drift and RC the risk charges implied by the
    distortion.  Conditions use instruments (V / mean V)^h for h in
    ``moment_orders``; the objective is their squared norm relative to
    the return variance.
    """
    if any(h < 1 for h in moment_orders):
        raise ConfigurationError("moment orders must be at least 1")
    data = series.tail(window)
    up, lo = data.upper_series, data.lower_series
    if up.size < 3:
        raise ConfigurationError("window too short for moment conditions")
    model = charge_model or ChargeModel(p)
    scale = np.var(np.diff(up) / up[:-1]) + np.var(np.diff(lo) / lo[:-1])

    def objective(u):
        pair = exp_distortion_pair(exp_params_from_vector(u))
        rc_up, rc_lo = model.charges(pair)
        g = np.concatenate(
            [
                gmm_conditions(up, model.mu + rc_up, moment_orders, dt),
                gmm_conditions(lo, model.mu - rc_lo, moment_orders, dt),
            ]
        )
        return float(g @ g / scale)

    fit, history = _nelder_mead(objective, exp_params_to_vector(start or DEFAULT_START), maxiter)
    params = exp_params_from_vector(fit.x)
    return _finish("gmm", exp_distortion_pair(params), params, p, fit, history, model)


# ---------------------------------------------------------------------------
# digital moments
# ---------------------------------------------------------------------------

DEFAULT_TAIL_POINTS = (0.1, 0.2, 0.3, 0.7, 0.8, 0.9)


def anderson_darling_distance(model_cdf, empirical_cdf, n):
    """n sum (F_model - F_emp)^2 / (F_emp (1 - F_emp))."""
    f = np.clip(np.asarray(empirical_cdf, dtype=float), 1e-12, 1 - 1e-12)
    return float(n * np.sum((np.asarray(model_cdf) - f) ** 2 / (f * (1.0 - f))))


class DistortedLawModel:
    """Upper and lower laws of X_dt for one BG law on a reusable FFT grid."""

    def __init__(self, p: BGParams, dt=1.0, half_width=None, n_points=2**12, n_per_side=400):
        grid = make_jump_grid(p, n_per_side=n_per_side)
        if half_width is None:
            sd = np.sqrt(bg_cumulant(2, p, dt))
            half_width = max(16.0 * sd, 40.0 * max(p.b_p, p.b_n))
        spec = FourierSpec(n_points=n_points, half_width=half_width)
        self.engine = FourierEngine(p, dt, spec, grid)
        self.charges = ChargeModel(p, grid)

    def density(self, pair, direction):
        return self.engine.density(self.charges.psi(pair, direction))


def dm_estimate(
    series: ReturnSeries, window, p: BGParams, tail_points=DEFAULT_TAIL_POINTS, dt=1.0, start=None, maxiter=150, model=None
) -> EstimationResult:
    """Distortion matching tail probabilities of valuation log returns.

    Thresholds are the empirical ``tail_points`` quantiles of the upper
    and lower series' log returns; the model probabilities come from the
    Fourier-inverted upper and lower laws.  The objective is the
    Anderson-Darling weighted squared distance, minimised by Nelder-Mead.
    """
    data = series.tail(window)
    probs = np.asarray(tail_points, dtype=float)
    if np.any((probs <= 0) | (probs >= 1)):
        raise ConfigurationError("tail points must lie in (0, 1)")
    targets = []
    for values in (data.upper_series, data.lower_series):
        ret = np.diff(np.log(values))
        q = np.quantile(ret, probs)
        targets.append((q, np.mean(ret[:, None] <= q[None, :], axis=0), ret.size))
    if model is None:
        spread = max(np.ptp(t[0]) for t in targets)
        sd = np.sqrt(bg_cumulant(2, p, dt))
        model = DistortedLawModel(p, dt, half_width=max(16.0 * sd, 8.0 * spread, 40.0 * max(p.b_p, p.b_n)))

    def objective(u):
        pair = exp_distortion_pair(exp_params_from_vector(u))
        total = 0.0
        for direction, (q, emp, n) in zip(("upper", "lower"), targets):
            try:
                cdf = model.density(pair, direction).cdf(q)
            except NumericalError:
                return _PENALTY
            total += anderson_darling_distance(cdf, emp, n)
        return total

    fit, history = _nelder_mead(objective, exp_params_to_vector(start or DEFAULT_START), maxiter)
    params = exp_params_from_vector(fit.x)
    return _finish("dm", exp_distortion_pair(params), params, p, fit, history)


# ---------------------------------------------------------------------------
# BG parameters from return tails
# ---------------------------------------------------------------------------

DEFAULT_BG_QUANTILES = (0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.975, 0.99)


def bg_from_moments(ret):
    """BG parameters matching mean, variance and skewness with equal shapes."""
    m, v = ret.mean(), ret.var()
    k3 = np.mean((ret - m) ** 3)
    # equal shapes c: m = c (bp - bn), v = c (bp^2 + bn^2), k3 = 2 c (bp^3 - bn^3)
    best, best_err = None, np.inf
    for c in np.geomspace(0.05, 50.0, 200):
        disc = 2.0 * v / c - (m / c) ** 2
        if disc <= 0:
            continue
        s = np.sqrt(disc)
        bp, bn = 0.5 * (m / c + s), 0.5 * (s - m / c)
        if bp <= 0 or bn <= 0 or bp >= 1:
            continue
        err = abs(2.0 * c * (bp**3 - bn**3) - k3)
        if err < best_err:
            best, best_err = BGParams(bp, c, bn, c), err
    if best is None:
        sd = np.sqrt(v)
        best = BGParams(sd, 1.0, sd, 1.0)
    return best


def estimate_bg_digital(series: ReturnSeries, window, quantiles=DEFAULT_BG_QUANTILES, dt=1.0, maxiter=800) -> BGParams:
    """BG parameters matching empirical tail probabilities of log returns.

    Probabilities at the empirical ``quantiles`` are matched with
    Anderson-Darling weights, plus the squared standardised mean gap so
    that c_p b_p - c_n b_n tracks the sample mean.
    """
    if window < 60:
        raise ConfigurationError("window must be at least 60 observations")
    ret = series.tail(window).log_returns
    probs = np.asarray(quantiles, dtype=float)
    q = np.quantile(ret, probs)
    emp = np.mean(ret[:, None] <= q[None, :], axis=0)
    mean, se = ret.mean(), ret.std(ddof=1) / np.sqrt(ret.size)
    span = np.ptp(ret)

    def unpack(u):
        u = np.clip(u, -30, 30)
        return BGParams(float(min(np.exp(u[0]), 0.99)), float(np.exp(u[1])), float(np.exp(u[2])), float(np.exp(u[3])))

    def objective(u):
        p = unpack(u)
        sd = np.sqrt(bg_cumulant(2, p, dt))
        half = max(16.0 * sd, 40.0 * max(p.b_p, p.b_n), 4.0 * span)
        try:
            eng = FourierEngine(p, dt, FourierSpec(n_points=2**12, half_width=half), make_jump_grid(p, n_per_side=4))
            cdf = eng.density().cdf(q)
        except (NumericalError, DomainError):
            return _PENALTY
        model_mean = bg_cumulant(1, p, dt)
        return anderson_darling_distance(cdf, emp, ret.size) + ((model_mean - mean) / se) ** 2

    p0 = bg_from_moments(ret / dt if dt != 1.0 else ret)
    start = np.log([p0.b_p, p0.c_p, p0.b_n, p0.c_n])
    fit, _ = _nelder_mead(objective, start, maxiter, xatol=1e-8, fatol=1e-10)
    return unpack(fit.x)


# ---------------------------------------------------------------------------
# option spreads
# ---------------------------------------------------------------------------


class ChainModel:
    """Upper and lower model quotes for a chain under a fixed BG law."""

    def __init__(self, chain: OptionChain, p: BGParams, n_points=2**12, n_per_side=400):
        self.chain, self.p = chain, p
        self.mu = bg_mean_rate(p)
        grid = make_jump_grid(p, n_per_side=n_per_side)
        self.charges = ChargeModel(p, grid)
        self.engines = {}
        for t in np.unique(chain.maturities):
            sd = np.sqrt(bg_cumulant(2, p, t))
            spec = FourierSpec(n_points=n_points, half_width=max(16.0 * sd, 40.0 * max(p.b_p, p.b_n)))
            self.engines[t] = FourierEngine(p, t, spec, grid)

    def quotes(self, pair):
        """(bid, ask) arrays aligned with the chain."""
        ch = self.chain
        bid, ask = np.empty(len(ch)), np.empty(len(ch))
        psi = {d: self.charges.psi(pair, d) for d in ("upper", "lower")}
        for t, eng in self.engines.items():
            sel = ch.maturities == t
            disc = np.exp(-ch.rate * t)
            for direction in ("upper", "lower"):
                dens = eng.density(psi[direction])
                st = ch.spot * np.exp((ch.rate - self.mu) * t + dens.x)
                k = ch.strikes[sel]
                is_call = ch.flags[sel] == "C"
                pay = np.where(
                    is_call[:, None], np.maximum(st[None, :] - k[:, None], 0.0), np.maximum(k[:, None] - st[None, :], 0.0)
                )
                val = disc * (pay @ dens.pdf) * dens.dx
                # calls: ask under the upper law; puts: ask under the lower law
                is_ask = is_call if direction == "upper" else ~is_call
                idx = np.flatnonzero(sel)
                ask[idx[is_ask]] = val[is_ask]
                bid[idx[~is_ask]] = val[~is_ask]
        return bid, ask


def _bg2bg_from_vector(p, u):
    up = p.b_p * (1.0 + 0.999 * expit(u[0]))
    dn = p.b_n * float(np.clip(expit(u[1]), 1e-6, 1.0))
    return up, dn


def calibrate_spreads(
    chain: OptionChain, p0: BGParams, pair0=None, family="exponential", maxiter=400, model=None
) -> EstimationResult:
    """Distortion minimising squared bid and ask errors on an option chain.

    The BG law stays at ``p0`` and the spot at the chain's quoted spot.
    ``family`` selects the exponential pair (start ``pair0``, an
    ExpDistortionParams) or the BG2BG pair (start ``pair0``, a
    BG2BGParams, parameterised by the distorted scales).
    """
    if len(chain) < 8:
        raise ConfigurationError("calibration needs at least 8 quotes")
    if not (np.any(chain.strikes < chain.spot) and np.any(chain.strikes > chain.spot)):
        raise ConfigurationError("quotes must span both sides of the money")
    model = model or ChainModel(chain, p0)
    scale = chain.spot**2

    if family == "exponential":
        start = exp_params_to_vector(pair0 or DEFAULT_START)
        build = lambda u: exp_distortion_pair(exp_params_from_vector(u))  # noqa: E731
    elif family == "bg2bg":
        init = pair0 or BG2BGParams(p0, 1.2 * p0.b_p, 0.9 * p0.b_n)
        start = np.array([logit((init.b_p_new / p0.b_p - 1.0) / 0.999), logit(min(init.b_n_new / p0.b_n, 1 - 1e-9))])
        build = lambda u: bg2bg_pair(p0, *_bg2bg_from_vector(p0, u))  # noqa: E731
    else:
        raise ConfigurationError("family must be 'exponential' or 'bg2bg'")

    def objective(u):
        try:
            bid, ask = model.quotes(build(u))
        except NumericalError:
            return _PENALTY
        return float(np.sum((ask - chain.asks) ** 2 + (bid - chain.bids) ** 2) / scale)

    fit, history = _nelder_mead(objective, start, maxiter, xatol=1e-8, fatol=1e-18)
    pair = build(fit.x)
    params = pair.params
    return _finish(f"calibrate-{family}", pair, params, p0, fit, history, model.charges)


# ---------------------------------------------------------------------------
# quantisation of estimate panels
# ---------------------------------------------------------------------------


@dataclass
class QuantizedPoint:
    center: np.ndarray
    weight: float


def _as_vector(res):
    if isinstance(res, EstimationResult):
        if isinstance(res.distortion, ExpDistortionParams):
            return np.array(res.distortion.as_tuple(), dtype=float)
        if res.bg is not None:
            return np.array(res.bg.as_tuple(), dtype=float)
        raise DomainError("estimation result carries no parameters")
    return np.asarray(res, dtype=float)


def quantize_estimates(results, k, seed=0):
    """k-means representatives of parameter vectors, heaviest cluster first.

    Accepts EstimationResults (their distortion, else BG parameters) or
    raw vectors.  Clustering runs on z-scored coordinates; centers are
    reported in the original units with weights equal to cluster shares.
    """
    if len(results) == 0:
        raise DomainError("no estimates to quantize")
    data = np.array([_as_vector(r) for r in results])
    n = data.shape[0]
    if not 1 <= k <= n:
        raise DomainError(f"k must lie in [1, {n}]")
    if k == n:
        return [QuantizedPoint(row.copy(), 1.0 / n) for row in data]
    loc, scale = data.mean(axis=0), data.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    z = (data - loc) / scale
    if k == 1:
        labels = np.zeros(n, dtype=int)
    else:
        _, labels = kmeans2(z, k, minit="++", seed=seed)
    out = []
    for lab in np.unique(labels):
        members = data[labels == lab]
        out.append(QuantizedPoint(members.mean(axis=0), members.shape[0] / n))
    return sorted(out, key=lambda q: -q.weight)
