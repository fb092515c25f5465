"""Spectral and rebated portfolio choice.

Portfolio risk charges for independent BG assets (jumps arrive on one
coordinate at a time), the rebated driver sup_c [g^c(z) - b(c)] over the
family a = 1/c, b = 1, the rebated variation of a position of size
varpi, myopic one-asset allocation under four objectives, and the joint
choice of weights and invested amount.

Sign convention: charges returned here are non-negative, so a lower
growth rate is drift minus charge.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .distortions import MeasureDistortionPair, rebate_family_distortion
from .driver import GridFunction, choquet_driver, psi_from_tail_masses
from .errors import ConfigurationError, DomainError, NumericalError
from .levy import (
    BGParams,
    JumpGrid,
    MBGParams,
    bg_mean_rate,
    bg_tail_mass,
    make_jump_grid,
    mbg_common_marginal,
    mbg_marginal_bg,
)
from .pricing import FourierEngine, FourierSpec
from .special import exp1

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
TIE_TOL = 1e-10


def golden_max(fn, lo, hi, rtol=1e-8, max_iter=200):
    """Golden-section search for the maximum of a unimodal fn on [lo, hi].

    Returns (argmax, value).  Stops when the bracket is below
    rtol * (1 + |x|).
    """
    a, b = float(lo), float(hi)
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = fn(x1), fn(x2)
    for _ in range(max_iter):
        if b - a <= rtol * (1.0 + abs(x1)):
            break
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = fn(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = fn(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


# ---------------------------------------------------------------------------
# portfolio specification and the admissible set B
# ---------------------------------------------------------------------------


@dataclass
class PortfolioSpec:
    """Assets, short-sale limits L_i, leverage L_0, horizon and rate.

    ``assets`` is a list of BGParams (independent assets) or an MBGParams.
    ``drifts`` optionally overrides the model drift vector a.
    """

    assets: object
    short_limits: np.ndarray = None
    leverage: float = 0.0
    horizon: float = 1.0
    rate: float = 0.0
    drifts: np.ndarray = None

    def __post_init__(self):
        if isinstance(self.assets, MBGParams):
            dim = self.assets.dim
        else:
            self.assets = list(self.assets)
            if not self.assets or not all(isinstance(p, BGParams) for p in self.assets):
                raise ConfigurationError("assets must be BGParams or one MBGParams")
            dim = len(self.assets)
        limits = np.zeros(dim) if self.short_limits is None else np.asarray(self.short_limits, dtype=float)
        if limits.shape != (dim,) or np.any(limits < 0) or not self.leverage >= 0:
            raise ConfigurationError("short limits and leverage must be non-negative, one limit per asset")
        if not self.horizon > 0:
            raise ConfigurationError("horizon must be positive")
        self.short_limits = limits
        if self.drifts is not None:
            self.drifts = np.asarray(self.drifts, dtype=float)
            if self.drifts.shape != (dim,):
                raise ConfigurationError("one drift per asset is required")

    @property
    def dim(self):
        return self.short_limits.size

    @property
    def is_mbg(self):
        return isinstance(self.assets, MBGParams)

    @property
    def no_short_selling(self):
        return not np.any(self.short_limits) and self.leverage == 0

    def charged_assets(self):
        """BG laws whose jumps carry the risk charge (idiosyncratic parts for MBG)."""
        if self.is_mbg:
            return [mbg_marginal_bg(self.assets, i) for i in range(self.dim)]
        return self.assets

    def drift_vector(self):
        """a_i = int (e^y - 1) nu_i(dy), including the common VG part for MBG."""
        if self.drifts is not None:
            return self.drifts.copy()
        if self.is_mbg:
            m = self.assets
            return np.array(
                [bg_mean_rate(mbg_marginal_bg(m, i)) + bg_mean_rate(mbg_common_marginal(m, i)) for i in range(m.dim)]
            )
        return np.array([bg_mean_rate(p) for p in self.assets])

    def contains(self, theta, tol=1e-12):
        theta = np.asarray(theta, dtype=float)
        return bool(
            theta.shape == (self.dim,)
            and np.all(theta >= -self.short_limits - tol)
            and theta.sum() <= 1.0 + self.leverage + tol
        )

    def project(self, theta):
        """Euclidean projection onto B = {theta_i >= -L_i, sum theta <= 1 + L_0}."""
        shift = np.asarray(theta, dtype=float) + self.short_limits
        cap = 1.0 + self.leverage + self.short_limits.sum()
        clipped = np.maximum(shift, 0.0)
        if clipped.sum() <= cap:
            return clipped - self.short_limits
        desc = np.sort(shift)[::-1]
        cssv = np.cumsum(desc) - cap
        idx = np.arange(1, desc.size + 1)
        rho = np.flatnonzero(desc - cssv / idx > 0)[-1]
        tau = cssv[rho] / (rho + 1.0)
        return np.maximum(shift - tau, 0.0) - self.short_limits


# ---------------------------------------------------------------------------
# level sets and risk charges of independent BG portfolios
# ---------------------------------------------------------------------------


def portfolio_level_masses(levels, theta, assets):
    """nu(theta'(e^Y - 1) >= w) for w > 0 and nu(theta'(e^Y - 1) <= w) for w < 0.

    With independent assets only one coordinate jumps at a time, so the
    mass is a sum over assets of the BG tail beyond log(1 + w / theta_k)
    whenever that logarithm exists.  All tails share one E1 call.
    """
    levels = np.asarray(levels, dtype=float)
    if np.any(levels == 0):
        raise DomainError("level masses are defined for nonzero levels")
    flat = levels.ravel()
    rows, args, coefs = [], [], []
    for th, p in zip(np.asarray(theta, dtype=float), assets):
        if th == 0:
            continue
        ratio = flat / th
        idx = np.flatnonzero(ratio > -1.0)
        log_y = np.log1p(ratio[idx])
        up = log_y > 0
        rows.append(idx)
        args.append(np.where(up, log_y / p.b_p, -log_y / p.b_n))
        coefs.append(np.where(up, p.c_p, p.c_n))
    out = np.zeros(flat.size)
    if rows:
        arg = np.concatenate(args)
        vals = np.zeros(arg.size)
        finite = np.isfinite(arg)
        vals[finite] = exp1(arg[finite])
        np.add.at(out, np.concatenate(rows), np.concatenate(coefs) * vals)
    return out.reshape(levels.shape)


@dataclass
class LevelData:
    """Sensitivities, level-set masses and weights of one portfolio."""

    values: np.ndarray
    masses: np.ndarray
    weights: np.ndarray

    def charge(self, pair: MeasureDistortionPair) -> float:
        """int z psi^L dnu with the non-negative sign convention."""
        psi = psi_from_tail_masses(self.values > 0, self.masses, pair, "lower")
        return float(-np.sum(self.values * psi * self.weights))


class PortfolioCharge:
    """Risk charges of independent BG portfolios on cached per-asset jump grids."""

    def __init__(self, assets, n_per_side=1000, grids=None):
        self.assets = list(assets)
        self.grids = grids or [make_jump_grid(p, n_per_side=n_per_side) for p in self.assets]

    def levels(self, theta) -> LevelData:
        theta = np.asarray(theta, dtype=float)
        live = [k for k in range(len(self.grids)) if theta[k] != 0]
        if not live:
            empty = np.zeros(0)
            return LevelData(empty, empty, empty)
        vals = np.concatenate([theta[k] * np.expm1(self.grids[k].nodes) for k in live])
        weights = np.concatenate([self.grids[k].weights for k in live])
        return LevelData(vals, portfolio_level_masses(vals, theta, self.assets), weights)

    def __call__(self, theta, pair) -> float:
        return self.levels(theta).charge(pair)


def distorted_variation_ibg(theta, assets, pair, n_per_side=1000, model=None) -> float:
    """Risk charge sum_j int theta_j (e^y - 1) psi^L(theta, y) kappa_j(y) dy >= 0.

    ``theta`` must lie in the no-short-selling-with-leverage set implied
    by its own entries; use PortfolioSpec.contains for general bounds.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (len(assets),) or not np.all(np.isfinite(theta)):
        raise DomainError("theta must be a finite vector with one weight per asset")
    model = model or PortfolioCharge(assets, n_per_side)
    return model(theta, pair)


@dataclass
class AllocationResult:
    theta_star: np.ndarray
    value: float
    c_star: float = None
    varpi_star: float = None
    horizon: float = 1.0
    success: bool = True
    bounded: bool = True
    message: str = ""
    diagnostics: dict = field(default_factory=dict)

    def value_coefficient(self, t=0.0):
        """C(t) = exp((T - t) * optimal lower growth rate)."""
        return float(np.exp((self.horizon - t) * self.value))

    def as_dict(self):
        out = {
            "theta_star": [float(v) for v in np.atleast_1d(self.theta_star)],
            "value": float(self.value),
            "c_star": None if self.c_star is None else float(self.c_star),
            "varpi_star": None if self.varpi_star is None else float(self.varpi_star),
            "success": self.success,
            "bounded": self.bounded,
        }
        if self.message:
            out["message"] = self.message
        if self.diagnostics:
            out["diagnostics"] = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.diagnostics.items()}
        return out


def _starts(spec: PortfolioSpec, n_starts, seed):
    rng = np.random.default_rng(seed)
    dim = spec.dim
    total = 1.0 + spec.leverage
    starts = [np.full(dim, total / dim)]
    while len(starts) < n_starts:
        starts.append(spec.project(rng.dirichlet(np.ones(dim)) * total * rng.uniform(0.5, 1.0)))
    return starts


def maximize_over_box(objective, spec: PortfolioSpec, n_starts=8, seed=0, maxiter=None, starts=None):
    """Nelder-Mead on projected weights with multistarts; returns (theta, value, success)."""

    def penalised(x):
        theta = spec.project(x)
        return -objective(theta) + 1e3 * float(np.sum((x - theta) ** 2))

    best = None
    ok_any = False
    for x0 in starts if starts is not None else _starts(spec, n_starts, seed):
        fit = minimize(
            penalised,
            x0,
            method="Nelder-Mead",
            options={"maxiter": maxiter or 400 * spec.dim, "xatol": 1e-9, "fatol": 1e-14, "adaptive": spec.dim > 3},
        )
        theta = spec.project(fit.x)
        val = objective(theta)
        ok_any |= bool(fit.success)
        if best is None or val > best[1]:
            best = (theta, val)
    zero = np.zeros(spec.dim)
    if spec.contains(zero):
        zero_val = objective(zero)
        if zero_val >= best[1] - TIE_TOL * max(1.0, abs(best[1])):
            best = (zero, zero_val)
    return best[0], best[1], ok_any


def optimal_theta_small_investor(
    spec: PortfolioSpec, pair, n_starts=8, seed=0, n_per_side=1000, model=None, maxiter=None
) -> AllocationResult:
    """Weights maximising the lower growth rate r + theta'(a - r) - charge(theta).

    The value coefficient C(t) of the returned result gives the lower
    valuation C(t) * wealth.  Constancy of the control over time is
    established only without short sales or leverage; otherwise the
    result carries a warning message.
    """
    model = model or PortfolioCharge(spec.charged_assets(), n_per_side)
    excess = spec.drift_vector() - spec.rate

    def objective(theta):
        return float(theta @ excess) - model(theta, pair)

    theta, val, ok = maximize_over_box(objective, spec, n_starts, seed, maxiter)
    msg = "" if spec.no_short_selling else "constant control is heuristic when short sales or leverage are allowed"
    return AllocationResult(theta, spec.rate + val, horizon=spec.horizon, success=ok, message=msg)


def mbg_objective(theta, m: MBGParams, pair, model=None, rate=0.0) -> float:
    """theta'(a - r) - charge, where a includes the common VG drift in closed
    form and only the idiosyncratic BG components are distorted."""
    spec = PortfolioSpec(m, rate=rate)
    model = model or PortfolioCharge(spec.charged_assets())
    theta = np.asarray(theta, dtype=float)
    if not spec.contains(theta, tol=1e-9):
        raise DomainError("theta lies outside the admissible set")
    return float(theta @ (spec.drift_vector() - rate)) - model(theta, pair)


# ---------------------------------------------------------------------------
# rebates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RebateSpec:
    """b(c) = chi exp((c - c_lower)^-chi2 - (c_upper - c)^-chi2) on the band."""

    c_lower: float
    c_upper: float
    chi: float = 1.0
    chi2: float = 1.0

    def __post_init__(self):
        if not 0 < self.c_lower < self.c_upper:
            raise ConfigurationError("rebate bounds need 0 < c_lower < c_upper")
        if not (self.chi > 0 and self.chi2 > 0):
            raise ConfigurationError("rebate shapes chi and chi2 must be positive")


def rebate_eval(spec: RebateSpec, c):
    """Rebate b(c): 0 at or above c_upper, +inf at or below c_lower."""
    c = np.asarray(c, dtype=float)
    out = np.zeros(c.shape)
    out[c <= spec.c_lower] = np.inf
    band = (c > spec.c_lower) & (c < spec.c_upper)
    if band.any():
        cb = c[band]
        with np.errstate(over="ignore"):
            expo = (1.0 / (cb - spec.c_lower)) ** spec.chi2 - (1.0 / (spec.c_upper - cb)) ** spec.chi2
            out[band] = spec.chi * np.exp(expo)
    return out if out.ndim else float(out)


def rebate_level_grid(spec: RebateSpec, n=64):
    """Log-spaced pre-scan levels in (c_lower, c_upper]."""
    return np.exp(np.linspace(np.log(spec.c_lower), np.log(spec.c_upper), n + 1))[1:]


def sup_over_levels(gain, spec: RebateSpec, n_scan=64, rtol=1e-8):
    """max over c in (c_lower, c_upper] of gain(c) - b(c); returns (c_star, value).

    A log-spaced scan seeds a golden-section search on log c around the
    best scan point.  Ties go to the larger c (smaller distortion).
    """
    grid = rebate_level_grid(spec, n_scan)
    vals = np.array([gain(c) - rebate_eval(spec, c) for c in grid])
    best = int(np.flatnonzero(vals >= vals.max() - TIE_TOL * max(1.0, abs(vals.max())))[-1])
    lo = np.log(grid[best - 1]) if best > 0 else np.log(spec.c_lower)
    hi = np.log(grid[best + 1]) if best + 1 < grid.size else np.log(spec.c_upper)

    def fn(logc):
        c = float(np.exp(logc))
        return gain(c) - rebate_eval(spec, c)

    x, v = golden_max(fn, lo, hi, rtol=rtol)
    if v > vals[best]:
        return float(np.exp(x)), float(v)
    return float(grid[best]), float(vals[best])


def choquet_lower_driver(z: GridFunction, pair) -> float:
    """g^c(z) = int psi^{L} z dnu >= 0: G- on z+ and G+ on z-."""
    return choquet_driver(z.scaled(-1.0), pair)


def rebated_driver(z: GridFunction, spec: RebateSpec, gamma=0.01, n_scan=64):
    """(value, c_star) of sup_c [g^c(z) - b(c)] over the family a = 1/c, b = 1."""

    def gain(c):
        return choquet_lower_driver(z, rebate_family_distortion(c, gamma))

    c_star, value = sup_over_levels(gain, spec, n_scan)
    return value, c_star


def rebated_lipschitz_constant(grid: JumpGrid, spec: RebateSpec, gamma=0.01) -> float:
    """K bounding |g(z1) - g(z2)| / ||z1 - z2||_{L2(nu)} on a grid.

    Every discrete extreme density obeys |psi_k| w_k <= max(G+(w_k), G-(w_k))
    by subadditivity; both distortions shrink as c grows, so the
    largest bound sits at c_lower.
    """
    pair = rebate_family_distortion(spec.c_lower, gamma)
    w = grid.weights[grid.weights > 0]
    cap = np.maximum(pair.gamma_plus(w), pair.gamma_minus(w))
    return float(np.sqrt(np.sum(cap**2 / w)))


class ChargeCurve:
    """c -> charge of a fixed claim under the rebate family, level masses cached."""

    def __init__(self, levels: LevelData, gamma=0.01):
        self.levels, self.gamma = levels, gamma
        self._memo = {}

    @classmethod
    def single_asset(cls, p: BGParams, gamma=0.01, n_per_side=2000, grid=None):
        grid = grid or make_jump_grid(p, n_per_side=n_per_side)
        z = np.expm1(grid.nodes)
        return cls(LevelData(z, np.asarray(bg_tail_mass(grid.nodes, p)), grid.weights), gamma)

    def __call__(self, c) -> float:
        c = float(c)
        if c not in self._memo:
            self._memo[c] = self.levels.charge(rebate_family_distortion(c, self.gamma))
        return self._memo[c]


def rebated_variation(varpi, p: BGParams, spec: RebateSpec, gamma=0.01, curve=None, with_level=False):
    """varpi a - sup_c [varpi R(c) - b(c)] for one BG asset of size varpi.

    R(c) is the lower risk charge of e^y - 1 under level c.  Concave in
    varpi; with_level also returns the maximising c.
    """
    if not varpi >= 0:
        raise DomainError("varpi must be non-negative")
    curve = curve or ChargeCurve.single_asset(p, gamma)
    c_star, sup = sup_over_levels(lambda c: varpi * curve(c), spec)
    value = varpi * bg_mean_rate(p) - sup
    return (value, c_star) if with_level else value


# ---------------------------------------------------------------------------
# myopic single-asset allocation
# ---------------------------------------------------------------------------

OBJECTIVES = ("rebated-net-return", "exp-utility-ce", "crra-ce", "rebated-variation")


@dataclass
class MyopicParams:
    """Objective parameters.  ``rebate`` None removes all distortion.

    The probability-distortion objective indexes MINVAR strength gamma
    by the rebate level c = 1 / gamma.
    """

    rebate: RebateSpec = None
    gamma: float = 0.01
    epsilon: float = 1.0
    eta: float = 3.0
    n_points: int = 2**13

    def __post_init__(self):
        if not (self.gamma > 0 and self.epsilon > 0 and self.eta > 0):
            raise ConfigurationError("gamma, epsilon and eta must be positive")


class MyopicProblem:
    """The four one-asset objectives of theta in [0, 1] on one BG law."""

    def __init__(self, objective, p: BGParams, rate, horizon=1 / 252, varpi=1000.0, params: MyopicParams = None):
        if objective not in OBJECTIVES:
            raise ConfigurationError(f"objective must be one of {', '.join(OBJECTIVES)}")
        if not varpi > 0:
            raise ConfigurationError("varpi must be positive")
        self.objective, self.p, self.rate, self.horizon, self.varpi = objective, p, rate, horizon, varpi
        self.params = params or MyopicParams()
        self._memo = {}
        if objective == "rebated-variation":
            self.drift = bg_mean_rate(p)
            self.curve = ChargeCurve.single_asset(p, self.params.gamma) if self.params.rebate else None
        else:
            dens = FourierEngine(p, horizon, FourierSpec(n_points=self.params.n_points)).density()
            self.x = dens.x
            self.prob = np.maximum(dens.pdf, 0.0) * dens.dx
            self.prob /= self.prob.sum()
            self.cdf = np.minimum(np.cumsum(self.prob), 1.0)

    def _distorted_return(self, gamma):
        """int (e^x - 1) d psi_gamma(F), psi_gamma(u) = 1 - (1 - u)^(1 + gamma)."""
        gamma = float(gamma)
        if gamma not in self._memo:
            dist = 1.0 - (1.0 - self.cdf) ** (1.0 + gamma)
            inc = np.diff(np.concatenate([[0.0], dist]))
            self._memo[gamma] = float(np.sum(np.expm1(self.x) * inc))
        return self._memo[gamma]

    def __call__(self, theta) -> float:
        pr, T, varpi, r = self.params, self.horizon, self.varpi, self.rate
        kind = self.objective
        if kind == "rebated-net-return":
            cash = varpi * (1.0 - theta) * np.expm1(r * T)
            if pr.rebate is None or theta == 0:
                return cash + varpi * theta * self._distorted_return(0.0)
            _, inf = sup_over_levels(lambda c: -varpi * theta * self._distorted_return(1.0 / c), pr.rebate)
            return cash - inf
        if kind == "rebated-variation":
            base = (1.0 - theta) * varpi * r * T + theta * varpi * self.drift * T
            if pr.rebate is None or theta == 0:
                return base
            _, sup = sup_over_levels(lambda c: theta * T * varpi * self.curve(c), pr.rebate)
            return base - sup
        wealth = varpi * ((1.0 - theta) * np.exp(r * T) + theta * np.exp(self.x))
        if kind == "exp-utility-ce":
            eps = pr.epsilon
            logs = -eps * np.log(wealth)
            top = logs.max()
            return float(-(top + np.log(np.sum(self.prob * np.exp(logs - top)))) / eps)
        eta = pr.eta
        if eta == 1.0:
            return float(np.exp(np.sum(self.prob * np.log(wealth))))
        logs = (1.0 - eta) * np.log(wealth)
        top = logs.max()
        return float(np.exp((top + np.log(np.sum(self.prob * np.exp(logs - top)))) / (1.0 - eta)))


def myopic_allocate(objective, p: BGParams, rate, horizon=1 / 252, varpi=1000.0, params: MyopicParams = None):
    """theta in [0, 1] maximising one myopic objective by golden section.

    Endpoints are compared explicitly so bang-bang optima are exact; ties
    within 1e-10 prefer theta = 0.
    """
    problem = MyopicProblem(objective, p, rate, horizon, varpi, params)
    theta, val = golden_max(problem, 0.0, 1.0, rtol=1e-7)
    candidates = [(0.0, problem(0.0)), (1.0, problem(1.0)), (theta, val)]
    top = max(v for _, v in candidates)
    for th, v in candidates:
        if v >= top - TIE_TOL * max(1.0, abs(top)):
            theta, val = th, v
            break
    if not np.isfinite(val):
        raise NumericalError(f"objective {objective} is not finite at the optimum")
    return AllocationResult(np.array([theta]), float(val), varpi_star=varpi, horizon=horizon)


# ---------------------------------------------------------------------------
# optimal amount and weights
# ---------------------------------------------------------------------------


class AmountProblem:
    """F(theta, varpi) = varpi T theta'a - sup_c [varpi T charge_c(theta) - b(c)]."""

    def __init__(self, spec: PortfolioSpec, rebate: RebateSpec, gamma=0.01, n_per_side=500, model=None):
        self.spec, self.rebate, self.gamma = spec, rebate, gamma
        self.model = model or PortfolioCharge(spec.charged_assets(), n_per_side)
        self.drift = spec.drift_vector()

    def curve(self, theta):
        return ChargeCurve(self.model.levels(theta), self.gamma)

    def value(self, theta, varpi, curve=None):
        if varpi == 0:
            return 0.0, self.rebate.c_upper
        curve = curve or self.curve(theta)
        T = self.spec.horizon
        c_star, sup = sup_over_levels(lambda c: varpi * T * curve(c), self.rebate)
        return varpi * T * float(theta @ self.drift) - sup, c_star

    def slopes(self, theta, curve=None):
        """Per-unit variation at c_upper (small varpi) and at c_lower (large varpi)."""
        curve = curve or self.curve(theta)
        a = float(theta @ self.drift)
        return a - curve(self.rebate.c_upper), a - curve(self.rebate.c_lower)

    def best_amount(self, theta, start=1.0, cap=1e15):
        """(varpi*, value, c*) for fixed weights; varpi* = inf when unbounded."""
        curve = self.curve(theta)
        small, large = self.slopes(theta, curve)
        if small <= 0:
            return 0.0, 0.0, self.rebate.c_upper
        if large > 0:
            return np.inf, np.inf, self.rebate.c_lower
        hi = max(start, 1e-12)
        f_hi = self.value(theta, hi, curve)[0]
        while hi < cap:
            f_next = self.value(theta, 2.0 * hi, curve)[0]
            if f_next <= f_hi:
                break
            hi, f_hi = 2.0 * hi, f_next
        hi *= 2.0
        x, _ = golden_max(lambda lv: self.value(theta, np.exp(lv), curve)[0], np.log(hi) - 60.0, np.log(hi), rtol=1e-10)
        varpi = float(np.exp(x))
        val, c_star = self.value(theta, varpi, curve)
        if val <= 0:
            return 0.0, 0.0, self.rebate.c_upper
        return varpi, val, c_star


def optimal_amount_and_weights(
    spec: PortfolioSpec, rebate: RebateSpec, init=None, gamma=0.01, n_per_side=500, max_rounds=6, maxiter=None, model=None
) -> AllocationResult:
    """Alternate golden section on varpi (with the inner c search) and
    Nelder-Mead on theta over B until the value stalls."""
    problem = AmountProblem(spec, rebate, gamma, n_per_side, model)
    if init is None:
        theta = np.full(spec.dim, (1.0 + spec.leverage) / spec.dim)
        varpi = 1.0
    else:
        theta, varpi = spec.project(np.asarray(init[0], dtype=float)), float(init[1])
    best = None
    for _ in range(max_rounds):
        varpi, value, c_star = problem.best_amount(theta, start=max(varpi, 1e-6))
        if not np.isfinite(varpi):
            small, large = problem.slopes(theta)
            return AllocationResult(
                theta,
                np.inf,
                rebate.c_lower,
                np.inf,
                spec.horizon,
                success=False,
                bounded=False,
                message="variation stays positive at every admissible level; the amount is unbounded",
                diagnostics={"slope_at_c_upper": small, "slope_at_c_lower": large},
            )
        if best is not None and value <= best[2] * (1.0 + 1e-9) + 1e-300:
            break
        best = (theta, varpi, value, c_star)
        if varpi == 0:
            break
        fixed = varpi
        theta_new, val_new, _ = maximize_over_box(
            lambda th: problem.value(th, fixed)[0], spec, starts=[theta], maxiter=maxiter
        )
        if val_new <= value * (1.0 + 1e-9):
            break
        theta = theta_new
    theta, varpi, value, c_star = best
    return AllocationResult(theta, value, c_star, varpi, spec.horizon)
