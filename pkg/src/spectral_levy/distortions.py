"""Measure distortion pairs (Gamma_plus, Gamma_minus) and their validation.

A pair distorts a Lévy measure nu into upper and lower measures

    nu_U(A) = nu(A) + G+(nu(A & (0, inf))) - G-(nu(A & (-inf, 0)))
    nu_L(A) = nu(A) - G-(nu(A & (0, inf))) + G+(nu(A & (-inf, 0)))

Both functions are increasing, concave, bounded, vanish at zero and
satisfy int_0^inf G(y) / (2 y^{3/2}) dy < inf.

Two families are provided:

* exponential: G+(x) = a (1 - e^{-cx})^{1/(1+gamma)}, G-(x) = (b/c)(1 - e^{-cx})
* BG2BG: maps a BG measure onto another BG measure with new scales,
  G+(x) = c E1(E1^{-1}(x/c) r) - x with r = b / b_new < 1.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .errors import DomainError, InvariantError
from .levy import BGParams, bg_interval_mass
from .special import exp1_difference, exp1_inv

#: value returned for G'(0+) when the true slope is infinite
SATURATED_SLOPE = 1e30


@dataclass(frozen=True)
class ExpDistortionParams:
    """Exponential-family parameters (c, gamma, a, b).

    Construction only requires positivity.  The family constraints
    0 < gamma < 1 and b <= 1 are reported by ``violations`` and enforced
    by ``exp_distortion_pair`` unless explicitly waived.
    """

    c: float
    gamma: float
    a: float
    b: float

    def __post_init__(self):
        for name in ("c", "gamma", "a", "b"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvariantError(f"{name} must be positive, got {v!r}")

    def violations(self):
        out = []
        if self.gamma >= 1:
            out.append("gamma >= 1 breaks the integral condition")
        if self.b > 1:
            out.append("b > 1 breaks Gamma_minus(x) <= x")
        return out

    def as_tuple(self):
        return (self.c, self.gamma, self.a, self.b)


class MeasureDistortionPair:
    """A pair of distortion functions with their derivatives.

    ``small_x_exponents`` optionally records the power-law exponents
    p with G(x) ~ x^p (up to slowly varying factors) as x -> 0; the
    validator uses them for the integral condition, which needs p > 1/2.
    """

    family = "custom"

    def __init__(self, gamma_plus, gamma_minus, d_plus, d_minus, small_x_exponents=None, params=None):
        self._gp, self._gm = gamma_plus, gamma_minus
        self._dp, self._dm = d_plus, d_minus
        self.small_x_exponents = small_x_exponents
        self.params = params

    def gamma_plus(self, x):
        return self._eval(self._gp, x, 0.0)

    def gamma_minus(self, x):
        return self._eval(self._gm, x, 0.0)

    def d_gamma_plus(self, x):
        return self._eval(self._dp, x, None)

    def d_gamma_minus(self, x):
        return self._eval(self._dm, x, None)

    @staticmethod
    def _eval(fn, x, at_zero):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(np.isnan(x)):
            raise DomainError("distortions are defined on [0, inf)")
        flat = np.atleast_1d(x).astype(float)
        out = np.empty_like(flat)
        zero = flat == 0
        inf = np.isinf(flat)
        mid = ~zero & ~inf
        if mid.any():
            out[mid] = fn(flat[mid])
        if zero.any():
            out[zero] = at_zero if at_zero is not None else min(float(fn(np.array([1e-300]))[0]), SATURATED_SLOPE)
        if inf.any():
            out[inf] = fn(np.array([1e300]))[0]
        out = out.reshape(x.shape)
        return out if out.ndim else float(out)

    def __repr__(self):
        return f"{type(self).__name__}({self.params!r})"


class IdentityPair(MeasureDistortionPair):
    """G+ = G- = 0: no distortion."""

    family = "identity"

    def __init__(self):
        zero = lambda x: np.zeros_like(x)  # noqa: E731
        super().__init__(zero, zero, zero, zero, small_x_exponents=(np.inf, np.inf))


class ExponentialPair(MeasureDistortionPair):
    family = "exponential"

    def __init__(self, params: ExpDistortionParams):
        c, g, a, b = params.as_tuple()
        power = 1.0 / (1.0 + g)

        def gp(x):
            return a * (-np.expm1(-c * x)) ** power

        def gm(x):
            return (b / c) * -np.expm1(-c * x)

        def dp(x):
            base = -np.expm1(-c * x)
            with np.errstate(divide="ignore", over="ignore"):
                val = a * c * power * np.exp(-c * x) * base ** (power - 1.0)
            return np.minimum(val, SATURATED_SLOPE)

        def dm(x):
            return b * np.exp(-c * x)

        super().__init__(gp, gm, dp, dm, small_x_exponents=(power, 1.0), params=params)


def exp_distortion_pair(params: ExpDistortionParams, allow_inadmissible=False) -> ExponentialPair:
    """Exponential-family distortion pair.

    Raises InvariantError for gamma >= 1 or b > 1 unless
    ``allow_inadmissible`` is set (useful to exercise the validator).
    """
    bad = params.violations()
    if bad and not allow_inadmissible:
        raise InvariantError("; ".join(bad))
    return ExponentialPair(params)


def rebate_family_distortion(c, gamma) -> ExponentialPair:
    """Member of the one-parameter family a = 1/c, b = 1 used with rebates."""
    if not c > 0:
        raise DomainError("distortion level c must be positive")
    return ExponentialPair(ExpDistortionParams(c, gamma, 1.0 / c, 1.0))


def _bg_to_bg_increase(shape, ratio):
    """x -> shape E1(E1^{-1}(x/shape) ratio) - x and its derivative."""

    def fn(x):
        w = exp1_inv(x / shape)
        return shape * exp1_difference(w, ratio)

    def deriv(x):
        w = exp1_inv(x / shape)
        with np.errstate(over="ignore"):
            val = np.expm1(w * (1.0 - ratio))
        return np.minimum(val, SATURATED_SLOPE)

    return fn, deriv


def _bg_to_bg_decrease(shape, ratio):
    """x -> x - shape E1(E1^{-1}(x/shape) ratio) and its derivative."""

    def fn(x):
        w = exp1_inv(x / shape)
        return -shape * exp1_difference(w, ratio)

    def deriv(x):
        w = exp1_inv(x / shape)
        return -np.expm1(-w * (ratio - 1.0))

    return fn, deriv


@dataclass(frozen=True)
class BG2BGParams:
    base: BGParams
    b_p_new: float
    b_n_new: float
    side: str = field(default="upper")


class BG2BGPair(MeasureDistortionPair):
    """Pair sending BG(b_p, c_p, b_n, c_n) to BG(b_p_new, c_p, b_n_new, c_n).

    For the upper side G+ acts on positive jumps with ratio b_p / b_p_new
    and G- on negative jumps with ratio b_n / b_n_new.  For the lower
    side the roles of the two half-lines are swapped.
    """

    family = "bg2bg"

    def __init__(self, params: BG2BGParams):
        p = params.base
        if params.side == "upper":
            plus_shape, plus_ratio = p.c_p, p.b_p / params.b_p_new
            minus_shape, minus_ratio = p.c_n, p.b_n / params.b_n_new
        elif params.side == "lower":
            plus_shape, plus_ratio = p.c_n, p.b_n / params.b_n_new
            minus_shape, minus_ratio = p.c_p, p.b_p / params.b_p_new
        else:
            raise DomainError("side must be 'upper' or 'lower'")
        if not (params.b_p_new > 0 and params.b_n_new > 0):
            raise InvariantError("new scales must be positive")
        gp, dp = _bg_to_bg_increase(plus_shape, plus_ratio)
        gm, dm = _bg_to_bg_decrease(minus_shape, minus_ratio)
        self.plus_ratio, self.minus_ratio = plus_ratio, minus_ratio
        super().__init__(gp, gm, dp, dm, small_x_exponents=(plus_ratio, 1.0), params=params)


def bg2bg_violations(pair: BG2BGPair):
    """Admissibility conditions: 1/2 < plus ratio <= 1 and minus ratio >= 1."""
    out = []
    if not 0.5 < pair.plus_ratio <= 1.0:
        out.append("gain-side scale ratio must lie in (1/2, 1]")
    if pair.minus_ratio < 1.0:
        out.append("loss-side scale ratio must be at least 1")
    return out


def bg2bg_pair(p: BGParams, b_p_up, b_n_up, allow_inadmissible=False) -> BG2BGPair:
    """Upper BG2BG pair producing BG(b_p_up, c_p, b_n_up, c_n).

    Admissible when b_p_up / 2 < b_p <= b_p_up and b_n_up <= b_n.
    """
    pair = BG2BGPair(BG2BGParams(p, float(b_p_up), float(b_n_up), "upper"))
    bad = bg2bg_violations(pair)
    if bad and not allow_inadmissible:
        raise InvariantError("; ".join(bad))
    return pair


def bg2bg_lower_pair(p: BGParams, b_p_lo, b_n_lo, allow_inadmissible=False) -> BG2BGPair:
    """Lower BG2BG pair producing BG(b_p_lo, c_p, b_n_lo, c_n).

    Admissible when b_p_lo <= b_p and b_n_lo / 2 < b_n <= b_n_lo.
    """
    pair = BG2BGPair(BG2BGParams(p, float(b_p_lo), float(b_n_lo), "lower"))
    bad = bg2bg_violations(pair)
    if bad and not allow_inadmissible:
        raise InvariantError("; ".join(bad))
    return pair


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass
class ValidationReport:
    passed: bool
    checks: dict
    details: dict

    def failed(self):
        return [k for k, ok in self.checks.items() if not ok]


def _check_function(fn, deriv, exponent, grid):
    vals = fn(grid)
    scale = 1.0 + np.abs(vals)
    checks = {}
    checks["zero_at_origin"] = abs(fn(np.array([1e-300]))[0]) <= 1e-8
    checks["non_negative"] = bool(np.all(vals >= -1e-12 * scale))
    checks["increasing"] = bool(np.all(np.diff(vals) >= -1e-8 * scale[1:]))
    steps = np.diff(grid)
    slopes = np.diff(vals) / steps
    # relative tolerance plus the rounding floor of a difference quotient
    slope_tol = 1e-8 * (1.0 + np.abs(slopes[1:])) + 8 * np.finfo(float).eps * scale[1:-1] / steps[1:]
    checks["concave"] = bool(np.all(np.diff(slopes) <= slope_tol))
    top_gain = abs(vals[-1] - vals[-2]) / (1.0 + abs(vals[-1]))
    checks["bounded"] = bool(np.isfinite(vals[-1]) and top_gain < 1e-6)
    # integral condition: the power at zero must exceed 1/2
    if exponent is None:
        lo = np.array([1e-10, 1e-9])
        v = fn(lo)
        exponent_used = float(np.log(v[1] / v[0]) / np.log(10.0)) if np.all(v > 0) else np.inf
        margin = 1e-3
    else:
        exponent_used, margin = float(exponent), 0.0
    # trapezoid on a log grid of the partial integral, reported for reference
    integrand = vals / (2.0 * grid**1.5)
    partial = float(trapezoid(integrand * grid, np.log(grid)))
    checks["integral_condition"] = bool(exponent_used > 0.5 + margin and np.isfinite(partial))
    return checks, {"small_x_exponent": exponent_used, "partial_integral": partial}, deriv


def validate_distortion(pair: MeasureDistortionPair, grid=None) -> ValidationReport:
    """Numerically check the structural requirements on both functions.

    The checks run on ``grid`` (default: 2000 log-spaced points over
    [1e-10, 1e6]).  The integral
    condition uses the family's small-x exponent when it is known and a
    local log-log slope at the lower end otherwise.
    """
    grid = np.logspace(-10, 6, 2000) if grid is None else np.sort(np.asarray(grid, dtype=float))
    if grid.size < 3:
        raise DomainError("validation grid needs at least three points")
    exps = pair.small_x_exponents or (None, None)
    checks, details = {}, {}
    for tag, fn, d, e in (
        ("plus", pair.gamma_plus, pair.d_gamma_plus, exps[0]),
        ("minus", pair.gamma_minus, pair.d_gamma_minus, exps[1]),
    ):
        if pair.family == "identity":
            c = {k: True for k in ("zero_at_origin", "non_negative", "increasing", "concave", "bounded", "integral_condition")}
            dd = {"small_x_exponent": np.inf, "partial_integral": 0.0}
        else:
            c, dd, _ = _check_function(lambda x, f=fn: np.atleast_1d(f(x)), d, e, grid)
        for k, v in c.items():
            checks[f"{tag}_{k}"] = v
        details[tag] = dd
    gm = np.atleast_1d(pair.gamma_minus(grid))
    checks["minus_below_identity"] = bool(np.all(gm <= grid * (1.0 + 1e-12)))
    return ValidationReport(all(checks.values()), checks, details)


# ---------------------------------------------------------------------------
# distorted measures of sets
# ---------------------------------------------------------------------------


def _split_mass(intervals, p):
    pos, neg = 0.0, 0.0
    for lo, hi in intervals:
        if hi <= lo:
            continue
        if hi > 0:
            a = max(lo, 0.0)
            pos += np.inf if a == 0 else float(bg_interval_mass(a, hi, p))
        if lo < 0:
            b = min(hi, 0.0)
            neg += np.inf if b == 0 else float(bg_interval_mass(lo, b, p))
    return pos, neg


def distorted_levy_measure(intervals, p: BGParams, pair: MeasureDistortionPair, direction="upper"):
    """Upper or lower distorted mass of a finite union of disjoint intervals."""
    pos, neg = _split_mass(intervals, p)
    base = pos + neg
    if direction == "upper":
        return base + pair.gamma_plus(pos) - pair.gamma_minus(neg)
    if direction == "lower":
        return base - pair.gamma_minus(pos) + pair.gamma_plus(neg)
    raise DomainError("direction must be 'upper' or 'lower'")


# ---------------------------------------------------------------------------
# config (de)serialisation
# ---------------------------------------------------------------------------


def pair_to_config(pair: MeasureDistortionPair) -> dict:
    """JSON-ready block with the family tag and its parameters."""
    if pair.family == "identity":
        return {"family": "identity"}
    if pair.family == "exponential":
        return {"family": "exponential", **dict(zip(("c", "gamma", "a", "b"), map(float, pair.params.as_tuple())))}
    if pair.family == "bg2bg":
        prm = pair.params
        return {"family": "bg2bg", "side": prm.side, "b_p_new": float(prm.b_p_new), "b_n_new": float(prm.b_n_new)}
    raise DomainError(f"family {pair.family!r} has no config form")


def pair_from_config(block: dict, p: BGParams = None) -> MeasureDistortionPair:
    """Inverse of pair_to_config; BG2BG blocks need the base law ``p``."""
    family = block.get("family", "exponential")
    try:
        if family == "identity":
            return IdentityPair()
        if family == "exponential":
            return exp_distortion_pair(ExpDistortionParams(*(float(block[k]) for k in ("c", "gamma", "a", "b"))))
        if family == "bg2bg":
            if p is None:
                raise DomainError("a BG2BG block needs the base BG parameters")
            make = bg2bg_pair if block.get("side", "upper") == "upper" else bg2bg_lower_pair
            return make(p, float(block["b_p_new"]), float(block["b_n_new"]))
    except KeyError as exc:
        raise DomainError(f"distortion block is missing {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (DomainError, InvariantError)):
            raise
        raise DomainError(f"distortion block has a non-numeric field: {exc}") from None
    raise DomainError(f"unknown distortion family {family!r}")
