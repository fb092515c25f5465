"""Distorted densities, drifts, option prices and the explicit PIDE solver.

Prices use the log-price dynamics

    log S_T = log S_0 + (r - mu) T + X_T,

where X is the BG process under the upper or lower distorted Lévy
density and mu = int (e^y - 1) nu(dy) is the undistorted exponential
drift.  Ask prices come from the measure favouring the claim's holder
(upper law for calls, lower law for puts) and bid prices from the other.
"""

from dataclasses import dataclass, field

import numpy as np

from .distortions import MeasureDistortionPair
from .driver import DistortedLevyDensity, LevelSetMasses, distorted_density, psi_monotone
from .errors import ConfigurationError, DomainError, InvariantError, NumericalError
from .levy import (
    BGParams,
    JumpGrid,
    bg_char_exponent,
    bg_cumulant,
    bg_mean_rate,
    cell_phase,
    make_jump_grid,
    simulate_grid_levy,
)
from .special import exp1

# phase matrices above this many bytes are recomputed on demand
_CACHE_BYTES = 40e6


# ---------------------------------------------------------------------------
# Fourier inversion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FourierSpec:
    """FFT size and log-price domain for density inversion.

    ``half_width`` fixes the domain explicitly; otherwise it is the larger
    of ``n_std`` standard deviations and ``tail_scales`` times the largest
    BG scale parameter.
    """

    n_points: int = 2**14
    n_std: float = 12.0
    tail_scales: float = 40.0
    half_width: float | None = None
    taper_width: float = 0.25
    leak_tol: float = 1e-4

    def __post_init__(self):
        n = self.n_points
        if n < 2**10 or n & (n - 1):
            raise ConfigurationError("n_points must be a power of two of at least 1024")
        if self.half_width is not None and not self.half_width > 0:
            raise ConfigurationError("half_width must be positive")
        if not 0 < self.taper_width <= 1:
            raise ConfigurationError("taper_width must lie in (0, 1]")


@dataclass
class LogDensity:
    """Density of a log-price increment on a uniform grid."""

    x: np.ndarray
    pdf: np.ndarray
    leakage: float = 0.0

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    def mass(self):
        return float(self.pdf.sum() * self.dx)

    def mean(self):
        return float(np.sum(self.x * self.pdf) * self.dx)

    def expectation(self, fn):
        return float(np.sum(fn(self.x) * self.pdf) * self.dx)

    def cdf(self, points):
        """P(X <= point), cell masses accumulated with linear interpolation."""
        cum = np.cumsum(self.pdf) * self.dx
        edges = self.x + 0.5 * self.dx
        return np.interp(points, edges, cum, left=0.0, right=1.0)


def _taper(theta, width):
    """Gaussian frequency window; its kernel is positive, so smoothing adds
    no negative lobes for the clipping step to distort."""
    top = np.abs(theta).max()
    return np.exp(-0.5 * (theta / (width * top)) ** 2)


class FourierEngine:
    """Caches the frequency grid and phase factors for one BG law and horizon.

    The exponent of a distorted law is the closed-form BG exponent plus a
    quadrature correction int (e^{i theta y} - 1) psi(y) k(y) dy on the
    jump grid, so the identity distortion reproduces the BG law exactly.
    """

    def __init__(self, p: BGParams, t, spec: FourierSpec = None, grid: JumpGrid = None, psis=()):
        if not t > 0:
            raise DomainError("horizon must be positive")
        self.p, self.t = p, float(t)
        self.spec = spec or FourierSpec()
        self.grid = grid if grid is not None else make_jump_grid(p, n_per_side=400)
        n = self.spec.n_points
        half = self.spec.half_width
        if half is None:
            half = self._half_width(None)
            for psi in psis:
                half = max(half, self._half_width(psi))
        self.half_width = half
        self.dx = 2.0 * half / n
        self.offsets = self.dx * np.arange(n) - half
        self.theta = 2.0 * np.pi * np.arange(n // 2 + 1) / (n * self.dx)
        self.base_exponent = bg_char_exponent(self.theta, p)
        self.window = _taper(self.theta, self.spec.taper_width)
        self._phase = None
        if self.theta.size * self.grid.nodes.size * 16 <= _CACHE_BYTES:
            self._phase = cell_phase(self.theta, self.grid.nodes, self.grid.widths)

    def _half_width(self, psi):
        p, g = self.p, self.grid
        var = bg_cumulant(2, p, self.t)
        scales = [p.b_p, p.b_n]
        if psi is not None:
            var += self.t * float(np.sum(g.nodes**2 * psi * g.weights))
            scales = _tail_scales(g, psi)
        return max(self.spec.n_std * np.sqrt(max(var, 0.0)), self.spec.tail_scales * max(scales))

    def mean(self, psi=None, drift=0.0):
        m = bg_cumulant(1, self.p, self.t) + drift * self.t
        if psi is not None:
            m += self.t * float(np.sum(self.grid.nodes * psi * self.grid.weights))
        return m

    def correction(self, weights):
        """int (e^{i theta y} - 1) weights(dy) over the engine frequencies."""
        if self._phase is not None:
            return self._phase @ weights
        out = np.empty(self.theta.size, dtype=complex)
        for s in range(0, self.theta.size, 512):
            th = self.theta[s : s + 512]
            out[s : s + 512] = cell_phase(th, self.grid.nodes, self.grid.widths) @ weights
        return out

    def density(self, psi=None, drift=0.0) -> LogDensity:
        """Density of X_t + drift t where X has intensity k (1 + psi)."""
        expo = self.base_exponent.copy()
        if psi is not None:
            expo += self.correction(np.asarray(psi) * self.grid.weights)
        expo += 1j * self.theta * drift
        phi = np.exp(self.t * expo) * self.window
        x = self.mean(psi, drift) + self.offsets
        # shift to the left end of the domain, then invert the half spectrum
        spec = np.conj(phi * np.exp(-1j * self.theta * x[0]))
        pdf = np.fft.irfft(spec, n=self.spec.n_points) / self.dx
        return _finish_density(x, pdf, self.spec.leak_tol)


def _tail_scales(grid, psi):
    """Exponential decay scales of k (1 + psi) fitted over |y| in [5b, 15b]."""
    p = grid.bg
    out = []
    for sign, scale in ((1.0, p.b_p), (-1.0, p.b_n)):
        ay = sign * grid.nodes
        sel = (ay >= 5 * scale) & (ay <= 15 * scale)
        mult = 1.0 + psi[sel]
        if sel.sum() < 3 or np.any(mult <= 0):
            out.append(scale)
            continue
        growth = np.polyfit(ay[sel], np.log(mult), 1)[0]
        decay = 1.0 / scale - max(growth, 0.0)
        if decay <= 0:
            raise NumericalError("distorted Lévy density does not decay in the tails")
        out.append(1.0 / decay)
    return out


def _finish_density(x, pdf, leak_tol):
    if not np.all(np.isfinite(pdf)):
        raise NumericalError("density inversion produced non-finite values")
    pdf = np.where(pdf < 1e-12, 0.0, pdf)
    dx = x[1] - x[0]
    total = pdf.sum() * dx
    if not total > 0:
        raise NumericalError("density inversion lost all mass")
    pdf = pdf / total
    edge = max(pdf.size // 40, 1)
    leak = float((pdf[:edge].sum() + pdf[-edge:].sum()) * dx)
    if leak > leak_tol:
        raise NumericalError(
            f"log-price domain too narrow: {leak:.2e} of the mass sits in the outer 5% "
            f"of [{x[0]:.4f}, {x[-1]:.4f}]"
        )
    return LogDensity(x, pdf, leak)


def density_from_levy(levy, t, spec: FourierSpec = None, drift=0.0) -> LogDensity:
    """Density of X_t for a BG law or a distorted density on a jump grid.

    ``levy`` is a BGParams (closed form) or a DistortedLevyDensity whose
    grid carries its BG parameters.
    """
    if isinstance(levy, BGParams):
        return FourierEngine(levy, t, spec, grid=make_jump_grid(levy, n_per_side=4)).density(drift=drift)
    if isinstance(levy, DistortedLevyDensity):
        if levy.grid.bg is None:
            raise DomainError("distorted density needs the BG parameters of its grid")
        return FourierEngine(levy.grid.bg, t, spec, levy.grid).density(levy.psi, drift)
    raise DomainError("levy must be BGParams or DistortedLevyDensity")


# ---------------------------------------------------------------------------
# drifts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DriftTriple:
    mu_upper: float
    mu_base: float
    mu_lower: float

    @property
    def risk_charge_upper(self):
        return self.mu_base - self.mu_upper

    @property
    def risk_charge_lower(self):
        return self.mu_lower - self.mu_base


def drift_triple(p: BGParams, pair: MeasureDistortionPair, grid: JumpGrid = None) -> DriftTriple:
    """Upper, base and lower pricing drifts.

    mu_U = mu - int (e^y - 1) psi_U dnu and mu_L = mu - int (e^y - 1) psi_L dnu,
    with both integrals by quadrature on the jump grid.
    """
    mu = bg_mean_rate(p)
    grid = grid if grid is not None else make_jump_grid(p)
    gain = np.expm1(grid.nodes) * grid.weights
    rc_up = float(np.sum(gain * psi_monotone(grid.nodes, p, pair, "upper")))
    rc_lo = -float(np.sum(gain * psi_monotone(grid.nodes, p, pair, "lower")))
    triple = DriftTriple(mu - rc_up, mu, mu + rc_lo)
    if not (triple.mu_upper <= mu <= triple.mu_lower):
        raise InvariantError(f"drift ordering violated: {triple}")
    return triple


# ---------------------------------------------------------------------------
# option prices
# ---------------------------------------------------------------------------

SIDES = ("call-upper", "put-lower", "call-lower", "put-upper")


class DistortedPricer:
    """Upper and lower European prices for one BG law, distortion and maturity."""

    def __init__(self, p: BGParams, pair, maturity, rate, spot=1.0, spec: FourierSpec = None, grid=None):
        if not (spot > 0 and maturity > 0):
            raise DomainError("spot and maturity must be positive")
        self.mu = bg_mean_rate(p)
        self.p, self.pair = p, pair
        self.maturity, self.rate, self.spot = float(maturity), float(rate), float(spot)
        grid = grid if grid is not None else make_jump_grid(p, n_per_side=800)
        self.psi = {d: psi_monotone(grid.nodes, p, pair, d) for d in ("upper", "lower")}
        self.engine = FourierEngine(p, maturity, spec, grid, psis=tuple(self.psi.values()))
        self._dens = {}

    def density(self, direction) -> LogDensity:
        if direction not in self._dens:
            self._dens[direction] = self.engine.density(self.psi[direction])
        return self._dens[direction]

    def terminal_prices(self, direction):
        dens = self.density(direction)
        return self.spot * np.exp((self.rate - self.mu) * self.maturity + dens.x), dens

    def price(self, strike, side):
        """Discounted payoff expectation; ``strike`` may be an array."""
        if side not in SIDES:
            raise DomainError(f"side must be one of {SIDES}")
        strike = np.asarray(strike, dtype=float)
        if np.any(strike <= 0):
            raise DomainError("strikes must be positive")
        kind, level = side.split("-")
        direction = level if kind == "call" else ("lower" if level == "upper" else "upper")
        st, dens = self.terminal_prices(direction)
        if kind == "call":
            pay = np.maximum(st[None, :] - strike.reshape(-1, 1), 0.0)
        else:
            pay = np.maximum(strike.reshape(-1, 1) - st[None, :], 0.0)
        val = np.exp(-self.rate * self.maturity) * (pay @ dens.pdf) * dens.dx
        val = np.maximum(val, 0.0).reshape(strike.shape)
        return float(val) if val.ndim == 0 else val

    def quotes(self, strike, flag):
        """(bid, ask) for calls (flag 'C') or puts (flag 'P')."""
        if flag.upper().startswith("C"):
            return self.price(strike, "call-lower"), self.price(strike, "call-upper")
        return self.price(strike, "put-lower"), self.price(strike, "put-upper")


def option_price_distorted(p: BGParams, pair, strike, maturity, rate, side, spot=1.0, spec=None):
    """Upper or lower European option price; see DistortedPricer."""
    return DistortedPricer(p, pair, maturity, rate, spot, spec).price(strike, side)


def simulate_distorted(levy: DistortedLevyDensity, t, n, seed=None):
    """X_t samples by compound Poisson on the grid with weights k (1 + psi)."""
    return simulate_grid_levy(levy.grid, t, n, seed, levy.multiplier, levy.edge_multiplier)


def mc_option_price(p, pair, strike, maturity, rate, side, spot=1.0, n=100_000, seed=0, grid=None):
    """Monte Carlo price and standard error under the distorted Lévy density."""
    kind, level = side.split("-")
    direction = level if kind == "call" else ("lower" if level == "upper" else "upper")
    levy = distorted_density(p, pair, direction, grid or make_jump_grid(p, n_per_side=2000))
    x = simulate_distorted(levy, maturity, n, seed)
    st = spot * np.exp((rate - bg_mean_rate(p)) * maturity + x)
    pay = np.maximum(st - strike, 0.0) if kind == "call" else np.maximum(strike - st, 0.0)
    pay = np.exp(-rate * maturity) * pay
    return float(pay.mean()), float(pay.std(ddof=1) / np.sqrt(n))


# ---------------------------------------------------------------------------
# explicit PIDE
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PIDEGrid:
    """Uniform log-price grid with N intervals and M time steps over [0, T]."""

    x_min: float
    x_max: float
    n_space: int
    n_time: int
    horizon: float

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ConfigurationError("x_min must be below x_max")
        if self.n_space < 2 or self.n_time < 1:
            raise ConfigurationError("need at least 2 space intervals and 1 time step")
        if not self.horizon > 0:
            raise ConfigurationError("horizon must be positive")

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.n_space

    @property
    def dt(self):
        return self.horizon / self.n_time

    @property
    def x(self):
        return self.x_min + self.dx * np.arange(self.n_space + 1)

    @property
    def t(self):
        return self.dt * np.arange(self.n_time + 1)

    @classmethod
    def centered(cls, center, half_width, n_space, n_time, horizon, node_at=None):
        """Grid on about [center - half_width, center + half_width] with the
        center on a node.  With ``node_at`` (for instance a log strike) the
        spacing is adjusted so that this point is a node as well."""
        dx = 2.0 * half_width / n_space
        if node_at is not None and node_at != center:
            gap = abs(node_at - center)
            dx = gap / max(np.round(gap / dx), 1.0)
        offset = dx * (n_space // 2)
        return cls(center - offset, center - offset + dx * n_space, n_space, n_time, horizon)


@dataclass
class ValuationSurface:
    """u[j, i] = value at calendar time t_j and log price x_i (row M is the payoff)."""

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    risk_charge: np.ndarray
    meta: dict = field(default_factory=dict)

    def value_at(self, x0, row=0):
        return float(np.interp(x0, self.x, self.u[row]))

    def to_rows(self):
        tt, xx = np.meshgrid(self.t, self.x, indexing="ij")
        return np.column_stack([tt.ravel(), xx.ravel(), self.u.ravel(), self.risk_charge.ravel()])


def _hat_rise(lo, hi, shape, scale, dx):
    """int_lo^hi (y - lo)/dx * shape e^{-y/scale}/y dy for 0 <= lo < hi."""
    e_lo = np.exp(-lo / scale)
    e_hi = np.exp(-hi / scale)
    with np.errstate(invalid="ignore"):
        ei = np.where(lo > 0, exp1(np.maximum(lo, 1e-300) / scale) - exp1(hi / scale), 0.0)
    return shape / dx * (scale * (e_lo - e_hi) - lo * ei)


def _hat_fall(lo, hi, shape, scale, dx):
    """int_lo^hi (hi - y)/dx * shape e^{-y/scale}/y dy for 0 < lo < hi."""
    ei = exp1(lo / scale) - exp1(hi / scale)
    return shape / dx * (hi * ei - scale * (np.exp(-lo / scale) - np.exp(-hi / scale)))


def pide_jump_grid(p: BGParams, dx, span=None) -> JumpGrid:
    """Nodes k dx with hat-function BG weights, exact for piecewise-linear u."""
    span = span if span is not None else 20.0 * max(p.b_p, p.b_n)
    k_max = max(int(np.ceil(span / dx)), 1)
    k = np.arange(1, k_max + 1, dtype=float)
    weights = []
    for shape, scale in ((p.c_p, p.b_p), (p.c_n, p.b_n)):
        rise = _hat_rise((k - 1) * dx, k * dx, shape, scale, dx)
        fall = _hat_fall(k * dx, (k + 1) * dx, shape, scale, dx)
        weights.append(rise + fall)
    nodes = np.concatenate([-k[::-1] * dx, k * dx])
    w = np.concatenate([weights[1][::-1], weights[0]])
    return JumpGrid(nodes, w, np.full(nodes.size, dx), min(1e-9, 0.5 * dx), 0.0, p)


_GAUSS = np.polynomial.legendre.leggauss(8)

# (gamma, sign) on the positive and negative half-lines for rows
# nondecreasing (+1) or nonincreasing (-1) in the jump size
_HAT_RULES = {
    ("upper", 1.0): (("gamma_plus", 1.0), ("gamma_minus", -1.0)),
    ("upper", -1.0): (("gamma_minus", -1.0), ("gamma_plus", 1.0)),
    ("lower", 1.0): (("gamma_minus", -1.0), ("gamma_plus", 1.0)),
    ("lower", -1.0): (("gamma_plus", 1.0), ("gamma_minus", -1.0)),
}


def _cell_integrals(fn, shape, scale, dx, k_max):
    """int over [j dx, (j+1) dx] of fn(shape E1(t / scale)) dt for j = 0..k_max.

    The first cell, where the tail mass diverges logarithmically, is split
    geometrically towards zero.
    """
    nodes, wts = _GAUSS
    lo = dx * np.arange(k_max + 1.0)
    t = lo[:, None] + 0.5 * dx * (nodes + 1.0)
    out = 0.5 * dx * (np.asarray(fn(shape * exp1(t / scale))) @ wts)
    edges = dx * 0.5 ** np.arange(60.0)
    a, b = edges[1:], edges[:-1]
    t0 = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * nodes
    out[0] = float(np.sum(0.5 * (b - a) * (np.asarray(fn(shape * exp1(t0 / scale))) @ wts)))
    return out


def pide_hat_distortion(p: BGParams, pair, dx, k_max, direction, row_sign):
    """int hat_k(y) psi(y) k(y) dy for the hat functions of pide_jump_grid.

    psi is the extreme density of a claim increment strictly monotone
    around node k (increasing for ``row_sign`` +1, decreasing for -1),
    where psi is a derivative of a distortion evaluated at the tail mass.
    Integrating by parts turns each hat integral into cell averages of
    the distortion of the tail mass.
    """
    out = []
    for (name, sign), shape, scale in zip(_HAT_RULES[(direction, row_sign)], (p.c_p, p.c_n), (p.b_p, p.b_n)):
        cells = _cell_integrals(getattr(pair, name), shape, scale, dx, k_max)
        out.append(sign * (cells[:-1] - cells[1:]) / dx)
    pos, neg = out
    return np.concatenate([neg[::-1], pos])


def pide_stability_bound(p: BGParams, pair, grid: PIDEGrid, drift, rate, jumps: JumpGrid):
    """dt (|a|/dx + lambda + G+(lambda) + r), which must not exceed 1."""
    lam = float(jumps.weights.sum())
    return grid.dt * (abs(drift) / grid.dx + lam + float(pair.gamma_plus(lam)) + abs(rate))


def pide_solve_explicit(
    payoff, p: BGParams, pair, grid: PIDEGrid, direction="upper", rate=0.0, drift=None, span=None
) -> ValuationSurface:
    """Explicit upwind march of the distorted valuation PIDE.

    Marching backwards from the payoff row, each step uses psi built from
    the current row's increments z_i(y_k) = u(x_i + y_k) - u(x_i):

        u <- u + dt [a u_x + sum_k W_k (1 + psi_ik) z_i(y_k) - r u].

    Values beyond the grid follow the payoff shape: u(x) = u(x_b) + f(x) - f(x_b).
    ``drift`` defaults to the martingale drift r - mu.
    """
    a = rate - bg_mean_rate(p) if drift is None else float(drift)
    jumps = pide_jump_grid(p, grid.dx, span)
    bound = pide_stability_bound(p, pair, grid, a, rate, jumps)
    if bound > 1.0:
        raise ConfigurationError(f"explicit stability bound violated: {bound:.3f} > 1; increase n_time")
    n, k_max = grid.n_space, jumps.nodes.size // 2
    x_ext = grid.x_min + grid.dx * np.arange(-k_max, n + k_max + 1)
    f_ext = np.asarray(payoff(x_ext), dtype=float)
    if not np.all(np.isfinite(f_ext)):
        raise DomainError("payoff must be finite on the extended grid")
    left = f_ext[:k_max] - f_ext[k_max]
    right = f_ext[k_max + n + 1 :] - f_ext[k_max + n]
    cols = np.concatenate([np.arange(k_max), np.arange(k_max + 1, 2 * k_max + 1)])
    ls = LevelSetMasses(jumps, anchor_zero=True)
    w = jumps.weights

    def increments(u):
        ext = np.concatenate([u[0] + left, u, u[-1] + right])
        win = np.lib.stride_tricks.sliding_window_view(ext, 2 * k_max + 1)
        return win[:, cols] - u[:, None], ext

    hat = {s: pide_hat_distortion(p, pair, grid.dx, k_max, direction, s) for s in (1.0, -1.0)}
    # a node that is the strict extremum of its row has an interpolant
    # level set of zero mass, where G+' saturates; treating the node's own
    # cell as its level set bounds the weight by G+(w)
    cap = np.asarray(pair.gamma_plus(w), dtype=float)

    def distorted_weights(z):
        """psi * w per entry, with exact hat integrals where z is strictly
        monotone around the node."""
        psi_w = np.minimum(ls.psi(z, pair, direction) * w, cap)
        seq = np.insert(z, k_max, 0.0, axis=1)
        step = np.diff(seq, axis=1)
        for s in (1.0, -1.0):
            rows = np.all(s * step >= 0, axis=1)
            if not rows.any():
                continue
            st = s * step[rows] > 0
            # a node is strict when both adjacent segments are; the
            # outermost nodes have a single neighbour inside the window
            left = np.concatenate([st[:, :1], st[:, : k_max - 1], st[:, k_max:]], axis=1)
            right = np.concatenate([st[:, :k_max], st[:, k_max + 1 :], st[:, -1:]], axis=1)
            strict = left & right
            psi_w[rows] = np.where(strict, hat[s], psi_w[rows])
        return psi_w

    def generator(u):
        z, ext = increments(u)
        psi_w = distorted_weights(z)
        jump = z @ w + np.sum(psi_w * z, axis=1)
        charge = np.sum(psi_w * z, axis=1)
        if a >= 0:
            ux = (ext[k_max + 1 : k_max + n + 2] - u) / grid.dx
        else:
            ux = (u - ext[k_max - 1 : k_max + n]) / grid.dx
        return a * ux + jump - rate * u, charge

    m = grid.n_time
    u = np.empty((m + 1, n + 1))
    charge = np.empty_like(u)
    u[m] = f_ext[k_max : k_max + n + 1]
    for j in range(m, 0, -1):
        gen, charge[j] = generator(u[j])
        u[j - 1] = u[j] + grid.dt * gen
        if not np.all(np.isfinite(u[j - 1])):
            raise NumericalError(f"non-finite values at time step {j - 1}")
    charge[0] = generator(u[0])[1]
    meta = {"drift": a, "stability": bound, "jump_nodes": int(jumps.nodes.size), "direction": direction}
    return ValuationSurface(grid.t, grid.x, u, charge, meta)


def call_payoff(strike):
    return lambda x: np.maximum(np.exp(x) - strike, 0.0)


def put_payoff(strike):
    return lambda x: np.maximum(strike - np.exp(x), 0.0)


def straddle_payoff(strike):
    return lambda x: np.abs(np.exp(x) - strike)


def breakpoint_payoff(prices, values):
    """Piecewise-linear payoff in the price, flat beyond the outer breakpoints."""
    prices, values = np.asarray(prices, float), np.asarray(values, float)
    if prices.size < 2 or np.any(np.diff(prices) <= 0):
        raise DomainError("breakpoints must be increasing with at least two points")
    return lambda x: np.interp(np.exp(x), prices, values)
