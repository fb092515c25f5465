"""Bilateral gamma and multivariate bilateral gamma Lévy models.

A bilateral gamma (BG) process is the difference of two independent
gamma processes.  Its Lévy density is

    k(y) = c_p e^{-y/b_p} / y        for y > 0
    k(y) = c_n e^{-|y|/b_n} / |y|    for y < 0

with tail masses nu([y, inf)) = c_p E1(y/b_p) and
nu((-inf, y]) = c_n E1(|y|/b_n).  Time units are whatever the rate
parameters c_p, c_n are quoted in.

The multivariate model (MBG) adds a common variance-gamma component,
Brownian motion with drift vartheta and covariance Sigma subordinated by
a gamma clock with variance rate zeta, to independent BG components.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import special as _sp

from .errors import DomainError, InvariantError
from .special import bessel_kv_scaled, exp1


def _check_positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise InvariantError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class BGParams:
    """Bilateral gamma parameters: scales b_p, b_n and shapes c_p, c_n."""

    b_p: float
    c_p: float
    b_n: float
    c_n: float

    def __post_init__(self):
        for name in ("b_p", "c_p", "b_n", "c_n"):
            _check_positive(name, getattr(self, name))

    def as_tuple(self):
        return (self.b_p, self.c_p, self.b_n, self.c_n)

    def scaled_time(self, factor):
        """Same law with rates multiplied by ``factor`` (a change of time unit)."""
        return BGParams(self.b_p, self.c_p * factor, self.b_n, self.c_n * factor)


def bg_levy_density(y, p: BGParams):
    """Lévy density of a BG process at y != 0."""
    y = np.asarray(y, dtype=float)
    if np.any(y == 0):
        raise DomainError("Lévy density is not defined at y = 0")
    ay = np.abs(y)
    out = np.where(
        y > 0,
        p.c_p * np.exp(-ay / p.b_p) / ay,
        p.c_n * np.exp(-ay / p.b_n) / ay,
    )
    return out if out.ndim else float(out)


def bg_tail_mass(y, p: BGParams):
    """nu([y, inf)) for y > 0 and nu((-inf, y]) for y < 0, in closed form."""
    y = np.asarray(y, dtype=float)
    if np.any(y == 0) or np.any(np.isnan(y)):
        raise DomainError("tail mass requires y != 0")
    ay = np.abs(y)
    out = np.zeros(y.shape)
    pos = y > 0
    fin = np.isfinite(ay)
    if np.any(pos & fin):
        out[pos & fin] = p.c_p * exp1(ay[pos & fin] / p.b_p)
    if np.any(~pos & fin):
        out[~pos & fin] = p.c_n * exp1(ay[~pos & fin] / p.b_n)
    return out if out.ndim else float(out)


def bg_interval_mass(lo, hi, p: BGParams):
    """nu([lo, hi]) for intervals lying on one side of the origin.

    Infinite endpoints are allowed on the matching side.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    lo, hi = np.broadcast_arrays(lo, hi)
    out = np.zeros(lo.shape)
    pos = lo > 0
    neg = hi < 0
    if np.any(~(pos | neg) & (hi > lo)):
        raise DomainError("interval straddles the origin")
    if np.any(pos):
        t_lo = p.c_p * exp1(lo[pos] / p.b_p)
        h = hi[pos]
        t_hi = np.zeros_like(h)
        f = np.isfinite(h)
        if f.any():
            t_hi[f] = p.c_p * exp1(h[f] / p.b_p)
        out[pos] = t_lo - t_hi
    if np.any(neg):
        t_hi = p.c_n * exp1(-hi[neg] / p.b_n)
        lo_n = lo[neg]
        t_lo = np.zeros_like(lo_n)
        f = np.isfinite(lo_n)
        if f.any():
            t_lo[f] = p.c_n * exp1(-lo_n[f] / p.b_n)
        out[neg] = t_hi - t_lo
    return np.maximum(out, 0.0)


def bg_mean_rate(p: BGParams) -> float:
    """mu = int (e^y - 1) nu(dy) = -c_p log(1 - b_p) - c_n log(1 + b_n)."""
    if p.b_p >= 1.0:
        raise DomainError("the exponential moment is infinite when b_p >= 1")
    return float(-p.c_p * np.log1p(-p.b_p) - p.c_n * np.log1p(p.b_n))


def bg_char_exponent(theta, p: BGParams):
    """Closed-form int (e^{i theta y} - 1) nu(dy) for complex theta."""
    theta = np.asarray(theta, dtype=complex)
    return -p.c_p * np.log(1.0 - 1j * theta * p.b_p) - p.c_n * np.log(1.0 + 1j * theta * p.b_n)


def bg_cumulant(order: int, p: BGParams, t=1.0) -> float:
    """n-th cumulant of X_t: t (n-1)! (c_p b_p^n + (-1)^n c_n b_n^n)."""
    fact = float(_sp.factorial(order - 1))
    return t * fact * (p.c_p * p.b_p**order + (-1) ** order * p.c_n * p.b_n**order)


# ---------------------------------------------------------------------------
# jump grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpGrid:
    """Quadrature nodes for Lévy integrals, excluding (-eps, eps).

    ``weights`` are intensity times cell width; ``small_drift`` is the
    first moment int_{|y|<eps} y nu(dy) of the excluded jumps, used to
    restore the O(eps) drift the cutoff removes.
    """

    nodes: np.ndarray
    weights: np.ndarray
    widths: np.ndarray
    eps: float
    small_drift: float = 0.0
    bg: BGParams | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.nodes.shape != self.weights.shape or self.nodes.shape != self.widths.shape:
            raise InvariantError("nodes, weights and widths must have equal shape")
        if np.any(np.diff(self.nodes) <= 0):
            raise InvariantError("jump grid nodes must be strictly increasing")
        if np.any(np.abs(self.nodes) < self.eps * (1 - 1e-12)):
            raise InvariantError("jump grid nodes must exclude (-eps, eps)")
        if np.any(self.weights < 0):
            raise InvariantError("weights must be non-negative")

    @property
    def positive(self):
        return self.nodes > 0

    def integrate(self, values, multiplier=None):
        """Quadrature of int values(y) (1 + psi) nu(dy); multiplier = 1 + psi."""
        w = self.weights if multiplier is None else self.weights * multiplier
        return float(np.sum(np.asarray(values) * w))


def _side_cells(eps, scale, span, n):
    n_geo = max(int(0.75 * n), 2)
    n_lin = max(n - n_geo, 1)
    switch = max(scale, 2 * eps)
    geo = np.geomspace(eps, switch, n_geo + 1)
    lin = np.linspace(switch, span * scale, n_lin + 1)[1:]
    edges = np.concatenate([geo, lin])
    lo, hi = edges[:-1], edges[1:]
    mid = np.where(hi <= switch, np.sqrt(lo * hi), 0.5 * (lo + hi))
    return mid, hi - lo


def make_jump_grid(p: BGParams, eps=1e-6, n_per_side=4000, span=20.0) -> JumpGrid:
    """Geometric cells near zero and uniform cells in the tails.

    Each side runs from eps to ``span`` times its scale parameter.
    """
    if not (eps > 0 and n_per_side >= 4 and span > 1):
        raise DomainError("need eps > 0, n_per_side >= 4 and span > 1")
    mp, wp = _side_cells(eps, p.b_p, span, n_per_side)
    mn, wn = _side_cells(eps, p.b_n, span, n_per_side)
    nodes = np.concatenate([-mn[::-1], mp])
    widths = np.concatenate([wn[::-1], wp])
    weights = bg_levy_density(nodes, p) * widths
    drift = p.c_p * p.b_p * -np.expm1(-eps / p.b_p) - p.c_n * p.b_n * -np.expm1(-eps / p.b_n)
    return JumpGrid(nodes, weights, widths, float(eps), float(drift), p)


def cell_phase(theta, nodes, widths):
    """e^{i theta y} - 1 averaged over each cell [y - h/2, y + h/2].

    Spreading a node's mass uniformly over its cell multiplies the phase
    by sinc(theta h / 2); complex theta is allowed.
    """
    theta = np.asarray(theta)
    arg = np.multiply.outer(theta, widths) / (2.0 * np.pi)
    return np.exp(1j * np.multiply.outer(theta, nodes)) * np.sinc(arg) - 1.0


def characteristic_exponent(theta, grid: JumpGrid, multiplier=None, edge_multiplier=(1.0, 1.0)):
    """int (e^{i theta y} - 1) k(y) dy by quadrature over the jump grid.

    Each node's mass is spread uniformly over its cell.  ``multiplier``
    reweights the density (1 + psi for a distorted law).  The jumps inside
    (-eps, eps) are restored through their drift, scaled by
    ``edge_multiplier`` (the multipliers next to the cutoff).  Complex
    theta gives exponential moments, e.g. theta = -1j for E[e^X].
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=complex))
    w = grid.weights if multiplier is None else grid.weights * multiplier
    out = np.empty(theta.shape, dtype=complex)
    for start in range(0, theta.size, 256):
        th = theta[start : start + 256]
        out[start : start + 256] = cell_phase(th, grid.nodes, grid.widths) @ w
    out += 1j * theta * _edge_drift(grid, edge_multiplier)
    return out


def _edge_drift(grid, edge_multiplier):
    if grid.bg is None:
        return grid.small_drift
    p, eps = grid.bg, grid.eps
    up = p.c_p * p.b_p * -np.expm1(-eps / p.b_p)
    dn = p.c_n * p.b_n * -np.expm1(-eps / p.b_n)
    return edge_multiplier[1] * up - edge_multiplier[0] * dn


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def simulate_bg_increments(p: BGParams, dt, n, seed=None):
    """n i.i.d. BG increments over dt: Gamma(c_p dt, b_p) - Gamma(c_n dt, b_n)."""
    if not dt > 0:
        raise DomainError("dt must be positive")
    rng = _rng(seed)
    return rng.gamma(p.c_p * dt, p.b_p, size=n) - rng.gamma(p.c_n * dt, p.b_n, size=n)


def simulate_grid_levy(grid: JumpGrid, t, n, seed=None, multiplier=None, edge_multiplier=(1.0, 1.0)):
    """Sample X_t for the pure-jump law with density weights * multiplier.

    Jumps arrive as compound Poisson with sizes drawn from the grid
    cells (node plus a uniform offset within the cell width); the jumps
    below the cutoff enter as their drift.
    """
    rng = _rng(seed)
    w = grid.weights if multiplier is None else grid.weights * multiplier
    lam = float(w.sum())
    counts = rng.poisson(lam * t, size=n)
    total = int(counts.sum())
    idx = rng.choice(grid.nodes.size, size=total, p=w / lam)
    owner = np.repeat(np.arange(n), counts)
    sizes = grid.nodes[idx] + grid.widths[idx] * (rng.random(total) - 0.5)
    x = np.bincount(owner, weights=sizes, minlength=n)
    return x + t * _edge_drift(grid, edge_multiplier)


# ---------------------------------------------------------------------------
# multivariate bilateral gamma
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MBGParams:
    """Multivariate BG: per-asset (b_p, c_p, b_n, c_n), gamma variance rate
    ``zeta`` and the Brownian correlation matrix ``corr``.

    The idiosyncratic component of asset i is BG with shapes c - 1/zeta,
    so c * zeta > 1 is required.
    """

    b_p: np.ndarray
    c_p: np.ndarray
    b_n: np.ndarray
    c_n: np.ndarray
    zeta: float
    corr: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(getattr(self, k), dtype=float) for k in ("b_p", "c_p", "b_n", "c_n")]
        dim = arrs[0].size
        if any(a.shape != (dim,) for a in arrs):
            raise InvariantError("per-asset parameter vectors must share one length")
        if any(np.any(~np.isfinite(a) | (a <= 0)) for a in arrs):
            raise InvariantError("per-asset parameters must be positive")
        _check_positive("zeta", self.zeta)
        if np.any(arrs[1] * self.zeta <= 1) or np.any(arrs[3] * self.zeta <= 1):
            raise InvariantError("c * zeta > 1 is required for positive idiosyncratic shapes")
        corr = np.asarray(self.corr, dtype=float)
        if corr.shape != (dim, dim) or not np.allclose(corr, corr.T) or not np.allclose(np.diag(corr), 1):
            raise InvariantError("corr must be a symmetric unit-diagonal matrix")
        try:
            np.linalg.cholesky(corr)
        except np.linalg.LinAlgError:
            raise InvariantError("corr must be positive definite") from None
        for k, a in zip(("b_p", "c_p", "b_n", "c_n"), arrs):
            object.__setattr__(self, k, a)
        object.__setattr__(self, "corr", corr)

    @property
    def dim(self):
        return self.b_p.size

    @property
    def drift(self):
        """vartheta_i = (b_p - b_n) / zeta."""
        return (self.b_p - self.b_n) / self.zeta

    @property
    def vol(self):
        """sigma_i with sigma_i^2 = 2 b_p b_n / zeta."""
        return np.sqrt(2.0 * self.b_p * self.b_n / self.zeta)

    @property
    def covariance(self):
        s = self.vol
        return s[:, None] * self.corr * s[None, :]


def mbg_marginal_bg(m: MBGParams, i: int) -> BGParams:
    """Idiosyncratic BG component of asset i: (b_p, c_p - 1/zeta, b_n, c_n - 1/zeta)."""
    if not 0 <= i < m.dim:
        raise DomainError("asset index out of range")
    return BGParams(m.b_p[i], m.c_p[i] - 1.0 / m.zeta, m.b_n[i], m.c_n[i] - 1.0 / m.zeta)


def mbg_common_marginal(m: MBGParams, i: int) -> BGParams:
    """BG law of the variance-gamma coordinate i: shapes 1/zeta, scales b_p, b_n."""
    return BGParams(m.b_p[i], 1.0 / m.zeta, m.b_n[i], 1.0 / m.zeta)


def vg_levy_density(y, m: MBGParams):
    """Lévy density of the D-dimensional variance-gamma component at y != 0.

    (2/zeta) (2 pi)^{-D/2} |Sigma|^{-1/2} e^{vartheta' S^{-1} y}
      (B/A)^{D/4} K_{D/2}(sqrt(A B)),
    A = y' S^{-1} y, B = 2/zeta + vartheta' S^{-1} vartheta.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    dim = m.dim
    if y.shape[-1] != dim:
        raise DomainError("jump vectors must have the model dimension")
    cov = m.covariance
    inv = np.linalg.inv(cov)
    det = np.linalg.det(cov)
    th = m.drift
    quad_a = np.einsum("...i,ij,...j->...", y, inv, y)
    if np.any(quad_a <= 0):
        raise DomainError("VG density is not defined at y = 0")
    quad_b = 2.0 / m.zeta + th @ inv @ th
    arg = np.sqrt(quad_a * quad_b)
    lin = y @ (inv @ th)
    pref = (2.0 / m.zeta) * (2 * np.pi) ** (-dim / 2) / np.sqrt(det)
    log_val = lin - arg + (dim / 4) * np.log(quad_b / quad_a) + np.log(bessel_kv_scaled(dim / 2, arg))
    return pref * np.exp(log_val)


def simulate_mbg(m: MBGParams, dt, n, seed=None):
    """n draws of the D-dimensional MBG increment over dt (shape n x D)."""
    rng = _rng(seed)
    g = rng.gamma(dt / m.zeta, m.zeta, size=n)
    z = rng.standard_normal((n, m.dim)) @ np.linalg.cholesky(m.covariance).T
    common = g[:, None] * m.drift[None, :] + np.sqrt(g)[:, None] * z
    idio = np.column_stack(
        [simulate_bg_increments(mbg_marginal_bg(m, i), dt, n, rng) for i in range(m.dim)]
    )
    return common + idio
