"""Choquet driver, extreme densities psi and level-set masses.

For a claim sensitivity z on a jump grid the driver is

    g(z) = int_0^inf G+(nu(z+ > w)) dw + int_0^inf G-(nu(z- > w)) dw,

evaluated exactly for step functions by sorting node values.  The
maximising density psi^U satisfies g(z) = int psi^U z dnu; for a
general z it is

    psi^U(y) = G+'(nu{z >= z(y)})   if z(y) > 0
             = -G-'(nu{z <= z(y)})  if z(y) < 0
             = 0                    if z(y) = 0,

with level sets taken on the piecewise-linear interpolant of z.  The
lower density is the upper density of -z.
"""

from dataclasses import dataclass

import numpy as np

from .distortions import MeasureDistortionPair, distorted_levy_measure
from .errors import DomainError, InvariantError, NumericalError
from .levy import BGParams, JumpGrid, bg_tail_mass, characteristic_exponent, make_jump_grid
from .special import exp1


@dataclass(frozen=True)
class GridFunction:
    """Values z(y_k) of a claim sensitivity at the nodes of a jump grid."""

    grid: JumpGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.nodes.shape:
            raise InvariantError("values must match the grid nodes")
        if not np.all(np.isfinite(vals)):
            raise DomainError("grid function values must be finite")
        object.__setattr__(self, "values", vals)

    def __add__(self, other):
        return GridFunction(self.grid, self.values + other.values)

    def scaled(self, factor):
        return GridFunction(self.grid, factor * self.values)


def _choquet_side(values, weights, gamma_fn):
    mask = values > 0
    if not mask.any():
        return 0.0
    v, w = values[mask], weights[mask]
    order = np.argsort(-v, kind="stable")
    v, w = v[order], w[order]
    cum = np.cumsum(w)
    steps = v - np.append(v[1:], 0.0)
    return float(np.sum(np.asarray(gamma_fn(cum)) * steps))


def choquet_driver(z: GridFunction, pair: MeasureDistortionPair) -> float:
    """g(z): exact Choquet integral of the grid step function z."""
    w = z.grid.weights
    return _choquet_side(z.values, w, pair.gamma_plus) + _choquet_side(-z.values, w, pair.gamma_minus)


def driver_density(z: GridFunction, pair: MeasureDistortionPair) -> np.ndarray:
    """Discrete maximising density: sum(psi * z * weights) == choquet_driver(z).

    psi at each node is the increment of the distorted cumulative mass
    divided by the node weight, following the descending order of z+ (and
    of z-, with a minus sign).
    """
    psi = np.zeros_like(z.values)
    w = z.grid.weights
    for sign, fn in ((1.0, pair.gamma_plus), (-1.0, pair.gamma_minus)):
        vals = sign * z.values
        idx = np.flatnonzero(vals > 0)
        if idx.size == 0:
            continue
        order = idx[np.argsort(-vals[idx], kind="stable")]
        cum = np.cumsum(w[order])
        dist = np.asarray(fn(cum))
        inc = np.diff(np.concatenate([[0.0], dist]))
        with np.errstate(divide="ignore", invalid="ignore"):
            psi[order] = sign * np.where(w[order] > 0, inc / w[order], 0.0)
    return psi


def psi_monotone(y, p: BGParams, pair: MeasureDistortionPair, direction="upper"):
    """Extreme density for a nondecreasing claim with z(0) = 0.

    upper: G+'(nu[y, inf)) on y > 0 and -G-'(nu(-inf, y]) on y < 0;
    lower: -G-'(nu[y, inf)) on y > 0 and G+'(nu(-inf, y]) on y < 0.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y == 0):
        raise DomainError("psi is not defined at y = 0")
    tail = np.asarray(bg_tail_mass(y, p))
    return psi_from_tail_masses(y > 0, tail, pair, direction)


def psi_from_tail_masses(positive, tail, pair, direction="upper"):
    """Monotone-claim psi from precomputed tail masses nu[y, inf) (y > 0)
    and nu(-inf, y] (y < 0); ``positive`` flags the nodes with y > 0."""
    if direction == "upper":
        out = np.where(positive, pair.d_gamma_plus(tail), -np.asarray(pair.d_gamma_minus(tail)))
    elif direction == "lower":
        out = np.where(positive, -np.asarray(pair.d_gamma_minus(tail)), pair.d_gamma_plus(tail))
    else:
        raise DomainError("direction must be 'upper' or 'lower'")
    return out if out.ndim else float(out)


def distorted_levy_interval_mass(p: BGParams, pair, intervals, direction="upper"):
    """Distorted mass of a finite union of intervals bounded away from 0."""
    for lo, hi in intervals:
        if lo <= 0 <= hi:
            raise DomainError("intervals must be bounded away from the origin")
    return distorted_levy_measure(intervals, p, pair, direction)


@dataclass(frozen=True)
class DistortedLevyDensity:
    """Lévy intensity reweighted by 1 + psi on a jump grid."""

    grid: JumpGrid
    psi: np.ndarray
    direction: str = "upper"

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        if psi.shape != self.grid.nodes.shape:
            raise InvariantError("psi must match the grid nodes")
        if not np.all(np.isfinite(psi)):
            raise NumericalError("psi must be finite")
        if np.any(1.0 + psi < -1e-12):
            raise InvariantError("1 + psi must be non-negative")
        object.__setattr__(self, "psi", psi)

    @property
    def multiplier(self):
        return np.maximum(1.0 + self.psi, 0.0)

    @property
    def weights(self):
        return self.grid.weights * self.multiplier

    @property
    def edge_multiplier(self):
        """Multipliers at the innermost negative and positive nodes."""
        pos = self.grid.nodes > 0
        mult = self.multiplier
        return float(mult[~pos][-1]), float(mult[pos][0])

    def characteristic_exponent(self, theta):
        return characteristic_exponent(theta, self.grid, self.multiplier, self.edge_multiplier)

    def risk_charge(self):
        """int (e^y - 1) psi nu(dy) by quadrature."""
        return float(np.sum(np.expm1(self.grid.nodes) * self.psi * self.grid.weights))


def distorted_density(p: BGParams, pair, direction="upper", grid: JumpGrid = None) -> DistortedLevyDensity:
    """Monotone-claim distortion of a BG density evaluated on a jump grid."""
    grid = grid if grid is not None else make_jump_grid(p)
    return DistortedLevyDensity(grid, psi_monotone(grid.nodes, p, pair, direction), direction)


# ---------------------------------------------------------------------------
# level sets of piecewise-linear interpolants
# ---------------------------------------------------------------------------


class _SideGeometry:
    """Fixed segment layout on one half-line, in the variable t = |y|."""

    def __init__(self, t_nodes, eps, shape, scale, anchor_zero):
        self.t = t_nodes
        self.eps = eps
        self.shape, self.scale = shape, scale
        self.anchor = anchor_zero
        self.inner = t_nodes[0] > eps * (1 + 1e-12)
        ta = [eps] if self.inner else []
        tb = [t_nodes[0]] if self.inner else []
        ta += list(t_nodes)
        tb += list(t_nodes[1:]) + [np.inf]
        self.ta, self.tb = np.array(ta), np.array(tb)
        self.tail_a = self.tail(self.ta)
        self.tail_b = self.tail(self.tb)
        self.mass = np.maximum(self.tail_a - self.tail_b, 0.0)

    def tail(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        fin = np.isfinite(t)
        if fin.any():
            out[fin] = self.shape * exp1(np.maximum(t[fin], 1e-300) / self.scale)
        return out

    def segments(self, z):
        """Start values and slopes of each segment for rows of z (R x n)."""
        t = self.t
        dt = np.diff(t)
        mid_slope = np.diff(z, axis=1) / dt if t.size > 1 else np.zeros((z.shape[0], 0))
        if self.anchor:
            first_slope = z[:, :1] / t[0]
        else:
            first_slope = mid_slope[:, :1] if t.size > 1 else np.zeros((z.shape[0], 1))
        last_slope = mid_slope[:, -1:] if t.size > 1 else first_slope
        slopes = [mid_slope, last_slope]
        starts = [z]
        if self.inner:
            starts.insert(0, z[:, :1] - first_slope * (t[0] - self.eps))
            slopes.insert(0, first_slope)
        return np.concatenate(starts, axis=1), np.concatenate(slopes, axis=1)


def _row_ranks(z):
    """Per row, number of values < z_k and number of values <= z_k."""
    rows, n = z.shape
    order = np.argsort(z, axis=1, kind="stable")
    zs = np.take_along_axis(z, order, axis=1)
    pos = np.broadcast_to(np.arange(n), (rows, n))
    new = np.ones((rows, n), dtype=bool)
    new[:, 1:] = zs[:, 1:] != zs[:, :-1]
    first = np.maximum.accumulate(np.where(new, pos, 0), axis=1)
    is_last = np.ones((rows, n), dtype=bool)
    is_last[:, :-1] = new[:, 1:]
    last = np.minimum.accumulate(np.where(is_last, pos, n)[:, ::-1], axis=1)[:, ::-1]
    below = np.empty((rows, n), dtype=np.int64)
    upto = np.empty((rows, n), dtype=np.int64)
    np.put_along_axis(below, order, first, axis=1)
    np.put_along_axis(upto, order, last + 1, axis=1)
    return order, below, upto


def _crossing_mass(geo, start, slope, seg, level):
    """Mass of {t in segment: z(t) >= level} for a level strictly inside its range."""
    ta, tb = geo.ta[seg], geo.tb[seg]
    cut = np.clip(ta + (level - start) / slope, ta, tb)
    tail_cut = geo.tail(cut)
    mass = np.where(slope > 0, tail_cut - geo.tail_b[seg], geo.tail_a[seg] - tail_cut)
    return np.maximum(mass, 0.0)


def _masses_at_or_above(z, sides):
    """nu{z >= z_k} for every row of z and every node k.

    ``sides`` pairs each half-line geometry with the column indices of
    its nodes in increasing |y|.  Interior segments have node values at
    both ends, so one sort per row ranks every threshold against them;
    the extension segments are compared directly.
    """
    rows, n = z.shape
    order, below, upto = _row_ranks(z)
    attached = np.zeros((rows, n))
    partial = np.zeros((rows, n))
    row_ids = np.arange(rows)[:, None]
    for geo, idx in sides:
        zz = z[:, idx]
        start, slope = geo.segments(zz)
        off = 1 if geo.inner else 0
        k = idx.size
        if k > 1:
            mass = geo.mass[off : off + k - 1]
            left_low = zz[:, :-1] <= zz[:, 1:]
            lo_node = np.where(left_low, idx[:-1], idx[1:])
            hi_node = np.where(left_low, idx[1:], idx[:-1])
            np.add.at(attached, (np.broadcast_to(row_ids, lo_node.shape), lo_node), np.broadcast_to(mass, lo_node.shape))
            first = np.take_along_axis(upto, lo_node, axis=1)
            stop = np.take_along_axis(below, hi_node, axis=1)
            count = np.maximum(stop - first, 0).ravel()
            if count.any():
                owner = np.repeat(np.arange(count.size), count)
                offs = np.arange(owner.size) - np.repeat(np.cumsum(count) - count, count)
                r, j = np.divmod(owner, k - 1)
                sorted_pos = first.ravel()[owner] + offs
                node = order[r, sorted_pos]
                seg = j + off
                m = _crossing_mass(geo, start[r, seg], slope[r, seg], seg, z[r, node])
                np.add.at(partial, (r, node), m)
        ext = ([0] if geo.inner else []) + [off + k - 1]
        for seg in ext:
            length = geo.tb[seg] - geo.ta[seg]
            s0, sl = start[:, seg], slope[:, seg]
            with np.errstate(invalid="ignore"):
                if np.isinf(length):
                    s1 = np.where(sl > 0, np.inf, np.where(sl < 0, -np.inf, s0))
                else:
                    s1 = s0 + sl * length
            lo, hi = np.minimum(s0, s1)[:, None], np.maximum(s0, s1)[:, None]
            full = lo >= z
            attached_ext = np.where(full, geo.mass[seg], 0.0)
            partial += attached_ext
            cross = (lo < z) & (z < hi)
            if cross.any():
                r, c = np.nonzero(cross)
                segs = np.full(r.size, seg)
                partial[r, c] += _crossing_mass(geo, s0[r], sl[r], segs, z[r, c])
    att_sorted = np.take_along_axis(attached, order, axis=1)
    suffix = np.concatenate([np.cumsum(att_sorted[:, ::-1], axis=1)[:, ::-1], np.zeros((rows, 1))], axis=1)
    return np.take_along_axis(suffix, below, axis=1) + partial


class LevelSetMasses:
    """Level-set masses of piecewise-linear interpolants on a fixed jump grid.

    The interpolant runs over [eps, inf) on each half-line: linear between
    nodes, extended linearly beyond the outermost node and, towards the
    cutoff, either through the origin (``anchor_zero``) or by extending
    the innermost segment.  Flat pieces at exactly the threshold level are
    counted in the level set.
    """

    def __init__(self, grid: JumpGrid, anchor_zero=False):
        if grid.bg is None:
            raise DomainError("level-set masses need the BG parameters of the grid")
        p = grid.bg
        pos = grid.nodes > 0
        self.pos, self.neg = np.flatnonzero(pos), np.flatnonzero(~pos)[::-1]
        if self.pos.size == 0 or self.neg.size == 0:
            raise DomainError("grid must have nodes on both sides of the origin")
        eps = grid.eps
        self.geoms = (
            _SideGeometry(grid.nodes[self.pos], eps, p.c_p, p.b_p, anchor_zero),
            _SideGeometry(-grid.nodes[self.neg], eps, p.c_n, p.b_n, anchor_zero),
        )
        self.anchor = anchor_zero
        geo_p, geo_n = self.geoms
        # masses of [y_k, inf) and (-inf, y_k] per node, with the origin
        # anchor inserted between the sides and a last entry for a flat
        # extension beyond the outermost node
        tail_node = bg_tail_mass(grid.nodes, p)
        total_p, total_n = geo_p.tail_a[0], geo_n.tail_a[0]
        right = np.insert(np.where(pos, tail_node, total_p + total_n - tail_node), self.pos[0], total_p)
        left = np.insert(np.where(pos, total_p + total_n - tail_node, tail_node), self.pos[0], total_n)
        self._right = np.append(right, right[0] + left[0])
        self._left = np.append(left, left[-1] + right[-1])
        self._keep = np.delete(np.arange(right.size), self.pos[0])
        self._tables = None

    def _monotone_runs(self, z):
        """Split anchored rows into nondecreasing, nonincreasing and other.

        For the monotone rows return indices into the extended mass tables:
        a tie run extends {z >= z_k} down to its first node and {z <= z_k}
        up to its last, and a run at an outermost node takes the flat
        extension beyond it.
        """
        seq = np.insert(z, self.pos[0], 0.0, axis=1)
        step = np.diff(seq, axis=1)
        up = np.all(step >= 0, axis=1)
        down = np.all(step <= 0, axis=1) & ~up
        runs = {}
        for mask, sign in ((up, 1.0), (down, -1.0)):
            if mask.any():
                runs[sign] = (mask, *self._run_index(sign * seq[mask]))
        return runs, ~(up | down)

    def _run_index(self, seq):
        rows, n = seq.shape
        col = np.broadcast_to(np.arange(n), (rows, n))
        new = np.ones((rows, n), dtype=bool)
        new[:, 1:] = seq[:, 1:] != seq[:, :-1]
        start = np.maximum.accumulate(np.where(new, col, 0), axis=1)
        ends = np.ones((rows, n), dtype=bool)
        ends[:, :-1] = new[:, 1:]
        stop = np.minimum.accumulate(np.where(ends, col, n - 1)[:, ::-1], axis=1)[:, ::-1]
        start = np.where((start == 0) & (stop > 0), n, start)
        stop = np.where((stop == n - 1) & (start < n - 1), n, stop)
        return start[:, self._keep], stop[:, self._keep]

    def _checked(self, values):
        z = np.atleast_2d(np.asarray(values, dtype=float))
        if not np.all(np.isfinite(z)):
            raise DomainError("grid function values must be finite")
        return z

    def masses(self, values):
        """Return (nu{z >= z_k}, nu{z <= z_k}) arrays shaped like ``values``."""
        z = self._checked(values)
        ge, le = np.empty_like(z), np.empty_like(z)
        general = np.ones(z.shape[0], dtype=bool)
        if self.anchor:
            runs, general = self._monotone_runs(z)
            for sign, (mask, start, stop) in runs.items():
                lo_tab, hi_tab = (self._right, self._left) if sign > 0 else (self._left, self._right)
                ge[mask] = lo_tab[start] if sign > 0 else lo_tab[stop]
                le[mask] = hi_tab[stop] if sign > 0 else hi_tab[start]
        if general.any():
            sides = ((self.geoms[0], self.pos), (self.geoms[1], self.neg))
            zg = z[general]
            ge[general] = _masses_at_or_above(zg, sides)
            le[general] = _masses_at_or_above(-zg, sides)
        return ge, le

    def psi(self, values, pair, direction="upper"):
        """psi_from_level_masses(values, *masses(values)) with derivatives of
        monotone rows looked up per node instead of per entry."""
        z = self._checked(values)
        if not self.anchor:
            return psi_from_level_masses(z, *self.masses(z), pair, direction)
        if self._tables is None or self._tables[0] is not pair:
            tabs = {
                (name, fn): np.asarray(getattr(pair, fn)(tab), dtype=float)
                for name, tab in (("right", self._right), ("left", self._left))
                for fn in ("d_gamma_plus", "d_gamma_minus")
            }
            self._tables = (pair, tabs)
        tabs = self._tables[1]
        psi = np.zeros_like(z)
        runs, general = self._monotone_runs(z)
        up_fn, dn_fn, up_sign = {
            "upper": ("d_gamma_plus", "d_gamma_minus", 1.0),
            "lower": ("d_gamma_minus", "d_gamma_plus", -1.0),
        }.get(direction, (None, None, None))
        if up_fn is None:
            raise DomainError("direction must be 'upper' or 'lower'")
        for sign, (mask, start, stop) in runs.items():
            ge_tab, ge_idx = ("right", start) if sign > 0 else ("left", stop)
            le_tab, le_idx = ("left", stop) if sign > 0 else ("right", start)
            zr = z[mask]
            val = np.where(
                zr > 0,
                up_sign * tabs[(ge_tab, up_fn)][ge_idx],
                np.where(zr < 0, -up_sign * tabs[(le_tab, dn_fn)][le_idx], 0.0),
            )
            psi[mask] = val
        if general.any():
            zg = z[general]
            sides = ((self.geoms[0], self.pos), (self.geoms[1], self.neg))
            ge, le = _masses_at_or_above(zg, sides), _masses_at_or_above(-zg, sides)
            psi[general] = psi_from_level_masses(zg, ge, le, pair, direction)
        return psi


def psi_from_level_masses(values, ge, le, pair, direction="upper"):
    """Combine level-set masses into psi following the sign of z."""
    z = np.asarray(values, dtype=float)
    pos, neg = z > 0, z < 0
    psi = np.zeros_like(z)
    if direction == "upper":
        psi[pos] = pair.d_gamma_plus(ge[pos])
        psi[neg] = -np.asarray(pair.d_gamma_minus(le[neg]))
    elif direction == "lower":
        psi[pos] = -np.asarray(pair.d_gamma_minus(ge[pos]))
        psi[neg] = pair.d_gamma_plus(le[neg])
    else:
        raise DomainError("direction must be 'upper' or 'lower'")
    return psi


def psi_grid_general(z, pair: MeasureDistortionPair, direction="upper", anchor_zero=False, level_sets=None):
    """psi at every node for one GridFunction or a stack of rows on one grid.

    ``z`` is a GridFunction, or a tuple (grid, values) with values of
    shape (rows, nodes).  ``level_sets`` may pass a prebuilt
    LevelSetMasses to reuse the grid geometry.
    """
    if isinstance(z, GridFunction):
        grid, values = z.grid, z.values[None, :]
        single = True
    else:
        grid, values = z
        values = np.atleast_2d(values)
        single = False
    ls = level_sets or LevelSetMasses(grid, anchor_zero)
    psi = ls.psi(values, pair, direction)
    return psi[0] if single else psi


# ---------------------------------------------------------------------------
# comonotonicity
# ---------------------------------------------------------------------------


@dataclass
class ComonotoneReport:
    comonotone: bool
    residual: float
    tolerance: float

    @property
    def additive(self):
        return (not self.comonotone) or self.residual <= self.tolerance


def is_comonotone(v1, v2, anchor_zero=True):
    """True when no pair of nodes is ordered oppositely by v1 and v2.

    With ``anchor_zero`` the point y = 0, where every increment vanishes,
    takes part in the comparison, so comonotone functions share their sign
    at each node.  Without it, functions crossing zero at different jump
    sizes can be comonotone yet not additive under the split driver.
    """
    if anchor_zero:
        v1, v2 = np.append(v1, 0.0), np.append(v2, 0.0)
    d1 = np.subtract.outer(v1, v1)
    d2 = np.subtract.outer(v2, v2)
    return not np.any(d1 * d2 < 0)


def check_comonotone_additivity(z1: GridFunction, z2: GridFunction, pair) -> ComonotoneReport:
    """Comonotonicity verdict and the residual |g(z1+z2) - g(z1) - g(z2)|."""
    g1, g2 = choquet_driver(z1, pair), choquet_driver(z2, pair)
    resid = abs(choquet_driver(z1 + z2, pair) - g1 - g2)
    tol = 1e-8 * (1.0 + abs(g1) + abs(g2))
    return ComonotoneReport(is_comonotone(z1.values, z2.values), float(resid), tol)
