"""Sample paths from a Levy triplet via the Levy-Ito decomposition.

A path is assembled from four independent pieces

    X_t = a t + B_t + (large jumps, |x| >= 1) + (compensated jumps, eps < |x| < 1)

where the last term is the shell series over ``B_k = {1/(k+1) < |x| <= 1/k}``
truncated at ``eps``. Jumps with ``|x| <= eps`` are dropped and their
second moment ``t * int_{|x|<=eps} |x|^2 nu(dx)`` is reported as the L2 error
of the truncation.

Random numbers come from counter-addressed streams (:mod:`levyito.rng`):

========================  ==========  =====================================
piece                     component   substreams / counters
========================  ==========  =====================================
Gaussian, coordinate d    GAUSSIAN    2d and 2d+1, counter = step index
large jumps               LARGE_JUMPS 0 arrival times, 1 sizes
small jumps, shell k      SMALL_JUMPS 2k arrival times, 2k+1 sizes
small jumps, direct mode  SMALL_JUMPS 0 arrival times, 1 proposals
========================  ==========  =====================================

Arrival ``j`` of a compound Poisson stream uses counter ``j`` for its
exponential gap and counters ``2j``/``2j+1`` (``3j..3j+2`` in direct mode) of
the size substream. Because every number is addressed, a path does not depend
on which batch it was generated in.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import _kernels
from .measure import (
    AtomicMeasure,
    NonIntegrableError,
    QuadratureError,
    _gauss_legendre,
    _effective_piece,
    check_triplet,
    nu_integral,
)
from .regions import Annulus, abs_at_least
from .rng import (
    GAUSSIAN,
    LARGE_JUMPS,
    SMALL_JUMPS,
    RngStream,
    bits_to_uniform,
    box_muller,
    exponential,
)

SMALL_JUMP_MODES = ("shell-series", "rejection-direct")
AUTO_EPSILON_TARGET = 1e-6
LARGE = 0
_ROW_BUDGET = 1 << 21


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``epsilon=None`` picks the largest shell boundary ``1/(k+1)`` whose
    omitted second moment is at most ``1e-6`` per unit time (never below
    ``1/(k_max+1)``).
    """

    horizon: float = 1.0
    dt: float = 0.01
    epsilon: float = None
    k_max: int = 10_000
    small_jump_mode: str = "shell-series"

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError("horizon must be positive and finite")
        if not (0 < self.dt <= self.horizon):
            raise ValueError("dt must satisfy 0 < dt <= horizon")
        if self.epsilon is not None and not (0 < self.epsilon <= 1):
            raise ValueError("epsilon must lie in (0, 1]")
        if int(self.k_max) < 1:
            raise ValueError("k_max must be at least 1")
        if self.small_jump_mode not in SMALL_JUMP_MODES:
            raise ValueError(f"small_jump_mode must be one of {SMALL_JUMP_MODES}")


def make_grid(horizon, dt):
    """``0, dt, 2 dt, ..., horizon`` (the last step may be shorter)."""
    n = int(math.ceil(horizon / dt * (1 - 1e-12)))
    grid = np.arange(n + 1, dtype=float) * dt
    grid[-1] = horizon
    return grid


# ---------------------------------------------------------------------------
# size tables: categorical choice of an atom or a segment, then a position
# ---------------------------------------------------------------------------

class _SizeTable:
    """Jump-size laws for several groups (regions) of one measure.

    Atomic items are atoms. Density items are segments ``[lo, hi]`` of one
    sign on which the density is treated as a local power ``|x|^-beta``;
    this is exact for power densities and second-order accurate otherwise.
    """

    def __init__(self, dim, groups, masses, atoms=None, seg=None):
        groups = np.asarray(groups, dtype=np.int64)
        masses = np.asarray(masses, dtype=float)
        keep = masses > 0
        order = np.argsort(groups[keep], kind="stable")
        self.dim = dim
        groups, masses = groups[keep][order], masses[keep][order]
        self.atoms = None if atoms is None else np.asarray(atoms, dtype=float)[keep][order]
        self.seg = None if seg is None else tuple(np.asarray(s, dtype=float)[keep][order] for s in seg)
        self.labels, starts = np.unique(groups, return_index=True)
        self.starts = starts
        self.ends = np.append(starts[1:], len(groups))
        gpos = np.repeat(np.arange(len(self.labels)), self.ends - self.starts)
        self.rates = np.bincount(gpos, weights=masses, minlength=len(self.labels)) if len(groups) else np.zeros(0)
        cum = np.zeros(len(masses))
        for g, (a, b) in enumerate(zip(self.starts, self.ends)):
            c = np.cumsum(masses[a:b]) / self.rates[g]
            c[-1] = 1.0
            cum[a:b] = c
        self.keys = gpos + cum

    def rate(self, label):
        pos = np.searchsorted(self.labels, label)
        if pos < len(self.labels) and self.labels[pos] == label:
            return float(self.rates[pos])
        return 0.0

    def rates_for(self, labels):
        labels = np.asarray(labels)
        pos = np.clip(np.searchsorted(self.labels, labels), 0, max(len(self.labels) - 1, 0))
        ok = (len(self.labels) > 0) & (self.labels[pos] == labels) if len(self.labels) else np.zeros(labels.shape, bool)
        return np.where(ok, self.rates[pos] if len(self.labels) else 0.0, 0.0)

    def draw(self, labels, u1, u2):
        g = np.searchsorted(self.labels, labels)
        pos = np.searchsorted(self.keys, g + u1, side="right")
        pos = np.clip(pos, self.starts[g], self.ends[g] - 1)
        if self.atoms is not None:
            return self.atoms[pos]
        lo, hi, beta = (s[pos] for s in self.seg)
        sign = np.where(hi > 0, 1.0, -1.0)
        a = np.minimum(np.abs(lo), np.abs(hi))
        b = np.maximum(np.abs(lo), np.abs(hi))
        return (sign * _power_inverse(a, b, beta, u2))[:, None]


def _power_inverse(a, b, beta, u):
    """Inverse CDF of ``r^-beta`` on ``[a, b]`` (``a >= 0``)."""
    p = 1.0 - beta
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.where(a > 0, b / np.where(a > 0, a, 1.0), 1.0)
        log_form = a * ratio**u
        pow_form = a * (1.0 + u * (ratio**p - 1.0)) ** (1.0 / p)
        from_zero = b * u ** (1.0 / p)
        r = np.where(np.abs(p) < 1e-8, log_form, pow_form)
        r = np.where(a > 0, r, from_zero)
    return np.clip(np.nan_to_num(r, nan=0.5 * (a + b)), a, b)


def _segment_masses(m, lo, hi):
    """GL-16 masses and fitted local power exponents of density segments."""
    gx, gw = _gauss_legendre(16)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * gx
    d = m(x.ravel()).reshape(x.shape)
    masses = np.sum(d * (half[:, None] * gw), axis=1)
    # exponent fitted from the two nodes nearest the ends
    xa, xb = np.abs(x[:, 0]), np.abs(x[:, -1])
    da, db = d[:, 0], d[:, -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = -np.log(db / da) / np.log(xb / xa)
    beta = np.where(np.isfinite(beta), np.clip(beta, -30.0, 30.0), 0.0)
    return masses, beta


def _split_segments(lo, hi, pieces):
    """Subdivide magnitude ranges geometrically and uniformly (vectorized)."""
    edges = []
    for a, b in zip(lo, hi):
        pts = [np.linspace(a, b, pieces + 1)]
        if a > 0 and b / a > 1.05:
            pts.append(np.geomspace(a, b, int(math.ceil(math.log(b / a) / math.log(1.05))) + 1))
        e = np.unique(np.concatenate(pts))
        edges.append(e)
    return edges


def _density_region_table(m, region, label=LARGE):
    """Size table for ``nu`` restricted to a one-dimensional region."""
    los, his = [], []
    for base in m.support:
        for q in region.pieces():
            iv = base.intersect(q)
            if iv is None or iv.hi <= iv.lo:
                continue
            lo, hi = _effective_piece(m, iv)
            mag_lo, mag_hi = (-hi, -lo) if hi <= 0 else (lo, hi)
            for e in _split_segments([mag_lo], [mag_hi], 256):
                if hi <= 0:
                    e = -e[::-1]
                los.append(e[:-1])
                his.append(e[1:])
    if not los:
        return _SizeTable(1, [], [], seg=(np.zeros(0),) * 3)
    lo, hi = np.concatenate(los), np.concatenate(his)
    masses, beta = _segment_masses(m, lo, hi)
    return _SizeTable(1, np.full(len(lo), label), masses, seg=(lo, hi, beta))


def _atomic_region_table(m, region, label=LARGE):
    keep = region.contains(m.locations) if len(m.masses) else np.zeros(0, bool)
    return _SizeTable(m.dim, np.full(int(keep.sum()), label), m.masses[keep], atoms=m.locations[keep])


def _region_table(m, region, label=LARGE):
    if isinstance(m, AtomicMeasure):
        return _atomic_region_table(m, region, label)
    return _density_region_table(m, region, label)


def shell_index(r):
    """Shell number ``k`` with ``1/(k+1) < r <= 1/k`` for radii ``0 < r <= 1``."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        k = np.floor(1.0 / r).astype(np.int64)
    k = np.maximum(k, 1)
    k = np.where(r > 1.0 / k, k - 1, k)
    k = np.where(r <= 1.0 / (k + 1), k + 1, k)
    return k


def _n_shells(eps):
    """Shells ``k`` with ``1/k > eps``."""
    k = int(math.ceil(1.0 / eps))
    while k > 1 and 1.0 / k <= eps:
        k -= 1
    while 1.0 / (k + 1) > eps:
        k += 1
    return k


def _small_atomic_table(m, eps):
    r = m.norms
    keep = (r < 1.0) & (r > eps)
    return _SizeTable(m.dim, shell_index(r[keep]), m.masses[keep], atoms=m.locations[keep])


def _small_density_table(m, eps, n_shells):
    k = np.arange(1, n_shells + 1)
    outer = np.minimum(1.0 / k, 1.0)
    inner = np.maximum(1.0 / (k + 1), eps)
    los, his, labs = [], [], []
    for base in m.support:
        for sign in (1.0, -1.0):
            # magnitude range of this support piece on this side
            if sign > 0:
                pa, pb = max(base.lo, 0.0), base.hi
            else:
                pa, pb = max(-base.hi, 0.0), -base.lo
            if pb <= pa:
                continue
            a = np.maximum(inner, pa)
            b = np.minimum(outer, pb)
            ok = b > a
            if not ok.any():
                continue
            a, b, kk = a[ok], b[ok], k[ok]
            # four geometric sub-segments per shell
            t = np.linspace(0.0, 1.0, 5)
            e = a[:, None] * (b / a)[:, None] ** t
            e[:, 0], e[:, -1] = a, b
            lo, hi = e[:, :-1].ravel(), e[:, 1:].ravel()
            lab = np.repeat(kk, 4)
            if sign < 0:
                lo, hi = -hi, -lo
            los.append(lo)
            his.append(hi)
            labs.append(lab)
    if not los:
        return _SizeTable(1, [], [], seg=(np.zeros(0),) * 3)
    lo, hi, lab = np.concatenate(los), np.concatenate(his), np.concatenate(labs)
    masses, beta = _segment_masses(m, lo, hi)
    return _SizeTable(1, lab, masses, seg=(lo, hi, beta))


# ---------------------------------------------------------------------------
# Poisson arrivals
# ---------------------------------------------------------------------------

def _uniforms(seed, streams, subs, counters):
    return bits_to_uniform(_kernels.philox_bits(seed, streams, subs, counters))


def _arrivals(seed, streams, subs, rates, horizon):
    """Poisson arrival times for many rows ``(stream, substream, rate)``.

    Returns ``(row, time, arrival_index)`` sorted by row then time.
    """
    streams = np.asarray(streams, dtype=np.uint64)
    subs = np.asarray(subs, dtype=np.uint64)
    rates = np.asarray(rates, dtype=float)
    active = np.nonzero(rates > 0)[0]
    t = np.zeros(len(active))
    rows, times, idx = [], [], []
    k = 0
    while active.size:
        u = _uniforms(seed, streams[active], subs[active], np.uint64(k))
        t = t + exponential(u, rates[active])
        keep = t <= horizon
        active, t = active[keep], t[keep]
        rows.append(active)
        times.append(t)
        idx.append(np.full(len(active), k, dtype=np.int64))
        k += 1
    if not rows:
        return np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.int64)
    rows, times, idx = np.concatenate(rows), np.concatenate(times), np.concatenate(idx)
    order = np.lexsort((idx, rows))
    return rows[order], times[order], idx[order]


def sample_poisson_events(rate, horizon, rng):
    """Event times of a rate-``rate`` Poisson process on ``(0, horizon]``.

    Gaps are ``-ln(1 - U_j) / rate`` with ``U_j`` the ``j``-th uniform of
    ``rng`` (anything with a ``uniforms_at(counters)`` method).
    """
    if not rate >= 0 or not math.isfinite(rate):
        raise ValueError(f"rate must be finite and non-negative, got {rate}")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if rate == 0:
        return np.zeros(0)
    out = []
    t = 0.0
    k = 0
    block = max(16, int(2 * rate * horizon) + 8)
    while True:
        u = np.asarray(rng.uniforms_at(np.arange(k, k + block, dtype=np.uint64)), dtype=float)
        gaps = exponential(u, float(rate))
        path = np.cumsum(np.concatenate(([t], gaps)))[1:]
        inside = path <= horizon
        if not inside.all():
            out.append(path[: int(np.argmin(inside))])
            break
        out.append(path)
        t = path[-1]
        k += block
    return np.concatenate(out)


@dataclass(frozen=True)
class JumpList:
    """Jump times (sorted) and sizes ``(J, n)``; ``shells`` labels each jump
    (0 for a large jump, ``k`` for shell ``B_k``)."""

    times: np.ndarray
    sizes: np.ndarray
    shells: np.ndarray

    def __len__(self):
        return len(self.times)


def _compound_rows(seed, table, streams, labels, time_subs, size_subs, horizon):
    """Compound Poisson jumps for rows of ``(stream, group label)``."""
    rates = table.rates_for(labels)
    rows, times, k = _arrivals(seed, streams, time_subs, rates, horizon)
    if not len(rows):
        return rows, times, np.zeros((0, table.dim)), np.asarray(labels)[rows]
    st = np.asarray(streams, dtype=np.uint64)[rows]
    ss = np.asarray(size_subs, dtype=np.uint64)[rows]
    kk = k.astype(np.uint64)
    u1 = _uniforms(seed, st, ss, np.uint64(2) * kk)
    u2 = _uniforms(seed, st, ss, np.uint64(2) * kk + np.uint64(1))
    lab = np.asarray(labels)[rows]
    return rows, times, table.draw(lab, u1, u2), lab


def _finite_rate(m, region):
    try:
        rate = nu_integral(m, None, region)
    except NonIntegrableError:
        raise ValueError("nu(B) is infinite: use shell series for small jumps") from None
    if not math.isfinite(rate):
        raise ValueError("nu(B) is infinite: use shell series for small jumps")
    return rate


def sample_compound_poisson_jumps(m, region, horizon, rng):
    """Jumps of ``int_B x N_t(dx)``: Poisson(``nu(B)``) times, sizes from
    ``nu`` restricted to ``B`` and normalized.

    Arrival gaps use ``rng``; sizes use substream ``rng.substream + 1``.
    """
    _finite_rate(m, region)
    table = _region_table(m, region)
    rows, times, sizes, lab = _compound_rows(
        rng.seed, table, [rng.index], [LARGE], [rng.substream], [rng.substream + 1], horizon
    )
    return JumpList(times, sizes, np.zeros(len(times), np.int64))


# ---------------------------------------------------------------------------
# Gaussian part
# ---------------------------------------------------------------------------

def covariance_factor(q):
    """Lower Cholesky factor of ``Q`` with diagonal jitter up to 1e-10."""
    q = np.asarray(q, dtype=float)
    if not np.any(q):
        return np.zeros_like(q)
    if np.min(np.linalg.eigvalsh(q)) < -1e-12:
        raise ValueError("covariance not PSD")
    for jitter in (0.0, 1e-14, 1e-12, 1e-10):
        try:
            return np.linalg.cholesky(q + jitter * np.eye(len(q)))
        except np.linalg.LinAlgError:
            continue
    raise ValueError("covariance could not be factorized with jitter up to 1e-10")


def _gaussian_walk(seed, streams, factor, grid, base_sub=0):
    """Gaussian skeletons ``B_t`` of shape ``(rows, len(grid), n)``."""
    n = factor.shape[0]
    rows = len(streams)
    out = np.zeros((rows, len(grid), n))
    if not np.any(factor) or len(grid) < 2:
        return out
    steps = np.arange(len(grid) - 1, dtype=np.uint64)
    sd = np.sqrt(np.diff(grid))
    st = np.asarray(streams, dtype=np.uint64)[:, None]
    z = np.empty((rows, len(steps), n))
    for d in range(n):
        u1 = _uniforms(seed, st, np.uint64(base_sub + 2 * d), steps[None, :])
        u2 = _uniforms(seed, st, np.uint64(base_sub + 2 * d + 1), steps[None, :])
        z[:, :, d] = box_muller(u1, u2)
    inc = (z @ factor.T) * sd[None, :, None]
    np.cumsum(inc, axis=1, out=out[:, 1:, :])
    return out


def sample_gaussian_skeleton(q, drift, grid, rng):
    """Drift plus Brownian part ``a t + B_t`` at the grid times, shape ``(m+1, n)``.

    ``rng`` is the Gaussian stream; coordinate ``d`` uses substreams
    ``rng.substream + 2d`` and ``+ 2d + 1`` at counter = step index.
    """
    grid = np.asarray(grid, dtype=float)
    drift = np.atleast_1d(np.asarray(drift, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must start at 0 and increase strictly")
    walk = _gaussian_walk(rng.seed, [rng.index], covariance_factor(q), grid, rng.substream)[0]
    return grid[:, None] * drift[None, :] + walk


# ---------------------------------------------------------------------------
# small jumps
# ---------------------------------------------------------------------------

def _as_rows(x):
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def omitted_variance_rate(m, eps):
    """``int_{|x| <= eps} |x|^2 nu(dx)``."""
    region = Annulus(0.0, eps, True, True, m.dim)
    return float(nu_integral(m, lambda x: np.sum(_as_rows(x) ** 2, axis=1), region))


def _is_symmetric(m):
    if isinstance(m, AtomicMeasure):
        key = np.round(np.column_stack([m.locations, m.masses]), 15)
        mirror = np.round(np.column_stack([-m.locations, m.masses]), 15)
        a = key[np.lexsort(key.T[::-1])]
        b = mirror[np.lexsort(mirror.T[::-1])]
        return np.array_equal(a, b)
    sup = sorted((iv.lo, iv.hi) for iv in m.support)
    mir = sorted((-iv.hi, -iv.lo) for iv in m.support)
    if sup != mir:
        return False
    probe = np.geomspace(1e-6, 1e3, 97)
    return bool(np.array_equal(m(probe), m(-probe)))


def compensator_rate(m, eps):
    """``-int_{eps < |x| < 1} x nu(dx)`` (zero for symmetric measures)."""
    if _is_symmetric(m):
        return np.zeros(m.dim)
    region = Annulus(eps, 1.0, False, False, m.dim)
    if isinstance(m, AtomicMeasure):
        val = nu_integral(m, _as_rows, region)
        return -np.asarray(val, dtype=float).reshape(m.dim)
    return np.array([-float(nu_integral(m, lambda x: x, region))])


def choose_epsilon(m, horizon, k_max, target=AUTO_EPSILON_TARGET):
    """Largest ``1/(k+1)``, ``0 <= k <= k_max``, with omitted moment ``<= target``."""
    def ok(k):
        return omitted_variance_rate(m, 1.0 / (k + 1)) <= target

    if ok(0):
        return 1.0
    if not ok(k_max):
        return 1.0 / (k_max + 1)
    lo, hi = 0, k_max
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return 1.0 / (hi + 1)


@dataclass(frozen=True)
class SmallJumps:
    jumps: JumpList
    compensator_rate: np.ndarray
    omitted_variance: float
    epsilon: float


class _SmallJumpPlan:
    """Everything needed to draw the compensated small jumps of a measure."""

    def __init__(self, m, eps, k_max, mode):
        if eps < 1.0 / (k_max + 1) * (1 - 1e-12):
            raise ValueError(f"epsilon {eps} below 1/(k_max+1) with k_max={k_max}")
        self.m, self.eps, self.mode = m, eps, mode
        self.n_shells = _n_shells(eps) if eps < 1.0 else 0
        self.compensator = compensator_rate(m, eps) if eps < 1.0 else np.zeros(m.dim)
        try:
            self.omitted_rate = omitted_variance_rate(m, eps)
        except (NonIntegrableError, QuadratureError) as exc:
            raise ValueError(f"omitted-variance quadrature failed: {exc}") from None
        self.table = None
        self.labels = np.zeros(0, np.int64)
        if self.n_shells == 0:
            return
        if isinstance(m, AtomicMeasure):
            self.table = _small_atomic_table(m, eps)
        else:
            self.table = _small_density_table(m, eps, self.n_shells)
        self.labels = self.table.labels[self.table.rates > 0]
        if mode == "rejection-direct":
            self._setup_direct()

    def _setup_direct(self):
        m = self.m
        if isinstance(m, AtomicMeasure):
            # one compound Poisson over all small atoms
            self.direct_rate = float(np.sum(self.table.rates))
            keep = (m.norms < 1.0) & (m.norms > self.eps)
            self.direct_table = _SizeTable(m.dim, np.zeros(int(keep.sum()), np.int64), m.masses[keep], atoms=m.locations[keep])
            return
        beta = m.singularity
        r = np.geomspace(self.eps, 1.0, 4097)[1:-1]
        x = np.concatenate([r, -r])
        bound = np.max(m(x) * np.abs(x) ** beta, initial=0.0)
        self.envelope = 1.01 * bound
        p = 1.0 - beta
        one_side = math.log(1.0 / self.eps) if abs(p) < 1e-12 else (1.0 - self.eps**p) / p
        self.direct_rate = 2.0 * self.envelope * one_side

    def rows(self, streams):
        """Arrival rows ``(stream, label, time_sub, size_sub)`` for shell-series."""
        s = np.repeat(np.asarray(streams, dtype=np.uint64), len(self.labels))
        lab = np.tile(self.labels, len(streams))
        return s, lab, 2 * lab, 2 * lab + 1

    def draw(self, seed, streams, horizon):
        """Return ``(row_in_streams, times, sizes, shell_labels)``."""
        n = self.m.dim
        empty = (np.zeros(0, np.int64), np.zeros(0), np.zeros((0, n)), np.zeros(0, np.int64))
        if self.table is None or not len(self.labels):
            return empty
        if self.mode == "shell-series":
            s, lab, ts, ss = self.rows(streams)
            rows, times, sizes, labs = _compound_rows(seed, self.table, s, lab, ts, ss, horizon)
            return rows // len(self.labels), times, sizes, labs
        return self._draw_direct(seed, streams, horizon)

    def _draw_direct(self, seed, streams, horizon):
        streams = np.asarray(streams, dtype=np.uint64)
        zeros = np.zeros(len(streams), np.int64)
        if isinstance(self.m, AtomicMeasure):
            rows, times, sizes, _ = _compound_rows(
                seed, self.direct_table, streams, zeros, zeros, zeros + 1, horizon
            )
            return rows, times, sizes, shell_index(np.sqrt(np.sum(sizes**2, axis=1)))
        rates = np.full(len(streams), self.direct_rate)
        rows, times, k = _arrivals(seed, streams, zeros, rates, horizon)
        st = streams[rows]
        kk = k.astype(np.uint64) * np.uint64(3)
        u_side = _uniforms(seed, st, np.uint64(1), kk)
        u_pos = _uniforms(seed, st, np.uint64(1), kk + np.uint64(1))
        u_acc = _uniforms(seed, st, np.uint64(1), kk + np.uint64(2))
        beta = self.m.singularity
        r = _power_inverse(np.full(len(rows), self.eps), np.ones(len(rows)), np.full(len(rows), beta), u_pos)
        r = np.minimum(r, np.nextafter(1.0, 0.0))
        x = np.where(u_side < 0.5, r, -r)
        accept = u_acc * self.envelope < self.m(x) * r**beta
        accept &= r > self.eps
        x = x[accept]
        return rows[accept], times[accept], x[:, None], shell_index(np.abs(x))


def sample_compensated_small_jumps(m, eps, horizon, grid, rng, k_max=10_000, mode="shell-series"):
    """Shell-series small jumps with ``|x| > eps`` for one stream.

    ``rng`` is the small-jump stream (its substream is ignored; shells use
    their own substreams). Returns the jumps, the compensator drift per unit
    time and the omitted-variance bound ``horizon * int_{|x|<=eps}|x|^2 nu``.
    """
    plan = _SmallJumpPlan(m, eps, k_max, mode)
    _, times, sizes, labs = plan.draw(rng.seed, [rng.index], horizon)
    order = np.argsort(times, kind="stable")
    jumps = JumpList(times[order], sizes[order], labs[order])
    return SmallJumps(jumps, plan.compensator, horizon * plan.omitted_rate, eps)


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PathSample:
    """One cadlag path: values at the grid times plus the exact jump list.

    ``continuous`` is the path with all jumps removed (drift, Gaussian part
    and small-jump compensator); ``values = continuous + cumulative jumps``
    holds exactly at every grid time.
    """

    horizon: float
    grid: np.ndarray
    values: np.ndarray
    continuous: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    jump_shells: np.ndarray
    epsilon: float
    compensator_rate: np.ndarray
    omitted_variance: float
    seed: int
    replicate: int

    @classmethod
    def from_jumps(cls, times, sizes, horizon=1.0, grid=None, seed=0, replicate=0):
        """A pure-jump path with the given jumps (used to build fixtures)."""
        times = np.asarray(times, dtype=float)
        sizes = np.asarray(sizes, dtype=float)
        sizes = sizes.reshape(len(times), -1) if sizes.size else np.zeros((0, 1))
        order = np.argsort(times, kind="stable")
        times, sizes = times[order], sizes[order]
        if np.any(times <= 0) or np.any(times > horizon) or np.any(np.diff(times) <= 0):
            raise ValueError("jump times must be strictly increasing in (0, horizon]")
        if np.any(np.all(sizes == 0, axis=1)):
            raise ValueError("jump sizes must be nonzero")
        grid = make_grid(horizon, horizon) if grid is None else np.asarray(grid, dtype=float)
        dim = sizes.shape[1]
        cont = np.zeros((len(grid), dim))
        sums = _kernels.grid_jump_sums(
            np.zeros(len(times), np.int64), np.searchsorted(grid, times), sizes, 1, len(grid)
        )[0]
        return cls(float(horizon), grid, cont + sums, cont, times, sizes,
                   np.zeros(len(times), np.int64), 1.0, np.zeros(dim), 0.0, seed, replicate)

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def jumps(self):
        return JumpList(self.jump_times, self.jump_sizes, self.jump_shells)

    def stream_index(self, component):
        from .rng import stream_index
        return stream_index(self.replicate, component)

    def value_at(self, time):
        return self.values[_grid_index(self.grid, time)]


def _grid_index(grid, time):
    i = int(np.searchsorted(grid, time - 1e-12 * grid[-1]))
    if i >= len(grid) or abs(grid[i] - time) > 1e-9 * max(grid[-1], 1.0):
        raise ValueError(f"time {time} is not a grid time; paths are defined at grid times")
    return i


@dataclass(frozen=True, eq=False)
class PathBatch:
    """``N`` independent paths sharing one grid.

    Jumps are stored flat and sorted by ``(path, time)``: ``path_ids``,
    ``jump_times``, ``jump_sizes`` (``(J, n)``) and ``jump_shells``.
    """

    horizon: float
    grid: np.ndarray
    drift: np.ndarray
    compensator_rate: np.ndarray
    gaussian: np.ndarray
    path_ids: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    jump_shells: np.ndarray
    epsilon: float
    omitted_variance: float
    seed: int
    replicates: np.ndarray

    @property
    def n_paths(self):
        return self.gaussian.shape[0]

    def __len__(self):
        return self.n_paths

    @property
    def dim(self):
        return self.gaussian.shape[2]

    @property
    def offsets(self):
        return np.searchsorted(self.path_ids, np.arange(self.n_paths + 1))

    def grid_index(self, time):
        return _grid_index(self.grid, time)

    def _trend(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return t * self.drift + t * self.compensator_rate

    def trend_at(self, time):
        """``a t + c t`` (drift plus small-jump compensator) at ``time``."""
        return self._trend(time)

    @property
    def continuous(self):
        return self._trend(self.grid)[None, :, :] + self.gaussian

    @property
    def values(self):
        sums = _kernels.grid_jump_sums(
            self.path_ids, np.searchsorted(self.grid, self.jump_times), self.jump_sizes, self.n_paths, len(self.grid)
        )
        return self.continuous + sums

    def continuous_at(self, time):
        i = self.grid_index(time)
        return self._trend(self.grid[i])[None, :] + self.gaussian[:, i, :]

    def jump_sum_until(self, time):
        mask = self.jump_times <= time
        return _kernels.segment_count_sum(self.path_ids, mask, self.jump_sizes, self.n_paths)[1]

    def value_at(self, time):
        """``X_time`` for every path, shape ``(N, n)``; ``time`` must be a grid time."""
        i = self.grid_index(time)
        return self.continuous_at(self.grid[i]) + self.jump_sum_until(self.grid[i])

    def terminal(self):
        return self.value_at(self.horizon)

    def values_at_indices(self, idx):
        """``X`` at grid index ``idx[p]`` for each path ``p``."""
        idx = np.asarray(idx, dtype=np.int64)
        t = self.grid[idx]
        cont = self._trend(t) + self.gaussian[np.arange(self.n_paths), idx, :]
        mask = self.jump_times <= t[self.path_ids]
        return cont + _kernels.segment_count_sum(self.path_ids, mask, self.jump_sizes, self.n_paths)[1]

    def path(self, i):
        a, b = self.offsets[i], self.offsets[i + 1]
        values = self.values[i]
        cont = self.continuous[i]
        return PathSample(
            self.horizon, self.grid, values, cont, self.jump_times[a:b], self.jump_sizes[a:b],
            self.jump_shells[a:b], self.epsilon, self.compensator_rate, self.omitted_variance,
            self.seed, int(self.replicates[i]),
        )


def _resolve_epsilon(m, cfg):
    if cfg.epsilon is not None:
        return float(cfg.epsilon)
    return choose_epsilon(m, cfg.horizon, cfg.k_max)


def simulate_paths(triplet, cfg, seed, n_paths=1, first_replicate=0):
    """Simulate replicates ``first_replicate .. first_replicate + n_paths - 1``."""
    check_triplet(triplet)
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    m = triplet.measure
    n = triplet.dim
    grid = make_grid(cfg.horizon, cfg.dt)
    eps = _resolve_epsilon(m, cfg)
    factor = covariance_factor(triplet.covariance)
    large = _region_table(m, abs_at_least(1.0, n))
    plan = _SmallJumpPlan(m, eps, cfg.k_max, cfg.small_jump_mode)
    replicates = np.arange(first_replicate, first_replicate + n_paths, dtype=np.int64)

    per_path = max(len(grid) * n, len(plan.labels), 1)
    chunk = max(1, _ROW_BUDGET // per_path)
    gauss = np.empty((n_paths, len(grid), n))
    pids, times, sizes, shells = [], [], [], []
    for start in range(0, n_paths, chunk):
        reps = replicates[start:start + chunk]
        base = reps.astype(np.uint64) << np.uint64(4)
        gauss[start:start + len(reps)] = _gaussian_walk(seed, base | np.uint64(GAUSSIAN), factor, grid)
        lj = base | np.uint64(LARGE_JUMPS)
        zeros = np.zeros(len(reps), np.int64)
        r, t, s, lab = _compound_rows(seed, large, lj, zeros, zeros, zeros + 1, cfg.horizon)
        r2, t2, s2, lab2 = plan.draw(seed, base | np.uint64(SMALL_JUMPS), cfg.horizon)
        pids += [r + start, r2 + start]
        times += [t, t2]
        sizes += [s.reshape(-1, n), s2.reshape(-1, n)]
        shells += [np.zeros(len(r), np.int64), np.asarray(lab2, np.int64)]
    pid = np.concatenate(pids)
    tm = np.concatenate(times)
    order = np.lexsort((tm, pid))
    return PathBatch(
        horizon=float(cfg.horizon),
        grid=grid,
        drift=np.array(triplet.drift),
        compensator_rate=np.array(plan.compensator, dtype=float),
        gaussian=gauss,
        path_ids=pid[order],
        jump_times=tm[order],
        jump_sizes=np.concatenate(sizes)[order],
        jump_shells=np.concatenate(shells)[order],
        epsilon=eps,
        omitted_variance=float(cfg.horizon * plan.omitted_rate),
        seed=int(seed),
        replicates=replicates,
    )


def sample_levy_path(triplet, cfg, seed, replicate=0):
    """One path of replicate ``replicate`` (identical to row ``replicate`` of a batch)."""
    return simulate_paths(triplet, cfg, seed, 1, replicate).path(0)


def component_streams(seed, replicate):
    """The four streams a replicate uses, keyed by component name."""
    return {
        "gaussian": RngStream.for_component(seed, replicate, GAUSSIAN),
        "large_jumps": RngStream.for_component(seed, replicate, LARGE_JUMPS),
        "small_jumps": RngStream.for_component(seed, replicate, SMALL_JUMPS),
    }
