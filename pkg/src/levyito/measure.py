"""Levy triplets, Levy measures and the characteristic exponent.

The exponent is evaluated from the Levy-Khintchine formula

    psi(u) = 1/2 u'Qu - i<a,u> + int_{|x|>=1} (1 - e^{i<u,x>}) nu(dx)
             + int_{|x|<1} (1 - e^{i<u,x>} + i<u,x>) nu(dx)

so that ``E exp(i<u, X_t>) = exp(-t psi(u))``. Atoms exactly on ``|x| = 1``
belong to the uncompensated (large-jump) integral.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import math
import warnings

import numpy as np
from scipy import integrate

from .regions import Interval, IntervalUnion

PSD_TOL = 1e-12
SYMMETRY_TOL = 1e-12
QUAD_RTOL = 1e-8


class InvalidTripletError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid Levy triplet: " + "; ".join(self.violations))


class NonIntegrableError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


class InvalidExponentError(ValueError):
    pass


def _readonly(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finite sum of point masses ``sum_j m_j delta_{x_j}`` on R^n minus 0."""

    locations: np.ndarray
    masses: np.ndarray

    kind = "atomic"

    def __post_init__(self):
        masses = np.atleast_1d(np.asarray(self.masses, dtype=float))
        locs = np.asarray(self.locations, dtype=float)
        if locs.ndim <= 1:
            locs = locs.reshape(len(masses), -1) if len(masses) else locs.reshape(0, max(locs.size, 1))
        if locs.shape[0] != len(masses):
            raise ValueError("one mass per atom location required")
        object.__setattr__(self, "locations", _readonly(locs))
        object.__setattr__(self, "masses", _readonly(masses))

    @classmethod
    def from_atoms(cls, atoms, dim=None):
        """Build from ``[(x, mass), ...]`` where ``x`` is a scalar or a vector."""
        atoms = list(atoms)
        if not atoms:
            return cls.empty(dim or 1)
        locs = [np.atleast_1d(np.asarray(x, dtype=float)) for x, _ in atoms]
        return cls(np.vstack(locs), [m for _, m in atoms])

    @classmethod
    def empty(cls, dim=1):
        return cls(np.zeros((0, dim)), np.zeros(0))

    @property
    def dim(self):
        return self.locations.shape[1]

    @property
    def total_mass(self):
        return float(self.masses.sum())

    @property
    def norms(self):
        return np.sqrt(np.sum(self.locations**2, axis=1))

    def restrict(self, region):
        keep = region.contains(self.locations) if len(self.masses) else np.zeros(0, bool)
        return AtomicMeasure(self.locations[keep], self.masses[keep])

    def __add__(self, other):
        if not isinstance(other, AtomicMeasure) or other.dim != self.dim:
            raise TypeError("can only add atomic measures of the same dimension")
        return AtomicMeasure(np.vstack([self.locations, other.locations]), np.concatenate([self.masses, other.masses]))

    def __eq__(self, other):
        return (
            isinstance(other, AtomicMeasure)
            and self.locations.shape == other.locations.shape
            and np.array_equal(self.locations, other.locations)
            and np.array_equal(self.masses, other.masses)
        )

    def __repr__(self):
        atoms = ", ".join(
            f"({x[0] if self.dim == 1 else list(x)}, {m})" for x, m in zip(self.locations.tolist(), self.masses.tolist())
        )
        return f"AtomicMeasure([{atoms}])"


# Named density forms so that density measures can be serialized.
def _power(params):
    c, p = params["scale"], params["exponent"]
    return lambda x: c * np.abs(x) ** (-p)


def _uniform(params):
    c = params["scale"]
    return lambda x: np.full(np.shape(x), float(c))


def _bump(params):
    mu, w, mass = params["center"], params["width"], params["mass"]
    norm = mass / (w * math.sqrt(2 * math.pi))
    return lambda x: norm * np.exp(-0.5 * ((np.asarray(x) - mu) / w) ** 2)


def _tempered_stable(params):
    c, alpha, lam = params["scale"], params["alpha"], params["lam"]
    return lambda x: c * np.exp(-lam * np.abs(x)) * np.abs(x) ** (-1.0 - alpha)


DENSITY_FORMS = {
    "power": (_power, lambda p: p["exponent"]),
    "uniform": (_uniform, lambda p: 0.0),
    "bump": (_bump, lambda p: 0.0),
    "tempered_stable": (_tempered_stable, lambda p: 1.0 + p["alpha"]),
}


@dataclass(frozen=True, eq=False)
class DensityMeasure:
    """One-dimensional ``nu(dx) = d(x) dx`` on a finite union of intervals.

    ``singularity`` is the exponent beta in [0, 3) such that ``d(x)|x|^beta``
    stays bounded near 0. ``form``/``params`` name the density when it comes
    from :data:`DENSITY_FORMS` (required for serialization).
    """

    density: object
    support: tuple
    singularity: float = 0.0
    form: str = None
    params: dict = field(default=None)

    kind = "density"
    dim = 1

    def __post_init__(self):
        pieces = []
        for piece in self.support:
            if isinstance(piece, Interval):
                pieces.append(piece)
            else:
                lo, hi = (float(v) for v in piece)
                # the origin is never charged
                pieces.append(Interval(lo, hi, lo != 0.0, hi != 0.0))
        object.__setattr__(self, "support", tuple(pieces))

    @classmethod
    def from_form(cls, form, params, support):
        if form not in DENSITY_FORMS:
            raise ValueError(f"unknown density form {form!r}; known: {sorted(DENSITY_FORMS)}")
        make, beta = DENSITY_FORMS[form]
        return cls(make(params), tuple(tuple(s) for s in support), float(beta(params)), form, dict(params))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = IntervalUnion(self.support).contains(x.reshape(-1)).reshape(x.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(inside, self.density(np.where(inside, x, 1.0)), 0.0)
        return vals

    @property
    def total_mass(self):
        return nu_integral(self, None)

    def __repr__(self):
        name = self.form or getattr(self.density, "__name__", "density")
        return f"DensityMeasure({name}, {self.params}, support={IntervalUnion(self.support)})"


def power_density(scale, exponent, support=((-1.0, 0.0), (0.0, 1.0))):
    """``scale * |x|^-exponent`` on ``support``."""
    return DensityMeasure.from_form("power", {"scale": scale, "exponent": exponent}, support)


def uniform_density(scale, support):
    return DensityMeasure.from_form("uniform", {"scale": scale}, support)


def bump_density(center, width, mass):
    """Narrow Gaussian bump of total mass ``mass`` (8 widths each side)."""
    if abs(center) <= 8 * width:
        raise ValueError("bump must stay away from the origin")
    return DensityMeasure.from_form(
        "bump", {"center": center, "width": width, "mass": mass}, ((center - 8 * width, center + 8 * width),)
    )


def tempered_stable_density(scale, alpha, lam, support=((-math.inf, 0.0), (0.0, math.inf))):
    return DensityMeasure.from_form("tempered_stable", {"scale": scale, "alpha": alpha, "lam": lam}, support)


# ---------------------------------------------------------------------------
# triplet
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LevyTriplet:
    """Drift ``a``, Gaussian covariance ``Q`` and Levy measure ``nu``."""

    drift: np.ndarray = 0.0
    covariance: np.ndarray = 0.0
    measure: object = None

    def __post_init__(self):
        drift = np.atleast_1d(np.asarray(self.drift, dtype=float))
        cov = np.asarray(self.covariance, dtype=float)
        if cov.ndim < 2:
            cov = np.diag(np.broadcast_to(cov, drift.shape)) if cov.ndim == 1 else np.eye(len(drift)) * cov
        object.__setattr__(self, "drift", _readonly(drift))
        object.__setattr__(self, "covariance", _readonly(cov))
        if self.measure is None:
            object.__setattr__(self, "measure", AtomicMeasure.empty(len(drift)))

    @property
    def dim(self):
        return len(self.drift)

    def __eq__(self, other):
        return (
            isinstance(other, LevyTriplet)
            and np.array_equal(self.drift, other.drift)
            and np.array_equal(self.covariance, other.covariance)
            and self.measure == other.measure
        )

    def __add__(self, other):
        """Triplet of the sum of two independent processes (atomic measures)."""
        return LevyTriplet(self.drift + other.drift, self.covariance + other.covariance, self.measure + other.measure)

    def __repr__(self):
        return f"LevyTriplet(drift={self.drift.tolist()}, covariance={self.covariance.tolist()}, measure={self.measure!r})"


def validate_triplet(t):
    """List of violated invariants (empty list means valid)."""
    out = []
    n = len(t.drift)
    if n < 1 or n > 3:
        out.append(f"dimension {n} not supported (1..3)")
    if not np.all(np.isfinite(t.drift)):
        out.append("drift not finite")
    q = t.covariance
    if q.shape != (n, n):
        out.append(f"covariance shape {q.shape} does not match dimension {n}")
    elif not np.all(np.isfinite(q)):
        out.append("covariance not finite")
    else:
        if np.max(np.abs(q - q.T), initial=0.0) > SYMMETRY_TOL:
            out.append("covariance not symmetric")
        elif np.min(np.linalg.eigvalsh(q)) < -PSD_TOL:
            out.append("covariance not PSD")
    m = t.measure
    if m.dim != n:
        out.append(f"measure dimension {m.dim} != triplet dimension {n}")
    if isinstance(m, AtomicMeasure):
        out.extend(_atomic_violations(m))
    elif isinstance(m, DensityMeasure):
        out.extend(_density_violations(m))
    else:
        out.append(f"unsupported measure type {type(m).__name__}")
    return out


def _atomic_violations(m):
    out = []
    if not (np.all(np.isfinite(m.locations)) and np.all(np.isfinite(m.masses))):
        out.append("atom locations/masses not finite")
        return out
    if np.any(m.masses <= 0):
        out.append("atom mass not strictly positive")
    if len(m.masses) and np.any(m.norms == 0):
        out.append("atom at the origin")
    return out


def _density_violations(m):
    out = []
    beta = m.singularity
    if not (0.0 <= beta < 3.0):
        out.append(f"singularity exponent {beta} outside [0, 3)")
        return out
    for iv in m.support:
        if iv.lo < 0.0 < iv.hi:
            out.append("density support interval straddles the origin; split it at 0")
        lo, hi = max(iv.lo, -50.0), min(iv.hi, 50.0)
        if hi <= lo:
            continue
        xs = np.linspace(lo, hi, 203)[1:-1]
        xs = xs[xs != 0]
        vals = m(xs)
        if not np.all(np.isfinite(vals)):
            out.append("density not finite on its support")
            break
        if np.any(vals < 0):
            out.append("density negative")
            break
    for side in (1.0, -1.0):
        probe = side * np.logspace(-9, -3, 7)
        inside = IntervalUnion(m.support).contains(probe)
        if inside.any():
            scaled = m(probe[inside]) * np.abs(probe[inside]) ** beta
            if not np.all(np.isfinite(scaled)) or np.max(scaled) > 1e6 * (1.0 + np.min(scaled)):
                out.append("density not bounded by |x|^-beta near 0")
    if not out:
        try:
            total = nu_integral(m, lambda x: np.minimum(x * x, 1.0))
        except (NonIntegrableError, QuadratureError) as exc:
            out.append(f"integral of |x|^2 ^ 1 failed: {exc}")
        else:
            if not math.isfinite(total):
                out.append("integral of |x|^2 ^ 1 infinite")
    return out


def check_triplet(t):
    violations = validate_triplet(t)
    if violations:
        raise InvalidTripletError(violations)
    return t


# ---------------------------------------------------------------------------
# nu-integrals
# ---------------------------------------------------------------------------

def _f_input(x, dim):
    return x[:, 0] if dim == 1 else x


def nu_integral(m, f=None, region=None, *, full_output=False):
    """``int_B f(x) nu(dx)``.

    ``f`` maps an array of points (shape ``(k,)`` in one dimension, ``(k, n)``
    otherwise) to values; ``None`` means the indicator, i.e. ``nu(B)``.
    ``region=None`` integrates over all of R^n minus 0. Atomic measures give
    the exact sum; densities use adaptive quadrature with the absolute error
    estimate returned when ``full_output`` is set.
    """
    if isinstance(m, AtomicMeasure):
        if region is not None and len(m.masses):
            keep = region.contains(m.locations)
            locs, masses = m.locations[keep], m.masses[keep]
        else:
            locs, masses = m.locations, m.masses
        if f is None:
            val = float(np.sum(masses))
        else:
            fx = np.asarray(f(_f_input(locs, m.dim)))
            w = masses.reshape((-1,) + (1,) * (fx.ndim - 1))
            val = np.sum(w * fx, axis=0) if len(masses) else np.zeros(fx.shape[1:])
            val = val.item() if np.ndim(val) == 0 else val
        return (val, 0.0) if full_output else val
    if isinstance(m, DensityMeasure):
        val, err = _density_integral(m, f, region)
        return (val, err) if full_output else val
    raise TypeError(f"unsupported measure {type(m).__name__}")


def _integration_pieces(m, region):
    pieces = m.support
    if region is not None:
        if region.dim != 1:
            raise ValueError("density measures are one-dimensional")
        out = []
        for p in pieces:
            for q in region.pieces():
                iv = p.intersect(q)
                if iv is not None and iv.hi > iv.lo:
                    out.append(iv)
        pieces = out
    return [p for p in pieces if p.hi > p.lo]


def _check_integrable_near_zero(m, g, iv):
    """Raise if ``g`` (already multiplied by the density) is not integrable at 0."""
    side = 1.0 if iv.lo >= 0 else -1.0
    span = iv.hi - iv.lo if math.isfinite(iv.hi - iv.lo) else 1.0
    xs = side * min(span, 1.0) * np.logspace(-4, -10, 4)
    with np.errstate(all="ignore"):
        vals = np.abs(np.array([g(x) for x in xs])) * np.abs(xs)
    if not np.all(np.isfinite(vals)):
        raise NonIntegrableError("non-integrable: integrand not finite near 0")
    if vals[-1] == 0.0:
        return
    # x * |integrand| must vanish at the origin for integrability
    if vals[0] == 0.0 or vals[-1] / vals[0] > 0.5:
        raise NonIntegrableError("non-integrable: integrand not dominated near 0")


def _density_integral(m, f, region):
    pieces = _integration_pieces(m, region)
    is_complex = False
    if f is not None and pieces:
        probe = f(np.array([0.5 * (max(pieces[0].lo, -1e3) + min(pieces[0].hi, 1e3))]))
        is_complex = np.iscomplexobj(probe)

    def scalar(part):
        def g(x):
            d = m(np.array([x]))[0]
            if d == 0.0:
                return 0.0
            fx = 1.0 if f is None else f(np.array([x]))[0]
            return float(part(fx) * d)
        return g

    parts = [np.real, np.imag] if is_complex else [lambda v: v]
    total = [0.0] * len(parts)
    err = 0.0
    for iv in pieces:
        for k, part in enumerate(parts):
            g = scalar(part)
            if (iv.lo == 0.0 or iv.hi == 0.0) and m.singularity > 0:
                _check_integrable_near_zero(m, g, iv)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                val, e = integrate.quad(g, iv.lo, iv.hi, epsabs=0.0, epsrel=1e-10, limit=500)
            if not math.isfinite(val):
                raise NonIntegrableError("non-integrable: quadrature diverged")
            total[k] += val
            err += e
    value = complex(total[0], total[1]) if is_complex else total[0]
    if err > QUAD_RTOL * abs(value) + 1e-14:
        raise QuadratureError(f"quadrature error {err:.3g} exceeds tolerance for value {value}")
    return value, err


# ---------------------------------------------------------------------------
# characteristic exponent
# ---------------------------------------------------------------------------

def _as_u(u, dim):
    u = np.asarray(u, dtype=float)
    if dim == 1:
        return u.reshape(-1, 1), u.ndim == 0, u.shape
    if u.ndim == 1:
        return u.reshape(1, dim), True, ()
    return u.reshape(-1, dim), False, u.shape[:-1]


def _jump_kernels(theta, compensated):
    """Real and imaginary parts of ``1 - e^{i theta} (+ i theta)``."""
    re = 2.0 * np.sin(0.5 * theta) ** 2
    if not compensated:
        return re, -np.sin(theta)
    small = np.abs(theta) < 1e-3
    t2 = theta * theta
    series = theta * t2 / 6.0 * (1.0 - t2 / 20.0)
    return re, np.where(small, series, theta - np.sin(theta))


def psi(t, u):
    """Characteristic exponent of the triplet at ``u`` (scalar or batch)."""
    check_triplet(t)
    return _psi_unchecked(t, u)


def _psi_unchecked(t, u):
    U, scalar, shape = _as_u(u, t.dim)
    re = 0.5 * np.einsum("ki,ij,kj->k", U, t.covariance, U)
    im = -(U @ t.drift)
    m = t.measure
    if isinstance(m, AtomicMeasure):
        if len(m.masses):
            theta = U @ m.locations.T
            small = m.norms < 1.0
            for mask, comp in ((small, True), (~small, False)):
                if mask.any():
                    r, i = _jump_kernels(theta[:, mask], comp)
                    re = re + r @ m.masses[mask]
                    im = im + i @ m.masses[mask]
    else:
        jr, ji = _density_psi(m, U[:, 0])
        re, im = re + jr, im + ji
    out = re + 1j * im
    return complex(out[0]) if scalar else out.reshape(shape)


def char_fn(t, u, time):
    """``E exp(i<u, X_time>) = exp(-time * psi(u))``."""
    if time < 0:
        raise ValueError("time must be non-negative")
    val = np.exp(-time * psi(t, u))
    return complex(val) if np.ndim(val) == 0 else val


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


_GL_ORDER = 16


def _effective_piece(m, iv):
    """Truncate infinite pieces where the remaining tail mass is negligible."""
    lo, hi = iv.lo, iv.hi
    if math.isinf(hi):
        x = max(2.0, 2.0 * abs(lo))
        while nu_integral(m, None, IntervalUnion((Interval(x, math.inf),))) > 1e-15 and x < 1e6:
            x *= 2.0
        hi = x
    if math.isinf(lo):
        x = max(2.0, 2.0 * abs(hi))
        while nu_integral(m, None, IntervalUnion((Interval(-math.inf, -x),))) > 1e-15 and x < 1e6:
            x *= 2.0
        lo = -x
    return lo, hi


def _density_nodes(m, u_max):
    """Quadrature nodes/weights (density folded in) for the exponent integrals.

    Pieces are split at |x| = 1; a piece touching the origin gets the
    substitution x = x1 * w^p with p = 1/(3 - beta), which makes the O(x^2)
    integrand times x^-beta regular in w.
    """
    gx, gw = _gauss_legendre(_GL_ORDER)
    nodes, weights = [], []
    split = [Interval(-math.inf, -1.0, False, True), Interval(-1.0, 1.0, False, False), Interval(1.0, math.inf)]
    step = math.pi / (u_max + 1.0)
    for base in m.support:
        for cut in split:
            iv = base.intersect(cut)
            if iv is None or iv.hi <= iv.lo:
                continue
            lo, hi = _effective_piece(m, iv)
            segs = []
            if lo == 0.0 or hi == 0.0:
                sign = 1.0 if hi > 0 else -1.0
                far = hi if hi > 0 else -lo
                x1 = min(far, step)
                p = 1.0 / (3.0 - m.singularity) if m.singularity > 0 else 1.0
                edges = np.concatenate(([0.0], np.geomspace(2.0**-24, 1.0, 25)))
                for a, b in zip(edges[:-1], edges[1:]):
                    w = 0.5 * (b - a) * gx + 0.5 * (a + b)
                    ww = 0.5 * (b - a) * gw
                    x = x1 * w**p
                    jac = x1 * p * w ** (p - 1.0)
                    nodes.append(sign * x)
                    weights.append(ww * jac)
                segs.append((x1, far, sign))
            else:
                segs.append((lo, hi, 1.0))
            for a0, b0, sign in segs:
                if b0 <= a0:
                    continue
                npan = max(2, int(math.ceil((b0 - a0) / step)))
                edges = np.linspace(a0, b0, npan + 1)
                half = 0.5 * np.diff(edges)
                mid = 0.5 * (edges[:-1] + edges[1:])
                nodes.append(sign * (mid[:, None] + half[:, None] * gx).ravel())
                weights.append((half[:, None] * gw).ravel())
    if not nodes:
        return np.zeros(0), np.zeros(0)
    x = np.concatenate(nodes)
    w = np.concatenate(weights)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = m(x)
    return x, w * np.nan_to_num(d)


def _density_psi(m, u):
    u = np.asarray(u, dtype=float)
    u_max = float(np.max(np.abs(u), initial=0.0))
    x, w = _density_nodes(m, u_max)
    re = np.zeros(len(u))
    im = np.zeros(len(u))
    small = np.abs(x) < 1.0
    chunk = max(1, 4_000_000 // max(len(x), 1))
    for s in range(0, len(u), chunk):
        theta = np.outer(u[s:s + chunk], x)
        for mask, comp in ((small, True), (~small, False)):
            if mask.any():
                r, i = _jump_kernels(theta[:, mask], comp)
                re[s:s + chunk] += r @ w[mask]
                im[s:s + chunk] += i @ w[mask]
    return re, im


@dataclass(frozen=True)
class CharacteristicExponent:
    """A map ``u -> psi(u)`` with its provenance (analytic or empirical)."""

    evaluator: object
    provenance: str = "analytic"
    sample_size: int = None
    dim: int = 1

    def __call__(self, u):
        return self.evaluator(u)

    @property
    def origin_tolerance(self):
        if self.provenance == "empirical":
            return 4.0 / math.sqrt(self.sample_size)
        if self.provenance == "tabulated":
            return 1e-9
        return 0.0

    def check(self):
        """Raise :class:`InvalidExponentError` unless psi(0) = 0 within tolerance."""
        val = complex(np.asarray(self(np.zeros(self.dim) if self.dim > 1 else 0.0)).reshape(-1)[0])
        if not abs(val) <= self.origin_tolerance:
            raise InvalidExponentError(f"invalid exponent: psi(0) = {val} (tolerance {self.origin_tolerance:g})")
        return self

    @classmethod
    def from_triplet(cls, t):
        check_triplet(t)
        return cls(lambda u: _psi_unchecked(t, u), "analytic", None, t.dim)

    @classmethod
    def empirical(cls, samples, time):
        """``-log(ECF)/time`` from samples of ``X_time`` (one-dimensional)."""
        x = np.asarray(samples, dtype=float).reshape(-1)
        if not len(x):
            raise ValueError("empty sample")

        def ev(u):
            ua = np.asarray(u, dtype=float)
            ecf = np.mean(np.exp(1j * np.multiply.outer(ua.reshape(-1), x)), axis=1)
            out = -np.log(ecf) / time
            return complex(out[0]) if ua.ndim == 0 else out.reshape(ua.shape)

        return cls(ev, "empirical", len(x), 1)

    @classmethod
    def tabulated(cls, u, values):
        """Linear interpolation of tabulated psi values (one-dimensional)."""
        u = np.asarray(u, dtype=float)
        values = np.asarray(values, dtype=complex)
        order = np.argsort(u)
        u, values = u[order], values[order]
        if len(u) < 2 or np.any(np.diff(u) <= 0):
            raise InvalidExponentError("invalid exponent: tabulated grid must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise InvalidExponentError("invalid exponent: non-finite tabulated values")

        def ev(q):
            qa = np.asarray(q, dtype=float)
            if np.any(qa < u[0]) or np.any(qa > u[-1]):
                raise ValueError("argument outside the tabulated range")
            out = np.interp(qa, u, values.real) + 1j * np.interp(qa, u, values.imag)
            return complex(out) if qa.ndim == 0 else out

        return cls(ev, "tabulated", None, 1)
