"""Recover a one-dimensional triplet from its characteristic exponent.

The chain follows the uniqueness argument:

1. ``sigma^2 = lim 2 Re psi(s) / s^2`` as ``s -> infinity``.
2. With ``psi~ = psi - sigma^2 u^2 / 2`` the window transform
   ``g(u) = -[psi~(u) - 1/2 int_{u-1}^{u+1} psi~(v) dv]`` is the Fourier
   transform of the finite positive measure ``rho(dx) = (1 - sin x / x) nu(dx)``
   (drift and Gaussian terms cancel).
3. ``rho`` is obtained by a Fejer-damped discrete inverse transform and
   ``nu = rho / (1 - sin x / x)``.
4. ``a`` follows from ``Im psi(u*)`` once ``nu`` is known.

``rho`` is reported as masses of the cells ``[x_j - h_x/2, x_j + h_x/2]``,
integrated exactly against the discrete inverse transform, so it is
nonnegative whenever ``g`` is the transform of a positive measure.
"""
from dataclasses import dataclass, field, replace
import math

import numpy as np

from .measure import AtomicMeasure, CharacteristicExponent, LevyTriplet
from .verify import Component, _component, make_report

FLOOR_MASS_FRACTION = 1e-3
FLOOR_MASS_MIN = 1e-9
NEGATIVE_MASS_LIMIT = 0.05


@dataclass(frozen=True)
class RecoveryConfig:
    """Grids for the recovery chain.

    ``s_grid`` is ``s_max / 2^k`` for ``k = s_points - 1, ..., 0``; the u-grid
    is ``k h_u`` with ``|k h_u| <= u_max``; the x-grid has cell centers
    ``j h_x`` with ``|j h_x| <= x_max``. Window integrals use composite
    Simpson with at least ``panels_per_unit`` panels per unit length.
    """

    s_max: float = 256.0
    s_points: int = 9
    h_u: float = 25.0 / 64.0
    u_max: float = 1000.0
    h_x: float = 0.05
    x_max: float = 8.0
    damping: str = "fejer"
    delta_floor: float = 1e-6
    panels_per_unit: int = 64
    u_star: float = 1.0
    u_check: float = 2.0

    def __post_init__(self):
        if self.h_u * self.x_max > math.pi * (1 + 1e-12):
            raise ValueError("Nyquist condition h_u * x_max <= pi violated")
        if self.damping not in ("fejer", "none"):
            raise ValueError("damping must be 'fejer' or 'none'")
        if min(self.s_max, self.h_u, self.u_max, self.h_x, self.x_max, self.delta_floor) <= 0:
            raise ValueError("grid parameters must be positive")
        if self.s_points < 2:
            raise ValueError("the s-grid needs at least two points")
        if self.panels_per_unit < 64:
            raise ValueError("window integrals need at least 64 panels per unit")

    @property
    def s_grid(self):
        return self.s_max / 2.0 ** np.arange(self.s_points - 1, -1, -1)

    @property
    def u_grid(self):
        k = int(math.floor(self.u_max / self.h_u + 1e-9))
        return np.arange(-k, k + 1) * self.h_u

    @property
    def x_grid(self):
        j = int(math.floor(self.x_max / self.h_x + 1e-9))
        return np.arange(-j, j + 1) * self.h_x

    def refined(self):
        """Half the u and x spacings. ``u_max`` is doubled so that the Fejer
        leakage out of an atom's ``4 h_x`` readout window, about
        ``2 / (pi u_max 2 h_x)``, does not grow."""
        return replace(self, h_u=self.h_u / 2, h_x=self.h_x / 2, u_max=self.u_max * 2)


def _as_handle(psi):
    if isinstance(psi, CharacteristicExponent):
        return psi
    if isinstance(psi, LevyTriplet):
        return CharacteristicExponent.from_triplet(psi)
    return CharacteristicExponent(psi)


def _eval(psi, u):
    return np.asarray(psi(np.asarray(u, dtype=float)), dtype=complex)


def _noise(psi):
    """Declared ``4/sqrt(N)`` band of an empirical exponent (0 otherwise)."""
    if psi.provenance == "empirical":
        return 4.0 / math.sqrt(psi.sample_size)
    return 0.0


# ---------------------------------------------------------------------------
# step 1: diffusion coefficient
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiffusionEstimate:
    sigma2: float
    error: float
    sequence: tuple
    converged: bool


def recover_diffusion_coefficient(psi, cfg=RecoveryConfig()):
    """``2 Re psi(s)/s^2`` at ``s_max`` with error ``|q(s_max) - q(s_max/2)|``.

    The sequence is flagged as not converging when the last difference is
    not smaller than the largest earlier one (unless it vanishes). Finite
    jump parts make the differences oscillate under an ``O(1/s^2)``
    envelope, so only growth of that envelope is treated as divergence.
    """
    psi = _as_handle(psi)
    s = cfg.s_grid
    q = 2.0 * _eval(psi, s).real / (s * s)
    diffs = np.abs(np.diff(q))
    err = float(diffs[-1]) + 2.0 * _noise(psi) / s[-1] ** 2
    converged = bool(len(diffs) < 2 or diffs[-1] == 0.0 or diffs[-1] < np.max(diffs[:-1]))
    return DiffusionEstimate(max(float(q[-1]), 0.0), err, tuple(float(v) for v in q), converged)


# ---------------------------------------------------------------------------
# step 2: window transform
# ---------------------------------------------------------------------------

def _fine_step(u, panels_per_unit):
    """A step ``1/P`` (``P`` a multiple of ``panels_per_unit``) on which all of
    ``u`` and ``u +- 1`` lie, or ``None`` when there is none."""
    u = np.asarray(u, dtype=float)
    for mult in range(1, 1025):
        p = panels_per_unit * mult
        k = u * p
        if np.all(np.abs(k - np.round(k)) < 1e-7):
            return p
    return None


def _simpson_weights(n_panels):
    w = np.ones(n_panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def forward_g_transform(psi, sigma2, u_grid, panels_per_unit=64):
    """``g(u) = -[psi~(u) - 1/2 int_{u-1}^{u+1} psi~(v) dv]`` on ``u_grid``.

    ``psi~ = psi - sigma2 u^2 / 2``. The window integral is composite Simpson
    with ``2P`` panels, ``P >= panels_per_unit``.
    """
    psi = _as_handle(psi)
    u = np.asarray(u_grid, dtype=float)
    p = _fine_step(u, panels_per_unit)

    def tilde(v):
        return _eval(psi, v) - 0.5 * (sigma2 * (v * v))

    if p is None:
        # per-point windows
        t = np.linspace(-1.0, 1.0, 2 * panels_per_unit + 1)
        w = _simpson_weights(2 * panels_per_unit) / panels_per_unit
        vals = tilde((u[:, None] + t[None, :]).ravel()).reshape(len(u), -1)
        window = vals @ w
        return -(tilde(u) - 0.5 * window)
    k = np.round(u * p).astype(np.int64)
    lo, hi = k.min() - p, k.max() + p
    fine_k = np.arange(lo, hi + 1)
    vals = tilde(fine_k / p)
    w = _simpson_weights(2 * p) / p
    # window integral centered at every fine point (valid away from the ends)
    conv = np.convolve(vals, w[::-1], mode="valid")
    window = conv[k - lo - p]
    return -(vals[k - lo] - 0.5 * window)


# ---------------------------------------------------------------------------
# step 3: inversion
# ---------------------------------------------------------------------------

def one_minus_sinc(x):
    """``1 - sin(x)/x`` with its Taylor series near 0."""
    x = np.asarray(x, dtype=float)
    x2 = x * x
    series = x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = 1.0 - np.sin(x) / np.where(x == 0, 1.0, x)
    return np.where(np.abs(x) < 1e-2, series, direct)


def _damping(u, cfg):
    if cfg.damping == "none":
        return np.ones_like(u)
    k_max = math.floor(cfg.u_max / cfg.h_u + 1e-9) + 1
    return 1.0 - np.abs(np.round(u / cfg.h_u)) / k_max


def _window_kernel(u, half_width):
    """``int_{-a}^{a} e^{-iux} dx = 2 sin(ua)/u``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 2.0 * np.sin(u * half_width) / np.where(u == 0, 1.0, u)
    return np.where(u == 0, 2.0 * half_width, out)


def window_mass(g, u_grid, cfg, centers, half_width):
    """Mass of the damped inverse transform over ``[c - a, c + a]`` for each center."""
    u = np.asarray(u_grid, dtype=float)
    c = np.asarray(centers, dtype=float)
    coef = cfg.h_u * _damping(u, cfg) * np.asarray(g) * _window_kernel(u, half_width) / (2.0 * math.pi)
    phase = np.exp(-1j * np.multiply.outer(c, u))
    return (phase @ coef).real


def kernel_window_fraction(u_grid, cfg, half_width):
    """Mass of the damped inversion kernel inside ``[-a, a]`` (a unit atom at 0)."""
    u = np.asarray(u_grid, dtype=float)
    return float(window_mass(np.ones_like(u), u, cfg, [0.0], half_width)[0])


@dataclass(frozen=True)
class MeasureEstimate:
    """Cell masses of ``rho`` and ``nu`` on the x-grid plus diagnostics."""

    x: np.ndarray
    rho: np.ndarray
    nu: np.ndarray
    floor_cells: np.ndarray
    floor_active: bool
    negative_mass: float
    total_mass: float
    inconsistent: bool
    g: np.ndarray = field(repr=False, default=None)
    u: np.ndarray = field(repr=False, default=None)


def invert_to_levy_measure(g, u_grid, cfg=RecoveryConfig()):
    """Fejer-damped inverse transform of ``g`` onto the x-grid cells."""
    x = cfg.x_grid
    rho = window_mass(g, u_grid, cfg, x, 0.5 * cfg.h_x)
    factor = one_minus_sinc(x)
    floor = factor < cfg.delta_floor
    nu = rho / np.maximum(factor, cfg.delta_floor)
    total = float(np.sum(np.abs(rho)))
    negative = float(-np.sum(rho[rho < 0]))
    threshold = max(FLOOR_MASS_FRACTION * total, FLOOR_MASS_MIN)
    floor_active = bool(np.any(np.abs(rho[floor]) > threshold))
    inconsistent = bool(total > 0 and negative > NEGATIVE_MASS_LIMIT * total)
    return MeasureEstimate(x, rho, nu, floor, floor_active, negative, total, inconsistent, np.asarray(g), np.asarray(u_grid))


def atom_masses(est, cfg, locations):
    """``rho`` and ``nu`` masses of atoms near ``locations``.

    For each location the peak of ``rho`` within ``2 h_x`` is found; the
    ``rho`` mass is the integral of the inverse transform over a window of
    width ``4 h_x`` centered at that peak, and the ``nu`` mass divides it by
    ``1 - sin c / c`` at the window centroid ``c``. The window mass is
    divided by the mass the damped kernel itself keeps inside the window, so
    the part of an isolated atom that leaks out of the window is restored.
    """
    out = []
    keep = kernel_window_fraction(est.u, cfg, 2 * cfg.h_x)
    for loc in np.atleast_1d(np.asarray(locations, dtype=float)):
        near = np.nonzero(np.abs(est.x - loc) <= 2 * cfg.h_x + 1e-12)[0]
        if not len(near):
            out.append((float(loc), 0.0, 0.0))
            continue
        peak = near[np.argmax(est.rho[near])]
        cells = np.arange(max(peak - 2, 0), min(peak + 3, len(est.x)))
        w = np.maximum(est.rho[cells], 0.0)
        c = float(np.sum(w * est.x[cells]) / np.sum(w)) if np.sum(w) > 0 else float(est.x[peak])
        m_rho = float(window_mass(est.g, est.u, cfg, [est.x[peak]], 2 * cfg.h_x)[0]) / keep
        out.append((c, m_rho, m_rho / max(float(one_minus_sinc(c)), cfg.delta_floor)))
    return out


def find_peaks(est, cfg):
    """Local maxima of the ``rho`` cell masses above the noise threshold."""
    r = est.rho
    thr = max(FLOOR_MASS_FRACTION * est.total_mass, FLOOR_MASS_MIN)
    inner = (r[1:-1] >= r[:-2]) & (r[1:-1] > r[2:]) & (r[1:-1] > thr)
    idx = np.nonzero(inner)[0] + 1
    return est.x[idx[~est.floor_cells[idx]]]


# ---------------------------------------------------------------------------
# step 4: drift
# ---------------------------------------------------------------------------

def _im_kernel_over_factor(x, u):
    """``Im`` of the exponent integrand divided by ``1 - sin x / x``.

    ``-sin(ux)`` for ``|x| >= 1`` and ``ux - sin(ux)`` for ``|x| < 1``;
    near 0 the ratio tends to ``u^3 x`` and is evaluated by its series.
    """
    x = np.asarray(x, dtype=float)
    theta = u * x
    small = np.abs(x) < 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(small, theta - np.sin(theta), -np.sin(theta))
        ratio = k / one_minus_sinc(x)
    tiny = np.abs(x) < 1e-3
    series = u**3 * x * (1.0 + x * x / 20.0 * (1.0 - u * u))
    return np.where(x == 0, 0.0, np.where(tiny, series, ratio))


def _collapsed_rho(est, cfg):
    """``rho`` cell masses with every detected peak gathered onto its cell.

    The integrand switches form at ``|x| = 1``; an atom sitting there would
    otherwise have its smeared tails weighted by the wrong branch. Collapsing
    also matches the atoms reported by :meth:`RecoveredTriplet.atoms`.
    """
    rho = est.rho.copy()
    if cfg is None or est.g is None:
        return rho
    for loc in find_peaks(est, cfg):
        peak = int(np.argmin(np.abs(est.x - loc)))
        cells = np.arange(max(peak - 2, 0), min(peak + 3, len(est.x)))
        _, m_rho, _ = atom_masses(est, cfg, [est.x[peak]])[0]
        rho[cells] = 0.0
        rho[peak] = m_rho
    return rho


def _drift_at(psi, est, u_star, cfg=None):
    im = float(_eval(psi, np.array([u_star]))[0].imag)
    jump = float(np.sum(_collapsed_rho(est, cfg) * _im_kernel_over_factor(est.x, u_star)))
    return (jump - im) / u_star + 0.0


def _drift_error(est, u_star, noise, cfg=None):
    spread = est.negative_mass + FLOOR_MASS_FRACTION * est.total_mass
    if cfg is not None and est.u is not None:
        # kernel tails left outside the collapsed peak windows
        spread += (1.0 - kernel_window_fraction(est.u, cfg, 2 * cfg.h_x)) * est.total_mass
    bound = float(np.max(np.abs(_im_kernel_over_factor(est.x, u_star)), initial=0.0))
    return (bound * spread + noise) / u_star


@dataclass(frozen=True)
class DriftEstimate:
    drift: float
    error: float
    check_drift: float
    gap: float
    consistent: bool


def recover_drift(psi, sigma2, est, u_star=1.0, u_check=2.0, cfg=None):
    """``a = -Im[psi(u*) - (jump integrals against nu)] / u*`` with a cross-check.

    ``sigma2`` only enters the real part and is accepted for completeness.
    The jump integrals are taken against ``rho`` with the integrand divided
    by ``1 - sin x / x``, which stays bounded at the origin.
    """
    psi = _as_handle(psi)
    noise = _noise(psi)
    a1 = _drift_at(psi, est, u_star, cfg)
    a2 = _drift_at(psi, est, u_check, cfg)
    gap = abs(a1 - a2)
    err = _drift_error(est, u_star, noise, cfg)
    tol = err + _drift_error(est, u_check, noise, cfg)
    return DriftEstimate(a1, err, a2, gap, bool(gap <= tol + 1e-9))


# ---------------------------------------------------------------------------
# full chain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RecoveredTriplet:
    sigma2: float
    sigma2_error: float
    measure: MeasureEstimate
    drift: float
    drift_error: float
    drift_check_gap: float
    flags: tuple
    config: RecoveryConfig

    def atoms(self):
        """Cells with ``nu`` mass above the noise threshold (floor cells excluded)."""
        est = self.measure
        thr = max(FLOOR_MASS_FRACTION * est.total_mass, FLOOR_MASS_MIN)
        keep = (est.rho > thr) & ~est.floor_cells
        return [(float(x), float(m)) for x, m in zip(est.x[keep], est.nu[keep])]

    def to_triplet(self):
        return LevyTriplet([self.drift], [[self.sigma2]], AtomicMeasure.from_atoms(self.atoms(), dim=1))


def recover_triplet(psi, cfg=RecoveryConfig()):
    """Run the whole chain on a one-dimensional exponent."""
    psi = _as_handle(psi)
    if psi.dim != 1:
        raise ValueError("recovery is one-dimensional")
    psi.check()
    flags = []
    diff = recover_diffusion_coefficient(psi, cfg)
    if not diff.converged:
        flags.append("diffusion limit not converging")
    u = cfg.u_grid
    g = forward_g_transform(psi, diff.sigma2, u, cfg.panels_per_unit)
    est = invert_to_levy_measure(g, u, cfg)
    if est.floor_active:
        flags.append("denominator floor active")
    if est.inconsistent:
        flags.append("inconsistent input")
    dr = recover_drift(psi, diff.sigma2, est, cfg.u_star, cfg.u_check, cfg)
    if not dr.consistent:
        flags.append("drift cross-check gap exceeds error estimates")
    return RecoveredTriplet(diff.sigma2, diff.error, est, dr.drift, dr.error, dr.gap, tuple(flags), cfg)


SIGMA2_TOL = 1e-3
MASS_RTOL = 0.05
DRIFT_TOL = 0.02
SPURIOUS_MASS_TOL = 1e-3


def compare_to_truth(rec, truth):
    """Component-wise errors of a recovery against the true triplet.

    Tolerances: ``sigma^2`` absolute 1e-3, atom masses relative 5%, drift
    absolute 0.02; with no jumps the total recovered ``nu`` mass must stay
    below 1e-3.
    """
    if truth.dim != 1:
        raise ValueError("recovery is one-dimensional")
    cfg = rec.config
    comps = [_component("sigma^2", rec.sigma2, float(truth.covariance[0, 0]), SIGMA2_TOL)]
    m = truth.measure
    if isinstance(m, AtomicMeasure) and len(m.masses):
        for (x0,), mass in zip(m.locations.tolist(), m.masses.tolist()):
            c, _, got = atom_masses(rec.measure, cfg, [x0])[0]
            comps.append(_component(f"nu mass at x={x0:g}", got, mass, MASS_RTOL * mass,
                                    "|recovered - true| <= 5% of true mass"))
    elif isinstance(m, AtomicMeasure):
        est = rec.measure
        spurious = float(np.sum(np.abs(est.nu[~est.floor_cells])) + np.sum(np.abs(est.rho[est.floor_cells])))
        comps.append(_component("total spurious nu mass", spurious, 0.0, SPURIOUS_MASS_TOL))
    comps.append(_component("drift", rec.drift, float(truth.drift[0]), DRIFT_TOL))
    return make_report("recovery_roundtrip", comps, 0, None, notes="; ".join(rec.flags))


def roundtrip_report(truth, cfg=RecoveryConfig()):
    """Recover ``truth`` from its analytic exponent and compare (see :func:`compare_to_truth`)."""
    if truth.dim != 1:
        raise ValueError("recovery is one-dimensional")
    rec = recover_triplet(CharacteristicExponent.from_triplet(truth), cfg)
    return compare_to_truth(rec, truth), rec
