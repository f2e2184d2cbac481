"""Statistical and exact checks of simulated paths against the theory.

Every check returns a :class:`CheckReport`. Tolerances come from declared
formulas: ``k * scale / sqrt(N)`` CLT bands with ``k = 4`` (``8`` for the
factorization test), chi-square at significance ``1e-3``, and a 5% relative
band for sample variances. A band built from a sample standard deviation is
labelled as such in the report's ``rule``.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy import stats

from . import _kernels
from .jumpmeasure import _in_region, count_jumps, jump_integral
from .measure import AtomicMeasure, DensityMeasure, LevyTriplet, char_fn, nu_integral
from .regions import Annulus, abs_at_least, at_least, at_most, intersect, overlaps

P_VALUE_MIN = 1e-3
CLT_K = 4.0
FLOAT_SLACK = 1e-12
MIN_ECF_SAMPLES = 10_000
MIN_RETAINED = 1_000


def clt_band(n, scale=1.0, k=CLT_K):
    """``k * scale / sqrt(n)``; halves when ``n`` is multiplied by 4."""
    if n <= 0:
        raise ValueError("sample size must be positive")
    return k * scale / math.sqrt(n)


@dataclass(frozen=True)
class Component:
    name: str
    statistic: float
    expected: float
    tolerance: float
    rule: str
    passed: bool

    def to_dict(self):
        return {
            "name": self.name,
            "statistic": self.statistic,
            "expected": self.expected,
            "tolerance": self.tolerance,
            "rule": self.rule,
            "pass": self.passed,
        }


def _component(name, statistic, expected, tolerance, rule="|statistic - expected| <= tolerance"):
    statistic, expected, tolerance = float(statistic), float(expected), float(tolerance)
    return Component(name, statistic, expected, tolerance, rule, bool(abs(statistic - expected) <= tolerance))


def _at_least(name, statistic, minimum):
    statistic = float(statistic)
    return Component(name, statistic, float(minimum), 0.0, f"statistic >= {minimum:g}", bool(statistic >= minimum))


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one check.

    The headline ``statistic``/``expected``/``tolerance``/``rule`` are those
    of the component that is furthest outside (or closest to) its band;
    ``components`` holds every individual comparison. ``status`` is
    ``pass``, ``fail`` or ``inconclusive``.
    """

    check: str
    statistic: float
    expected: float
    tolerance: float
    rule: str
    n: int
    seed: int
    passed: bool
    status: str
    components: tuple = ()
    notes: str = ""

    def to_dict(self):
        return {
            "check": self.check,
            "statistic": self.statistic,
            "expected": self.expected,
            "tolerance": self.tolerance,
            "rule": self.rule,
            "N": self.n,
            "seed": self.seed,
            "pass": self.passed,
            "status": self.status,
            "components": [c.to_dict() for c in self.components],
            "notes": self.notes,
        }

    def summary(self):
        return (
            f"{self.status.upper():12s} {self.check}: statistic={self.statistic:.6g} "
            f"expected={self.expected:.6g} tolerance={self.tolerance:.3g} N={self.n}"
        )


def _severity(c):
    gap = abs(c.statistic - c.expected)
    if c.rule.startswith("statistic >="):
        return 0.0 if c.passed else math.inf
    if c.tolerance > 0:
        return gap / c.tolerance
    return 0.0 if gap == 0 else math.inf


def make_report(check, components, n, seed, status=None, notes=""):
    components = tuple(components)
    passed = all(c.passed for c in components)
    head = max(components, key=_severity)
    if status is None:
        status = "pass" if passed else "fail"
    return CheckReport(
        check, head.statistic, head.expected, head.tolerance, head.rule, int(n),
        None if seed is None else int(seed), bool(passed and status == "pass"), status, components, notes,
    )


def inconclusive(check, n, seed, reason):
    comp = Component("precondition", math.nan, math.nan, math.nan, reason, False)
    return CheckReport(check, math.nan, math.nan, math.nan, reason, int(n), None if seed is None else int(seed),
                       False, "inconclusive", (comp,), reason)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _project(x, u):
    """``<u, x>`` for samples ``x`` of shape (N, n) and frequencies ``u``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.ndim == 1 or x.shape[1] == 1:
        return np.multiply.outer(u.reshape(-1), x.reshape(-1))
    return u.reshape(-1, x.shape[1]) @ x.T


def _ecf(x, u):
    return np.mean(np.exp(1j * _project(x, u)), axis=1)


def default_u_grid(dim=1):
    """21 points ``-5, -4.5, ..., 5`` (along the first axis for ``dim > 1``)."""
    u = np.linspace(-5.0, 5.0, 21)
    if dim == 1:
        return u
    out = np.zeros((len(u), dim))
    out[:, 0] = u
    return out


def _sd(x):
    return float(np.std(x, ddof=1)) if len(x) > 1 else 0.0


def _mean_component(name, samples, expected):
    samples = np.asarray(samples, dtype=float)
    n = len(samples)
    sd = _sd(samples)
    return _component(
        name, np.mean(samples), expected, clt_band(n, sd) + FLOAT_SLACK,
        "|mean - expected| <= 4 * sample_sd / sqrt(N) + 1e-12",
    )


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def check_ecf(paths, triplet, time, u_grid=None):
    """``sup_u |ECF(u) - exp(-time psi(u))|`` against ``4/sqrt(N)``."""
    n = paths.n_paths
    if n == 0:
        raise ValueError("empty sample")
    if n < MIN_ECF_SAMPLES:
        raise ValueError(f"check_ecf needs at least {MIN_ECF_SAMPLES} replicates, got {n}")
    u = default_u_grid(triplet.dim) if u_grid is None else np.asarray(u_grid, dtype=float)
    x = paths.value_at(time)
    err = np.abs(_ecf(x, u) - np.asarray(char_fn(triplet, u, time)).reshape(-1))
    tol = clt_band(n)
    comp = _component("sup_u |ECF - phi|", np.max(err), 0.0, tol, "sup_u |ECF(u) - phi(u)| <= 4/sqrt(N)")
    return make_report("ecf", [comp], n, paths.seed)


def _pooled_bins(counts, lam):
    n = len(counts)
    top = int(max(counts.max(initial=0), stats.poisson.ppf(1 - 1e-12, lam))) + 1
    probs = stats.poisson.pmf(np.arange(top), lam)
    probs = np.append(probs, stats.poisson.sf(top - 1, lam))
    observed = np.bincount(np.minimum(counts, top), minlength=top + 1).astype(float)
    exp_bins, obs_bins = [], []
    e_acc = o_acc = 0.0
    for e, o in zip(probs * n, observed):
        e_acc += e
        o_acc += o
        if e_acc >= 5.0:
            exp_bins.append(e_acc)
            obs_bins.append(o_acc)
            e_acc = o_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if exp_bins:
            exp_bins[-1] += e_acc
            obs_bins[-1] += o_acc
        else:
            exp_bins.append(e_acc)
            obs_bins.append(o_acc)
    return np.array(obs_bins), np.array(exp_bins)


def check_poisson_law(counts, lam, seed=None):
    """Chi-square fit of counts to Poisson(``lam``) plus mean and variance bands.

    The mean band is ``4 sqrt(lam/N)``; the variance band is
    ``4 sqrt((lam + 2 lam^2)/N)``, the CLT standard error of a Poisson
    sample variance.
    """
    counts = np.asarray(counts, dtype=np.int64)
    n = len(counts)
    if n == 0:
        raise ValueError("empty sample")
    if not math.isfinite(lam) or lam < 0:
        raise ValueError("rate must be finite and non-negative")
    if lam == 0:
        comp = _component("max count (rate 0)", counts.max(), 0.0, 0.0)
        return make_report("poisson_law", [comp], n, seed)
    obs, exp = _pooled_bins(counts, lam)
    if len(obs) >= 2:
        chi = float(np.sum((obs - exp) ** 2 / exp))
        p = float(stats.chi2.sf(chi, len(obs) - 1))
    else:
        p = 1.0
    comps = [
        _at_least("chi-square p-value", p, P_VALUE_MIN),
        _component("mean", np.mean(counts), lam, clt_band(n, math.sqrt(lam)), "|mean - lam| <= 4 sqrt(lam/N)"),
        _component(
            "variance", np.var(counts, ddof=1), lam, clt_band(n, math.sqrt(lam + 2 * lam * lam)),
            "|var - lam| <= 4 sqrt((lam + 2 lam^2)/N)",
        ),
    ]
    return make_report("poisson_law", comps, n, seed)


def check_jump_moments(paths, f, region, t, measure):
    """Mean ``t int_B f dnu`` and variance ``t int_B f^2 dnu`` of ``int_B f dN_t``."""
    n = paths.n_paths
    mean_exp = t * float(nu_integral(measure, f, region))
    var_exp = t * float(nu_integral(measure, lambda x: np.asarray(f(x), dtype=float) ** 2, region))
    vals = np.asarray(jump_integral(paths, f, region, t), dtype=float)
    comps = [
        _component("mean of int f dN_t", np.mean(vals), mean_exp, clt_band(n, math.sqrt(var_exp)) + FLOAT_SLACK,
                   "|mean - t int f dnu| <= 4 sqrt(t int f^2 dnu / N)"),
        _component("variance of compensated integral", np.var(vals - mean_exp, ddof=1), var_exp,
                   0.05 * var_exp + FLOAT_SLACK, "|var - t int f^2 dnu| <= 5% of t int f^2 dnu"),
    ]
    return make_report("jump_moments", comps, n, paths.seed)


def check_disjoint_independence(paths, region1, region2, t, u_grid=None, v_grid=None, _allow_overlap=False):
    """Factorization of the joint ECF of ``X_t(B1)`` and ``X_t(B2)`` (band ``8/sqrt(N)``)."""
    if not _allow_overlap and overlaps(region1, region2):
        raise ValueError("regions overlap; the check needs disjoint regions")
    n = paths.n_paths
    dim = paths.dim
    u = default_u_grid(dim)[::5] if u_grid is None else np.asarray(u_grid, dtype=float)
    v = u if v_grid is None else np.asarray(v_grid, dtype=float)
    x1 = np.asarray(jump_integral(paths, None, region1, t)).reshape(n, -1)
    x2 = np.asarray(jump_integral(paths, None, region2, t)).reshape(n, -1)
    e1 = np.exp(1j * _project(x1, u))
    e2 = np.exp(1j * _project(x2, v))
    joint = (e1 @ e2.T) / n
    prod = np.outer(e1.mean(axis=1), e2.mean(axis=1))
    gap = np.abs(joint - prod)
    tol = clt_band(n, k=8.0)
    comp = _component("sup |joint - product|", np.max(gap), 0.0, tol, "sup_(u,v) |joint ECF - product| <= 8/sqrt(N)")
    return make_report("disjoint_independence", [comp], n, paths.seed)


def check_martingale_normalization(paths, triplet, u, time_pairs):
    """``M_t = exp(i<u,X_t>)/phi_t(u)``: ``E M_t = 1`` and orthogonal increments.

    For each pair ``s < t``: ``|mean(M_t) - 1| <= 4/(|phi_t| sqrt(N))`` and
    ``|mean((M_t - M_s) conj(M_s))| <= 4 sqrt(v/N)`` where
    ``v = (|phi_t|^-2 - |phi_s|^-2) |phi_s|^-2`` is the exact variance of the
    summand under the null (``|M_s|`` is deterministic).
    """
    n = paths.n_paths
    u = np.asarray(u, dtype=float)
    comps = []
    cache = {}

    def m_at(time):
        if time not in cache:
            phi = complex(np.asarray(char_fn(triplet, u, time)).reshape(-1)[0])
            x = paths.value_at(time) if time > 0 else np.zeros((n, paths.dim))
            cache[time] = (np.exp(1j * _project(x, u)[0]) / phi, abs(phi))
        return cache[time]

    for s, t in time_pairs:
        if not 0 <= s < t:
            raise ValueError("time pairs need 0 <= s < t")
        mt, at = m_at(t)
        ms, as_ = m_at(s)
        comps.append(_component(
            f"|E M_{t:g} - 1|", abs(np.mean(mt) - 1.0), 0.0, clt_band(n, 1.0 / at) + FLOAT_SLACK,
            "|mean(M_t) - 1| <= 4/(|phi_t| sqrt(N)) + 1e-12",
        ))
        var = max(at**-2 - as_**-2, 0.0) * as_**-2
        comps.append(_component(
            f"|E (M_{t:g} - M_{s:g}) conj(M_{s:g})|", abs(np.mean((mt - ms) * np.conj(ms))), 0.0,
            clt_band(n, math.sqrt(var)) + FLOAT_SLACK,
            "|mean((M_t - M_s) conj(M_s))| <= 4 sqrt((|phi_t|^-2 - |phi_s|^-2)|phi_s|^-2 / N) + 1e-12",
        ))
    return make_report("martingale", comps, n, paths.seed)


def check_jump_covariance_identity(paths, region_m, region_n, measure, t, compensate=True):
    """``E[M_t N_t] = E[sum_{T_k <= t} Delta M_{T_k}]`` for ``M`` the compensated
    jump sum of ``region_m`` and ``N`` the jump counter of ``region_n``.

    Both sides should equal ``t int_{B_M and B_N} x nu(dx)``. Bands use the
    sample standard deviation of each estimator and of their paired difference.
    """
    if paths.dim != 1:
        raise ValueError("the jump covariance check is one-dimensional")
    n = paths.n_paths
    counts = count_jumps(paths, region_n, t).astype(float)
    x_m = np.asarray(jump_integral(paths, None, region_m, t), dtype=float)
    comp = t * float(nu_integral(measure, lambda x: x, region_m))
    m_t = x_m - comp if compensate else x_m
    both = intersect(region_m, region_n)
    rhs = np.asarray(jump_integral(paths, None, both, t), dtype=float)
    expected = t * float(nu_integral(measure, lambda x: x, both))
    lhs = m_t * counts
    comps = [
        _mean_component("E[M_t N_t]", lhs, expected),
        _mean_component("E[sum Delta M at jumps of N]", rhs, expected),
        _mean_component("paired difference", lhs - rhs, 0.0),
    ]
    return make_report("jump_covariance", comps, n, paths.seed)


def gaussian_residual(paths, time):
    """``X_t - (jumps up to t) - a t - c t``: the Gaussian part at ``time``."""
    i = paths.grid_index(time)
    return paths.continuous_at(paths.grid[i]) - paths.trend_at(paths.grid[i])[None, :]


def check_gaussian_residual(paths, triplet, time, u_grid=None):
    """The residual after removing jumps, drift and compensator is ``N(0, Q t)``."""
    if triplet.dim != 1:
        raise ValueError("the Gaussian residual check is one-dimensional")
    n = paths.n_paths
    r = gaussian_residual(paths, time)[:, 0]
    q = float(triplet.covariance[0, 0])
    if q == 0.0:
        comp = _component("max |residual| (Q = 0)", np.max(np.abs(r)), 0.0, 0.0, "residual identically 0")
        return make_report("gaussian_residual", [comp], n, paths.seed)
    u = default_u_grid(1) if u_grid is None else np.asarray(u_grid, dtype=float)
    err = np.abs(_ecf(r, u) - np.exp(-0.5 * u * u * q * time))
    m2 = np.mean(r * r)
    kurt = np.mean(r**4) / (m2 * m2) - 3.0 if m2 > 0 else math.inf
    comps = [
        _component("sup_u |ECF(R) - exp(-u^2 Q t/2)|", np.max(err), 0.0, clt_band(n),
                   "sup_u |ECF - exp(-u^2 Q t / 2)| <= 4/sqrt(N)"),
        _component("excess kurtosis", kurt, 0.0, clt_band(n, math.sqrt(24.0)), "|excess kurtosis| <= 4 sqrt(24/N)"),
    ]
    return make_report("gaussian_residual", comps, n, paths.seed)


def check_strong_markov(paths, triplet, region, s, u_grid=None):
    """Restart at ``T`` = first jump in ``region``, rounded up to the grid.

    Rounding up keeps ``T`` a stopping time. Retained replicates have
    ``T + s <= horizon``; their increment ``X_{T+s} - X_T`` must have ECF
    ``exp(-s psi)`` and be uncorrelated with the pre-``T`` value
    ``X`` at grid index ``floor(idx_T / 2)``.
    """
    n = paths.n_paths
    rate = float(nu_integral(triplet.measure, None, region))
    if rate <= 0:
        raise ValueError("nu(B) must be positive for the strong Markov check")
    need = 10.0 * (s + 1.0 / rate)
    if paths.horizon < need * (1 - 1e-12):
        raise ValueError(f"horizon {paths.horizon} below 10 (s + 1/nu(B)) = {need:g}")
    dt = paths.grid[1] - paths.grid[0]
    lag = int(round(s / dt))
    if lag < 1 or abs(lag * dt - s) > 1e-9 * max(s, 1.0):
        raise ValueError("lag s must be a positive multiple of the grid step")
    mask = _in_region(paths.jump_sizes, region)
    first = _kernels.first_masked_time(paths.path_ids, paths.jump_times, mask, n)
    idx = np.searchsorted(paths.grid, first, side="left")
    last = len(paths.grid) - 1
    keep = np.isfinite(first) & (idx + lag <= last)
    n_ret = int(keep.sum())
    fraction = n_ret / n
    if n_ret < MIN_RETAINED:
        return inconclusive("strong_markov", n_ret, paths.seed, f"only {n_ret} replicates retained (< {MIN_RETAINED})")
    i0 = np.where(keep, idx, 0)
    post = paths.values_at_indices(np.where(keep, idx + lag, 0))[keep] - paths.values_at_indices(i0)[keep]
    pre = paths.values_at_indices(i0 // 2)[keep]
    u = default_u_grid(triplet.dim) if u_grid is None else np.asarray(u_grid, dtype=float)
    err = np.abs(_ecf(post, u) - np.asarray(char_fn(triplet, u, s)).reshape(-1))
    a, b = post[:, 0], pre[:, 0]
    sa, sb = np.std(a), np.std(b)
    corr = float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb)) if sa > 0 and sb > 0 else 0.0
    comps = [
        _component("sup_u |ECF(X_{T+s} - X_T) - exp(-s psi)|", np.max(err), 0.0, clt_band(n_ret),
                   "sup_u |ECF - exp(-s psi(u))| <= 4/sqrt(N_retained)"),
        _component("corr(X_{T+s} - X_T, X_{pre})", corr, 0.0, clt_band(n_ret),
                   "|corr(post-T increment, pre-T value)| <= 4/sqrt(N_retained)"),
        _at_least("retained fraction", fraction, 0.9999),
    ]
    return make_report("strong_markov", comps, n_ret, paths.seed, notes=f"retained {n_ret} of {n}")


# ---------------------------------------------------------------------------
# the battery
# ---------------------------------------------------------------------------

CHECK_NAMES = (
    "ecf",
    "poisson_law",
    "jump_moments",
    "disjoint_independence",
    "martingale",
    "jump_covariance",
    "gaussian_residual",
    "strong_markov",
)


def _scaled_measure(m, c):
    if isinstance(m, AtomicMeasure):
        return AtomicMeasure(m.locations, m.masses * c)
    d = m.density
    return DensityMeasure(lambda x: c * d(x), m.support, m.singularity)


def _perturbed_triplet(t):
    """Drift shifted by 1 and ``Q + I``: used by negative controls."""
    return LevyTriplet(t.drift + 1.0, t.covariance + np.eye(t.dim), t.measure)


def battery_settings(triplet, horizon):
    """Times, regions and frequencies used by :func:`run_battery`."""
    n = triplet.dim
    t = min(1.0, horizon)
    if n == 1:
        big, b1, b2 = abs_at_least(1.0), at_least(1.0), at_most(-1.0)
    else:
        big = abs_at_least(1.0, n)
        b1 = Annulus(1.0, math.inf, True, False, n, box_lo=(0.5,) + (-math.inf,) * (n - 1))
        b2 = Annulus(1.0, math.inf, True, False, n, box_hi=(-0.5,) + (math.inf,) * (n - 1))
    return {"time": t, "lag": 0.5, "u": 1.0 if n == 1 else np.eye(n)[0], "big": big, "b1": b1, "b2": b2}


def _run_one(name, triplet, paths, control):
    st = battery_settings(triplet, paths.horizon)
    t, big = st["time"], st["big"]
    m = triplet.measure
    wrong = _perturbed_triplet(triplet)
    if name == "ecf":
        return check_ecf(paths, wrong if control else triplet, t)
    if name == "poisson_law":
        lam = t * float(nu_integral(m, None, big))
        claimed = (1.25 * lam if lam > 0 else 1.0) if control else lam
        return check_poisson_law(count_jumps(paths, big, t), claimed, paths.seed)
    if name == "jump_moments":
        f = (lambda x: x) if triplet.dim == 1 else (lambda x: x[:, 0])
        return check_jump_moments(paths, f, big, t, _scaled_measure(m, 7.0 / 6.0) if control else m)
    if name == "disjoint_independence":
        if control:
            return check_disjoint_independence(paths, st["b1"], st["b1"], t, _allow_overlap=True)
        return check_disjoint_independence(paths, st["b1"], st["b2"], t)
    if name == "martingale":
        return check_martingale_normalization(paths, wrong if control else triplet, st["u"], [(t / 2, t)])
    if name == "jump_covariance":
        return check_jump_covariance_identity(paths, st["b1"], st["b1"], m, t, compensate=not control)
    if name == "gaussian_residual":
        return check_gaussian_residual(paths, wrong if control else triplet, t)
    if name == "strong_markov":
        return check_strong_markov(paths, wrong if control else triplet, big, st["lag"])
    raise KeyError(name)


def run_battery(triplet, paths, names=CHECK_NAMES, controls=False):
    """Run the named checks on ``paths``; with ``controls`` run the negative
    controls instead (each of which should fail).

    A check whose preconditions do not hold for this triplet or grid is
    reported as inconclusive with the reason.
    """
    reports = []
    for name in names:
        if name not in CHECK_NAMES:
            raise KeyError(f"unknown check {name!r}")
        label = f"{name}[control]" if controls else name
        try:
            rep = _run_one(name, triplet, paths, controls)
        except ValueError as exc:
            rep = inconclusive(label, paths.n_paths, paths.seed, str(exc))
        else:
            if controls:
                rep = CheckReport(label, *(getattr(rep, f) for f in (
                    "statistic", "expected", "tolerance", "rule", "n", "seed", "passed", "status", "components", "notes")))
        reports.append(rep)
    return reports
