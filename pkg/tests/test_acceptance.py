"""Acceptance criteria 1-10.

Every criterion uses a seed fixed here in advance. Each test prints one
``PASS``/``FAIL`` line. Running the module as a script prints the same lines
without pytest:

    python tests/test_acceptance.py
"""
import json
import math
import time

import numpy as np
import pytest

from levyito.jumpmeasure import count_jumps
from levyito.measure import AtomicMeasure, LevyTriplet, power_density
from levyito.recover import RecoveryConfig, roundtrip_report
from levyito.regions import abs_at_least, at_least, at_most
from levyito.simulate import SimConfig, omitted_variance_rate, simulate_paths
from levyito.verify import (
    check_disjoint_independence,
    check_ecf,
    check_gaussian_residual,
    check_jump_covariance_identity,
    check_jump_moments,
    check_strong_markov,
    clt_band,
    default_u_grid,
)

pytestmark = pytest.mark.acceptance

N = 100_000
SEEDS = {1: 101, 2: 102, 3: 103, 4: 104, 5: 105, 6: 106, 7: 107, 8: 108}
RUNTIME_LIMIT = {1: 10.0, 2: 60.0, 3: 30.0, 4: 30.0, 5: 30.0, 6: 60.0, 7: 60.0, 8: 60.0, 9: 30.0}

MIXED = LevyTriplet(0.0, 1.0, AtomicMeasure.from_atoms([(1.0, 1.0), (-1.0, 1.0)]))
MIXED_CONFIG = SimConfig(10.0, 0.1)  # horizon 10 satisfies the strong Markov rule 10 (s + 1/nu(B))
POISSON2 = LevyTriplet(0.0, 0.0, AtomicMeasure.from_atoms([(1.0, 2.0)]))
ROUNDTRIP_TRUTH = LevyTriplet(0.7, 0.25, AtomicMeasure.from_atoms([(-2.0, 0.5), (1.5, 1.0)]))
TAIL_SHELL = 16


def _band(name, value, target, tol):
    value = float(value)
    return {"name": name, "value": value, "target": target, "tolerance": tol, "pass": abs(value - target) <= tol}


def _at_least(name, value, minimum):
    return {"name": name, "value": float(value), "minimum": minimum, "pass": float(value) >= minimum}


def _flag(name, value):
    return {"name": name, "value": bool(value), "pass": bool(value)}


def _mixed_paths(seed):
    return simulate_paths(MIXED, MIXED_CONFIG, seed=seed, n_paths=N)


# ---------------------------------------------------------------------------
# criteria; each returns a list of comparisons (plain JSON-able dicts)
# ---------------------------------------------------------------------------

def criterion_1():
    """Poisson law of N_1(B) with t nu(B) = 2, with the literal 0.018 bands."""
    from scipy import stats

    paths = simulate_paths(POISSON2, SimConfig(1.0, 1.0), seed=SEEDS[1], n_paths=N)
    counts = count_jumps(paths, abs_at_least(1.0), 1.0)
    top = int(counts.max())
    observed = np.bincount(counts, minlength=top + 1).astype(float)
    probs = stats.poisson.pmf(np.arange(top + 1), 2.0)
    probs[-1] += stats.poisson.sf(top, 2.0)
    expected = probs * N
    # pool the upper tail until every expected count is at least 5
    while expected[-1] < 5.0:
        expected[-2] += expected[-1]
        observed[-2] += observed[-1]
        expected, observed = expected[:-1], observed[:-1]
    chi = float(np.sum((observed - expected) ** 2 / expected))
    p = float(stats.chi2.sf(chi, len(expected) - 1))
    return [
        _at_least("chi-square p-value", p, 1e-3),
        _band("mean", np.mean(counts), 2.0, 0.018),
        _band("variance", np.var(counts, ddof=1), 2.0, 0.018),
    ]


def criterion_2():
    """ECF of the mixed fixture at t = 1 over 21 frequencies."""
    assert len(default_u_grid()) == 21
    rep = check_ecf(_mixed_paths(SEEDS[2]), MIXED, 1.0)
    return [_band("sup |ECF - exp(-psi)|", rep.statistic, 0.0, 0.0127), _flag("check_ecf report", rep.passed)]


def criterion_3():
    """Mean and compensated variance of int x N_1(dx) for nu = 3 delta_2."""
    m = AtomicMeasure.from_atoms([(2.0, 3.0)])
    paths = simulate_paths(LevyTriplet(0.0, 0.0, m), SimConfig(1.0, 1.0), seed=SEEDS[3], n_paths=N)
    rep = check_jump_moments(paths, lambda x: x, at_least(1.0), 1.0, m)
    mean, var = rep.components
    return [_band("mean of int f dN_1", mean.statistic, 6.0, 0.044),
            _band("variance of compensated integral", var.statistic, 12.0, 0.05 * 12.0)]


def criterion_4():
    """Factorization on a 5 x 5 grid for {x >= 1} and {x <= -1}; B1 = B2 must fail."""
    paths = _mixed_paths(SEEDS[4])
    rep = check_disjoint_independence(paths, at_least(1.0), at_most(-1.0), 1.0)
    control = check_disjoint_independence(paths, at_least(1.0), at_least(1.0), 1.0, _allow_overlap=True)
    return [_band("sup |joint - product|", rep.statistic, 0.0, 8.0 / math.sqrt(N)),
            _flag("B1 = B2 control fails", not control.passed)]


def criterion_5():
    """Both estimators of E[M_1 N_1] agree with 2; the uncompensated control fails."""
    paths = simulate_paths(POISSON2, SimConfig(1.0, 1.0), seed=SEEDS[5], n_paths=N)
    b = abs_at_least(1.0)
    rep = check_jump_covariance_identity(paths, b, b, POISSON2.measure, 1.0)
    control = check_jump_covariance_identity(paths, b, b, POISSON2.measure, 1.0, compensate=False)
    out = [_band(c.name, c.statistic, c.expected, c.tolerance) for c in rep.components]
    out.append(_flag("uncompensated control fails", not control.passed))
    return out


def criterion_6():
    """Gaussian residual of the mixed fixture: ECF band and excess kurtosis band."""
    rep = check_gaussian_residual(_mixed_paths(SEEDS[6]), MIXED, 1.0)
    ecf, kurt = rep.components
    return [_band("sup |ECF(R) - exp(-u^2/2)|", ecf.statistic, 0.0, 0.0127),
            _band("excess kurtosis", kurt.statistic, 0.0, 4.0 * math.sqrt(24.0 / N))]


def criterion_7():
    """Restart at the first jump of size |x| >= 1, lag 0.5, on the mixed fixture."""
    paths = _mixed_paths(SEEDS[7])
    rep = check_strong_markov(paths, MIXED, abs_at_least(1.0), 0.5)
    ecf, corr, kept = rep.components
    return [_band("sup |ECF(post) - exp(-s psi)|", ecf.statistic, 0.0, clt_band(rep.n)),
            _band("corr(post, pre)", corr.statistic, 0.0, clt_band(rep.n)),
            _at_least("retained fraction", kept.statistic, 0.9999)]


def shell_discretization(k_tail=TAIL_SHELL):
    """Atoms carrying |x|^-2 on (0, 1].

    Shell ``(1/(k+1), 1/k]`` for ``k <= k_tail`` gets one atom at the
    logarithmic mean of its ends, which matches both the first and second
    moments of the shell. All of ``(0, 1/(k_tail+1)]`` becomes one atom at its
    upper end carrying its second moment ``1/(k_tail+1)``.
    """
    atoms = []
    for k in range(1, k_tail + 1):
        lo, hi = 1.0 / (k + 1), 1.0 / k
        log_ratio = math.log(hi / lo)
        atoms.append(((hi - lo) / log_ratio, log_ratio**2 / (hi - lo)))
    c = 1.0 / (k_tail + 1)
    atoms.append((c, 1.0 / c))
    return AtomicMeasure.from_atoms(atoms)


def criterion_8():
    """Variance of the part omitted at eps = 0.25 by paired exact and truncated runs."""
    m = shell_discretization()
    triplet = LevyTriplet(0.0, 0.0, m)
    eps_exact = 1.0 / (TAIL_SHELL + 2)
    exact = simulate_paths(triplet, SimConfig(1.0, 1.0, epsilon=eps_exact), seed=SEEDS[8], n_paths=N)
    trunc = simulate_paths(triplet, SimConfig(1.0, 1.0, epsilon=0.25), seed=SEEDS[8], n_paths=N)
    big_exact = np.abs(exact.jump_sizes[:, 0]) > 0.25
    shared = (np.array_equal(exact.jump_times[big_exact], trunc.jump_times)
              and np.array_equal(exact.path_ids[big_exact], trunc.path_ids))
    diff = exact.value_at(1.0)[:, 0] - trunc.value_at(1.0)[:, 0]
    small = m.norms <= 0.25
    sigma2 = float(np.sum(m.masses[small] * m.locations[small, 0] ** 2))
    kappa4 = float(np.sum(m.masses[small] * m.locations[small, 0] ** 4))
    tol = 4.0 * math.sqrt((2.0 * sigma2**2 + kappa4) / N)
    density = power_density(1.0, 2.0, ((0.0, 1.0),))
    return [
        _band("omitted variance of |x|^-2 at eps=0.25 (quadrature)", omitted_variance_rate(density, 0.25), 0.25, 1e-9),
        _band("omitted variance of the discretization", sigma2, 0.25, 1e-12),
        _band("reported omitted-variance bound", trunc.omitted_variance, 0.25, 1e-12),
        _flag("jumps above eps shared by both runs", shared),
        _band("mean of paired difference", np.mean(diff), 0.0, 4.0 * math.sqrt(sigma2 / N)),
        _band("variance of paired difference", np.var(diff, ddof=1), 0.25, tol),
    ]


def criterion_9():
    """Roundtrip of the two-atom truth and of a pure Gaussian under the default config."""
    cfg = RecoveryConfig()
    rep, rec = roundtrip_report(ROUNDTRIP_TRUTH, cfg)
    out = [_band(c.name, c.statistic, c.expected, c.tolerance) for c in rep.components]
    gauss, _ = roundtrip_report(LevyTriplet(0.0, 1.0), cfg)
    out += [_band("gaussian: " + c.name, c.statistic, c.expected, c.tolerance) for c in gauss.components]
    out.append(_flag("no flags raised", not rec.flags))
    return out


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 10)}


def run_criterion(i):
    """``(report_bytes, passed, seconds)``; the bytes exclude the wall time."""
    start = time.perf_counter()
    comps = CRITERIA[i]()
    seconds = time.perf_counter() - start
    report = {"criterion": i, "seed": SEEDS.get(i), "N": N if i in SEEDS else None, "components": comps}
    passed = all(c["pass"] for c in comps)
    return json.dumps(report, sort_keys=True).encode(), passed, seconds


def status_line(i, passed, seconds, comps):
    worst = [c["name"] for c in comps if not c["pass"]]
    detail = "all components within band" if not worst else "failing: " + ", ".join(worst)
    return f"{'PASS' if passed else 'FAIL'} criterion {i}: {detail} ({seconds:.1f} s)"


_FIRST_RUN = {}


def _first_run(i):
    if i not in _FIRST_RUN:
        _FIRST_RUN[i] = run_criterion(i)
    return _FIRST_RUN[i]


@pytest.mark.parametrize("i", range(1, 10))
def test_criterion(i, capsys):
    data, passed, seconds = _first_run(i)
    comps = json.loads(data)["components"]
    ok = passed and seconds < RUNTIME_LIMIT[i]
    line = status_line(i, ok, seconds, comps)
    if passed and not ok:
        line += f" over the {RUNTIME_LIMIT[i]:g} s budget"
    with capsys.disabled():
        print("\n" + line)
    assert passed, comps
    assert seconds < RUNTIME_LIMIT[i]


def test_criterion_10_determinism(capsys):
    same = []
    for i in range(1, 10):
        again, _, _ = run_criterion(i)
        same.append(again == _first_run(i)[0])
    bad = [i for i, s in zip(range(1, 10), same) if not s]
    line = f"{'PASS' if not bad else 'FAIL'} criterion 10: " + (
        "reports of criteria 1-9 byte-identical on re-run" if not bad else f"reports differ for {bad}")
    with capsys.disabled():
        print("\n" + line)
    assert not bad


if __name__ == "__main__":
    first = {}
    for i in range(1, 10):
        data, passed, seconds = run_criterion(i)
        first[i] = data
        print(status_line(i, passed and seconds < RUNTIME_LIMIT[i], seconds, json.loads(data)["components"]))
    bad = [i for i in range(1, 10) if run_criterion(i)[0] != first[i]]
    print(f"{'PASS' if not bad else 'FAIL'} criterion 10: re-run reports " + ("identical" if not bad else f"differ {bad}"))
