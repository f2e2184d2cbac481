import math

import numpy as np
import pytest

from levyito.measure import AtomicMeasure, LevyTriplet, power_density
from levyito.regions import abs_at_least, at_least, at_most, interval
from levyito.simulate import SimConfig, simulate_paths
from levyito.jumpmeasure import count_jumps
from levyito.verify import (
    CHECK_NAMES,
    check_disjoint_independence,
    check_ecf,
    check_gaussian_residual,
    check_jump_covariance_identity,
    check_jump_moments,
    check_martingale_normalization,
    check_poisson_law,
    check_strong_markov,
    clt_band,
    run_battery,
)

N = 100_000
POISSON2 = LevyTriplet(0.0, 0.0, AtomicMeasure.from_atoms([(1.0, 2.0)]))


@pytest.fixture(scope="module")
def mixed_paths():
    t = LevyTriplet(0.0, 1.0, AtomicMeasure.from_atoms([(1.0, 1.0), (-1.0, 1.0)]))
    return t, simulate_paths(t, SimConfig(10.0, 0.1), seed=2024, n_paths=N)


@pytest.fixture(scope="module")
def poisson_paths():
    return simulate_paths(POISSON2, SimConfig(10.0, 0.5), seed=77, n_paths=N)


def test_band_is_root_n_homogeneous():
    assert clt_band(4 * 12345) == pytest.approx(clt_band(12345) / 2)
    assert clt_band(N) == pytest.approx(4 / math.sqrt(N))


# -- ECF --------------------------------------------------------------------


def test_ecf_pure_drift_exact():
    t = LevyTriplet(5.0, 0.0)
    rep = check_ecf(simulate_paths(t, SimConfig(1.0, 0.5), 1, 10_000), t, 1.0)
    assert rep.passed and rep.statistic <= 1e-14


def test_ecf_brownian_and_poisson(poisson_paths):
    t = LevyTriplet(0.0, 1.0)
    assert check_ecf(simulate_paths(t, SimConfig(1.0, 0.5), 3, N), t, 1.0).passed
    assert check_ecf(poisson_paths, POISSON2, 1.0).passed


def test_ecf_needs_enough_samples():
    t = LevyTriplet(0.0, 1.0)
    with pytest.raises(ValueError):
        check_ecf(simulate_paths(t, SimConfig(), 1, 100), t, 1.0)


# -- Poisson law --------------------------------------------------------------


def test_poisson_law_examples(poisson_paths):
    assert check_poisson_law(np.zeros(100, int), 0.0).passed
    counts = count_jumps(poisson_paths, abs_at_least(1.0), 1.0)
    rep = check_poisson_law(counts, 2.0, 77)
    assert rep.passed, rep.components
    assert not check_poisson_law(counts, 2.5, 77).passed


# -- jump moments -------------------------------------------------------------


def test_jump_moments_single_atom():
    m = AtomicMeasure.from_atoms([(2.0, 3.0)])
    b = simulate_paths(LevyTriplet(0.0, 0.0, m), SimConfig(1.0, 1.0), 5, N)
    rep = check_jump_moments(b, lambda x: x, at_least(1.0), 1.0, m)
    assert rep.passed
    assert [c.expected for c in rep.components] == [6.0, 12.0]
    zero = check_jump_moments(b, np.zeros_like, at_least(1.0), 1.0, m)
    assert zero.passed and [c.expected for c in zero.components] == [0.0, 0.0]


def test_jump_moments_power_density():
    m = power_density(1.0, 2.0, ((0.0, 1.0),))
    b = simulate_paths(LevyTriplet(0.0, 0.0, m), SimConfig(1.0, 1.0, epsilon=0.25), 6, N)
    rep = check_jump_moments(b, lambda x: x, interval(0.5, 1.0, "right"), 1.0, m)
    assert rep.components[0].expected == pytest.approx(math.log(2.0), rel=1e-10)
    assert rep.passed


# -- disjoint independence ----------------------------------------------------


def test_disjoint_independence(mixed_paths):
    t, b = mixed_paths
    assert check_disjoint_independence(b, at_least(1.0), at_most(-1.0), 1.0).passed
    assert check_disjoint_independence(b, at_least(1.0), at_most(-5.0), 1.0).statistic <= 1e-14
    control = check_disjoint_independence(b, at_least(1.0), at_least(1.0), 1.0, _allow_overlap=True)
    assert not control.passed
    with pytest.raises(ValueError, match="overlap"):
        check_disjoint_independence(b, at_least(1.0), abs_at_least(1.0), 1.0)


# -- martingale ---------------------------------------------------------------


def test_martingale_examples(poisson_paths):
    drift = LevyTriplet(2.0, 0.0)
    rep = check_martingale_normalization(simulate_paths(drift, SimConfig(1.0, 0.5), 1, 1000), drift, 1.0, [(0.5, 1.0)])
    assert rep.passed and max(c.statistic for c in rep.components) <= 1e-14
    bm = LevyTriplet(0.0, 1.0)
    rep = check_martingale_normalization(simulate_paths(bm, SimConfig(1.0, 0.5), 2, N), bm, 1.0, [(0.5, 1.0)])
    assert rep.passed
    assert rep.components[0].tolerance == pytest.approx(4 * math.exp(0.5) / math.sqrt(N))
    assert check_martingale_normalization(poisson_paths, POISSON2, math.pi, [(0.5, 1.0)]).passed


# -- jump covariance ----------------------------------------------------------


def test_theorem_identity(poisson_paths):
    b = abs_at_least(1.0)
    rep = check_jump_covariance_identity(poisson_paths, b, b, POISSON2.measure, 1.0)
    assert rep.passed
    assert rep.components[0].expected == 2.0
    assert not check_jump_covariance_identity(poisson_paths, b, b, POISSON2.measure, 1.0, compensate=False).passed


def test_theorem_identity_disjoint_regions(mixed_paths):
    t, b = mixed_paths
    rep = check_jump_covariance_identity(b, at_least(1.0), at_most(-1.0), t.measure, 1.0)
    assert rep.passed and rep.components[0].expected == 0.0


# -- Gaussian residual --------------------------------------------------------


def test_gaussian_residual(mixed_paths, poisson_paths):
    t, b = mixed_paths
    assert check_gaussian_residual(b, t, 1.0).passed
    rep = check_gaussian_residual(poisson_paths, POISSON2, 1.0)
    assert rep.passed and rep.statistic == 0.0
    bm = LevyTriplet(0.0, 1.0)
    rep = check_gaussian_residual(simulate_paths(bm, SimConfig(1.0, 0.25), 8, N), bm, 1.0)
    assert rep.passed and rep.components[1].tolerance == pytest.approx(4 * math.sqrt(24 / N))


# -- strong Markov ------------------------------------------------------------


def test_strong_markov_examples(mixed_paths, poisson_paths):
    assert check_strong_markov(poisson_paths, POISSON2, abs_at_least(1.0), 0.5).passed
    t, b = mixed_paths
    rep = check_strong_markov(b, t, abs_at_least(1.0), 0.5)
    assert rep.passed and rep.n >= 0.9999 * N
    drift = LevyTriplet(1.0, 0.0, AtomicMeasure.from_atoms([(2.0, 1.0)]))
    bd = simulate_paths(drift, SimConfig(20.0, 0.5), 3, 2000)
    rep = check_strong_markov(bd, drift, abs_at_least(1.0), 0.5)
    assert rep.passed, rep.components


def test_strong_markov_horizon_rule_and_inconclusive():
    b = simulate_paths(POISSON2, SimConfig(2.0, 0.5), 1, 20_000)
    with pytest.raises(ValueError, match="horizon"):
        check_strong_markov(b, POISSON2, abs_at_least(1.0), 0.5)
    few = simulate_paths(POISSON2, SimConfig(10.0, 0.5), 1, 500)
    assert check_strong_markov(few, POISSON2, abs_at_least(1.0), 0.5).status == "inconclusive"


# -- battery ------------------------------------------------------------------


def test_battery_and_controls(mixed_paths):
    t, b = mixed_paths
    reports = run_battery(t, b)
    assert [r.check for r in reports] == list(CHECK_NAMES)
    assert all(r.passed for r in reports), [r.summary() for r in reports if not r.passed]
    controls = run_battery(t, b, controls=True)
    assert not any(r.passed for r in controls)
    assert all(r.check.endswith("[control]") for r in controls)


def test_reports_are_reproducible(mixed_paths):
    t, _ = mixed_paths
    cfg = SimConfig(10.0, 0.1)
    a = [r.to_dict() for r in run_battery(t, simulate_paths(t, cfg, 5, 20_000), ("ecf", "martingale"))]
    b = [r.to_dict() for r in run_battery(t, simulate_paths(t, cfg, 5, 20_000), ("ecf", "martingale"))]
    assert a == b


def test_report_fields(mixed_paths):
    t, b = mixed_paths
    d = run_battery(t, b, ("ecf",))[0].to_dict()
    assert {"check", "statistic", "expected", "tolerance", "N", "seed", "pass"} <= set(d)


def test_unknown_check_name(mixed_paths):
    t, b = mixed_paths
    with pytest.raises(KeyError):
        run_battery(t, b, ("nope",))
