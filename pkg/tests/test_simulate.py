import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from levyito import simulate as sim
from levyito.measure import AtomicMeasure, LevyTriplet, char_fn, power_density, tempered_stable_density, uniform_density
from levyito.regions import at_least, interval
from levyito.rng import RngStream
from levyito.simulate import (
    PathSample,
    SimConfig,
    make_grid,
    sample_compensated_small_jumps,
    sample_compound_poisson_jumps,
    sample_gaussian_skeleton,
    sample_levy_path,
    sample_poisson_events,
    simulate_paths,
)

N = 100_000


class _Fixed:
    def __init__(self, value):
        self.value = value

    def uniforms_at(self, counters):
        return np.full(len(counters), self.value)


# -- Poisson events ---------------------------------------------------------


def test_zero_rate_gives_no_events():
    assert len(sample_poisson_events(0.0, 5.0, RngStream(1, 0))) == 0


def test_inverse_cdf_arithmetic():
    times = sample_poisson_events(1.0, 3.0, _Fixed(0.5))
    np.testing.assert_allclose(times, np.log(2) * np.arange(1, 5))


def test_negative_rate_rejected():
    with pytest.raises(ValueError):
        sample_poisson_events(-1.0, 1.0, RngStream(1, 0))


def test_poisson_counts_mean_and_variance():
    counts = np.array([len(sample_poisson_events(2.0, 1.0, RngStream(17, i))) for i in range(20_000)])
    n = len(counts)
    assert abs(counts.mean() - 2.0) <= 4 * math.sqrt(2.0 / n)
    assert abs(counts.var(ddof=1) - 2.0) <= 4 * math.sqrt((2.0 + 2 * 4.0) / n)


def test_batched_counts_match_rate():
    t = LevyTriplet(0.0, 0.0, AtomicMeasure.from_atoms([(1.0, 2.0)]))
    b = simulate_paths(t, SimConfig(1.0, 1.0), seed=101, n_paths=N)
    counts = np.bincount(b.path_ids, minlength=N)
    assert abs(counts.mean() - 2.0) <= 4 * math.sqrt(2.0 / N)
    assert abs(counts.var(ddof=1) - 2.0) <= 4 * math.sqrt(10.0 / N)


# -- compound Poisson --------------------------------------------------------


def test_single_atom_sizes_and_counts():
    m = AtomicMeasure.from_atoms([(2.0, 3.0)])
    counts = []
    for i in range(5000):
        j = sample_compound_poisson_jumps(m, at_least(1.0), 1.0, RngStream(5, i))
        assert np.all(j.sizes == 2.0)
        counts.append(len(j))
    counts = np.array(counts)
    k = np.arange(0, 9)
    observed = np.array([np.sum(counts == v) for v in k[:-1]] + [np.sum(counts >= 8)])
    expected = np.append(stats.poisson.pmf(k[:-1], 3.0), stats.poisson.sf(7, 3.0)) * len(counts)
    assert stats.chisquare(observed, expected).pvalue >= 1e-3


def test_empty_region_gives_no_jumps():
    m = AtomicMeasure.from_atoms([(2.0, 3.0)])
    assert len(sample_compound_poisson_jumps(m, interval(5.0, 6.0), 1.0, RngStream(5, 0))) == 0


def test_infinite_activity_rejected():
    with pytest.raises(ValueError, match="use shell series"):
        sample_compound_poisson_jumps(power_density(1.0, 2.0), interval(0.0, 1.0, "right"), 1.0, RngStream(5, 0))


def test_sign_proportions(mixed_triplet):
    b = simulate_paths(LevyTriplet(0.0, 0.0, mixed_triplet.measure), SimConfig(1.0, 1.0), seed=8, n_paths=N)
    frac = np.mean(b.jump_sizes[:, 0] > 0)
    assert abs(frac - 0.5) <= 4 * math.sqrt(0.25 / len(b.jump_sizes))
    assert abs(frac - 0.5) <= 0.006


def test_density_sizes_follow_normalized_restriction():
    m = uniform_density(1.0, ((1.0, 3.0),))
    sizes = np.concatenate([sample_compound_poisson_jumps(m, at_least(1.0), 10.0, RngStream(2, i)).sizes[:, 0]
                            for i in range(300)])
    assert stats.kstest(sizes, stats.uniform(1.0, 2.0).cdf).pvalue >= 1e-3


def _normalized_cdf(density, lo, hi, n=4001):
    """CDF of ``density`` restricted to ``[lo, hi]`` on a geometric grid (per-panel quad)."""
    from scipy import integrate

    edges = np.geomspace(lo, hi, n)
    panel = [integrate.quad(density, a, b, epsabs=0, epsrel=1e-12)[0] for a, b in zip(edges[:-1], edges[1:])]
    cum = np.concatenate(([0.0], np.cumsum(panel)))
    return lambda x: np.interp(x, edges, cum / cum[-1])


def test_tempered_stable_large_jump_sizes():
    m = tempered_stable_density(1.0, 0.5, 2.0)
    sizes = sample_compound_poisson_jumps(m, at_least(1.0), 400_000.0, RngStream(31, 0)).sizes[:, 0]
    assert len(sizes) > 10_000
    cdf = _normalized_cdf(lambda x: m(np.array([x]))[0], 1.0, 40.0)
    assert stats.kstest(sizes, cdf).pvalue >= 1e-3


def test_tempered_stable_small_jump_sizes():
    m = tempered_stable_density(1.0, 0.5, 2.0)
    b = simulate_paths(LevyTriplet(0.0, 0.0, m), SimConfig(1.0, 1.0, epsilon=0.1), seed=32, n_paths=5_000)
    x = b.jump_sizes[:, 0]
    small = x[(x > 0.1) & (x < 1.0)]
    assert len(small) > 10_000
    cdf = _normalized_cdf(lambda v: m(np.array([v]))[0], 0.1, 1.0)
    assert stats.kstest(small, cdf).pvalue >= 1e-3


# -- Gaussian skeleton -------------------------------------------------------


def test_degenerate_gaussian_is_a_line():
    grid = make_grid(1.0, 0.1)
    sk = sample_gaussian_skeleton(0.0, 3.0, grid, RngStream(1, 0))
    np.testing.assert_array_equal(sk[:, 0], 3.0 * grid)


def test_brownian_variance():
    b = simulate_paths(LevyTriplet(0.0, 1.0), SimConfig(1.0, 0.5), seed=44, n_paths=N)
    x = b.terminal()[:, 0]
    assert abs(x.var(ddof=1) - 1.0) <= 4 * math.sqrt(2.0 / N)


def test_shared_seed_scales_linearly():
    grid = make_grid(1.0, 0.01)
    a = sample_gaussian_skeleton([[1.0]], 0.0, grid, RngStream(3, 0))
    b = sample_gaussian_skeleton([[4.0]], 0.0, grid, RngStream(3, 0))
    np.testing.assert_array_equal(b, 2.0 * a)


def test_non_psd_rejected():
    with pytest.raises(ValueError):
        sample_gaussian_skeleton([[-1.0]], 0.0, make_grid(1.0, 0.5), RngStream(3, 0))


# -- small jumps -------------------------------------------------------------


def test_large_atoms_only_means_no_small_jumps():
    m = AtomicMeasure.from_atoms([(1.0, 1.0), (-3.0, 2.0)])
    out = sample_compensated_small_jumps(m, 0.1, 1.0, make_grid(1.0, 0.5), RngStream(1, 2))
    assert len(out.jumps) == 0
    np.testing.assert_array_equal(out.compensator_rate, [0.0])
    assert out.omitted_variance == 0.0


def test_power_density_omitted_bound():
    m = power_density(1.0, 2.0, ((0.0, 1.0),))
    out = sample_compensated_small_jumps(m, 0.25, 1.0, make_grid(1.0, 0.5), RngStream(1, 2))
    assert out.omitted_variance == pytest.approx(0.25, rel=1e-10)
    assert np.all(np.abs(out.jumps.sizes) > 0.25)
    assert out.compensator_rate[0] == pytest.approx(-math.log(4.0), rel=1e-10)


def test_symmetric_compensator_exactly_zero():
    out = sample_compensated_small_jumps(power_density(1.0, 1.5), 0.01, 1.0, make_grid(1.0, 0.5), RngStream(1, 2))
    assert out.compensator_rate[0] == 0.0


def test_shell_labels_match_sizes():
    b = simulate_paths(LevyTriplet(0.0, 0.0, power_density(1.0, 1.5)), SimConfig(1.0, 0.5, epsilon=0.05), 3, 200)
    r = np.abs(b.jump_sizes[:, 0])
    small = r < 1.0
    k = b.jump_shells[small]
    assert np.all((r[small] > 1.0 / (k + 1)) & (r[small] <= 1.0 / k))
    assert np.all(b.jump_shells[~small] == 0)


def test_auto_epsilon_meets_target():
    m = power_density(1.0, 0.5)
    eps = sim.choose_epsilon(m, 1.0, 10_000)
    assert sim.omitted_variance_rate(m, eps) <= 1e-6
    k = round(1 / eps) - 1
    assert sim.omitted_variance_rate(m, 1.0 / k) > 1e-6


def test_auto_epsilon_floor_at_shell_cap():
    # |x|^-2 would need eps ~ 5e-7; the cap k_max = 10^4 wins and the bound is reported
    m = power_density(1.0, 2.0)
    assert sim.choose_epsilon(m, 1.0, 10_000) == 1.0 / 10_001


def test_epsilon_below_shell_cap_rejected():
    with pytest.raises(ValueError):
        simulate_paths(LevyTriplet(0.0, 0.0, power_density(1.0, 1.5)), SimConfig(epsilon=1e-3, k_max=10), 1)


@pytest.mark.parametrize("mode", sim.SMALL_JUMP_MODES)
def test_small_jump_variance_in_both_modes(mode):
    # Var X_1 = int_{eps<|x|<=1} x^2 |x|^-1.5 dx = 2 * (1 - eps^1.5) / 1.5
    m = power_density(1.0, 1.5)
    eps = 0.01
    b = simulate_paths(LevyTriplet(0.0, 0.0, m), SimConfig(1.0, 1.0, epsilon=eps, small_jump_mode=mode), 77, 40_000)
    x = b.terminal()[:, 0]
    var = 2 * (1 - eps**1.5) / 1.5
    kappa4 = 2 * (1 - eps**3.5) / 3.5
    assert abs(x.mean()) <= 4 * math.sqrt(var / len(x))
    assert abs(x.var(ddof=1) - var) <= 4 * math.sqrt((2 * var**2 + kappa4) / len(x))


# -- paths --------------------------------------------------------------------


def test_pure_drift_path_is_exact():
    p = sample_levy_path(LevyTriplet(5.0, 0.0), SimConfig(1.0, 0.1), seed=1)
    np.testing.assert_array_equal(p.values[:, 0], 5.0 * p.grid)
    assert len(p.jump_times) == 0


def test_poisson_staircase():
    t = LevyTriplet(0.0, 0.0, AtomicMeasure.from_atoms([(1.0, 2.0)]))
    p = sample_levy_path(t, SimConfig(1.0, 0.01), seed=4, replicate=3)
    np.testing.assert_array_equal(p.jump_sizes[:, 0], 1.0)
    expected = np.searchsorted(p.jump_times, p.grid, side="right")
    np.testing.assert_array_equal(p.values[:, 0], expected)


def _check_path_invariants(p):
    assert np.all(p.values[0] == 0.0)
    assert np.all(p.jump_times > 0) and np.all(p.jump_times <= p.horizon)
    assert np.all(np.diff(p.jump_times) > 0)
    assert np.all(np.any(p.jump_sizes != 0, axis=1))
    cum = np.array([p.jump_sizes[p.jump_times <= t].sum(axis=0) for t in p.grid]).reshape(p.values.shape)
    np.testing.assert_allclose(p.values, p.continuous + cum, rtol=0, atol=1e-12)


@given(st.integers(0, 2**64 - 1), st.integers(0, 10_000), st.floats(-2, 2), st.floats(0, 2))
@settings(max_examples=25, deadline=None)
def test_path_invariants(seed, rep, a, q):
    t = LevyTriplet(a, q, AtomicMeasure.from_atoms([(1.5, 2.0), (-0.3, 3.0), (0.05, 10.0)]))
    _check_path_invariants(sample_levy_path(t, SimConfig(2.0, 0.25, epsilon=0.04), seed, rep))


def test_reconstruction_has_no_eps_sized_steps():
    t = LevyTriplet(0.0, 0.0, AtomicMeasure.from_atoms([(0.5, 5.0), (-0.2, 5.0)]))
    p = sample_levy_path(t, SimConfig(1.0, 0.01, epsilon=0.1), seed=12)
    # with Q = 0 the continuous part is the compensator line
    np.testing.assert_allclose(np.diff(p.continuous[:, 0]), np.diff(p.grid) * p.compensator_rate[0], atol=1e-14)


def test_determinism_and_chunk_independence(monkeypatch, mixed_triplet):
    cfg = SimConfig(1.0, 0.1)
    whole = simulate_paths(mixed_triplet, cfg, seed=9, n_paths=64)
    again = simulate_paths(mixed_triplet, cfg, seed=9, n_paths=64)
    np.testing.assert_array_equal(whole.values, again.values)
    monkeypatch.setattr(sim, "_ROW_BUDGET", 50)
    chunked = simulate_paths(mixed_triplet, cfg, seed=9, n_paths=64)
    np.testing.assert_array_equal(whole.values, chunked.values)
    np.testing.assert_array_equal(whole.jump_times, chunked.jump_times)
    tail = simulate_paths(mixed_triplet, cfg, seed=9, n_paths=4, first_replicate=60)
    np.testing.assert_array_equal(whole.values[60:], tail.values)
    single = sample_levy_path(mixed_triplet, cfg, seed=9, replicate=17)
    np.testing.assert_array_equal(single.values, whole.path(17).values)


def test_different_seeds_differ(mixed_triplet):
    a = simulate_paths(mixed_triplet, SimConfig(), seed=1, n_paths=2)
    b = simulate_paths(mixed_triplet, SimConfig(), seed=2, n_paths=2)
    assert not np.array_equal(a.values, b.values)


def test_increment_stationarity(mixed_triplet):
    b = simulate_paths(mixed_triplet, SimConfig(2.0, 0.5), seed=31, n_paths=N)
    inc = (b.value_at(1.5) - b.value_at(0.5))[:, 0]
    x1 = b.value_at(1.0)[:, 0]
    u = np.linspace(-5, 5, 20)
    e1 = np.exp(1j * np.outer(u, inc)).mean(axis=1)
    e2 = np.exp(1j * np.outer(u, x1)).mean(axis=1)
    assert np.max(np.abs(e1 - e2)) <= 4 / math.sqrt(N)


def test_component_independence(mixed_triplet):
    b = simulate_paths(mixed_triplet, SimConfig(1.0, 0.5), seed=32, n_paths=N)
    gauss = b.gaussian[:, -1, 0]
    counts = np.bincount(b.path_ids, minlength=N)
    cov = np.cov(gauss, counts)[0, 1]
    assert abs(cov) <= 4 / math.sqrt(N) * 1.0 * math.sqrt(2.0)


def test_grid_must_be_hit():
    p = sample_levy_path(LevyTriplet(1.0, 0.0), SimConfig(1.0, 0.25), seed=1)
    assert p.value_at(0.5)[0] == 0.5
    with pytest.raises(ValueError, match="grid"):
        p.value_at(0.3)


def test_make_grid_last_step():
    g = make_grid(1.0, 0.3)
    assert g[0] == 0.0 and g[-1] == 1.0 and len(g) == 5


def test_sim_config_invariants():
    with pytest.raises(ValueError):
        SimConfig(horizon=1.0, dt=2.0)
    with pytest.raises(ValueError):
        SimConfig(epsilon=1.5)
    with pytest.raises(ValueError):
        SimConfig(small_jump_mode="other")


def test_from_jumps_fixture():
    p = PathSample.from_jumps([0.3, 0.7], [2.0, -1.5])
    assert p.values[-1, 0] == 0.5
    with pytest.raises(ValueError):
        PathSample.from_jumps([0.0], [1.0])


def test_multidimensional_paths():
    t = LevyTriplet([1.0, 0.0, -1.0], np.diag([1.0, 2.0, 0.5]),
                    AtomicMeasure.from_atoms([([1.0, 1.0, 0.0], 1.0), ([0.1, 0.0, 0.0], 4.0)]))
    b = simulate_paths(t, SimConfig(1.0, 0.5, epsilon=0.05), seed=6, n_paths=N)
    x = b.terminal()
    u = np.array([0.4, -0.3, 0.7])
    ecf = np.exp(1j * x @ u).mean()
    assert abs(ecf - char_fn(t, u, 1.0)) <= 4 / math.sqrt(N)
    _check_path_invariants(b.path(0))
