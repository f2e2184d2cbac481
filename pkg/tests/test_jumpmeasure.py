import numpy as np
import pytest
from hypothesis import given, strategies as st

from levyito.jumpmeasure import (
    compensated_jump_process,
    count_jumps,
    detect_jumps_by_threshold,
    jump_integral,
    jump_times_in,
)
from levyito.measure import AtomicMeasure, LevyTriplet
from levyito.regions import abs_at_least, at_least, interval, point
from levyito.simulate import PathSample, SimConfig, sample_levy_path, simulate_paths


@pytest.fixture
def three_jumps():
    return PathSample.from_jumps([0.3, 0.7, 0.9], [2.0, -1.5, 0.2])


def test_jump_times(three_jumps):
    np.testing.assert_array_equal(jump_times_in(three_jumps, at_least(1.0)), [0.3])
    np.testing.assert_array_equal(jump_times_in(three_jumps, abs_at_least(1.0)), [0.3, 0.7])
    assert len(jump_times_in(PathSample.from_jumps([], []), abs_at_least(1.0))) == 0


def test_counts(three_jumps):
    assert count_jumps(three_jumps, abs_at_least(1.0), 0.5) == 1
    assert count_jumps(three_jumps, abs_at_least(1.0), 0.0) == 0
    with pytest.raises(ValueError):
        count_jumps(three_jumps, abs_at_least(1.0), 1.5)


def test_jump_integrals(three_jumps):
    assert jump_integral(three_jumps, lambda x: x**2, abs_at_least(1.0), 1.0) == 6.25
    assert jump_integral(three_jumps, None, at_least(1.0), 0.5) == 2.0
    assert jump_integral(three_jumps, np.ones_like, abs_at_least(0.1), 1.0) == count_jumps(three_jumps, abs_at_least(0.1), 1.0)


def test_compensated_process():
    p = PathSample.from_jumps([0.4], [2.0])
    m = AtomicMeasure.from_atoms([(2.0, 3.0)])
    assert compensated_jump_process(p, point(2.0), m, 1.0) == -4.0
    sym = AtomicMeasure.from_atoms([(1.0, 1.0), (-1.0, 1.0)])
    q = PathSample.from_jumps([0.2, 0.5], [1.0, 1.0])
    assert compensated_jump_process(q, abs_at_least(1.0), sym, 1.0) == jump_integral(q, None, abs_at_least(1.0), 1.0)


def test_region_touching_origin_rejected(three_jumps):
    with pytest.raises(ValueError):
        count_jumps(three_jumps, interval(0.0, 1.0, "right"), 1.0)


def test_compensated_moments_over_replicates():
    m = AtomicMeasure.from_atoms([(2.0, 3.0)])
    b = simulate_paths(LevyTriplet(0.0, 0.0, m), SimConfig(1.0, 1.0), seed=21, n_paths=100_000)
    y = compensated_jump_process(b, point(2.0), m, 1.0)
    assert abs(y.mean()) <= 4 * np.sqrt(12 / 1e5)
    assert abs(y.var(ddof=1) - 12.0) <= 0.05 * 12.0


@pytest.fixture(scope="module")
def batch():
    t = LevyTriplet(0.3, 0.5, AtomicMeasure.from_atoms([(1.5, 1.0), (-1.0, 2.0), (0.4, 3.0), (-2.5, 0.5)]))
    return simulate_paths(t, SimConfig(1.0, 0.1, epsilon=0.1), seed=7, n_paths=300)


cuts = st.lists(st.floats(0.1, 3.0), min_size=1, max_size=4, unique=True).map(sorted)


@given(cuts, st.floats(0, 1))
def test_sigma_additivity(batch, edges, t):
    pieces = [interval(a, b, "left") for a, b in zip([0.1] + edges, edges + [np.inf])]
    pieces += [interval(-b, -a, "right") for a, b in zip([0.1] + edges, edges + [np.inf])]
    total = sum(count_jumps(batch, r, t) for r in pieces)
    np.testing.assert_array_equal(total, count_jumps(batch, abs_at_least(0.1), t))


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(batch, alpha, beta):
    f, g = (lambda x: x**2), np.sin
    region = abs_at_least(0.2)
    lhs = jump_integral(batch, lambda x: alpha * f(x) + beta * g(x), region, 1.0)
    rhs = alpha * jump_integral(batch, f, region, 1.0) + beta * jump_integral(batch, g, region, 1.0)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_counts_are_unit_step_functions(batch):
    grid = np.linspace(0, 1, 101)
    c = np.array([count_jumps(batch, abs_at_least(0.3), t) for t in grid])
    steps = np.diff(c, axis=0)
    assert np.all(steps >= 0)
    times = jump_times_in(batch, abs_at_least(0.3))
    for i in range(5):
        assert len(times[i]) == c[-1, i]


def test_batch_and_single_agree(batch):
    p = batch.path(3)
    assert count_jumps(p, abs_at_least(1.0), 0.6) == count_jumps(batch, abs_at_least(1.0), 0.6)[3]


def test_vector_valued_integrals():
    from levyito.regions import Annulus
    p = PathSample.from_jumps([0.5], [[1.0, 2.0]])
    out = jump_integral(p, None, Annulus(1.0, np.inf, True, False, 2), 1.0)
    np.testing.assert_array_equal(out, [1.0, 2.0])


def test_threshold_detector_is_diagnostic():
    t = LevyTriplet(0.0, 0.01, AtomicMeasure.from_atoms([(5.0, 1.0)]))
    p = sample_levy_path(t, SimConfig(5.0, 0.01), seed=3)
    flagged = detect_jumps_by_threshold(p, t.covariance)
    assert set(np.searchsorted(p.grid, p.jump_times)) <= set(flagged) | set()
