import math

import numpy as np
import pytest

from levyito.regions import (
    Annulus,
    abs_at_least,
    at_least,
    at_most,
    interval,
    intersect,
    overlaps,
    point,
    shell,
    union,
)


def test_closed_and_open_endpoints():
    r = interval(1.0, 2.0, "left")
    np.testing.assert_array_equal(r.contains(np.array([1.0, 1.5, 2.0])), [True, True, False])
    assert point(2.0).contains(np.array([2.0]))[0]


def test_shells_partition_the_punctured_ball():
    x = np.array([0.5, 1.0 / 3.0, 0.34, -1.0])
    hits = np.array([shell(k).contains(x) for k in range(1, 5)])
    assert np.all(hits.sum(axis=0) == 1)
    assert shell(2).contains(np.array([0.5]))[0] and not shell(1).contains(np.array([0.5]))[0]


def test_bounded_away_from_zero():
    assert abs_at_least(1.0).bounded_away_from_zero()
    assert not interval(0.0, 1.0, "right").bounded_away_from_zero()
    assert Annulus(0.0, math.inf, True, False, 2, box_lo=(0.5, -math.inf)).bounded_away_from_zero()


def test_overlap_detection():
    assert not overlaps(at_least(1.0), at_most(-1.0))
    assert overlaps(abs_at_least(1.0), at_least(2.0))
    assert not overlaps(interval(0.5, 1.0, "left"), interval(1.0, 2.0, "left"))
    a = Annulus(1.0, math.inf, True, False, 2, box_lo=(0.5, -math.inf))
    b = Annulus(1.0, math.inf, True, False, 2, box_hi=(-0.5, math.inf))
    assert not overlaps(a, b)


def test_union_and_intersection():
    u = union(at_least(1.0), at_most(-1.0))
    np.testing.assert_array_equal(u.contains(np.array([-2.0, 0.0, 1.0])), [True, False, True])
    i = intersect(abs_at_least(1.0), at_least(0.0))
    np.testing.assert_array_equal(i.contains(np.array([-2.0, 0.5, 1.0])), [False, False, True])


def test_annulus_in_three_dimensions():
    a = Annulus(1.0, 2.0, True, True, 3)
    pts = np.array([[1.0, 0, 0], [1.0, 1.0, 1.0], [0.1, 0.1, 0.1]])
    np.testing.assert_array_equal(a.contains(pts), [True, True, False])
    with pytest.raises(ValueError):
        Annulus(2.0, 1.0, True, True, 1)
