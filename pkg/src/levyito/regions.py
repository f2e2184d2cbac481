"""Borel regions of jump space.

Two concrete region types cover what the library needs:

* :class:`IntervalUnion` -- finite union of one-dimensional intervals with
  open/closed endpoint flags.
* :class:`Annulus` -- ``{r_min <= |x| <= r_max}`` in R^n (Euclidean norm),
  optionally intersected with an axis-aligned box.

Regions handed to the jump-measure functions must keep 0 out of their
closure; :func:`nu_integral <levyito.measure.nu_integral>` also accepts
regions touching 0.
"""
from dataclasses import dataclass
import math

import numpy as np


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if dim == 1 and x.ndim <= 1:
        return x.reshape(-1, 1)
    return x.reshape(-1, dim)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo > self.hi:
            raise ValueError(f"bad interval bounds ({self.lo}, {self.hi})")
        # infinite endpoints are never attained
        if math.isinf(self.lo):
            object.__setattr__(self, "lo_closed", False)
        if math.isinf(self.hi):
            object.__setattr__(self, "hi_closed", False)

    @property
    def is_empty(self):
        return self.lo == self.hi and not (self.lo_closed and self.hi_closed)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        lo_ok = x >= self.lo if self.lo_closed else x > self.lo
        hi_ok = x <= self.hi if self.hi_closed else x < self.hi
        return lo_ok & hi_ok

    def closure_contains_zero(self):
        return not self.is_empty and self.lo <= 0.0 <= self.hi

    def intersect(self, other):
        if self.lo > other.lo:
            lo, lo_c = self.lo, self.lo_closed
        elif other.lo > self.lo:
            lo, lo_c = other.lo, other.lo_closed
        else:
            lo, lo_c = self.lo, self.lo_closed and other.lo_closed
        if self.hi < other.hi:
            hi, hi_c = self.hi, self.hi_closed
        elif other.hi < self.hi:
            hi, hi_c = other.hi, other.hi_closed
        else:
            hi, hi_c = self.hi, self.hi_closed and other.hi_closed
        if lo > hi:
            return None
        iv = Interval(lo, hi, lo_c, hi_c)
        return None if iv.is_empty else iv

    def __str__(self):
        return f"{'[' if self.lo_closed else '('}{self.lo:g}, {self.hi:g}{']' if self.hi_closed else ')'}"


@dataclass(frozen=True)
class IntervalUnion:
    """A one-dimensional region: finite union of intervals."""

    intervals: tuple

    dim = 1

    def __post_init__(self):
        ivs = tuple(iv for iv in self.intervals if not iv.is_empty)
        object.__setattr__(self, "intervals", ivs)

    def contains(self, x):
        pts = _as_points(x, 1)[:, 0]
        out = np.zeros(pts.shape, dtype=bool)
        for iv in self.intervals:
            out |= iv.contains(pts)
        return out

    def bounded_away_from_zero(self):
        return not any(iv.closure_contains_zero() for iv in self.intervals)

    def pieces(self):
        return self.intervals

    def __str__(self):
        return " U ".join(str(iv) for iv in self.intervals) or "{}"


@dataclass(frozen=True)
class Annulus:
    """``{r_min <= |x| <= r_max}`` (flags control the endpoints), optional box."""

    r_min: float
    r_max: float = math.inf
    min_closed: bool = True
    max_closed: bool = True
    dim: int = 1
    box_lo: tuple = None
    box_hi: tuple = None

    def __post_init__(self):
        if self.r_min < 0 or self.r_min > self.r_max:
            raise ValueError(f"bad annulus radii ({self.r_min}, {self.r_max})")
        if not 1 <= self.dim <= 3:
            raise ValueError("annulus dimension must be 1, 2 or 3")
        if math.isinf(self.r_max):
            object.__setattr__(self, "max_closed", False)
        for name in ("box_lo", "box_hi"):
            val = getattr(self, name)
            if val is not None:
                val = tuple(float(v) for v in np.broadcast_to(val, (self.dim,)))
                object.__setattr__(self, name, val)

    def contains(self, x):
        pts = _as_points(x, self.dim)
        r = np.sqrt(np.sum(pts * pts, axis=1)) if self.dim > 1 else np.abs(pts[:, 0])
        ok = (r >= self.r_min) if self.min_closed else (r > self.r_min)
        ok &= (r <= self.r_max) if self.max_closed else (r < self.r_max)
        if self.box_lo is not None:
            ok &= np.all(pts >= np.asarray(self.box_lo), axis=1)
        if self.box_hi is not None:
            ok &= np.all(pts <= np.asarray(self.box_hi), axis=1)
        return ok

    def bounded_away_from_zero(self):
        if self.r_min > 0:
            return True
        if self.box_lo is None and self.box_hi is None:
            return False
        return _box_excludes_origin(self.box_lo, self.box_hi)

    def pieces(self):
        if self.dim != 1:
            raise ValueError("interval pieces exist only for one-dimensional regions")
        right = Interval(self.r_min, self.r_max, self.min_closed, self.max_closed)
        left = Interval(-self.r_max, -self.r_min, self.max_closed, self.min_closed)
        if self.r_min == 0:
            # the origin lies in both halves; keep it in one
            left = Interval(left.lo, 0.0, left.lo_closed, False)
        ivs = [left, right]
        if self.box_lo is not None or self.box_hi is not None:
            box = Interval(
                -math.inf if self.box_lo is None else self.box_lo[0],
                math.inf if self.box_hi is None else self.box_hi[0],
            )
            ivs = [iv.intersect(box) for iv in ivs]
        return tuple(iv for iv in ivs if iv is not None and not iv.is_empty)

    def __str__(self):
        lo = "[" if self.min_closed else "("
        hi = "]" if self.max_closed else ")"
        return f"|x| in {lo}{self.r_min:g}, {self.r_max:g}{hi}"


def _boxes_disjoint(a, b):
    lo = np.maximum(
        np.full(a.dim, -np.inf) if a.box_lo is None else np.asarray(a.box_lo),
        np.full(a.dim, -np.inf) if b.box_lo is None else np.asarray(b.box_lo),
    )
    hi = np.minimum(
        np.full(a.dim, np.inf) if a.box_hi is None else np.asarray(a.box_hi),
        np.full(a.dim, np.inf) if b.box_hi is None else np.asarray(b.box_hi),
    )
    return bool(np.any(lo > hi))


def _box_excludes_origin(lo, hi):
    if lo is not None and any(v > 0 for v in lo):
        return True
    if hi is not None and any(v < 0 for v in hi):
        return True
    return False


@dataclass(frozen=True)
class _Intersection:
    first: object
    second: object

    @property
    def dim(self):
        return self.first.dim

    def contains(self, x):
        return self.first.contains(x) & self.second.contains(x)

    def bounded_away_from_zero(self):
        return self.first.bounded_away_from_zero() or self.second.bounded_away_from_zero()

    def pieces(self):
        return intersect(IntervalUnion(self.first.pieces()), IntervalUnion(self.second.pieces())).pieces()

    def __str__(self):
        return f"({self.first}) & ({self.second})"


# -- constructors -----------------------------------------------------------

def interval(lo, hi, closed="both"):
    flags = {"both": (True, True), "left": (True, False), "right": (False, True), "neither": (False, False)}
    if closed not in flags:
        raise ValueError(f"closed must be one of {sorted(flags)}")
    return IntervalUnion((Interval(float(lo), float(hi), *flags[closed]),))


def at_least(a):
    """``{x >= a}`` (one-dimensional)."""
    return interval(a, math.inf, "left")


def at_most(b):
    """``{x <= b}`` (one-dimensional)."""
    return interval(-math.inf, b, "right")


def point(x):
    return interval(x, x, "both")


def abs_at_least(r, dim=1):
    """``{|x| >= r}``."""
    return Annulus(float(r), math.inf, True, False, dim)


def shell(k, dim=1):
    """The half-open shell ``{1/(k+1) < |x| <= 1/k}``."""
    if k < 1:
        raise ValueError("shell index starts at 1")
    return Annulus(1.0 / (k + 1), 1.0 / k, False, True, dim)


def union(*regions):
    ivs = []
    for reg in regions:
        ivs.extend(reg.pieces())
    return IntervalUnion(tuple(ivs))


def intersect(a, b):
    if a.dim == 1 and b.dim == 1:
        out = []
        for p in a.pieces():
            for q in b.pieces():
                iv = p.intersect(q)
                if iv is not None:
                    out.append(iv)
        return IntervalUnion(tuple(out))
    return _Intersection(a, b)


def overlaps(a, b):
    """Whether two regions may share a point (exact in one dimension)."""
    if a.dim != b.dim:
        raise ValueError("regions of different dimension")
    if a.dim == 1:
        return bool(intersect(a, b).pieces())
    if isinstance(a, Annulus) and isinstance(b, Annulus):
        lo = max(a.r_min, b.r_min)
        hi = min(a.r_max, b.r_max)
        if lo > hi:
            return False
        if _boxes_disjoint(a, b):
            return False
        if lo == hi:
            at_lo = (a.min_closed if a.r_min == lo else a.max_closed) and (b.min_closed if b.r_min == lo else b.max_closed)
            if not at_lo:
                return False
    return True
