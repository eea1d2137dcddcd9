"""Exact piecewise-linear function algebra.

Everything downstream (loss functions, audit schedules, envelopes) runs on
the two primitives here: running maxima of a PWL function and the lower
envelope of a finite affine family.  Both are computed on exact breakpoints,
never by grid sampling, because the envelope kinks generally fall off any
preset grid and the chord suprema taken later need them exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# Breakpoints closer than this (scaled by the domain width) collapse to one.
BREAKPOINT_MERGE_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class PwlFunction:
    """Piecewise-linear function given by breakpoints with strictly increasing x."""

    xs: np.ndarray
    vs: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        vs = np.asarray(self.vs, dtype=float)
        if xs.ndim != 1 or xs.shape != vs.shape:
            raise ValueError("breakpoints must be two aligned 1-d arrays")
        if len(xs) < 2:
            raise ValueError("a PWL function needs at least 2 breakpoints")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(vs))):
            raise ValueError("breakpoints must be finite")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("breakpoint x-coordinates must be strictly increasing")
        xs.setflags(write=False)
        vs.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "vs", vs)

    @property
    def x_lo(self) -> float:
        return float(self.xs[0])

    @property
    def x_hi(self) -> float:
        return float(self.xs[-1])

    @property
    def span(self) -> float:
        return self.x_hi - self.x_lo

    @classmethod
    def from_pairs(cls, pairs) -> "PwlFunction":
        arr = np.asarray(pairs, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("expected a sequence of (x, value) pairs")
        return cls(arr[:, 0].copy(), arr[:, 1].copy())

    def to_dict(self) -> dict:
        return {"breakpoints": [[float(x), float(v)] for x, v in zip(self.xs, self.vs)]}

    @classmethod
    def from_dict(cls, data: dict) -> "PwlFunction":
        return cls.from_pairs(data["breakpoints"])

    def _check_domain(self, x: np.ndarray):
        slack = 1e-9 * max(1.0, self.span)
        if np.any(x < self.x_lo - slack) or np.any(x > self.x_hi + slack):
            bad = x[(x < self.x_lo - slack) | (x > self.x_hi + slack)]
            raise DomainError(
                f"x={bad.flat[0]} outside domain [{self.x_lo}, {self.x_hi}]"
            )

    def eval(self, x):
        """Interpolate at ``x`` (scalar or array); exact at breakpoints."""
        arr = np.asarray(x, dtype=float)
        self._check_domain(arr)
        out = np.interp(np.clip(arr, self.x_lo, self.x_hi), self.xs, self.vs)
        if np.isscalar(x) or arr.ndim == 0:
            return float(out)
        return out

    def slopes(self) -> np.ndarray:
        return np.diff(self.vs) / np.diff(self.xs)

    def __call__(self, x):
        return self.eval(x)


@dataclass(frozen=True)
class AffineLine:
    """A line ``slope*x + intercept`` with slope restricted to [0, 1]."""

    slope: float
    intercept: float

    def __post_init__(self):
        if not (-1e-9 <= self.slope <= 1 + 1e-9):
            raise ValueError(f"slope must lie in [0, 1], got {self.slope}")
        object.__setattr__(self, "slope", float(min(1.0, max(0.0, self.slope))))
        object.__setattr__(self, "intercept", float(self.intercept))

    def at(self, x):
        return self.slope * x + self.intercept


def _merge_close(xs: list, vs: list, atol: float):
    """Drop breakpoints whose x is within ``atol`` of the previous kept one."""
    out_x = [xs[0]]
    out_v = [vs[0]]
    for x, v in zip(xs[1:], vs[1:]):
        if x - out_x[-1] <= atol:
            continue
        out_x.append(x)
        out_v.append(v)
    # the right endpoint must survive; replace the last kept point if needed
    if out_x[-1] != xs[-1]:
        if xs[-1] - out_x[-1] <= atol and len(out_x) > 1:
            out_x[-1] = xs[-1]
            out_v[-1] = vs[-1]
        else:
            out_x.append(xs[-1])
            out_v.append(vs[-1])
    return out_x, out_v


def running_max_floor(f: PwlFunction, floor: float) -> PwlFunction:
    """Return x -> max(floor, max_{y <= x} f(y)).

    Output is weakly increasing, >= floor and >= f pointwise; breakpoints are
    a subset of f's plus the points where f crosses its own running maximum.
    """
    xs, vs = f.xs, f.vs
    m = max(floor, float(vs[0]))
    out_x = [float(xs[0])]
    out_v = [m]
    for i in range(len(xs) - 1):
        x0, v0 = float(xs[i]), float(vs[i])
        x1, v1 = float(xs[i + 1]), float(vs[i + 1])
        if v1 > m:
            # segment rises above the running max: flat until the crossing,
            # then follow f (v0 <= m always, since m includes v0)
            if v0 < m:
                xc = x0 + (m - v0) / (v1 - v0) * (x1 - x0)
                if xc > out_x[-1]:
                    out_x.append(xc)
                    out_v.append(m)
            out_x.append(x1)
            out_v.append(v1)
            m = v1
        else:
            out_x.append(x1)
            out_v.append(m)
    atol = BREAKPOINT_MERGE_ATOL * max(1.0, f.span)
    out_x, out_v = _merge_close(out_x, out_v, atol)
    return PwlFunction(np.array(out_x), np.array(out_v))


def _intersect_x(upper: AffineLine, lower: AffineLine) -> float:
    # x where the steeper line (upper) drops below the flatter one (lower)
    return (lower.intercept - upper.intercept) / (upper.slope - lower.slope)


def affine_lower_envelope(lines, domain) -> PwlFunction:
    """Pointwise minimum of a family of affine lines, restricted to ``domain``.

    The scan is the dual of a convex hull: sort by slope descending (the
    active order left to right for a minimum), drop duplicate slopes keeping
    the lower intercept, then eliminate lines whose active interval is empty
    by pairwise intersections.  The result is concave and weakly increasing
    because every slope lies in [0, 1].
    """
    lines = list(lines)
    if not lines:
        raise ValueError("need at least one line")
    lo, hi = float(domain[0]), float(domain[1])
    if not lo < hi:
        raise ValueError(f"empty domain [{lo}, {hi}]")

    lines.sort(key=lambda L: (-L.slope, L.intercept))
    slope_tol = 1e-14
    pruned: list[AffineLine] = []
    for L in lines:
        if pruned and pruned[-1].slope - L.slope <= slope_tol:
            # effectively parallel: only the lower intercept can win, and the
            # slope gap moves the minimum by at most slope_tol * domain width
            if L.intercept < pruned[-1].intercept:
                pruned[-1] = L
            continue
        pruned.append(L)

    hull: list[AffineLine] = [pruned[0]]
    starts: list[float] = [-np.inf]  # where each hull line becomes active
    for L in pruned[1:]:
        while hull:
            xc = _intersect_x(hull[-1], L)
            if xc <= starts[-1]:
                hull.pop()
                starts.pop()
                continue
            hull.append(L)
            starts.append(xc)
            break
        if not hull:
            hull.append(L)
            starts.append(-np.inf)

    # clip the active intervals to [lo, hi]
    first = 0
    while first + 1 < len(hull) and starts[first + 1] <= lo:
        first += 1
    last = len(hull) - 1
    while last > first and starts[last] >= hi:
        last -= 1

    out_x = [lo]
    out_v = [hull[first].at(lo)]
    for k in range(first + 1, last + 1):
        out_x.append(starts[k])
        out_v.append(hull[k].at(starts[k]))
    out_x.append(hi)
    out_v.append(hull[last].at(hi))

    atol = BREAKPOINT_MERGE_ATOL * max(1.0, hi - lo)
    out_x, out_v = _merge_close(out_x, out_v, atol)
    if len(out_x) < 2:  # everything merged into one point; rebuild endpoints
        out_x = [lo, hi]
        out_v = [hull[first].at(lo), hull[last].at(hi)]
    return PwlFunction(np.array(out_x), np.array(out_v))
