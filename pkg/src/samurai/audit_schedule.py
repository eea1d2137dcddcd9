"""Minimal audit probabilities for a piecewise-linear loss function.

Two chord suprema drive everything: the slope of the steepest chord from
(y, y) to the graph (the no-refund threat) and the steepest ratio of loss
gains to audited wealth (the maxed-out-refund threat).  Both ratios are
monotone on each linear segment, so each supremum is attained at a slope
kink, at the right endpoint, or in the open limit at y itself when the loss
touches the identity.  Evaluation is therefore exact on breakpoints.

For dense tables queried at their own grid the candidate set is thinned to
the detected kinks plus a short band of points after each query; a kink can
only evade detection when adjacent slopes differ by less than 1e-9, and the
band keeps the induced error below 1e-8.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .environment import Environment
from .errors import DomainError
from .lambda_space import LossFunction
from .pwl import PwlFunction

# |loss(y) - y| below this (scaled) counts as "on the identity", which adds
# the right-hand slope at y as a supremum candidate.
IDENTITY_EQ_TOL = 1e-12

# Resolution of the crossover bisection.
CROSSOVER_XTOL = 1e-10

# Tables larger than this, queried at their own grid, use the thinned
# candidate set; anything else takes the dense all-pairs path.
DENSE_LIMIT = 160
KINK_SLOPE_TOL = 1e-9
BAND_WIDTH = 32

# Breakpoints within this (scaled) distance of a query are float-noise
# duplicates of the query itself: they are excluded as chord candidates and
# the right-hand slope is read past them.  Without the snap, an envelope
# kink landing one ulp to the right of a grid point would masquerade as a
# one-ulp identity stretch and flip the supremum across its discontinuity.
QUERY_SNAP_TOL = 1e-9


@dataclass(frozen=True)
class SingleCrossingReport:
    passed: bool
    anchored: bool          # alpha >= beta at x_lo (within 1e-12)
    grid: np.ndarray = field(repr=False, default=None)
    diff: np.ndarray = field(repr=False, default=None)
    witness: tuple | None = None  # (y_neg, y_pos) violating the sign pattern

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "anchored": self.anchored,
            "witness": list(self.witness) if self.witness else None,
        }


@dataclass(frozen=True, eq=False)
class AuditSchedule:
    """Closed-form evaluator for the two minimal audit probabilities."""

    pwl: PwlFunction
    env: Environment

    @classmethod
    def from_loss(cls, lam: LossFunction, env: Environment) -> "AuditSchedule":
        return cls(pwl=lam.shape, env=env)

    @classmethod
    def from_table(cls, grid, values, env: Environment) -> "AuditSchedule":
        """Schedule over the interpolant of a sampled loss table."""
        return cls(pwl=PwlFunction(np.asarray(grid, float), np.asarray(values, float)), env=env)

    # -- candidate machinery -------------------------------------------------

    @cached_property
    def _slopes(self) -> np.ndarray:
        return self.pwl.slopes()

    @cached_property
    def _candidate_idx(self) -> np.ndarray:
        """Breakpoint indices where the supremum can be attained: slope kinks
        and the right endpoint."""
        n = len(self.pwl.xs)
        slopes = self._slopes
        if len(slopes) >= 2:
            kinks = np.nonzero(np.abs(np.diff(slopes)) > KINK_SLOPE_TOL)[0] + 1
        else:
            kinks = np.empty(0, dtype=int)
        return np.unique(np.concatenate([kinks, [n - 1]]))

    def _check_y(self, ys: np.ndarray):
        slack = 1e-9 * max(1.0, self.env.span)
        if np.any(ys < self.env.x_lo - slack) or np.any(ys > self.env.x_hi + slack):
            bad = ys[(ys < self.env.x_lo - slack) | (ys > self.env.x_hi + slack)]
            raise DomainError(f"y={bad.flat[0]} outside [{self.env.x_lo}, {self.env.x_hi}]")

    def _right_slopes(self, ys: np.ndarray) -> np.ndarray:
        """Slope of the segment to the right of each y (last segment at x_hi)."""
        xs = self.pwl.xs
        snap = QUERY_SNAP_TOL * max(1.0, self.env.span)
        seg = np.clip(np.searchsorted(xs, ys + snap, side="right") - 1, 0, len(xs) - 2)
        return self._slopes[seg]

    def _aligned(self, ys: np.ndarray) -> bool:
        xs = self.pwl.xs
        return ys is xs or (len(ys) == len(xs) and bool(np.array_equal(ys, xs)))

    def _sup_ratio(self, ys: np.ndarray, offsets, kind: str) -> np.ndarray:
        """max over candidate points of the alpha- or beta-ratio at each y."""
        xs, vs = self.pwl.xs, self.pwl.vs
        ref = ys if kind == "alpha" else self.pwl.eval(ys)
        snap = QUERY_SNAP_TOL * max(1.0, self.env.span)

        def ratios(xc, vc):
            # xc, vc: candidates broadcast against ys (columns)
            num = vc - ref[None, :]
            if kind == "alpha":
                den = xc - ys[None, :]
                valid = den > snap
            else:
                den = xc + self.env.tau
                valid = (xc > ys[None, :] + snap) & (den > 0)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(valid, num / np.where(valid, den, 1.0), -np.inf)

        if offsets is None:  # dense: every breakpoint is a candidate
            r = ratios(xs[:, None], vs[:, None])
            return r.max(axis=0)

        # thinned: kink candidates plus a band after each query
        cand = self._candidate_idx
        r_kink = ratios(xs[cand][:, None], vs[cand][:, None])
        best = r_kink.max(axis=0)
        n = len(xs)
        j = np.arange(n)
        for w in range(1, offsets + 1):
            idx = np.minimum(j + w, n - 1)
            r_band = ratios(xs[idx][None, :], vs[idx][None, :])[0]
            best = np.maximum(best, r_band)
        return best

    # -- the two suprema ------------------------------------------------------

    def alpha_table(self, ys) -> np.ndarray:
        """Smallest audit probability deterring deviation to each y when the
        no-audit refund is withheld: max over chords from (y, y) into the graph."""
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        self._check_y(ys)
        span = max(1.0, self.env.span)
        use_band = len(self.pwl.xs) > DENSE_LIMIT and self._aligned(ys)
        best = self._sup_ratio(ys, BAND_WIDTH if use_band else None, "alpha")
        ly = self.pwl.eval(ys)
        on_id = np.abs(ly - ys) <= IDENTITY_EQ_TOL * span
        if np.any(on_id):
            best = np.where(on_id, np.maximum(best, self._right_slopes(ys)), best)
        out = np.clip(np.maximum(best, 0.0), 0.0, 1.0)
        return np.where(ys >= self.env.x_hi, 0.0, out)

    def beta_table(self, ys) -> np.ndarray:
        """Smallest audit probability deterring deviation to each y when the
        audit refund is maxed out: steepest loss gain per unit audited wealth."""
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        self._check_y(ys)
        use_band = len(self.pwl.xs) > DENSE_LIMIT and self._aligned(ys)
        best = self._sup_ratio(ys, BAND_WIDTH if use_band else None, "beta")
        out = np.clip(np.maximum(best, 0.0), 0.0, 1.0)  # the x = y term is 0
        return np.where(ys >= self.env.x_hi, 0.0, out)

    def audit_prob_table(self, ys) -> np.ndarray:
        return np.maximum(self.alpha_table(ys), self.beta_table(ys))

    def alpha(self, y: float) -> float:
        return float(self.alpha_table(np.array([y]))[0])

    def beta(self, y: float) -> float:
        return float(self.beta_table(np.array([y]))[0])

    def audit_prob(self, y: float) -> float:
        return max(self.alpha(y), self.beta(y))

    # -- crossover and the single-crossing diagnostic ----------------------

    def _scan_grid(self, n: int = 4097) -> np.ndarray:
        xs = self.pwl.xs
        mids = (xs[:-1] + xs[1:]) / 2.0
        grid = np.concatenate([np.linspace(self.env.x_lo, self.env.x_hi, n), xs, mids])
        return np.unique(grid)

    def crossover(self) -> float:
        """The type above which the binding deterrence instrument switches
        from withholding the no-audit refund to maxing out the audit refund.

        Located as the right edge of {alpha > beta} by bisection to 1e-10;
        x_lo when the strict set is empty, x_hi when it reaches the top.
        """
        grid = self._scan_grid()
        d = self.alpha_table(grid) - self.beta_table(grid)
        pos = np.nonzero(d > 0.0)[0]
        if len(pos) == 0:
            return self.env.x_lo
        i = int(pos[-1])
        if i == len(grid) - 1:
            return self.env.x_hi
        lo, hi = float(grid[i]), float(grid[i + 1])
        while hi - lo > CROSSOVER_XTOL:
            mid = 0.5 * (lo + hi)
            if self.alpha(mid) - self.beta(mid) > 0.0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def check_single_crossing(self, grid_size: int) -> SingleCrossingReport:
        """Verify the difference alpha - beta never turns positive after
        having been negative, and that alpha >= beta at x_lo."""
        if grid_size < 2:
            raise DomainError("grid_size must be >= 2")
        grid = np.linspace(self.env.x_lo, self.env.x_hi, int(grid_size))
        d = self.alpha_table(grid) - self.beta_table(grid)
        eps = 1e-12
        witness = None
        seen_negative_at = None
        for y, val in zip(grid, d):
            if val < -eps and seen_negative_at is None:
                seen_negative_at = float(y)
            elif val > eps and seen_negative_at is not None:
                witness = (seen_negative_at, float(y))
                break
        anchored = d[0] >= -1e-12
        return SingleCrossingReport(
            passed=witness is None and anchored,
            anchored=bool(anchored),
            grid=grid,
            diff=d,
            witness=witness,
        )

    def table(self, ys) -> dict:
        """Columns (y, alpha, beta, a) for CSV export."""
        ys = np.asarray(ys, dtype=float)
        alpha = self.alpha_table(ys)
        beta = self.beta_table(ys)
        return {"y": ys, "alpha": alpha, "beta": beta, "a": np.maximum(alpha, beta)}
