"""Independent brute-force verification on small discrete instances.

Every feasible IC mechanism on a finite lattice is enumerated and scanned
for a dominator in the chosen partial order.  Verdicts are certified only
within the lattice; the instance description is part of the result so the
finite scope stays explicit.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field

import numpy as np

from .environment import Environment, cost_eval
from .errors import InstanceSizeError, RoundingError
from .mechanism import Mechanism

ENUM_LIMIT = 1e8
LATTICE_EQ_TOL = 1e-9


@dataclass(frozen=True)
class DiscreteInstance:
    """A finite type set with audit and refund lattices."""

    types: tuple
    q: int
    refund_levels: int
    env: Environment

    def __post_init__(self):
        types = tuple(float(t) for t in self.types)
        if not 1 <= len(types) <= 6:
            raise ValueError("instances support 1 to 6 types")
        if any(b <= a for a, b in zip(types, types[1:])):
            raise ValueError("types must be strictly increasing")
        if abs(types[0] - self.env.x_lo) > 1e-12 or abs(types[-1] - self.env.x_hi) > 1e-12:
            raise ValueError("type set must span the environment bounds")
        if not 1 <= self.q <= 10:
            raise ValueError("audit lattice resolution q must be in [1, 10]")
        if not 2 <= self.refund_levels <= 11:
            raise ValueError("refund lattice needs 2 to 11 levels")
        object.__setattr__(self, "types", types)
        estimate = self.candidate_count()
        if estimate > ENUM_LIMIT:
            raise InstanceSizeError(estimate, ENUM_LIMIT)

    def audit_lattice(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.q + 1)

    def refund_lattice(self, y: float) -> np.ndarray:
        cap = y + self.env.tau
        if cap <= 0:
            return np.array([0.0])
        return np.unique(np.linspace(0.0, cap, self.refund_levels))

    def options(self, t: int):
        """Lexicographic per-type option table: columns (a, r_p, r_empty)."""
        y = self.types[t]
        combos = list(
            itertools.product(self.audit_lattice(), self.refund_lattice(y), self.refund_lattice(y))
        )
        return np.asarray(combos, dtype=float)

    def candidate_count(self) -> float:
        total = 1.0
        for t in range(len(self.types)):
            levels = len(self.refund_lattice(self.types[t]))
            total *= (self.q + 1) * levels * levels
        return total


@dataclass(frozen=True)
class DominanceVerdict:
    undominated: bool
    mode: str
    witness: Mechanism | None
    rounding_error: float
    candidates_checked: int
    instance: DiscreteInstance = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "undominated": self.undominated,
            "mode": self.mode,
            "witness": self.witness.to_dict() if self.witness else None,
            "rounding_error": self.rounding_error,
            "candidates_checked": self.candidates_checked,
            "lattice": {
                "types": list(self.instance.types),
                "q": self.instance.q,
                "refund_levels": self.instance.refund_levels,
            }
            if self.instance
            else None,
        }


def bruteforce_deviation_loss(m: Mechanism, inst: DiscreteInstance) -> np.ndarray:
    """Deviation loss by explicit full scan, for cross-checking the table code."""
    grid = m.grid
    out = np.empty(len(grid))
    for j in range(len(grid)):
        x = float(grid[j])
        best = np.inf
        for i in range(j + 1):
            term = m.a[i] * x + (1.0 - m.a[i]) * (grid[i] - m.r_empty[i])
            if term < best:
                best = term
        out[j] = best
    return out


def _ic_mask(inst: DiscreteInstance, A, RP, RE) -> np.ndarray:
    """Vectorized IC check for a block of candidates (rows) on the type set."""
    types = np.asarray(inst.types)
    n = len(types)
    R = types[None, :] - (A * RP + (1.0 - A) * RE)
    ok = np.ones(A.shape[0], dtype=bool)
    for j in range(n):
        x = types[j]
        menu = A[:, : j + 1] * x + (1.0 - A[:, : j + 1]) * (types[: j + 1][None, :] - RE[:, : j + 1])
        ok &= menu.min(axis=1) >= R[:, j] - LATTICE_EQ_TOL
    return ok


def enumerate_feasible_ic(inst: DiscreteInstance):
    """Yield every feasible IC lattice mechanism, in lexicographic order.

    Streaming by design; callers that only need counts or scans should not
    materialize the sequence.
    """
    types = np.asarray(inst.types)
    option_tables = [inst.options(t) for t in range(len(types))]
    for combo in itertools.product(*option_tables):
        tab = np.asarray(combo)
        m = Mechanism(grid=types.copy(), a=tab[:, 0], r_p=tab[:, 1], r_empty=tab[:, 2])
        if _ic_mask(inst, tab[None, :, 0], tab[None, :, 1], tab[None, :, 2])[0]:
            yield m


def _round_to_lattice(values: np.ndarray, lattice: np.ndarray):
    idx = np.clip(np.searchsorted(lattice, values), 0, len(lattice) - 1)
    idx_lo = np.clip(idx - 1, 0, len(lattice) - 1)
    pick = np.where(
        np.abs(lattice[idx] - values) <= np.abs(lattice[idx_lo] - values), idx, idx_lo
    )
    rounded = lattice[pick]
    return rounded, float(np.max(np.abs(rounded - values), initial=0.0))


def _chunk_blocks(option_tables, max_block: int = 200_000):
    """Split the candidate product into blocks of trailing-type combinations."""
    counts = [len(t) for t in option_tables]
    split = 0
    trail = int(np.prod(counts))
    while split < len(counts) - 1 and trail > max_block:
        trail //= counts[split]
        split += 1
    lead_iter = itertools.product(*[range(c) for c in counts[:split]])
    return split, lead_iter, trail


def is_undominated(
    m: Mechanism,
    inst: DiscreteInstance,
    mode: str = "efficiency",
    max_rounding: float | None = None,
) -> DominanceVerdict:
    """Scan the lattice for a dominator of ``m`` in the chosen partial order.

    ``m`` is first rounded to the lattice; rounding beyond ``max_rounding``
    (default: half the smallest lattice step) is refused because the verdict
    would not speak about ``m`` anymore.  The first dominator found in
    lexicographic order is returned as the witness.
    """
    if mode not in ("efficiency", "tightness"):
        raise ValueError(f"unknown mode {mode!r}")
    types = np.asarray(inst.types)
    if len(m.grid) != len(types) or np.max(np.abs(m.grid - types)) > 1e-9:
        raise ValueError("mechanism grid must equal the instance type set")

    a_lat = inst.audit_lattice()
    a_hat, err_a = _round_to_lattice(m.a, a_lat)
    rp_hat = np.empty_like(m.r_p)
    re_hat = np.empty_like(m.r_empty)
    err_r = 0.0
    min_step = np.diff(a_lat).min()
    for t in range(len(types)):
        lat = inst.refund_lattice(types[t])
        rp_round, e1 = _round_to_lattice(m.r_p[t : t + 1], lat)
        re_round, e2 = _round_to_lattice(m.r_empty[t : t + 1], lat)
        rp_hat[t] = rp_round[0]
        re_hat[t] = re_round[0]
        err_r = max(err_r, e1, e2)
        if len(lat) > 1:
            min_step = min(min_step, np.diff(lat).min())
    rounding_error = max(err_a, err_r)
    limit = max_rounding if max_rounding is not None else 0.5 * min_step + 1e-12
    if rounding_error > limit:
        raise RoundingError(
            f"rounding error {rounding_error:.3g} exceeds {limit:.3g}; "
            "the lattice verdict would not describe this mechanism"
        )

    target = Mechanism(grid=types.copy(), a=a_hat, r_p=rp_hat, r_empty=re_hat)
    R_t = types - (a_hat * rp_hat + (1.0 - a_hat) * re_hat)
    lam_t = bruteforce_deviation_loss(target, inst)
    Pi_t = R_t - cost_eval(inst.env.cost, a_hat)

    option_tables = [inst.options(t) for t in range(len(types))]
    counts = [len(t) for t in option_tables]
    n = len(types)
    split, lead_iter, trail = _chunk_blocks(option_tables)
    trail_counts = counts[split:]
    trail_idx = np.stack(
        np.unravel_index(np.arange(trail), trail_counts), axis=1
    ) if trail_counts else np.zeros((1, 0), dtype=int)

    checked = 0
    workers = max(1, int(os.environ.get("SAMURAI_THREADS", "1") or 1))

    def scan_block(lead):
        A = np.empty((trail_idx.shape[0], n))
        RP = np.empty_like(A)
        RE = np.empty_like(A)
        for t in range(split):
            opt = option_tables[t][lead[t]]
            A[:, t], RP[:, t], RE[:, t] = opt[0], opt[1], opt[2]
        for t in range(split, n):
            opt = option_tables[t][trail_idx[:, t - split]]
            A[:, t], RP[:, t], RE[:, t] = opt[:, 0], opt[:, 1], opt[:, 2]
        ok = _ic_mask(inst, A, RP, RE)
        R = types[None, :] - (A * RP + (1.0 - A) * RE)
        eps = LATTICE_EQ_TOL
        if mode == "efficiency":
            dom = ok & np.all(R >= R_t[None, :] - eps, axis=1) & np.all(A <= a_hat[None, :] + eps, axis=1)
            strict = (np.max(R - R_t[None, :], axis=1) > eps) | (np.max(a_hat[None, :] - A, axis=1) > eps)
        else:
            Pi = R - cost_eval(inst.env.cost, A)
            lam = np.empty_like(R)
            for j in range(n):
                menu = A[:, : j + 1] * types[j] + (1.0 - A[:, : j + 1]) * (
                    types[: j + 1][None, :] - RE[:, : j + 1]
                )
                lam[:, j] = menu.min(axis=1)
            dom = ok & np.all(Pi >= Pi_t[None, :] - eps, axis=1) & np.all(lam >= lam_t[None, :] - eps, axis=1)
            strict = (np.max(Pi - Pi_t[None, :], axis=1) > eps) | (np.max(lam - lam_t[None, :], axis=1) > eps)
        hits = np.nonzero(dom & strict)[0]
        if len(hits):
            c = int(hits[0])
            return Mechanism(grid=types.copy(), a=A[c].copy(), r_p=RP[c].copy(), r_empty=RE[c].copy())
        return None

    blocks = list(lead_iter) if split else [()]
    witness = None
    if workers > 1 and len(blocks) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(scan_block, blocks):
                checked += trail_idx.shape[0]
                if res is not None and witness is None:
                    witness = res
                    break
    else:
        for lead in blocks:
            res = scan_block(lead)
            checked += trail_idx.shape[0]
            if res is not None:
                witness = res
                break

    return DominanceVerdict(
        undominated=witness is None,
        mode=mode,
        witness=witness,
        rounding_error=rounding_error,
        candidates_checked=checked,
        instance=inst,
    )
