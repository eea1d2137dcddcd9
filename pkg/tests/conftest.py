import numpy as np
import pytest

from samurai import AuditSchedule, CostFn, Environment, Mechanism, refunds_from


def make_env(tau=0.0, k=0.1, kind="linear", p=1.0, x_lo=0.0, x_hi=1.0):
    return Environment(x_lo=x_lo, x_hi=x_hi, tau=tau, cost=CostFn(kind, k, p))


@pytest.fixture
def env():
    return make_env()


@pytest.fixture
def env_tau():
    return make_env(tau=0.5)


def random_mechanism(env, rng, n=201):
    """Random feasible IC mechanism: random tables repaired left to right.

    Truthful payment at a type only competes with the menu lines of lower
    types, so lowering revenue (through the audit refund first, because it
    does not feed back into the menu) in increasing type order restores
    incentive compatibility in one pass.
    """
    grid = np.linspace(env.x_lo, env.x_hi, n)
    style = rng.integers(0, 3)
    if style == 0:
        a = rng.uniform(0, 1, n)
    elif style == 1:
        a = np.sort(rng.uniform(0, 1, n))[::-1]
    else:
        a = np.repeat(rng.uniform(0, 1, 8), int(np.ceil(n / 8)))[:n]
    mask = rng.uniform(size=n)
    a = np.where(mask < 0.1, 0.0, np.where(mask > 0.9, 1.0, a))
    cap = grid + env.tau
    r_p = rng.uniform(0, cap)
    r_e = rng.uniform(0, cap)
    c = (1.0 - a) * (grid - r_e)
    for j in range(1, n):
        m_j = np.min(a[:j] * grid[j] + c[:j])
        R_j = grid[j] - (a[j] * r_p[j] + (1 - a[j]) * r_e[j])
        if R_j > m_j:
            need = R_j - m_j
            if a[j] > 0:
                dr = min(need / a[j], cap[j] - r_p[j])
                r_p[j] += dr
                need -= a[j] * dr
            if need > 1e-18 and a[j] < 1:
                r_e[j] = min(r_e[j] + need / (1 - a[j]), cap[j])
                c[j] = (1 - a[j]) * (grid[j] - r_e[j])
    return Mechanism(grid=grid, a=a, r_p=r_p, r_empty=r_e)


def build_on_types(lam, env, types):
    """Constructor restricted to a finite type grid."""
    grid = np.asarray(types, dtype=float)
    a = AuditSchedule.from_loss(lam, env).audit_prob_table(grid)
    pair = refunds_from(grid, lam.eval(grid), a, env)
    return Mechanism(grid=grid, a=a, r_p=pair.r_p, r_empty=pair.r_empty)


def grid_sup_alpha(pwl, env, y, n=10_001):
    """Brute-force chord supremum on a fine grid augmented with breakpoints."""
    xs = np.unique(np.concatenate([np.linspace(env.x_lo, env.x_hi, n), pwl.xs]))
    xs = xs[xs > y]
    if len(xs) == 0:
        return 0.0
    vals = pwl.eval(xs)
    return float(max(0.0, np.max((vals - y) / (xs - y))))


def grid_sup_beta(pwl, env, y, n=10_001):
    xs = np.unique(np.concatenate([np.linspace(env.x_lo, env.x_hi, n), pwl.xs]))
    xs = xs[xs >= y]
    vals = pwl.eval(xs)
    ly = pwl.eval(y)
    den = xs + env.tau
    ok = den > 0
    if not np.any(ok):
        return 0.0
    return float(max(0.0, np.max((vals[ok] - ly) / den[ok])))
