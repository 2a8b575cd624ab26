"""Trusted-curator baseline for the binary global-prior setting.

The curator holds the exact count S ~ Binomial(N, p1) and publishes a
perturbed Y.  Bounding each record's prior-to-posterior ratio constrains
the posterior mean E[S|Y] to the band

    e^-eps * N * p1  <=  E[S|Y]  <=  N - e^-eps * N * (1 - p1),

so any compliant mechanism's MSE is at least
Var(S) - (N p1 - lower)(upper - N p1): a mean-N*p1 variable confined to the
band cannot have more variance than the two-point mass at its endpoints.

No closed-form optimum is known here, so alongside that certified lower
bound ``cip_search`` runs a coordinate-exchange ascent over row-stochastic
mechanisms on S, maximizing Var(E[S|Y]) subject to the band.  When the
output alphabet has N+1 symbols the d-ary context-aware optimum over S is
included as a start; it is always band-feasible and already matches the
aggregate error of the per-user binary optimum, so the search can only
improve on it.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from .core import Prior, check_epsilon
from .errors import BudgetExceededError, NoFeasiblePointError
from .mechanisms import opt_mimo_lip

_BAND_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CipInstance:
    n_users: int
    p1: float
    eps: float
    s_prior: np.ndarray = field(init=False)

    def __init__(self, n_users: int, p1: float, eps: float):
        if not 1 <= n_users <= 200:
            raise ValueError("desk-scale search supports 1 <= N <= 200")
        if not 0.0 <= p1 <= 1.0:
            raise ValueError("p1 must lie in [0, 1]")
        object.__setattr__(self, "n_users", int(n_users))
        object.__setattr__(self, "p1", float(p1))
        object.__setattr__(self, "eps", check_epsilon(eps))
        prior = binom.pmf(np.arange(n_users + 1), n_users, p1)
        prior.setflags(write=False)
        object.__setattr__(self, "s_prior", prior)

    @property
    def mean(self) -> float:
        return self.n_users * self.p1

    @property
    def variance(self) -> float:
        return self.n_users * self.p1 * (1.0 - self.p1)


@dataclass(frozen=True)
class EstimatorBand:
    lower: float
    upper: float


def cip_band(instance: CipInstance) -> EstimatorBand:
    """Admissible range for the posterior mean; collapses to N*p1 at eps = 0."""
    n, p1 = instance.n_users, instance.p1
    shrink = math.exp(-instance.eps)
    return EstimatorBand(lower=shrink * n * p1,
                         upper=n - shrink * n * (1.0 - p1))


def cip_mse_lower_bound(instance: CipInstance) -> float:
    """Certified lower bound on the MSE of any band-compliant mechanism."""
    band = cip_band(instance)
    mu = instance.mean
    cap = (mu - band.lower) * (band.upper - mu)
    return max(0.0, instance.variance - cap)


@dataclass(frozen=True, eq=False)
class CipSearchResult:
    mechanism: np.ndarray
    mse: float
    estimator_variance: float


def _column_stats(Q, prior, svals):
    w = prior @ Q
    t = (prior * svals) @ Q
    return w, t


def _objective(w, t):
    mask = w > 0.0
    return float(np.sum(t[mask] ** 2 / w[mask]))


def _band_ok(w, t, lower, upper, tol):
    mask = w > 0.0
    if not mask.any():
        return True
    means = t[mask] / w[mask]
    return bool(np.all(means >= lower - tol) and np.all(means <= upper + tol))


def posterior_means_in_band(Q, instance: CipInstance, tol: float = _BAND_TOL) -> bool:
    """Whether every reachable output's posterior mean lies in the band."""
    band = cip_band(instance)
    svals = np.arange(instance.n_users + 1, dtype=float)
    w, t = _column_stats(np.asarray(Q, dtype=float), instance.s_prior, svals)
    return _band_ok(w, t, band.lower, band.upper, tol * max(1.0, instance.n_users))


def lip_seed_mechanism(instance: CipInstance) -> np.ndarray:
    """The d-ary context-aware optimum applied to S itself (band-feasible)."""
    return opt_mimo_lip(Prior(instance.s_prior), instance.eps).matrix


def _threshold_start(prior, svals, m):
    """Deterministic quantile split of s into m contiguous output groups."""
    q = np.zeros((svals.shape[0], m))
    cum = np.cumsum(prior)
    group = np.minimum((cum * m).astype(int), m - 1)
    q[np.arange(svals.shape[0]), group] = 1.0
    return q


def _ascend(Q, prior, svals, lower, upper, tol, fractions, max_sweeps):
    """Greedy mass-exchange ascent on Var(E[S|Y]) under the band constraint."""
    Q = Q.copy()
    m = Q.shape[1]
    w, t = _column_stats(Q, prior, svals)
    improve_tol = 1e-12 * max(1.0, _objective(w, t))

    def term(wv, tv):
        return np.where(wv > 0.0, np.divide(tv * tv, np.where(wv > 0.0, wv, 1.0)), 0.0)

    for _ in range(max_sweeps):
        moved = False
        for s in range(Q.shape[0]):
            if prior[s] <= 0.0:
                continue
            for frac in fractions:
                delta = frac * Q[s]  # mass leaving each source column
                if not np.any(delta > 0.0):
                    continue
                dm = prior[s] * delta
                w_minus = w - dm
                t_minus = t - dm * svals[s]
                w_plus = w[None, :] + dm[:, None]
                t_plus = t[None, :] + (dm * svals[s])[:, None]
                gain = (term(w_minus, t_minus)[:, None]
                        + term(w_plus, t_plus)
                        - term(w, t)[:, None] - term(w, t)[None, :])
                np.fill_diagonal(gain, -np.inf)
                gain[dm <= 0.0, :] = -np.inf

                src_ok = (w_minus <= 0.0) | (
                    (t_minus >= (lower - tol) * w_minus)
                    & (t_minus <= (upper + tol) * w_minus))
                dst_ok = ((t_plus >= (lower - tol) * w_plus)
                          & (t_plus <= (upper + tol) * w_plus))
                gain[~src_ok, :] = -np.inf
                gain[~dst_ok] = -np.inf

                j, k = np.unravel_index(np.argmax(gain), gain.shape)
                if gain[j, k] > improve_tol:
                    moved_mass = delta[j]
                    Q[s, j] -= moved_mass
                    Q[s, k] += moved_mass
                    w, t = _column_stats(Q, prior, svals)
                    moved = True
        if not moved:
            break
    return Q, _objective(w, t)


def cip_search(instance: CipInstance, output_size: int = 2,
               n_random_starts: int = 4, max_sweeps: int = 40,
               seed: int = 0,
               fractions=(1.0, 0.5, 0.25)) -> CipSearchResult:
    """Best mechanism found by multi-start coordinate ascent.

    ``output_size`` may be anything from 2 to N+1; passing N+1 puts the
    always-feasible context-aware seed in the start set.  Infeasible
    starts are blended toward the constant mechanism until feasible; the
    constant mechanism itself is always a valid start, so the search
    cannot come up empty.
    """
    if not 2 <= output_size <= instance.n_users + 1:
        raise ValueError("output_size must lie in {2, ..., N+1}")
    if max_sweeps < 1:
        raise BudgetExceededError("at least one sweep is required")
    band = cip_band(instance)
    prior = instance.s_prior
    svals = np.arange(instance.n_users + 1, dtype=float)
    tol = _BAND_TOL * max(1.0, instance.n_users)
    m = output_size
    rng = np.random.Generator(np.random.Philox(seed))

    const = np.full((svals.shape[0], m), 1.0 / m)
    starts = [const, _threshold_start(prior, svals, m)]
    if m == instance.n_users + 1:
        starts.append(lip_seed_mechanism(instance))
    for _ in range(n_random_starts):
        starts.append(rng.dirichlet(np.ones(m), size=svals.shape[0]))

    feasible_starts = []
    for Q in starts:
        for blend in (0.0, 0.25, 0.5, 0.75, 1.0):
            cand = (1.0 - blend) * Q + blend * const
            w, t = _column_stats(cand, prior, svals)
            if _band_ok(w, t, band.lower, band.upper, tol):
                feasible_starts.append(cand)
                break
    if not feasible_starts:
        raise NoFeasiblePointError("no band-feasible start (cannot happen)")

    best_Q, best_v = None, -np.inf
    for Q in feasible_starts:
        cand_Q, v = _ascend(Q, prior, svals, band.lower, band.upper, tol,
                            fractions, max_sweeps)
        if v > best_v:
            best_Q, best_v = cand_Q, v

    var_est = max(0.0, best_v - instance.mean ** 2)
    return CipSearchResult(mechanism=best_Q,
                           mse=instance.variance - var_est,
                           estimator_variance=var_est)
