"""Closed-form optimal perturbation channels and output sampling.

Derivations; all budgets are on the natural-log scale:

* binary context-aware optimum: q[0][1] = p1/e^eps, q[1][0] = (1-p1)/e^eps
  (the member of the symmetric optimum pair that also minimizes the mean
  absolute perturbation),
* binary context-free optimum: symmetric flip probability 1/(e^eps + 1),
* d-ary context-aware optimum: diagonal 1 - (1-p[m])/e^eps, off-diagonal
  q[m][k] = p[k]/e^eps; its output marginal equals the prior,
* d-ary context-free optimum: diagonal e^eps/(e^eps + d - 1), off-diagonal
  1/(e^eps + d - 1),
* unary-encoding bit perturbation with keep probability 1/2 and flip-up
  probability 1/(e^eps + 1).

Rows are renormalized after construction to absorb float rounding so every
derived channel passes ``validate_channel`` exactly.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .core import Channel, Domain, Prior, check_epsilon, validate_channel
from .errors import ValueNotInDomainError, ZeroEpsilonError


class MechanismFamily(enum.Enum):
    """Perturbation families compared throughout the package.

    SYMMETRIC_RR shares the OPT_BINARY_LDP matrix but is paired with the
    prior-unaware count estimator rather than the posterior-mean one; OUE
    is only valid for histogram-style tasks.
    """

    OPT_BINARY_LIP = "opt-binary-lip"
    OPT_BINARY_LDP = "opt-binary-ldp"
    OPT_MIMO_LIP = "opt-mimo-lip"
    OPT_MIMO_LDP = "opt-mimo-ldp"
    SYMMETRIC_RR = "symmetric-rr"
    OUE = "oue"

    @staticmethod
    def from_tag(tag: str) -> "MechanismFamily":
        for fam in MechanismFamily:
            if fam.value == tag:
                return fam
        raise ValueError(f"unknown mechanism family {tag!r}")


@dataclass(frozen=True)
class OUEChannel:
    """Per-bit perturbation parameters for unary (one-hot) encoding."""

    d: int
    keep_prob: float
    flip_up_prob: float


def _renormalize(matrix: np.ndarray) -> np.ndarray:
    return matrix / matrix.sum(axis=1, keepdims=True)


def _binary_channel(q0: float, q1: float) -> Channel:
    ch = Channel(np.array([[1.0 - q0, q0], [q1, 1.0 - q1]]),
                 Domain.binary(), Domain.binary())
    validate_channel(ch)
    return ch


def budget_feasible_prior_floor(eps: float) -> float:
    """Smallest prior entry for which the closed-form channels actually meet
    their budget: 1/(e^eps + 1).

    Below this floor the kept-value posterior overshoots e^eps times the
    prior and the measured context-aware level is
    :func:`closed_form_lip_level` instead of eps.
    """
    return 1.0 / (np.exp(check_epsilon(eps)) + 1.0)


def closed_form_lip_level(p_min: float, eps: float) -> float:
    """Measured context-aware level of the closed-form channel whose
    smallest prior entry is ``p_min``: max(eps, ln((e^eps-1+p_min)/(e^eps p_min)))."""
    eps = check_epsilon(eps)
    if p_min <= 0.0:
        return eps
    e = np.exp(eps)
    return max(eps, float(np.log((e - 1.0 + p_min) / (e * p_min))))


def opt_binary_lip(p1: float, eps: float) -> Channel:
    """Binary channel with q[0][1] = p1/e^eps and q[1][0] = (1-p1)/e^eps.

    This is the mean-absolute-error-minimizing member of the symmetric
    optimum pair; its output marginal equals the prior.  Its measured
    context-aware level equals eps exactly when
    min(p1, 1-p1) >= 1/(e^eps + 1) and 0 < p1 < 1; for priors more skewed
    than that the construction overshoots its budget (see
    :func:`closed_form_lip_level`).  Degenerate priors still yield a
    valid channel.
    """
    eps = check_epsilon(eps)
    if not 0.0 <= p1 <= 1.0:
        raise ValueError(f"p1 must lie in [0, 1], got {p1}")
    e = np.exp(eps)
    return _binary_channel(p1 / e, (1.0 - p1) / e)


def opt_binary_ldp(eps: float) -> Channel:
    """Symmetric binary channel with flip probability 1/(e^eps + 1)."""
    eps = check_epsilon(eps)
    flip = 1.0 / (np.exp(eps) + 1.0)
    return _binary_channel(flip, flip)


def symmetric_rr(eps: float) -> Channel:
    """Same matrix as ``opt_binary_ldp``; kept distinct because it pairs
    with the prior-unaware count estimator."""
    return opt_binary_ldp(eps)


def opt_mimo_lip(p: Prior, eps: float, domain: Domain | None = None) -> Channel:
    """d-ary context-aware optimum for prior ``p``.

    Zero-prior values are never emitted: their columns carry no
    off-diagonal mass, and their rows (which can never fire) follow the
    same formula restricted to the support so the matrix stays row
    stochastic.  The output marginal equals the prior exactly, including
    the zero entries.

    As in the binary case, the measured context-aware level equals eps
    only when every supported prior entry is at least 1/(e^eps + 1);
    more skewed priors overshoot (see :func:`closed_form_lip_level`).
    """
    eps = check_epsilon(eps)
    d = p.size
    domain = domain or Domain.of_size(d)
    if domain.size != d:
        raise ValueError("domain size must match prior size")
    e = np.exp(eps)
    # off-diagonal columns inherit the prior, so zero-prior columns get no mass
    m = np.tile(p.p / e, (d, 1))
    for i in range(d):
        m[i, i] = 1.0 - (1.0 - p.p[i]) / e
    ch = Channel(_renormalize(m), domain, domain)
    validate_channel(ch)
    return ch


def opt_mimo_ldp(d: int, eps: float, domain: Domain | None = None) -> Channel:
    """d-ary context-free optimum: keep with probability e^eps/(e^eps+d-1)."""
    eps = check_epsilon(eps)
    if d < 2:
        raise ValueError("domain size must be at least 2")
    domain = domain or Domain.of_size(d)
    e = np.exp(eps)
    m = np.full((d, d), 1.0 / (e + d - 1.0))
    np.fill_diagonal(m, e / (e + d - 1.0))
    ch = Channel(_renormalize(m), domain, domain)
    validate_channel(ch)
    return ch


def oue_channel(d: int, eps: float) -> OUEChannel:
    """Per-bit parameters for the unary-encoding histogram baseline."""
    eps = check_epsilon(eps)
    if eps == 0.0:
        raise ZeroEpsilonError("unary-encoding estimator needs eps > 0")
    if d < 2:
        raise ValueError("domain size must be at least 2")
    return OUEChannel(d=d, keep_prob=0.5, flip_up_prob=1.0 / (np.exp(eps) + 1.0))


def _coerce_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(rng))


def _sample_rows(matrix: np.ndarray, rows: np.ndarray,
                 rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sample one output index per row index in ``rows``.

    Uses u in (0, 1] against row-order cumulative sums; a u exactly on a
    CDF boundary resolves to the lower index, so zero-probability outputs
    are never produced.
    """
    cum = np.cumsum(matrix, axis=1)
    cum[:, -1] = np.maximum(cum[:, -1], 1.0)
    u = 1.0 - rng.random(rows.shape[0])
    return np.sum(cum[rows] < u[:, None], axis=1)


def perturb(q: Channel, x: float, rng) -> float:
    """Sample the published value for true value ``x``; deterministic given
    the generator state (or integer seed)."""
    idx = q.input_domain.index_of(x)
    if idx < 0:
        raise ValueNotInDomainError(f"value {x} not in the input domain")
    k = _sample_rows(q.matrix, np.array([idx]), _coerce_rng(rng))[0]
    return float(q.output_domain.values[k])


def perturb_indices(q: Channel, x_idx: np.ndarray, rng) -> np.ndarray:
    """Vector form of :func:`perturb` over input indices, returning output
    indices; one uniform draw per entry, in order."""
    return _sample_rows(q.matrix, np.asarray(x_idx, dtype=int), _coerce_rng(rng))


def oue_perturb(oue: OUEChannel, x_idx: np.ndarray, rng) -> np.ndarray:
    """One-hot encode each input index and perturb every bit independently.

    Returns an (n, d) 0/1 array; draws one uniform per bit, row-major.
    """
    rng = _coerce_rng(rng)
    x_idx = np.asarray(x_idx, dtype=int)
    n = x_idx.shape[0]
    u = rng.random((n, oue.d))
    bits = u < oue.flip_up_prob
    hot = np.zeros((n, oue.d), dtype=bool)
    hot[np.arange(n), x_idx] = True
    bits[hot] = u[hot] < oue.keep_prob
    return bits.astype(np.int8)
