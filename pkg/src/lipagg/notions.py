"""Numeric audits of a channel against the three local privacy notions.

For a channel q and prior p with output marginal lambda:

* context-free level: max over outputs and input pairs of
  ln(q[x][y] / q[x'][y]),
* context-aware level: max over reachable (x, y) of |ln(q[x][y] / lambda[y])|,
* average leakage: the mutual information I(X; Y) in nats.

The levels always satisfy lip <= ldp <= 2 * lip and I(X;Y) <= lip; ``audit``
re-checks both relations and treats a violation as an internal bug.

Pairs (x, y) with p[x] = 0 or lambda[y] = 0 are excluded from the
context-aware maximization: the posterior is undefined on events that can
never occur, and the constraints quantify only over realizable ones.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import Channel, Prior, output_distribution
from .errors import DimensionMismatchError, InternalInconsistencyError

_AUDIT_SLACK = 1e-9


@dataclass(frozen=True)
class PrivacyAudit:
    ldp_eps: float
    lip_eps: float
    mip_nats: float


def measure_ldp(q: Channel) -> float:
    """Largest log-likelihood ratio between any two rows; +inf when some
    output is possible under one input but impossible under another."""
    m = q.matrix
    worst = 0.0
    for k in range(q.d_out):
        col = m[:, k]
        pos = col[col > 0.0]
        if pos.size == 0:
            continue
        if pos.size < col.size:
            return math.inf
        worst = max(worst, math.log(float(pos.max()) / float(pos.min())))
    return worst


def measure_lip(q: Channel, p: Prior) -> float:
    """Largest absolute log prior-to-posterior ratio over reachable (x, y).

    Returns +inf when q[x][y] = 0 for a reachable pair (observing y rules
    x out entirely).
    """
    if p.size != q.d_in:
        raise DimensionMismatchError(
            f"prior size {p.size} != channel input size {q.d_in}")
    lam = output_distribution(q, p)
    worst = 0.0
    for x in range(q.d_in):
        if p.p[x] <= 0.0:
            continue
        for y in range(q.d_out):
            if lam[y] <= 0.0:
                continue
            qxy = float(q.matrix[x, y])
            if qxy <= 0.0:
                return math.inf
            worst = max(worst, abs(math.log(qxy / float(lam[y]))))
    return worst


def measure_mip(q: Channel, p: Prior) -> float:
    """Mutual information I(X; Y) in nats; zero-probability terms contribute 0."""
    if p.size != q.d_in:
        raise DimensionMismatchError(
            f"prior size {p.size} != channel input size {q.d_in}")
    lam = output_distribution(q, p)
    joint = p.p[:, None] * q.matrix
    mask = joint > 0.0
    ratio = np.ones_like(joint)
    ratio[mask] = q.matrix[mask] / np.broadcast_to(lam, joint.shape)[mask]
    info = float(np.sum(joint[mask] * np.log(ratio[mask])))
    return max(0.0, info)


def audit(q: Channel, p: Prior) -> PrivacyAudit:
    """Measure all three levels and verify the relations among them.

    Raises ``InternalInconsistencyError`` if the measurements violate
    lip <= ldp <= 2*lip or I(X;Y) <= lip, which valid inputs cannot do.
    """
    ldp = measure_ldp(q)
    lip = measure_lip(q, p)
    mip = measure_mip(q, p)
    if math.isfinite(ldp) and math.isfinite(lip):
        if lip > ldp + _AUDIT_SLACK or ldp > 2.0 * lip + _AUDIT_SLACK:
            raise InternalInconsistencyError(
                f"sandwich violated: lip={lip}, ldp={ldp}")
    if math.isfinite(lip) and mip > lip + _AUDIT_SLACK:
        raise InternalInconsistencyError(
            f"average leakage {mip} exceeds worst-case level {lip}")
    return PrivacyAudit(ldp_eps=ldp, lip_eps=lip, mip_nats=mip)
