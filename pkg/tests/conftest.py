"""Shared test helpers: independent enumeration oracles and random inputs.

The enumeration functions here deliberately re-derive every quantity from
definitions with explicit loops; they must stay independent of the package
implementations they are used to check.
"""

import itertools

import numpy as np
import pytest

from lipagg import Channel, Domain, Prior


def random_channel(rng, d_in, d_out=None, concentration=1.0) -> Channel:
    d_out = d_out or d_in
    m = rng.dirichlet(np.full(d_out, concentration), size=d_in)
    return Channel(m, Domain.of_size(d_in), Domain.of_size(d_out))


def random_prior(rng, d, concentration=1.0) -> Prior:
    return Prior(rng.dirichlet(np.full(d, concentration)))


def enum_value_mse(matrix, pvec, values):
    """E[(X - E[X|Y])^2] from the definition, by explicit loops."""
    d_in, d_out = matrix.shape
    lam = [sum(pvec[m] * matrix[m][k] for m in range(d_in)) for k in range(d_out)]
    xhat = []
    for k in range(d_out):
        if lam[k] > 0:
            xhat.append(sum(values[m] * pvec[m] * matrix[m][k]
                            for m in range(d_in)) / lam[k])
        else:
            xhat.append(0.0)
    total = 0.0
    for m in range(d_in):
        for k in range(d_out):
            total += pvec[m] * matrix[m][k] * (values[m] - xhat[k]) ** 2
    return total


def enum_histogram_mse(matrix, pvec):
    """Sum over categories of E[(1{X=a_k} - Pr(X=a_k|Y))^2], by loops."""
    d = matrix.shape[0]
    total = 0.0
    for k in range(d):
        indicator = [1.0 if m == k else 0.0 for m in range(d)]
        total += enum_value_mse(matrix, pvec, indicator)
    return total


def enum_joint(pvecs, matrices):
    """Iterate (x-tuple, y-tuple, joint probability) over all N users."""
    n = len(pvecs)
    sizes_in = [len(p) for p in pvecs]
    sizes_out = [m.shape[1] for m in matrices]
    for xs in itertools.product(*[range(s) for s in sizes_in]):
        px = 1.0
        for i in range(n):
            px *= pvecs[i][xs[i]]
        if px == 0.0:
            continue
        for ys in itertools.product(*[range(s) for s in sizes_out]):
            pr = px
            for i in range(n):
                pr *= matrices[i][xs[i], ys[i]]
            if pr > 0.0:
                yield xs, ys, pr


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20240601))
