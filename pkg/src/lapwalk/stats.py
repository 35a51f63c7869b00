"""Chi-square goodness of fit with small-cell pooling."""

from __future__ import annotations

from typing import Hashable, Mapping, Sequence

import numpy as np
from scipy import stats


def chi_square_gof(observed: Sequence[float], expected_probs: Sequence[float], min_expected: float = 5.0):
    """Pearson statistic and p-value.

    Cells whose expected count falls below ``min_expected`` are pooled, smallest first,
    into a tail cell until every retained cell (the tail included) reaches it.
    Degrees of freedom: retained cells minus one.
    """
    observed = np.asarray(observed, dtype=float)
    probs = np.asarray(expected_probs, dtype=float)
    n = observed.sum()
    if n <= 0:
        raise ValueError("no observations")
    if len(observed) != len(probs):
        raise ValueError("observed and expected differ in length")
    probs = probs / probs.sum()
    expected = n * probs

    order = np.argsort(expected, kind="stable")
    obs_sorted, exp_sorted = observed[order], expected[order]
    k = 0
    tail_obs = tail_exp = 0.0
    while k < len(exp_sorted) and (exp_sorted[k] < min_expected or 0 < tail_exp < min_expected):
        tail_obs += obs_sorted[k]
        tail_exp += exp_sorted[k]
        k += 1
    cells_obs = list(obs_sorted[k:])
    cells_exp = list(exp_sorted[k:])
    if tail_exp > 0:
        cells_obs.append(tail_obs)
        cells_exp.append(tail_exp)
    if len(cells_exp) <= 1:
        return 0.0, 1.0
    cells_obs = np.array(cells_obs)
    cells_exp = np.array(cells_exp)
    statistic = float(np.sum((cells_obs - cells_exp) ** 2 / cells_exp))
    p_value = float(stats.chi2.sf(statistic, len(cells_exp) - 1))
    return statistic, p_value


def chi_square_counts(counts: Mapping[Hashable, int], probs: Mapping[Hashable, float], min_expected: float = 5.0):
    """Goodness of fit for categorical counts keyed like ``probs``; unknown categories are an error."""
    if not counts or sum(counts.values()) == 0:
        raise ValueError("empty observation set")
    unknown = set(counts) - set(probs)
    if unknown:
        raise ValueError(f"{len(unknown)} observed categories are outside the expected support")
    keys = list(probs)
    return chi_square_gof([counts.get(k, 0) for k in keys], [probs[k] for k in keys], min_expected)
