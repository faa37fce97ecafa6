"""Studentized range distribution by Gauss-Legendre quadrature.

CDF(q; m, df) = integral over s of f_s(s) * W(q s; m), where s ~ chi_df / sqrt(df)
and W(w; m) = m * integral phi(z) [Phi(z) - Phi(z - w)]^(m-1) dz is the
probability that the range of m standard normals is at most w.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, ndtr
from scipy.stats import chi2

_Z_EDGES = np.linspace(-8.5, 8.5, 7)
_INNER_NODES, _INNER_WEIGHTS = np.polynomial.legendre.leggauss(40)
_OUTER_NODES, _OUTER_WEIGHTS = np.polynomial.legendre.leggauss(64)
_OUTER_PANELS = 6


def _panels(edges, nodes, weights):
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        xs.append(0.5 * (a + b) + half * nodes)
        ws.append(half * weights)
    return np.concatenate(xs), np.concatenate(ws)


_Z, _ZW = _panels(_Z_EDGES, _INNER_NODES, _INNER_WEIGHTS)
_PHI_ZW = _ZW * np.exp(-0.5 * _Z ** 2) / math.sqrt(2 * math.pi)


def range_cdf(w, m: int):
    """P(range of m iid N(0,1) <= w), vectorised over ``w``."""
    w = np.atleast_1d(np.asarray(w, dtype=np.float64))
    inner = ndtr(_Z)[None, :] - ndtr(_Z[None, :] - w[:, None])
    val = m * (np.clip(inner, 0.0, 1.0) ** (m - 1)) @ _PHI_ZW
    return np.where(w > 0, np.clip(val, 0.0, 1.0), 0.0)


@lru_cache(maxsize=256)
def _scale_nodes(df: float):
    # s = sqrt(X / df) with X ~ chi2(df); integrate over the bulk of X's mass
    lo = math.sqrt(chi2.ppf(1e-16, df) / df)
    hi = math.sqrt(chi2.isf(1e-16, df) / df)
    s, sw = _panels(np.linspace(lo, hi, _OUTER_PANELS + 1), _OUTER_NODES, _OUTER_WEIGHTS)
    half = 0.5 * df
    logf = (half * math.log(df) - gammaln(half) - (half - 1) * math.log(2.0)
            + (df - 1) * np.log(s) - half * s ** 2)
    return s, sw * np.exp(logf)


def studentized_range_cdf(q: float, m: int, df: float) -> float:
    if q <= 0:
        return 0.0
    if math.isinf(df):
        return float(range_cdf(q, m)[0])
    s, sw = _scale_nodes(float(df))
    return float(np.clip(range_cdf(q * s, m) @ sw, 0.0, 1.0))


@lru_cache(maxsize=256)
def studentized_range_quantile(p: float, m: int, df: float, xtol: float = 1e-10) -> float:
    """Inverse CDF of the studentized range for ``m`` groups and ``df`` degrees of freedom."""
    if not 0 < p < 1:
        raise ValueError("p must be in (0, 1)")
    if m < 2:
        raise ValueError("need at least two groups")
    hi = 1.0
    while studentized_range_cdf(hi, m, df) < p:
        hi *= 2.0
    return brentq(lambda q: studentized_range_cdf(q, m, df) - p, 1e-8, hi, xtol=xtol, rtol=1e-14)
