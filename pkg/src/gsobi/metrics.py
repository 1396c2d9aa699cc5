"""Minimum distance index for scoring estimates against a known mixing.

The index scores a gain matrix G = Gamma_hat Omega on [0, 1]; zero means
perfect separation up to row scale, sign and order.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import ValidationError


def _as_gain(g) -> np.ndarray:
    G = np.asarray(g, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValidationError(f"gain matrix must be square, got shape {G.shape}")
    if G.shape[0] < 2:
        raise ValidationError("minimum distance index needs p >= 2")
    if not np.all(np.isfinite(G)):
        raise ValidationError("gain matrix contains non-finite entries")
    return G


def mdi(g) -> float:
    """Minimum distance index of a gain matrix.

    For a fixed assignment of rows to coordinates the optimal row scale is
    a closed-form projection, which reduces the infimum over one-nonzero-
    per-row-and-column matrices to a linear assignment problem with benefit
    G_ij^2 / ||G_i||^2, solved exactly. All-zero rows take scale zero and
    contribute one to the squared norm.
    """
    G = _as_gain(g)
    p = G.shape[0]
    row_sq = (G**2).sum(axis=1)
    benefit = np.zeros_like(G)
    nz = row_sq > 0
    benefit[nz] = G[nz] ** 2 / row_sq[nz, None]
    rows, cols = linear_sum_assignment(benefit, maximize=True)
    d2 = (p - float(benefit[rows, cols].sum())) / (p - 1)
    return float(np.sqrt(max(d2, 0.0)))


def scaled_mdi(g, n: int) -> float:
    """The criterion n (p - 1) D^2 whose mean stabilizes for root-n
    consistent estimators."""
    G = _as_gain(g)
    p = G.shape[0]
    return float(n) * (p - 1) * mdi(G) ** 2
