"""Cell-size and curvature indicators, marking and state transfer for
hierarchical refinement.

The basis itself lives in :mod:`gsiga.space`; this module decides which
active functions to refine and carries every coefficient vector across.
"""
from dataclasses import dataclass

import numpy as np

from .space import SplineSpace, transfer_matrix

HierarchicalBasis = SplineSpace

__all__ = [
    "HierarchicalBasis",
    "RefinementIndicators",
    "Baselines",
    "compute_indicators",
    "baselines",
    "mark",
    "refine",
    "transfer_matrix",
]


@dataclass
class RefinementIndicators:
    """Per active function: weighted cell size ``mu`` and weighted squared
    curvature ``kappa``. ``kappa`` is NaN where it does not apply (functions
    touching a patch interface, or every function when ``p < 2``)."""

    mu: np.ndarray
    kappa: np.ndarray

    @property
    def curvature_applicable(self):
        return ~np.isnan(self.kappa)


@dataclass(frozen=True)
class Baselines:
    """Averages of the indicators on the initial geometry."""

    mu_cell: float
    mu_curve: float


def compute_indicators(quad, control_points):
    """Indicators of every active function of ``quad.space`` on the surface
    with the given control points."""
    space = quad.space
    geo = quad.geometry(control_points, second=space.p >= 2)
    W = quad.weights[None]
    Wg = W * geo.sqrt_g
    plain = quad.load_vector(np.ascontiguousarray(np.broadcast_to(W, Wg.shape)))
    area = quad.load_vector(Wg)
    mu = area / plain
    if geo.curvature is None:
        kappa = np.full(space.num_dofs, np.nan)
    else:
        kappa = quad.load_vector(Wg * geo.curvature.squared_sum) / area
        kappa[space.is_interface] = np.nan
    return RefinementIndicators(mu=mu, kappa=kappa)


def baselines(indicators):
    """``mu_cell`` and ``mu_curve`` as plain means over all functions (the
    curvature mean skips functions where it does not apply)."""
    mu_curve = float(np.nanmean(indicators.kappa)) if np.any(indicators.curvature_applicable) else np.inf
    return Baselines(mu_cell=float(np.mean(indicators.mu)), mu_curve=mu_curve)


# squared curvatures below this, in units of 1 / mu_cell, are roundoff
CURVATURE_FLOOR = 1e-12


def mark(indicators, base, k_cell=4.0, k_curve=4.0):
    """Indices of active functions exceeding either threshold.

    The curvature baseline is floored at ``CURVATURE_FLOOR / mu_cell`` so a
    flat initial surface does not turn roundoff into refinement.
    """
    cell = indicators.mu > k_cell * base.mu_cell
    ref = max(base.mu_curve, CURVATURE_FLOOR / base.mu_cell)
    with np.errstate(invalid="ignore"):
        curve = np.where(indicators.curvature_applicable, indicators.kappa > k_curve * ref, False)
    return np.flatnonzero(cell | curve)


def refine(space, marked, *vectors):
    """Refine ``marked`` functions of ``space`` and transfer coefficient
    arrays (leading axis over active functions).

    Returns ``(new_space, transferred_vectors)``.
    """
    new, R = space.refine(marked)
    return new, [None if v is None else np.asarray(R @ v) for v in vectors]
