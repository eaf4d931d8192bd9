"""Mutual information, log-ratio spread, and the per-pair log-likelihood ratio.

All quantities are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput, PerfectCorrelation
from .model import CanonicalModel, CorrelationModel, validate_covariance


@dataclass(frozen=True)
class CorrelationSummary:
    mutual_information: float
    sigma: float

    def to_dict(self) -> dict:
        return {"mutual_information": self.mutual_information, "sigma": self.sigma}


def _rho(rho) -> np.ndarray:
    r = rho.rho if isinstance(rho, CanonicalModel) else np.asarray(rho, dtype=float).reshape(-1)
    if np.any(np.abs(r) >= 1.0):
        raise PerfectCorrelation("correlation of magnitude 1 has unbounded mutual information")
    return r


def _one_minus_sq(r: np.ndarray) -> np.ndarray:
    return (1.0 - r) * (1.0 + r)


def mutual_information(rho) -> float:
    r = _rho(rho)
    # log1p on each factor keeps full precision for small and near-one rho
    return float(-0.5 * np.sum(np.log1p(-r) + np.log1p(r)))


def sigma(rho) -> float:
    r = _rho(rho)
    return float(np.sqrt(np.sum(r * r)))


def summarize(rho) -> CorrelationSummary:
    return CorrelationSummary(mutual_information(rho), sigma(rho))


def mutual_information_general(model: CorrelationModel) -> float:
    """-1/2 log(det S / (det S_a det S_b)), evaluated with log-determinants."""
    validate_covariance(model)
    if model.d_a == 0 or model.d_b == 0:
        return 0.0
    _, logdet = np.linalg.slogdet(model.joint_covariance)
    _, logdet_a = np.linalg.slogdet(model.sigma_a)
    _, logdet_b = np.linalg.slogdet(model.sigma_b)
    return float(-0.5 * (logdet - logdet_a - logdet_b))


def sigma_general(model: CorrelationModel) -> float:
    """sqrt(tr(S_a^-1 S_ab S_b^-1 S_ab^T))."""
    validate_covariance(model)
    if model.d_a == 0 or model.d_b == 0:
        return 0.0
    left = np.linalg.solve(model.sigma_a, model.sigma_ab)
    right = np.linalg.solve(model.sigma_b, model.sigma_ab.T)
    return float(np.sqrt(max(np.trace(left @ right), 0.0)))


def log_likelihood_ratio(rho, x, y) -> float | np.ndarray:
    """log p_XY(x, y) - log p_X(x) - log p_Y(y) in canonical coordinates.

    ``x`` and ``y`` may carry leading batch dimensions; the last axis has
    length d.  Returns a float for single vectors, an array otherwise.
    """
    r = _rho(rho)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1:] != r.shape or y.shape[-1:] != r.shape:
        raise DimensionMismatch(f"expected vectors of length {r.shape[0]}, got {x.shape} and {y.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("feature vectors must be finite")
    q = _one_minus_sq(r)
    quad = (r * r * (x * x + y * y) - 2.0 * r * x * y) / (2.0 * q)
    out = np.sum(-0.5 * (np.log1p(-r) + np.log1p(r)) - quad, axis=-1)
    return float(out) if np.ndim(out) == 0 else out
