"""Closed-form bounds and regime predicates for MAP and threshold alignment.

Predicates report a margin in nats alongside a verdict; the underlying
results are asymptotic in n, so at finite size the margin is the useful
number and the verdict only a label.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import IdentifierMismatch
from .measures import CorrelationSummary, _rho, mutual_information
from .model import Matching

ACHIEVABLE = "achievable"
CONVERSE = "converse"
GAP = "gap"


@dataclass(frozen=True)
class CycleType:
    """Cycle-length histogram ``{length: count}`` of a permutation."""

    counts: Mapping[int, int]

    def __post_init__(self):
        object.__setattr__(self, "counts", dict(sorted((int(k), int(v)) for k, v in self.counts.items() if v)))

    @property
    def n(self) -> int:
        return sum(ell * k for ell, k in self.counts.items())

    @property
    def fixed_points(self) -> int:
        return self.counts.get(1, 0)


@dataclass(frozen=True)
class RegimeVerdict:
    quantity: float
    verdict: str
    margin: float
    failure_bound: float | None = None
    asymptotic: bool = True
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"quantity": self.quantity, "verdict": self.verdict, "margin": self.margin}
        if self.failure_bound is not None:
            out["failure_bound"] = self.failure_bound
        out["asymptotic"] = self.asymptotic
        out.update(self.details)
        return out


@dataclass(frozen=True)
class ThresholdWindow:
    feasible: bool
    lower: float
    upper: float

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def gap(self) -> float:
        """How far the window is from opening; 0 when feasible."""
        return max(0.0, self.lower - self.upper)

    def to_dict(self) -> dict:
        out = {"feasible": self.feasible, "lower": self.lower, "upper": self.upper}
        if self.feasible:
            out["tau"] = self.midpoint
        else:
            out["gap"] = self.gap
        return out


def permutation_cycle_type(perm) -> CycleType:
    perm = np.asarray(perm)
    n = perm.shape[0]
    seen = np.zeros(n, dtype=bool)
    counts: Counter = Counter()
    for start in range(n):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = int(perm[j])
            length += 1
        counts[length] += 1
    return CycleType(counts)


def cycle_type(m1: Matching, m2: Matching) -> CycleType:
    """Cycle type of the permutation of U sending u to m2's partner of m1(u)."""
    if not (m1.bijective and m2.bijective):
        raise IdentifierMismatch("cycle type needs two bijective matchings")
    fwd = dict(m1.pairs)
    back = {v: u for u, v in m2.pairs}
    if set(fwd) != set(back.values()) or set(fwd.values()) != set(back):
        raise IdentifierMismatch("matchings are over different identifier sets")
    users = sorted(fwd, key=str)
    index = {u: i for i, u in enumerate(users)}
    return permutation_cycle_type([index[back[fwd[u]]] for u in users])


def shifted_laplacian_matrix(ell: int, s: float, t: float) -> np.ndarray:
    """Dense ``s I - (t/2)(P + P^T)`` with P the cyclic shift of size ``ell``."""
    shift = np.roll(np.eye(ell), 1, axis=1)
    return s * np.eye(ell) - 0.5 * t * (shift + shift.T)


def _laplacian_eigenvalues(ell: int, s: float, t: float) -> np.ndarray:
    j = np.arange(1, ell + 1)
    return s - t * np.cos(2.0 * np.pi * j / ell)


def shifted_laplacian_logdet(ell: int, s: float, t: float) -> float:
    """log det of the shifted Laplacian; requires s > |t| so every eigenvalue is positive."""
    if ell < 1:
        raise ValueError("ell must be positive")
    return float(np.sum(np.log(_laplacian_eigenvalues(ell, s, t))))


def shifted_laplacian_det(ell: int, s: float, t: float) -> float:
    if ell < 1:
        raise ValueError("ell must be positive")
    if s > abs(t):
        return math.exp(shifted_laplacian_logdet(ell, s, t))
    return float(np.prod(_laplacian_eigenvalues(ell, s, t)))


def log_bhattacharyya_r(cycles: CycleType, rho) -> float:
    r = _rho(rho)
    n = cycles.n
    total = 0.0
    for ri in r:
        r2 = ri * ri
        s, t = 1.0 - 0.5 * r2, 0.5 * r2
        term = 0.5 * n * math.log1p(-r2)
        for ell, k in cycles.counts.items():
            if ell == 1:
                logdet = math.log1p(-r2)
            elif ell == 2:
                logdet = math.log1p(-r2) + math.log(s + t)
            else:
                logdet = shifted_laplacian_logdet(ell, s, t)
            term -= 0.5 * k * logdet
        total += term
    return total


def bhattacharyya_r(cycles: CycleType, rho) -> float:
    """Bhattacharyya coefficient between the data laws under two matchings.

    Depends on the matchings only through the cycle type of their relative
    permutation; equals 1 when they coincide.
    """
    return math.exp(min(0.0, log_bhattacharyya_r(cycles, rho)))


def map_achievability_margin(rho, n: int) -> RegimeVerdict:
    """Margin I - 2 ln n, plus the union-bound ceiling on MAP failure.

    With q = n exp(-I/2), summing q^k over the number k of mismatched users
    bounds the failure probability by q / (1 - q) when q < 1.
    """
    info = mutual_information(rho)
    log_n = math.log(n)
    margin = info - 2.0 * log_n
    q = n * math.exp(-0.5 * info)
    bound = q / (1.0 - q) if q < 1.0 else None
    return RegimeVerdict(
        quantity=info / log_n if n > 1 else math.inf,
        verdict=ACHIEVABLE if margin > 0 else GAP,
        margin=margin,
        failure_bound=bound,
    )


def map_converse_predicate(rho_const: float, d: int, n: int) -> RegimeVerdict:
    """Margin 2 ln n - I for the constant-correlation model with d coordinates."""
    info = -0.5 * d * math.log1p(-rho_const * rho_const)
    log_n = math.log(n)
    margin = 2.0 * log_n - info
    if math.isclose(info, 2.0 * log_n, rel_tol=1e-12, abs_tol=1e-12):
        verdict = GAP
    elif margin > 0:
        verdict = CONVERSE
    else:
        verdict = ACHIEVABLE
    return RegimeVerdict(quantity=info / log_n if n > 1 else math.inf, verdict=verdict, margin=margin)


def bht_threshold_window(summary: CorrelationSummary, n: int, eps_fn: float, eps_fp: float) -> ThresholdWindow:
    """Thresholds keeping expected false negatives <= eps_fn and false positives <= eps_fp.

    Lower end: ln(n^2 / eps_fp) (Markov on the likelihood ratio of unmatched
    pairs).  Upper end: I - sigma sqrt(n / eps_fn) (Chebyshev on matched pairs).
    """
    if eps_fn <= 0 or eps_fp <= 0:
        raise ValueError("error budgets must be positive")
    lower = math.log(n * n / eps_fp)
    upper = summary.mutual_information - summary.sigma * math.sqrt(n / eps_fn)
    return ThresholdWindow(lower <= upper, lower, upper)


def bht_converse_bound(mutual_information: float, n: int) -> float:
    """Lower bound on expected false negatives plus false positives of any pairwise test."""
    if n < 2:
        raise ValueError("n must be at least 2")
    log_n = math.log(n)
    return max(0.0, 0.5 * n * (log_n - mutual_information) / (2.0 * log_n + 1.0))
