"""MAP alignment, threshold (partial) alignment, and error scoring.

MAP alignment maximizes the summed log-likelihood ratio over bijections.
Because the matching is a priori uniform and the marginal densities do not
depend on it, this is the same argmax as the posterior.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, IdentifierMismatch, InstanceTooLarge, NonFiniteScore
from .measures import CorrelationSummary, _one_minus_sq, _rho, mutual_information
from .model import DatabasePair, Matching
from .synth import TrialSeed
from .theory import ThresholdWindow, bht_threshold_window

BRUTE_FORCE_CAP = 9
TIGHT_RTOL = 1e-9


@dataclass(frozen=True)
class ScoreMatrix:
    scores: np.ndarray
    users_a: tuple
    users_b: tuple

    def __post_init__(self):
        s = np.array(self.scores, dtype=float, copy=True)
        if s.ndim != 2 or s.shape != (len(self.users_a), len(self.users_b)):
            raise DimensionMismatch(f"score matrix shape {s.shape} does not match identifier lists")
        if not np.all(np.isfinite(s)):
            raise NonFiniteScore("score matrix has non-finite entries")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "users_a", tuple(self.users_a))
        object.__setattr__(self, "users_b", tuple(self.users_b))

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    @classmethod
    def from_array(cls, scores) -> "ScoreMatrix":
        """Wrap a bare matrix, labelling rows u1, u2, ... and columns v1, v2, ..."""
        s = np.asarray(scores, dtype=float)
        if s.ndim != 2:
            raise DimensionMismatch("scores must be a matrix")
        return cls(s, tuple(f"u{i + 1}" for i in range(s.shape[0])), tuple(f"v{j + 1}" for j in range(s.shape[1])))


@dataclass
class AlignmentReport:
    algorithm: str
    predicted: Matching
    truth: Matching | None = None
    false_negatives: int | None = None
    false_positives: int | None = None
    exact: bool | None = None
    total_score: float | None = None
    threshold: float | None = None
    wall_time: float = 0.0
    seed: TrialSeed | None = None
    n: int | None = None
    error: str | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self, include_pairs: bool = True) -> dict:
        out = {
            "algorithm": self.algorithm,
            "n": self.n,
            "seed": self.seed.to_dict() if self.seed else None,
            "false_negatives": self.false_negatives,
            "false_positives": self.false_positives,
            "exact": self.exact,
            "total_score": self.total_score,
            "threshold": self.threshold,
            "predicted_size": len(self.predicted) if self.predicted is not None else None,
            "wall_time": self.wall_time,
            "error": self.error,
        }
        if include_pairs:
            out["predicted"] = _pairs_list(self.predicted)
            out["truth"] = _pairs_list(self.truth) if self.truth is not None else None
        out.update(self.extra)
        return out


def _pairs_list(m: Matching | None):
    if m is None:
        return None
    return [list(p) for p in m.sorted_pairs()]


def score_matrix(databases: DatabasePair, rho) -> ScoreMatrix:
    """LLR of every (A_u, B_v) pair, built from three matrix products in O(n^2 d)."""
    r = _rho(rho)
    a, b = databases.a, databases.b
    if a.shape[1] != r.shape[0] or b.shape[1] != r.shape[0]:
        raise DimensionMismatch(
            f"databases have {a.shape[1]} and {b.shape[1]} columns; canonical model has d={r.shape[0]}"
        )
    q = _one_minus_sq(r)
    const = mutual_information(r)
    w = r * r / (2.0 * q)
    c = r / q
    row_term = (a * a) @ w
    col_term = (b * b) @ w
    scores = const - row_term[:, None] - col_term[None, :] + (a * c) @ b.T
    return ScoreMatrix(scores, databases.users_a, databases.users_b)


def matching_weight(scores: np.ndarray, perm: Sequence[int]) -> float:
    """Correctly rounded sum of ``scores[i, perm[i]]``; independent of summation order."""
    return math.fsum(scores[i, int(j)] for i, j in enumerate(perm))


def _hungarian_min(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Kuhn-Munkres with potentials on a square cost matrix.

    Returns ``(col_of_row, u, v)`` where ``cost[i, j] - u[i] - v[j] >= 0`` up to
    rounding, with equality on the assignment.
    """
    n = cost.shape[0]
    # 1-based bookkeeping: index 0 is the virtual column used to start each augmentation
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = cost[i0 - 1] - u[i0] - v[1:]
            improve = free[1:] & (cur < minv[1:])
            minv[1:][improve] = cur[improve]
            way[1:][improve] = j0
            cand = np.where(free, minv, np.inf)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of_row = np.empty(n, dtype=np.int64)
    col_of_row[p[1:] - 1] = np.arange(n)
    return col_of_row, u[1:], v[1:]


def _lexicographic_refine(scores: np.ndarray, tight: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Lexicographically smallest perfect matching among the tight edges.

    Row by row, try each smaller tight column and look for an alternating
    cycle through unfixed rows that frees it; accept only if the exact
    weight does not drop.
    """
    n = perm.shape[0]
    perm = perm.copy()
    owner = np.empty(n, dtype=np.int64)
    owner[perm] = np.arange(n)
    weight = matching_weight(scores, perm)
    tight_cols = [np.flatnonzero(tight[i]) for i in range(n)]
    for i in range(n):
        current = perm[i]
        for j in tight_cols[i]:
            if j >= current:
                break
            r0 = owner[j]
            if r0 < i:
                continue
            path = _alternating_path(tight_cols, perm, owner, r0, current, i)
            if path is None:
                continue
            trial = perm.copy()
            trial[i] = j
            for row, col in path:
                trial[row] = col
            new_weight = matching_weight(scores, trial)
            if new_weight < weight:
                continue
            perm = trial
            owner[perm] = np.arange(n)
            weight = new_weight
            break
    return perm


def _alternating_path(tight_cols, perm, owner, start_row, target_col, pinned_row):
    """BFS for a reassignment of rows > pinned_row that moves start_row off its column and onto target_col."""
    prev = {start_row: None}
    queue = deque([start_row])
    while queue:
        row = queue.popleft()
        for col in tight_cols[row]:
            if col == perm[row]:
                continue
            if col == target_col:
                path = [(row, col)]
                while prev[row] is not None:
                    parent = prev[row]
                    path.append((parent, perm[row]))
                    row = parent
                return path
            nxt = owner[col]
            if nxt <= pinned_row or nxt in prev:
                continue
            prev[nxt] = row
            queue.append(nxt)
    return None


def max_weight_permutation(scores) -> tuple[np.ndarray, float]:
    """Maximum-weight perfect assignment with the lexicographic tie-break."""
    s = np.asarray(scores, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionMismatch("MAP alignment needs a square score matrix")
    if not np.all(np.isfinite(s)):
        raise NonFiniteScore("score matrix has non-finite entries")
    n = s.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64), 0.0
    # shift so costs are non-negative; the argmax is unaffected
    cost = s.max() - s
    perm, u, v = _hungarian_min(cost)
    reduced = cost - u[:, None] - v[None, :]
    tol = TIGHT_RTOL * max(1.0, float(np.max(np.abs(s))), float(np.max(cost)))
    tight = reduced <= tol
    tight[np.arange(n), perm] = True
    perm = _lexicographic_refine(s, tight, perm)
    return perm, matching_weight(s, perm)


def map_align(scores: ScoreMatrix) -> tuple[Matching, float]:
    perm, weight = max_weight_permutation(scores.scores)
    return Matching.from_permutation(scores.users_a, scores.users_b, perm), weight


def brute_force_permutation(scores, cap: int = BRUTE_FORCE_CAP) -> tuple[np.ndarray, float, int]:
    """Exhaustive search over all n! assignments.

    Returns ``(perm, weight, n_optima)``: the lexicographically first
    maximizer, its exact weight, and how many assignments attain it.
    """
    s = np.asarray(scores, dtype=float)
    n = s.shape[0]
    if s.ndim != 2 or s.shape[1] != n:
        raise DimensionMismatch("brute force needs a square score matrix")
    if n > cap:
        raise InstanceTooLarge(f"n={n} exceeds the brute-force cap of {cap}")
    if n == 0:
        return np.zeros(0, dtype=np.int64), 0.0, 1
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    approx = s[np.arange(n), perms].sum(axis=1)
    # float sums may reorder near-ties; settle them with exact weights
    slack = 1e-9 * max(1.0, float(np.max(np.abs(s)))) * n
    near = np.flatnonzero(approx >= approx.max() - slack)
    exact = [matching_weight(s, perms[k]) for k in near]
    best = max(exact)
    winners = [k for k, w in zip(near, exact) if w == best]
    return perms[winners[0]].copy(), best, len(winners)


def brute_force_align(scores: ScoreMatrix, cap: int = BRUTE_FORCE_CAP) -> tuple[Matching, float]:
    perm, weight, _ = brute_force_permutation(scores.scores, cap)
    return Matching.from_permutation(scores.users_a, scores.users_b, perm), weight


def bht_align(scores: ScoreMatrix, tau: float) -> Matching:
    """Every pair whose log-likelihood ratio is at least ``tau``."""
    if not math.isfinite(tau):
        raise ValueError("tau must be finite")
    rows, cols = np.nonzero(scores.scores >= tau)
    ua, ub = scores.users_a, scores.users_b
    return Matching(frozenset((ua[i], ub[j]) for i, j in zip(rows, cols)), bijective=False)


def bht_error_counts(scores, tau: float, perm) -> tuple[int, int]:
    """(false negatives, false positives) of the threshold test against a planted permutation, without building pair sets."""
    if not math.isfinite(tau):
        raise ValueError("tau must be finite")
    s = np.asarray(scores)
    accepted = s >= tau
    n = s.shape[0]
    true_hits = int(np.count_nonzero(accepted[np.arange(n), np.asarray(perm)]))
    return n - true_hits, int(np.count_nonzero(accepted)) - true_hits


def select_threshold(summary: CorrelationSummary, n: int, eps_fn: float, eps_fp: float) -> ThresholdWindow:
    """Threshold window for the given error budgets; ``.midpoint`` is the default choice."""
    return bht_threshold_window(summary, n, eps_fn, eps_fp)


def score_alignment(predicted: Matching, truth: Matching) -> tuple[int, int, bool]:
    if not truth.bijective:
        raise IdentifierMismatch("ground truth must be a bijective matching")
    left = {u for u, _ in truth.pairs}
    right = {v for _, v in truth.pairs}
    for u, v in predicted.pairs:
        if u not in left or v not in right:
            raise IdentifierMismatch(f"predicted pair ({u!r}, {v!r}) uses an identifier absent from the truth")
    fn = len(truth.pairs - predicted.pairs)
    fp = len(predicted.pairs - truth.pairs)
    return fn, fp, predicted.pairs == truth.pairs
