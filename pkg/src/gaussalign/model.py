"""Joint-Gaussian feature model and its reduction to canonical form.

A general model pairs feature vectors X (length d_a) and Y (length d_b) with
means ``mu_a``, ``mu_b`` and block covariance
``[[sigma_a, sigma_ab], [sigma_ab.T, sigma_b]]``.  Whitening each side with
its Cholesky factor and taking the SVD of the whitened cross-covariance gives
affine maps after which the pair is zero-mean, unit-variance, and correlated
only coordinate-by-coordinate with correlations ``rho``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import (
    AsymmetryBeyondTolerance,
    DimensionMismatch,
    IdentifierMismatch,
    NonFiniteInput,
    NotPositiveDefinite,
    PerfectCorrelation,
)

DEFAULT_DROP_TOLERANCE = 1e-10
SYMMETRY_TOLERANCE = 1e-10
PD_TOLERANCE = 1e-10


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim != ndim:
        if ndim == 2 and arr.size == 0:
            arr = arr.reshape(0, 0)
        else:
            raise DimensionMismatch(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CorrelationModel:
    mu_a: np.ndarray
    mu_b: np.ndarray
    sigma_a: np.ndarray
    sigma_b: np.ndarray
    sigma_ab: np.ndarray

    def __post_init__(self):
        for name, ndim in (("mu_a", 1), ("mu_b", 1), ("sigma_a", 2), ("sigma_b", 2), ("sigma_ab", 2)):
            object.__setattr__(self, name, _frozen(getattr(self, name), ndim, name))
        d_a, d_b = self.d_a, self.d_b
        if self.sigma_a.shape != (d_a, d_a):
            raise DimensionMismatch(f"sigma_a has shape {self.sigma_a.shape}, expected {(d_a, d_a)}")
        if self.sigma_b.shape != (d_b, d_b):
            raise DimensionMismatch(f"sigma_b has shape {self.sigma_b.shape}, expected {(d_b, d_b)}")
        if self.sigma_ab.shape != (d_a, d_b):
            if self.sigma_ab.size == 0 and 0 in (d_a, d_b):
                object.__setattr__(self, "sigma_ab", _frozen(np.zeros((d_a, d_b)), 2, "sigma_ab"))
            else:
                raise DimensionMismatch(f"sigma_ab has shape {self.sigma_ab.shape}, expected {(d_a, d_b)}")

    @property
    def d_a(self) -> int:
        return self.mu_a.shape[0]

    @property
    def d_b(self) -> int:
        return self.mu_b.shape[0]

    @property
    def joint_covariance(self) -> np.ndarray:
        return np.block([[self.sigma_a, self.sigma_ab], [self.sigma_ab.T, self.sigma_b]])

    @classmethod
    def from_canonical(cls, rho: "CanonicalModel | Sequence[float]") -> "CorrelationModel":
        """Embed a correlation vector as a general model (zero mean, identity marginals)."""
        r = rho.rho if isinstance(rho, CanonicalModel) else np.asarray(rho, dtype=float)
        d = r.shape[0]
        return cls(np.zeros(d), np.zeros(d), np.eye(d), np.eye(d), np.diag(r).reshape(d, d))

    def to_dict(self) -> dict:
        return {
            "mu_a": self.mu_a.tolist(),
            "mu_b": self.mu_b.tolist(),
            "sigma_a": self.sigma_a.tolist(),
            "sigma_b": self.sigma_b.tolist(),
            "sigma_ab": self.sigma_ab.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CorrelationModel":
        missing = {"mu_a", "mu_b", "sigma_a", "sigma_b", "sigma_ab"} - set(obj)
        if missing:
            raise DimensionMismatch(f"model is missing fields: {sorted(missing)}")
        return cls(obj["mu_a"], obj["mu_b"], obj["sigma_a"], obj["sigma_b"], obj["sigma_ab"])


@dataclass(frozen=True)
class CanonicalModel:
    """Per-coordinate correlations, each strictly in (0, 1), sorted non-increasing."""

    rho: np.ndarray

    def __post_init__(self):
        r = np.array(self.rho, dtype=float, copy=True).reshape(-1)
        if not np.all(np.isfinite(r)):
            raise NonFiniteInput("rho has non-finite entries")
        if r.size and np.max(np.abs(r)) >= 1.0 - DEFAULT_DROP_TOLERANCE:
            raise PerfectCorrelation(f"correlation {np.max(np.abs(r)):.17g} is numerically indistinguishable from 1")
        if np.any(r <= 0.0):
            raise ValueError("canonical correlations must be positive; drop zero coordinates and absorb signs first")
        if np.any(np.diff(r) > 0):
            raise ValueError("canonical correlations must be sorted non-increasing")
        r.setflags(write=False)
        object.__setattr__(self, "rho", r)

    @property
    def d(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def constant(cls, rho: float, d: int) -> "CanonicalModel":
        return cls(np.full(d, float(rho)))

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "CanonicalModel":
        """Build from arbitrary nonzero correlations: signs dropped, values sorted."""
        r = np.abs(np.asarray(list(values), dtype=float))
        return cls(-np.sort(-r, kind="stable"))

    def to_dict(self) -> dict:
        return {"rho": self.rho.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "CanonicalModel":
        return cls(obj["rho"])


@dataclass(frozen=True)
class FeatureTransform:
    offset: np.ndarray
    linear_map: np.ndarray

    def __post_init__(self):
        off = _frozen(self.offset, 1, "offset")
        lin = np.array(self.linear_map, dtype=float, copy=True)
        if lin.ndim != 2:
            lin = lin.reshape(-1, off.shape[0])
        if lin.shape[1] != off.shape[0]:
            raise DimensionMismatch(f"linear_map has {lin.shape[1]} columns but offset has length {off.shape[0]}")
        lin.setflags(write=False)
        object.__setattr__(self, "offset", off)
        object.__setattr__(self, "linear_map", lin)

    @property
    def d_in(self) -> int:
        return self.offset.shape[0]

    @property
    def d_out(self) -> int:
        return self.linear_map.shape[0]

    @classmethod
    def identity(cls, d: int) -> "FeatureTransform":
        return cls(np.zeros(d), np.eye(d))


@dataclass(frozen=True)
class ValidationResult:
    min_eigenvalue_a: float
    min_eigenvalue_b: float
    min_eigenvalue_joint: float


def _scale(m: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0


def validate_covariance(model: CorrelationModel) -> ValidationResult:
    """Check symmetry and definiteness; return the smallest eigenvalue of each block."""
    joint = model.joint_covariance
    scale = _scale(joint)
    for name, m in (("sigma_a", model.sigma_a), ("sigma_b", model.sigma_b)):
        dev = float(np.max(np.abs(m - m.T))) if m.size else 0.0
        if dev > SYMMETRY_TOLERANCE * scale:
            raise AsymmetryBeyondTolerance(name, dev)

    def min_eig(m):
        return float(np.linalg.eigvalsh(0.5 * (m + m.T))[0]) if m.size else np.inf

    lam_a = min_eig(model.sigma_a)
    if lam_a <= PD_TOLERANCE * scale:
        raise NotPositiveDefinite("sigma_a", lam_a)
    lam_b = min_eig(model.sigma_b)
    if lam_b <= PD_TOLERANCE * scale:
        raise NotPositiveDefinite("sigma_b", lam_b)
    lam = min_eig(joint)
    if lam < -PD_TOLERANCE * scale:
        raise NotPositiveDefinite("full block", lam)
    return ValidationResult(lam_a, lam_b, lam)


def _whitener(sigma: np.ndarray, name: str) -> np.ndarray:
    """Inverse of the lower Cholesky factor."""
    try:
        chol = np.linalg.cholesky(0.5 * (sigma + sigma.T))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(name, float(np.linalg.eigvalsh(sigma)[0])) from exc
    return np.linalg.inv(chol)


def canonicalize(
    model: CorrelationModel, drop_tolerance: float = DEFAULT_DROP_TOLERANCE
) -> tuple[CanonicalModel, FeatureTransform, FeatureTransform]:
    """Reduce ``model`` to its canonical correlations and the two feature maps.

    Returns ``(canonical, t_a, t_b)``.  Applying ``t_a`` to X and ``t_b`` to Y
    yields coordinates with identity marginal covariance and cross-covariance
    ``diag(canonical.rho)``.  Singular values at or below ``drop_tolerance``
    are dropped, so ``canonical.d`` is the rank of the whitened cross-covariance.
    """
    validate_covariance(model)
    d_a, d_b = model.d_a, model.d_b
    if d_a == 0 or d_b == 0:
        return (
            CanonicalModel(np.zeros(0)),
            FeatureTransform(model.mu_a, np.zeros((0, d_a))),
            FeatureTransform(model.mu_b, np.zeros((0, d_b))),
        )
    wa = _whitener(model.sigma_a, "sigma_a")
    wb = _whitener(model.sigma_b, "sigma_b")
    cross = wa @ model.sigma_ab @ wb.T
    u, s, vt = np.linalg.svd(cross)
    # numpy returns singular values non-increasing; stable argsort keeps SVD column order on ties
    order = np.argsort(-s, kind="stable")
    s = s[order]
    if s.size and s[0] >= 1.0 - drop_tolerance:
        raise PerfectCorrelation(f"canonical correlation {s[0]:.17g} is within {drop_tolerance:g} of 1")
    keep = order[s > drop_tolerance]
    rho = s[s > drop_tolerance]
    t_a = FeatureTransform(model.mu_a, u[:, keep].T @ wa)
    t_b = FeatureTransform(model.mu_b, vt[keep, :] @ wb)
    return CanonicalModel(rho), t_a, t_b


def apply_transform(t: FeatureTransform, rows) -> np.ndarray:
    """Map each row r to ``linear_map @ (r - offset)``."""
    x = np.asarray(rows, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1) if x.size else x.reshape(0, t.d_in)
    if x.shape[1] != t.d_in:
        raise DimensionMismatch(f"rows have {x.shape[1]} columns, transform expects {t.d_in}")
    return (x - t.offset) @ t.linear_map.T


@dataclass(frozen=True)
class DatabasePair:
    users_a: tuple
    users_b: tuple
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        ua, ub = tuple(self.users_a), tuple(self.users_b)
        object.__setattr__(self, "users_a", ua)
        object.__setattr__(self, "users_b", ub)
        a = np.array(self.a, dtype=float, copy=True)
        b = np.array(self.b, dtype=float, copy=True)
        if a.ndim != 2 or b.ndim != 2:
            raise DimensionMismatch("database contents must be 2-d matrices")
        n = len(ua)
        if n < 1:
            raise DimensionMismatch("databases must hold at least one user")
        if len(ub) != n or a.shape[0] != n or b.shape[0] != n:
            raise DimensionMismatch(
                f"row counts differ: |users_a|={n}, |users_b|={len(ub)}, A has {a.shape[0]}, B has {b.shape[0]}"
            )
        if len(set(ua)) != n or len(set(ub)) != n:
            raise IdentifierMismatch("identifiers must be unique within each database")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise NonFiniteInput("database contains non-finite features")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return len(self.users_a)

    def transformed(self, t_a: FeatureTransform, t_b: FeatureTransform) -> "DatabasePair":
        return DatabasePair(self.users_a, self.users_b, apply_transform(t_a, self.a), apply_transform(t_b, self.b))


@dataclass(frozen=True)
class Matching:
    """A set of (identifier_a, identifier_b) pairs.

    ``bijective`` matchings pair every identifier on both sides exactly once;
    threshold-test output is an arbitrary subset of U x V.
    """

    pairs: frozenset
    bijective: bool = False

    def __post_init__(self):
        object.__setattr__(self, "pairs", frozenset(self.pairs))
        if self.bijective:
            left = [u for u, _ in self.pairs]
            right = [v for _, v in self.pairs]
            if len(set(left)) != len(left) or len(set(right)) != len(right):
                raise IdentifierMismatch("bijective matching uses an identifier twice")

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, pair) -> bool:
        return pair in self.pairs

    @classmethod
    def from_permutation(cls, users_a: Sequence[Hashable], users_b: Sequence[Hashable], perm) -> "Matching":
        """Pair ``users_a[i]`` with ``users_b[perm[i]]``."""
        if len(perm) != len(users_a) or len(users_a) != len(users_b):
            raise DimensionMismatch("permutation length must equal both identifier counts")
        return cls(frozenset((users_a[i], users_b[int(j)]) for i, j in enumerate(perm)), bijective=True)

    def as_permutation(self, users_a: Sequence[Hashable], users_b: Sequence[Hashable]) -> np.ndarray:
        """Inverse of :meth:`from_permutation`; requires a bijective matching over exactly these users."""
        if not self.bijective:
            raise IdentifierMismatch("only bijective matchings map to a permutation")
        ia = {u: i for i, u in enumerate(users_a)}
        ib = {v: j for j, v in enumerate(users_b)}
        if len(self.pairs) != len(users_a):
            raise IdentifierMismatch(f"matching has {len(self.pairs)} pairs for {len(users_a)} users")
        perm = np.empty(len(users_a), dtype=np.int64)
        try:
            for u, v in self.pairs:
                perm[ia[u]] = ib[v]
        except KeyError as exc:
            raise IdentifierMismatch(f"unknown identifier {exc.args[0]!r}") from None
        return perm

    def sorted_pairs(self) -> list:
        return sorted(self.pairs, key=lambda p: (str(p[0]), str(p[1])))
