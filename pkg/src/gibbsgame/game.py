"""Payoff matrices, simplex vectors, Gibbs distributions and duality gaps."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractViolation

GAME_KINDS = ("uniform", "sign", "diag_dominant")


class PayoffMatrix:
    """Dense m x n payoff matrix with entries in [-1, 1].

    Both A and a contiguous copy of A^T are kept so that row and column
    slices are cheap for either player.
    """

    def __init__(self, entries):
        a = np.array(entries, dtype=np.float64, copy=True)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ContractViolation(f"payoff matrix must be 2-d and non-empty, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ContractViolation("payoff matrix has non-finite entries")
        if np.max(np.abs(a)) > 1.0:
            raise ContractViolation("payoff entries must lie in [-1, 1]")
        a.setflags(write=False)
        at = np.ascontiguousarray(a.T)
        at.setflags(write=False)
        self.A = a
        self.AT = at

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def shape(self):
        return self.A.shape

    def __eq__(self, other):
        return isinstance(other, PayoffMatrix) and np.array_equal(self.A, other.A)

    def __repr__(self):
        return f"PayoffMatrix(m={self.m}, n={self.n})"


@dataclass(frozen=True)
class GapReport:
    best_response_value_max: float
    best_response_value_min: float
    gap: float


def as_simplex(weights, dim: int | None = None, tol: float = 1e-9) -> np.ndarray:
    """Validate and return a probability vector."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size < 1:
        raise ContractViolation("simplex vector must be a non-empty 1-d array")
    if dim is not None and w.size != dim:
        raise ContractViolation(f"expected simplex vector of dim {dim}, got {w.size}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ContractViolation("simplex weights must be finite and nonnegative")
    if abs(w.sum() - 1.0) > tol:
        raise ContractViolation(f"simplex weights sum to {w.sum()!r}, not 1")
    return w


def _as_matrix(A) -> PayoffMatrix:
    return A if isinstance(A, PayoffMatrix) else PayoffMatrix(A)


def duality_gap(A, u, v) -> GapReport:
    """max_j (A^T u)_j - min_i (A v)_i."""
    A = _as_matrix(A)
    u = as_simplex(u, A.m)
    v = as_simplex(v, A.n)
    hi = float(np.max(A.AT @ u))
    lo = float(np.min(A.A @ v))
    return GapReport(hi, lo, hi - lo)


def gibbs_distribution(v) -> np.ndarray:
    """Softmax with max-subtraction."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise ContractViolation("score vector must be a non-empty 1-d array")
    if not np.all(np.isfinite(v)):
        raise ContractViolation("score vector has non-finite entries")
    e = np.exp(v - v.max())
    return e / e.sum()


def mat_vec_T(A, x) -> np.ndarray:
    """A^T x."""
    A = _as_matrix(A)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.m,):
        raise ContractViolation(f"expected vector of length {A.m}, got shape {x.shape}")
    return A.AT @ x


def mat_vec(A, y) -> np.ndarray:
    """A y."""
    A = _as_matrix(A)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (A.n,):
        raise ContractViolation(f"expected vector of length {A.n}, got shape {y.shape}")
    return A.A @ y


def random_game(m: int, n: int, kind: str = "uniform", seed: int = 0) -> PayoffMatrix:
    """Random benchmark instance, deterministic in ``seed``."""
    if m < 1 or n < 1:
        raise ContractViolation("m and n must be >= 1")
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        a = rng.uniform(-1.0, 1.0, size=(m, n))
    elif kind == "sign":
        a = rng.choice(np.array([-1.0, 1.0]), size=(m, n))
    elif kind == "diag_dominant":
        # unit diagonal, small negative noise elsewhere
        a = -0.5 * rng.uniform(0.0, 1.0, size=(m, n))
        d = min(m, n)
        a[np.arange(d), np.arange(d)] = 1.0
    else:
        raise ContractViolation(f"unknown game kind {kind!r}; expected one of {GAME_KINDS}")
    return PayoffMatrix(a)


def save_game(A, path) -> None:
    """Write the text format: header 'm n' then m rows of n reals."""
    A = _as_matrix(A)
    lines = [f"{A.m} {A.n}"]
    lines.extend(" ".join(repr(float(x)) for x in row) for row in A.A)
    Path(path).write_text("\n".join(lines) + "\n")


def load_game(path) -> PayoffMatrix:
    tokens = Path(path).read_text().split("\n")
    rows = [ln.split() for ln in tokens if ln.strip()]
    if not rows or len(rows[0]) != 2:
        raise ContractViolation("game file header must be 'm n'")
    try:
        m, n = int(rows[0][0]), int(rows[0][1])
        body = [[float(t) for t in r] for r in rows[1:]]
    except ValueError as exc:
        raise ContractViolation(f"malformed game file: {exc}") from None
    if len(body) != m or any(len(r) != n for r in body):
        raise ContractViolation(f"game file body does not match header {m} {n}")
    return PayoffMatrix(body)
