"""Stochastic mirror descent for zero-sum matrix games with Gibbs-sampling oracles.

The game convention is that of :func:`gibbsgame.game.duality_gap`: the row
player (u) minimizes and the column player (v) maximizes u^T A v.  The main
loop follows the standard two-oracle scheme on the matrix -A, so that the
column oracle samples from exp(A^T x) and the row oracle from exp(-A y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import oracles as orc
from .cost_model import QueryLedger, RejectionConfig
from .errors import ContractViolation
from .game import GapReport, PayoffMatrix, duality_gap, gibbs_distribution
from .poly import build_accept_poly

PRESETS = ("default", "highprob")


@dataclass(frozen=True)
class SolverParams:
    eps: float
    alpha: float
    eta: float
    delta: float
    T: int
    seed: int = 0
    c_T: float = 64.0
    preset: str = "default"

    def __post_init__(self):
        if not 0 < self.eps < 1 or not 0 < self.alpha < 1:
            raise ContractViolation("eps and alpha must lie in (0, 1)")
        if not self.eta > 0 or self.T < 1:
            raise ContractViolation("need eta > 0 and T >= 1")
        if not 0 < self.delta <= self.eps / 20 * (1 + 1e-12):
            raise ContractViolation("delta must lie in (0, eps/20]")

    @property
    def beta(self) -> float:
        """A-priori l1 bound eta * T on both iterates."""
        return self.eta * self.T


def phased_k(m: int, n: int, eta: float, alpha: float, eps: float, c_k: float = 1.0) -> int:
    """Largest batch parameter over the two oracle sides."""
    return max(orc.choose_k(n, eta, m, alpha, eps, c_k), orc.choose_k(m, eta, n, alpha, eps, c_k))


def default_params(eps: float, alpha: float, m: int, n: int, *, c_T: float = 64.0,
                   preset: str = "default", seed: int = 0, oracle_kind: str | None = None,
                   c_k: float = 1.0) -> SolverParams:
    """eta = eps/60, delta = eps/20, T = ceil(c_T eps^-2 ln(mn/alpha)).

    ``preset="highprob"`` uses eta = eps/20 and
    T = ceil(8 ln(mn) / (eta eps) + 2048 ln(1/alpha) / eps^2).  For the
    phased-hint oracle delta is further reduced to min(eta, 1/(16k)).
    """
    if not 0 < eps < 1 or not 0 < alpha < 1:
        raise ContractViolation("eps and alpha must lie in (0, 1)")
    if m < 1 or n < 1:
        raise ContractViolation("m and n must be >= 1")
    if preset == "default":
        eta = eps / 60.0
        T = math.ceil(c_T * eps ** -2 * math.log(m * n / alpha))
    elif preset == "highprob":
        eta = eps / 20.0
        T = math.ceil(8 * math.log(m * n) / (eta * eps) + 2048 * math.log(1 / alpha) / eps ** 2)
    else:
        raise ContractViolation(f"unknown preset {preset!r}; expected one of {PRESETS}")
    delta = eps / 20.0
    if oracle_kind == "phased-hint":
        k = phased_k(m, n, eta, alpha, eps, c_k)
        delta = min(delta, eta, 1.0 / (16 * k))
    return SolverParams(eps, alpha, eta, delta, max(int(T), 1), seed, c_T, preset)


@dataclass
class IterateLog:
    """Update indices (i_t, j_t) of every iteration; enough to replay x_t and y_t."""

    i_seq: np.ndarray
    j_seq: np.ndarray
    eta: float
    matrix: PayoffMatrix


@dataclass
class NEOutput:
    u_hat: np.ndarray
    v_hat: np.ndarray
    counts_u: np.ndarray
    counts_v: np.ndarray
    T: int
    gap_report: GapReport
    ledger: QueryLedger
    iterate_log: IterateLog | None = None
    diagnostics: dict = field(default_factory=dict)
    oracles: tuple = ()

    @property
    def gap(self) -> float:
        return self.gap_report.gap


@dataclass(frozen=True)
class OracleOptions:
    """Knobs of the sampling oracles that are not solver parameters."""

    mode: str = "exact_exp"
    C: float = 16.0
    kappa_amp: float = 1.0
    delta_amp: float = 1e-3
    kappa_test: float = 0.5
    c_N: float = 48.0
    c_k: float = 1.0
    charge: str = "amortized"
    verify: bool = False
    acceptance_trials: int = 0


def _side_oracle(kind, mat, side, dim, params, m, n, opts, rng, k):
    beta = params.beta
    ap = None
    if opts.mode == "poly":
        ap = build_accept_poly(max(beta, 1.0), opts.C, dim, params.delta)
    config = RejectionConfig(opts.mode, ap, opts.kappa_amp, opts.delta_amp, opts.kappa_test, opts.C,
                             beta, m * n, params.delta)
    pconfig = None
    if kind == "phased-hint":
        pconfig = orc.PhasedConfig(k, params.alpha, params.delta, params.eta, params.T, opts.c_N,
                                   opts.charge, opts.verify, opts.acceptance_trials)
    return orc.make_oracle(kind, mat, side, eta=params.eta, T_max=params.T, config=config,
                           pconfig=pconfig, ledger=QueryLedger(), rng=rng)


def build_oracles(A: PayoffMatrix, params: SolverParams, oracle_kind: str, rng: np.random.Generator,
                  opts: OracleOptions = OracleOptions()):
    """(column oracle over exp(A^T x), row oracle over exp(-A y)) with independent streams."""
    m, n = A.m, A.n
    k = 0
    if oracle_kind == "phased-hint":
        k = phased_k(m, n, params.eta, params.alpha, params.eps, opts.c_k)
        if params.delta > params.eta or params.delta > 1.0 / (16 * k):
            raise ContractViolation(
                f"phased-hint oracle needs delta <= eta and delta <= 1/(16k) (k={k}); got "
                f"delta={params.delta:.4g}, eta={params.eta:.4g}")
    neg = PayoffMatrix(-A.A)
    r_col, r_row = rng.spawn(2)
    col = _side_oracle(oracle_kind, neg, orc.SIDES[0], n, params, m, n, opts, r_col, min(k, n) or 1)
    row = _side_oracle(oracle_kind, neg, orc.SIDES[1], m, params, m, n, opts, r_row, min(k, m) or 1)
    return col, row


def solve(A, params: SolverParams, oracle_kind: str = "exact", rng: np.random.Generator | None = None,
          *, opts: OracleOptions = OracleOptions(), iterate_log: bool = False,
          observer=None, iterations: int | None = None) -> NEOutput:
    """Run T iterations and return the subsampled averages (u_hat, v_hat).

    ``observer(t, col_oracle, row_oracle)`` is called at the start of every
    iteration, before that iteration's samples are drawn.  ``iterations``
    truncates the run to a prefix (verification only); the outputs are then
    averages over the executed iterations while beta and the oracle
    parameters still refer to the full T.
    """
    A = A if isinstance(A, PayoffMatrix) else PayoffMatrix(A)
    if rng is None:
        rng = np.random.default_rng(params.seed)
    col, row = build_oracles(A, params, oracle_kind, rng, opts)
    T = params.T if iterations is None else max(1, min(int(iterations), params.T))
    cnt_u = np.zeros(A.m, dtype=np.int64)
    cnt_v = np.zeros(A.n, dtype=np.int64)
    i_seq = np.empty(T, dtype=np.int32) if iterate_log else None
    j_seq = np.empty(T, dtype=np.int32) if iterate_log else None
    for t in range(T):
        if observer is not None:
            observer(t, col, row)
        j, j2 = col.sample(2)
        i, i2 = row.sample(2)
        row.update(int(j))
        col.update(int(i))
        cnt_u[i2] += 1
        cnt_v[j2] += 1
        if iterate_log:
            i_seq[t] = i
            j_seq[t] = j
    u_hat = cnt_u / T
    v_hat = cnt_v / T
    log = IterateLog(i_seq, j_seq, params.eta, col.state.matrix) if iterate_log else None
    diag = {"col": col.diagnostics(), "row": row.diagnostics()}
    return NEOutput(u_hat, v_hat, cnt_u, cnt_v, T, duality_gap(A, u_hat, v_hat),
                    col.ledger.merge(row.ledger), log, diag, (col, row))


def averaged_iterates(log: IterateLog | None, chunk: int = 2048):
    """Exact averages of the softmax iterates u_t, v_t for t = 0..T-1, replayed from the log."""
    if log is None:
        raise ContractViolation("averaged_iterates requires an iterate log")
    neg = log.matrix           # the solver's internal -A
    T = log.i_seq.size
    m, n = neg.m, neg.n
    wu = np.zeros(m)           # -A y_t
    wv = np.zeros(n)           # A^T x_t
    su = np.zeros(m)
    sv = np.zeros(n)
    for s in range(0, T, chunk):
        js = log.j_seq[s:s + chunk]
        is_ = log.i_seq[s:s + chunk]
        du = log.eta * np.cumsum(neg.AT[js], axis=0)
        dv = -log.eta * np.cumsum(neg.A[is_], axis=0)
        Wu = np.vstack([wu, wu + du[:-1]])
        Wv = np.vstack([wv, wv + dv[:-1]])
        for W, acc in ((Wu, su), (Wv, sv)):
            W = W - W.max(axis=1, keepdims=True)
            E = np.exp(W)
            acc += (E / E.sum(axis=1, keepdims=True)).sum(axis=0)
        wu = wu + du[-1]
        wv = wv + dv[-1]
    return su / T, sv / T


@dataclass(frozen=True)
class BiasReport:
    bias: float
    sigma: float
    threshold: float
    passed: bool


def bias_check(oracle, A, w, delta: float, samples: int = 100_000,
               rng: np.random.Generator | None = None, z: float = 3.0) -> BiasReport:
    """Monte-Carlo estimate of || A^T p - E[A_{i:}] ||_inf with i drawn from ``oracle``.

    ``p`` is the exact Gibbs distribution of ``w`` (over rows of A).  The
    check passes when the bias is at most delta + z * sigma, with sigma the
    largest per-coordinate standard error.  ``oracle`` is anything with a
    ``sample_frozen(count, rng)`` method returning index counts.
    """
    A = A if isinstance(A, PayoffMatrix) else PayoffMatrix(A)
    rng = rng if rng is not None else np.random.default_rng(0)
    p = gibbs_distribution(w)
    if p.size != A.m:
        raise ContractViolation("w must have one entry per row of A")
    counts = oracle.sample_frozen(samples, rng)
    freq = counts / samples
    mean = A.AT @ freq
    second = (A.AT ** 2) @ freq
    sigma = float(np.sqrt(np.max(np.maximum(second - mean ** 2, 0.0)) / samples))
    bias = float(np.max(np.abs(A.AT @ p - mean)))
    thr = delta + z * sigma
    return BiasReport(bias, sigma, thr, bias <= thr)
