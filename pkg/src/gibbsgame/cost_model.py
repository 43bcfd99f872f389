"""Distribution-level simulation of hinted rejection sampling plus a query ledger.

Quantum subroutines are never simulated at the gate level.  The simulator
computes exact acceptance probabilities classically, draws from the exact
output law, and charges the analytic query cost of the corresponding quantum
routine to a :class:`QueryLedger`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractViolation, HintViolation
from .poly import AcceptPoly, PolyTable

MODES = ("exact_exp", "poly")
HINT_TOL = 1e-9


@dataclass
class QueryLedger:
    sample_queries: float = 0.0
    update_queries: float = 0.0
    init_queries: float = 0.0
    classical_ops: int = 0
    # bookkeeping, not part of any cost comparison
    samples: int = 0
    proposals: int = 0
    accepted: int = 0
    hint_violations: int = 0

    def charge_sample(self, q: float) -> None:
        self.sample_queries += q

    def charge_update(self, q: float) -> None:
        self.update_queries += q

    def charge_init(self, q: float) -> None:
        self.init_queries += q

    @property
    def total_queries(self) -> float:
        return self.sample_queries + self.update_queries + self.init_queries

    def merge(self, other: "QueryLedger") -> "QueryLedger":
        return QueryLedger(**{k: getattr(self, k) + getattr(other, k) for k in self.__dataclass_fields__})

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class RejectionConfig:
    """Sampler mode, amplification constants and the cost-formula context.

    ``beta`` bounds the l1 norm of the dynamic iterate, ``mn`` is the product
    of the matrix dimensions and ``delta`` the oracle accuracy; all three
    only enter the charged query formulas.
    """

    mode: str = "exact_exp"
    accept_poly: AcceptPoly | None = None
    kappa_amp: float = 1.0
    delta_amp: float = 1e-3
    kappa_test: float = 0.5
    C: float = 16.0
    beta: float = 1.0
    mn: int = 1
    delta: float = 0.05
    table: PolyTable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractViolation(f"unknown rejection mode {self.mode!r}")
        if self.mode == "poly":
            if self.accept_poly is None:
                raise ContractViolation("poly mode needs an accept_poly")
            if self.table is None:
                object.__setattr__(self, "table", _table_for(self.accept_poly))
        if not self.kappa_amp > 0 or not 0 < self.delta_amp < 1:
            raise ContractViolation("need kappa_amp > 0 and delta_amp in (0, 1)")
        if not self.C >= 4 * self.C_u ** 2 / self.C_l ** 2 - 1e-9:
            raise ContractViolation("C must be >= 4 C_u^2 / C_l^2")

    @property
    def C_l(self) -> float:
        return self.kappa_test / math.sqrt(2.0)

    @property
    def C_u(self) -> float:
        return self.kappa_test * math.sqrt(2.0)


_TABLES: dict = {}


def _table_for(ap: AcceptPoly) -> PolyTable:
    key = (ap.B_scale, ap.xi)
    if key not in _TABLES:
        _TABLES[key] = PolyTable(ap)
    return _TABLES[key]


@dataclass(frozen=True)
class Hint:
    """Overestimate q of a Gibbs distribution with normalization estimate Z_tilde.

    ``heavy`` maps indices to their override value; every other index takes
    ``default_light``.  ``rho`` is the closed-form l1 mass of q.
    """

    q: np.ndarray
    rho: float
    Z_tilde: float
    C_quality: float
    k: int
    heavy: dict
    default_light: float
    delta: float
    cdf: np.ndarray = field(repr=False, compare=False, default=None)

    @staticmethod
    def from_parts(n, k, heavy, default_light, Z_tilde, C_quality, delta) -> "Hint":
        q = np.full(n, float(default_light))
        if heavy:
            idx = np.fromiter(heavy.keys(), dtype=np.int64, count=len(heavy))
            q[idx] = np.fromiter(heavy.values(), dtype=np.float64, count=len(heavy))
        rho = float(sum(heavy.values()) + default_light * (n - len(heavy)))
        lo = delta / n
        if np.any(q < lo * (1 - 1e-12)) or np.any(q > 1 + 1e-12):
            raise ContractViolation("hint entries must lie in [delta/n, 1]")
        if not Z_tilde > 0:
            raise ContractViolation("Z_tilde must be positive")
        q.setflags(write=False)
        cdf = np.cumsum(q)
        cdf.setflags(write=False)
        return Hint(q, rho, float(Z_tilde), float(C_quality), int(k), dict(heavy),
                    float(default_light), float(delta), cdf)

    @staticmethod
    def uniform(n: int, Z_tilde: float, C_quality: float = 1.0, delta: float = 0.05) -> "Hint":
        return Hint.from_parts(n, n, {}, 1.0, Z_tilde, C_quality, delta)

    @property
    def n(self) -> int:
        return self.q.size

    def with_Z(self, Z_tilde: float) -> "Hint":
        if not Z_tilde > 0:
            raise ContractViolation("Z_tilde must be positive")
        return replace(self, Z_tilde=float(Z_tilde))


# ---- cost formulas -------------------------------------------------------

def _ceil_log4(x: float) -> int:
    return math.ceil(math.log(x) ** 4)


def sample_cost(rho, C, beta, mn, delta, kappa_amp=1.0) -> float:
    """ceil(kappa sqrt(rho C)) * beta * ceil(ln^4(C m n / delta))."""
    return math.ceil(kappa_amp * math.sqrt(rho * C)) * beta * _ceil_log4(C * mn / delta)


def test_cost(rho, C, beta, mn, delta, n, kappa_amp=1.0) -> float:
    """ceil(kappa sqrt(rho C)) * beta * ceil(ln^4(C m n / (ell delta))) with ell = delta / n."""
    ell = delta / n
    return math.ceil(kappa_amp * math.sqrt(rho * C)) * beta * _ceil_log4(C * mn / (ell * delta))


def maxfind_cost(n, beta, mn, delta, kappa_amp=1.0) -> float:
    """ceil(kappa sqrt(n)) * beta * ceil(ln(m n / delta))."""
    return math.ceil(kappa_amp * math.sqrt(n)) * beta * math.ceil(math.log(mn / delta))


def amplification_cost(alpha, delta_amp, kappa_amp=1.0) -> int:
    return math.ceil(kappa_amp * alpha ** -0.5 * math.log(1.0 / delta_amp))


def init_cost(Delta: int, xi: float) -> float:
    return float(Delta) ** 3 * math.ceil(math.log(Delta / xi))


def _cost_beta(config: RejectionConfig) -> float:
    return max(config.beta, 1.0)


# ---- simulated routines ---------------------------------------------------

def amplified_trial(alpha: float, delta_amp: float, rng: np.random.Generator,
                    ledger: QueryLedger, kappa_amp: float = 1.0) -> bool:
    """Amplitude-amplified success test: succeeds w.p. max(alpha, 1 - delta_amp)."""
    if not alpha > 0 or alpha > 1:
        raise ContractViolation("alpha must lie in (0, 1]")
    ledger.charge_sample(amplification_cost(alpha, delta_amp, kappa_amp))
    p = 1.0 if alpha >= 1.0 else max(alpha, 1.0 - delta_amp)
    return bool(rng.random() < p)


def acceptance_vector(w: np.ndarray, hint: Hint, config: RejectionConfig,
                      ledger: QueryLedger | None = None, strict: bool = True) -> np.ndarray:
    """Per-index acceptance probability a_j of the mode.

    exact_exp: a_j = exp(w_j) / (Z_tilde q_j).  poly: a_j = P(u_j)^2 with
    u_j = (w_j - ln(Z_tilde q_j)) / (2B).
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape != hint.q.shape:
        raise ContractViolation("score vector and hint have different lengths")
    logr = w - np.log(hint.Z_tilde) - np.log(hint.q)
    if ledger is not None:
        ledger.classical_ops += w.size
    if config.mode == "exact_exp":
        a = np.exp(np.minimum(logr, 700.0))
        amax = float(a.max())
        if amax > 1.0 + HINT_TOL:
            if ledger is not None:
                ledger.hint_violations += 1
            if strict:
                j = int(np.argmax(a))
                raise HintViolation(
                    f"acceptance probability {amax:.6g} > 1 at index {j}",
                    {"index": j, "acceptance": amax, "Z_tilde": hint.Z_tilde, "rho": hint.rho})
        return np.minimum(a, 1.0)
    u = logr / (2.0 * config.accept_poly.B_scale)
    bad = (u > 0.0) | (u < -1.0)
    if ledger is not None and np.any(bad):
        ledger.hint_violations += 1
    return config.table(u) ** 2


def output_law(w, hint: Hint, config: RejectionConfig, ledger=None, strict=True):
    """Exact law of the accepted index, proportional to q_j a_j, and the acceptance mass s."""
    a = acceptance_vector(w, hint, config, ledger, strict)
    qa = hint.q * a
    total = float(qa.sum())
    if not total > 0:
        raise HintViolation("acceptance mass is zero", {"Z_tilde": hint.Z_tilde, "rho": hint.rho})
    return qa / total, total / hint.rho


LITERAL_LOOP_MAX = 2048


def _draw_accepted(a: np.ndarray, hint: Hint, s: float, size: int,
                   rng: np.random.Generator, ledger: QueryLedger) -> np.ndarray:
    """Propose/accept loop, run in batches.

    When the expected number of proposals exceeds ``LITERAL_LOOP_MAX`` the
    loop is replaced by its exact equivalent: accepted indices drawn from the
    law q_j a_j and the proposal count from size + NegBin(size, s).
    """
    if size / s > LITERAL_LOOP_MAX:
        qa = np.cumsum(hint.q * a)
        out = np.searchsorted(qa, rng.random(size) * qa[-1], side="right")
        np.minimum(out, qa.size - 1, out=out)
        ledger.proposals += size + int(rng.negative_binomial(size, min(s, 1.0)))
        ledger.accepted += size
        return out.astype(np.int64)
    out = np.empty(size, dtype=np.int64)
    got = 0
    batch = int(min(max(16, math.ceil(2.0 * size / s)), 1 << 20))
    cdf = hint.cdf
    while got < size:
        prop = np.searchsorted(cdf, rng.random(batch) * cdf[-1], side="right")
        np.minimum(prop, cdf.size - 1, out=prop)
        acc = np.flatnonzero(rng.random(batch) < a[prop])
        take = min(size - got, acc.size)
        if take:
            out[got:got + take] = prop[acc[:take]]
            got += take
            ledger.proposals += int(acc[take - 1]) + 1
        else:
            ledger.proposals += batch
    ledger.accepted += size
    return out


def rejection_sample_with_hint(w, hint: Hint, config: RejectionConfig, rng: np.random.Generator,
                               ledger: QueryLedger, size: int | None = None):
    """Propose j ~ q / rho and accept with the mode's probability.

    Returns one index, or an array of ``size`` independent accepted indices
    drawn at the same state.  Each accepted sample is charged the amplified
    query cost; the simulated loop itself runs un-amplified.
    """
    a = acceptance_vector(w, hint, config, ledger)
    s = float(np.dot(hint.q, a)) / hint.rho
    if not s > 0:
        raise HintViolation("acceptance mass is zero", {"Z_tilde": hint.Z_tilde, "rho": hint.rho})
    k = 1 if size is None else int(size)
    out = _draw_accepted(a, hint, s, k, rng, ledger)
    cost = sample_cost(hint.rho, hint.C_quality, _cost_beta(config), config.mn, config.delta,
                       config.kappa_amp)
    ledger.charge_sample(cost * k)
    ledger.samples += k
    return int(out[0]) if size is None else out


def measured_acceptance(w, hint: Hint, config: RejectionConfig, trials: int,
                        rng: np.random.Generator) -> float:
    """Fraction of ``trials`` proposals accepted (before amplification)."""
    a = acceptance_vector(w, hint, config, strict=False)
    cdf = hint.cdf
    prop = np.minimum(np.searchsorted(cdf, rng.random(trials) * cdf[-1], side="right"), cdf.size - 1)
    return float(np.mean(rng.random(trials) < a[prop]))


def test_success_probability(w, hint: Hint, config: RejectionConfig, ledger=None) -> float:
    """min(1, kappa_test sqrt(s)), with s rescaled by 36 in poly mode so that s ~ 1/(R rho)."""
    a = acceptance_vector(w, hint, config, ledger, strict=False)
    s = float(np.dot(hint.q, a)) / hint.rho
    if config.mode == "poly":
        s *= 36.0
    return min(1.0, config.kappa_test * math.sqrt(s))


def _test_charge(hint: Hint, config: RejectionConfig) -> float:
    return test_cost(hint.rho, hint.C_quality, _cost_beta(config), config.mn, config.delta,
                     hint.n, config.kappa_amp)


def test_oracle(w, hint: Hint, config: RejectionConfig, rng: np.random.Generator,
                ledger: QueryLedger) -> bool:
    """Boolean tester whose success probability scales as 1/sqrt(R rho), R = Z_tilde / Z."""
    p = test_success_probability(w, hint, config, ledger)
    ledger.charge_update(_test_charge(hint, config))
    return bool(rng.random() < p)


def test_oracle_repeat(w, hint: Hint, config: RejectionConfig, trials: int,
                       rng: np.random.Generator, ledger: QueryLedger) -> int:
    """Number of successes in ``trials`` independent tester calls at a fixed state."""
    p = test_success_probability(w, hint, config, ledger)
    ledger.charge_update(_test_charge(hint, config) * trials)
    return int(rng.binomial(trials, p))


def charge_init(ledger: QueryLedger, Delta: int, xi: float) -> None:
    """Cost of compiling the degree-Delta polynomial stably."""
    if Delta < 1 or not 0 < xi < 1:
        raise ContractViolation("need Delta >= 1 and xi in (0, 1)")
    ledger.charge_init(init_cost(Delta, xi))
