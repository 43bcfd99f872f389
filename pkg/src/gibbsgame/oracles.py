"""Dynamic Gibbs sampling oracles: exact, uniform-hint and phased-hint.

Every oracle wraps a :class:`GibbsState` (the dynamic iterate and its score
vector) and exposes ``update(i)`` and ``sample(size)``.  ``output_law()``
returns the exact distribution the oracle currently samples from, which is
what verification code compares against ``exact_distribution()``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import cost_model as cm
from .cost_model import Hint, QueryLedger, RejectionConfig
from .errors import ContractViolation, EstimationError, HintViolation
from .game import PayoffMatrix, gibbs_distribution
from .sampler_tree import SamplerTree

SIDES = ("columns_of_neg_AT_x", "rows_of_A_y")
ORACLE_KINDS = ("exact", "uniform-hint", "phased-hint")
HINT_SCALE = 18.0


class GibbsState:
    """Dynamic iterate plus the score vector w it induces.

    side ``columns_of_neg_AT_x``: the tree holds x (dim m), w = -A^T x (dim n).
    side ``rows_of_A_y``: the tree holds y (dim n), w = A y (dim m).
    """

    def __init__(self, matrix: PayoffMatrix, side: str, eta: float, beta_bound: float):
        if side not in SIDES:
            raise ContractViolation(f"unknown side {side!r}")
        self.matrix = matrix
        self.side = side
        if side == SIDES[0]:
            self._rows, self._sign = matrix.A, -1.0
        else:
            self._rows, self._sign = matrix.AT, 1.0
        self.tree = SamplerTree(self._rows.shape[0], eta)
        self.eta = float(eta)
        self.beta_bound = float(beta_bound)
        self.w = np.zeros(self._rows.shape[1])
        self._step = self._sign * self.eta

    @property
    def dim(self) -> int:
        return self.w.size

    @property
    def in_dim(self) -> int:
        return self.tree.m

    def update(self, i: int) -> None:
        self.tree.update(i)
        if self.tree.ell1_norm() > self.beta_bound * (1 + 1e-9) + 1e-12:
            raise ContractViolation("iterate l1 norm exceeds its a-priori bound beta")
        self.w += self._step * self._rows[i]

    def w_from_scratch(self) -> np.ndarray:
        return self._sign * (self.tree.values() @ self._rows)


class GibbsOracle:
    kind = "abstract"

    def __init__(self, state: GibbsState, ledger: QueryLedger | None = None,
                 rng: np.random.Generator | None = None):
        self.state = state
        self.ledger = ledger if ledger is not None else QueryLedger()
        self.rng = rng if rng is not None else np.random.default_rng()

    def exact_distribution(self) -> np.ndarray:
        return gibbs_distribution(self.state.w)

    def output_law(self) -> np.ndarray:
        raise NotImplementedError

    def sample_frozen(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Counts of ``count`` draws from the current output law (no query charges)."""
        return rng.multinomial(count, self.output_law())

    def update(self, i: int) -> None:
        raise NotImplementedError

    def sample(self, size: int | None = None, rng: np.random.Generator | None = None):
        raise NotImplementedError

    def diagnostics(self) -> dict:
        return {}


class ExactOracle(GibbsOracle):
    """Explicit w and a lazily rebuilt cumulative table; O(dim) classical work per update."""

    kind = "exact"

    def __init__(self, state, ledger=None, rng=None):
        super().__init__(state, ledger, rng)
        self._cdf = None

    def update(self, i: int) -> None:
        self.state.update(i)
        self.ledger.classical_ops += self.state.dim
        self.ledger.charge_update(self.state.dim)
        self._cdf = None

    def output_law(self) -> np.ndarray:
        return self.exact_distribution()

    def sample(self, size=None, rng=None):
        rng = rng or self.rng
        if self._cdf is None:
            self._cdf = np.cumsum(self.exact_distribution())
            self.ledger.classical_ops += self.state.dim
        k = 1 if size is None else int(size)
        idx = np.minimum(np.searchsorted(self._cdf, rng.random(k) * self._cdf[-1], side="right"),
                         self._cdf.size - 1)
        self.ledger.charge_sample(k)
        self.ledger.samples += k
        return int(idx[0]) if size is None else idx


def exact_oracle_update(oracle: ExactOracle, i: int) -> None:
    oracle.update(i)


def exact_oracle_sample(oracle: ExactOracle, rng: np.random.Generator) -> int:
    return oracle.sample(rng=rng)


class UniformHintOracle(GibbsOracle):
    """q = 1, acceptance exp(w_j - w_max); maximum finding is charged on each update."""

    kind = "uniform-hint"

    def __init__(self, state, config: RejectionConfig, ledger=None, rng=None):
        super().__init__(state, ledger, rng)
        self.config = config
        if config.mode == "poly":
            cm.charge_init(self.ledger, config.accept_poly.degree, config.accept_poly.xi)

    def _hint(self) -> Hint:
        w_max = float(self.state.w.max())
        self.ledger.classical_ops += self.state.dim
        return Hint.uniform(self.state.dim, math.exp(w_max), 1.0, self.config.delta)

    def update(self, i: int) -> None:
        self.state.update(i)
        self.ledger.classical_ops += self.state.dim
        c = self.config
        self.ledger.charge_update(cm.maxfind_cost(self.state.dim, max(c.beta, 1.0), c.mn, c.delta,
                                                  c.kappa_amp))

    def output_law(self) -> np.ndarray:
        return cm.output_law(self.state.w, self._hint(), self.config, strict=False)[0]

    def sample(self, size=None, rng=None):
        return cm.rejection_sample_with_hint(self.state.w, self._hint(), self.config,
                                             rng or self.rng, self.ledger, size)


def uniform_hint_oracle_sample(oracle: UniformHintOracle, rng: np.random.Generator) -> int:
    return oracle.sample(rng=rng)


# ---- phased hint maintenance ----------------------------------------------

@dataclass
class PhaseSchedule:
    phase_len: int
    tau: int = 0
    within: int = 0

    @staticmethod
    def for_eta(eta: float) -> "PhaseSchedule":
        return PhaseSchedule(int(math.ceil(1.0 / eta - 1e-12)))

    def advance(self) -> bool:
        """Count one update; True when a phase just ended."""
        self.within += 1
        if self.within == self.phase_len:
            self.tau += self.phase_len
            self.within = 0
            return True
        return False


def choose_k(n: int, eta: float, m: int, alpha: float, eps: float, c_k: float = 1.0) -> int:
    """clamp(ceil(c_k / (eta ln(mn/(alpha eps)))), 18, n)."""
    if min(n, m) < 1 or not (eta > 0 and alpha > 0 and eps > 0):
        raise ContractViolation("choose_k needs positive parameters")
    raw = math.ceil(c_k / (eta * math.log(m * n / (alpha * eps))))
    return int(min(max(raw, 18), n))


def _clamp(v, lo):
    return min(max(v, lo), 1.0)


def hint_sample_count(k: int, n: int, eta: float, T_max: int, alpha: float, c_N: float = 48.0) -> int:
    return int(math.ceil(c_N * k * math.log(max(n * eta * T_max / alpha, math.e))))


def hint_from_empirical(counts: np.ndarray, k: int, delta: float, Z_tilde: float,
                        C: float) -> Hint:
    """q_j = clamp(18 qt_j) on the heavy set {qt_j >= 1/(2k)}, clamp(18/k) elsewhere."""
    n = counts.size
    N = int(counts.sum())
    lo = delta / n
    qt = counts / N
    heavy_idx = np.flatnonzero(qt >= 1.0 / (2 * k))
    heavy = {int(j): _clamp(HINT_SCALE * qt[j], lo) for j in heavy_idx}
    light = _clamp(HINT_SCALE / k, lo)
    return Hint.from_parts(n, k, heavy, light, Z_tilde, C, delta)


def build_hint(prev_oracle: GibbsOracle, k: int, alpha: float, delta: float,
               rng: np.random.Generator, ledger: QueryLedger | None = None, *,
               c_N: float = 48.0, T_max: int | None = None, eta: float | None = None,
               Z_tilde: float = 1.0, C: float = 16.0, per_sample_cost: float = 0.0) -> Hint:
    """Upscaled empirical distribution of N draws from ``prev_oracle``.

    N = ceil(c_N k ln(n eta T / alpha)).  Z_tilde of the returned hint is a
    placeholder until the normalization is estimated.
    """
    if delta > 1.0 / (16 * k) + 1e-15:
        raise ContractViolation(f"hint construction needs delta <= 1/(16k) = {1 / (16 * k):.4g}")
    n = prev_oracle.state.dim
    eta = prev_oracle.state.eta if eta is None else eta
    T_max = int(round(prev_oracle.state.beta_bound / eta)) if T_max is None else T_max
    N = hint_sample_count(k, n, eta, T_max, alpha, c_N)
    counts = prev_oracle.sample_frozen(N, rng)
    if ledger is not None:
        ledger.classical_ops += n
        ledger.charge_update(per_sample_cost * N)
    return hint_from_empirical(counts, k, delta, Z_tilde, C)


def normalization_test_count(eta_T: float, alpha: float, C: float, rho: float, C_l: float) -> int:
    """ceil(27 ln(4 ceil(eta T) / alpha) * 3 sqrt(C rho) / C_l)."""
    return int(math.ceil(27.0 * math.log(4 * math.ceil(eta_T - 1e-12) / alpha)
                         * 3.0 * math.sqrt(C * rho) / C_l))


@dataclass(frozen=True)
class NormalizationEstimate:
    Z_tilde: float
    Z_tilde0: float
    R_hat0: float
    R_low: float
    successes: int
    trials: int


def estimate_normalization(w: np.ndarray, hint: Hint, Z_tilde_prev: float, config: RejectionConfig,
                           rng: np.random.Generator, ledger: QueryLedger, *, eta_T: float,
                           alpha: float, charge: bool = True) -> NormalizationEstimate:
    """Refine Z_tilde from the success count of N tester calls run at Z_tilde0 = 3 Z_tilde_prev.

    S/N estimates p ~ 1/sqrt(R0 rho).  The upper confidence value 3S/(2N) of p
    yields the lower value R_low = C_l^2 / (rho (3S/(2N))^2) of R0, and
    Z_tilde = Z_tilde0 / R_low then lies in [Z, (4 C_u^2 / C_l^2) Z] whenever
    S is within its Chernoff window.
    """
    Z0 = 3.0 * Z_tilde_prev
    h0 = hint.with_Z(Z0)
    N = normalization_test_count(eta_T, alpha, hint.C_quality, hint.rho, config.C_l)
    scratch = ledger if charge else QueryLedger()
    S = cm.test_oracle_repeat(w, h0, config, N, rng, scratch)
    if not charge:
        ledger.classical_ops += scratch.classical_ops
    if S == 0:
        raise EstimationError(f"normalization tester had 0 successes in {N} trials")
    p_hat = S / N
    R_hat0 = (config.kappa_test / p_hat) ** 2 / hint.rho
    R_low = config.C_l ** 2 / (hint.rho * (1.5 * p_hat) ** 2)
    return NormalizationEstimate(Z0 / R_low, Z0, R_hat0, R_low, int(S), int(N))


@dataclass
class PhasedConfig:
    k: int
    alpha: float
    delta: float
    eta: float
    T_max: int
    c_N: float = 48.0
    charge: str = "amortized"    # or "per-call"
    verify: bool = False
    acceptance_trials: int = 0   # measured acceptance per phase (verification only)


class PhasedHintOracle(GibbsOracle):
    """Hint rebuilt once per phase of ceil(1/eta) updates."""

    kind = "phased-hint"

    def __init__(self, state: GibbsState, config: RejectionConfig, pconfig: PhasedConfig,
                 ledger=None, rng=None):
        super().__init__(state, ledger, rng)
        if pconfig.charge not in ("amortized", "per-call"):
            raise ContractViolation(f"unknown charging mode {pconfig.charge!r}")
        if pconfig.delta > 1.0 / (16 * pconfig.k) + 1e-15:
            raise ContractViolation(
                f"phased oracle needs delta <= 1/(16k) = {1 / (16 * pconfig.k):.4g}, got {pconfig.delta}")
        if state.tree.ell1_norm() != 0:
            raise ContractViolation("phased oracle must start at the zero iterate")
        self.config = config
        self.pconfig = pconfig
        self.schedule = PhaseSchedule.for_eta(pconfig.eta)
        self.phase_log: list[dict] = []
        self.phase_index = 0
        self.max_phase_ratios = (1.0, 1.0)
        if config.mode == "poly":
            cm.charge_init(self.ledger, config.accept_poly.degree, config.accept_poly.xi)
        n = state.dim
        # bootstrap at x = 0: Z = n, empirical distribution exactly uniform
        counts = np.ones(n, dtype=np.int64)
        self.hint = hint_from_empirical(counts, pconfig.k, pconfig.delta, float(n), config.C)
        self._start_phase(None)

    # -- cost bookkeeping
    def _sample_cost(self, hint: Hint) -> float:
        c = self.config
        return cm.sample_cost(hint.rho, hint.C_quality, max(c.beta, 1.0), c.mn, c.delta, c.kappa_amp)

    def amortized_update_cost(self) -> float:
        """T_samp * k * eta * ln(n eta T / alpha)."""
        p = self.pconfig
        log_term = math.log(max(self.state.dim * p.eta * p.T_max / p.alpha, math.e))
        return self._sample_cost(self.hint) * p.k * p.eta * log_term

    # -- phase bookkeeping
    def _start_phase(self, est: NormalizationEstimate | None) -> None:
        w = self.state.w
        rec = {
            "phase": self.phase_index,
            "tau": self.schedule.tau,
            "rho": self.hint.rho,
            "rho_bound": HINT_SCALE + HINT_SCALE * self.state.dim / self.pconfig.k + self.pconfig.delta,
            "Z_tilde": self.hint.Z_tilde,
            "heavy_size": len(self.hint.heavy),
            "k": self.pconfig.k,
        }
        if est is not None:
            rec.update(R_hat0=est.R_hat0, successes=est.successes, test_trials=est.trials)
        w_true = self.state.w_from_scratch() if self.pconfig.verify else w
        logZ = float(logsumexp(w_true))
        rec["Z_true"] = math.exp(logZ)
        rec["R"] = math.exp(math.log(self.hint.Z_tilde) - logZ)
        rec["acceptance_mass"] = cm.output_law(w, self.hint, self.config, strict=False)[1]
        self.ledger.classical_ops += 2 * self.state.dim
        if self.pconfig.verify:
            self._logZ_tau = logZ
            self._logp_tau = w_true - logZ
            self._dominated = bool(np.all(self.hint.q >= np.exp(self._logp_tau) - 1e-12))
        if self.pconfig.acceptance_trials:
            t = self.pconfig.acceptance_trials
            rate = cm.measured_acceptance(w, self.hint, self.config, t, self.rng)
            rec["measured_acceptance"] = rate
            rec["acceptance_sigma"] = math.sqrt(max(rate * (1 - rate), 1.0 / t) / t)
        self.phase_log.append(rec)

    def _verify_step(self) -> None:
        w_true = self.state.w_from_scratch()
        logZ = float(logsumexp(w_true))
        logp = w_true - logZ
        z_ratio = math.exp(abs(logZ - self._logZ_tau))
        p_ratio = float(np.exp(np.max(np.abs(logp - self._logp_tau))))
        self.max_phase_ratios = (max(self.max_phase_ratios[0], z_ratio), max(self.max_phase_ratios[1], p_ratio))
        if z_ratio > 3.0 or p_ratio > 9.0:
            raise AssertionError(
                f"in-phase stability violated at phase {self.phase_index}, offset "
                f"{self.schedule.within}: Z ratio {z_ratio:.4f}, p ratio {p_ratio:.4f}")
        if np.any(self.hint.q < np.exp(logp) - 1e-12):
            self._dominated = False

    def _close_phase(self) -> None:
        rec = self.phase_log[-1]
        rec["length"] = self.schedule.phase_len
        if self.pconfig.verify:
            rec["dominated"] = self._dominated

    def _rebuild(self) -> None:
        p = self.pconfig
        per_call = p.charge == "per-call"
        old = self.hint
        try:
            new = build_hint(self, p.k, p.alpha, p.delta, self.rng, self.ledger, c_N=p.c_N,
                             T_max=p.T_max, eta=p.eta, Z_tilde=old.Z_tilde, C=self.config.C,
                             per_sample_cost=self._sample_cost(old) if per_call else 0.0)
            est = estimate_normalization(self.state.w, new, old.Z_tilde, self.config, self.rng,
                                         self.ledger, eta_T=p.eta * p.T_max, alpha=p.alpha,
                                         charge=per_call)
        except HintViolation as exc:
            exc.diagnostics.update(phase=self.phase_index, tau=self.schedule.tau)
            raise
        self.hint = new.with_Z(est.Z_tilde)
        self.phase_index += 1
        self._start_phase(est)

    # -- oracle interface
    def update(self, i: int) -> None:
        self.state.update(i)
        self.ledger.classical_ops += self.state.dim
        if self.pconfig.charge == "amortized":
            self.ledger.charge_update(self.amortized_update_cost())
        if self.pconfig.verify:
            self._verify_step()
        if self.schedule.advance():
            self._close_phase()
            self._rebuild()

    def output_law(self) -> np.ndarray:
        return cm.output_law(self.state.w, self.hint, self.config, strict=False)[0]

    def sample_frozen(self, count, rng):
        law, _ = cm.output_law(self.state.w, self.hint, self.config, self.ledger,
                               strict=self.config.mode == "exact_exp")
        return rng.multinomial(count, law)

    def sample(self, size=None, rng=None):
        try:
            return cm.rejection_sample_with_hint(self.state.w, self.hint, self.config,
                                                 rng or self.rng, self.ledger, size)
        except HintViolation as exc:
            exc.diagnostics.update(phase=self.phase_index, tau=self.schedule.tau,
                                   within=self.schedule.within)
            raise

    def diagnostics(self) -> dict:
        rhos = [r["rho"] for r in self.phase_log]
        acc = [r["acceptance_mass"] for r in self.phase_log if "acceptance_mass" in r]
        return {"phases": len(self.phase_log), "k": self.pconfig.k,
                "mean_rho": float(np.mean(rhos)) if rhos else float("nan"),
                "mean_acceptance": float(np.mean(acc)) if acc else float("nan")}


def make_oracle(kind: str, matrix: PayoffMatrix, side: str, *, eta: float, T_max: int,
                config: RejectionConfig | None = None, pconfig: PhasedConfig | None = None,
                ledger: QueryLedger | None = None, rng: np.random.Generator | None = None):
    state = GibbsState(matrix, side, eta, eta * T_max)
    if kind == "exact":
        return ExactOracle(state, ledger, rng)
    if kind == "uniform-hint":
        return UniformHintOracle(state, config or RejectionConfig(), ledger, rng)
    if kind == "phased-hint":
        if pconfig is None:
            raise ContractViolation("phased oracle needs a PhasedConfig")
        return PhasedHintOracle(state, config or RejectionConfig(), pconfig, ledger, rng)
    raise ContractViolation(f"unknown oracle kind {kind!r}; expected one of {ORACLE_KINDS}")


class PerturbedOracle(GibbsOracle):
    """Deliberately biased wrapper: moves total-variation mass ``tv`` onto the least likely index.

    The output law is (1 - t) p + t e_a with a = argmin p and t = tv / (1 - p_a),
    so its TV distance from the wrapped oracle's law is exactly ``tv``.
    Used as a negative control for fidelity and bias checks.
    """

    kind = "perturbed"

    def __init__(self, base: GibbsOracle, tv: float):
        super().__init__(base.state, base.ledger, base.rng)
        self.base = base
        self.tv = float(tv)

    def output_law(self) -> np.ndarray:
        p = self.base.output_law()
        a = int(np.argmin(p))
        t = min(self.tv / (1.0 - p[a]), 1.0)
        out = (1.0 - t) * p
        out[a] += t
        return out

    def update(self, i: int) -> None:
        self.base.update(i)

    def sample(self, size=None, rng=None):
        rng = rng or self.rng
        k = 1 if size is None else int(size)
        idx = rng.choice(self.state.dim, size=k, p=self.output_law())
        return int(idx[0]) if size is None else idx
