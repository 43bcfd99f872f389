import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy import stats

from gibbsgame import oracles as orc
from gibbsgame.cost_model import QueryLedger, RejectionConfig
from gibbsgame.errors import ContractViolation, HintViolation
from gibbsgame.game import gibbs_distribution, random_game


def tv(a, b):
    return 0.5 * np.abs(np.asarray(a) - np.asarray(b)).sum()


def exact_oracle(m=16, n=16, eta=0.1, T=100, seed=0):
    A = random_game(m, n, "uniform", seed)
    st = orc.GibbsState(A, orc.SIDES[0], eta, eta * T)
    return orc.ExactOracle(st, QueryLedger(), np.random.default_rng(seed))


def stub_oracle(p, eta=0.1, beta=4.0):
    p = np.asarray(p, dtype=float)
    return SimpleNamespace(state=SimpleNamespace(dim=p.size, eta=eta, beta_bound=beta),
                           sample_frozen=lambda N, rng: rng.multinomial(N, p))


def test_state_sides():
    A = random_game(3, 5, "uniform", 1)
    col = orc.GibbsState(A, orc.SIDES[0], 0.5, 10)
    row = orc.GibbsState(A, orc.SIDES[1], 0.5, 10)
    assert (col.dim, col.in_dim, row.dim, row.in_dim) == (5, 3, 3, 5)
    col.update(2)
    row.update(4)
    np.testing.assert_allclose(col.w, -0.5 * A.A[2])
    np.testing.assert_allclose(row.w, 0.5 * A.A[:, 4])
    with pytest.raises(ContractViolation):
        orc.GibbsState(A, "diagonal", 0.5, 10)


def test_state_beta_bound():
    st = orc.GibbsState(random_game(2, 2, "sign", 0), orc.SIDES[0], 0.5, 1.0)
    st.update(0)
    st.update(1)
    with pytest.raises(ContractViolation):
        st.update(0)


def test_exact_oracle_fresh_is_uniform():
    o = exact_oracle()
    draws = o.sample(100_000)
    assert tv(np.bincount(draws, minlength=16) / 1e5, np.full(16, 1 / 16)) <= 0.01


def test_exact_oracle_tracks_w_and_law():
    o = exact_oracle(eta=0.2, T=300)
    rng = np.random.default_rng(1)
    for i in rng.integers(0, 16, 200):
        o.update(int(i))
    assert np.max(np.abs(o.state.w - o.state.w_from_scratch())) <= 1e-9
    counts = np.bincount(o.sample(100_000), minlength=16)
    p = gibbs_distribution(o.state.w_from_scratch())
    assert stats.chisquare(counts, 1e5 * p).pvalue > 0.001
    assert o.ledger.classical_ops >= 200 * 16
    with pytest.raises(ContractViolation):
        o.update(16)


def test_uniform_hint_constant_w_accepts_all():
    o = orc.UniformHintOracle(orc.GibbsState(random_game(4, 8, "sign", 0), orc.SIDES[0], 0.1, 5),
                              RejectionConfig(), QueryLedger(), np.random.default_rng(0))
    o.sample(1000)
    assert o.ledger.proposals == 1000


def test_uniform_hint_distribution():
    A = random_game(16, 16, "uniform", 2)
    o = orc.UniformHintOracle(orc.GibbsState(A, orc.SIDES[0], 0.3, 30), RejectionConfig(),
                              QueryLedger(), np.random.default_rng(2))
    for i in np.random.default_rng(3).integers(0, 16, 60):
        o.update(int(i))
    counts = np.bincount(o.sample(100_000), minlength=16)
    assert tv(counts / 1e5, o.exact_distribution()) <= 0.01


def test_uniform_hint_charge_scales_sqrt_n():
    def charge(n):
        cfg = RejectionConfig(beta=5.0, mn=1 << 20, delta=0.01)
        o = orc.UniformHintOracle(orc.GibbsState(random_game(2, n, "sign", 0), orc.SIDES[0], 0.1, 50),
                                  cfg, QueryLedger(), np.random.default_rng(0))
        o.sample()
        return o.ledger.sample_queries
    assert abs(charge(512) / charge(256) - math.sqrt(2)) <= 0.03


def test_build_hint_concentrated():
    n, k = 32, 8
    p = np.full(n, 1e-6)
    p[5] = 1 - p.sum() + 1e-6
    hits = 0
    for s in range(100):
        h = orc.build_hint(stub_oracle(p), k, 0.1, 0.005, np.random.default_rng(s))
        hits += 5 in h.heavy and h.q[5] == 1.0
    assert hits >= 95


def test_build_hint_uniform():
    n, k = 64, 16
    for s in range(20):
        h = orc.build_hint(stub_oracle(np.full(n, 1 / n)), k, 0.1, 1 / 256, np.random.default_rng(s))
        assert not h.heavy
        assert np.all(h.q == 1.0) and h.rho == 64


def test_build_hint_invariants_and_precondition():
    rng = np.random.default_rng(4)
    for s in range(20):
        n = int(rng.integers(20, 80))
        k = int(rng.integers(18, n + 1))
        delta = 1 / (16 * k)
        p = rng.dirichlet(np.full(n, 0.3))
        h = orc.build_hint(stub_oracle(p), k, 0.1, delta, np.random.default_rng(s))
        closed = sum(h.heavy.values()) + h.default_light * (n - len(h.heavy))
        assert abs(h.rho - closed) <= 1e-9 * closed
        assert abs(h.rho - h.q.sum()) <= 1e-9 * h.rho
        assert np.all(h.q >= delta / n) and np.all(h.q <= 1.0)
        assert h.rho <= 18 + 18 * n / k + delta
    with pytest.raises(ContractViolation):
        orc.build_hint(stub_oracle(np.full(4, 0.25)), 8, 0.1, 0.01, rng)


def test_normalization_count_formula():
    C_l = 0.5 / math.sqrt(2)
    N = orc.normalization_test_count(40.0, 0.1, 16.0, 64.0, C_l)
    assert N == math.ceil(27 * math.log(1600) * 3 * 32 / C_l)


def _exact_q_hint(w):
    p = gibbs_distribution(w)
    from gibbsgame.cost_model import Hint
    return Hint.from_parts(p.size, p.size, dict(enumerate(p)), 1.0, 1.0, 16.0, 1e-3 * p.min() * p.size)


def test_estimate_normalization_static():
    w = np.random.default_rng(5).normal(size=20)
    Z = np.exp(w).sum()
    h = _exact_q_hint(w)
    ok = 0
    for s in range(100):
        est = orc.estimate_normalization(w, h, Z, RejectionConfig(), np.random.default_rng(s),
                                         QueryLedger(), eta_T=40.0, alpha=0.1)
        ok += Z <= est.Z_tilde <= 16 * Z
    assert ok >= 95


def test_estimate_normalization_planted_R():
    w = np.random.default_rng(6).normal(size=20)
    Z = np.exp(w).sum()
    h = _exact_q_hint(w)
    ok = 0
    for s in range(100):
        est = orc.estimate_normalization(w, h, 3 * Z, RejectionConfig(), np.random.default_rng(s),
                                         QueryLedger(), eta_T=40.0, alpha=0.1)
        assert est.Z_tilde0 == pytest.approx(9 * Z)
        ok += 9 / 16 <= est.R_hat0 <= 9 * 16
    assert ok >= 95


def test_choose_k():
    # mn / (alpha eps) = 1e6
    assert orc.choose_k(1000, 0.01, 100, 0.1, 1.0) == 18
    assert math.ceil(1 / (0.01 * math.log(1e6))) == 8
    assert orc.choose_k(10, 1e-4, 10, 0.1, 0.1) == 10
    assert orc.choose_k(10_000, 1e-4, 100, 0.1, 0.1) == math.ceil(1 / (1e-4 * math.log(1e4 * 100 / 0.01)))


def phased(m=16, n=16, eta=0.1, T=200, seed=0, verify=True, k=None, delta=None, mode="exact_exp"):
    A = random_game(m, n, "uniform", seed)
    k = k or min(18, n)
    delta = delta if delta is not None else min(eta, 1 / (16 * k))
    pc = orc.PhasedConfig(k, 0.1, delta, eta, T, verify=verify)
    cfg = RejectionConfig(beta=eta * T, mn=m * n, delta=delta)
    st = orc.GibbsState(A, orc.SIDES[0], eta, eta * T)
    return orc.PhasedHintOracle(st, cfg, pc, QueryLedger(), np.random.default_rng(seed))


def test_phase_boundaries_every_ceil_inv_eta():
    o = phased(eta=0.1)
    assert o.schedule.phase_len == 10
    rng = np.random.default_rng(0)
    for i in rng.integers(0, 16, 95):
        o.sample(2)
        o.update(int(i))
    assert [r["tau"] for r in o.phase_log] == list(range(0, 100, 10))
    assert o.schedule.within == 5
    assert all(r["dominated"] for r in o.phase_log[:-1])
    assert o.max_phase_ratios[0] <= 3 and o.max_phase_ratios[1] <= 9


def test_phase_bootstrap():
    o = phased()
    r = o.phase_log[0]
    assert r["Z_tilde"] == 16 and r["R"] == pytest.approx(1.0)


def test_phased_precondition():
    with pytest.raises(ContractViolation):
        phased(delta=0.01, k=16)


def test_phased_matches_exact_stream():
    A = random_game(16, 16, "uniform", 7)
    eta, T = 0.05, 400
    pc = orc.PhasedConfig(16, 0.1, 1 / 256, eta, T)
    ph = orc.PhasedHintOracle(orc.GibbsState(A, orc.SIDES[0], eta, eta * T),
                              RejectionConfig(beta=eta * T, mn=256, delta=1 / 256), pc,
                              QueryLedger(), np.random.default_rng(1))
    ex = orc.ExactOracle(orc.GibbsState(A, orc.SIDES[0], eta, eta * T), QueryLedger(),
                         np.random.default_rng(2))
    rng = np.random.default_rng(3)
    a, b = np.zeros(16), np.zeros(16)
    for t, i in enumerate(rng.integers(0, 16, 300)):
        if t % 60 == 0:
            a += np.bincount(ph.sample(4000), minlength=16)
            b += np.bincount(ex.sample(4000), minlength=16)
        ph.update(int(i))
        ex.update(int(i))
    assert stats.chi2_contingency(np.vstack([a, b]))[1] > 0.001


def test_hint_violation_carries_phase():
    o = phased()
    o.hint = o.hint.with_Z(1e-3)
    with pytest.raises(HintViolation) as info:
        o.sample()
    assert info.value.diagnostics["phase"] == 0


def test_perturbed_oracle_tv():
    o = exact_oracle()
    for i in range(10):
        o.update(i)
    bad = orc.PerturbedOracle(o, 0.1)
    assert tv(bad.output_law(), o.output_law()) == pytest.approx(0.1, abs=1e-12)


def test_make_oracle_kinds():
    A = random_game(4, 4, "sign", 0)
    with pytest.raises(ContractViolation):
        orc.make_oracle("psychic", A, orc.SIDES[0], eta=0.1, T_max=10)
    with pytest.raises(ContractViolation):
        orc.make_oracle("phased-hint", A, orc.SIDES[0], eta=0.1, T_max=10)
    assert orc.make_oracle("exact", A, orc.SIDES[1], eta=0.1, T_max=10).kind == "exact"
