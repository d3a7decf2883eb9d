import warnings
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest
from scipy import special

from covsel.counts import exact_table
from covsel.graph import Graph, enumerate_decomposable, is_decomposable, perfect_sequence
from covsel.hiw import DataSummary, HyperParams, log_marginal_likelihood, posterior_mean_omega, posterior_params
from covsel.priors import GraphPrior, HyperPriorSpec, log_prior
from covsel.sampler import (
    ACCEPT,
    ILLEGAL,
    ESSWarning,
    McmcConfig,
    McmcState,
    edge_inclusion_probs,
    ess,
    run_chain,
    step_edge,
    step_rho,
    step_tau,
)


def batch_se(x, nb=40):
    x = np.asarray(x, dtype=float)
    m = len(x) // nb
    means = x[: m * nb].reshape(nb, m, *x.shape[1:]).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(nb)


def toy_data(p=3, n=20, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=(n, p))
    y[:, 1] += 0.8 * y[:, 0]
    return DataSummary.from_data(y)


def exact_posterior(data, prior, tau=1.0):
    gs = list(enumerate_decomposable(data.p))
    hp = HyperParams(5.0, tau * np.eye(data.p))
    lw = np.array([log_marginal_likelihood(g, perfect_sequence(g), hp, data) + log_prior(g, prior) for g in gs])
    w = np.exp(lw - lw.max())
    return gs, w / w.sum()


def fixed_cfg(**kw):
    base = dict(burnin=200, iterations=20000, seed=5, update_hyper=False, tau0=1.0)
    base.update(kw)
    return McmcConfig(**base)


class ZeroPrior:
    """Stub prior whose log ratio is always zero."""

    p = 3

    def log_prior_size(self, k):
        return 0.0


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            McmcConfig(sigma2_tau=0.0)
        with pytest.raises(ValueError):
            McmcConfig(thin=0)

    def test_defaults(self):
        cfg = McmcConfig()
        assert cfg.sigma2_tau == 0.1 and cfg.sigma2_rho == 0.05 and cfg.delta == 5.0
        assert not cfg.tau_jacobian


class TestEdgeStep:
    def test_neutral_move_always_accepted(self, monkeypatch):
        data = toy_data()
        state = McmcState(data, fixed_cfg(), np.random.default_rng(0))
        monkeypatch.setattr(state, "flip_log_ratio", lambda i, j, s: 0.0)
        for _ in range(200):
            assert step_edge(state) == ACCEPT
        assert is_decomposable(state.graph)

    def test_illegal_pick_is_null_move(self):
        data = toy_data(p=4)
        cfg = fixed_cfg(init_graph=Graph.chain(4))
        state = McmcState(data, cfg, np.random.default_rng(0))
        # pair (0, 3) is index 2 in row-major order; adding it closes a 4-cycle
        assert state.pairs[2] == (0, 3)
        before = state.graph
        assert step_edge(state, pick=2, logu=-np.inf) == ILLEGAL
        assert state.graph == before

    def test_rejects_nondecomposable_start(self):
        with pytest.raises(ValueError):
            McmcState(toy_data(p=4), fixed_cfg(init_graph=Graph.cycle(4)), np.random.default_rng(0))

    def test_debug_mode(self):
        out = run_chain(toy_data(p=5), fixed_cfg(iterations=200, debug=True, check_every=20))
        assert out.max_drift < 1e-6


class TestHyperSteps:
    def test_rho_stays_in_range(self):
        data = toy_data(p=4)
        cfg = McmcConfig(hyper=HyperPriorSpec("equi"), sigma2_rho=4.0, seed=1)
        state = McmcState(data, cfg, np.random.default_rng(1))
        for _ in range(300):
            step_rho(state)
            assert -1 / 3 < state.rho < 1
        assert state.counts["rho"]["reject"] > 0

    def test_rho_requires_equi(self):
        state = McmcState(toy_data(), McmcConfig(), np.random.default_rng(0))
        with pytest.raises(ValueError):
            step_rho(state)

    def test_tau_bound(self):
        cfg = McmcConfig(hyper=HyperPriorSpec("tauI", tau_bound=3.5), tau0=3.0, sigma2_tau=1.0)
        state = McmcState(toy_data(), cfg, np.random.default_rng(2))
        for _ in range(300):
            step_tau(state)
            assert 0 < state.tau <= 3.5

    @pytest.mark.parametrize("jacobian", [False, True])
    def test_tau_chain_matches_grid(self, jacobian):
        # fixed graph: the log-tau walk targets L(tau) in log tau, or L(tau) tau with the Jacobian
        data = toy_data(p=3, n=30, seed=4)
        g = Graph.chain(3)
        seq = perfect_sequence(g)
        u = np.linspace(-6, 6, 4001)
        ll = np.array([log_marginal_likelihood(g, seq, HyperParams(5.0, np.exp(v) * np.eye(3)), data) for v in u])
        lw = ll + (u if jacobian else 0.0)
        w = np.exp(lw - lw.max())
        w /= w.sum()
        mean_u = float(np.dot(w, u))
        assert -5 < u[np.argmax(w)] < 5
        cfg = McmcConfig(burnin=500, iterations=20000, seed=9, init_graph=g, update_graph=False, tau_jacobian=jacobian, tau0=1.0)
        out = run_chain(data, cfg)
        lt = np.log(out.taus)
        assert abs(lt.mean() - mean_u) < 4 * batch_se(lt)


class TestRunChain:
    def test_enumeration_oracle_uniform(self):
        data = toy_data()
        gs, post = exact_posterior(data, GraphPrior.uniform(3))
        out = run_chain(data, fixed_cfg())
        c = Counter(out.graphs)
        for g, pr in zip(gs, post):
            ind = np.array([s == g.bitstring() for s in out.graphs], dtype=float)
            assert abs(ind.mean() - pr) < 3 * batch_se(ind) + 1e-3
        assert sum(c.values()) == out.n_kept == 20000

    def test_enumeration_oracle_size_prior(self):
        data = toy_data(seed=2)
        prior = GraphPrior.size_based(exact_table(3))
        gs, post = exact_posterior(data, prior)
        out = run_chain(data, fixed_cfg(prior=prior))
        emp = np.array([np.mean([s == g.bitstring() for s in out.graphs]) for g in gs])
        assert 0.5 * np.abs(emp - post).sum() < 0.02

    def test_edge_marginals_match_enumeration(self):
        data = toy_data()
        gs, post = exact_posterior(data, GraphPrior.uniform(3))
        out = run_chain(data, fixed_cfg())
        j_hat = edge_inclusion_probs(out)
        ind = np.array([[int(b) for b in s] for s in out.graphs], dtype=float)
        se = batch_se(ind)
        for col, (a, b) in enumerate([(0, 1), (0, 2), (1, 2)]):
            exact = sum(pr for g, pr in zip(gs, post) if g.has_edge(a, b))
            assert abs(j_hat[a, b] - exact) < 3 * se[col] + 1e-3
        np.testing.assert_array_equal(j_hat, j_hat.T)
        np.testing.assert_array_equal(np.diag(j_hat), 1.0)

    def test_zero_ratio_prior_matches_uniform(self):
        data = toy_data()
        a = run_chain(data, fixed_cfg(iterations=2000))
        b = run_chain(data, fixed_cfg(iterations=2000, prior=ZeroPrior()))
        assert a.graphs == b.graphs
        np.testing.assert_array_equal(a.omega_mixture, b.omega_mixture)

    def test_deterministic(self):
        data = toy_data(p=4)
        cfg = McmcConfig(burnin=50, iterations=300, seed=123, hyper=HyperPriorSpec("equi"), draw_posterior=True)
        a, b = run_chain(data, cfg), run_chain(data, cfg)
        assert a.graphs == b.graphs
        np.testing.assert_array_equal(a.taus, b.taus)
        np.testing.assert_array_equal(a.rhos, b.rhos)
        np.testing.assert_array_equal(a.omega_draws, b.omega_draws)
        assert a.to_dict() == b.to_dict()

    def test_zero_iterations(self):
        out = run_chain(toy_data(), McmcConfig(burnin=0, iterations=0, seed=1))
        assert out.n_kept == 0 and out.omega_mixture is None
        assert out.init["size"] == 0 and out.init["tau"] == 3.0
        with pytest.raises(ValueError):
            edge_inclusion_probs(out)
        assert "edge_inclusion" not in out.to_dict()

    def test_thinning(self):
        out = run_chain(toy_data(), fixed_cfg(burnin=10, iterations=100, thin=7))
        assert out.n_kept == 15

    def test_identical_graphs_give_indicator_matrix(self):
        g = Graph(3, frozenset({(0, 2)}))
        out = run_chain(toy_data(), fixed_cfg(iterations=20, init_graph=g, update_graph=False))
        np.testing.assert_array_equal(edge_inclusion_probs(out), g.adjacency_matrix() + np.eye(3))
        e = run_chain(toy_data(), fixed_cfg(iterations=20, update_graph=False))
        np.testing.assert_array_equal(edge_inclusion_probs(e), np.eye(3))

    def test_size_drifts_up_under_dense_truth(self):
        rng = np.random.default_rng(3)
        p = 6
        sigma = 0.7 * np.ones((p, p)) + 0.3 * np.eye(p)
        y = rng.multivariate_normal(np.zeros(p), sigma, size=100)
        out = run_chain(DataSummary.from_data(y), McmcConfig(burnin=0, iterations=300, seed=1))
        assert out.sizes[-50:].mean() > 10

    def test_mixture_matches_histogram(self):
        data = toy_data(n=30, seed=6)
        cfg = McmcConfig(burnin=200, iterations=20000, seed=4, draw_posterior=True)
        out = run_chain(data, cfg)
        d = out.omega_draws - out.omega_cond_means
        se = batch_se(d)
        diff = np.abs(out.omega_draws.mean(axis=0) - out.omega_mixture)
        assert np.all(diff <= 3 * se + 1e-12)
        np.testing.assert_allclose(out.omega_mixture, out.omega_cond_means.mean(axis=0), rtol=1e-10)
        assert out.mu_draws.shape == (20000, 3)

    def test_single_iterate_complete_graph(self):
        data = toy_data()
        g = Graph.complete(3)
        out = run_chain(data, fixed_cfg(burnin=0, iterations=1, init_graph=g, update_graph=False))
        pp = posterior_params(HyperParams(5.0, np.eye(3)), data)
        np.testing.assert_allclose(out.omega_mixture, (pp.delta + 2) * np.linalg.inv(pp.phi), rtol=1e-12)


class TestEss:
    def test_iid(self):
        x = np.random.default_rng(0).standard_normal(10000)
        assert abs(ess(x) / 10000 - 1) < 0.15

    def test_ar1(self):
        rng = np.random.default_rng(1)
        x = np.empty(10000)
        x[0] = rng.standard_normal()
        e = rng.standard_normal(10000) * np.sqrt(1 - 0.81)
        for t in range(1, 10000):
            x[t] = 0.9 * x[t - 1] + e[t]
        assert abs(ess(x) / (10000 * 0.1 / 1.9) - 1) < 0.25

    def test_constant_flagged(self):
        with pytest.warns(ESSWarning):
            assert ess(np.ones(50)) == 50

    def test_alternating_clamped(self):
        with pytest.warns(ESSWarning):
            assert ess(np.tile([1.0, -1.0], 500)) == 1000

    def test_short_series(self):
        with pytest.raises(ValueError):
            ess(np.arange(5))
