"""Reduced-conditional MCMC over decomposable graphs and the scale hyperparameters.

``Sigma`` and ``mu`` are integrated out: the chain moves on ``(g, tau, rho)``
only. Graph moves flip one edge indicator at a time and are scored with the
clique-local normalising-constant ratio; ``tau`` (log scale) and ``rho`` take
Gaussian random-walk Metropolis steps.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields

import numpy as np

from .counts import max_size
from .graph import FlipContext, Graph, _bits, _can_add, _can_delete, _adj_is_chordal, perfect_sequence
from .hiw import (
    LOG_2PI,
    DataSummary,
    HyperParams,
    log_h,
    log_h_ratio_flip,
    posterior_mean_omega,
    posterior_params,
    sample_mu,
    sample_omega,
)
from .priors import GraphPrior, HyperPriorSpec

ACCEPT = "accept"
REJECT = "reject"
ILLEGAL = "illegal"
FAILED = "failed"


class CacheDriftError(AssertionError):
    pass


class ESSWarning(UserWarning):
    pass


@dataclass
class McmcConfig:
    """Chain settings.

    One iteration (sweep) is ``r = p(p-1)/2`` edge attempts followed by a
    ``tau`` step and, for the equicorrelated form, a ``rho`` step. With
    ``update_hyper=False`` the scale matrix stays at its initial value;
    ``update_graph=False`` holds the graph at ``init_graph``.
    """

    burnin: int = 2000
    iterations: int = 20000
    thin: int = 1
    sigma2_tau: float = 0.1
    sigma2_rho: float = 0.05
    hyper: HyperPriorSpec = field(default_factory=HyperPriorSpec)
    prior: GraphPrior | None = None
    delta: float = 5.0
    seed: int | None = None
    init_graph: Graph | None = None
    tau0: float | None = None
    rho0: float = 0.0
    update_hyper: bool = True
    update_graph: bool = True
    tau_jacobian: bool = False
    draw_posterior: bool = False
    check_every: int = 10000
    debug: bool = False

    def __post_init__(self):
        if self.sigma2_tau <= 0 or self.sigma2_rho <= 0:
            raise ValueError("random-walk variances must be positive")
        if self.iterations < 0 or self.burnin < 0 or self.thin < 1:
            raise ValueError("iterations, burnin >= 0 and thin >= 1 required")

    def echo(self) -> dict:
        d = {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if f.name not in ("hyper", "prior", "init_graph")
        }
        d["phi_form"] = self.hyper.phi_form
        d["tau_bound"] = self.hyper.tau_bound
        kind = "uniform" if self.prior is None else getattr(self.prior, "kind", type(self.prior).__name__)
        if kind == "beta":
            kind = f"beta:{self.prior.a},{self.prior.b}"
        d["prior"] = kind
        d["init_graph"] = None if self.init_graph is None else self.init_graph.to_dict()
        return d


class McmcState:
    """Mutable chain state: graph bitmasks, hyperparameters, cached log terms."""

    def __init__(self, data: DataSummary, cfg: McmcConfig, rng: np.random.Generator):
        p = data.p
        self.p = p
        self.data = data
        self.cfg = cfg
        self.rng = rng
        self.prior = cfg.prior if cfg.prior is not None else GraphPrior.uniform(p)
        if self.prior.p != p:
            raise ValueError(f"graph prior is for p={self.prior.p}, data has p={p}")
        g0 = cfg.init_graph if cfg.init_graph is not None else Graph.empty(p)
        if g0.p != p or not _adj_is_chordal(g0.adj):
            raise ValueError("initial graph must be decomposable with matching p")
        self.adj = list(g0.adj)
        self.size = g0.size
        self.tau = float(cfg.tau0) if cfg.tau0 is not None else float(p)
        self.rho = float(cfg.rho0) if cfg.hyper.uses_rho else 0.0
        self.pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
        self.counts = {
            "edge": {ACCEPT: 0, REJECT: 0, ILLEGAL: 0, FAILED: 0},
            "tau": {ACCEPT: 0, REJECT: 0, FAILED: 0},
            "rho": {ACCEPT: 0, REJECT: 0, FAILED: 0},
        }
        self._ratio_cache: dict = {}
        self._set_phi(self._phi(self.tau, self.rho))
        self.log_ml = self.full_log_ml()

    # -- hyperparameters ----------------------------------------------------
    def _phi(self, tau: float, rho: float) -> np.ndarray:
        d = self.data
        return self.cfg.hyper.make_phi(self.p, tau, rho, d.s_y, d.n)

    def _set_phi(self, phi: np.ndarray) -> None:
        self.hp = HyperParams(self.cfg.delta, phi)
        self.pp = posterior_params(self.hp, self.data)
        self._ratio_cache.clear()

    # -- graph views --------------------------------------------------------
    @property
    def graph(self) -> Graph:
        return Graph.from_adjacency(self.adj)

    def sequence(self):
        return perfect_sequence(self.graph)

    def log_ml_for(self, seq, hp: HyperParams) -> float:
        pp = posterior_params(hp, self.data)
        return -(self.data.n - 1) * self.p / 2 * LOG_2PI + log_h(seq, hp) - log_h(seq, pp)

    def full_log_ml(self) -> float:
        return self.log_ml_for(self.sequence(), self.hp)

    def flip_log_ratio(self, i: int, j: int, sep_mask: int) -> float:
        """Log marginal-likelihood ratio (with edge / without edge) for pair ``(i, j)``."""
        key = (sep_mask, i, j)
        val = self._ratio_cache.get(key)
        if val is None:
            sep = tuple(_bits(sep_mask))
            ctx = FlipContext(i, j, tuple(sorted(sep + (i, j))), sep)
            val = log_h_ratio_flip(ctx, self.hp, self.pp)
            self._ratio_cache[key] = val
        return val


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def step_edge(state: McmcState, data: DataSummary | None = None, pick=None, logu=None) -> str:
    """One edge-indicator Metropolis attempt.

    A pair is drawn uniformly from all ``r`` pairs. If flipping it would
    make the graph nondecomposable the attempt is a null move (the chain
    stays put); otherwise the flip is accepted with probability
    ``min(1, marginal-likelihood ratio * prior ratio)``.
    """
    rng = state.rng
    if pick is None:
        pick = int(rng.integers(len(state.pairs)))
    if logu is None:
        logu = math.log(rng.random())
    i, j = state.pairs[pick]
    adj = state.adj
    present = adj[i] >> j & 1
    if present:
        if not _can_delete(adj, i, j):
            state.counts["edge"][ILLEGAL] += 1
            return ILLEGAL
        new_size = state.size - 1
    else:
        if not _can_add(adj, i, j):
            state.counts["edge"][ILLEGAL] += 1
            return ILLEGAL
        new_size = state.size + 1
    try:
        lr = state.flip_log_ratio(i, j, adj[i] & adj[j])
    except np.linalg.LinAlgError:
        state.counts["edge"][FAILED] += 1
        return FAILED
    d_ml = -lr if present else lr
    prior = state.prior
    log_alpha = d_ml + prior.log_prior_size(new_size) - prior.log_prior_size(state.size)
    if logu < log_alpha:
        adj[i] ^= 1 << j
        adj[j] ^= 1 << i
        state.size = new_size
        state.log_ml += d_ml
        if state.cfg.debug and not _adj_is_chordal(adj):
            raise AssertionError("chain left the decomposable graphs")
        state.counts["edge"][ACCEPT] += 1
        return ACCEPT
    state.counts["edge"][REJECT] += 1
    return REJECT


def _hyper_step(state: McmcState, which: str, tau: float, rho: float, log_extra: float) -> str:
    cfg = state.cfg
    if cfg.hyper.log_density(tau, rho, state.p) == -np.inf:
        state.counts[which][REJECT] += 1
        return REJECT
    try:
        hp = HyperParams(cfg.delta, state._phi(tau, rho))
        new_ml = state.log_ml_for(state.sequence(), hp)
    except np.linalg.LinAlgError:
        state.counts[which][FAILED] += 1
        return FAILED
    if math.log(state.rng.random()) < new_ml - state.log_ml + log_extra:
        state.tau, state.rho = tau, rho
        state._set_phi(hp.phi)
        state.log_ml = new_ml
        state.counts[which][ACCEPT] += 1
        return ACCEPT
    state.counts[which][REJECT] += 1
    return REJECT


def step_tau(state: McmcState, data: DataSummary | None = None) -> str:
    """Random walk on ``log tau`` with the graph held fixed.

    The acceptance ratio is the marginal-likelihood ratio times the prior
    ratio; ``tau_jacobian`` adds ``log(tau'/tau)``.
    """
    xi = state.rng.normal(0.0, math.sqrt(state.cfg.sigma2_tau))
    tau = state.tau * math.exp(xi)
    extra = xi if state.cfg.tau_jacobian else 0.0
    return _hyper_step(state, "tau", tau, state.rho, extra)


def step_rho(state: McmcState, data: DataSummary | None = None) -> str:
    if not state.cfg.hyper.uses_rho:
        raise ValueError("rho is only sampled for the equicorrelated form")
    rho = state.rho + state.rng.normal(0.0, math.sqrt(state.cfg.sigma2_rho))
    return _hyper_step(state, "rho", state.tau, rho, 0.0)


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


@dataclass
class ChainOutput:
    p: int
    config: dict
    graphs: list[str]
    sizes: np.ndarray
    taus: np.ndarray
    rhos: np.ndarray
    acceptance: dict
    move_counts: dict
    edge_counts: np.ndarray
    omega_mixture: np.ndarray | None
    init: dict
    max_drift: float = 0.0
    omega_cond_means: np.ndarray | None = None
    sigma_draws: np.ndarray | None = None
    omega_draws: np.ndarray | None = None
    mu_draws: np.ndarray | None = None

    @property
    def n_kept(self) -> int:
        return len(self.graphs)

    def to_dict(self, include_graphs: bool = True) -> dict:
        out = {
            "p": self.p,
            "config": self.config,
            "init": self.init,
            "n_kept": self.n_kept,
            "acceptance": self.acceptance,
            "move_counts": self.move_counts,
            "size_trace": self.sizes.tolist(),
            "tau_trace": self.taus.tolist(),
            "rho_trace": self.rhos.tolist(),
            "max_drift": self.max_drift,
        }
        if include_graphs:
            out["graphs"] = self.graphs
        if self.n_kept:
            out["edge_inclusion"] = edge_inclusion_probs(self).tolist()
            out["omega_mixture"] = self.omega_mixture.tolist()
            out["ess_size"] = ess(self.sizes) if self.n_kept >= 10 else None
        return out


def run_chain(data: DataSummary, cfg: McmcConfig) -> ChainOutput:
    """Run burnin plus ``iterations`` sweeps and collect every ``thin``-th state.

    The mixture estimate of ``E(Omega | y)`` averages the conditional
    posterior mean of ``Omega`` over the kept ``(g, tau, rho)`` iterates.
    """
    rng = np.random.default_rng(cfg.seed)
    state = McmcState(data, cfg, rng)
    p, r = state.p, max_size(state.p)
    init = {
        "graph": state.graph.to_dict(),
        "size": state.size,
        "tau": state.tau,
        "rho": state.rho,
        "log_marginal": state.log_ml,
    }
    graphs, sizes, taus, rhos = [], [], [], []
    edge_counts = np.zeros((p, p))
    mix = np.zeros((p, p))
    cond_means, sig_draws, om_draws, mu_draws = [], [], [], []
    mean_cache: dict = {}
    max_drift = 0.0
    total = cfg.burnin + cfg.iterations
    uses_rho = cfg.hyper.uses_rho
    for it in range(total):
        if r and cfg.update_graph:
            picks = rng.integers(0, r, size=r).tolist()
            logus = np.log(rng.random(r)).tolist()
            for a in range(r):
                step_edge(state, data, picks[a], logus[a])
        if cfg.update_hyper:
            step_tau(state, data)
            if uses_rho:
                step_rho(state, data)
        if cfg.check_every and (it + 1) % cfg.check_every == 0:
            fresh = state.full_log_ml()
            drift = abs(fresh - state.log_ml) / max(1.0, abs(fresh))
            max_drift = max(max_drift, drift)
            if drift > 1e-6:
                raise CacheDriftError(f"iteration {it}: cached log marginal drifted by {drift:.3g}")
            state.log_ml = fresh
        if it < cfg.burnin or (it - cfg.burnin) % cfg.thin:
            continue
        g = state.graph
        graphs.append(g.bitstring())
        sizes.append(state.size)
        taus.append(state.tau)
        rhos.append(state.rho)
        for i, j in g.edges:
            edge_counts[i, j] += 1
        key = (g.edges, state.tau, state.rho)
        seq = None
        cm = mean_cache.get(key)
        if cm is None:
            seq = perfect_sequence(g)
            try:
                cm = posterior_mean_omega(seq, state.pp)
            except np.linalg.LinAlgError as exc:
                raise np.linalg.LinAlgError(f"iteration {it}: {exc}") from exc
            if len(mean_cache) > 4096:
                mean_cache.clear()
            mean_cache[key] = cm
        mix += cm
        if cfg.draw_posterior:
            seq = seq or perfect_sequence(g)
            sig, om = sample_omega(seq, state.pp, rng)
            cond_means.append(cm)
            sig_draws.append(sig)
            om_draws.append(om)
            mu_draws.append(sample_mu(data.ybar, sig, data.n, rng))
    n_kept = len(graphs)
    edge_counts = edge_counts + edge_counts.T
    acceptance = {}
    for move, c in state.counts.items():
        tried = c[ACCEPT] + c[REJECT] + c.get(FAILED, 0)
        acceptance[move] = c[ACCEPT] / tried if tried else None
    draws = cfg.draw_posterior and n_kept
    return ChainOutput(
        p=p,
        config=cfg.echo(),
        graphs=graphs,
        sizes=np.asarray(sizes, dtype=int),
        taus=np.asarray(taus),
        rhos=np.asarray(rhos),
        acceptance=acceptance,
        move_counts={k: dict(v) for k, v in state.counts.items()},
        edge_counts=edge_counts,
        omega_mixture=mix / n_kept if n_kept else None,
        init=init,
        max_drift=max_drift,
        omega_cond_means=np.array(cond_means) if draws else None,
        sigma_draws=np.array(sig_draws) if draws else None,
        omega_draws=np.array(om_draws) if draws else None,
        mu_draws=np.array(mu_draws) if draws else None,
    )


def edge_inclusion_probs(output: ChainOutput) -> np.ndarray:
    """Posterior edge frequencies over kept samples; the diagonal is 1."""
    if output.n_kept < 1:
        raise ValueError("no kept samples")
    out = output.edge_counts / output.n_kept
    np.fill_diagonal(out, 1.0)
    return out


def ess(series) -> float:
    """Effective sample size with Geyer's initial positive sequence truncation.

    A constant series returns ``N`` and an alternating (negatively
    correlated) one is clamped to ``N``; both emit :class:`ESSWarning`.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 10:
        raise ValueError("ESS needs a series of length >= 10")
    x = x - x.mean()
    var = float(np.dot(x, x)) / n
    if var == 0.0:
        warnings.warn("constant series: ESS set to N", ESSWarning, stacklevel=2)
        return float(n)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    rho = acov / acov[0]
    pair_sum = 0.0
    for m in range(n // 2):
        gamma = rho[2 * m] + rho[2 * m + 1] if 2 * m + 1 < n else rho[2 * m]
        if gamma <= 0:
            break
        pair_sum += gamma
    tau = 2.0 * pair_sum - 1.0
    if tau <= 1.0:
        if tau < 1.0:
            warnings.warn("ESS exceeds N (negative autocorrelation); clamped to N", ESSWarning, stacklevel=2)
        return float(n)
    return n / tau
