"""Hyper inverse Wishart (HIW) algebra for decomposable Gaussian graphical models.

Conventions
-----------
``A ~ IW(m, delta, Phi)`` has density

    |Phi/2|^(delta/2) / Gamma_m(delta/2) * |A|^(-(delta+m+1)/2) * etr(-Phi A^{-1} / 2)

so ``E(A) = Phi / (delta - m - 1)``. Under ``HIW(g, delta, Phi)`` each clique
or separator block ``Sigma_CC`` is ``IW(|C|, delta + |C| - 1, Phi_CC)``, i.e.
``E(Sigma_CC) = Phi_CC / (delta - 2)``. Everything is kept in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats

from .graph import FlipContext, Graph, PerfectSequence

LOG_PI = math.log(math.pi)
LOG_2 = math.log(2.0)
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class HyperParams:
    """Degrees of freedom ``delta`` and scale matrix ``phi`` of an HIW law."""

    delta: float
    phi: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
            raise ValueError("phi must be a square matrix")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not np.allclose(phi, phi.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(phi).max())):
            raise ValueError("phi must be symmetric")
        phi = 0.5 * (phi + phi.T)
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def p(self) -> int:
        return self.phi.shape[0]


class PosteriorParams(HyperParams):
    """``(delta*, Phi*) = (delta + n - 1, Phi + S_y)``."""

    @property
    def delta_star(self) -> float:
        return self.delta

    @property
    def phi_star(self) -> np.ndarray:
        return self.phi


@dataclass(frozen=True)
class DataSummary:
    n: int
    ybar: np.ndarray
    s_y: np.ndarray

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two observations")

    @property
    def p(self) -> int:
        return self.s_y.shape[0]

    @classmethod
    def from_data(cls, y) -> "DataSummary":
        """Summarise an ``(n, p)`` data matrix: sample mean and centred scatter."""
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        n = y.shape[0]
        if n < 2:
            raise ValueError("need at least two observations")
        ybar = y.mean(axis=0)
        r = y - ybar
        return cls(n, ybar, r.T @ r)


# ---------------------------------------------------------------------------
# scalar building blocks
# ---------------------------------------------------------------------------


def log_multigamma(m: int, alpha: float) -> float:
    """``log Gamma_m(alpha)``; requires ``alpha > (m - 1) / 2``."""
    if m < 0:
        raise ValueError("m must be non-negative")
    if m == 0:
        return 0.0
    if not alpha > (m - 1) / 2:
        raise ValueError(f"log_multigamma undefined for m={m}, alpha={alpha}")
    return m * (m - 1) / 4 * LOG_PI + sum(
        math.lgamma(alpha - i / 2) for i in range(m)
    )


def _chol(a: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("submatrix of phi is not positive definite") from exc


def logdet_pd(a: np.ndarray) -> float:
    if a.shape[0] == 0:
        return 0.0
    return 2.0 * float(np.log(np.diag(_chol(a))).sum())


def _block_term(phi: np.ndarray, idx, delta: float) -> float:
    """log of ``|Phi_AA / 2|^((delta+|A|-1)/2) / Gamma_|A|((delta+|A|-1)/2)``."""
    m = len(idx)
    if m == 0:
        return 0.0
    a = (delta + m - 1) / 2
    sub = phi[np.ix_(idx, idx)]
    return a * (logdet_pd(sub) - m * LOG_2) - log_multigamma(m, a)


def iw_logpdf(a: np.ndarray, delta: float, phi: np.ndarray) -> float:
    """Log density of ``IW(m, delta, phi)`` at ``a`` in the convention above."""
    m = a.shape[0]
    ainv_phi = linalg.solve(a, phi, assume_a="pos")
    return (
        delta / 2 * (logdet_pd(phi) - m * LOG_2)
        - log_multigamma(m, delta / 2)
        - (delta + m + 1) / 2 * logdet_pd(a)
        - 0.5 * float(np.trace(ainv_phi))
    )


# ---------------------------------------------------------------------------
# normalising constants and marginal likelihood
# ---------------------------------------------------------------------------


def log_h(seq: PerfectSequence, params: HyperParams) -> float:
    """Log HIW normalising constant: clique terms minus separator terms."""
    phi, delta = params.phi, params.delta
    total = sum(_block_term(phi, list(c), delta) for c in seq.cliques)
    total -= sum(_block_term(phi, list(s), delta) for s in seq.separators[1:])
    return total


def posterior_params(hp: HyperParams, data: DataSummary) -> PosteriorParams:
    if data.p != hp.p:
        raise ValueError(f"dimension mismatch: phi is {hp.p}, data is {data.p}")
    return PosteriorParams(hp.delta + data.n - 1, hp.phi + data.s_y)


def log_marginal_likelihood(
    g: Graph, seq: PerfectSequence, hp: HyperParams, data: DataSummary
) -> float:
    """``log p(y | delta, Phi, g)`` with ``mu`` and ``Sigma`` integrated out."""
    pp = posterior_params(hp, data)
    return -(data.n - 1) * g.p / 2 * LOG_2PI + log_h(seq, hp) - log_h(seq, pp)


def _schur_pieces(phi: np.ndarray, sep, i: int, j: int) -> tuple[float, float, float]:
    """``log|Phi_DD|S|``, ``log Phi_ii|S``, ``log Phi_jj|S`` via one Cholesky.

    The clique is ordered ``(S, i, j)`` so ``D = {i, j}`` sits in the lower
    right corner of the factor.
    """
    idx = list(sep) + [i, j]
    L = _chol(phi[np.ix_(idx, idx)])
    l_aa, l_ba, l_bb = L[-2, -2], L[-1, -2], L[-1, -1]
    log_aa = 2.0 * math.log(l_aa)
    log_bb = 2.0 * math.log(l_bb)
    return log_aa + log_bb, log_aa, math.log(l_ba * l_ba + l_bb * l_bb)


def _half_ratio(phi: np.ndarray, delta: float, ctx: FlipContext) -> float:
    # log h(g)/h(g') for one (delta, phi); the 2*sqrt(pi) factor cancels in
    # the prior/posterior quotient and is left out
    s = len(ctx.separator)
    log_dd, log_ii, log_jj = _schur_pieces(phi, ctx.separator, ctx.i, ctx.j)
    u = delta + s
    return (
        (u + 1) / 2 * log_dd
        - u / 2 * (log_ii + log_jj)
        + math.lgamma(u / 2)
        - math.lgamma((u + 1) / 2)
    )


def log_h_ratio_flip(ctx: FlipContext, hp: HyperParams, pp: HyperParams) -> float:
    """``log[h(g,d,P)/h(g',d,P) * h(g',d*,P*)/h(g,d*,P*)]`` for ``g' = g - (i,j)``.

    Only the host clique enters, so the cost is one ``|C_q| x |C_q|``
    Cholesky per parameter set.
    """
    return _half_ratio(hp.phi, hp.delta, ctx) - _half_ratio(pp.phi, pp.delta, ctx)


# ---------------------------------------------------------------------------
# posterior functionals and draws
# ---------------------------------------------------------------------------


def posterior_mean_omega(seq: PerfectSequence, pp: HyperParams) -> np.ndarray:
    """``E(Omega | y, g)`` as a clique sum minus a separator sum of scaled inverses."""
    p = pp.p
    out = np.zeros((p, p))
    phi, delta = pp.phi, pp.delta

    def add(idx, sign):
        if not idx:
            return
        idx = list(idx)
        sub = phi[np.ix_(idx, idx)]
        inv = linalg.cho_solve((_chol(sub), True), np.eye(len(idx)))
        out[np.ix_(idx, idx)] += sign * (delta + len(idx) - 1) * inv

    for c in seq.cliques:
        add(c, 1.0)
    for s in seq.separators[1:]:
        add(s, -1.0)
    return 0.5 * (out + out.T)


def _draw_iw(df: float, scale: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    m = scale.shape[0]
    if m == 1:
        # IW(1, df, s) is s / chi2_df
        return np.array([[scale[0, 0] / rng.chisquare(df)]])
    return np.atleast_2d(stats.invwishart.rvs(df=df, scale=scale, random_state=rng))


def sample_sigma(
    seq: PerfectSequence, pp: HyperParams, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``Sigma ~ HIW(g, delta*, Phi*)`` clique by clique along the sequence.

    The first clique block is a plain inverse Wishart draw; each later clique
    ``C = R + S`` draws the Schur complement ``Sigma_RR.S`` and the regression
    ``Sigma_SS^{-1} Sigma_SR`` given the already-fixed ``Sigma_SS``. Entries
    of non-edges are then the unique Markov completion.
    """
    p = pp.p
    phi, delta = pp.phi, pp.delta
    sigma = np.zeros((p, p))
    done: list[int] = []
    for c, s in zip(seq.cliques, seq.separators):
        c = list(c)
        s = list(s)
        r = [v for v in c if v not in s]
        nu = delta + len(c) - 1
        if not s:
            sigma[np.ix_(r, r)] = _draw_iw(nu, phi[np.ix_(r, r)], rng)
        else:
            phi_ss = phi[np.ix_(s, s)]
            phi_sr = phi[np.ix_(s, r)]
            phi_rr = phi[np.ix_(r, r)]
            l_ss = _chol(phi_ss)
            b_mean = linalg.cho_solve((l_ss, True), phi_sr)
            psi = phi_rr - phi_sr.T @ b_mean
            cond = _draw_iw(nu, 0.5 * (psi + psi.T), rng)
            # B ~ MN(b_mean, Phi_SS^{-1}, cond): B = mean + L_ss^{-T} Z L_cond^T
            z = rng.standard_normal((len(s), len(r)))
            b = b_mean + linalg.solve_triangular(l_ss.T, z, lower=False) @ _chol(cond).T
            sig_ss = sigma[np.ix_(s, s)]
            sig_sr = sig_ss @ b
            sigma[np.ix_(s, r)] = sig_sr
            sigma[np.ix_(r, s)] = sig_sr.T
            sigma[np.ix_(r, r)] = cond + b.T @ sig_sr
            # Markov completion against the rest of the history
            other = [v for v in done if v not in s]
            if other:
                reg = linalg.solve(sig_ss, sig_sr, assume_a="pos")
                block = sigma[np.ix_(other, s)] @ reg
                sigma[np.ix_(other, r)] = block
                sigma[np.ix_(r, other)] = block.T
        done.extend(v for v in r)
    return 0.5 * (sigma + sigma.T)


def omega_from_sigma(seq: PerfectSequence, sigma: np.ndarray) -> np.ndarray:
    """``Omega = sum_C [Sigma_CC^{-1}]^V - sum_S [Sigma_SS^{-1}]^V``; exact zeros off the graph."""
    p = sigma.shape[0]
    out = np.zeros((p, p))
    for sets, sign in ((seq.cliques, 1.0), (seq.separators[1:], -1.0)):
        for idx in sets:
            if not idx:
                continue
            idx = list(idx)
            sub = sigma[np.ix_(idx, idx)]
            out[np.ix_(idx, idx)] += sign * linalg.cho_solve((_chol(sub), True), np.eye(len(idx)))
    return 0.5 * (out + out.T)


def sample_omega(
    seq: PerfectSequence, pp: HyperParams, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(Sigma, Omega)`` with ``Omega`` in ``M+(g)`` built without dense inversion."""
    sigma = sample_sigma(seq, pp, rng)
    return sigma, omega_from_sigma(seq, sigma)


def sample_mu(
    ybar: np.ndarray, sigma: np.ndarray, n: int, rng: np.random.Generator
) -> np.ndarray:
    """One draw from ``N(ybar, sigma / n)``."""
    L = _chol(np.atleast_2d(sigma) / n)
    return np.asarray(ybar, dtype=float) + L @ rng.standard_normal(L.shape[0])


def log_iw_constant(m: int, delta: float, phi: np.ndarray) -> float:
    """Log of ``|Phi/2|^(delta/2) / Gamma_m(delta/2)`` (the IW normaliser)."""
    return delta / 2 * (logdet_pd(phi) - m * LOG_2) - log_multigamma(m, delta / 2)


def hiw_logpdf(sigma: np.ndarray, seq: PerfectSequence, params: HyperParams) -> float:
    """Log HIW density at a ``Sigma`` that is Markov with respect to the graph.

    Only the clique and separator blocks of ``sigma`` are read.
    """
    phi, delta = params.phi, params.delta

    def term(idx):
        if not idx:
            return 0.0
        idx = list(idx)
        return iw_logpdf(sigma[np.ix_(idx, idx)], delta + len(idx) - 1, phi[np.ix_(idx, idx)])

    return sum(term(c) for c in seq.cliques) - sum(term(s) for s in seq.separators[1:])


def log_omega_prior_kernel(omega: np.ndarray, delta: float, phi: np.ndarray) -> float:
    """``log(|Omega|^((delta-2)/2) etr(-Omega Phi / 2))``, the HIW law of ``Omega`` up to a constant."""
    return (delta - 2) / 2 * logdet_pd(omega) - 0.5 * float(np.sum(omega * phi))


def log_likelihood_kernel(omega: np.ndarray, s_y: np.ndarray, n: int) -> float:
    """``log(|Omega|^((n-1)/2) etr(-Omega S_y / 2))``, the likelihood with ``mu`` profiled by centring."""
    return (n - 1) / 2 * logdet_pd(omega) - 0.5 * float(np.sum(omega * s_y))


def log_likelihood_centered(sigma: np.ndarray, data: DataSummary) -> float:
    """Centred Gaussian log likelihood ``(2 pi)^(-(n-1)p/2) |Sigma|^(-(n-1)/2) etr(-Sigma^-1 S_y / 2)``."""
    p, n = data.p, data.n
    L = _chol(sigma)
    w = linalg.cho_solve((L, True), data.s_y)
    return -(n - 1) * p / 2 * LOG_2PI - (n - 1) / 2 * logdet_pd(sigma) - 0.5 * float(np.trace(w))
