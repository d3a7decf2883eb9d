"""Priors on decomposable graphs and on the scale-matrix hyperparameters."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, gammaln

from .counts import CountTable, max_size
from .graph import Graph

UNIFORM = "uniform"
SIZE = "size"
BETA = "beta"

PHI_FORMS = ("tauI", "equi", "tauS")


def _log_binom(n: int, k: int) -> float:
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


@dataclass(frozen=True)
class GraphPrior:
    """Prior over decomposable graphs on ``p`` vertices.

    ``uniform`` gives every decomposable graph equal mass. ``size`` gives
    every size equal mass and splits it evenly over graphs of that size.
    ``beta`` puts a beta-binomial(a, b) law on the size instead; ``a = b = 1``
    is the size prior. The non-uniform kinds need a count table.
    """

    kind: str
    p: int
    counts: CountTable | None = None
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in (UNIFORM, SIZE, BETA):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.counts is not None and self.counts.p != self.p:
            raise ValueError(f"count table is for p={self.counts.p}, prior for p={self.p}")
        if self.kind != UNIFORM and self.counts is None:
            raise ValueError(f"{self.kind} prior needs a count table")
        if self.a <= 0 or self.b <= 0:
            raise ValueError("beta parameters must be positive")

    @classmethod
    def uniform(cls, p: int, counts: CountTable | None = None) -> "GraphPrior":
        return cls(UNIFORM, p, counts)

    @classmethod
    def size_based(cls, counts: CountTable) -> "GraphPrior":
        return cls(SIZE, counts.p, counts)

    @classmethod
    def beta_binomial(cls, counts: CountTable, a: float, b: float) -> "GraphPrior":
        return cls(BETA, counts.p, counts, a, b)

    @property
    def r(self) -> int:
        return max_size(self.p)

    def log_size_mass(self, k: int) -> float:
        """``log p(size = k)`` for the size-driven kinds."""
        r = self.r
        if self.kind == SIZE:
            return -math.log(r + 1)
        if self.kind == BETA:
            return _log_binom(r, k) + float(
                betaln(self.a + k, r - k + self.b) - betaln(self.a, self.b)
            )
        raise ValueError("uniform prior has no closed-form size mass without counts")

    def log_prior_size(self, k: int) -> float:
        """``log p(g)`` for any graph of size ``k`` (uniform kind: 0)."""
        if not 0 <= k <= self.r:
            raise ValueError(f"size {k} out of range 0..{self.r}")
        if self.kind == UNIFORM:
            return 0.0
        return self.log_size_mass(k) - self.counts.log_count(k)


def log_prior(g: Graph, prior: GraphPrior) -> float:
    """``log p(g)``, exact up to a constant that depends only on the prior kind."""
    if g.p != prior.p:
        raise ValueError(f"graph has p={g.p}, prior is for p={prior.p}")
    return prior.log_prior_size(g.size)


def log_prior_ratio(g_new: Graph, g_old: Graph, prior: GraphPrior) -> float:
    return log_prior(g_new, prior) - log_prior(g_old, prior)


def size_distribution(p: int, prior: GraphPrior) -> np.ndarray:
    """Prior probabilities of sizes ``0..r``."""
    if p != prior.p:
        raise ValueError(f"prior is for p={prior.p}")
    r = max_size(p)
    if prior.kind == UNIFORM:
        if prior.counts is None:
            raise ValueError("uniform size distribution needs a count table")
        logs = prior.counts.log_counts
    else:
        logs = np.array([prior.log_size_mass(k) for k in range(r + 1)])
    w = np.exp(logs - logs.max())
    return w / w.sum()


@dataclass(frozen=True)
class HyperPriorSpec:
    """Form of ``Phi`` and the flat priors on its parameters.

    ``tauI``: ``Phi = tau I``; ``equi``: ``Phi = tau (rho J + (1 - rho) I)``;
    ``tauS``: ``Phi = tau S_y / (n - 1)``. ``tau ~ U[0, tau_bound]`` and, for
    ``equi``, ``rho ~ U(-1/(p-1), 1)``.
    """

    phi_form: str = "tauI"
    tau_bound: float = 1e10

    def __post_init__(self):
        if self.phi_form not in PHI_FORMS:
            raise ValueError(f"phi_form must be one of {PHI_FORMS}, got {self.phi_form!r}")

    @property
    def uses_rho(self) -> bool:
        return self.phi_form == "equi"

    @staticmethod
    def rho_range(p: int) -> tuple[float, float]:
        return (-1.0 / (p - 1) if p > 1 else -np.inf, 1.0)

    def log_density(self, tau: float, rho: float, p: int) -> float:
        if not 0 < tau <= self.tau_bound:
            return -np.inf
        if self.uses_rho:
            lo, hi = self.rho_range(p)
            if not lo < rho < hi:
                return -np.inf
        return 0.0

    def make_phi(self, p: int, tau: float, rho: float = 0.0, s_y=None, n: int | None = None):
        if self.phi_form == "tauI":
            return tau * np.eye(p)
        if self.phi_form == "equi":
            return tau * (rho * np.ones((p, p)) + (1 - rho) * np.eye(p))
        if s_y is None or n is None:
            raise ValueError("tauS form needs the scatter matrix and n")
        return tau * np.asarray(s_y, dtype=float) / (n - 1)
