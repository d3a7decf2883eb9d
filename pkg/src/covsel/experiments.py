"""Simulation harness: true structures, the L1 loss and prior comparisons."""

from __future__ import annotations

import csv
import json
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .counts import table_for
from .graph import Graph, is_decomposable
from .hiw import DataSummary
from .priors import GraphPrior, HyperPriorSpec
from .sampler import ChainOutput, McmcConfig, run_chain

STRUCTURES = ("identity", "tridiagonal", "full", "four_cycle", "p_cycle")
COUPLING = 0.45
FULL_CORRELATION = 0.5


class NumericError(ArithmeticError):
    """Raised when an estimate is singular or not positive definite."""


def _shrink_until_pd(build, coupling: float, kind: str) -> np.ndarray:
    omega = build(coupling)
    while np.linalg.eigvalsh(omega)[0] <= 1e-8:
        coupling *= 0.9
        warnings.warn(f"{kind}: Omega not PD, shrinking coupling to {coupling:.4g}", stacklevel=3)
        omega = build(coupling)
    return omega


def make_structure(kind: str, p: int) -> tuple[np.ndarray, np.ndarray, Graph]:
    """True ``(Sigma, Omega, graph)`` for one of the named structures.

    Couplings are 0.45 on the nonzero off-diagonals of ``Omega``; ``full``
    is an equicorrelated ``Sigma`` with correlation 0.5.
    """
    if kind not in STRUCTURES:
        raise ValueError(f"unknown structure {kind!r}; choose from {STRUCTURES}")
    if p < (4 if kind == "four_cycle" else 3):
        raise ValueError(f"{kind} needs a larger p")
    if kind == "identity":
        omega = np.eye(p)
    elif kind == "full":
        sigma = FULL_CORRELATION * np.ones((p, p)) + (1 - FULL_CORRELATION) * np.eye(p)
        omega = np.linalg.inv(sigma)
    else:
        if kind == "tridiagonal":
            pairs = [(i, i + 1) for i in range(p - 1)]
        elif kind == "four_cycle":
            pairs = [(0, 1), (1, 2), (2, 3), (0, 3)]
        else:
            pairs = [(i, (i + 1) % p) for i in range(p)]

        def build(c):
            om = np.eye(p)
            for i, j in pairs:
                om[i, j] = om[j, i] = c
            return om

        omega = _shrink_until_pd(build, COUPLING, kind)
    omega = (omega + omega.T) / 2
    sigma = np.linalg.inv(omega)
    sigma = (sigma + sigma.T) / 2
    graph = Graph.from_matrix(omega, tol=1e-10)
    return sigma, omega, graph


def _chol_logdet(a: np.ndarray, name: str):
    try:
        c = scipy.linalg.cho_factor(a, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"{name} is not positive definite") from exc
    return c, 2.0 * float(np.log(np.diag(c[0])).sum())


def l1_loss(sigma_hat, sigma_true) -> float:
    """``tr(Sigma_hat Sigma_true^-1) - log det(Sigma_hat Sigma_true^-1) - p``."""
    sh = np.asarray(sigma_hat, dtype=float)
    st = np.asarray(sigma_true, dtype=float)
    if sh.shape != st.shape or sh.ndim != 2 or sh.shape[0] != sh.shape[1]:
        raise ValueError("both arguments must be square matrices of the same size")
    p = sh.shape[0]
    _, ld_hat = _chol_logdet(sh, "sigma_hat")
    ct, ld_true = _chol_logdet(st, "sigma_true")
    tr = float(np.trace(scipy.linalg.cho_solve(ct, sh)))
    val = tr - (ld_hat - ld_true) - p
    # rounding leaves residue of order 1e-15 at the minimum
    if abs(val) < 1e-12 * max(p, 1):
        val = 0.0
    return val


def bayes_estimator(output: ChainOutput) -> np.ndarray:
    """``E(Omega | y)^-1`` from the mixture estimate of the chain."""
    m = output.omega_mixture
    if m is None:
        raise NumericError("chain kept no samples")
    try:
        c = scipy.linalg.cho_factor(m, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericError("mixture estimate of E(Omega|y) is not positive definite") from exc
    sigma = scipy.linalg.cho_solve(c, np.eye(m.shape[0]))
    return (sigma + sigma.T) / 2


def threshold_graph(j_hat, t: float = 0.7) -> tuple[Graph, bool]:
    """Graph of the pairs with inclusion probability ``>= t``, and whether it is decomposable."""
    if not 0 < t < 1:
        raise ValueError("threshold must lie in (0, 1)")
    j = np.asarray(j_hat, dtype=float)
    p = j.shape[0]
    edges = [(a, b) for a in range(p) for b in range(a + 1, p) if j[a, b] >= t]
    g = Graph(p, frozenset(edges))
    return g, is_decomposable(g)


# ---------------------------------------------------------------------------
# prior comparison
# ---------------------------------------------------------------------------


@dataclass
class ExperimentSpec:
    """Design of a prior-comparison study.

    Each cell ``(structure, n, phi_form)`` gets ``replications`` data sets;
    every data set is fitted once per prior in ``priors`` with the same
    chain seed. Seeds derive from ``seed`` and the cell/replication indices.
    """

    structures: tuple[str, ...] = STRUCTURES
    p: int = 8
    n_values: tuple[int, ...] = (40, 100)
    phi_forms: tuple[str, ...] = ("tauI",)
    replications: int = 5
    mcmc: McmcConfig = field(default_factory=lambda: McmcConfig(burnin=500, iterations=5000))
    priors: tuple[str, str] = ("uniform", "size")
    seed: int = 0
    counts_path: str | None = None
    workers: int | None = None

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if len(self.priors) != 2:
            raise ValueError("exactly two priors are compared")
        for s in self.structures:
            if s not in STRUCTURES:
                raise ValueError(f"unknown structure {s!r}")

    @classmethod
    def full_scale(cls, **kw) -> "ExperimentSpec":
        """The 17-variable study: 20 replications of 2,000 + 20,000 sweeps."""
        kw.setdefault("p", 17)
        kw.setdefault("n_values", (40, 100))
        kw.setdefault("replications", 20)
        kw.setdefault("mcmc", McmcConfig(burnin=2000, iterations=20000))
        return cls(**kw)


def parse_prior(text: str, p: int, counts_path=None) -> GraphPrior:
    """``uniform``, ``size`` or ``beta:a,b``."""
    if text == "uniform":
        return GraphPrior.uniform(p)
    table = table_for(p, counts_path)
    if text == "size":
        return GraphPrior.size_based(table)
    if text.startswith("beta:"):
        try:
            a, b = (float(v) for v in text[5:].split(","))
        except ValueError:
            raise ValueError(f"bad beta prior {text!r}; expected beta:a,b") from None
        return GraphPrior.beta_binomial(table, a, b)
    raise ValueError(f"unknown prior {text!r}")


def _task(args):
    spec, s_idx, structure, n, form, rep = args
    ss = np.random.SeedSequence([spec.seed, s_idx, n, spec.phi_forms.index(form), rep])
    data_seed, chain_seed = ss.spawn(2)
    sigma_t, _, _ = make_structure(structure, spec.p)
    y = np.random.default_rng(data_seed).multivariate_normal(np.zeros(spec.p), sigma_t, size=n)
    data = DataSummary.from_data(y)
    seed = int(chain_seed.generate_state(1)[0])
    row = {"structure": structure, "n": n, "phi_form": form, "rep": rep, "seed": seed}
    losses = []
    try:
        for name in spec.priors:
            prior = parse_prior(name, spec.p, spec.counts_path)
            cfg = replace(spec.mcmc, prior=prior, hyper=HyperPriorSpec(form), seed=seed)
            out = run_chain(data, cfg)
            losses.append(l1_loss(bayes_estimator(out), sigma_t))
        row["l1_a"], row["l1_b"] = losses
        row["pct_increase"] = 100.0 * (losses[0] - losses[1]) / losses[1]
        row["error"] = ""
    except (NumericError, np.linalg.LinAlgError, ValueError) as exc:
        row.update(l1_a=None, l1_b=None, pct_increase=None, error=f"{type(exc).__name__}: {exc}")
    return row


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("COVSEL_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def compare_priors(spec: ExperimentSpec) -> dict:
    """Run the study; returns ``{"rows": [...], "summary": [...]}``.

    ``pct_increase`` is ``100 (L1_a - L1_b) / L1_b`` with ``a, b`` the two
    priors in order. Failed replications keep a row with the error text.
    """
    for name in spec.priors:
        parse_prior(name, spec.p, spec.counts_path)
    tasks = [
        (spec, s_idx, s, n, form, rep)
        for s_idx, s in enumerate(spec.structures)
        for n in spec.n_values
        for form in spec.phi_forms
        for rep in range(spec.replications)
    ]
    workers = min(worker_count(spec.workers), len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_task, tasks))
    else:
        rows = [_task(t) for t in tasks]
    return {"rows": rows, "summary": summarize(rows)}


def summarize(rows: list[dict]) -> list[dict]:
    cells: dict = {}
    for r in rows:
        cells.setdefault((r["structure"], r["n"], r["phi_form"]), []).append(r)
    out = []
    for (s, n, form), rs in cells.items():
        vals = np.array([r["pct_increase"] for r in rs if r["pct_increase"] is not None])
        entry = {"structure": s, "n": n, "phi_form": form, "replications": len(rs), "failures": len(rs) - vals.size}
        if vals.size:
            q1, med, q3 = np.percentile(vals, [25, 50, 75])
            entry.update(median=float(med), q1=float(q1), q3=float(q3), min=float(vals.min()), max=float(vals.max()))
        out.append(entry)
    return out


def write_report(report: dict, csv_path, json_path=None) -> None:
    fields = ["structure", "n", "phi_form", "rep", "seed", "l1_a", "l1_b", "pct_increase", "error"]
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(report["rows"])
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(report["summary"], fh, indent=2)
