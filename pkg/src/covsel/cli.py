"""Command-line entry point ``covsel``.

Exit codes: 0 success, 2 configuration or input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .counts import CounterConfig, ConvergenceError, CountTable, estimate_counts, table_for, verify_counts
from .experiments import STRUCTURES, ExperimentSpec, NumericError, compare_priors, parse_prior, threshold_graph, write_report
from .hiw import DataSummary
from .priors import PHI_FORMS, HyperPriorSpec
from .sampler import CacheDriftError, McmcConfig, ess, run_chain

log = logging.getLogger("covsel")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    pass


def read_matrix_csv(path) -> np.ndarray:
    """Numeric CSV with an optional header row."""
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(v) for v in first.strip().split(",")]
        skip = 0
    except ValueError:
        skip = 1
    try:
        a = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"{path}: non-finite values")
    return a


def write_matrix_csv(path, a) -> None:
    np.savetxt(path, np.asarray(a), delimiter=",", fmt="%.17g")


def _dump(obj, path) -> None:
    if path is None or path == "-":
        json.dump(obj, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2)


def _cmd_fit(args) -> int:
    y = read_matrix_csv(args.data)
    data = DataSummary.from_data(y)
    prior = parse_prior(args.prior, data.p, args.counts)
    cfg = McmcConfig(
        burnin=args.burnin,
        iterations=args.iters,
        thin=args.thin,
        sigma2_tau=args.sigma2_tau,
        sigma2_rho=args.sigma2_rho,
        hyper=HyperPriorSpec(args.phi_form),
        prior=prior,
        delta=args.delta,
        seed=args.seed,
        tau_jacobian=args.tau_jacobian,
    )
    out = run_chain(data, cfg)
    _dump(out.to_dict(include_graphs=not args.no_graphs), args.out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    mcmc = McmcConfig(burnin=args.burnin, iterations=args.iters, thin=args.thin, delta=args.delta)
    kw = dict(
        structures=tuple(args.structures),
        n_values=tuple(args.n),
        phi_forms=tuple(args.phi_forms),
        mcmc=mcmc,
        priors=(args.prior_a, args.prior_b),
        seed=args.seed,
        counts_path=args.counts,
    )
    if args.full_scale:
        spec = ExperimentSpec.full_scale(**{k: v for k, v in kw.items() if k != "mcmc"})
    else:
        spec = ExperimentSpec(p=args.p, replications=args.reps, **kw)
    report = compare_priors(spec)
    write_report(report, args.out_csv, args.out_json)
    return EXIT_OK


def _cmd_count(args) -> int:
    cfg = CounterConfig(
        alpha_tilde=args.alpha,
        burnin=args.burnin,
        samples=args.samples,
        seed=args.seed,
        refine=args.refine,
    )
    table = estimate_counts(args.p, cfg)
    if args.out:
        table.save(args.out)
    else:
        _dump(table.to_dict(), None)
    return EXIT_OK


def _cmd_verify(args) -> int:
    table = CountTable.load(args.table) if args.table else table_for(args.p)
    cfg = CounterConfig(burnin=args.burnin, samples=args.samples, thin=args.thin, seed=args.seed)
    rep = verify_counts(table, cfg)
    _dump(rep.to_dict(), args.out)
    return EXIT_OK


def _read_series(path, column) -> np.ndarray:
    if str(path).endswith(".json"):
        with open(path) as fh:
            obj = json.load(fh)
        key = column or "size_trace"
        if key not in obj:
            raise ConfigError(f"{path}: no {key!r} entry")
        return np.asarray(obj[key], dtype=float)
    a = read_matrix_csv(path)
    return a[:, int(column or 0)]


def _cmd_ess(args) -> int:
    x = _read_series(args.input, args.column)
    _dump({"n": int(x.size), "ess": ess(x)}, None)
    return EXIT_OK


def _cmd_threshold(args) -> int:
    if args.chain:
        with open(args.chain) as fh:
            obj = json.load(fh)
        if "edge_inclusion" not in obj:
            raise ConfigError(f"{args.chain}: chain output has no edge_inclusion matrix")
        j_hat = np.asarray(obj["edge_inclusion"])
    else:
        j_hat = read_matrix_csv(args.matrix)
    g, dec = threshold_graph(j_hat, args.t)
    _dump({"threshold": args.t, "graph": g.to_dict(), "decomposable": dec}, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="covsel", description="Bayesian covariance selection on decomposable graphs")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="run the graph/hyperparameter sampler on a data CSV")
    f.add_argument("--data", required=True, help="n x p CSV, optional header")
    f.add_argument("--prior", default="uniform", help="uniform | size | beta:a,b")
    f.add_argument("--phi-form", default="tauI", choices=PHI_FORMS)
    f.add_argument("--burnin", type=int, default=2000)
    f.add_argument("--iters", type=int, default=20000)
    f.add_argument("--thin", type=int, default=1)
    f.add_argument("--seed", type=int, default=None)
    f.add_argument("--delta", type=float, default=5.0)
    f.add_argument("--sigma2-tau", type=float, default=0.1)
    f.add_argument("--sigma2-rho", type=float, default=0.05)
    f.add_argument("--tau-jacobian", action="store_true", help="add log(tau'/tau) to the tau acceptance ratio")
    f.add_argument("--counts", default=None, help="count table JSON for non-uniform priors")
    f.add_argument("--no-graphs", action="store_true", help="omit the per-sample graph bitstrings")
    f.add_argument("--out", default=None)
    f.set_defaults(func=_cmd_fit)

    s = sub.add_parser("simulate", help="compare two graph priors by L1 loss on synthetic data")
    s.add_argument("--structures", nargs="+", default=list(STRUCTURES), choices=STRUCTURES)
    s.add_argument("--p", type=int, default=8)
    s.add_argument("--n", type=int, nargs="+", default=[40, 100])
    s.add_argument("--reps", type=int, default=5)
    s.add_argument("--phi-forms", nargs="+", default=["tauI"], choices=PHI_FORMS)
    s.add_argument("--prior-a", default="uniform")
    s.add_argument("--prior-b", default="size")
    s.add_argument("--burnin", type=int, default=500)
    s.add_argument("--iters", type=int, default=5000)
    s.add_argument("--thin", type=int, default=1)
    s.add_argument("--delta", type=float, default=5.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--counts", default=None)
    s.add_argument("--full-scale", action="store_true", help="p=17, 20 replications, 2000+20000 sweeps")
    s.add_argument("--out-csv", required=True)
    s.add_argument("--out-json", default=None)
    s.set_defaults(func=_cmd_simulate)

    c = sub.add_parser("count", help="estimate decomposable-graph counts by size")
    c.add_argument("--p", type=int, required=True)
    c.add_argument("--alpha", type=float, default=0.75)
    c.add_argument("--burnin", type=int, default=2000)
    c.add_argument("--samples", type=int, default=10000)
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--refine", action="store_true")
    c.add_argument("--out", default=None)
    c.set_defaults(func=_cmd_count)

    v = sub.add_parser("verify-counts", help="check a count table by sampling under the size prior")
    g = v.add_mutually_exclusive_group(required=True)
    g.add_argument("--table")
    g.add_argument("--p", type=int)
    v.add_argument("--burnin", type=int, default=2000)
    v.add_argument("--samples", type=int, default=10000)
    v.add_argument("--thin", type=int, default=20)
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--out", default=None)
    v.set_defaults(func=_cmd_verify)

    e = sub.add_parser("ess", help="effective sample size of a trace")
    e.add_argument("--input", required=True, help="chain JSON or CSV")
    e.add_argument("--column", default=None, help="JSON key or CSV column index")
    e.set_defaults(func=_cmd_ess)

    t = sub.add_parser("threshold", help="graph of edges with inclusion probability >= t")
    g = t.add_mutually_exclusive_group(required=True)
    g.add_argument("--chain")
    g.add_argument("--matrix")
    t.add_argument("--t", type=float, default=0.7)
    t.add_argument("--out", default=None)
    t.set_defaults(func=_cmd_threshold)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (NumericError, np.linalg.LinAlgError, ConvergenceError, CacheDriftError) as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, KeyError, FileNotFoundError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
