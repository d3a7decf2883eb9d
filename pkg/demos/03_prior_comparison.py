"""Uniform versus size-based graph prior on sparse data.

A desk-scale version of the L1-loss study: identity and tridiagonal truths,
p=8, n=40, a handful of replications. Positive percentages mean the uniform
prior has the larger loss.
"""

from covsel.experiments import ExperimentSpec, compare_priors
from covsel.sampler import McmcConfig

spec = ExperimentSpec(
    structures=("identity", "tridiagonal"),
    p=8,
    n_values=(40,),
    replications=4,
    mcmc=McmcConfig(burnin=300, iterations=2000),
    seed=11,
)
report = compare_priors(spec)
for cell in report["summary"]:
    print(f"{cell['structure']:12s} n={cell['n']}: median {cell['median']:6.1f}%  IQR [{cell['q1']:.1f}, {cell['q3']:.1f}]")
