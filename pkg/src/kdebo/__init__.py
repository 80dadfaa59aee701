"""Contextual Bayesian optimization with kernel density estimates of the context.

Modules
-------
rng          seeded streams, Sobol points, quantile transforms
gp           Matern-5/2 GP regression
kde          online kernel density estimate of the context law
dro          worst case over a total-variation ball (primal and dual)
acquisition  expected / robust / plain / stable UCB and their maximization
problems     benchmark objectives and context distributions
loop         SBO-KDE, DRBO-KDE, GP-UCB, StableOpt
metrics      ground truth, regret, TV discrepancy, aggregation
cli          ``bench`` harness
"""

__version__ = "0.1.0"
