"""
transdim: reversible jump MCMC across models of different dimension.

A sampler kernel with pluggable models and between-model moves, built-in
mixture, autoregressive and change-point families, convergence diagnostics
and Bayes factor estimation.
"""

__version__ = "0.1.0"
