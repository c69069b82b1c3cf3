"""lfunlab: a numerical laboratory for exponential sums, spectral weights,
summation formulas and averaged central L-values, built around exact
arithmetic oracles and self-validating quadrature."""

__version__ = "0.1.0"
