"""Reduced-rank estimation of cointegrated error-correction systems.

Subpackage map:

- :mod:`cointrr.matops` — generalized eigensolver and matrix operators.
- :mod:`cointrr.model` — model parameters, assumption checks, population quantities.
- :mod:`cointrr.simulate` — trajectory generation and limit-law samplers.
- :mod:`cointrr.estimate` — cross-covariances and (weighted) reduced-rank estimators.
- :mod:`cointrr.rank` — rank statistics, bootstrap critical values, weight families.
- :mod:`cointrr.asymcov` — closed-form asymptotic bias/covariance machinery.
- :mod:`cointrr.experiments` — Monte Carlo experiment runners and the CLI.
"""

__version__ = "0.1.0"
