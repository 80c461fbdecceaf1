"""Variational inference with exact latent-variable conditionals.

Python bindings over the C++ core: factor-covariance algebra, the
Yeo-Johnson Gaussian copula and factor Gaussian variational families,
ADADELTA stochastic gradient ascent, and the full run commands
(simulate / fit / mcmc / compare / gradcheck) driven by JSON configs.
"""

from hybridvi._core import *  # noqa: F401,F403
from hybridvi._core import run_command  # noqa: F401

__version__ = "0.1.0"
