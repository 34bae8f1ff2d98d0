"""cwlab: a numerical laboratory for conditioned Curie-Weiss
magnetization dynamics.

Modules
-------
model       parameters, grids, rates, potentials, generator matrices
spectral    Perron pair, quasi-stationary law, h-transform, Harris constants
evolution   uniformized semigroup action, conditioned laws, drift checks
sampler     exact path sampling, triple reflection coupling, MC estimators
mean_field  deterministic limit flows
metrics     W1 / W2 / total variation / weighted total variation
experiments named experiment harness behind the `xlab` command line
"""

from .errors import CwlabError
from .model import ModelParams

__version__ = "0.1.0"

__all__ = ["CwlabError", "ModelParams", "__version__"]
