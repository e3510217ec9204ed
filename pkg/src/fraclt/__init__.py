"""fraclt: a numerical laboratory for intersection local times of fractional Brownian motions.

Simulates two independent multiparameter fBm fields, estimates their
intersection local time through epsilon-smoothed functionals and exact moment
quadrature, and verifies existence thresholds, scaling laws and
fractal-dimension formulas at desk scale.
"""

from fraclt.regime import ProblemSpec, RegimeReport, classify, phi1

__version__ = "0.1.0"

__all__ = ["ProblemSpec", "RegimeReport", "classify", "phi1", "__version__"]
