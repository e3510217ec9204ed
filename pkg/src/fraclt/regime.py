"""Closed-form regime classification for two intersecting fractional Brownian fields.

Everything here is exact arithmetic on the defining tuple (n1, n2, alpha1,
alpha2, d): the existence threshold n1/alpha1 + n2/alpha2 > d, the case index
tau, the growth exponent beta_tau (= box/Hausdorff dimension of the
intersection-time set), the factorial exponent eta_tau, and the four-case
dimension of the intersection-point set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = ["ProblemSpec", "RegimeReport", "classify", "phi1"]

# Relative tolerance for the equality cases (criticality, n1 == alpha1*d).
# Rationals entered exactly (e.g. 1/2) hit these equalities with zero error.
REL_TOL = 1e-12


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=REL_TOL, abs_tol=0.0)


@dataclass(frozen=True)
class ProblemSpec:
    """Two independent fBm fields B1: R^n1 -> R^d (Hurst alpha1) and B2: R^n2 -> R^d.

    Construction normalizes to alpha1 <= alpha2 by swapping the two fields if
    needed; ``swapped`` records whether that happened.  All downstream
    formulas assume the normalized order.
    """

    n1: int
    n2: int
    alpha1: float
    alpha2: float
    d: int
    swapped: bool = field(default=False, compare=False)

    def __post_init__(self):
        for name in ("n1", "n2", "d"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        for name in ("alpha1", "alpha2"):
            a = float(getattr(self, name))
            if not 0.0 < a < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {a!r}")
            object.__setattr__(self, name, a)
        if self.alpha1 > self.alpha2:
            n1, n2 = self.n1, self.n2
            a1, a2 = self.alpha1, self.alpha2
            object.__setattr__(self, "n1", n2)
            object.__setattr__(self, "n2", n1)
            object.__setattr__(self, "alpha1", a2)
            object.__setattr__(self, "alpha2", a1)
            object.__setattr__(self, "swapped", True)

    @property
    def n(self) -> int:
        """Total parameter dimension n1 + n2."""
        return self.n1 + self.n2

    @property
    def scaling_exponent(self) -> float:
        """n1/alpha1 + n2/alpha2 - d, positive exactly when the local time exists."""
        return self.n1 / self.alpha1 + self.n2 / self.alpha2 - self.d


@dataclass(frozen=True)
class RegimeReport:
    """Derived constants for a ProblemSpec.

    When ``exists`` is False the regime constants are undefined (None), never
    zero; ``scaling_exponent`` is always present because it doubles as the
    divergence-rate diagnostic.
    """

    exists: bool
    scaling_exponent: float
    critical: bool
    log_case: bool
    tau: int | None
    beta_tau: float | None
    eta_tau: float | None
    dim_m2: float | None
    dim_d2: float | None

    def to_dict(self) -> dict:
        return {
            "exists": self.exists,
            "scaling_exponent": self.scaling_exponent,
            "critical": self.critical,
            "log_case": self.log_case,
            "tau": self.tau,
            "beta_tau": self.beta_tau,
            "eta_tau": self.eta_tau,
            "dim_m2": self.dim_m2,
            "dim_d2": self.dim_d2,
        }


def classify(spec: ProblemSpec) -> RegimeReport:
    """Evaluate every regime constant for ``spec``.

    Total on valid specs.  ``exists`` iff n1/alpha1 + n2/alpha2 > d (strictly;
    the critical equality counts as non-existence).  In the existence regime:

    * tau = 1 when n1/alpha1 > d, else tau = 2;
    * beta_tau = n - alpha1*d (tau=1) or n2 + (alpha2/alpha1)*n1 - alpha2*d (tau=2);
    * eta_tau = alpha1*d/n1 (tau=1) or alpha2*d/n2 + 1 - alpha2*n1/(alpha1*n2) (tau=2);
    * dim_m2 = beta_tau;
    * dim_d2 follows the four-case table on the signs of n_i - alpha_i*d.
    """
    n1, n2, a1, a2, d = spec.n1, spec.n2, spec.alpha1, spec.alpha2, spec.d
    ssum = n1 / a1 + n2 / a2
    exponent = ssum - d
    critical = _close(ssum, d)
    exists = (ssum > d) and not critical
    log_case = _close(n1, a1 * d)

    if not exists:
        return RegimeReport(
            exists=False,
            scaling_exponent=exponent,
            critical=critical,
            log_case=log_case,
            tau=None,
            beta_tau=None,
            eta_tau=None,
            dim_m2=None,
            dim_d2=None,
        )

    # tau = 1 only for strict n1/alpha1 > d; equality (the log case) is tau = 2.
    tau = 1 if (n1 / a1 > d and not _close(n1 / a1, d)) else 2
    if tau == 1:
        beta = (n1 + n2) - a1 * d
        eta = a1 * d / n1
    else:
        beta = n2 + (a2 / a1) * n1 - a2 * d
        eta = a2 * d / n2 + 1.0 - a2 * n1 / (a1 * n2)

    def _gt(x, y):
        return x > y and not _close(x, y)

    if _gt(n1, a1 * d) and _gt(n2, a2 * d):
        dim_d2 = float(d)
    elif _gt(n1, a1 * d):
        dim_d2 = n2 / a2
    elif _gt(n2, a2 * d):
        dim_d2 = n1 / a1
    else:
        dim_d2 = exponent

    return RegimeReport(
        exists=True,
        scaling_exponent=exponent,
        critical=critical,
        log_case=log_case,
        tau=tau,
        beta_tau=beta,
        eta_tau=eta,
        dim_m2=beta,
        dim_d2=dim_d2,
    )


def phi1(spec: ProblemSpec, r: float) -> float:
    """Local growth gauge of the intersection local time at scale r.

    Generic case: r**beta_tau * (log log(1/r))**eta_tau.  In the log case
    (n1 == alpha1*d, where beta_tau = n2 and eta_tau = 1) an extra logarithmic
    factor appears:

        r**n2 * loglog(1/r) * log(e + loglog(1/r)**excess / r**(alpha2-alpha1))

    with excess = max(alpha2/n2 - alpha1/n1, 0).  Undefined (raises) outside
    the existence regime and outside 0 < r < 1/e.
    """
    if not 0.0 < r < 1.0 / math.e:
        raise ValueError(f"r must lie in (0, 1/e), got {r!r}")
    rep = classify(spec)
    if not rep.exists:
        raise ValueError("phi1 is undefined when the intersection local time does not exist")
    loglog = math.log(math.log(1.0 / r))
    if not rep.log_case:
        return r**rep.beta_tau * loglog**rep.eta_tau
    excess = max(spec.alpha2 / spec.n2 - spec.alpha1 / spec.n1, 0.0)
    spread = spec.alpha2 - spec.alpha1
    return r**spec.n2 * loglog * math.log(math.e + loglog**excess / r**spread)
