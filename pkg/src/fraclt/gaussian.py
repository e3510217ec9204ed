"""Exact finite-dimensional Gaussian machinery for fBm point configurations.

Covariance kernels of (p, q)-fractional Brownian motion and of the difference
field X0(s,t) = B1(s) - B2(t), Cholesky factorization that reports the failing
pivot, Schur-complement conditional variances, and the three identity checks
(determinant chain rule, conditional-variance splitting, Gaussian integral
identity) that the moment estimates rest on.

Covariance matrices are plain symmetric numpy arrays throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.linalg.lapack import get_lapack_funcs
from scipy.special import gamma as gamma_fn

from fraclt.regime import ProblemSpec

__all__ = [
    "FbmSpec",
    "PointConfig",
    "FactorizationError",
    "SingularConditioningError",
    "fbm_cov",
    "fbm_cov_matrix",
    "x0_cov",
    "increment_variance",
    "x0_cov_matrix",
    "cholesky",
    "cond_var",
    "detcov_chain_check",
    "slnd_split_check",
    "cd82_identity_check",
]

# Pivots below this fraction of the largest diagonal entry mark a degenerate
# (near-duplicate) point configuration.
MIN_PIVOT_RATIO = 1e-12


class FactorizationError(np.linalg.LinAlgError):
    """Covariance factorization failed; ``pivot`` is the 0-based failing index."""

    def __init__(self, pivot: int, message: str):
        super().__init__(message)
        self.pivot = pivot


class SingularConditioningError(np.linalg.LinAlgError):
    """The conditioning set has a singular covariance."""


@dataclass(frozen=True)
class FbmSpec:
    """A (p, q)-fractional Brownian motion: p parameters, q components, Hurst gamma."""

    gamma: float
    p: int
    q: int = 1

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma!r}")
        if self.p < 1 or self.q < 1:
            raise ValueError("p and q must be positive integers")


@dataclass(frozen=True)
class PointConfig:
    """Conditioning configuration (s_1,t_1),...,(s_n,t_n) for the difference field.

    Points must be pairwise distinct within each field's list; duplicates are
    rejected here, near-duplicates later by the Cholesky pivot check.
    """

    s_points: np.ndarray  # (n, N1)
    t_points: np.ndarray  # (n, N2)

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.s_points, dtype=float))
        t = np.atleast_2d(np.asarray(self.t_points, dtype=float))
        if s.shape[0] != t.shape[0]:
            raise ValueError("s_points and t_points must pair up")
        for name, pts in (("s_points", s), ("t_points", t)):
            n = pts.shape[0]
            if n > 1:
                diff = pts[:, None, :] - pts[None, :, :]
                dist = np.linalg.norm(diff, axis=2)
                dist[np.diag_indices(n)] = np.inf
                if dist.min() == 0.0:
                    raise ValueError(f"duplicate points in {name}")
        object.__setattr__(self, "s_points", s)
        object.__setattr__(self, "t_points", t)

    @property
    def n(self) -> int:
        return self.s_points.shape[0]


def fbm_cov(spec: FbmSpec, u1, u2) -> float:
    """Covariance (|u1|^2g + |u2|^2g - |u1-u2|^2g) / 2 of one fBm component."""
    u1 = np.asarray(u1, dtype=float).reshape(-1)
    u2 = np.asarray(u2, dtype=float).reshape(-1)
    if u1.size != spec.p or u2.size != spec.p:
        raise ValueError(f"points must have dimension p={spec.p}")
    g2 = 2.0 * spec.gamma
    r1 = np.linalg.norm(u1)
    r2 = np.linalg.norm(u2)
    d12 = np.linalg.norm(u1 - u2)
    return 0.5 * (r1**g2 + r2**g2 - d12**g2)


def fbm_cov_matrix(gamma: float, points: np.ndarray) -> np.ndarray:
    """Covariance matrix of one fBm component over a point set (n, p)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    g2 = 2.0 * gamma
    r = np.linalg.norm(pts, axis=1)
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    cov = 0.5 * (r[:, None] ** g2 + r[None, :] ** g2 - dist**g2)
    return 0.5 * (cov + cov.T)


def increment_variance(spec: ProblemSpec, a, b) -> float:
    """E[(X0(a) - X0(b))^2] = |s-v|^(2*alpha1) + |t-w|^(2*alpha2)."""
    (s, t), (v, w) = a, b
    s = np.asarray(s, dtype=float).reshape(-1)
    t = np.asarray(t, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float).reshape(-1)
    if s.size != spec.n1 or v.size != spec.n1 or t.size != spec.n2 or w.size != spec.n2:
        raise ValueError("point dimensions must match (n1, n2)")
    return float(
        np.linalg.norm(s - v) ** (2 * spec.alpha1) + np.linalg.norm(t - w) ** (2 * spec.alpha2)
    )


def x0_cov(spec: ProblemSpec, a, b) -> float:
    """Covariance of the scalar difference field X0 at two time points a=(s,t), b=(v,w).

    Independence of the two driving fields makes this the sum of the per-field
    fBm covariances.
    """
    (s, t), (v, w) = a, b
    c1 = fbm_cov(FbmSpec(spec.alpha1, spec.n1), s, v)
    c2 = fbm_cov(FbmSpec(spec.alpha2, spec.n2), t, w)
    return c1 + c2


def x0_cov_matrix(spec: ProblemSpec, s_points, t_points) -> np.ndarray:
    """Covariance matrix of X0 over paired configurations (s_i, t_i)."""
    return fbm_cov_matrix(spec.alpha1, s_points) + fbm_cov_matrix(spec.alpha2, t_points)


def cholesky(m: np.ndarray, min_pivot_ratio: float = MIN_PIVOT_RATIO) -> np.ndarray:
    """Lower-triangular L with L @ L.T == m.

    Raises FactorizationError carrying the 0-based failing pivot index when m
    is not positive definite, or when a pivot (a conditional variance) falls
    below ``min_pivot_ratio`` times the largest diagonal entry, which flags a
    degenerate point configuration.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("covariance matrix must be square")
    if not np.allclose(m, m.T, rtol=1e-10, atol=1e-14):
        raise ValueError("covariance matrix must be symmetric")
    (potrf,) = get_lapack_funcs(("potrf",), (m,))
    c, info = potrf(m, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise FactorizationError(
            info - 1, f"matrix not positive definite: pivot {info - 1} failed"
        )
    if info < 0:  # pragma: no cover - LAPACK usage error
        raise ValueError(f"illegal argument to dpotrf: {info}")
    if min_pivot_ratio > 0.0 and m.shape[0] > 0:
        pivots = np.diag(c) ** 2
        floor = min_pivot_ratio * np.max(np.diag(m))
        bad = np.nonzero(pivots < floor)[0]
        if bad.size:
            raise FactorizationError(
                int(bad[0]),
                f"degenerate configuration: pivot {int(bad[0])} below "
                f"{min_pivot_ratio:g} of the largest variance",
            )
    return c


def cond_var(m: np.ndarray, target: int, given=()) -> float:
    """Var(Z_target | Z_given) by Cholesky-based Schur complement.

    Empty ``given`` returns the unconditional variance m[target, target].
    """
    m = np.asarray(m, dtype=float)
    given = [int(g) for g in given]
    if target in given:
        raise ValueError("target cannot belong to the conditioning set")
    if not given:
        return float(m[target, target])
    sub = m[np.ix_(given, given)]
    cross = m[given, target]
    try:
        factor = cho_factor(sub, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularConditioningError(str(exc)) from exc
    return float(m[target, target] - cross @ cho_solve(factor, cross))


def detcov_chain_check(m: np.ndarray) -> float:
    """Relative residual of det(m) against the conditional-variance chain.

    The chain rule det = Var(Z_1) * prod_k Var(Z_k | Z_1..Z_{k-1}) is computed
    through Schur complements; the determinant goes through the LU route, so
    the two sides share no code path.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    det = float(np.linalg.det(m))
    if det <= 0.0:
        raise SingularConditioningError("matrix is singular or indefinite")
    chain = float(m[0, 0])
    for k in range(1, n):
        chain *= cond_var(m, k, range(k))
    return abs(det - chain) / det


def slnd_split_check(spec: ProblemSpec, config: PointConfig, target) -> tuple[float, float]:
    """Conditional variance of X0 at ``target`` versus its per-field split.

    Returns (lhs, rhs) with

        lhs = Var(X0(v,w) | X0(s_1,t_1),...,X0(s_n,t_n))
        rhs = Var(B1(v) | B1(s_.)) + Var(B2(w) | B2(t_.))

    The exact inequality lhs >= rhs is the testable core of strong local
    nondeterminism for the difference field: constraining the sum with common
    coefficients can never predict better than constraining each field alone.
    """
    v, w = target
    v = np.asarray(v, dtype=float).reshape(1, -1)
    w = np.asarray(w, dtype=float).reshape(1, -1)
    n = config.n
    if n == 0:
        var = float(
            np.linalg.norm(v) ** (2 * spec.alpha1) + np.linalg.norm(w) ** (2 * spec.alpha2)
        )
        return var, var

    s_all = np.vstack([config.s_points, v])
    t_all = np.vstack([config.t_points, w])
    m_x0 = x0_cov_matrix(spec, s_all, t_all)
    lhs = cond_var(m_x0, n, range(n))

    m_s = fbm_cov_matrix(spec.alpha1, s_all)
    m_t = fbm_cov_matrix(spec.alpha2, t_all)
    rhs = cond_var(m_s, n, range(n)) + cond_var(m_t, n, range(n))
    return lhs, rhs


def _abs_moment_std_normal(power: float) -> float:
    # integral over R of |v|^power * exp(-v^2/2) dv
    return 2.0 ** ((power + 1.0) / 2.0) * gamma_fn((power + 1.0) / 2.0)


def cd82_identity_check(
    power: float, m: np.ndarray, quad_points: int = 32
) -> tuple[float, float]:
    """Both sides of the Gaussian integral identity for g(v) = |v|^power.

    lhs: tensor Gauss-Legendre quadrature of g(v_1) exp(-Var(sum v_j Z_j)/2)
    over R^n (n = order of m, at most 3).  rhs: the closed reduction
    (2*pi)^((n-1)/2) det(m)^(-1/2) * integral of g(v/sigma_1) exp(-v^2/2) dv
    with sigma_1^2 = Var(Z_1 | Z_2..Z_n).
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    if n < 1 or n > 3:
        raise ValueError("identity check supports orders 1..3 only")
    if power < 0:
        raise ValueError("power must be nonnegative")
    eigs, q = np.linalg.eigh(m)
    if eigs[0] <= 0.0:
        raise SingularConditioningError("covariance matrix must be positive definite")

    # Integrate in the eigenbasis y = Q'v (unit Jacobian) so the Gaussian
    # factorizes axis by axis; each axis spreads like 1/sqrt(lambda_i).
    nodes, weights = np.polynomial.legendre.leggauss(quad_points)

    def panel(a, b):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        return mid + half * nodes, half * weights

    stretch = 8.0 * (1.0 + 0.25 * power)
    axes = []
    for lam in eigs:
        cut = stretch / np.sqrt(lam)
        x_neg, w_neg = panel(-cut, 0.0)
        x_pos, w_pos = panel(0.0, cut)
        axes.append((np.concatenate([x_neg, x_pos]), np.concatenate([w_neg, w_pos])))

    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=1)  # (k, n) in y coordinates
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    wts = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=1), axis=1)

    quad_form = pts**2 @ eigs
    v1 = pts @ q[0, :]
    lhs = float(np.sum(wts * np.abs(v1) ** power * np.exp(-0.5 * quad_form)))

    sigma1_sq = cond_var(m, 0, range(1, n))
    det = float(np.linalg.det(m))
    rhs = (
        (2.0 * np.pi) ** ((n - 1) / 2.0)
        / np.sqrt(det)
        * sigma1_sq ** (-power / 2.0)
        * _abs_moment_std_normal(power)
    )
    return lhs, rhs
