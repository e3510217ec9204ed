"""Adaptive quadrature with singular-shell decomposition, plus integral-bound sweeps.

The quadrature strategy is deliberate: every integrand in this package has a
*known* singular set (coincidence points, the origin), so instead of generic
adaptivity we decompose geometrically refined shells around the declared
singular corner and integrate each smooth shell with library quadrature.  The
same shell ledger doubles as a divergence detector: contributions that fail to
decay geometrically expose a non-integrable singularity.

Also here: empirical verification sweeps for the three integral bounds that
underpin the moment estimates (the A-asymptotics of a one-dimensional kernel
integral, and the two families of min-distance integrals over balls whose
growth must stay linear in the number of centers).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gammaln

__all__ = [
    "Ball",
    "QuadProblem",
    "QuadratureError",
    "ShellQuadResult",
    "BoundCheckReport",
    "Lemma22Row",
    "sphere_area",
    "ball_volume",
    "sample_in_ball",
    "quad_adaptive",
    "corner_shell_quad2d",
    "lemma22_check",
    "lemma23_check",
    "lemma24_check",
]

REL_TOL_EQ = 1e-12


class QuadratureError(RuntimeError):
    """Quadrature budget exhausted before reaching the requested tolerance."""


def sphere_area(p: int) -> float:
    """Surface measure of the unit sphere in R^p (2 for p=1: counting measure)."""
    return 2.0 * math.pi ** (p / 2.0) / math.exp(gammaln(p / 2.0))


def ball_volume(p: int, radius: float = 1.0) -> float:
    return math.pi ** (p / 2.0) / math.exp(gammaln(p / 2.0 + 1.0)) * radius**p


def sample_in_ball(rng: np.random.Generator, count: int, p: int, radius: float = 1.0,
                   center=None) -> np.ndarray:
    """Uniform points in a p-ball (direction from normals, radius from U^(1/p))."""
    z = rng.normal(size=(count, p))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    pts = z * (rng.random(count) ** (1.0 / p))[:, None] * radius
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return pts


@dataclass(frozen=True)
class Ball:
    """Ball domain descriptor; the attached integrand is the radial profile f(rho)."""

    p: int
    radius: float


@dataclass
class QuadProblem:
    """An integration task with a declared (measure-zero) singular set.

    domain is either a sequence of (lo, hi) intervals (their product) or a
    Ball, in which case the integrand is the radial profile.
    """

    dimension: int
    integrand: Callable
    domain: object
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    singular_points: tuple = field(default_factory=tuple)


@dataclass
class ShellQuadResult:
    value: float
    error: float
    evaluations: int
    contributions: list
    divergent: bool


class _Counted:
    def __init__(self, f):
        self.f = f
        self.calls = 0

    def __call__(self, *args):
        self.calls += 1
        return self.f(*args)


def _dblquad(f, x0, x1, y0, y1, epsrel, epsabs):
    # scipy's dblquad integrates func(y, x); keep f(x, y) at the call sites.
    # Roundoff warnings on nearly-flat shells are expected and harmless.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.dblquad(
            lambda y, x: f(x, y), x0, x1, y0, y1, epsabs=epsabs, epsrel=epsrel
        )
    return val, err


def corner_shell_quad2d(
    f: Callable[[float, float], float],
    extent: tuple[float, float],
    rel_tol: float = 1e-7,
    min_scale: float = 0.0,
    max_shells: int = 80,
    detect_divergence: bool = False,
    divergence_ratio: float = 0.95,
) -> ShellQuadResult:
    """Integrate f over (0, Rx) x (0, Ry) with a possibly singular corner at 0.

    Dyadic nested boxes B_k = (0, Rx 2^-k) x (0, Ry 2^-k) are peeled into
    L-shaped shells (two rectangles each), every shell integrated by library
    2-D quadrature.  Refinement stops when the remaining tail is negligible,
    when ``min_scale`` is reached, or -- with ``detect_divergence`` -- when the
    shell contributions stop decaying geometrically, which flags a divergent
    integral.  The geometric tail beyond the last shell is extrapolated into
    the value and charged to the error estimate.
    """
    rx, ry = extent
    counted = _Counted(f)
    shells: list[float] = []
    quad_err = 0.0
    acc = 0.0
    divergent = False
    eps_inner = rel_tol / 4.0

    k = 0
    while k < max_shells:
        sx_hi, sy_hi = rx * 0.5**k, ry * 0.5**k
        sx_lo, sy_lo = 0.5 * sx_hi, 0.5 * sy_hi
        if sx_hi < min_scale:
            break
        va, ea = _dblquad(counted, sx_lo, sx_hi, 0.0, sy_hi, eps_inner, 0.0)
        vb, eb = _dblquad(counted, 0.0, sx_lo, sy_lo, sy_hi, eps_inner, 0.0)
        ck = va + vb
        shells.append(ck)
        acc += ck
        quad_err += ea + eb
        if k >= 4:
            prev = shells[-5:]
            ratios = [
                prev[i + 1] / prev[i] if prev[i] != 0.0 else 0.0
                for i in range(len(prev) - 1)
            ]
            r_med = float(np.median(ratios))
            if detect_divergence and r_med >= divergence_ratio and abs(ck) > rel_tol * abs(acc):
                divergent = True
                break
            if abs(ck) <= 0.01 * rel_tol * max(abs(acc), 1e-300) and r_med < 0.9:
                k += 1
                break
        k += 1

    tail = 0.0
    if not divergent and len(shells) >= 2 and shells[-2] != 0.0:
        r = shells[-1] / shells[-2]
        if 0.0 < r < 0.95:
            tail = shells[-1] * r / (1.0 - r)
    value = acc + tail
    error = quad_err + abs(tail)
    return ShellQuadResult(value, error, counted.calls, shells, divergent)


def _interval_quad(f, lo, hi, rel_tol, abs_tol, singular):
    interior = sorted(x for x in singular if lo < x < hi)
    counted = _Counted(f)
    val, err = integrate.quad(
        counted, lo, hi, points=interior or None, epsabs=abs_tol, epsrel=rel_tol,
        limit=200,
    )
    return val, err, counted.calls


def quad_adaptive(problem: QuadProblem) -> tuple[float, float]:
    """Integrate a QuadProblem; returns (value, error_estimate).

    Raises QuadratureError when the budget is exhausted without reaching
    max(abs_tol, rel_tol * |value|).
    """
    rel, abse = problem.rel_tol, problem.abs_tol
    dom = problem.domain

    if isinstance(dom, Ball):
        p, radius = dom.p, dom.radius
        area = sphere_area(p)
        profile = problem.integrand
        sing = tuple(float(s) for s in problem.singular_points)
        val, err, _ = _interval_quad(
            lambda r: area * r ** (p - 1) * profile(r), 0.0, radius, rel, abse, sing
        )
    else:
        intervals = [tuple(map(float, iv)) for iv in dom]
        dim = len(intervals)
        if dim != problem.dimension:
            raise ValueError("domain does not match declared dimension")
        if dim == 1:
            (lo, hi) = intervals[0]
            sing = tuple(float(s) for s in np.ravel(problem.singular_points))
            val, err, _ = _interval_quad(problem.integrand, lo, hi, rel, abse, sing)
        elif dim == 2:
            corner = _singular_corner(intervals, problem.singular_points)
            if corner is not None:
                val, err = _corner_quad2d(problem, intervals, corner)
            else:
                val, err = _dblquad(
                    problem.integrand, *intervals[0], *intervals[1], rel, abse
                )
        else:
            val, err = integrate.nquad(
                problem.integrand, intervals, opts={"epsabs": abse, "epsrel": rel}
            )

    if err > max(abse, rel * abs(val)) * 10.0:
        raise QuadratureError(
            f"error estimate {err:g} exceeds tolerance for value {val:g}"
        )
    return val, err


def _singular_corner(intervals, singular_points):
    for s in singular_points:
        s = np.asarray(s, dtype=float).reshape(-1)
        if s.size != 2:
            continue
        if all(s[i] in intervals[i] for i in range(2)):
            return s
    return None


def _corner_quad2d(problem, intervals, corner):
    # Reflect coordinates so the singular corner sits at the origin of (0,Rx)x(0,Ry).
    (x0, x1), (y0, y1) = intervals
    f = problem.integrand
    if corner[0] == x0:
        gx = lambda u: x0 + u
        rx = x1 - x0
    else:
        gx = lambda u: x1 - u
        rx = x1 - x0
    if corner[1] == y0:
        gy = lambda v: y0 + v
        ry = y1 - y0
    else:
        gy = lambda v: y1 - v
        ry = y1 - y0
    res = corner_shell_quad2d(
        lambda u, v: f(gx(u), gy(v)), (rx, ry), rel_tol=problem.rel_tol
    )
    if res.divergent:
        raise QuadratureError("shell contributions do not decay: divergent integral")
    return res.value, res.error


# ---------------------------------------------------------------------------
# Integral-bound sweeps
# ---------------------------------------------------------------------------


class Lemma22Row(NamedTuple):
    a: float
    value: float
    branch: float
    ratio: float


@dataclass(frozen=True)
class BoundCheckReport:
    """Outcome of a randomized bound sweep.

    max_ratio is the largest LHS / (RHS shape without its constant) observed;
    ratio_trend_vs_n the fitted slope of log ratio against log n.  A bound
    that is genuinely linear in n keeps the trend at or below zero up to fit
    noise.
    """

    configs_tested: int
    max_ratio: float
    ratio_trend_vs_n: float


def lemma22_check(p: float, gamma: float, beta: float, a_grid: Sequence[float]) -> list[Lemma22Row]:
    """Ratio of integral(0,1) r^(p-1) / (A + r^gamma)^beta dr to its A-asymptote.

    The asymptote is A^(p/gamma - beta) when beta*gamma > p, log(1 + A^(-1/gamma))
    at the equality, and 1 below it.  The ratios must stay inside a fixed band
    and stabilize as A decreases.
    """
    if min(p, gamma, beta) <= 0:
        raise ValueError("p, gamma, beta must be positive")
    rows = []
    prod = gamma * beta
    for a in a_grid:
        a = float(a)
        if not 0.0 < a < 1.0:
            raise ValueError("A grid must lie in (0, 1)")
        val, _ = integrate.quad(
            lambda r: r ** (p - 1.0) / (a + r**gamma) ** beta, 0.0, 1.0,
            epsabs=0.0, epsrel=1e-11, limit=200,
        )
        if prod > p and not math.isclose(prod, p, rel_tol=REL_TOL_EQ):
            branch = a ** (p / gamma - beta)
        elif math.isclose(prod, p, rel_tol=REL_TOL_EQ):
            branch = math.log1p(a ** (-1.0 / gamma))
        else:
            branch = 1.0
        rows.append(Lemma22Row(a, val, branch, val / branch))
    return rows


def _min_dist_to_centers(samples: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = samples[:, None, :] - centers[None, :, :]
    return np.min(np.linalg.norm(diff, axis=2), axis=1)


def _trend_slope(ns, ratios):
    ns = np.asarray(ns, dtype=float)
    ratios = np.asarray(ratios, dtype=float)
    keep = (ratios > 0) & (ns > 0)
    if keep.sum() < 2 or np.unique(ns[keep]).size < 2:
        return 0.0
    return float(np.polyfit(np.log(ns[keep]), np.log(ratios[keep]), 1)[0])


def lemma23_check(
    p: int,
    gamma: float,
    beta: float,
    n_max: int,
    seed: int,
    kappa: float = 0.5,
    n_configs: int = 50,
    a_grid: Sequence[float] | None = None,
    mc_points: int = 4096,
) -> BoundCheckReport:
    """Sweep the min-distance kernel bound over random center configurations.

    For centers u_1..u_n in the unit p-ball, Monte Carlo integrates

        LHS(A) = integral over the ball of [A + min_j |u - u_j|^gamma]^(-beta)

    and divides by the bound shape without its constant: n * A^(p/gamma - beta)
    when gamma*beta > p, or n * log(e + (A^(-1/gamma) / n^(1/p))^kappa) at the
    equality.  Requires gamma*beta >= p (the lemma's hypothesis).
    """
    prod = gamma * beta
    if prod < p and not math.isclose(prod, p, rel_tol=REL_TOL_EQ):
        raise ValueError("lemma hypothesis requires gamma*beta >= p")
    equality = math.isclose(prod, p, rel_tol=REL_TOL_EQ)
    if equality and not 0.0 < kappa < 1.0:
        raise ValueError("kappa must lie in (0, 1)")
    if a_grid is None:
        a_grid = np.geomspace(1e-4, 0.5, 7)

    rng = np.random.default_rng(seed)
    vol = ball_volume(p)
    ns, ratios = [], []
    max_ratio = 0.0
    for _ in range(n_configs):
        n = int(rng.integers(1, n_max + 1))
        centers = sample_in_ball(rng, n, p)
        samples = sample_in_ball(rng, mc_points, p)
        mind = _min_dist_to_centers(samples, centers)
        for a in a_grid:
            lhs = vol * float(np.mean((a + mind**gamma) ** (-beta)))
            if equality:
                shape = n * math.log(math.e + (a ** (-1.0 / gamma) / n ** (1.0 / p)) ** kappa)
            else:
                shape = n * a ** (p / gamma - beta)
            ratio = lhs / shape
            max_ratio = max(max_ratio, ratio)
            ns.append(n)
            ratios.append(ratio)
    return BoundCheckReport(n_configs, max_ratio, _trend_slope(ns, ratios))


def lemma24_check(
    p: int,
    beta: float,
    n_max: int,
    seed: int,
    n_configs: int = 50,
    mc_points: int = 4096,
    radii: Sequence[float] = (0.5, 1.0, 2.0),
    k_factor: float = 1.0,
) -> tuple[BoundCheckReport, BoundCheckReport]:
    """Sweep the two min-distance bounds that hold for beta < p.

    Part one: integral of min_j |u - u_j|^(-beta) over a radius-r ball against
    n^(beta/p) r^(p-beta).  Part two: integral of log(e + K min_j|u-u_j|^(-beta))
    against vol(ball) * log(e + K (r / n^(1/p))^(-beta)), K = ``k_factor``.
    Returns the two reports in that order.
    """
    if not beta < p:
        raise ValueError("lemma hypothesis requires beta < p")
    rng = np.random.default_rng(seed)
    ns1, ratios1, ns2, ratios2 = [], [], [], []
    max1 = max2 = 0.0
    for _ in range(n_configs):
        n = int(rng.integers(1, n_max + 1))
        for r in radii:
            centers = sample_in_ball(rng, n, p, radius=r)
            samples = sample_in_ball(rng, mc_points, p, radius=r)
            mind = _min_dist_to_centers(samples, centers)
            vol = ball_volume(p, r)

            lhs1 = vol * float(np.mean(mind ** (-beta)))
            shape1 = n ** (beta / p) * r ** (p - beta)
            ratio1 = lhs1 / shape1
            max1 = max(max1, ratio1)
            ns1.append(n)
            ratios1.append(ratio1)

            lhs2 = vol * float(np.mean(np.log(math.e + k_factor * mind ** (-beta))))
            shape2 = vol * math.log(math.e + k_factor * (r / n ** (1.0 / p)) ** (-beta))
            ratio2 = lhs2 / shape2
            max2 = max(max2, ratio2)
            ns2.append(n)
            ratios2.append(ratio2)
    rep1 = BoundCheckReport(n_configs, max1, _trend_slope(ns1, ratios1))
    rep2 = BoundCheckReport(n_configs, max2, _trend_slope(ns2, ratios2))
    return rep1, rep2
