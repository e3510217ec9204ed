"""Exact sampling of (p, q)-fractional Brownian fields on finite grids.

Two samplers with the same law: dense Cholesky of the grid covariance (any
parameter dimension, the default), and a circulant-embedding fast path for
uniform 1-D lattices that generates stationary fractional Gaussian noise in
the spectral domain and accumulates it.  Randomness comes from the Philox
counter-based generator seeded through SeedSequence, so replication r of a
run derives its stream from spawn_key=(r,) and results never depend on how
work is scheduled.

Grid Cholesky factors are cached keyed by (gamma, grid): replicated draws pay
the factorization once, which dominates every downstream experiment.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fraclt.gaussian import FactorizationError, FbmSpec, cholesky, fbm_cov_matrix
from fraclt.regime import ProblemSpec

__all__ = [
    "GridSpec",
    "FieldSample",
    "DifferenceFieldSample",
    "GridTooLargeError",
    "sample_fbm",
    "sample_fast1d",
    "sample_difference_field",
    "derive_rng",
    "clear_factor_cache",
]

DEFAULT_GRID_CAP = 4096
FALLBACK_JITTER = 1e-10


class GridTooLargeError(ValueError):
    """Total grid size exceeds the configured cap (dense Cholesky is O(n^3))."""


def derive_rng(seed, replication: int | None = None) -> np.random.Generator:
    """Philox generator for a base seed, optionally split for one replication."""
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(int(seed))
    if replication is not None:
        ss = np.random.SeedSequence(entropy=ss.entropy, spawn_key=(*ss.spawn_key, int(replication)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular grid in R^p.

    ``cell_centered`` grids place nodes at the midpoints of ``count`` equal
    cells per axis (the Riemann-sum layout); plain grids include both
    endpoints.  Total size is capped because sampling factorizes an n x n
    covariance.
    """

    p: int
    per_axis_counts: tuple
    extent: tuple
    cell_centered: bool = False
    cap: int = DEFAULT_GRID_CAP

    def __post_init__(self):
        counts = tuple(int(c) for c in np.atleast_1d(self.per_axis_counts))
        ext = tuple((float(lo), float(hi)) for lo, hi in np.atleast_2d(self.extent))
        if len(counts) != self.p or len(ext) != self.p:
            raise ValueError("per_axis_counts and extent must have one entry per axis")
        if any(c < 1 for c in counts):
            raise ValueError("per-axis counts must be positive")
        if any(hi <= lo for lo, hi in ext):
            raise ValueError("extent intervals must be nondegenerate")
        object.__setattr__(self, "per_axis_counts", counts)
        object.__setattr__(self, "extent", ext)
        if self.n_points > self.cap:
            raise GridTooLargeError(
                f"grid has {self.n_points} points, cap is {self.cap}"
            )

    @property
    def n_points(self) -> int:
        return int(np.prod(self.per_axis_counts))

    def axis_nodes(self, i: int) -> np.ndarray:
        lo, hi = self.extent[i]
        count = self.per_axis_counts[i]
        if self.cell_centered:
            h = (hi - lo) / count
            return lo + (np.arange(count) + 0.5) * h
        if count == 1:
            return np.array([lo])
        return np.linspace(lo, hi, count)

    def spacing(self, i: int) -> float:
        lo, hi = self.extent[i]
        count = self.per_axis_counts[i]
        if self.cell_centered:
            return (hi - lo) / count
        return (hi - lo) / max(count - 1, 1)

    def points(self) -> np.ndarray:
        axes = [self.axis_nodes(i) for i in range(self.p)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "per_axis_counts": list(self.per_axis_counts),
            "extent": [list(iv) for iv in self.extent],
            "cell_centered": self.cell_centered,
            "cap": self.cap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(
            p=d["p"],
            per_axis_counts=tuple(d["per_axis_counts"]),
            extent=tuple(tuple(iv) for iv in d["extent"]),
            cell_centered=d.get("cell_centered", False),
            cap=d.get("cap", DEFAULT_GRID_CAP),
        )


@dataclass
class FieldSample:
    """Field values on a grid plus full generation provenance."""

    spec: FbmSpec
    grid: GridSpec
    values: np.ndarray  # (n_points, q)
    seed: int
    method: str  # "cholesky" | "fast1d"
    jitter: float = 0.0
    fallback: bool = False

    def save(self, prefix) -> None:
        """Flat binary array next to a JSON sidecar with the provenance."""
        prefix = Path(prefix)
        self.values.astype(np.float64).tofile(prefix.with_suffix(".bin"))
        sidecar = {
            "spec": {"gamma": self.spec.gamma, "p": self.spec.p, "q": self.spec.q},
            "grid": self.grid.to_dict(),
            "seed": self.seed,
            "method": self.method,
            "jitter": self.jitter,
            "fallback": self.fallback,
            "shape": list(self.values.shape),
        }
        prefix.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))

    @classmethod
    def load(cls, prefix) -> "FieldSample":
        prefix = Path(prefix)
        meta = json.loads(prefix.with_suffix(".json").read_text())
        values = np.fromfile(prefix.with_suffix(".bin"), dtype=np.float64)
        values = values.reshape(meta["shape"])
        return cls(
            spec=FbmSpec(**meta["spec"]),
            grid=GridSpec.from_dict(meta["grid"]),
            values=values,
            seed=meta["seed"],
            method=meta["method"],
            jitter=meta["jitter"],
            fallback=meta["fallback"],
        )


@dataclass
class DifferenceFieldSample:
    """One draw of each field plus X(s,t) = B1(s) - B2(t) on the product grid."""

    sample1: FieldSample
    sample2: FieldSample
    x_values: np.ndarray  # (n1_points, n2_points, d)


# (gamma, grid) -> (L, active_index, origin_index, jitter); read-shared, insert-locked.
_factor_cache: dict = {}
_cache_lock = threading.Lock()


def clear_factor_cache() -> None:
    with _cache_lock:
        _factor_cache.clear()


def _grid_factor(gamma: float, grid: GridSpec):
    key = (float(gamma), grid)
    hit = _factor_cache.get(key)
    if hit is not None:
        return hit
    pts = grid.points()
    norms = np.linalg.norm(pts, axis=1)
    origin = np.nonzero(norms == 0.0)[0]
    active = np.nonzero(norms != 0.0)[0]
    cov = fbm_cov_matrix(gamma, pts[active])
    jitter = 0.0
    try:
        low = cholesky(cov, min_pivot_ratio=0.0)
    except FactorizationError:
        jitter = FALLBACK_JITTER
        low = cholesky(cov + jitter * np.eye(cov.shape[0]), min_pivot_ratio=0.0)
    entry = (low, active, origin, jitter)
    with _cache_lock:
        _factor_cache[key] = entry
    return entry


def sample_fbm(spec: FbmSpec, grid: GridSpec, seed, rng: np.random.Generator | None = None) -> FieldSample:
    """One exact draw of a (p, q)-fBm on the grid via covariance factorization.

    Components are independent copies; the value at an origin node is pinned
    to exactly 0 (its variance vanishes).  A diagonal jitter is applied only
    if the factorization fails, and is recorded in the provenance.
    """
    if grid.p != spec.p:
        raise ValueError("grid dimension does not match the field's parameter dimension")
    low, active, origin, jitter = _grid_factor(spec.gamma, grid)
    if rng is None:
        rng = derive_rng(seed)
    z = rng.standard_normal((low.shape[0], spec.q))
    values = np.zeros((grid.n_points, spec.q))
    values[active] = low @ z
    return FieldSample(
        spec=spec,
        grid=grid,
        values=values,
        seed=_seed_int(seed),
        method="cholesky",
        jitter=jitter,
    )


def _seed_int(seed) -> int:
    if isinstance(seed, np.random.SeedSequence):
        ent = seed.entropy
        return int(ent if not isinstance(ent, (list, tuple)) else ent[0])
    return int(seed)


def _fgn_autocov(gamma: float, step: float, lags: np.ndarray) -> np.ndarray:
    k = np.abs(lags).astype(float)
    return 0.5 * step ** (2 * gamma) * (
        (k + 1) ** (2 * gamma) - 2 * k ** (2 * gamma) + np.abs(k - 1) ** (2 * gamma)
    )


def _circulant_sqrt_eigs(gamma: float, step: float, m: int) -> np.ndarray | None:
    """sqrt of the circulant-embedding eigenvalues for m fGn samples, or None."""
    lags = np.arange(m + 1)
    c = _fgn_autocov(gamma, step, lags)
    row = np.concatenate([c, c[-2:0:-1]])  # length 2m
    eig = np.fft.fft(row).real
    if eig.min() < -1e-9 * eig.max():
        return None
    return np.sqrt(np.maximum(eig, 0.0))


def _fgn_draws(sqrt_eig: np.ndarray, m: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """(count, m) stationary fGn rows from the spectral embedding."""
    two_m = 2 * m
    w = np.zeros((count, two_m), dtype=complex)
    w[:, 0] = rng.standard_normal(count)
    w[:, m] = rng.standard_normal(count)
    re = rng.standard_normal((count, m - 1))
    im = rng.standard_normal((count, m - 1))
    w[:, 1:m] = (re + 1j * im) / np.sqrt(2.0)
    w[:, m + 1 :] = np.conj(w[:, m - 1 : 0 : -1])
    x = np.fft.fft(sqrt_eig * w, axis=1) / np.sqrt(two_m)
    return x.real[:, :m]


def _lattice_layout(grid: GridSpec):
    """Express a uniform 1-D grid as indices on a lattice through 0.

    Returns (step, node_indices, n_steps_neg, n_steps_pos) or None when the
    nodes cannot be placed on a half-step lattice containing the origin.
    """
    nodes = grid.axis_nodes(0)
    if nodes.size < 2:
        return None
    h = nodes[1] - nodes[0]
    for refine in (1, 2):
        step = h / refine
        idx = nodes / step
        idx_round = np.rint(idx)
        if np.max(np.abs(idx - idx_round)) < 1e-9:
            idx_int = idx_round.astype(int)
            lo = min(idx_int.min(), 0)
            hi = max(idx_int.max(), 0)
            return step, idx_int, -lo, hi
    return None


def sample_fast1d(gamma: float, n_points: int, step: float, q: int, seed,
                  rng: np.random.Generator | None = None,
                  grid: GridSpec | None = None) -> FieldSample:
    """fBm on a uniform 1-D lattice by cumulating circulant-embedded fGn.

    Same law as sample_fbm on the same grid.  The default grid is
    {0, step, ..., (n_points-1) step}; any uniform 1-D grid whose nodes and
    the origin share a (half-)lattice is accepted via ``grid``.  If the
    spectral embedding is not nonnegative definite at the requested size the
    sampler falls back to Cholesky and flags it.
    """
    if grid is None:
        if n_points < 2:
            raise ValueError("need at least two grid points")
        grid = GridSpec(1, (n_points,), ((0.0, (n_points - 1) * step),), cap=max(DEFAULT_GRID_CAP, n_points))
    layout = _lattice_layout(grid)
    spec = FbmSpec(gamma, 1, q)
    if layout is None:
        out = sample_fbm(spec, grid, seed, rng=rng)
        out.fallback = True
        return out
    lat_step, node_idx, n_neg, n_pos = layout
    m = n_neg + n_pos
    sqrt_eig = _circulant_sqrt_eigs(gamma, lat_step, m)
    if sqrt_eig is None:
        out = sample_fbm(spec, grid, seed, rng=rng)
        out.fallback = True
        return out
    if rng is None:
        rng = derive_rng(seed)
    fgn = _fgn_draws(sqrt_eig, m, q, rng)  # increments over [k, k+1]*lat_step, k = -n_neg..n_pos-1
    # B at lattice site j (relative to 0) is the signed sum of increments from 0.
    bm = np.zeros((q, m + 1))
    bm[:, n_neg + 1 :] = np.cumsum(fgn[:, n_neg:], axis=1)
    if n_neg:
        bm[:, :n_neg] = -np.cumsum(fgn[:, :n_neg][:, ::-1], axis=1)[:, ::-1]
    values = bm[:, node_idx + n_neg].T  # (n_points, q)
    return FieldSample(
        spec=spec,
        grid=grid,
        values=values,
        seed=_seed_int(seed),
        method="fast1d",
    )


def sample_difference_field(
    spec: ProblemSpec,
    grid1: GridSpec,
    grid2: GridSpec,
    seed,
    method: str = "auto",
) -> DifferenceFieldSample:
    """Draw both fields independently and form X(s,t) = B1(s) - B2(t) pointwise.

    X has d components on the product grid; X(0,0) = 0 whenever both grids
    contain their origins.
    """
    if grid1.p != spec.n1 or grid2.p != spec.n2:
        raise ValueError("grid dimensions must match (n1, n2)")
    ss = np.random.SeedSequence(int(seed)) if not isinstance(seed, np.random.SeedSequence) else seed
    child1, child2 = ss.spawn(2)
    s1 = _sample_by_method(FbmSpec(spec.alpha1, spec.n1, spec.d), grid1, child1, method)
    s2 = _sample_by_method(FbmSpec(spec.alpha2, spec.n2, spec.d), grid2, child2, method)
    x = s1.values[:, None, :] - s2.values[None, :, :]
    return DifferenceFieldSample(sample1=s1, sample2=s2, x_values=x)


def _sample_by_method(fspec: FbmSpec, grid: GridSpec, seed, method: str) -> FieldSample:
    if method not in ("auto", "cholesky", "fast1d"):
        raise ValueError(f"unknown method {method!r}")
    use_fast = method == "fast1d" or (
        method == "auto" and grid.p == 1 and _lattice_layout(grid) is not None
        and grid.n_points > 256
    )
    if use_fast:
        return sample_fast1d(fspec.gamma, grid.n_points, grid.spacing(0), fspec.q, seed, grid=grid)
    return sample_fbm(fspec, grid, seed)
