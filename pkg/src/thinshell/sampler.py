"""Monte Carlo samplers for constant-energy surfaces and the
expectation-gap experiments comparing the two ensembles.

For homogeneous energies the direction of a Gibbs-distributed vector is
independent of its total energy, so drawing product samples and radially
projecting them onto the surface is exact.  In general that independence
fails; the general route conditions on a thin shell ``|R_n/n - t| <= delta``
before projecting, trading a bias of order delta for tractability.

Randomness uses counter-based Philox streams derived from ``(seed, block
index)``, so identical configurations reproduce batches bit for bit.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .gibbs1d import GibbsModel, GridParams
from .grids import DensityGrid
from .hamiltonians import SYMMETRIC, HamiltonianSpec, f_values
from .sumdensity import w_density

__all__ = [
    "SampleBatch",
    "TestFunction",
    "EnsembleGapReport",
    "central_projection",
    "sample_surface_scaling",
    "sample_surface_rejection",
    "ensemble_expectation_gap",
    "empirical_projection_check",
    "shell_mass",
    "save_batch",
    "load_batch",
]

_BLOCK = 1024
_MAGIC = b"THNSHL1\x00"
_HEADER = struct.Struct("<QQddBxxxxxxxdq")
_METHODS = ("scaling", "rejection")


@dataclass(frozen=True)
class SampleBatch:
    """Points on the surface, one per row, plus the sampling metadata."""

    points: np.ndarray
    n: int
    t: float
    c: float
    method: str
    delta: float | None
    acceptance_rate: float
    seed: int

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.points.ndim != 2 or self.points.shape[1] != self.n:
            raise ValueError("points must be a (count, n) matrix")

    @property
    def count(self) -> int:
        return self.points.shape[0]


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(block,))))


def _row_energies(spec: HamiltonianSpec, points: np.ndarray) -> np.ndarray:
    return np.sum(f_values(spec, points), axis=1)


# ---------------------------------------------------------------------------
# central projection onto the surface


def _project_rows(spec: HamiltonianSpec, rows: np.ndarray, target: float) -> np.ndarray:
    """Scale factors kappa with ``R_n(kappa x) = target`` per row."""
    if spec.homogeneous_degree is not None:
        return (target / _row_energies(spec, rows)) ** (1.0 / spec.homogeneous_degree)
    lo = np.full(rows.shape[0], 0.0)
    hi = np.full(rows.shape[0], 1.0)
    # expand the upper bracket until every row overshoots
    for _ in range(200):
        r = _row_energies(spec, hi[:, None] * rows)
        under = r < target
        if not np.any(under):
            break
        lo[under] = hi[under]
        hi[under] *= 2.0
    else:
        raise RuntimeError("bracket expansion failed in central projection")
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        over = _row_energies(spec, mid[:, None] * rows) > target
        hi = np.where(over, mid, hi)
        lo = np.where(over, lo, mid)
        if np.max((hi - lo) / hi) < 1e-13:
            break
    kappa = 0.5 * (lo + hi)
    return kappa


def central_projection(spec: HamiltonianSpec, x: np.ndarray, t: float) -> np.ndarray:
    """Radial image ``kappa * x`` on the surface at level nt, with the
    on-surface residual verified to relative 1e-10."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("central_projection takes a single vector")
    if not np.any(x != 0.0):
        raise ValueError("the zero vector has no radial image on the surface")
    if np.any(~np.isfinite(f_values(spec, x))):
        raise ValueError("coordinates outside the finiteness set")
    n = x.shape[0]
    target = n * t
    kappa = float(_project_rows(spec, x[None, :], target)[0])
    out = kappa * x
    resid = abs(float(_row_energies(spec, out[None, :])[0]) - target)
    if resid > 1e-10 * target:
        raise RuntimeError(f"projection residual {resid:.2e} exceeds tolerance")
    return out


# ---------------------------------------------------------------------------
# per-coordinate Gibbs sampling


class _CoordinateSampler:
    """Exact transforms where available, tabulated inverse CDF otherwise."""

    def __init__(self, model: GibbsModel):
        self.model = model
        self.spec = model.spec
        self._pchip = None
        kind = self.spec.kind
        if kind in ("quadratic", "linear_half", "power"):
            return
        # inverse CDF of the coordinate density exp(-c f)/Z on x >= 0
        x_max = model.quad.x_max
        xs = np.linspace(0.0, x_max, 2**16 + 1)
        pdf = np.exp(-model.c * f_values(self.spec, xs)) / model.z
        if self.spec.support == SYMMETRIC:
            pdf = 2.0 * pdf  # CDF of |X|
        cdf = np.concatenate(([0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * (xs[1] - xs[0]))))
        cdf /= cdf[-1]
        keep = np.concatenate(([True], np.diff(cdf) > 0))
        self._pchip = PchipInterpolator(cdf[keep], xs[keep])
        forward = PchipInterpolator(xs[keep], cdf[keep])
        probe = np.linspace(1e-6, 1.0 - 1e-6, 4001)
        resid = float(np.max(np.abs(forward(self._pchip(probe)) - probe)))
        if resid > 1e-10:
            raise RuntimeError(f"inverse-CDF table misses tolerance: residual {resid:.2e}")

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        spec, c = self.spec, self.model.c
        if spec.kind == "quadratic":
            return rng.normal(0.0, math.sqrt(0.5 / c), shape)
        if spec.kind == "linear_half":
            return rng.exponential(1.0 / c, shape)
        if spec.kind == "power":
            mag = rng.gamma(1.0 / spec.p, 1.0 / c, shape) ** (1.0 / spec.p)
            if spec.support == SYMMETRIC:
                return np.where(rng.random(shape) < 0.5, -mag, mag)
            return mag
        mag = self._pchip(rng.random(shape))
        if spec.support == SYMMETRIC:
            return np.where(rng.random(shape) < 0.5, -mag, mag)
        return mag


# ---------------------------------------------------------------------------
# surface samplers


def sample_surface_scaling(model: GibbsModel, n: int, count: int, seed: int) -> SampleBatch:
    """Exact sampler for homogeneous energies: product draws radially
    projected onto the surface."""
    spec = model.spec
    if spec.homogeneous_degree is None:
        raise ValueError(f"{spec.label} is not homogeneous; use the rejection sampler")
    sampler = _CoordinateSampler(model)
    target = n * model.mu
    points = np.empty((count, n))
    for block, start in enumerate(range(0, count, _BLOCK)):
        stop = min(start + _BLOCK, count)
        rng = _block_rng(seed, block)
        rows = sampler.draw(rng, (stop - start, n))
        kappa = _project_rows(spec, rows, target)
        points[start:stop] = kappa[:, None] * rows
    batch = SampleBatch(
        points=points,
        n=n,
        t=model.mu,
        c=model.c,
        method="scaling",
        delta=None,
        acceptance_rate=1.0,
        seed=seed,
    )
    _check_on_surface(spec, batch)
    return batch


def sample_surface_rejection(
    model: GibbsModel,
    n: int,
    delta: float,
    count: int,
    seed: int,
    max_draws: int = 20_000_000,
) -> SampleBatch:
    """General sampler: keep product draws inside the energy shell
    ``|R_n/n - t| <= delta``, then project the survivors to the surface."""
    if delta <= 0:
        raise ValueError("shell width must be positive")
    spec = model.spec
    sampler = _CoordinateSampler(model)
    t = model.mu
    target = n * t
    rows_kept = []
    kept = 0
    drawn = 0
    block = 0
    while kept < count:
        rng = _block_rng(seed, block)
        block += 1
        size = max(_BLOCK, min(65536, 4 * (count - kept)))
        rows = sampler.draw(rng, (size, n))
        drawn += size
        energies = _row_energies(spec, rows) / n
        accept = np.abs(energies - t) <= delta
        if np.any(accept):
            rows_kept.append(rows[accept])
            kept += int(np.count_nonzero(accept))
        if drawn >= max_draws:
            rate = kept / drawn
            if rate < 1e-4:
                raise RuntimeError(
                    f"acceptance rate {rate:.2e} below 1e-4 after {drawn} draws; widen the shell (delta)"
                )
            if kept < count:
                raise RuntimeError(f"draw budget exhausted at {kept}/{count} accepted; widen the shell or budget")
    rows = np.concatenate(rows_kept)[:count] if rows_kept else np.empty((0, n))
    if count:
        kappa = _project_rows(spec, rows, target)
        rows = kappa[:, None] * rows
    batch = SampleBatch(
        points=rows,
        n=n,
        t=t,
        c=model.c,
        method="rejection",
        delta=delta,
        acceptance_rate=kept / drawn if drawn else 1.0,
        seed=seed,
    )
    _check_on_surface(spec, batch)
    return batch


def _check_on_surface(spec: HamiltonianSpec, batch: SampleBatch) -> None:
    if batch.count == 0:
        return
    target = batch.n * batch.t
    resid = np.max(np.abs(_row_energies(spec, batch.points) - target))
    if resid > 1e-9 * target:
        raise RuntimeError(f"batch off the surface: residual {resid:.2e}")


def shell_mass(model: GibbsModel, n: int, delta: float, params: GridParams | None = None) -> float:
    """Predicted acceptance rate: the sum-density mass of the shell."""
    wn = w_density(model, n, params)
    cdf = wn.cdf_values()
    pts = wn.points()
    lo, hi = n * (model.mu - delta), n * (model.mu + delta)
    return float(np.interp(hi, pts, cdf) - np.interp(lo, pts, cdf))


# ---------------------------------------------------------------------------
# equivalence-of-ensembles experiments


@dataclass(frozen=True)
class TestFunction:
    """Test function of the first k coordinates with a declared growth
    class: 'bounded', 'constant', or 'energy' (dominated by a multiple of
    1 + sum of coordinate energies, with the multiple declared)."""

    fn: Callable[[np.ndarray], np.ndarray]
    k: int
    name: str
    growth: str
    m_const: float | None = None

    def __post_init__(self):
        if self.growth not in ("bounded", "constant", "energy"):
            raise ValueError(f"unknown growth class {self.growth!r}")
        if self.growth == "energy" and self.m_const is None:
            raise ValueError("energy-dominated test functions must declare their multiple")


@dataclass(frozen=True)
class EnsembleGapReport:
    n: int
    k: int
    testfn: str
    e_micro: float
    e_canon: float
    gap: float
    se_micro: float
    se_canon: float


def ensemble_expectation_gap(
    model: GibbsModel,
    n: int,
    k: int,
    testfn: TestFunction,
    batch: SampleBatch,
    canonical_count: int,
    seed: int,
) -> EnsembleGapReport:
    """Surface-sample mean of the test function against a product-measure
    Monte Carlo mean, with both standard errors."""
    if testfn.k > k or k > n:
        raise ValueError("test function uses more coordinates than requested")
    if batch.n != n:
        raise ValueError("batch dimension mismatch")
    micro_vals = np.asarray(testfn.fn(batch.points[:, :k]), dtype=float)
    e_micro = float(np.mean(micro_vals))
    se_micro = float(np.std(micro_vals, ddof=1) / math.sqrt(len(micro_vals))) if len(micro_vals) > 1 else 0.0

    sampler = _CoordinateSampler(model)
    sums = 0.0
    sumsq = 0.0
    done = 0
    block = 0
    while done < canonical_count:
        size = min(65536, canonical_count - done)
        rng = _block_rng(seed, 2_000_000 + block)
        block += 1
        vals = np.asarray(testfn.fn(sampler.draw(rng, (size, k))), dtype=float)
        sums += float(np.sum(vals))
        sumsq += float(np.sum(vals * vals))
        done += size
    e_canon = sums / canonical_count
    var = max(sumsq / canonical_count - e_canon**2, 0.0)
    se_canon = math.sqrt(var / canonical_count)
    return EnsembleGapReport(
        n=n,
        k=k,
        testfn=testfn.name,
        e_micro=e_micro,
        e_canon=e_canon,
        gap=abs(e_micro - e_canon),
        se_micro=se_micro,
        se_canon=se_canon,
    )


# ---------------------------------------------------------------------------
# empirical validation against the exact projection


def empirical_projection_check(batch: SampleBatch, reference: DensityGrid) -> float:
    """Kolmogorov-Smirnov statistic between the batch's first coordinate and
    the reference grid CDF (which must carry matching (n, t) metadata)."""
    meta = reference.meta or {}
    if meta.get("n") != batch.n or not math.isclose(meta.get("t", math.nan), batch.t, rel_tol=1e-9):
        raise ValueError("reference grid metadata does not match the batch (n, t)")
    xs = np.sort(batch.points[:, 0])
    cdf = np.interp(xs, reference.points(), reference.cdf_values())
    m = len(xs)
    ecdf_hi = np.arange(1, m + 1) / m
    ecdf_lo = np.arange(0, m) / m
    return float(np.max(np.maximum(np.abs(ecdf_hi - cdf), np.abs(cdf - ecdf_lo))))


# ---------------------------------------------------------------------------
# batch persistence


def save_batch(batch: SampleBatch, path) -> None:
    """Flat little-endian layout: magic, (n, count, t, c, method, delta,
    seed) header, then float64 rows."""
    header = _HEADER.pack(
        batch.n,
        batch.count,
        batch.t,
        batch.c,
        _METHODS.index(batch.method),
        batch.delta if batch.delta is not None else math.nan,
        batch.seed,
    )
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header)
        fh.write(np.ascontiguousarray(batch.points, dtype="<f8").tobytes())


def load_batch(path) -> SampleBatch:
    raw = Path(path).read_bytes()
    if raw[: len(_MAGIC)] != _MAGIC:
        raise ValueError("not a surface-batch file (bad magic)")
    n, count, t, c, method_idx, delta, seed = _HEADER.unpack_from(raw, len(_MAGIC))
    data = np.frombuffer(raw, dtype="<f8", offset=len(_MAGIC) + _HEADER.size, count=n * count)
    return SampleBatch(
        points=data.reshape(count, n).copy(),
        n=int(n),
        t=t,
        c=c,
        method=_METHODS[method_idx],
        delta=None if math.isnan(delta) else delta,
        acceptance_rate=math.nan,
        seed=int(seed),
    )
