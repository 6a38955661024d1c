"""Projected densities of surface-distributed points and their divergences.

A point distributed on the constant-energy surface, projected to its first
k coordinates, has density ``g_k(y) * w_{n-k}(nt - R_k(y)) / w_n(nt)``;
the likelihood ratio against the Gibbs product density depends on y only
through ``R_k(y)``.  All divergences and distances are therefore computed
through one-dimensional integrals against ``w_k`` or against ``r_k``, the
conditional density of the partial energy given the total -- an identity,
not an approximation, which keeps k-dimensional quadrature out of the
picture entirely.

The total variation convention is the full L1 distance ``\\int |p - q|``
with range [0, 2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gibbs1d import GibbsModel, GridParams, clt_prerequisites
from .grids import DensityGrid, EdgeModel, make_grid
from .hamiltonians import SYMMETRIC, f_values, finv_values
from .sumdensity import log_w_exact, w_density

__all__ = [
    "ProjectionContext",
    "BoundReport",
    "ConverseReport",
    "MixtureReport",
    "make_context",
    "rk_conditional_density",
    "project_uniform_k1",
    "kl_to_gibbs",
    "tv_to_gibbs",
    "project_tilted",
    "bound_report",
    "converse_lower_bound",
    "mixture_bound_check",
    "logsum_property_check",
]


@dataclass(frozen=True)
class ProjectionContext:
    """Solved model plus the three sum densities an (n, k) cell needs.

    Closed-form families evaluate ``log w_{n-k}`` and ``log w_n(nt)``
    exactly; otherwise the FFT grids interpolate in log space.
    ``clt_ok`` records whether ``n - k`` reaches the scanned integrability
    order (the exact small cases deliberately run below it).
    """

    model: GibbsModel
    n: int
    k: int
    t: float
    wn: DensityGrid
    wk: DensityGrid
    wnk: DensityGrid
    log_wn_at_nt: float
    r_used: int
    clt_ok: bool
    exact: bool
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def log_wnk(self, s) -> np.ndarray:
        if self.exact:
            return log_w_exact(self.model, self.n - self.k, s)
        return self.wnk.log_at(s)


def make_context(
    model: GibbsModel,
    n: int,
    k: int,
    params: GridParams | None = None,
    require_clt: bool = False,
) -> ProjectionContext:
    if not 1 <= k < n:
        raise ValueError("need 1 <= k < n")
    params = params or GridParams()
    r_used = clt_prerequisites(model).r_used
    clt_ok = (n - k) >= r_used
    if require_clt and not clt_ok:
        raise ValueError(f"n-k = {n - k} below the scanned integrability order r = {r_used}")
    exact = model.spec.has_closed_wn
    wn = w_density(model, n, params)
    wk = w_density(model, k, params)
    wnk = w_density(model, n - k, params)
    nt = n * model.mu
    if exact:
        log_wn_at_nt = float(log_w_exact(model, n, np.asarray([nt]))[0])
    else:
        log_wn_at_nt = float(wn.log_at(nt)[0])
    if not math.isfinite(log_wn_at_nt):
        raise ValueError("w_n vanishes at the surface level nt; context is degenerate")
    return ProjectionContext(
        model=model,
        n=n,
        k=k,
        t=model.mu,
        wn=wn,
        wk=wk,
        wnk=wnk,
        log_wn_at_nt=log_wn_at_nt,
        r_used=r_used,
        clt_ok=clt_ok,
        exact=exact,
    )


# ---------------------------------------------------------------------------
# conditional density of the partial energy


def rk_conditional_density(ctx: ProjectionContext) -> DensityGrid:
    """``r_k(s) = w_k(s) w_{n-k}(nt - s) / w_n(nt)`` on the w_k grid.

    An exact identity up to grid error; the normalization defect is
    recorded and must stay below 1e-4.
    """
    if "rk" in ctx._cache:
        return ctx._cache["rk"]
    nt = ctx.n * ctx.t
    ss = ctx.wk.points()
    log_ratio = ctx.log_wnk(nt - ss) - ctx.log_wn_at_nt
    with np.errstate(over="ignore", invalid="ignore"):
        values = np.where(np.isfinite(log_ratio), ctx.wk.values * np.exp(log_ratio), 0.0)
    edge = None
    if ctx.wk.edge is not None:
        shift = float(ctx.log_wnk(np.asarray([nt]))[0]) - ctx.log_wn_at_nt
        e = ctx.wk.edge
        edge = EdgeModel(e.beta, e.log_k + shift, e.rate, e.beta2, e.coef2 * math.exp(shift))
        values[0] = 0.0
    grid = make_grid(ctx.wk.x0, ctx.wk.dx, values, edge=edge, meta={"kind": "rk", "n": ctx.n, "k": ctx.k})
    defect = abs(grid.mass - 1.0)
    if defect >= 1e-4:
        raise RuntimeError(f"r_k normalization defect {defect:.2e} >= 1e-4; grid inadequate")
    out = grid.normalized()
    ctx._cache["rk"] = out
    return out


def project_uniform_k1(ctx: ProjectionContext, params: GridParams | None = None) -> DensityGrid:
    """Coordinate-space density of the first coordinate under the uniform
    surface density: ``g_1(y) * w_{n-1}(nt - f(y)) / w_n(nt)`` (k = 1)."""
    if ctx.k != 1:
        raise ValueError("explicit coordinate-space output is built for k = 1")
    params = params or GridParams()
    model, spec = ctx.model, ctx.model.spec
    nt = ctx.n * ctx.t
    y_cap = float(finv_values(spec, np.asarray([min(nt, ctx.wk.x_end)]))[0])
    m = params.sum_size
    if spec.support == SYMMETRIC:
        ys = np.linspace(-y_cap, y_cap, m)
    else:
        ys = np.linspace(0.0, y_cap, m)
    fy = f_values(spec, ys)
    log_g1 = -model.c * fy - math.log(model.z)
    log_ratio = ctx.log_wnk(nt - fy) - ctx.log_wn_at_nt
    with np.errstate(invalid="ignore"):
        values = np.where(np.isfinite(log_ratio), np.exp(log_g1 + log_ratio), 0.0)
    if not np.any(values > 0):
        raise RuntimeError("support exhausted: the projected density vanishes on the whole grid")
    grid = make_grid(ys[0], ys[1] - ys[0], values, meta={"kind": "p_proj", "n": ctx.n, "k": 1, "t": ctx.t})
    if abs(grid.mass - 1.0) > 1e-4:
        raise RuntimeError(f"projected density mass {grid.mass!r} off by more than 1e-4")
    return grid.normalized()


# ---------------------------------------------------------------------------
# divergences of the uniform projection


def _log_ratio_fn(ctx: ProjectionContext):
    nt = ctx.n * ctx.t

    def fn(ss):
        lr = ctx.log_wnk(nt - np.asarray(ss, dtype=float)) - ctx.log_wn_at_nt
        return lr

    return fn


def kl_to_gibbs(ctx: ProjectionContext) -> float:
    """``D(p_{n,k,t} || g_k) = \\int r_k(s) log(w_{n-k}(nt-s)/w_n(nt)) ds``.

    Contributions where the ratio vanishes carry zero r_k mass and are
    dropped; a negative result beyond -1e-8 signals inconsistent grids.
    """
    rk = rk_conditional_density(ctx)
    lr = _log_ratio_fn(ctx)

    def fn(ss):
        out = lr(ss)
        return np.where(np.isfinite(out), out, 0.0)

    kl = rk.integrate(fn)
    if kl < -1e-8:
        raise RuntimeError(f"divergence clipped beyond tolerance: {kl:.3e}")
    return max(kl, 0.0)


def tv_to_gibbs(ctx: ProjectionContext) -> float:
    """``d_TV(p_{n,k,t}, g_k) = \\int w_k(s) |w_{n-k}(nt-s)/w_n(nt) - 1| ds``
    in the L1 convention (range [0, 2]); regions where the surface density
    has no support contribute their full w_k mass."""
    lr = _log_ratio_fn(ctx)

    def fn(ss):
        out = lr(ss)
        with np.errstate(over="ignore"):
            ratio = np.where(np.isfinite(out), np.exp(np.where(np.isfinite(out), out, 0.0)), 0.0)
        return np.abs(ratio - 1.0)

    tv = ctx.wk.integrate(fn)
    if not -1e-9 <= tv <= 2.0 + 1e-9:
        raise RuntimeError(f"total variation {tv!r} outside [0, 2]")
    return float(min(max(tv, 0.0), 2.0))


# ---------------------------------------------------------------------------
# tilted surface densities (k = 1)


def _tilted_rk(ctx: ProjectionContext, alpha: float) -> tuple[DensityGrid, float, float]:
    """Energy density under the tilt exp(alpha * s), its log-normalizer, and
    the surface-level divergence of the tilt."""
    rk = rk_conditional_density(ctx)
    if alpha == 0.0:
        return rk, 0.0, 0.0
    if alpha * rk.x_end > 690.0:
        raise OverflowError(f"tilt normalizer overflows on the grid (alpha = {alpha})")
    norm = rk.integrate(lambda s: np.exp(alpha * s))
    if not (math.isfinite(norm) and norm > 0.0):
        raise OverflowError("tilt normalizer is not finite on the grid")
    log_norm = math.log(norm)
    values = rk.values * np.exp(alpha * rk.points() - log_norm)
    edge = None
    if rk.edge is not None:
        e = rk.edge
        edge = EdgeModel(e.beta, e.log_k - log_norm, e.rate - alpha, e.beta2, e.coef2 * math.exp(-log_norm))
        values[0] = 0.0
    tilted = make_grid(rk.x0, rk.dx, values, edge=edge, meta={"kind": "rk_tilted", "alpha": alpha}).normalized()
    # tilt weight depends on projected coordinates only, so the divergence
    # from the uniform surface density reduces to the energy marginal
    d_surface = alpha * tilted.integrate(lambda s: s) - log_norm
    return tilted, log_norm, d_surface


def project_tilted(ctx: ProjectionContext, alpha: float, params: GridParams | None = None) -> tuple[DensityGrid, float]:
    """Tilted projected density ``p_a(y) = e^{a f(y)} p(y) / E[e^{a f}]`` and
    its divergence from the uniform surface density."""
    if ctx.k != 1:
        raise ValueError("tilts act on the first coordinate: k must be 1")
    _, log_norm, d_surface = _tilted_rk(ctx, alpha)
    base = project_uniform_k1(ctx, params)
    ys = base.points()
    fy = f_values(ctx.model.spec, ys)
    values = base.values * np.exp(alpha * fy - log_norm)
    grid = make_grid(base.x0, base.dx, values, meta={"kind": "p_tilted", "alpha": alpha, "n": ctx.n, "t": ctx.t})
    return grid.normalized(), d_surface


def _tilted_divergences(ctx: ProjectionContext, alpha: float) -> tuple[float, float, float]:
    """(kl, tv, d_surface) of the tilted projection against g_k."""
    tilted, log_norm, d_surface = _tilted_rk(ctx, alpha)
    lr = _log_ratio_fn(ctx)

    def kl_fn(ss):
        out = lr(ss)
        out = np.where(np.isfinite(out), out, 0.0)
        return alpha * ss + out - log_norm

    kl = tilted.integrate(kl_fn)
    if kl < -1e-8:
        raise RuntimeError(f"divergence clipped beyond tolerance: {kl:.3e}")

    def tv_fn(ss):
        out = lr(ss)
        with np.errstate(over="ignore"):
            ratio = np.where(np.isfinite(out), np.exp(alpha * ss + np.where(np.isfinite(out), out, 0.0) - log_norm), 0.0)
        return np.abs(ratio - 1.0)

    tv = ctx.wk.integrate(tv_fn)
    return max(kl, 0.0), float(min(max(tv, 0.0), 2.0)), d_surface


# ---------------------------------------------------------------------------
# bound assembly


@dataclass(frozen=True)
class BoundReport:
    """One (n, k, t, alpha) verification row.

    ``kl_bound`` is the surface divergence plus ``log(n/(n-k)) +
    2/(sqrt(n)/C - 1)`` with the empirical constant C; ``df_bound`` is the
    dimension-free total-variation bound available in the two closed-form
    families.  ``pass_tv`` checks against ``df_bound`` when present and
    against the Pinsker transform of ``kl_bound`` otherwise.
    """

    n: int
    k: int
    t: float
    c: float
    alpha: float
    kl: float
    tv: float
    kl_bound: float
    tv_from_kl: float
    df_bound: float | None
    c_used: float
    d_surface: float
    pass_kl: bool
    pass_tv: bool

    def __post_init__(self):
        if self.kl < 0.0:
            raise ValueError("divergence must be nonnegative")
        if not 0.0 <= self.tv <= 2.0:
            raise ValueError("total variation must lie in [0, 2]")
        if self.tv > self.tv_from_kl + 1e-8:
            raise ValueError(f"Pinsker relation violated: tv={self.tv!r} > sqrt(2 kl)={self.tv_from_kl!r}")


def _df_bound(spec_kind: str, n: int, k: int) -> float | None:
    if spec_kind == "quadratic" and n - k - 3 > 0:
        return 2.0 * (k + 3) / (n - k - 3)
    if spec_kind == "linear_half" and n - k - 1 > 0:
        return 2.0 * (k + 1) / (n - k - 1)
    return None


def bound_report(ctx: ProjectionContext, C: float, alpha: float = 0.0) -> BoundReport:
    if math.sqrt(ctx.n) / C <= 1.0:
        raise ValueError("bound inapplicable: need sqrt(n)/C > 1")
    if alpha == 0.0:
        kl, tv, d_surface = kl_to_gibbs(ctx), tv_to_gibbs(ctx), 0.0
    else:
        kl, tv, d_surface = _tilted_divergences(ctx, alpha)
    kl_bound = d_surface + math.log(ctx.n / (ctx.n - ctx.k)) + 2.0 / (math.sqrt(ctx.n) / C - 1.0)
    tv_from_kl = math.sqrt(2.0 * kl)
    # the dimension-free distance bounds cover the uniform surface density
    # only, so tilted rows fall back to the Pinsker transform of kl_bound
    df = _df_bound(ctx.model.spec.kind, ctx.n, ctx.k) if alpha == 0.0 else None
    pass_tv = tv <= df if df is not None else tv <= math.sqrt(2.0 * kl_bound)
    return BoundReport(
        n=ctx.n,
        k=ctx.k,
        t=ctx.t,
        c=ctx.model.c,
        alpha=alpha,
        kl=kl,
        tv=tv,
        kl_bound=kl_bound,
        tv_from_kl=tv_from_kl,
        df_bound=df,
        c_used=C,
        d_surface=d_surface,
        pass_kl=kl <= kl_bound,
        pass_tv=bool(pass_tv),
    )


# ---------------------------------------------------------------------------
# converse lower bound


@dataclass(frozen=True)
class ConverseReport:
    n: int
    k: int
    eps: float
    lower_bound: float
    tv_rk_wk: float


def converse_lower_bound(ctx: ProjectionContext, eps: float) -> ConverseReport:
    """Certified lower bound ``2 \\int_L w_k (ratio - 1)^+`` on the interval
    ``L = (kt - eps sqrt(n-k), kt + eps sqrt(n-k))``, plus the direct
    ``d_TV(r_k, w_k)`` for comparison (projection only reduces TV)."""
    nt = ctx.n * ctx.t
    center = ctx.k * ctx.t
    half = eps * math.sqrt(ctx.n - ctx.k)
    lo, hi = center - half, center + half
    lr = _log_ratio_fn(ctx)

    def fn(ss):
        ss = np.asarray(ss, dtype=float)
        out = lr(ss)
        with np.errstate(over="ignore"):
            ratio = np.where(np.isfinite(out), np.exp(np.where(np.isfinite(out), out, 0.0)), 0.0)
        gain = np.clip(ratio - 1.0, 0.0, None)
        return np.where((ss >= lo) & (ss <= hi), gain, 0.0)

    lower = 2.0 * ctx.wk.integrate(fn)

    # independent route: difference of the two densities on the shared grid
    rk = rk_conditional_density(ctx)
    diff = np.abs(rk.values - ctx.wk.values)
    tv_direct = float(np.trapezoid(diff[1:], dx=ctx.wk.dx))
    if ctx.wk.edge is not None and rk.edge is not None:
        scale = abs(math.exp(rk.edge.log_k - ctx.wk.edge.log_k) - 1.0)
        tv_direct += scale * ctx.wk.edge.mass_below(ctx.wk.dx)
    else:
        tv_direct += 0.5 * ctx.wk.dx * (diff[0] + diff[1])
    return ConverseReport(n=ctx.n, k=ctx.k, eps=eps, lower_bound=lower, tv_rk_wk=tv_direct)


# ---------------------------------------------------------------------------
# finite mixtures


@dataclass(frozen=True)
class MixtureReport:
    n: int
    k: int
    tv_sum: float
    bound: float
    per_term: tuple[float, ...]
    passed: bool


def mixture_bound_check(entries, n: int, k: int, params: GridParams | None = None) -> MixtureReport:
    """Triangle-inequality mixture distance ``sum_i w_i d_TV(p_i, g_i)``
    against ``sqrt(2k/(n-k))``; entries are (model, t, weight) triples with
    each model energy-matched to its t."""
    weights = np.asarray([w for (_, _, w) in entries], dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1")
    terms = []
    for model, t, _ in entries:
        if abs(model.mu - t) > 1e-8 * max(t, 1.0):
            raise ValueError(f"model not energy-matched to t={t!r}")
        ctx = make_context(model, n, k, params)
        terms.append(tv_to_gibbs(ctx))
    tv_sum = float(np.dot(weights, terms))
    bound = math.sqrt(2.0 * k / (n - k))
    return MixtureReport(n=n, k=k, tv_sum=tv_sum, bound=bound, per_term=tuple(terms), passed=tv_sum <= bound)


# ---------------------------------------------------------------------------
# discrete log-sum surrogate


def logsum_property_check(trials: int, size: int, seed: int, tol: float = 1e-12) -> int:
    """Gibbs-inequality form of the log-sum inequality on random nonneg
    vectors: ``sum g_i log(g_i/h_i) >= (sum g_i) log(sum g_i / sum h_i)``.
    Returns the number of passing trials (all of them, if the world is
    sane)."""
    rng = np.random.default_rng(seed)
    passes = 0
    for _ in range(trials):
        g = rng.uniform(0.0, 1.0, size)
        h = rng.uniform(0.0, 1.0, size)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(g > 0, g * np.log(np.where(g > 0, g, 1.0) / h), 0.0)
        lhs = float(np.sum(terms))
        rhs = float(np.sum(g) * np.log(np.sum(g) / np.sum(h)))
        if lhs >= rhs - tol:
            passes += 1
    return passes
