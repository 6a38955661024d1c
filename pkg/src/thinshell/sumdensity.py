"""Densities of the total energy ``R_n = Y_1 + ... + Y_n`` under the Gibbs
product measure.

Two routes: closed Gamma forms for the quadratic and half-line linear
families, and a characteristic-function route (sample phi on the output
grid's conjugate frequencies, raise to the n-th power in polar form,
invert by FFT).  The leading edge behavior ``A y^gamma exp(-cy)`` of the
n-fold convolution is known from the single-summand edge model, so when
``gamma < 2`` (jump/kink/singularity at the support edge) that term is
subtracted in the frequency domain and added back in closed form; a plain
inversion would ring against the discontinuity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .gibbs1d import (
    GibbsModel,
    GridParams,
    _edge_model,
    _edge_transform,
    _grid_remainder,
    clt_prerequisites,
    log_y_density,
    y_density,
    y_edge_fit,
)
from .grids import DensityGrid, EdgeModel, make_grid

__all__ = [
    "LocalCltReport",
    "RatioBoundReport",
    "GridTooCoarseError",
    "gamma_shape",
    "log_w_exact",
    "w_exact",
    "w_fft",
    "w_density",
    "local_clt_scan",
    "log_ratio_bound_check",
]


class GridTooCoarseError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# closed forms


def gamma_shape(model: GibbsModel, n: int) -> float:
    """Gamma shape of R_n (rate is c) for the closed-form families."""
    spec = model.spec
    if spec.kind == "quadratic":
        return 0.5 * n
    if spec.kind == "linear_half":
        return float(n)
    raise ValueError(f"no closed-form sum density for {spec.label}")


def log_w_exact(model: GibbsModel, n: int, s) -> np.ndarray:
    """Pointwise log Gamma(shape, rate=c) density, -inf off the support."""
    a = gamma_shape(model, n)
    c = model.c
    s = np.asarray(s, dtype=float)
    out = np.full(s.shape, -np.inf)
    pos = s > 0
    with np.errstate(divide="ignore"):
        out[pos] = a * math.log(c) - gammaln(a) + (a - 1.0) * np.log(s[pos]) - c * s[pos]
    if a == 1.0:
        out[s == 0.0] = math.log(c)
    return out


def _sum_grid_extent(model: GibbsModel, n: int, params: GridParams) -> float:
    reach = n * model.mu + (params.sd_extent + params.pad_sd) * math.sqrt(n * model.sigma2)
    return max(reach, y_density(model, params).x_end)


def w_exact(model: GibbsModel, n: int, params: GridParams | None = None) -> DensityGrid:
    """Gamma sum density on a uniform grid, edge-aware for shape < 1."""
    params = params or GridParams()
    if n < 1:
        raise ValueError("need n >= 1")
    a = gamma_shape(model, n)
    c = model.c
    length = _sum_grid_extent(model, n, params)
    m = params.sum_size
    ds = length / m
    ss = ds * np.arange(m)
    values = np.zeros(m)
    values[1:] = np.exp(log_w_exact(model, n, ss[1:]))
    edge = None
    if a < 1.0:
        edge = EdgeModel(a - 1.0, a * math.log(c) - gammaln(a), c)
    elif a == 1.0:
        values[0] = c
    grid = make_grid(0.0, ds, values, edge=edge, meta={"kind": "w_exact", "n": n, "c": c})
    return grid.normalized()


# ---------------------------------------------------------------------------
# characteristic-function route


def _phi_on_conjugate_grid(model: GibbsModel, m: int, ds: float) -> tuple[np.ndarray, np.ndarray]:
    """phi at the angular frequencies conjugate to an m-point, ds-spaced grid."""
    us = 2.0 * math.pi * np.fft.fftfreq(m, d=ds)
    phi = _edge_transform(model, us)
    ys = ds * np.arange(1, m)
    rem = _grid_remainder(model, ys)
    if np.max(np.abs(rem)) > 1e-14 * float(np.max(np.exp(log_y_density(model, ys[:: max(1, m // 512)])))):
        full = np.concatenate(([0.0], rem))
        # trapezoid transform: sum with half-weight endpoints (left one is 0)
        spectrum = np.conj(np.fft.fft(full)) * ds
        spectrum -= 0.5 * ds * rem[-1] * np.exp(1j * us * ys[-1])
        phi = phi + spectrum
    return us, phi


def _polar_power(phi: np.ndarray, n: int) -> np.ndarray:
    """phi**n computed as exp(n log|phi| + i n unwrapped-phase)."""
    shifted = np.fft.fftshift(phi)
    mod = np.abs(shifted)
    log_mod = np.log(np.maximum(mod, 1e-300))
    phase = np.unwrap(np.angle(shifted))
    phase -= phase[len(phase) // 2]  # phi(0)=1 anchors the branch
    with np.errstate(over="ignore", under="ignore"):
        powered = np.exp(n * log_mod + 1j * n * phase)
    powered[mod == 0.0] = 0.0
    return np.fft.ifftshift(powered)


def w_fft(model: GibbsModel, n: int, params: GridParams | None = None) -> DensityGrid:
    """Sum density via phi**n and FFT inversion.

    Records the L1 mass removed by clipping negative ripple; more than 1e-3
    aborts with a refinement hint.  Requests with ``n`` below the scanned
    integrability order are allowed (the exact small cases need them) but
    flagged in ``meta``.
    """
    params = params or GridParams()
    if n < 1:
        raise ValueError("need n >= 1")
    beta, log_k = y_edge_fit(model)
    c = model.c
    length = _sum_grid_extent(model, n, params)
    for _ in range(4):
        m = params.sum_size
        ds = length / m
        us, phi = _phi_on_conjugate_grid(model, m, ds)
        psi = _polar_power(phi, n)
        gamma = n * (beta + 1.0) - 1.0
        a_log = n * (log_k + gammaln(beta + 1.0)) - gammaln(gamma + 1.0)
        edge_term = gamma < 2.0
        if edge_term:
            psi = psi - np.exp(a_log + gammaln(gamma + 1.0)) * (c - 1j * us) ** (-(gamma + 1.0))
        # second-order edge term of the convolution: n * lead^{n-1} * next
        efit = _edge_model(model)
        gamma2 = math.inf
        if efit.beta2 is not None and efit.coef2 != 0.0:
            gamma2 = (n - 1) * (beta + 1.0) + efit.beta2
            amp2_log = (
                math.log(n)
                + (n - 1) * (log_k + gammaln(beta + 1.0))
                + math.log(abs(efit.coef2))
                + gammaln(efit.beta2 + 1.0)
            )
            sign2 = 1.0 if efit.coef2 > 0 else -1.0
        edge_term2 = gamma2 < 2.0
        if edge_term2:
            psi = psi - sign2 * np.exp(amp2_log) * (c - 1j * us) ** (-(gamma2 + 1.0))
        w = np.fft.fft(psi).real / (m * ds)
        ss = ds * np.arange(1, m)
        if edge_term:
            with np.errstate(over="ignore", under="ignore"):
                w[1:] += np.exp(a_log + gamma * np.log(ss) - c * ss)
            # |gamma| at roundoff scale is a genuine jump at the edge
            w[0] = math.exp(a_log) if abs(gamma) <= 1e-9 else 0.0
        if edge_term2:
            with np.errstate(over="ignore", under="ignore"):
                w[1:] += sign2 * np.exp(amp2_log - gammaln(gamma2 + 1.0) + gamma2 * np.log(ss) - c * ss)
            if abs(gamma2) <= 1e-9:
                w[0] += sign2 * math.exp(amp2_log - gammaln(gamma2 + 1.0))
        # wrap-around guard: the mass sitting in the top of the grid (which
        # is what leaks back in under periodization) must be negligible;
        # pointwise checks would trip on the inversion's noise floor
        top = np.abs(w[-max(16, m // 64) :])
        if float(np.trapezoid(top, dx=ds)) <= 1e-9:
            break
        length *= 2.0
    else:
        raise GridTooCoarseError("could not silence wrap-around; increase sum_size")

    clip = np.clip(-w, 0.0, None)
    l1_clip = float(np.trapezoid(clip, dx=ds))
    if l1_clip > 1e-3:
        raise GridTooCoarseError(f"negative ripple mass {l1_clip:.2e} > 1e-3; increase sum_size")
    w = np.clip(w, 0.0, None)
    edge = None
    if edge_term and gamma < -1e-9:
        w[0] = 0.0
        if edge_term2:
            edge = EdgeModel(gamma, a_log, c, beta2=gamma2, coef2=sign2 * math.exp(amp2_log - gammaln(gamma2 + 1.0)))
        else:
            edge = EdgeModel(gamma, a_log, c)
    meta = {
        "kind": "w_fft",
        "n": n,
        "c": c,
        "l1_clip": l1_clip,
        "below_r_used": n < clt_prerequisites(model).r_used,
    }
    grid = make_grid(0.0, ds, w, edge=edge, meta=meta)
    return grid.normalized()


def w_density(model: GibbsModel, n: int, params: GridParams | None = None) -> DensityGrid:
    """Closed form when the family has one, FFT route otherwise."""
    if model.spec.has_closed_wn:
        return w_exact(model, n, params)
    return w_fft(model, n, params)


# ---------------------------------------------------------------------------
# local CLT scan


@dataclass(frozen=True)
class LocalCltReport:
    """Sup deviations of the standardized sum density from the standard
    normal, and the uniform constant they imply."""

    n_list: tuple[int, ...]
    sup_devs: tuple[float, ...]
    c_hat: float
    nu: float
    i_value: float
    r_used: int

    def __post_init__(self):
        if not (self.c_hat > 0 and all(math.isfinite(d) for d in self.sup_devs)):
            raise ValueError("scan produced non-finite deviations")


def _standard_normal(x: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _sup_deviation(model: GibbsModel, grid: DensityGrid, n: int) -> float:
    scale = math.sqrt(n * model.sigma2)
    center = n * model.mu
    xs = (grid.points() - center) / scale
    dev = float(np.max(np.abs(scale * grid.values - _standard_normal(xs))))
    # off the support (y < 0) the sum density vanishes but the normal does not
    x_left = -center / scale
    if x_left > -12.0:
        dev = max(dev, float(_standard_normal(np.asarray([x_left]))[0]))
    return dev


def local_clt_scan(model: GibbsModel, n_list, params: GridParams | None = None) -> LocalCltReport:
    """Estimate the uniform local-CLT constant empirically over n_list."""
    prereqs = clt_prerequisites(model)
    sup_devs = []
    for n in n_list:
        grid = w_fft(model, int(n), params)
        sup_devs.append(_sup_deviation(model, grid, int(n)))
    c_hat = max(math.sqrt(2.0 * math.pi * n) * d for n, d in zip(n_list, sup_devs))
    return LocalCltReport(
        n_list=tuple(int(n) for n in n_list),
        sup_devs=tuple(sup_devs),
        c_hat=float(c_hat),
        nu=prereqs.nu,
        i_value=prereqs.i_value,
        r_used=prereqs.r_used,
    )


# ---------------------------------------------------------------------------
# ratio bound


@dataclass(frozen=True)
class RatioBoundReport:
    n: int
    k: int
    c_used: float
    lhs: float
    rhs: float
    applicable: bool
    order_ok: bool
    passed: bool


def log_ratio_bound_check(model: GibbsModel, n: int, k: int, C: float, params: GridParams | None = None) -> RatioBoundReport:
    """Check ``sup_z log w_{n-k}(z) - log w_n(n mu) <= log(n/(n-k)) +
    2/(sqrt(n)/C - 1)``; the sup is the mode of ``w_{n-k}``."""
    if not (0 <= k < n):
        raise ValueError("need 0 <= k < n")
    applicable = math.sqrt(n) / C > 1.0
    order_ok = (n - k) >= clt_prerequisites(model).r_used
    if not applicable:
        return RatioBoundReport(n, k, C, math.nan, math.nan, False, order_ok, False)
    wnk = w_density(model, n - k, params)
    if wnk.edge is not None:
        lhs_sup = math.inf  # singular density: unbounded mode
    else:
        lhs_sup = float(np.max(wnk.log_values))
    if model.spec.has_closed_wn:
        log_wn_mean = float(log_w_exact(model, n, np.asarray([n * model.mu]))[0])
    else:
        log_wn_mean = float(w_density(model, n, params).log_at(n * model.mu)[0])
    lhs = lhs_sup - log_wn_mean
    rhs = math.log(n / (n - k)) + 2.0 / (math.sqrt(n) / C - 1.0)
    return RatioBoundReport(n, k, C, lhs, rhs, True, order_ok, lhs <= rhs)
