"""Uniform-grid numerical densities with log-space evaluation.

A :class:`DensityGrid` stores a one-dimensional density on an equally
spaced grid.  Densities with an integrable power-law blow-up at the left
edge (e.g. energy densities behaving like ``K * y**beta * exp(-rate*y)``
with ``-1 < beta < 0`` near ``y = 0``) carry an :class:`EdgeModel`.
Integration then splits the domain: over a prefix of cells the model is
integrated in closed form (Gauss-Legendre against smooth factors) and only
the smooth model remainder goes through the trapezoid rule, so the
power-law part never sees the rule that would diverge on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammainc, gammaln

__all__ = ["EdgeModel", "DensityGrid", "make_grid"]

# Gauss-Legendre rules reused for all edge-cell integrals.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_GL01 = 0.5 * (_GL_NODES + 1.0)
_GLW01 = 0.5 * _GL_WEIGHTS
_GL8_NODES, _GL8_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL8 = 0.5 * (_GL8_NODES + 1.0)
_GL8W = 0.5 * _GL8_WEIGHTS

# number of leading cells integrated against the edge model
_MODEL_CELLS = 256

_LOG_ZERO = -np.inf


@dataclass(frozen=True)
class EdgeModel:
    """Local model for the density near the left grid edge, ``v = x - x0``:

        exp(log_k) * v**beta * exp(-rate*v)  +  coef2 * v**beta2 * exp(-rate*v)

    The leading term has ``beta > -1`` (finite mass); the optional second
    term captures the next order of the expansion so the sampled remainder
    is smooth enough for the trapezoid rule.
    """

    beta: float
    log_k: float
    rate: float
    beta2: float | None = None
    coef2: float = 0.0

    def __post_init__(self):
        if not self.beta > -1.0:
            raise ValueError(f"edge exponent must exceed -1, got {self.beta}")

    def log_density(self, v) -> np.ndarray:
        """Leading term only; used for log interpolation inside the first cell."""
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore"):
            return self.log_k + self.beta * np.log(v) - self.rate * v

    def density(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            out = np.exp(self.log_density(v))
            if self.beta2 is not None:
                out = out + self.coef2 * v**self.beta2 * np.exp(-self.rate * v)
        return out

    def _term_mass(self, log_c: float, sign: float, a: float, v: float) -> float:
        if self.rate > 0:
            return sign * float(np.exp(log_c + gammaln(a) - a * np.log(self.rate)) * gammainc(a, self.rate * v))
        return sign * float(np.exp(log_c) * v**a / a)

    def mass_below(self, v: float) -> float:
        """Exact ``\\int_0^v model(u) du``: incomplete gamma functions for a
        positive rate, pure power laws at rate zero, quadrature otherwise
        (a growing exponential has no incomplete-gamma form)."""
        if self.rate < 0:
            return self.first_cell_integral(v, lambda u: np.ones_like(u))
        out = self._term_mass(self.log_k, 1.0, self.beta + 1.0, v)
        if self.beta2 is not None and self.coef2 != 0.0:
            sign = 1.0 if self.coef2 > 0 else -1.0
            out += self._term_mass(np.log(abs(self.coef2)), sign, self.beta2 + 1.0, v)
        return out

    def first_cell_integral(self, dx: float, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        """``\\int_0^dx model(v) fn(v) dv`` for smooth ``fn``.

        The substitution ``v = dx * s**(1/(beta+1))`` absorbs the leading
        power-law weight exactly, leaving Gauss-Legendre a smooth integrand.
        """
        a = self.beta + 1.0
        v = dx * _GL01 ** (1.0 / a)
        w = (dx**a / a) * _GLW01
        core = np.exp(self.log_k) * np.exp(-self.rate * v)
        if self.beta2 is not None:
            core = core + self.coef2 * v ** (self.beta2 - self.beta) * np.exp(-self.rate * v)
        return float(np.sum(w * core * fn(v)))

    def prefix_integral(self, dx: float, cells: int, fn: Callable[[np.ndarray], np.ndarray] | None) -> float:
        """``\\int_0^{cells*dx} model(v) fn(v) dv`` (``fn=None`` -> 1)."""
        if fn is None:
            return self.mass_below(cells * dx)
        total = self.first_cell_integral(dx, fn)
        if cells > 1:
            # smooth cells away from the singular endpoint: vectorized GL
            starts = dx * np.arange(1, cells)[:, None]
            v = starts + dx * _GL8[None, :]
            total += float(dx * np.sum(_GL8W[None, :] * self.density(v) * fn(v)))
        return total


@dataclass(frozen=True)
class DensityGrid:
    """Nonnegative density sampled on ``x0 + dx * arange(len(values))``.

    ``log_values[i]`` is ``log(values[i])`` where positive and ``-inf``
    otherwise.  ``mass`` is the integral over the grid; when ``edge`` is set
    the node at ``x0`` is a 0 sentinel and integrals are edge-aware.
    """

    x0: float
    dx: float
    values: np.ndarray
    log_values: np.ndarray = field(repr=False)
    mass: float
    edge: EdgeModel | None = None
    meta: dict | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def x_end(self) -> float:
        return self.x0 + self.dx * (len(self.values) - 1)

    def points(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(len(self.values))

    def log_at(self, x) -> np.ndarray:
        """Log-density at arbitrary points: linear interpolation of the log
        values (geometric interpolation of the density), the edge model
        inside the first cell, ``-inf`` outside the grid or next to a zero
        node."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.full(x.shape, _LOG_ZERO)
        pos = (x - self.x0) / self.dx
        inside = (pos >= 0.0) & (pos <= len(self.values) - 1)
        if self.edge is not None:
            cell = inside & (pos < 1.0) & (pos > 0.0)
            out[cell] = self.edge.log_density(x[cell] - self.x0)
            inside &= pos >= 1.0
        idx = np.clip(np.floor(pos[inside]).astype(int), 0, len(self.values) - 2)
        frac = pos[inside] - idx
        lo = self.log_values[idx]
        hi = self.log_values[idx + 1]
        with np.errstate(invalid="ignore"):
            interp = lo + frac * (hi - lo)
        interp[~np.isfinite(lo) | ~np.isfinite(hi)] = _LOG_ZERO
        exact = frac == 0.0
        interp[exact] = lo[exact]
        out[inside] = interp
        return out

    def at(self, x) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_at(x))

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray] | None = None) -> float:
        """``\\int fn(x) density(x) dx`` over the grid (``fn=None`` -> mass)."""
        return _integrate(self.dx, self.x0, self.values, self.edge, fn)

    def mean(self) -> float:
        return self.integrate(lambda x: x) / self.mass

    def var(self) -> float:
        m = self.mean()
        return self.integrate(lambda x: (x - m) ** 2) / self.mass

    def cdf_values(self) -> np.ndarray:
        """Cumulative mass at the grid nodes."""
        inc = 0.5 * self.dx * (self.values[1:] + self.values[:-1])
        out = np.concatenate(([0.0], np.cumsum(inc)))
        if self.edge is not None:
            m = min(_MODEL_CELLS, len(self.values) - 1)
            vs = self.points()[: m + 1] - self.x0
            model_cum = np.array([self.edge.mass_below(v) for v in vs])
            rem = self.values[: m + 1] - self.edge.density(vs)
            rem[0] = 0.0
            rem_inc = 0.5 * self.dx * (rem[1:] + rem[:-1])
            out[: m + 1] = model_cum + np.concatenate(([0.0], np.cumsum(rem_inc)))
            out[m + 1 :] = out[m] + np.cumsum(inc[m:])
        return out

    def normalized(self) -> "DensityGrid":
        """Rescaled copy with unit mass; the defect is kept in ``meta``."""
        scale = 1.0 / self.mass
        meta = dict(self.meta or {})
        meta["norm_defect"] = abs(self.mass - 1.0)
        edge = self.edge
        if edge is not None:
            edge = EdgeModel(edge.beta, edge.log_k + np.log(scale), edge.rate, edge.beta2, edge.coef2 * scale)
        return make_grid(self.x0, self.dx, self.values * scale, edge=edge, meta=meta)


def _integrate(dx, x0, values, edge, fn):
    xs = x0 + dx * np.arange(len(values))
    weighted = values if fn is None else values * fn(xs)
    if edge is None:
        return float(np.trapezoid(weighted, dx=dx))
    # model part in closed form over the leading cells, trapezoid on the
    # model remainder (smooth near the edge) and on the rest of the grid
    m = min(_MODEL_CELLS, len(values) - 1)
    shifted = None if fn is None else (lambda v: fn(x0 + v))
    model_part = edge.prefix_integral(dx, m, shifted)
    vs = xs[: m + 1] - x0
    with np.errstate(invalid="ignore"):
        rem = weighted[: m + 1] - edge.density(vs) * (1.0 if fn is None else fn(xs[: m + 1]))
    rem[0] = 0.0  # sentinel node: the model term is singular there
    rem_part = float(np.trapezoid(rem, dx=dx))
    bulk = float(np.trapezoid(weighted[m:], dx=dx))
    return model_part + rem_part + bulk


def make_grid(
    x0: float,
    dx: float,
    values: np.ndarray,
    edge: EdgeModel | None = None,
    meta: dict | None = None,
) -> DensityGrid:
    values = np.asarray(values, dtype=float)
    if np.any(values < 0):
        values = np.clip(values, 0.0, None)
    if edge is not None and values[0] != 0.0:
        raise ValueError("singular-edge grids use a 0 sentinel at node 0")
    with np.errstate(divide="ignore"):
        log_values = np.where(values > 0, np.log(np.where(values > 0, values, 1.0)), _LOG_ZERO)
    mass = _integrate(dx, x0, values, edge, None)
    return DensityGrid(x0=x0, dx=dx, values=values, log_values=log_values, mass=float(mass), edge=edge, meta=meta)
