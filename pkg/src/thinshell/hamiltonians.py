"""Per-coordinate energy functions and numerical admissibility checks.

An additive energy ``R_n(x) = sum_i f(x_i)`` is built from a single
function ``f`` that is zero at the origin, strictly increasing on
``x > 0``, and either infinite on the negative half-line or symmetric.
Admissibility for the downstream convergence machinery additionally
requires a positive lower bound on the tail slope and a controlled
``f'(x)**q / f(x)`` ratio near the origin; :func:`check_class_f`
certifies both on finite scan grids and reports the witnesses found.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "HALF_LINE",
    "SYMMETRIC",
    "HamiltonianSpec",
    "MembershipReport",
    "ScanParams",
    "quadratic",
    "linear_half",
    "power",
    "quartic_perturbed",
    "custom",
    "evaluate",
    "derivative",
    "inverse",
    "f_values",
    "fprime_values",
    "finv_values",
    "check_class_f",
    "format_spec",
    "parse_spec",
]

HALF_LINE = "half_line"
SYMMETRIC = "symmetric"

_KINDS = ("quadratic", "linear_half", "power", "quartic_perturbed", "custom")


@dataclass(frozen=True)
class HamiltonianSpec:
    """One member of the energy family, with evaluators for f, f' and f^-1.

    ``fn``/``dfn``/``ifn`` act on nonnegative arrays; the symmetric case is
    generated by reflection.  ``homogeneous_degree`` is set when
    ``f(a*x) = a**d * f(x)``, which the surface samplers exploit.
    """

    kind: str
    support: str
    p: float | None = None
    eps: float | None = None
    fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    dfn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    ifn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    has_closed_z: bool = False
    has_closed_wn: bool = False
    homogeneous_degree: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.support not in (HALF_LINE, SYMMETRIC):
            raise ValueError(f"unknown support {self.support!r}")
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom specs need an evaluator")

    @property
    def label(self) -> str:
        if self.kind == "power":
            return f"power(p={self.p:g})"
        if self.kind == "quartic_perturbed":
            return f"quartic_perturbed(eps={self.eps:g})"
        return self.kind


def quadratic() -> HamiltonianSpec:
    return HamiltonianSpec(
        kind="quadratic",
        support=SYMMETRIC,
        fn=lambda x: x * x,
        dfn=lambda x: 2.0 * x,
        ifn=lambda y: np.sqrt(y),
        has_closed_z=True,
        has_closed_wn=True,
        homogeneous_degree=2.0,
    )


def linear_half() -> HamiltonianSpec:
    return HamiltonianSpec(
        kind="linear_half",
        support=HALF_LINE,
        fn=lambda x: np.asarray(x, dtype=float).copy(),
        dfn=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        ifn=lambda y: np.asarray(y, dtype=float).copy(),
        has_closed_z=True,
        has_closed_wn=True,
        homogeneous_degree=1.0,
    )


def power(p: float, support: str = HALF_LINE) -> HamiltonianSpec:
    if p < 1.0:
        raise ValueError("power exponent must satisfy p >= 1")
    return HamiltonianSpec(
        kind="power",
        support=support,
        p=float(p),
        fn=lambda x: np.power(x, p),
        dfn=lambda x: p * np.power(x, p - 1.0),
        ifn=lambda y: np.power(y, 1.0 / p),
        homogeneous_degree=float(p),
    )


def quartic_perturbed(eps: float) -> HamiltonianSpec:
    if eps < 0.0:
        raise ValueError("quartic perturbation must be nonnegative")

    def _inv(y):
        y = np.asarray(y, dtype=float)
        if eps == 0.0:
            return np.sqrt(y)
        # x**2 solves eps*u**2 + u - y = 0; the stable positive root
        return np.sqrt(2.0 * y / (1.0 + np.sqrt(1.0 + 4.0 * eps * y)))

    return HamiltonianSpec(
        kind="quartic_perturbed",
        support=SYMMETRIC,
        eps=float(eps),
        fn=lambda x: x * x + eps * x**4,
        dfn=lambda x: 2.0 * x + 4.0 * eps * x**3,
        ifn=_inv,
        homogeneous_degree=2.0 if eps == 0.0 else None,
    )


def custom(
    fn: Callable[[np.ndarray], np.ndarray],
    support: str = HALF_LINE,
    dfn: Callable[[np.ndarray], np.ndarray] | None = None,
    ifn: Callable[[np.ndarray], np.ndarray] | None = None,
) -> HamiltonianSpec:
    """User-supplied f on ``x >= 0`` (vectorized); derivative and inverse
    fall back to finite differences and bisection when not given."""
    return HamiltonianSpec(kind="custom", support=support, fn=fn, dfn=dfn, ifn=ifn)


# ---------------------------------------------------------------------------
# evaluation


def f_values(spec: HamiltonianSpec, x) -> np.ndarray:
    """Vectorized f with +inf outside the finiteness set."""
    x = np.asarray(x, dtype=float)
    if spec.support == SYMMETRIC:
        return spec.fn(np.abs(x))
    out = np.full(x.shape, math.inf)
    ok = x >= 0.0
    if np.any(ok):
        out[ok] = spec.fn(x[ok])
    return out


def evaluate(spec: HamiltonianSpec, x: float) -> float:
    return float(f_values(spec, np.asarray([x]))[0])


def fprime_values(spec: HamiltonianSpec, x) -> np.ndarray:
    """f' on x > 0; central finite difference for custom specs.

    The step is relative (h = 1e-6 x) so the quadratic truncation term
    (h/x)^2 stays at the 1e-12 level across all scales.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("derivative requires x > 0")
    if spec.dfn is not None:
        return spec.dfn(x)
    h = 1e-6 * x
    return (spec.fn(x + h) - spec.fn(x - h)) / (2.0 * h)


def derivative(spec: HamiltonianSpec, x: float) -> float:
    return float(fprime_values(spec, np.asarray([x]))[0])


def _tail_witness(spec: HamiltonianSpec) -> tuple[float, float] | None:
    report = check_class_f(spec)
    return report.tail_slope


def finv_values(spec: HamiltonianSpec, y, rtol: float = 1e-12) -> np.ndarray:
    """Unique x >= 0 with f(x) = y; bisection for custom specs."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0.0):
        raise ValueError("inverse requires y >= 0")
    if spec.ifn is not None:
        return spec.ifn(y)
    witness = _tail_witness(spec)
    if witness is None:
        raise ValueError("cannot bracket the inverse: no tail slope witness")
    a1, a2 = witness
    hi = np.maximum(1.0, y) / a1 + a2
    lo = np.zeros_like(y)
    for step in range(200):
        mid = 0.5 * (lo + hi)
        high = spec.fn(mid) > y
        hi = np.where(high, mid, hi)
        lo = np.where(high, lo, mid)
        if np.all(hi - lo <= rtol * np.maximum(hi, 1.0)):
            break
    else:
        raise RuntimeError("inverse bisection did not converge in 200 steps")
    return 0.5 * (lo + hi)


def inverse(spec: HamiltonianSpec, y: float) -> float:
    return float(finv_values(spec, np.asarray([y]))[0])


# ---------------------------------------------------------------------------
# class membership


@dataclass(frozen=True)
class ScanParams:
    origin_lo: float = 1e-8
    origin_hi: float = 1e-1
    tail_lo: float = 1.0
    tail_hi: float = 1e6
    points_per_decade: int = 8
    q_grid: tuple[float, ...] = tuple(np.round(np.linspace(1.05, 1.95, 19), 2))
    a3_threshold: float = 1e-6
    # f' decaying like x**e with e below this is treated as sinking to zero
    decay_exponent_floor: float = -0.05


@dataclass(frozen=True)
class MembershipReport:
    f0_ok: bool
    monotone_ok: bool
    support_ok: bool
    tail_slope: tuple[float, float] | None
    origin_exponent: tuple[float, float] | None
    overall: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self,
            "overall",
            self.f0_ok
            and self.monotone_ok
            and self.support_ok
            and self.tail_slope is not None
            and self.origin_exponent is not None,
        )


def _log_grid(lo: float, hi: float, per_decade: int) -> np.ndarray:
    n = max(2, int(math.ceil(per_decade * math.log10(hi / lo))) + 1)
    return np.geomspace(lo, hi, n)


def check_class_f(spec: HamiltonianSpec, scan: ScanParams | None = None) -> MembershipReport:
    """Certify admissibility numerically and record the witnesses.

    The tail condition passes when the sampled slope stays positive and its
    log-log trend over the last two decades is flat or rising; the origin
    condition searches the q grid and keeps the witness with the largest
    margin ``min f'(x)**q / f(x)``.
    """
    scan = scan or ScanParams()
    f0_ok = evaluate(spec, 0.0) == 0.0

    origin = _log_grid(scan.origin_lo, scan.origin_hi, scan.points_per_decade)
    tail = _log_grid(scan.tail_lo, scan.tail_hi, scan.points_per_decade)
    xs = np.concatenate([origin, tail])
    fx = spec.fn(xs)
    monotone_ok = bool(np.all(np.diff(fx) > 0.0)) and bool(np.all(fx > 0.0))

    if spec.support == HALF_LINE:
        support_ok = evaluate(spec, -1.0) == math.inf and evaluate(spec, -1e-9) == math.inf
    else:
        probe = np.array([0.3, 1.7, 42.0])
        support_ok = bool(np.allclose(f_values(spec, -probe), f_values(spec, probe), rtol=0, atol=0))

    tail_slope = None
    slopes = fprime_values(spec, tail)
    if monotone_ok and np.all(slopes > 0.0):
        two_decades = tail >= scan.tail_hi / 100.0
        trend = np.polyfit(np.log(tail[two_decades]), np.log(slopes[two_decades]), 1)[0]
        if trend >= scan.decay_exponent_floor:
            tail_slope = (float(np.min(slopes) / 2.0), float(scan.tail_lo))

    origin_exponent = None
    if monotone_ok:
        fp0 = fprime_values(spec, origin)
        f0 = spec.fn(origin)
        best_q, best_a3 = None, -math.inf
        for q in scan.q_grid:
            a3 = float(np.min(fp0**q / f0))
            if a3 > best_a3:
                best_q, best_a3 = float(q), a3
        if best_q is not None and best_a3 >= scan.a3_threshold:
            origin_exponent = (best_q, best_a3)

    return MembershipReport(
        f0_ok=f0_ok,
        monotone_ok=monotone_ok,
        support_ok=support_ok,
        tail_slope=tail_slope,
        origin_exponent=origin_exponent,
    )


# ---------------------------------------------------------------------------
# key=value serialization for config files


def format_spec(spec: HamiltonianSpec) -> str:
    if spec.kind == "custom":
        raise ValueError("custom specs carry callables and cannot be serialized")
    lines = [f"kind={spec.kind}"]
    if spec.p is not None:
        lines.append(f"p={spec.p:g}")
    if spec.eps is not None:
        lines.append(f"epsilon={spec.eps:g}")
    lines.append(f"support={spec.support}")
    return "\n".join(lines) + "\n"


def parse_spec(text: str) -> HamiltonianSpec:
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        fields[key] = value
    return spec_from_fields(fields)


def spec_from_fields(fields: dict[str, str]) -> HamiltonianSpec:
    kind = fields.get("kind")
    if kind is None:
        raise ValueError("missing key 'kind'")
    support = fields.get("support")
    if kind == "quadratic":
        return quadratic()
    if kind == "linear_half":
        return linear_half()
    if kind == "power":
        if "p" not in fields:
            raise ValueError("power specs need key 'p'")
        return power(float(fields["p"]), support=support or HALF_LINE)
    if kind == "quartic_perturbed":
        if "epsilon" not in fields:
            raise ValueError("quartic_perturbed specs need key 'epsilon'")
        return quartic_perturbed(float(fields["epsilon"]))
    raise ValueError(f"unknown kind {kind!r}")
