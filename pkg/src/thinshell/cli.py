"""Batch command-line front-end: config parsing, sweeps, CSV emission.

Configuration is a flat ``key=value`` text file (lists comma-separated)
with every key overridable from the command line; experiments are sweeps,
so the file is the unit of reproducibility.  Floating-point output is
fixed at 17 significant digits so equal configs produce byte-identical
CSVs.  ``--strict`` turns any failed bound check into a nonzero exit for
CI consumption.  ``THINSHELL_THREADS`` caps the sweep worker pool.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from . import projection, sampler
from .gibbs1d import GibbsModel, GridParams, solve_energy
from .hamiltonians import check_class_f, f_values, spec_from_fields
from .sumdensity import local_clt_scan, w_exact, w_fft

__all__ = ["ExperimentConfig", "main"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "quadratic"
    p: float | None = None
    epsilon: float | None = None
    support: str | None = None
    t: float = 1.0
    n: int | None = None
    n_list: tuple[int, ...] = (50, 100, 200)
    k_list: tuple[int, ...] = (1, 3, 5)
    alpha_list: tuple[float, ...] = (0.0,)
    clt_n_list: tuple[int, ...] = (8, 16, 32, 64, 128, 256)
    c_override: float | None = None
    grid_size: int | None = None
    grid_extent: float | None = None
    count: int = 10_000
    canonical_count: int = 10_000
    delta: float | None = None
    method: str = "scaling"
    testfn: str = "f1+f2"
    eps: float = 1.0
    k_frac: float = 0.5
    mixture_t_list: tuple[float, ...] = (0.5, 1.0)
    mixture_weights: tuple[float, ...] = (0.5, 0.5)
    seed: int = 0
    out: str | None = None
    strict: bool = False

    def validate(self) -> None:
        if not self.n_list or not self.k_list:
            raise ConfigError("n_list and k_list must be nonempty")
        for n in self.n_list:
            for k in self.k_list:
                if not 1 <= k < n:
                    raise ConfigError(f"every k must satisfy 1 <= k < n; got k={k}, n={n}")
        if len(self.mixture_t_list) != len(self.mixture_weights):
            raise ConfigError("mixture_t_list and mixture_weights differ in length")

    def spec(self):
        raw = {"kind": self.kind}
        if self.p is not None:
            raw["p"] = str(self.p)
        if self.epsilon is not None:
            raw["epsilon"] = str(self.epsilon)
        if self.support is not None:
            raw["support"] = self.support
        return spec_from_fields(raw)

    def grid_params(self) -> GridParams:
        params = GridParams()
        if self.grid_size is not None:
            params = replace(params, sum_size=self.grid_size)
        if self.grid_extent is not None:
            params = replace(params, sd_extent=self.grid_extent)
        return params


_LIST_KEYS = {"n_list", "k_list", "alpha_list", "clt_n_list", "mixture_t_list", "mixture_weights"}
_INT_KEYS = {"n", "grid_size", "count", "canonical_count", "seed"}
_FLOAT_KEYS = {"p", "epsilon", "t", "c_override", "grid_extent", "delta", "eps", "k_frac"}


def _convert(key: str, value: str, where: str):
    try:
        if key in _LIST_KEYS:
            parts = [v.strip() for v in value.split(",") if v.strip()]
            if key in ("n_list", "k_list", "clt_n_list"):
                return tuple(int(v) for v in parts)
            return tuple(float(v) for v in parts)
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key == "strict":
            return value.lower() in ("1", "true", "yes")
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {value!r} ({exc})") from None
    return value


def parse_config_file(path: str) -> dict:
    out = {}
    valid = {f.name for f in fields(ExperimentConfig)}
    try:
        lines = open(path, encoding="utf-8").read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in valid:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _convert(key, value, f"{path}:{lineno}")
    return out


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if args.config:
        values.update(parse_config_file(args.config))
    for opt in ("kind", "p", "epsilon", "support", "t", "n", "n_list", "k_list", "alpha_list",
                "clt_n_list", "c_override", "grid_size", "grid_extent", "count", "canonical_count",
                "delta", "method", "testfn", "eps", "k_frac", "mixture_t_list", "mixture_weights",
                "seed", "out"):
        val = getattr(args, opt, None)
        if val is not None:
            values[opt] = _convert(opt, val, "command line") if isinstance(val, str) else val
    if getattr(args, "strict", False):
        values["strict"] = True
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# CSV helpers


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    return str(value)


def write_csv(path: str | None, header: list[str], rows: list[list]) -> None:
    text = "\n".join([",".join(header)] + [",".join(_fmt(v) for v in row) for row in rows]) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _pool_size(cells: int) -> int:
    cap = os.environ.get("THINSHELL_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(cells, limit))


def _solved(cfg: ExperimentConfig) -> GibbsModel:
    return solve_energy(cfg.spec(), cfg.t)


def _c_hat(cfg: ExperimentConfig, model: GibbsModel) -> float:
    if cfg.c_override is not None:
        return cfg.c_override
    return local_clt_scan(model, cfg.clt_n_list, cfg.grid_params()).c_hat


# ---------------------------------------------------------------------------
# subcommands


def run_analyze_f(cfg: ExperimentConfig) -> int:
    report = check_class_f(cfg.spec())
    spec = cfg.spec()
    print(f"family: {spec.label} (support: {spec.support})")
    print(f"  zero at origin:      {'yes' if report.f0_ok else 'NO'}")
    print(f"  strictly increasing: {'yes' if report.monotone_ok else 'NO'}")
    print(f"  support condition:   {'yes' if report.support_ok else 'NO'}")
    if report.tail_slope:
        a1, a2 = report.tail_slope
        print(f"  tail slope:          f' >= {a1:.6g} beyond {a2:.6g}")
    else:
        print("  tail slope:          NOT bounded away from zero")
    if report.origin_exponent:
        q, a3 = report.origin_exponent
        print(f"  origin exponent:     q = {q:.6g} with margin {a3:.6g}")
    else:
        print("  origin exponent:     NO admissible exponent found")
    print(f"  overall:             {'ADMISSIBLE' if report.overall else 'NOT ADMISSIBLE'}")
    lines = [
        f"f0_ok={_fmt(report.f0_ok)}",
        f"monotone_ok={_fmt(report.monotone_ok)}",
        f"support_ok={_fmt(report.support_ok)}",
        f"tail_a1={_fmt(report.tail_slope[0]) if report.tail_slope else 'none'}",
        f"tail_a2={_fmt(report.tail_slope[1]) if report.tail_slope else 'none'}",
        f"origin_q={_fmt(report.origin_exponent[0]) if report.origin_exponent else 'none'}",
        f"origin_a3={_fmt(report.origin_exponent[1]) if report.origin_exponent else 'none'}",
        f"overall={_fmt(report.overall)}",
    ]
    block = "\n".join(lines) + "\n"
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(block)
    else:
        sys.stdout.write(block)
    return 0 if (report.overall or not cfg.strict) else 1


def run_solve_c(cfg: ExperimentConfig) -> int:
    model = _solved(cfg)
    write_csv(
        cfg.out,
        ["t", "c", "Z", "mu", "sigma2", "m"],
        [[cfg.t, model.c, model.z, model.mu, model.sigma2, model.m3]],
    )
    return 0


def run_wn(cfg: ExperimentConfig) -> int:
    model = _solved(cfg)
    n = cfg.n if cfg.n is not None else cfg.n_list[0]
    grid = w_fft(model, n, cfg.grid_params())
    ss = grid.points()
    header = ["s", "w_n", "log_w_n"]
    cols = [ss, grid.values, grid.log_values]
    if model.spec.has_closed_wn:
        exact = w_exact(model, n, cfg.grid_params())
        header += ["w_exact", "log_w_exact"]
        cols += [exact.values, exact.log_values]
    stride = max(1, len(ss) // 4096)
    rows = [[col[i] for col in cols] for i in range(0, len(ss), stride)]
    write_csv(cfg.out, header, rows)
    return 0


def run_clt_scan(cfg: ExperimentConfig) -> int:
    model = _solved(cfg)
    report = local_clt_scan(model, cfg.clt_n_list, cfg.grid_params())
    rows = [
        [n, dev, math.sqrt(2.0 * math.pi * n) * dev]
        for n, dev in zip(report.n_list, report.sup_devs)
    ]
    write_csv(cfg.out, ["n", "sup_dev", "sqrt_2pin_sup_dev"], rows)
    print(f"C_hat = {_fmt(report.c_hat)} (nu = {_fmt(report.nu)}, I = {_fmt(report.i_value)}, r = {report.r_used})")
    return 0


def run_bounds(cfg: ExperimentConfig) -> int:
    model = _solved(cfg)
    c_hat = _c_hat(cfg, model)
    params = cfg.grid_params()
    # tilts act on the first coordinate, so nonzero alphas pair with k=1 only
    cells = [
        (n, k, a)
        for n in cfg.n_list
        for k in cfg.k_list
        for a in cfg.alpha_list
        if a == 0.0 or k == 1
    ]

    def cell(args):
        n, k, alpha = args
        ctx = projection.make_context(model, n, k, params)
        return projection.bound_report(ctx, c_hat, alpha=alpha)

    with ThreadPoolExecutor(max_workers=_pool_size(len(cells))) as pool:
        reports = list(pool.map(cell, cells))
    rows = [
        [r.n, r.k, r.t, r.c, r.alpha, r.kl, r.tv, r.kl_bound, r.tv_from_kl,
         r.df_bound if r.df_bound is not None else math.nan, r.c_used, r.pass_kl, r.pass_tv]
        for r in reports
    ]
    write_csv(
        cfg.out,
        ["n", "k", "t", "c", "alpha", "kl", "tv", "kl_bound", "tv_from_kl", "df_bound", "C_used", "pass_kl", "pass_tv"],
        rows,
    )
    failed = [r for r in reports if not (r.pass_kl and r.pass_tv)]
    if failed:
        print(f"{len(failed)} of {len(reports)} cells failed their bound", file=sys.stderr)
        if cfg.strict:
            return 1
    return 0


def run_converse(cfg: ExperimentConfig) -> int:
    model = _solved(cfg)
    params = cfg.grid_params()
    rows = []
    for n in cfg.n_list:
        k = max(1, round(cfg.k_frac * n))
        ctx = projection.make_context(model, n, k, params)
        tv = projection.tv_to_gibbs(ctx)
        rep = projection.converse_lower_bound(ctx, cfg.eps)
        rows.append([n, k, cfg.eps, rep.lower_bound, tv])
    write_csv(cfg.out, ["n", "k", "eps", "lower_bound", "tv"], rows)
    return 0


_TESTFNS = {
    "f1": lambda spec: sampler.TestFunction(
        fn=lambda rows: np.sum(f_values(spec, rows[:, :1]), axis=1), k=1, name="f1", growth="energy", m_const=1.0
    ),
    "f1+f2": lambda spec: sampler.TestFunction(
        fn=lambda rows: np.sum(f_values(spec, rows[:, :2]), axis=1), k=2, name="f1+f2", growth="energy", m_const=1.0
    ),
    "const": lambda spec: sampler.TestFunction(
        fn=lambda rows: np.ones(rows.shape[0]), k=1, name="const", growth="constant"
    ),
}


def run_ensembles(cfg: ExperimentConfig) -> int:
    model = _solved(cfg)
    if cfg.testfn not in _TESTFNS:
        raise ConfigError(f"unknown testfn {cfg.testfn!r}; choose from {sorted(_TESTFNS)}")
    tf = _TESTFNS[cfg.testfn](model.spec)
    rows = []
    for n in cfg.n_list:
        if model.spec.homogeneous_degree is not None:
            batch = sampler.sample_surface_scaling(model, n, cfg.count, cfg.seed)
        else:
            delta = cfg.delta if cfg.delta is not None else 0.5 * math.sqrt(model.sigma2 / n)
            batch = sampler.sample_surface_rejection(model, n, delta, cfg.count, cfg.seed)
        rep = sampler.ensemble_expectation_gap(model, n, tf.k, tf, batch, cfg.canonical_count, cfg.seed + 1)
        rows.append([rep.n, rep.k, rep.testfn, rep.e_micro, rep.e_canon, rep.gap, rep.se_micro, rep.se_canon])
    write_csv(cfg.out, ["n", "k", "testfn", "E_micro", "E_canon", "gap", "se_micro", "se_canon"], rows)
    return 0


def run_sample(cfg: ExperimentConfig) -> int:
    model = _solved(cfg)
    n = cfg.n if cfg.n is not None else cfg.n_list[0]
    if cfg.method == "scaling":
        batch = sampler.sample_surface_scaling(model, n, cfg.count, cfg.seed)
    elif cfg.method == "rejection":
        delta = cfg.delta if cfg.delta is not None else 0.5 * math.sqrt(model.sigma2 / n)
        batch = sampler.sample_surface_rejection(model, n, delta, cfg.count, cfg.seed)
    else:
        raise ConfigError(f"unknown method {cfg.method!r} (scaling or rejection)")
    if cfg.out:
        sampler.save_batch(batch, cfg.out)
        print(f"wrote {batch.count} points to {cfg.out}")
    print(f"acceptance_rate = {_fmt(batch.acceptance_rate)}")
    if batch.count >= 100 and n >= 2:
        ctx = projection.make_context(model, n, 1, cfg.grid_params())
        ref = projection.project_uniform_k1(ctx, cfg.grid_params())
        ks = sampler.empirical_projection_check(batch, ref)
        print(f"ks_vs_reference = {_fmt(ks)}")
    return 0


def run_mixture(cfg: ExperimentConfig) -> int:
    spec = cfg.spec()
    n = cfg.n if cfg.n is not None else cfg.n_list[0]
    k = cfg.k_list[0]
    entries = [
        (solve_energy(spec, t), t, w) for t, w in zip(cfg.mixture_t_list, cfg.mixture_weights)
    ]
    rep = projection.mixture_bound_check(entries, n, k, cfg.grid_params())
    write_csv(cfg.out, ["n", "k", "tv_sum", "bound", "pass"], [[rep.n, rep.k, rep.tv_sum, rep.bound, rep.passed]])
    if cfg.strict and not rep.passed:
        return 1
    return 0


_SUBCOMMANDS = {
    "analyze-f": run_analyze_f,
    "solve-c": run_solve_c,
    "wn": run_wn,
    "clt-scan": run_clt_scan,
    "bounds": run_bounds,
    "converse": run_converse,
    "ensembles": run_ensembles,
    "sample": run_sample,
    "mixture": run_mixture,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thinshell", description="Gibbs models, surface projections, bound checks")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--kind")
        p.add_argument("--p")
        p.add_argument("--epsilon")
        p.add_argument("--support")
        p.add_argument("--t")
        p.add_argument("--n")
        p.add_argument("--n-list", dest="n_list")
        p.add_argument("--k-list", dest="k_list")
        p.add_argument("--alpha-list", dest="alpha_list")
        p.add_argument("--clt-n-list", dest="clt_n_list")
        p.add_argument("--c-override", dest="c_override")
        p.add_argument("--grid-size", dest="grid_size")
        p.add_argument("--grid-extent", dest="grid_extent")
        p.add_argument("--count")
        p.add_argument("--canonical-count", dest="canonical_count")
        p.add_argument("--delta")
        p.add_argument("--method")
        p.add_argument("--testfn")
        p.add_argument("--eps")
        p.add_argument("--k-frac", dest="k_frac")
        p.add_argument("--mixture-t-list", dest="mixture_t_list")
        p.add_argument("--mixture-weights", dest="mixture_weights")
        p.add_argument("--seed")
        p.add_argument("--out")
        p.add_argument("--strict", action="store_true")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _SUBCOMMANDS[args.subcommand](cfg)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
