"""Whole-pipeline run on a user-supplied energy function, exercising the
finite-difference derivative, the bisection inverse, and the tabulated
inverse-CDF sampler."""

import numpy as np
import pytest

from thinshell import gibbs1d, hamiltonians as ham, projection, sampler, sumdensity


@pytest.fixture(scope="module")
def cubic_plus_linear():
    spec = ham.custom(lambda x: x + np.power(x, 3))
    return gibbs1d.solve_energy(spec, 1.0)


def test_admissibility(cubic_plus_linear):
    report = ham.check_class_f(cubic_plus_linear.spec)
    assert report.overall
    a1, a2 = report.tail_slope
    assert a1 == pytest.approx(2.0, rel=1e-6)  # half the slope 1 + 3x^2 at x = 1


def test_energy_density_mass(cubic_plus_linear):
    grid = gibbs1d.y_density(cubic_plus_linear)
    assert grid.meta["norm_defect"] < 1e-6


def test_sum_density_moments(cubic_plus_linear):
    w4 = sumdensity.w_fft(cubic_plus_linear, 4)
    assert w4.mean() == pytest.approx(4.0, rel=1e-6)
    assert w4.var() == pytest.approx(4.0 * cubic_plus_linear.sigma2, rel=1e-6)


def test_bounds_hold(cubic_plus_linear):
    scan = sumdensity.local_clt_scan(cubic_plus_linear, (8, 16, 32))
    ctx = projection.make_context(cubic_plus_linear, 30, 1)
    report = projection.bound_report(ctx, scan.c_hat)
    assert report.pass_kl and report.pass_tv


def test_rejection_sampler_and_prediction(cubic_plus_linear):
    """The tabulated inverse CDF drives the draws; acceptance must track the
    sum-density shell mass and the first coordinate the exact projection."""
    model = cubic_plus_linear
    ctx = projection.make_context(model, 30, 1)
    ref = projection.project_uniform_k1(ctx)
    batch = sampler.sample_surface_rejection(model, 30, 0.2, 4_000, seed=31)
    predicted = sampler.shell_mass(model, 30, 0.2)
    assert predicted / 1.5 <= batch.acceptance_rate <= predicted * 1.5
    assert sampler.empirical_projection_check(batch, ref) < 0.03
