import math

import numpy as np
import pytest
from scipy.stats import gamma as gamma_dist

from thinshell import gibbs1d, sumdensity


def _window_error(exact, fft, center, half):
    xs = exact.points()
    win = (xs >= max(0.0, center - half)) & (xs <= center + half)
    return float(np.max(np.abs(fft.values[win] - exact.values[win]))) / float(np.max(exact.values[win]))


class TestExactForms:
    def test_gamma_two_exponentials(self, lin_model):
        """Sum of two unit exponentials: s e^{-s}."""
        grid = sumdensity.w_exact(lin_model, 2)
        assert grid.at(2.0)[0] == pytest.approx(2.0 * math.exp(-2.0), rel=1e-7)

    def test_gamma_two_squares(self, quad_model):
        """Sum of two squared standard normals: (1/2) e^{-s/2}."""
        grid = sumdensity.w_exact(quad_model, 2)
        assert grid.at(2.0)[0] == pytest.approx(0.5 * math.exp(-1.0), rel=1e-7)

    def test_single_summand_is_energy_density(self, lin_model):
        w1 = sumdensity.w_exact(lin_model, 1)
        g = gibbs1d.y_density(lin_model)
        ys = np.linspace(0.1, 10.0, 50)
        np.testing.assert_allclose(w1.at(ys), g.at(ys), rtol=1e-6)

    def test_unsupported_spec(self, quartic_model):
        with pytest.raises(ValueError):
            sumdensity.w_exact(quartic_model, 4)

    def test_log_density_at_huge_order_no_underflow(self, lin_model, quad_model):
        """Log evaluation at n = 10^4 stays finite and matches a Stirling
        expansion of the Gamma normalizer written out independently."""
        for model in (lin_model, quad_model):
            n = 10_000
            a = sumdensity.gamma_shape(model, n)
            c = model.c
            s = n * model.mu
            got = float(sumdensity.log_w_exact(model, n, np.asarray([s]))[0])
            assert math.isfinite(got)
            stirling_lgamma = (a - 0.5) * math.log(a) - a + 0.5 * math.log(2 * math.pi) + 1.0 / (12 * a)
            oracle = a * math.log(c) - stirling_lgamma + (a - 1.0) * math.log(s) - c * s
            assert got == pytest.approx(oracle, rel=1e-6)


class TestFftRoute:
    @pytest.mark.parametrize("n", [2, 4, 8, 16, 32])
    def test_matches_gamma_exponential(self, lin_model, n):
        exact = sumdensity.w_exact(lin_model, n)
        fft = sumdensity.w_fft(lin_model, n)
        err = _window_error(exact, fft, n * lin_model.mu, 6.0 * math.sqrt(n * lin_model.sigma2))
        assert err < 1e-3

    @pytest.mark.parametrize("n", [2, 4, 8, 16, 32])
    def test_matches_gamma_quadratic(self, quad_model, n):
        exact = sumdensity.w_exact(quad_model, n)
        fft = sumdensity.w_fft(quad_model, n)
        err = _window_error(exact, fft, n * quad_model.mu, 6.0 * math.sqrt(n * quad_model.sigma2))
        assert err < 1e-3

    def test_single_summand_recovers_energy_density(self, lin_model, quad_model, quartic_model):
        for model in (lin_model, quad_model, quartic_model):
            w1 = sumdensity.w_fft(model, 1)
            g = gibbs1d.y_density(model)
            ys = np.linspace(0.05, 6.0, 200)
            np.testing.assert_allclose(w1.at(ys), g.at(ys), rtol=1e-5)

    def test_clipping_recorded(self, quad_model):
        grid = sumdensity.w_fft(quad_model, 8)
        assert grid.meta["l1_clip"] <= 1e-3

    def test_semigroup(self, lin_model):
        """Convolving the n=a density with itself reproduces n=2a."""
        for a in (1, 2, 4):
            wa = sumdensity.w_fft(lin_model, a)
            w2a = sumdensity.w_fft(lin_model, 2 * a)
            conv = np.convolve(wa.values, wa.values)[: len(wa)] * wa.dx
            err = float(np.max(np.abs(conv - w2a.at(wa.points()))))
            assert err < 1e-3

    @pytest.mark.parametrize("n", [2, 8, 32])
    def test_moments_of_sum(self, quartic_model, n):
        grid = sumdensity.w_fft(quartic_model, n)
        assert grid.mean() == pytest.approx(n * quartic_model.mu, rel=1e-3)
        assert grid.var() == pytest.approx(n * quartic_model.sigma2, rel=1e-3)


class TestLocalCltScan:
    def test_deviations_decay_like_root_n(self, lin_scan):
        devs = np.asarray(lin_scan.sup_devs)
        assert np.all(np.diff(devs) < 0)
        # halving rate consistent with n^{-1/2} within 25%
        ratios = devs[:-1] / devs[1:]
        assert np.all(ratios > 2**0.5 * 0.75) and np.all(ratios < 2**0.5 * 1.4)

    def test_quadratic_scan_decays(self, quad_scan):
        assert np.all(np.diff(np.asarray(quad_scan.sup_devs)) < 0)

    def test_constant_is_stable(self, lin_scan, quad_scan):
        """sqrt(2 pi n) * sup_dev varies by less than a factor 2 over the
        upper half of the scan."""
        for rep in (lin_scan, quad_scan):
            tail = [
                math.sqrt(2 * math.pi * n) * d
                for n, d in zip(rep.n_list, rep.sup_devs)
                if n >= 64
            ]
            assert max(tail) <= 2.0 * min(tail)

    def test_gaussian_summands_have_zero_deviation(self):
        """Injected oracle: exactly normal sums sit on the limit."""
        from thinshell.grids import make_grid

        n, mu, sigma2 = 512, 1.0, 2.0  # support edge beyond the +-12 window
        m = 2**15
        length = n * mu + 16 * math.sqrt(n * sigma2)
        ds = length / m
        xs = ds * np.arange(m)
        vals = np.exp(-0.5 * (xs - n * mu) ** 2 / (n * sigma2)) / math.sqrt(2 * math.pi * n * sigma2)
        grid = make_grid(0.0, ds, vals)

        class _Fake:
            pass

        fake = _Fake()
        fake.mu, fake.sigma2 = mu, sigma2
        dev = sumdensity._sup_deviation(fake, grid, n)
        assert dev < 1e-12


class TestRatioBound:
    @pytest.mark.parametrize("n,k", [(100, 1), (100, 10), (400, 1), (400, 10)])
    def test_passes_with_scanned_constant(self, lin_model, quad_model, lin_scan, quad_scan, n, k):
        for model, scan in ((lin_model, lin_scan), (quad_model, quad_scan)):
            rep = sumdensity.log_ratio_bound_check(model, n, k, scan.c_hat)
            assert rep.applicable and rep.order_ok and rep.passed

    def test_k_zero_mode_versus_mean(self, lin_model, lin_scan):
        """k = 0 compares the mode against the mean of the same density."""
        rep = sumdensity.log_ratio_bound_check(lin_model, 400, 0, lin_scan.c_hat)
        assert rep.lhs >= 0.0 and rep.passed

    def test_vanishing_limit(self, lin_model, lin_scan):
        """Both sides shrink as n grows at fixed k."""
        small = sumdensity.log_ratio_bound_check(lin_model, 100, 2, lin_scan.c_hat)
        large = sumdensity.log_ratio_bound_check(lin_model, 1600, 2, lin_scan.c_hat)
        assert large.lhs < small.lhs and large.rhs < small.rhs

    def test_inapplicable_when_constant_too_large(self, lin_model):
        rep = sumdensity.log_ratio_bound_check(lin_model, 100, 1, C=20.0)
        assert not rep.applicable and not rep.passed

    def test_oracle_lhs_exponential(self, lin_model, lin_scan):
        """Gamma(n-k, 1) peaks at its mode n-k-1; check lhs analytically."""
        n, k = 100, 10
        mode = n - k - 1.0
        lhs_oracle = float(
            gamma_dist.logpdf(mode, n - k, scale=1.0) - gamma_dist.logpdf(n * 1.0, n, scale=1.0)
        )
        rep = sumdensity.log_ratio_bound_check(lin_model, n, k, lin_scan.c_hat)
        assert rep.lhs == pytest.approx(lhs_oracle, abs=1e-6)
