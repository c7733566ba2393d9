import numpy as np
import pytest

from podnn.netcalc import (
    InverseNetConfig,
    inverse_net,
    matr,
    mult_net,
    neumann_product_check,
    power_net,
    realize,
    vec,
)


def spectral_sample(rng, n, bound):
    """Random matrix with spectral norm uniform in (0, bound]."""
    a = rng.standard_normal((n, n))
    return a * (bound * rng.uniform(0.0, 1.0) / np.linalg.norm(a, 2))


class TestMultNet:
    def test_zero_factor_exactly_zero(self, rng):
        net = mult_net(1.0, 2, 2, 2, 1e-2)
        a = np.zeros((2, 2))
        b = spectral_sample(rng, 2, 1.0)
        out = realize(net, np.concatenate([vec(a), vec(b)]))
        assert np.array_equal(out, np.zeros(4))
        out = realize(net, np.concatenate([vec(b), vec(a)]))
        assert np.array_equal(out, np.zeros(4))

    def test_scalar_grid(self):
        net = mult_net(1.0, 1, 1, 1, 1e-3)
        grid = np.linspace(-1.0, 1.0, 101)
        pairs = np.array([(x, y) for x in grid for y in grid])
        out = realize(net, pairs.T)[0]
        err = np.abs(out - pairs[:, 0] * pairs[:, 1])
        assert err.max() <= 1e-3

    def test_two_by_two_monte_carlo(self, rng):
        net = mult_net(2.0, 2, 2, 2, 1e-2)
        worst = 0.0
        for _ in range(1000):
            a = spectral_sample(rng, 2, 2.0)
            b = spectral_sample(rng, 2, 2.0)
            got = matr(realize(net, np.concatenate([vec(a), vec(b)])), 2, 2)
            worst = max(worst, np.linalg.norm(a @ b - got, 2))
        assert worst <= 1e-2

    def test_rectangular_shapes(self, rng):
        net = mult_net(1.5, 3, 2, 4, 5e-2)
        for _ in range(200):
            a = rng.standard_normal((3, 2))
            a *= 1.5 * rng.uniform(0, 1) / np.linalg.norm(a, 2)
            b = rng.standard_normal((2, 4))
            b *= 1.5 * rng.uniform(0, 1) / np.linalg.norm(b, 2)
            got = matr(realize(net, np.concatenate([vec(a), vec(b)])), 3, 4)
            assert np.linalg.norm(a @ b - got, 2) <= 5e-2

    def test_depth_grows_with_accuracy(self):
        depths = [mult_net(1.0, 1, 1, 1, eps).depth for eps in (1e-1, 1e-2, 1e-3)]
        assert depths == sorted(depths)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            mult_net(0.0, 1, 1, 1, 0.1)
        with pytest.raises(ValueError):
            mult_net(1.0, 1, 1, 1, 2.0)


class TestPowerNet:
    def test_zero_matrix(self, rng):
        net = power_net(2, 0.01, 0.5, 2)
        out = realize(net, np.zeros(4))
        assert np.abs(out).max() <= 0.01

    def test_scalar_example(self):
        net = power_net(2, 1e-2, 0.5, 1)
        out = realize(net, np.array([0.5]))[0]
        assert abs(out - 0.0625) <= 1e-2

    def test_monte_carlo_contract(self, rng):
        for i in (1, 2, 3):
            net = power_net(i, 0.05, 0.3, 3)
            worst = 0.0
            for _ in range(500):
                a = spectral_sample(rng, 3, 0.7)
                got = matr(realize(net, vec(a)), 3, 3)
                worst = max(worst, np.linalg.norm(np.linalg.matrix_power(a, 2**i) - got, 2))
            assert worst <= 0.05, (i, worst)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            power_net(0, 0.1, 0.5, 2)
        with pytest.raises(ValueError):
            power_net(1, 0.3, 0.5, 2)  # eps must stay below 1/4


class TestNeumannProductCheck:
    def test_scalar_half(self):
        s1, s2 = neumann_product_check(np.array([[0.5]]), 2)
        assert s1[0, 0] == 1.875 and s2[0, 0] == 1.875

    def test_nilpotent(self):
        a = np.array([[0.0, 1.0], [0.0, 0.0]])
        s1, s2 = neumann_product_check(a, 1)
        np.testing.assert_array_equal(s1, np.eye(2) + a)
        np.testing.assert_array_equal(s2, np.eye(2) + a)

    def test_random_contractions_agree(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 9))
            a = spectral_sample(rng, n, 0.9)
            s1, s2 = neumann_product_check(a, 4)
            assert np.linalg.norm(s1 - s2, 2) <= 1e-12 * max(1.0, np.linalg.norm(s1, 2))

    def test_identity_matches_inverse_for_contraction(self, rng):
        a = spectral_sample(rng, 4, 0.4)
        s1, _ = neumann_product_check(a, 6)
        exact = np.linalg.inv(np.eye(4) - a)
        assert np.linalg.norm(s1 - exact, 2) <= 1e-9


class TestInverseNet:
    def test_stage_count_example(self):
        assert InverseNetConfig(0.1, 0.5).stage_count == 3

    def test_stage_count_closed_form_cross_check(self):
        # smallest l with (1-delta)^(2^l - 1) / delta <= eps/2, checked numerically
        for eps, delta in [(0.1, 0.5), (0.1, 0.3), (0.2, 0.6), (0.02, 0.4)]:
            l = InverseNetConfig(eps, delta).stage_count
            def tail(k):
                return (1.0 - delta) ** (2**k - 1) / delta
            assert tail(l) <= eps / 2 + 1e-15
            if l > 1:
                assert tail(l - 1) > eps / 2

    def test_scalar_example(self):
        net = inverse_net(InverseNetConfig(0.1, 0.4), 1)
        out = realize(net, np.array([0.5]))[0]
        assert abs(out - 2.0) <= 0.1

    def test_zero_matrix_gives_identity(self, rng):
        net = inverse_net(InverseNetConfig(0.1, 0.5), 3)
        out = matr(realize(net, np.zeros(9)), 3, 3)
        assert np.linalg.norm(out - np.eye(3), 2) <= 0.1

    def test_monte_carlo_contract(self, rng):
        for delta in (0.3, 0.5):
            for n in (1, 2, 4):
                cfg = InverseNetConfig(0.1, delta)
                net = inverse_net(cfg, n)
                draws = np.stack(
                    [vec(spectral_sample(rng, n, 1.0 - delta)) for _ in range(500)], axis=1
                )
                outs = realize(net, draws)
                worst = 0.0
                for s in range(500):
                    a = matr(draws[:, s], n, n)
                    exact = np.linalg.inv(np.eye(n) - a)
                    worst = max(worst, np.linalg.norm(exact - matr(outs[:, s], n, n), 2))
                assert worst <= 0.1, (delta, n, worst)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            InverseNetConfig(0.3, 0.5)
        with pytest.raises(ValueError):
            InverseNetConfig(0.1, 1.5)


class TestScalingSweep:
    def test_depth_and_size_grow_at_most_linearly(self):
        """Measured L against l*(log2(1/eps)+log2(1/delta)+log2 n+l), M against
        2^l n^2 (n+l) times the same factor: the ratios stay within a narrow
        band across the sweep, and the fitted coefficients are reported."""
        delta = 0.5
        ratios_l, ratios_m = [], []
        for eps in (1e-1, 1e-2, 1e-3):
            for n in (1, 2, 4):
                cfg = InverseNetConfig(eps, delta)
                net = inverse_net(cfg, n)
                l = cfg.stage_count
                factor = l * (np.log2(1 / eps) + np.log2(1 / delta) + np.log2(n) + l)
                ratios_l.append(net.depth / factor)
                ratios_m.append(net.nonzeros / (2**l * n**2 * (n + l) * factor))
        print(f"inverse_net scaling: L coeff ~ {np.median(ratios_l):.3f}, "
              f"M coeff ~ {np.median(ratios_m):.3f}")
        assert max(ratios_l) <= 6 * min(ratios_l)
        assert max(ratios_m) <= 6 * min(ratios_m)
