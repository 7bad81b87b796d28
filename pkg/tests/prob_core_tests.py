#!/usr/bin/env python3
# tests/prob_core_tests.py

import unittest
import sys
import numpy as np
from pathlib import Path
from scipy import integrate, stats

# Adicionar o diretório src ao path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

try:
    from prob_core import (DistSpec, Family, Rng, draw, log_density, log_sum_exp,
                           lognormal_logpdf, negbin_logpmf, normal_logpdf)
    from utils import DistributionError
except ImportError as e:
    print(f"❌ Erro ao importar módulos: {e}")
    sys.exit(1)


class TestRng(unittest.TestCase):
    """Testes para o gerador (seed, stream)"""

    def test_same_seed_same_stream(self):
        """Testar reprodutibilidade por (seed, stream)"""
        a = Rng(7, 3).gen.normal(size=5)
        b = Rng(7, 3).gen.normal(size=5)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        """Testar streams distintos"""
        a = Rng(7, 0).gen.normal(size=5)
        b = Rng(7, 1).gen.normal(size=5)
        self.assertFalse(np.allclose(a, b))

    def test_child_does_not_consume_parent(self):
        """Testar que child não altera o estado do pai"""
        parent = Rng(11)
        expected = Rng(11).gen.uniform(size=3)
        parent.child(0).gen.uniform(size=100)
        np.testing.assert_array_equal(parent.gen.uniform(size=3), expected)
        self.assertEqual(parent.child(2, 5).stream, (0, 2, 5))

    def test_negative_seed(self):
        """Testar seed negativa"""
        with self.assertRaises(DistributionError):
            Rng(-1)


class TestDistSpec(unittest.TestCase):
    """Testes para validação de distribuições"""

    def test_invalid_scales(self):
        """Testar escalas não positivas"""
        with self.assertRaises(DistributionError):
            DistSpec.normal(0.0, 0.0)
        with self.assertRaises(DistributionError):
            DistSpec.half_normal(-1.0)
        with self.assertRaises(DistributionError):
            DistSpec.log_normal(0.0, -0.5)

    def test_invalid_bounds(self):
        """Testar limites inválidos"""
        with self.assertRaises(DistributionError):
            DistSpec.uniform(1.0, 1.0)
        with self.assertRaises(DistributionError):
            DistSpec.truncated_normal(0.0, 1.0, 2.0, -2.0)

    def test_negative_binomial_parameters(self):
        """Testar μ e φ da binomial negativa"""
        with self.assertRaises(DistributionError):
            DistSpec.negative_binomial(0.0, 9.6)
        with self.assertRaises(DistributionError):
            DistSpec.negative_binomial(10.0, 0.0)

    def test_non_positive_definite_covariance(self):
        """Testar covariância não positiva definida"""
        with self.assertRaises(DistributionError):
            DistSpec.multivariate_normal([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])

    def test_distribution_error_is_value_error(self):
        """Testar hierarquia de exceções"""
        with self.assertRaises(ValueError):
            DistSpec.normal(0.0, -1.0)

    def test_from_dict(self):
        """Testar reconstrução a partir do dict de proveniência"""
        spec = DistSpec.truncated_normal(2.0, 0.5, 1.0, 3.0)
        rebuilt = DistSpec.from_dict(spec.to_dict())
        self.assertEqual(rebuilt.family, Family.TRUNCATED_NORMAL)
        self.assertEqual((rebuilt.mu, rebuilt.sigma, rebuilt.lo, rebuilt.hi), (2.0, 0.5, 1.0, 3.0))


class TestLogDensity(unittest.TestCase):
    """Testes para log-densidades"""

    def test_outside_support(self):
        """Testar −∞ fora do suporte, sem exceção"""
        self.assertEqual(log_density(DistSpec.truncated_normal(0.0, 0.5, -1.0, 1.0), 1.5), -np.inf)
        self.assertEqual(log_density(DistSpec.half_normal(0.5), -0.1), -np.inf)
        self.assertEqual(log_density(DistSpec.uniform(0.0, 0.05), 0.06), -np.inf)
        self.assertEqual(log_density(DistSpec.log_normal(0.0, 1.0), 0.0), -np.inf)
        self.assertEqual(log_density(DistSpec.negative_binomial(5.0, 2.0), 1.5), -np.inf)
        self.assertEqual(log_density(DistSpec.normal(0.0, 1.0), np.nan), -np.inf)

    def test_normal_matches_scipy(self):
        """Testar Normal contra scipy.stats"""
        x = np.linspace(-3.0, 3.0, 13)
        np.testing.assert_allclose(normal_logpdf(x, 0.4, 1.7), stats.norm.logpdf(x, 0.4, 1.7), rtol=1e-12)

    def test_truncated_normal_normalized(self):
        """Testar normalização da normal truncada"""
        spec = DistSpec.truncated_normal(0.5, 0.25, 0.1, 0.9)
        total, _ = integrate.quad(lambda x: np.exp(log_density(spec, x)), 0.1, 0.9)
        self.assertAlmostEqual(total, 1.0, places=8)

    def test_far_tail_truncation(self):
        """Testar truncamento em cauda distante"""
        spec = DistSpec.truncated_normal(0.0, 1.0, 8.0, 9.0)
        value = log_density(spec, 8.5)
        self.assertTrue(np.isfinite(value))
        total, _ = integrate.quad(lambda x: np.exp(log_density(spec, x)), 8.0, 9.0)
        self.assertAlmostEqual(total, 1.0, places=6)

    def test_half_normal_normalized(self):
        """Testar normalização da half-normal"""
        spec = DistSpec.half_normal(0.5)
        total, _ = integrate.quad(lambda x: np.exp(log_density(spec, x)), 0.0, np.inf)
        self.assertAlmostEqual(total, 1.0, places=8)

    def test_multivariate_normal_matches_scipy(self):
        """Testar MultivariateNormal contra scipy.stats"""
        mean = np.array([0.5, -1.0])
        cov = np.array([[1.0, 0.3], [0.3, 0.5]])
        x = np.array([[0.0, 0.0], [1.0, -2.0], [0.5, -1.0]])
        expected = stats.multivariate_normal(mean, cov).logpdf(x)
        np.testing.assert_allclose(log_density(DistSpec.multivariate_normal(mean, cov), x), expected, rtol=1e-10)

    def test_lognormal_matches_scipy(self):
        """Testar LogNormal contra scipy.stats"""
        x = np.array([0.1, 1.0, 5.0])
        expected = stats.lognorm.logpdf(x, s=0.7, scale=np.exp(0.3))
        np.testing.assert_allclose(lognormal_logpdf(x, 0.3, 0.7), expected, rtol=1e-10)

    def test_negbin_pmf_sums_to_one(self):
        """Testar que a pmf da binomial negativa soma 1"""
        n = np.arange(0, 2000)
        total = np.exp(negbin_logpmf(n, 40.0, 9.6)).sum()
        self.assertAlmostEqual(total, 1.0, places=10)

    def test_negbin_matches_scipy(self):
        """Testar parametrização média/forma contra scipy.stats.nbinom"""
        mu, phi = 12.0, 3.0
        n = np.arange(0, 30)
        expected = stats.nbinom.logpmf(n, phi, phi / (phi + mu))
        np.testing.assert_allclose(negbin_logpmf(n, mu, phi), expected, rtol=1e-10)


class TestDraw(unittest.TestCase):
    """Testes para amostragem"""

    def test_samples_inside_support(self):
        """Testar que amostras respeitam o suporte"""
        rng = Rng(3)
        samples = draw(DistSpec.truncated_normal(2.0, 0.5, 1.0, 3.0), rng.child(0), size=5000)
        self.assertTrue(np.all((samples >= 1.0) & (samples <= 3.0)))
        samples = draw(DistSpec.half_normal(0.5), rng.child(1), size=5000)
        self.assertTrue(np.all(samples >= 0.0))

    def test_negbin_moments(self):
        """Testar E[n] = μ e Var[n] = μ + μ²/φ (tolerância 3σ)"""
        mu, phi, n = 40.0, 9.6, 200_000
        samples = draw(DistSpec.negative_binomial(mu, phi), Rng(5), size=n)
        var = mu + mu ** 2 / phi
        self.assertLess(abs(samples.mean() - mu), 3.0 * np.sqrt(var / n))
        # Var da variância amostral ≈ (μ4 − σ⁴)/n; folga ampla para a cauda pesada
        self.assertLess(abs(samples.var() - var) / var, 0.03)

    def test_lognormal_moments(self):
        """Testar E[x] = exp(μ + σ²/2)"""
        mu, sigma, n = 0.5, 0.4, 200_000
        samples = draw(DistSpec.log_normal(mu, sigma), Rng(6), size=n)
        mean = np.exp(mu + sigma ** 2 / 2)
        var = (np.exp(sigma ** 2) - 1) * np.exp(2 * mu + sigma ** 2)
        self.assertLess(abs(samples.mean() - mean), 3.0 * np.sqrt(var / n))

    def test_multivariate_normal_shape(self):
        """Testar forma das amostras multivariadas"""
        spec = DistSpec.multivariate_normal([0.0, 1.0, 2.0], np.eye(3))
        self.assertEqual(draw(spec, Rng(1), size=10).shape, (10, 3))
        self.assertEqual(draw(spec, Rng(1)).shape, (3,))


class TestLogSumExp(unittest.TestCase):
    """Testes para log-sum-exp"""

    def test_large_magnitudes(self):
        """Testar estabilidade com entradas de magnitude 1000"""
        self.assertAlmostEqual(log_sum_exp([1000.0, 1000.0]), 1000.0 + np.log(2.0), places=10)
        self.assertAlmostEqual(log_sum_exp([-1000.0, -1000.0]), -1000.0 + np.log(2.0), places=10)

    def test_all_negative_infinity(self):
        """Testar entradas todas −∞"""
        self.assertEqual(log_sum_exp([-np.inf, -np.inf]), -np.inf)

    def test_weights(self):
        """Testar pesos"""
        self.assertAlmostEqual(log_sum_exp([0.0, 0.0], weights=[0.25, 0.75]), 0.0, places=12)

    def test_invalid_inputs(self):
        """Testar entrada vazia e pesos incompatíveis"""
        with self.assertRaises(DistributionError):
            log_sum_exp([])
        with self.assertRaises(DistributionError):
            log_sum_exp([0.0, 1.0], weights=[1.0, 1.0, 1.0])

    def test_axis(self):
        """Testar redução por eixo"""
        values = np.log(np.array([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_allclose(log_sum_exp(values, axis=0), np.log([4.0, 6.0]))


def create_test_suite():
    """Criar suite de testes"""
    loader = unittest.defaultTestLoader
    suite = unittest.TestSuite()
    for case in (TestRng, TestDistSpec, TestLogDensity, TestDraw, TestLogSumExp):
        suite.addTest(loader.loadTestsFromTestCase(case))
    return suite


if __name__ == '__main__':
    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(create_test_suite())
    sys.exit(0 if result.wasSuccessful() else 1)
