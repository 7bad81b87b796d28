#!/usr/bin/env python3
# tests/surrogates_tests.py

import unittest
import sys
import numpy as np
from pathlib import Path
from numpy.polynomial import legendre
from scipy.special import comb

# Adicionar o diretório src ao path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

try:
    from prob_core import DistSpec
    from simulators import SimulatorSpec, simulate_batch
    from surrogates import (LOGISTIC_TRUTH, LikelihoodFamily, SurrogateKind, SurrogateParams, SurrogateSpec,
                            design_matrix, legendre_univariate, linear_surrogate_spec, log_likelihood_matrix,
                            logistic_surrogate_spec, pce_basis_matrix, pce_index_set, pce_surrogate_spec,
                            scale_inputs, slope_surrogate_spec, surrogate_eval, surrogate_eval_batch,
                            surrogate_log_likelihood)
    from utils import DistributionError
except ImportError as e:
    print(f"❌ Erro ao importar módulos: {e}")
    sys.exit(1)


class TestLegendre(unittest.TestCase):
    """Testes para a base de Legendre"""

    def test_orthogonality(self):
        """Testar ∫ P_j P_k = 2/(2k+1) δ_jk até grau 9"""
        nodes, weights = legendre.leggauss(20)
        for j in range(10):
            for k in range(10):
                inner = np.sum(weights * legendre_univariate(j, nodes) * legendre_univariate(k, nodes))
                expected = 2.0 / (2 * k + 1) if j == k else 0.0
                self.assertLess(abs(inner - expected), 1e-10, msg=f"P_{j}, P_{k}")

    def test_matches_numpy(self):
        """Testar recorrência contra numpy.polynomial.legendre"""
        x = np.linspace(-1.0, 1.0, 11)
        for k in range(8):
            coeffs = np.zeros(k + 1)
            coeffs[k] = 1.0
            np.testing.assert_allclose(legendre_univariate(k, x), legendre.legval(x, coeffs), atol=1e-13)

    def test_scalar_input(self):
        """Testar entrada escalar"""
        self.assertEqual(legendre_univariate(0, 0.3), 1.0)
        self.assertAlmostEqual(legendre_univariate(2, 0.5), -0.125)

    def test_negative_degree(self):
        """Testar grau negativo"""
        with self.assertRaises(DistributionError):
            legendre_univariate(-1, 0.0)


class TestIndexSet(unittest.TestCase):
    """Testes para os multi-índices do PCE"""

    def test_sizes(self):
        """Testar |𝒜| = C(dim + d, d)"""
        self.assertEqual(len(pce_index_set(1, 5)), 6)
        self.assertEqual(len(pce_index_set(3, 4)), 35)
        self.assertEqual(len(pce_index_set(2, 3)), int(comb(5, 3)))

    def test_graded_order(self):
        """Testar ordem graduada-lexicográfica"""
        index = pce_index_set(2, 2)
        self.assertEqual(index[0], (0, 0))
        self.assertEqual(index[1:3], [(0, 1), (1, 0)])
        degrees = [sum(alpha) for alpha in index]
        self.assertEqual(degrees, sorted(degrees))

    def test_basis_matrix(self):
        """Testar produto tensorial da base"""
        index = pce_index_set(2, 2)
        omega = np.array([[0.5, -0.2]])
        psi = pce_basis_matrix(index, omega)
        self.assertEqual(psi.shape, (1, 6))
        j = index.index((1, 1))
        self.assertAlmostEqual(psi[0, j], 0.5 * -0.2)
        j = index.index((2, 0))
        self.assertAlmostEqual(psi[0, j], legendre_univariate(2, 0.5))


class TestScaling(unittest.TestCase):
    """Testes para o escalonamento afim de entradas"""

    def test_scale(self):
        """Testar mapa afim [lo, hi] → [−1, 1]"""
        bounds = [(1.0, 14.0), (1.0, 3.0), (0.1, 0.9)]
        raw = np.array([[1.0, 2.0, 0.9], [7.5, 1.5, 0.5]])
        scaled = scale_inputs(bounds, raw)
        np.testing.assert_allclose(scaled[0], [-1.0, 0.0, 1.0])
        np.testing.assert_allclose(scaled[1], [0.0, -0.5, 0.0], atol=1e-12)

    def test_clamp_flag(self):
        """Testar truncamento fora dos limites"""
        scaled, clamped = scale_inputs([(0.0, 1.0)], np.array([[1.5]]), return_flag=True)
        self.assertTrue(clamped)
        self.assertAlmostEqual(float(scaled[0, 0]), 1.0)

    def test_invalid_bounds(self):
        """Testar limites degenerados"""
        with self.assertRaises(DistributionError):
            scale_inputs([(1.0, 1.0)], [[1.0]])


class TestSurrogateSpecs(unittest.TestCase):
    """Testes para especificações de surrogates"""

    def test_coefficient_counts(self):
        """Testar número de coeficientes por família"""
        self.assertEqual(linear_surrogate_spec().n_coeffs, 2)
        self.assertEqual(slope_surrogate_spec().n_coeffs, 1)
        self.assertEqual(logistic_surrogate_spec().n_coeffs, 4)
        self.assertEqual(pce_surrogate_spec(1, 5).n_coeffs, 6)
        self.assertEqual(pce_surrogate_spec(3, 4).n_coeffs, 35)

    def test_prior_count_mismatch(self):
        """Testar priors incompatíveis"""
        with self.assertRaises(DistributionError):
            SurrogateSpec(SurrogateKind.LINEAR_LM, coeff_priors=[DistSpec.normal(0.0, 1.0)])

    def test_sigma_a_prior(self):
        """Testar σ_A amostrado só com prior"""
        self.assertFalse(logistic_surrogate_spec().samples_sigma_a)
        self.assertTrue(logistic_surrogate_spec(DistSpec.half_normal(0.1)).samples_sigma_a)

    def test_from_dict(self):
        """Testar reconstrução da especificação"""
        spec = pce_surrogate_spec(3, 2, sigma_a_prior=DistSpec.half_normal(0.5),
                                  likelihood_family=LikelihoodFamily.LOG_NORMAL,
                                  input_bounds=[(1.0, 14.0), (1.0, 3.0), (0.1, 0.9)])
        rebuilt = SurrogateSpec.from_dict(spec.to_dict())
        self.assertEqual(rebuilt.n_coeffs, spec.n_coeffs)
        self.assertEqual(rebuilt.likelihood_family, LikelihoodFamily.LOG_NORMAL)
        self.assertEqual(rebuilt.input_bounds, spec.input_bounds)

    def test_non_positive_sigma_a(self):
        """Testar σ_A ≤ 0"""
        with self.assertRaises(DistributionError):
            SurrogateParams(c=[0.0, 1.0], sigma_a=0.0)


class TestSurrogateEvaluation(unittest.TestCase):
    """Testes para avaliação e verossimilhança"""

    def test_linear_eval(self):
        """Testar 𝓜̃(ω; c) = c1 + c2ω"""
        spec = linear_surrogate_spec()
        self.assertAlmostEqual(surrogate_eval(spec, SurrogateParams([0.5, 2.0]), -0.5), -0.5)
        np.testing.assert_allclose(design_matrix(spec, [0.1, 0.2]), [[1.0, 0.1], [1.0, 0.2]])

    def test_logistic_at_truth(self):
        """Testar surrogate logístico nos valores verdadeiros"""
        spec = logistic_surrogate_spec()
        omega = np.linspace(-1.0, 1.0, 9)
        values = surrogate_eval_batch(spec, np.array(LOGISTIC_TRUTH), omega)
        np.testing.assert_allclose(values[0], simulate_batch(SimulatorSpec.logistic(), omega), atol=1e-12)

    def test_batch_shape(self):
        """Testar forma S × N"""
        spec = pce_surrogate_spec(1, 3)
        values = surrogate_eval_batch(spec, np.ones((7, 4)), np.linspace(-1.0, 1.0, 5))
        self.assertEqual(values.shape, (7, 5))

    def test_pce_constant_term(self):
        """Testar PCE com apenas o termo constante"""
        spec = pce_surrogate_spec(1, 2)
        values = surrogate_eval_batch(spec, [3.0, 0.0, 0.0], [-0.7, 0.2, 0.9])
        np.testing.assert_allclose(values, [[3.0, 3.0, 3.0]])

    def test_wrong_coefficient_count(self):
        """Testar número de coeficientes incompatível"""
        with self.assertRaises(DistributionError):
            surrogate_eval_batch(linear_surrogate_spec(), np.ones((2, 3)), [0.0])

    def test_normal_likelihood(self):
        """Testar log N(y | 𝓜̃(ω; c), σ_A²)"""
        spec = linear_surrogate_spec()
        params = SurrogateParams([0.0, 1.0], sigma_a=0.5)
        value = surrogate_log_likelihood(spec, params, 0.2, 0.7)
        expected = -0.5 * np.log(2 * np.pi) - np.log(0.5) - 0.5 * (0.5 / 0.5) ** 2
        self.assertAlmostEqual(value, expected)

    def test_likelihood_requires_scale(self):
        """Testar verossimilhança sem σ_A"""
        with self.assertRaises(DistributionError):
            surrogate_log_likelihood(linear_surrogate_spec(), SurrogateParams([0.0, 1.0]), 0.2, 0.7)

    def test_lognormal_likelihood_at_zero(self):
        """Testar LogNormal com y = 0"""
        spec = pce_surrogate_spec(1, 1, likelihood_family=LikelihoodFamily.LOG_NORMAL)
        ll = log_likelihood_matrix(spec, [[1.0, 0.0]], [0.0, 0.5], [0.0, 2.0], 0.3)
        self.assertEqual(ll[0, 0], -np.inf)
        self.assertTrue(np.isfinite(ll[0, 1]))


def create_test_suite():
    """Criar suite de testes"""
    loader = unittest.defaultTestLoader
    suite = unittest.TestSuite()
    for case in (TestLegendre, TestIndexSet, TestScaling, TestSurrogateSpecs, TestSurrogateEvaluation):
        suite.addTest(loader.loadTestsFromTestCase(case))
    return suite


if __name__ == '__main__':
    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(create_test_suite())
    sys.exit(0 if result.wasSuccessful() else 1)
