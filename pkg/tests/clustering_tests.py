#!/usr/bin/env python3
# tests/clustering_tests.py

import unittest
import sys
import numpy as np
from pathlib import Path
from scipy import integrate

# Adicionar o diretório src ao path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

try:
    from clustering import ClusterSet, cluster_draws, quadrature_source
    from istep import ELIK, EPOST, IStepPriors, method_log_density
    from oracles import analytic_linear_iposterior
    from prob_core import DistSpec, Rng
    from simulators import Measurements, SimulatorSpec, generate_training_data
    from surrogates import linear_surrogate_spec
    from tstep import TPosterior, train_conjugate_linear, train_conjugate_slope
    from utils import DistributionError
except ImportError as e:
    print(f"❌ Erro ao importar módulos: {e}")
    sys.exit(1)


def _sorted_rows(matrix):
    return matrix[np.lexsort(matrix.T[::-1])]


class TestClusterDraws(unittest.TestCase):
    """Testes para a compressão k-means do T-posterior"""

    def setUp(self):
        gen = np.random.default_rng(0)
        self.draws = np.concatenate([
            gen.normal([0.0, 0.0], 0.05, size=(100, 2)),
            gen.normal([5.0, 5.0], 0.05, size=(100, 2)),
            gen.normal([0.0, 5.0], 0.05, size=(200, 2)),
        ])

    def test_weights_sum_to_one(self):
        """Testar Σα = 1 ± 1e-12"""
        for n_clusters in (1, 2, 7, 25):
            clusters = cluster_draws(self.draws, n_clusters, Rng(n_clusters))
            self.assertLess(abs(clusters.weights.sum() - 1.0), 1e-12)
            self.assertTrue(np.all(clusters.weights > 0))

    def test_separated_blobs(self):
        """Testar recuperação de grupos bem separados"""
        clusters = cluster_draws(self.draws, 3, Rng(1))
        order = np.lexsort(clusters.centroids.T[::-1])
        np.testing.assert_allclose(clusters.centroids[order], [[0.0, 0.0], [0.0, 5.0], [5.0, 5.0]], atol=0.05)
        np.testing.assert_allclose(clusters.weights[order], [0.25, 0.5, 0.25])

    def test_single_cluster(self):
        """Testar L = 1: centróide é a média"""
        clusters = cluster_draws(self.draws, 1, Rng(2))
        np.testing.assert_allclose(clusters.centroids[0], self.draws.mean(axis=0))
        np.testing.assert_allclose(clusters.weights, [1.0])

    def test_one_cluster_per_draw(self):
        """Testar L = S: centróides são os próprios draws"""
        draws = np.random.default_rng(3).normal(size=(30, 2))
        clusters = cluster_draws(draws, 30, Rng(3))
        self.assertEqual(clusters.n_clusters, 30)
        np.testing.assert_allclose(_sorted_rows(clusters.centroids), _sorted_rows(draws), atol=1e-14)
        np.testing.assert_allclose(clusters.weights, np.full(30, 1.0 / 30))

    def test_keeps_tposterior_metadata(self):
        """Testar spec e σ_A fixo herdados do T-posterior"""
        tpost = TPosterior(spec=linear_surrogate_spec(), draws=self.draws, sigma_a_fixed=0.5)
        clusters = cluster_draws(tpost, 3, Rng(4))
        self.assertIs(clusters.spec, tpost.spec)
        self.assertEqual(clusters.sigma_a_fixed, 0.5)
        self.assertEqual(clusters.labels.shape, (400,))

    def test_reproducible(self):
        """Testar reprodutibilidade por seed"""
        a = cluster_draws(self.draws, 5, Rng(5))
        b = cluster_draws(self.draws, 5, Rng(5))
        np.testing.assert_array_equal(a.centroids, b.centroids)

    def test_invalid_cluster_count(self):
        """Testar L fora de [1, S]"""
        with self.assertRaises(DistributionError):
            cluster_draws(self.draws, 0, Rng(0))
        with self.assertRaises(DistributionError):
            cluster_draws(self.draws, 401, Rng(0))

    def test_invalid_weights(self):
        """Testar pesos que não somam 1"""
        with self.assertRaises(DistributionError):
            ClusterSet(centroids=np.zeros((2, 1)), weights=[0.5, 0.4])


SIGMA_I = 0.1
Y_OBS = -0.5


def case1_tposterior(sigma_a):
    data = generate_training_data(SimulatorSpec.linear(0.5, 2.0), [-0.9, -0.3], 0.0, Rng(0))
    return train_conjugate_linear(data, 0.0, 10.0, sigma_a)


def weighted_moments(clusters):
    mean = clusters.weights @ clusters.centroids
    centered = clusters.centroids - mean
    return mean, (clusters.weights[:, None] * centered).T @ centered


def epost_mixture_moments(clusters):
    """Média e desvio da mistura de posteriors gaussianos exatos, um por nó"""
    c1, c2 = clusters.centroids.T
    precision = 1.0 + c2 ** 2 / SIGMA_I ** 2
    means = c2 * (Y_OBS - c1) / SIGMA_I ** 2 / precision
    mean = clusters.weights @ means
    return mean, np.sqrt(clusters.weights @ (1.0 / precision + means ** 2) - mean ** 2)


class TestQuadratureSource(unittest.TestCase):
    """Testes para os nós de quadratura do T-posterior gaussiano"""

    def test_reproduces_moments(self):
        """Testar média e covariância ponderadas iguais às analíticas"""
        for sigma_a in (0.1, 1.0):
            tpost = case1_tposterior(sigma_a)
            for inner in (None, 3):
                nodes = quadrature_source(tpost, [0.1, 0.1], inner_nodes=inner)
                mean, cov = weighted_moments(nodes)
                np.testing.assert_allclose(mean, tpost.analytic['mean'], rtol=0, atol=1e-6 * sigma_a)
                np.testing.assert_allclose(cov, tpost.analytic['cov'], rtol=1e-5, atol=1e-9)
                self.assertLess(abs(nodes.weights.sum() - 1.0), 1e-12)
                self.assertIs(nodes.spec, tpost.spec)
                self.assertEqual(nodes.sigma_a_fixed, sigma_a)

    def test_dense_near_zero_slope(self):
        """Testar vários nós com |c2| abaixo da resolução"""
        nodes = quadrature_source(case1_tposterior(1.0), [0.1, 0.1], inner_nodes=3)
        slopes = np.unique(nodes.centroids[:, 1])
        self.assertGreaterEqual(np.count_nonzero(np.abs(slopes) < 0.1), 5)

    def test_epost_mixture_matches_oracle(self):
        """Testar mistura de posteriors exatos nos nós contra o oráculo E-Post"""
        for sigma_a in (0.1, 0.5, 1.0):
            tpost = case1_tposterior(sigma_a)
            nodes = quadrature_source(tpost, [SIGMA_I, SIGMA_I], inner_nodes=3)
            mean, std = epost_mixture_moments(nodes)
            density = analytic_linear_iposterior(EPOST, tpost, Y_OBS, 0.0, 1.0, SIGMA_I)
            self.assertLess(abs(mean - density.mean), 0.01 * density.std, msg=f"σ_A={sigma_a}")
            self.assertLess(abs(std / density.std - 1.0), 0.01, msg=f"σ_A={sigma_a}")

    def test_elik_density_matches_oracle(self):
        """Testar densidade E-Lik sobre os nós contra o oráculo"""
        tpost = case1_tposterior(0.5)
        nodes = quadrature_source(tpost, [SIGMA_I, SIGMA_I])
        priors = IStepPriors(DistSpec.normal(0.0, 1.0), SIGMA_I)
        log_fn = method_log_density(ELIK, None, nodes, Measurements(ys=[Y_OBS]), priors)
        density = analytic_linear_iposterior(ELIK, tpost, Y_OBS, 0.0, 1.0, SIGMA_I)

        xs = np.linspace(density.lo, density.hi, 8001)
        values = np.concatenate([log_fn(chunk[:, None]) for chunk in np.array_split(xs, 80)])
        dens = np.exp(values - values.max())
        z = integrate.trapezoid(dens, xs)
        mean = integrate.trapezoid(xs * dens, xs) / z
        std = np.sqrt(integrate.trapezoid((xs - mean) ** 2 * dens, xs) / z)
        self.assertLess(abs(mean - density.mean), 0.02 * density.std)
        self.assertLess(abs(std / density.std - 1.0), 0.02)

    def test_slope_only(self):
        """Testar T-posterior de um coeficiente"""
        data = generate_training_data(SimulatorSpec.slope_only(2.0), [0.5, 1.0], 0.0, Rng(0))
        tpost = train_conjugate_slope(data, 0.0, 10.0, 0.2)
        nodes = quadrature_source(tpost, 0.1)
        self.assertEqual(nodes.centroids.shape[1], 1)
        np.testing.assert_allclose(weighted_moments(nodes)[0], tpost.analytic['mean'], atol=1e-6)

    def test_requires_analytic(self):
        """Testar T-posterior só com draws e resolução inválida"""
        tpost = TPosterior(spec=linear_surrogate_spec(), draws=np.zeros((3, 2)))
        with self.assertRaises(DistributionError):
            quadrature_source(tpost, 0.1)
        with self.assertRaises(DistributionError):
            quadrature_source(case1_tposterior(0.1), 0.0)


def create_test_suite():
    """Criar suite de testes"""
    suite = unittest.TestSuite()
    suite.addTest(unittest.defaultTestLoader.loadTestsFromTestCase(TestClusterDraws))
    suite.addTest(unittest.defaultTestLoader.loadTestsFromTestCase(TestQuadratureSource))
    return suite


if __name__ == '__main__':
    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(create_test_suite())
    sys.exit(0 if result.wasSuccessful() else 1)
