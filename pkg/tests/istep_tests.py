#!/usr/bin/env python3
# tests/istep_tests.py

import unittest
import sys
import numpy as np
from pathlib import Path
from scipy import stats

# Adicionar o diretório src ao path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

try:
    from clustering import ClusterSet, cluster_draws
    from istep import (ELIK, ELOGLIK, EPOST, POINT, IStepPriors, UpMethod, UpMethodKind,
                       combine_log_likelihoods, component_log_evidences, component_log_likelihoods,
                       elogpost_log_density, infer, infer_simulator, method_log_density, point_estimate)
    from mcmc import SamplerConfig
    from prob_core import DistSpec, Rng, normal_logpdf
    from simulators import Measurements, SimulatorSpec, generate_training_data
    from surrogates import linear_surrogate_spec
    from tstep import TPosterior, train_conjugate_linear
    from utils import DistributionError
except ImportError as e:
    print(f"❌ Erro ao importar módulos: {e}")
    sys.exit(1)


OMEGA_GRID = np.linspace(-1.5, 0.5, 100)[:, None]


def case1_priors():
    return IStepPriors(DistSpec.normal(0.0, 1.0), 0.1)


def case1_tposterior(n_samples=20, sigma_a=0.5, seed=1):
    data = generate_training_data(SimulatorSpec.linear(0.5, 2.0), [-0.9, -0.3], 0.0, Rng(0))
    return train_conjugate_linear(data, 0.0, 10.0, sigma_a, n_samples=n_samples, rng=Rng(seed))


def centered(values):
    return values - values.mean()


class TestUpMethod(unittest.TestCase):
    """Testes para a seleção do método de propagação"""

    def test_parse_aliases(self):
        """Testar nomes com e sem hífen"""
        self.assertIs(UpMethod.parse('E-Log-Lik').kind, UpMethodKind.ELOGLIK)
        self.assertIs(UpMethod.parse('e-post').kind, UpMethodKind.EPOST)
        self.assertIs(UpMethod.parse(' elik ').kind, UpMethodKind.ELIK)
        self.assertEqual(UpMethod.parse('point'), POINT)

    def test_point_estimator(self):
        """Testar estimador do Point no rótulo"""
        method = UpMethod.parse('point:median')
        self.assertEqual(method.estimator, 'median')
        self.assertEqual(method.label, 'point_median')
        self.assertEqual(POINT.label, 'point')

    def test_unknown(self):
        """Testar método e estimador desconhecidos"""
        with self.assertRaises(DistributionError):
            UpMethod.parse('average')
        with self.assertRaises(DistributionError):
            UpMethod.parse('point:max')


class TestIStepPriors(unittest.TestCase):
    """Testes para as priors do I-step"""

    def test_fixed_sigma_i(self):
        """Testar σ_I fixo"""
        priors = case1_priors()
        self.assertFalse(priors.samples_sigma_i)
        self.assertEqual(priors.dim, 1)
        self.assertEqual(priors.all_names(), ['omega'])

    def test_sampled_sigma_i(self):
        """Testar σ_I com prior"""
        priors = IStepPriors([DistSpec.normal(0.0, 1.0), DistSpec.normal(0.0, 1.0)], DistSpec.uniform(0.0, 0.05))
        self.assertEqual(priors.dim, 3)
        self.assertEqual(priors.all_names(), ['omega1', 'omega2', 'sigma_i'])

    def test_invalid(self):
        """Testar σ_I ≤ 0 e prior vazia"""
        with self.assertRaises(DistributionError):
            IStepPriors(DistSpec.normal(0.0, 1.0), 0.0)
        with self.assertRaises(DistributionError):
            IStepPriors([], 0.1)


class TestLikelihoods(unittest.TestCase):
    """Testes para as verossimilhanças por componente"""

    def setUp(self):
        self.spec = linear_surrogate_spec()
        self.coeffs = np.array([[0.5, 2.0], [0.4, 2.1], [0.6, 1.9]])
        self.measurements = Measurements(ys=[-0.5, -0.45])

    def test_shape(self):
        """Testar forma S × C"""
        omega = np.linspace(-1.0, 1.0, 5)[:, None]
        ll = component_log_likelihoods(self.spec, self.coeffs, None, self.measurements, omega, np.full(5, 0.1))
        self.assertEqual(ll.shape, (3, 5))
        expected = normal_logpdf(np.array([-0.5, -0.45]), 0.4 + 2.1 * omega[2, 0], 0.1).sum()
        self.assertAlmostEqual(ll[1, 2], expected)

    def test_no_measurements(self):
        """Testar N_I = 0: verossimilhança nula"""
        ll = component_log_likelihoods(self.spec, self.coeffs, None, Measurements(ys=[]), [[0.3]], [0.1])
        np.testing.assert_array_equal(ll, np.zeros((3, 1)))

    def test_propagated_sigma_a(self):
        """Testar escala √(σ_I² + σ_A²) com σ_A propagado"""
        sigma_a = np.array([0.2, 0.2, 0.2])
        ll = component_log_likelihoods(self.spec, self.coeffs, sigma_a, Measurements(ys=[0.0]), [[0.0]], [0.1],
                                       propagate_sigma_a=True)
        expected = normal_logpdf(0.0, 0.5, np.sqrt(0.05))
        self.assertAlmostEqual(ll[0, 0], expected)

    def test_combine(self):
        """Testar combinações E-Lik e E-Log-Lik"""
        ll = np.array([[-1.0, -3.0], [-2.0, -5.0]])
        weights = np.array([0.25, 0.75])
        elik = combine_log_likelihoods(UpMethodKind.ELIK, ll, weights)
        eloglik = combine_log_likelihoods(UpMethodKind.ELOGLIK, ll, weights)
        np.testing.assert_allclose(elik, np.log(0.25 * np.exp(ll[0]) + 0.75 * np.exp(ll[1])))
        np.testing.assert_allclose(eloglik, 0.25 * ll[0] + 0.75 * ll[1])
        with self.assertRaises(DistributionError):
            combine_log_likelihoods(UpMethodKind.POINT, ll, weights)


class TestPointEstimate(unittest.TestCase):
    """Testes para θ̂ do Point"""

    def test_analytic_mean(self):
        """Testar μ_T1 da posterior analítica"""
        tpost = case1_tposterior()
        np.testing.assert_array_equal(point_estimate(tpost).c, tpost.analytic['mean'])

    def test_median_and_mode(self):
        """Testar mediana e proxy de moda a partir dos draws"""
        draws = np.array([[0.0, 1.0], [1.0, 2.0], [5.0, 9.0]])
        tpost = TPosterior(spec=linear_surrogate_spec(), draws=draws, log_probs=np.array([-3.0, -1.0, -2.0]))
        np.testing.assert_array_equal(point_estimate(tpost, 'median').c, [1.0, 2.0])
        np.testing.assert_array_equal(point_estimate(tpost, 'mode').c, [1.0, 2.0])
        np.testing.assert_allclose(point_estimate(tpost, 'mean').c, [2.0, 4.0])

    def test_clustered_source(self):
        """Testar θ̂ a partir de centróides ponderados"""
        clusters = ClusterSet(centroids=[[0.0, 1.0], [1.0, 2.0], [5.0, 9.0]], weights=[0.2, 0.5, 0.3],
                              spec=linear_surrogate_spec())
        np.testing.assert_allclose(point_estimate(clusters).c, [2.0, 3.9])
        np.testing.assert_array_equal(point_estimate(clusters, 'median').c, [1.0, 2.0])
        np.testing.assert_array_equal(point_estimate(clusters, 'mode').c, [1.0, 2.0])

        priors = IStepPriors(DistSpec.normal(0.0, 1.0), 0.1)
        ipost = infer(POINT, None, clusters, Measurements(ys=[-0.5]), priors,
                      SamplerConfig(n_chains=2, n_warmup=100, n_post=50), Rng(1))
        self.assertEqual(ipost.draws.shape, (100, 1))


class TestMethodEquivalences(unittest.TestCase):
    """Testes para identidades entre os métodos de propagação"""

    def setUp(self):
        self.priors = case1_priors()
        self.measurements = Measurements(ys=[-0.5])
        self.spec = linear_surrogate_spec()

    def test_single_draw_collapse(self):
        """Testar S = 1: os quatro métodos coincidem a menos de constante"""
        tpost = TPosterior(spec=self.spec, draws=[[0.5, 2.0]])
        reference = centered(method_log_density(POINT, self.spec, tpost, self.measurements, self.priors)(OMEGA_GRID))
        for method in (ELIK, ELOGLIK, EPOST):
            values = method_log_density(method, self.spec, tpost, self.measurements, self.priors)(OMEGA_GRID)
            self.assertLess(np.max(np.abs(centered(values) - reference)), 1e-8, msg=method.label)

    def test_single_draw_samples(self):
        """Testar S = 1: amostras do Point e do E-Post indistinguíveis (KS)"""
        tpost = TPosterior(spec=self.spec, draws=[[0.5, 2.0]])
        config = SamplerConfig(n_chains=4, n_warmup=500, n_post=5000)
        point = infer(POINT, self.spec, tpost, self.measurements, self.priors, config, Rng(11))
        eloglik = infer(ELOGLIK, self.spec, tpost, self.measurements, self.priors, config, Rng(11))
        epost = infer(EPOST, self.spec, tpost, self.measurements, self.priors, config, Rng(12))
        np.testing.assert_allclose(eloglik.draws, point.draws)
        self.assertLess(stats.ks_2samp(point.draws[:, 0], epost.draws[:, 0]).statistic, 0.05)

    def test_elogpost_equals_eloglik(self):
        """Testar E-Log-Post ≡ E-Log-Lik a menos de constante"""
        tpost = case1_tposterior()
        eloglik = method_log_density(ELOGLIK, self.spec, tpost, self.measurements, self.priors)(OMEGA_GRID)
        elogpost = elogpost_log_density(self.spec, tpost, self.measurements, self.priors)(OMEGA_GRID)
        self.assertLess(np.ptp(elogpost - eloglik), 1e-9)

    def test_clustering_with_one_cluster_per_draw(self):
        """Testar L = S: mesma densidade que os draws não agrupados"""
        tpost = case1_tposterior()
        clusters = cluster_draws(tpost, tpost.n_draws, Rng(2))
        for method in (ELIK, ELOGLIK):
            direct = method_log_density(method, self.spec, tpost, self.measurements, self.priors)(OMEGA_GRID)
            grouped = method_log_density(method, self.spec, clusters, self.measurements, self.priors)(OMEGA_GRID)
            self.assertLess(np.max(np.abs(direct - grouped)), 1e-10, msg=method.label)

    def test_clustering_deviation_shrinks(self):
        """Testar desvio do E-Log-Lik com L = S não maior que com L = ⌈S/4⌉"""
        tpost = case1_tposterior(n_samples=40)
        direct = method_log_density(ELOGLIK, self.spec, tpost, self.measurements, self.priors)(OMEGA_GRID)
        deviation = {}
        for n_clusters in (int(np.ceil(tpost.n_draws / 4)), tpost.n_draws):
            clusters = cluster_draws(tpost, n_clusters, Rng(7))
            grouped = method_log_density(ELOGLIK, self.spec, clusters, self.measurements, self.priors)(OMEGA_GRID)
            deviation[n_clusters] = np.max(np.abs(direct - grouped))
        self.assertLess(deviation[40], 1e-10)
        self.assertLessEqual(deviation[40], deviation[10])

    def test_evidences_require_1d_fixed(self):
        """Testar normalização por componente com σ_I amostrado"""
        priors = IStepPriors(DistSpec.normal(0.0, 1.0), DistSpec.uniform(0.0, 0.5))
        with self.assertRaises(DistributionError):
            component_log_evidences(self.spec, np.array([[0.5, 2.0]]), None, self.measurements, priors)


class TestInfer(unittest.TestCase):
    """Testes para a execução dos métodos por MCMC"""

    def setUp(self):
        self.priors = case1_priors()
        self.measurements = Measurements(ys=[-0.5])
        self.spec = linear_surrogate_spec()
        self.config = SamplerConfig(n_chains=2, n_warmup=200, n_post=200)

    def test_requires_draws(self):
        """Testar E-Lik com T-posterior só analítico"""
        data = generate_training_data(SimulatorSpec.linear(), [-0.9, -0.3], 0.0, Rng(0))
        tpost = train_conjugate_linear(data, 0.0, 10.0, 0.5)
        with self.assertRaises(DistributionError):
            infer(ELIK, self.spec, tpost, self.measurements, self.priors, self.config, Rng(0))

    def test_weighted_epost(self):
        """Testar E-Post com pesos desiguais: pool reamostrado"""
        clusters = ClusterSet(centroids=[[0.5, 2.0], [0.3, 2.2]], weights=[0.3, 0.7], spec=self.spec)
        ipost = infer(EPOST, None, clusters, self.measurements, self.priors, self.config, Rng(3))
        self.assertEqual(ipost.draws.shape, (800, 1))
        self.assertEqual(ipost.diagnostics['n_components'], 2)
        self.assertEqual(ipost.diagnostics['failed_components'], [])
        self.assertEqual(ipost.names, ['omega'])

    def test_reproducible(self):
        """Testar reprodutibilidade por seed"""
        tpost = case1_tposterior()
        a = infer(ELIK, self.spec, tpost, self.measurements, self.priors, self.config, Rng(4))
        b = infer(ELIK, self.spec, tpost, self.measurements, self.priors, self.config, Rng(4))
        np.testing.assert_array_equal(a.draws, b.draws)
        self.assertIn('tposterior_hash', a.provenance)

    def test_no_measurements_recovers_prior(self):
        """Testar N_I = 0: I-posterior igual à prior (KS contra draws diretos)"""
        config = SamplerConfig(n_chains=4, n_warmup=500, n_post=5000)
        prior_draws = np.random.default_rng(8).normal(0.0, 1.0, size=20000)
        for method in (POINT, ELIK, ELOGLIK):
            ipost = infer(method, self.spec, case1_tposterior(), Measurements(ys=[]), self.priors, config, Rng(8))
            statistic = stats.ks_2samp(ipost.draws[:, 0], prior_draws).statistic
            self.assertLess(statistic, 0.05, msg=method.label)

    def test_simulator_reference(self):
        """Testar posterior contra o simulador verdadeiro"""
        config = SamplerConfig(n_chains=4, n_warmup=500, n_post=1000)
        ipost = infer_simulator(SimulatorSpec.linear(0.5, 2.0), self.measurements, self.priors, config, Rng(5))
        var = 1.0 / (1.0 + 4.0 / 0.01)
        mean = var * 2.0 * (-1.0) / 0.01
        self.assertLess(abs(ipost.draws[:, 0].mean() - mean), 0.01)
        self.assertLess(abs(ipost.draws[:, 0].std() / np.sqrt(var) - 1.0), 0.1)


def create_test_suite():
    """Criar suite de testes"""
    loader = unittest.defaultTestLoader
    suite = unittest.TestSuite()
    for case in (TestUpMethod, TestIStepPriors, TestLikelihoods, TestPointEstimate, TestMethodEquivalences,
                 TestInfer):
        suite.addTest(loader.loadTestsFromTestCase(case))
    return suite


if __name__ == '__main__':
    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(create_test_suite())
    sys.exit(0 if result.wasSuccessful() else 1)
