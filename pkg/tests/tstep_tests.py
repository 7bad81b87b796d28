#!/usr/bin/env python3
# tests/tstep_tests.py

import unittest
import tempfile
import sys
import numpy as np
from pathlib import Path

# Adicionar o diretório src ao path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

try:
    from mcmc import SamplerConfig
    from prob_core import DistSpec, Rng
    from simulators import SimulatorSpec, TrainingDataset, generate_training_data, halton_design_1d
    from surrogates import linear_surrogate_spec, logistic_surrogate_spec, slope_surrogate_spec
    from tstep import (TPosterior, build_tstep_target, load_tposterior, save_tposterior, tpredictive,
                       train_conjugate_linear, train_conjugate_slope, train_mcmc, write_tpredictive)
    from utils import DistributionError, read_csv
except ImportError as e:
    print(f"❌ Erro ao importar módulos: {e}")
    sys.exit(1)


def case1_data():
    return generate_training_data(SimulatorSpec.linear(0.5, 2.0), [-0.9, -0.3], 0.0, Rng(0))


class TestConjugate(unittest.TestCase):
    """Testes para as posteriores conjugadas"""

    def test_linear_matches_closed_form(self):
        """Testar Σ_T1 e μ_T1 contra a álgebra direta"""
        data = case1_data()
        tpost = train_conjugate_linear(data, 0.0, 10.0, 0.1)
        design = np.array([[1.0, -0.9], [1.0, -0.3]])
        precision = np.eye(2) / 100.0 + design.T @ design / 0.01
        cov = np.linalg.inv(precision)
        mean = cov @ (design.T @ np.array([-1.3, -0.1]) / 0.01)
        np.testing.assert_allclose(tpost.analytic['cov'], cov, rtol=1e-10)
        np.testing.assert_allclose(tpost.analytic['mean'], mean, rtol=1e-10)
        np.testing.assert_allclose(tpost.analytic['mean'], [0.5, 2.0], atol=5e-3)
        self.assertEqual(tpost.n_draws, 0)

    def test_linear_order_invariant(self):
        """Testar invariância à ordem dos dados de treino"""
        data = case1_data()
        flipped = TrainingDataset(data.inputs[::-1], data.noise_hypers[::-1], data.outputs[::-1])
        a = train_conjugate_linear(data, 0.0, 10.0, 0.5)
        b = train_conjugate_linear(flipped, 0.0, 10.0, 0.5)
        np.testing.assert_array_equal(a.analytic['mean'], b.analytic['mean'])
        np.testing.assert_array_equal(a.analytic['cov'], b.analytic['cov'])

    def test_uncertainty_grows_with_sigma_a(self):
        """Testar Σ_T1^(2,2) crescente em σ_A"""
        data = case1_data()
        variances = [train_conjugate_linear(data, 0.0, 10.0, s).analytic['cov'][1, 1] for s in (0.1, 0.5, 1.0)]
        self.assertTrue(variances[0] < variances[1] < variances[2])

    def test_slope_closed_form(self):
        """Testar σ_T1² e μ_T1 do modelo só-inclinação"""
        data = generate_training_data(SimulatorSpec.slope_only(2.0), [0.5, 1.0], 0.0, Rng(0))
        tpost = train_conjugate_slope(data, 0.0, 10.0, 0.2)
        var = 1.0 / (0.01 + 1.25 / 0.04)
        mean = var * (0.5 * 1.0 + 1.0 * 2.0) / 0.04
        self.assertAlmostEqual(float(tpost.analytic['cov'][0, 0]), var)
        self.assertAlmostEqual(float(tpost.analytic['mean'][0]), mean)

    def test_exact_draws(self):
        """Testar draws da posterior analítica"""
        tpost = train_conjugate_linear(case1_data(), 0.0, 10.0, 0.5, n_samples=20000, rng=Rng(1))
        self.assertEqual(tpost.draws.shape, (20000, 2))
        np.testing.assert_allclose(tpost.draws.mean(axis=0), tpost.analytic['mean'], atol=0.05)
        np.testing.assert_allclose(np.cov(tpost.draws, rowvar=False), tpost.analytic['cov'], rtol=0.05)

    def test_draws_require_rng(self):
        """Testar draws sem rng"""
        with self.assertRaises(DistributionError):
            train_conjugate_linear(case1_data(), 0.0, 10.0, 0.5, n_samples=10)

    def test_invalid_sigma_a(self):
        """Testar σ_A ≤ 0"""
        with self.assertRaises(DistributionError):
            train_conjugate_linear(case1_data(), 0.0, 10.0, 0.0)


class TestTPosterior(unittest.TestCase):
    """Testes para o contêiner do T-posterior"""

    def test_column_validation(self):
        """Testar número de colunas"""
        with self.assertRaises(DistributionError):
            TPosterior(spec=linear_surrogate_spec(), draws=np.zeros((5, 3)))

    def test_positive_sigma_a_column(self):
        """Testar coluna σ_A positiva"""
        spec = logistic_surrogate_spec(DistSpec.half_normal(0.1))
        draws = np.array([[2.0, 10.0, 0.0, -1.0, -0.1]])
        with self.assertRaises(DistributionError):
            TPosterior(spec=spec, draws=draws, includes_sigma_a=True)

    def test_requires_content(self):
        """Testar T-posterior vazio"""
        with self.assertRaises(DistributionError):
            TPosterior(spec=linear_surrogate_spec())

    def test_save_and_load(self):
        """Testar releitura do CSV e do JSON irmão"""
        tpost = train_conjugate_linear(case1_data(), 0.0, 10.0, 0.5, n_samples=50, rng=Rng(2))
        with tempfile.TemporaryDirectory() as tmp:
            path = save_tposterior(tpost, Path(tmp) / 'tposterior.csv')
            self.assertTrue(path.with_suffix('.json').exists())
            loaded = load_tposterior(path)
        np.testing.assert_allclose(loaded.draws, tpost.draws, rtol=1e-12)
        np.testing.assert_allclose(loaded.analytic['cov'], tpost.analytic['cov'], rtol=1e-12)
        self.assertEqual(loaded.content_hash(), tpost.content_hash())
        self.assertEqual(loaded.column_names(), ['c1', 'c2'])


class TestMcmcTraining(unittest.TestCase):
    """Testes para o treino por MCMC"""

    def test_linear_mcmc_matches_conjugate(self):
        """Testar MCMC contra a posterior conjugada no caso linear"""
        data = case1_data()
        spec = linear_surrogate_spec(0.0, 10.0)
        exact = train_conjugate_linear(data, 0.0, 10.0, 0.5)
        tpost = train_mcmc(spec, data, SamplerConfig(4, 1000, 2000), Rng(3), sigma_a_fixed=0.5)
        mean = exact.analytic['mean']
        std = np.sqrt(np.diag(exact.analytic['cov']))
        np.testing.assert_allclose(tpost.draws.mean(axis=0), mean, atol=0.1 * std.max())
        np.testing.assert_allclose(tpost.draws.std(axis=0), std, rtol=0.1)
        self.assertFalse(tpost.provenance['flagged'])
        self.assertIn(tpost.provenance['diagnostics_status'], ('healthy', 'warning'))

    def test_logistic_samples_sigma_a(self):
        """Testar surrogate logístico com σ_A amostrado"""
        simulator = SimulatorSpec.logistic(sigma_s=0.01)
        data = generate_training_data(simulator, halton_design_1d(7), 0.01, Rng(4))
        spec = logistic_surrogate_spec(DistSpec.half_normal(0.1))
        tpost = train_mcmc(spec, data, SamplerConfig(2, 300, 200), Rng(5))
        self.assertTrue(tpost.includes_sigma_a)
        self.assertEqual(tpost.draws.shape, (400, 5))
        self.assertTrue(np.all(tpost.sigma_a > 0))
        self.assertIn('rhat_max', tpost.provenance)

    def test_target_without_scale(self):
        """Testar σ_A ausente com σ_S = 0"""
        data = case1_data()
        with self.assertRaises(DistributionError):
            build_tstep_target(linear_surrogate_spec(), data)

    def test_target_is_finite_at_truth(self):
        """Testar log-posterior finita no valor verdadeiro"""
        target = build_tstep_target(slope_surrogate_spec(), case1_data(), sigma_a_fixed=0.5)
        self.assertTrue(np.isfinite(target.log_prob(np.array([2.0]))))


class TestPredictive(unittest.TestCase):
    """Testes para o preditivo do T-posterior"""

    def test_bands(self):
        """Testar bandas epistêmicas e totais"""
        tpost = train_conjugate_linear(case1_data(), 0.0, 10.0, 0.5, n_samples=500, rng=Rng(6))
        grid = np.linspace(-1.0, 1.0, 21)
        pred = tpredictive(tpost, grid, Rng(7))
        self.assertTrue(np.all(pred['epistemic_lo'] <= pred['mean']))
        self.assertTrue(np.all(pred['mean'] <= pred['epistemic_hi']))
        self.assertTrue(np.all(pred['total_hi'] - pred['total_lo'] >= pred['epistemic_hi'] - pred['epistemic_lo']))
        with tempfile.TemporaryDirectory() as tmp:
            path = write_tpredictive(Path(tmp) / 'tpredictive.csv', grid, pred)
            header, rows = read_csv(path)
        self.assertEqual(header[:2], ['omega', 'mean'])
        self.assertEqual(len(rows), 21)

    def test_requires_draws(self):
        """Testar preditivo sem draws"""
        tpost = train_conjugate_linear(case1_data(), 0.0, 10.0, 0.5)
        with self.assertRaises(DistributionError):
            tpredictive(tpost, [0.0], Rng(0))


def create_test_suite():
    """Criar suite de testes"""
    loader = unittest.defaultTestLoader
    suite = unittest.TestSuite()
    for case in (TestConjugate, TestTPosterior, TestMcmcTraining, TestPredictive):
        suite.addTest(loader.loadTestsFromTestCase(case))
    return suite


if __name__ == '__main__':
    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(create_test_suite())
    sys.exit(0 if result.wasSuccessful() else 1)
