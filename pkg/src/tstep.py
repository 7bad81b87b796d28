#!/usr/bin/env python3
# src/tstep.py

"""
T-Step: treino do surrogate. Posteriores conjugadas analíticas para os
casos lineares e MCMC para surrogates não lineares.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from config import Config
from mcmc import SamplerConfig, Support, TargetDensity, max_rhat, sample, split_rhat
from monitoring import chain_diagnostics
from prob_core import DistSpec, draw, log_density
from surrogates import (SurrogateSpec, linear_surrogate_spec, log_likelihood_matrix,
                        slope_surrogate_spec, surrogate_eval_batch)
from utils import (DistributionError, hash_array, read_json, read_numeric_csv, timer, write_csv,
                   write_json)

logger = logging.getLogger(__name__)


@dataclass
class TPosterior:
    """
    Draws de θ = (c [, σ_A]) do T-posterior

    analytic guarda {'mean', 'cov'} apenas para o treino conjugado.
    """

    spec: SurrogateSpec
    draws: np.ndarray = None
    includes_sigma_a: bool = False
    sigma_a_fixed: float = None
    analytic: dict = None
    log_probs: np.ndarray = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.draws is not None:
            self.draws = np.atleast_2d(np.asarray(self.draws, dtype=float))
            expected = self.spec.n_coeffs + (1 if self.includes_sigma_a else 0)
            if self.draws.shape[1] != expected or self.draws.shape[0] < 1:
                raise DistributionError(
                    f"draws com forma {self.draws.shape}; esperado S ≥ 1 e {expected} colunas"
                )
            if self.includes_sigma_a and np.any(self.draws[:, -1] <= 0):
                raise DistributionError("Coluna σ_A deve ser estritamente positiva")
        elif self.analytic is None:
            raise DistributionError("TPosterior requer draws ou forma analítica")

    @property
    def n_draws(self):
        return 0 if self.draws is None else self.draws.shape[0]

    @property
    def coeffs(self):
        return None if self.draws is None else self.draws[:, :self.spec.n_coeffs]

    @property
    def sigma_a(self):
        if self.draws is None or not self.includes_sigma_a:
            return None
        return self.draws[:, -1]

    def column_names(self):
        return self.spec.coeff_names() + (['sigma_a'] if self.includes_sigma_a else [])

    def content_hash(self):
        if self.analytic is None:
            return hash_array(self.draws)
        return hash_array(self.draws, self.analytic['mean'], self.analytic['cov'])


def dataset_hash(data):
    return hash_array(data.inputs, data.noise_hypers, data.outputs)


def _canonical_order(data):
    """Ordem canônica das linhas (a posterior analítica não depende da ordem de entrada)"""
    keys = [data.outputs] + [data.inputs[:, j] for j in reversed(range(data.inputs.shape[1]))]
    return np.lexsort(keys)


def _with_draws(tpost, n_samples, rng):
    if n_samples and n_samples > 0:
        if rng is None:
            raise DistributionError("rng é obrigatório para amostrar da posterior analítica")
        mvn = DistSpec.multivariate_normal(tpost.analytic['mean'], tpost.analytic['cov'])
        tpost.draws = np.atleast_2d(draw(mvn, rng, size=int(n_samples)))
    return tpost


# ===================================
# Treino conjugado
# ===================================

def train_conjugate_linear(data, mu_t0, sigma_t0, sigma_a, n_samples=0, rng=None, spec=None):
    """
    Posterior normal-normal exata do surrogate c₁ + c₂ω

    Σ_T1 = (Σ_T0⁻¹ + σ_A⁻² ΩᵀΩ)⁻¹,  μ_T1 = Σ_T1 (Σ_T0⁻¹ μ_T0 + σ_A⁻² Ωᵀ y)

    Args:
        data: TrainingDataset univariado
        mu_t0: média a priori (escalar ou vetor de 2)
        sigma_t0: desvio a priori (escalar), ou matriz de covariância 2 × 2
        sigma_a: σ_A fixo (> 0)
        n_samples: número de draws exatos a gerar (0 = só forma analítica)
        rng: Rng para os draws
    """
    if not sigma_a > 0:
        raise DistributionError("σ_A deve ser positivo no treino conjugado")
    mu0 = np.broadcast_to(np.asarray(mu_t0, dtype=float), (2,)).copy()
    sigma_t0 = np.asarray(sigma_t0, dtype=float)
    cov0 = sigma_t0 if sigma_t0.ndim == 2 else np.eye(2) * float(sigma_t0) ** 2

    order = _canonical_order(data)
    omega = data.inputs[order, 0]
    y = data.outputs[order]
    design = np.column_stack([np.ones_like(omega), omega])

    try:
        prior_factor = linalg.cho_factor(cov0)
        prior_precision = linalg.cho_solve(prior_factor, np.eye(2))
        precision = prior_precision + design.T @ design / sigma_a ** 2
        factor = linalg.cho_factor(precision)
    except linalg.LinAlgError as e:
        raise DistributionError(f"Matriz de precisão singular no treino conjugado: {e}")

    cov1 = linalg.cho_solve(factor, np.eye(2))
    cov1 = 0.5 * (cov1 + cov1.T)
    mean1 = linalg.cho_solve(factor, prior_precision @ mu0 + design.T @ y / sigma_a ** 2)

    spec = spec or linear_surrogate_spec(float(mu0[0]), float(np.sqrt(cov0[0, 0])))
    tpost = TPosterior(
        spec=spec,
        sigma_a_fixed=float(sigma_a),
        analytic={'mean': mean1, 'cov': cov1},
        provenance={'method': 'conjugate_linear', 'dataset_hash': dataset_hash(data), 'sigma_a': float(sigma_a)},
    )
    logger.debug(f"📐 Posterior conjugada linear: μ_T1={mean1.round(6).tolist()}")
    return _with_draws(tpost, n_samples, rng)


def train_conjugate_slope(data, mu_t0, sigma_t0, sigma_a, n_samples=0, rng=None, spec=None):
    """σ_T1² = (σ_T0⁻² + σ_A⁻² Σω²)⁻¹,  μ_T1 = σ_T1² (σ_T0⁻² μ_T0 + σ_A⁻² Σωy)"""
    if not sigma_a > 0 or not sigma_t0 > 0:
        raise DistributionError("σ_A e σ_T0 devem ser positivos")
    if data.inputs.shape[1] != 1:
        raise DistributionError("O modelo só-inclinação requer entradas univariadas")
    order = _canonical_order(data)
    omega = data.inputs[order, 0]
    y = data.outputs[order]

    var1 = 1.0 / (sigma_t0 ** -2 + np.sum(omega ** 2) / sigma_a ** 2)
    mean1 = var1 * (mu_t0 / sigma_t0 ** 2 + np.sum(omega * y) / sigma_a ** 2)

    spec = spec or slope_surrogate_spec(mu_t0, sigma_t0)
    tpost = TPosterior(
        spec=spec,
        sigma_a_fixed=float(sigma_a),
        analytic={'mean': np.array([mean1]), 'cov': np.array([[var1]])},
        provenance={'method': 'conjugate_slope', 'dataset_hash': dataset_hash(data), 'sigma_a': float(sigma_a)},
    )
    return _with_draws(tpost, n_samples, rng)


# ===================================
# Treino por MCMC
# ===================================

def _likelihood_scale(spec, data, sigma_a_fixed):
    if spec.samples_sigma_a:
        return None
    if sigma_a_fixed is not None:
        if not sigma_a_fixed > 0:
            raise DistributionError("σ_A fixo deve ser positivo")
        return np.float64(sigma_a_fixed)
    # Sem σ_A: a verossimilhança usa σ_S de cada ponto
    if np.any(data.noise_hypers <= 0):
        raise DistributionError("σ_A ausente requer σ_S > 0 em todos os pontos de treino")
    return data.noise_hypers[None, :]


def build_tstep_target(spec, data, sigma_a_fixed=None):
    """Densidade log p(θ | 𝒟_T) não normalizada, avaliada em lote"""
    n_coeffs = spec.n_coeffs
    priors = list(spec.coeff_priors) + ([spec.sigma_a_prior] if spec.samples_sigma_a else [])
    fixed_scale = _likelihood_scale(spec, data, sigma_a_fixed)

    def log_prob_batch(theta):
        theta = np.atleast_2d(theta)
        log_prior = np.zeros(theta.shape[0])
        for j, prior in enumerate(priors):
            log_prior += log_density(prior, theta[:, j])
        if spec.samples_sigma_a:
            sigma = theta[:, n_coeffs]
            scale = np.where(sigma > 0, sigma, 1.0)[:, None]
        else:
            sigma = None
            scale = fixed_scale
        with np.errstate(over='ignore', invalid='ignore'):
            log_lik = log_likelihood_matrix(spec, theta[:, :n_coeffs], data.inputs, data.outputs, scale).sum(axis=1)
        log_post = log_prior + log_lik
        if sigma is not None:
            log_post = np.where(sigma > 0, log_post, -np.inf)
        return np.where(np.isnan(log_post) & ~np.isnan(theta).any(axis=1), -np.inf, log_post)

    def init(rng):
        return np.array([float(draw(p, rng)) for p in priors])

    names = spec.coeff_names() + (['sigma_a'] if spec.samples_sigma_a else [])
    return TargetDensity(
        dim=len(priors),
        log_prob=lambda x: float(log_prob_batch(np.asarray(x)[None, :])[0]),
        log_prob_batch=log_prob_batch,
        supports=[Support.from_bounds(*p.support()) for p in priors],
        init=init,
        names=names,
        label=f"tstep:{spec.kind.value}",
    )


@timer
def train_mcmc(spec, data, config=None, rng=None, sigma_a_fixed=None, rhat_threshold=None):
    """
    T-posterior por MCMC: p(θ | 𝒟_T) ∝ Π p(y_T | ω_T, σ_S, θ) p(θ)

    R̂ acima do limiar não levanta exceção; o resultado é marcado em
    provenance['flagged'].
    """
    config = config or SamplerConfig(Config.MCMC_CHAINS, Config.MCMC_WARMUP, Config.MCMC_POST)
    threshold = Config.RHAT_THRESHOLD if rhat_threshold is None else rhat_threshold
    target = build_tstep_target(spec, data, sigma_a_fixed)

    logger.info(f"🎯 Treinando surrogate {spec.kind.value} por MCMC (N_T={len(data)}, dim θ={target.dim})")
    chains = sample(target, config, rng)

    rhat = split_rhat(chains) if chains.n_post >= 4 else None
    rhat_max = max_rhat(rhat)
    diagnostics = chain_diagnostics(rhat, chains.acceptance, threshold)
    flagged = rhat_max is not None and rhat_max > threshold
    if flagged:
        logger.warning(f"⚠️ R̂ máximo {rhat_max:.3f} acima de {threshold} no T-step")
    else:
        logger.info(f"✅ T-step concluído: {chains.n_chains}×{chains.n_post} draws, R̂ máx {rhat_max}")

    return TPosterior(
        spec=spec,
        draws=chains.pooled(),
        includes_sigma_a=spec.samples_sigma_a,
        sigma_a_fixed=sigma_a_fixed,
        log_probs=chains.pooled_log_probs(),
        provenance={
            'method': 'mcmc',
            'dataset_hash': dataset_hash(data),
            'seed': chains.seed,
            'rhat': None if rhat is None else rhat.tolist(),
            'rhat_max': rhat_max,
            'acceptance': chains.acceptance.tolist(),
            'diagnostics_status': diagnostics['status'],
            'flagged': bool(flagged),
        },
    )


# ===================================
# Preditivo do T-posterior
# ===================================

def tpredictive(tpost, grid, rng, level=0.95):
    """
    Média e bandas centrais da predição do surrogate numa grade

    As bandas epistêmicas vêm da dispersão de 𝓜̃(ω; c^(s)); as totais
    somam ruído N(0, σ_A^(s)²) (ou σ_A fixo) a cada draw.
    """
    if tpost.draws is None:
        raise DistributionError("tpredictive requer draws do T-posterior")
    grid = np.asarray(grid, dtype=float)
    preds = surrogate_eval_batch(tpost.spec, tpost.coeffs, grid)
    sigma = tpost.sigma_a if tpost.includes_sigma_a else tpost.sigma_a_fixed
    q_lo, q_hi = (1.0 - level) / 2.0, (1.0 + level) / 2.0
    result = {
        'mean': preds.mean(axis=0),
        'epistemic_lo': np.quantile(preds, q_lo, axis=0),
        'epistemic_hi': np.quantile(preds, q_hi, axis=0),
    }
    if sigma is not None:
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float).reshape(-1, 1), (preds.shape[0], 1))
        noisy = preds + sigma * rng.gen.standard_normal(preds.shape)
        result['total_lo'] = np.quantile(noisy, q_lo, axis=0)
        result['total_hi'] = np.quantile(noisy, q_hi, axis=0)
    return result


def write_tpredictive(path, grid, predictive):
    grid = np.atleast_2d(np.asarray(grid, dtype=float).T).T
    keys = [k for k in ('mean', 'epistemic_lo', 'epistemic_hi', 'total_lo', 'total_hi') if k in predictive]
    header = [f"omega{j + 1}" if grid.shape[1] > 1 else 'omega' for j in range(grid.shape[1])] + keys
    rows = (list(grid[n]) + [predictive[k][n] for k in keys] for n in range(grid.shape[0]))
    return write_csv(path, header, rows)


# ===================================
# Persistência
# ===================================

def save_tposterior(tpost, path):
    """Draws em CSV e um JSON irmão (<nome>.json) com spec, forma analítica e proveniência"""
    path = Path(path)
    sidecar = path.with_suffix('.json')
    if tpost.draws is not None:
        write_csv(path, tpost.column_names(), (row.tolist() for row in tpost.draws))
    else:
        write_csv(path, tpost.column_names(), [])
    write_json(sidecar, {
        'spec': tpost.spec.to_dict(),
        'includes_sigma_a': tpost.includes_sigma_a,
        'sigma_a_fixed': tpost.sigma_a_fixed,
        'analytic': None if tpost.analytic is None else {
            'mean': np.asarray(tpost.analytic['mean']).tolist(),
            'cov': np.asarray(tpost.analytic['cov']).tolist(),
        },
        'provenance': tpost.provenance,
        'content_hash': tpost.content_hash(),
    })
    return path


def load_tposterior(path):
    path = Path(path)
    meta = read_json(path.with_suffix('.json'))
    _, matrix = read_numeric_csv(path)
    analytic = meta.get('analytic')
    if analytic is not None:
        analytic = {'mean': np.asarray(analytic['mean'], dtype=float), 'cov': np.asarray(analytic['cov'], dtype=float)}
    spec = SurrogateSpec.from_dict(meta['spec'])
    return TPosterior(
        spec=spec,
        draws=matrix if matrix.shape[0] else None,
        includes_sigma_a=bool(meta['includes_sigma_a']),
        sigma_a_fixed=meta.get('sigma_a_fixed'),
        analytic=analytic,
        provenance=meta.get('provenance', {}),
    )
