#!/usr/bin/env python3
# src/istep.py

"""
I-Step: inferência de ω_I a partir de medições, propagando o T-posterior
pelos métodos Point, E-Post, E-Lik e E-Log-Lik.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate

from clustering import ClusterSet
from config import Config
from mcmc import SamplerConfig, Support, TargetDensity, max_rhat, sample, split_rhat
from monitoring import chain_diagnostics
from prob_core import DistSpec, Family, Rng, draw, log_density, log_sum_exp, lognormal_logpdf, normal_logpdf
from simulators import simulate_batch
from surrogates import LikelihoodFamily, SurrogateParams, surrogate_eval_batch
from utils import (DistributionError, ProgressTracker, SamplerError, hash_array, run_jobs, timer,
                   write_csv)

logger = logging.getLogger(__name__)

# Correção de continuidade para contagens nulas sob verossimilhança log-normal
LOGNORMAL_ZERO_FLOOR = 0.5
EPOST_MAX_FAILURE_FRACTION = 0.05


class UpMethodKind(str, Enum):
    POINT = 'point'
    EPOST = 'epost'
    ELIK = 'elik'
    ELOGLIK = 'eloglik'


_ALIASES = {
    'point': UpMethodKind.POINT,
    'epost': UpMethodKind.EPOST, 'e-post': UpMethodKind.EPOST,
    'elik': UpMethodKind.ELIK, 'e-lik': UpMethodKind.ELIK,
    'eloglik': UpMethodKind.ELOGLIK, 'e-log-lik': UpMethodKind.ELOGLIK,
}


@dataclass(frozen=True)
class UpMethod:
    """Método de propagação; Point carrega o estimador (mean, median ou mode)"""

    kind: UpMethodKind
    estimator: str = 'mean'

    def __post_init__(self):
        object.__setattr__(self, 'kind', UpMethodKind(self.kind))
        if self.estimator not in ('mean', 'median', 'mode'):
            raise DistributionError(f"Estimador desconhecido: {self.estimator}")

    @classmethod
    def parse(cls, text):
        """'point', 'point:median', 'e-post', 'elik', 'e-log-lik', ..."""
        name, _, estimator = str(text).strip().lower().partition(':')
        if name not in _ALIASES:
            raise DistributionError(f"Método de propagação desconhecido: {text}")
        return cls(_ALIASES[name], estimator or 'mean')

    @property
    def label(self):
        if self.kind is UpMethodKind.POINT and self.estimator != 'mean':
            return f"point_{self.estimator}"
        return self.kind.value


POINT = UpMethod(UpMethodKind.POINT)
EPOST = UpMethod(UpMethodKind.EPOST)
ELIK = UpMethod(UpMethodKind.ELIK)
ELOGLIK = UpMethod(UpMethodKind.ELOGLIK)
ALL_METHODS = (POINT, EPOST, ELIK, ELOGLIK)


@dataclass
class IStepPriors:
    """Prior de ω_I (produto de univariadas) e de σ_I (DistSpec) ou σ_I fixo"""

    omega: list
    sigma_i: object
    names: list = None

    def __post_init__(self):
        if isinstance(self.omega, DistSpec):
            self.omega = [self.omega]
        self.omega = list(self.omega)
        if not self.omega:
            raise DistributionError("Pelo menos uma prior de ω_I é obrigatória")
        if not isinstance(self.sigma_i, DistSpec):
            self.sigma_i = float(self.sigma_i)
            if not self.sigma_i > 0:
                raise DistributionError("σ_I fixo deve ser positivo")
        if self.names is None:
            self.names = ['omega'] if len(self.omega) == 1 else [f"omega{j + 1}" for j in range(len(self.omega))]

    @property
    def dim_omega(self):
        return len(self.omega)

    @property
    def samples_sigma_i(self):
        return isinstance(self.sigma_i, DistSpec)

    @property
    def dim(self):
        return self.dim_omega + (1 if self.samples_sigma_i else 0)

    def all_names(self):
        return self.names + (['sigma_i'] if self.samples_sigma_i else [])

    def specs(self):
        return self.omega + ([self.sigma_i] if self.samples_sigma_i else [])

    def supports(self):
        return [Support.from_bounds(*p.support()) for p in self.specs()]

    def draw_prior(self, rng, size):
        return np.column_stack([np.atleast_1d(draw(p, rng, size=size)) for p in self.specs()])

    def to_dict(self):
        return {
            'omega': [p.to_dict() for p in self.omega],
            'sigma_i': self.sigma_i.to_dict() if self.samples_sigma_i else self.sigma_i,
        }


@dataclass
class IPosterior:
    """Draws de (ω_I [, σ_I]) produzidos por um método de propagação"""

    draws: np.ndarray
    method: UpMethod
    names: list
    diagnostics: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def n_draws(self):
        return self.draws.shape[0]

    def omega(self, n_dim=None):
        n_dim = n_dim or sum(1 for name in self.names if name != 'sigma_i')
        return self.draws[:, :n_dim]


def write_iposterior(path, ipost):
    return write_csv(path, ipost.names, (row.tolist() for row in ipost.draws))


# ===================================
# Componentes de θ
# ===================================

def _components(source):
    """(spec, coeficientes S × P, σ_A por componente ou None, pesos)"""
    if isinstance(source, ClusterSet):
        spec = source.spec
        theta = source.centroids
        weights = source.weights
        includes_sigma_a = source.includes_sigma_a
    else:
        if source.draws is None:
            raise DistributionError("Este método requer draws do T-posterior (amostre a posterior analítica)")
        spec = source.spec
        theta = source.draws
        weights = np.full(theta.shape[0], 1.0 / theta.shape[0])
        includes_sigma_a = source.includes_sigma_a
    n_coeffs = spec.n_coeffs
    sigma_a = theta[:, n_coeffs] if includes_sigma_a else None
    return spec, theta[:, :n_coeffs], sigma_a, weights


def point_estimate(tpost, estimator='mean'):
    """
    θ̂ do T-posterior: média, mediana ou proxy de moda (draw de maior log-prob)

    Para a posterior analítica os três coincidem com μ_T1. Para um ClusterSet
    usa os pesos: média ponderada, mediana ponderada ou centróide mais pesado.
    """
    if isinstance(tpost, ClusterSet):
        return _clustered_point_estimate(tpost, estimator)
    if tpost.analytic is not None and (tpost.draws is None or estimator == 'mean'):
        return SurrogateParams(c=np.asarray(tpost.analytic['mean'], dtype=float))

    draws = tpost.draws
    if estimator == 'mean':
        theta = draws.mean(axis=0)
    elif estimator == 'median':
        theta = np.median(draws, axis=0)
    elif estimator == 'mode':
        if tpost.log_probs is None:
            logger.warning("⚠️ log-probs não registrados; usando a média como proxy de moda")
            theta = draws.mean(axis=0)
        else:
            theta = draws[int(np.argmax(tpost.log_probs))]
    else:
        raise DistributionError(f"Estimador desconhecido: {estimator}")

    n_coeffs = tpost.spec.n_coeffs
    sigma_a = float(theta[n_coeffs]) if tpost.includes_sigma_a else None
    return SurrogateParams(c=theta[:n_coeffs], sigma_a=sigma_a)


def _clustered_point_estimate(clusters, estimator):
    centroids, weights = clusters.centroids, clusters.weights
    if estimator == 'mean':
        theta = weights @ centroids
    elif estimator == 'median':
        order = np.argsort(centroids, axis=0)
        cumulative = np.cumsum(weights[order], axis=0)
        first = np.argmax(cumulative >= 0.5, axis=0)
        theta = centroids[order[first, np.arange(centroids.shape[1])], np.arange(centroids.shape[1])]
    elif estimator == 'mode':
        theta = centroids[int(np.argmax(weights))]
    else:
        raise DistributionError(f"Estimador desconhecido: {estimator}")

    n_coeffs = clusters.spec.n_coeffs
    sigma_a = float(theta[n_coeffs]) if clusters.includes_sigma_a else None
    return SurrogateParams(c=np.asarray(theta[:n_coeffs], dtype=float), sigma_a=sigma_a)


# ===================================
# Verossimilhanças do I-step
# ===================================

def _measurement_inputs(measurements, omega):
    """Entradas do surrogate por proposta e medição: (C, N_I, dim)"""
    n_props, n_meas = omega.shape[0], len(measurements)
    repeated = np.repeat(omega[:, None, :], n_meas, axis=1)
    if measurements.times is None:
        return repeated
    times = np.broadcast_to(measurements.times[None, :, None], (n_props, n_meas, 1))
    return np.concatenate([times, repeated], axis=2)


def _observed(measurements, family):
    ys = measurements.ys
    if family is LikelihoodFamily.LOG_NORMAL:
        return np.maximum(ys, LOGNORMAL_ZERO_FLOOR)
    return ys


def component_log_likelihoods(spec, coeffs, sigma_a, measurements, omega, sigma_i, propagate_sigma_a=False):
    """
    Σ_i log p(y_I^(i) | ω_I, θ^(s)) para cada componente s e proposta c

    Args:
        coeffs: S × P; sigma_a: S ou None
        omega: C × dim(ω_I); sigma_i: C escalas de medição

    Returns:
        array S × C
    """
    omega = np.atleast_2d(omega)
    coeffs = np.atleast_2d(coeffs)
    n_comp, n_props, n_meas = coeffs.shape[0], omega.shape[0], len(measurements)
    if n_meas == 0:
        return np.zeros((n_comp, n_props))

    inputs = _measurement_inputs(measurements, omega).reshape(n_props * n_meas, -1)
    mean = surrogate_eval_batch(spec, coeffs, inputs).reshape(n_comp, n_props, n_meas)
    var = np.broadcast_to(np.asarray(sigma_i, dtype=float), (n_props,))[None, :, None] ** 2
    if propagate_sigma_a and sigma_a is not None:
        var = var + np.asarray(sigma_a, dtype=float)[:, None, None] ** 2
    scale = np.sqrt(var)
    y = _observed(measurements, spec.likelihood_family)[None, None, :]
    with np.errstate(over='ignore', invalid='ignore'):
        if spec.likelihood_family is LikelihoodFamily.LOG_NORMAL:
            ll = lognormal_logpdf(y, mean, scale)
        else:
            ll = normal_logpdf(y, mean, scale)
    ll = np.where(np.isnan(ll), -np.inf, ll)
    return ll.sum(axis=2)


def combine_log_likelihoods(kind, ll, weights):
    """Combinar S × C log-verossimilhanças por componente conforme o método"""
    if kind is UpMethodKind.ELIK:
        return log_sum_exp(ll, weights[:, None], axis=0)
    if kind is UpMethodKind.ELOGLIK:
        weighted = np.where(weights[:, None] > 0, weights[:, None] * ll, 0.0)
        return weighted.sum(axis=0)
    if ll.shape[0] != 1:
        raise DistributionError("Point/E-Post avaliam um único componente por vez")
    return ll[0]


def _split(priors, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    omega = x[:, :priors.dim_omega]
    if priors.samples_sigma_i:
        sigma_i = x[:, priors.dim_omega]
    else:
        sigma_i = np.full(x.shape[0], priors.sigma_i)
    return x, omega, sigma_i


def _log_prior(priors, x):
    total = np.zeros(x.shape[0])
    for j, prior in enumerate(priors.specs()):
        total += log_density(prior, x[:, j])
    return total


def make_log_posterior(kind, spec, coeffs, sigma_a, weights, measurements, priors, propagate_sigma_a=False):
    """log p(ω_I, σ_I | y_I) não normalizada (em lote) para Point/E-Lik/E-Log-Lik"""
    coeffs = np.atleast_2d(coeffs)
    weights = np.asarray(weights, dtype=float)

    def log_prob_batch(x):
        x, omega, sigma_i = _split(priors, x)
        out = _log_prior(priors, x)
        valid = np.isfinite(out) & (sigma_i > 0)
        out = np.where(valid, out, -np.inf)
        if np.any(valid):
            ll = component_log_likelihoods(spec, coeffs, sigma_a, measurements, omega[valid], sigma_i[valid],
                                           propagate_sigma_a)
            out[valid] += combine_log_likelihoods(kind, ll, weights)
        return out

    return log_prob_batch


def _target(log_prob_batch, priors, label):
    return TargetDensity(
        dim=priors.dim,
        log_prob=lambda x: float(log_prob_batch(np.asarray(x)[None, :])[0]),
        log_prob_batch=log_prob_batch,
        supports=priors.supports(),
        init=lambda rng: priors.draw_prior(rng, 1)[0],
        names=priors.all_names(),
        label=label,
    )


def _default_config(config):
    return config or SamplerConfig(Config.MCMC_CHAINS, Config.MCMC_WARMUP, Config.MCMC_POST)


def _default_rng(rng):
    return rng if rng is not None else Rng(Config.DEFAULT_SEED)


def _diagnostics(chains_list):
    rhats, acceptance = [], []
    for chains in chains_list:
        rhat = split_rhat(chains) if chains.n_post >= 4 else None
        if rhat is not None:
            rhats.append(rhat)
        acceptance.extend(chains.acceptance.tolist())
    rhat_all = np.concatenate(rhats) if rhats else None
    status = chain_diagnostics(rhat_all, acceptance)['status']
    return {
        'rhat': [r.tolist() for r in rhats],
        'rhat_max': max_rhat(rhat_all),
        'acceptance': acceptance,
        'status': status,
    }


def _provenance(source, measurements, rng, priors):
    if isinstance(source, ClusterSet):
        source_hash = hash_array(source.centroids, source.weights)
    elif hasattr(source, 'content_hash'):
        source_hash = source.content_hash()
    else:
        source_hash = None
    return {
        'tposterior_hash': source_hash,
        'measurements_hash': hash_array(measurements.ys, measurements.times),
        'seed': {'seed': rng.seed, 'stream': list(rng.stream)},
        'priors': priors.to_dict(),
    }


def _run_single(kind, method, spec, coeffs, sigma_a, weights, measurements, priors, config, rng,
                propagate_sigma_a, source):
    rng = _default_rng(rng)
    log_prob_batch = make_log_posterior(kind, spec, coeffs, sigma_a, weights, measurements, priors,
                                        propagate_sigma_a)
    chains = sample(_target(log_prob_batch, priors, f"istep:{method.label}"), _default_config(config), rng)
    return IPosterior(
        draws=chains.pooled(),
        method=method,
        names=priors.all_names(),
        diagnostics=_diagnostics([chains]),
        provenance=_provenance(source, measurements, rng, priors),
    )


# ===================================
# Métodos de propagação
# ===================================

@timer
def infer_point(spec, tpost, measurements, priors, config=None, rng=None, estimator='mean',
                propagate_sigma_a=False):
    """Point: MCMC sobre Σ log p(y_I | ω_I, θ̂) + log p(ω_I) com θ̂ = point_estimate(tpost)"""
    theta = point_estimate(tpost, estimator)
    spec = spec or tpost.spec
    sigma_a = None if theta.sigma_a is None else np.array([theta.sigma_a])
    return _run_single(UpMethodKind.POINT, UpMethod(UpMethodKind.POINT, estimator), spec, theta.c[None, :],
                       sigma_a, np.ones(1), measurements, priors, config, rng, propagate_sigma_a, tpost)


@timer
def infer_elik(spec, source, measurements, priors, config=None, rng=None, propagate_sigma_a=False):
    """E-Lik: log-verossimilhança = log Σ_s w_s Π_i p(y_I^(i) | ω_I, θ^(s))"""
    comp_spec, coeffs, sigma_a, weights = _components(source)
    return _run_single(UpMethodKind.ELIK, ELIK, spec or comp_spec, coeffs, sigma_a, weights, measurements,
                       priors, config, rng, propagate_sigma_a, source)


@timer
def infer_eloglik(spec, source, measurements, priors, config=None, rng=None, propagate_sigma_a=False):
    """E-Log-Lik: log-verossimilhança = Σ_s w_s Σ_i log p(y_I^(i) | ω_I, θ^(s))"""
    comp_spec, coeffs, sigma_a, weights = _components(source)
    return _run_single(UpMethodKind.ELOGLIK, ELOGLIK, spec or comp_spec, coeffs, sigma_a, weights, measurements,
                       priors, config, rng, propagate_sigma_a, source)


@timer
def infer_epost(spec, source, measurements, priors, config=None, rng=None, propagate_sigma_a=False,
                n_jobs=1, component_config=None):
    """
    E-Post: um ajuste Point por draw/centróide, draws reunidos numa mistura

    Pesos iguais concatenam os S·K draws; pesos desiguais reamostram os
    conjuntos de cada componente (multinomial) para um pool comum.
    A execução falha se mais de 5% dos ajustes falharem.
    """
    comp_spec, coeffs, sigma_a, weights = _components(source)
    spec = spec or comp_spec
    config = component_config or _default_config(config)
    rng = _default_rng(rng)
    n_comp = coeffs.shape[0]
    label = f"istep:{EPOST.label}"
    progress = ProgressTracker(n_comp, "E-Post", log_every=max(1, n_comp // 10))

    def fit(index):
        log_prob_batch = make_log_posterior(
            UpMethodKind.POINT, spec, coeffs[index:index + 1],
            None if sigma_a is None else sigma_a[index:index + 1],
            np.ones(1), measurements, priors, propagate_sigma_a,
        )
        try:
            chains = sample(_target(log_prob_batch, priors, label), config, rng.child(index))
        except SamplerError as e:
            logger.warning(f"⚠️ Componente {index} do E-Post falhou: {e}")
            return None
        finally:
            progress.update()
        return chains

    results = run_jobs(fit, range(n_comp), n_jobs=n_jobs)
    failed = [i for i, r in enumerate(results) if r is None]
    if len(failed) > EPOST_MAX_FAILURE_FRACTION * n_comp:
        raise SamplerError(f"E-Post: {len(failed)} de {n_comp} ajustes de componente falharam")
    progress.finish()

    ok = [i for i, r in enumerate(results) if r is not None]
    pools = [results[i].pooled() for i in ok]
    ok_weights = weights[ok] / weights[ok].sum()

    if np.allclose(ok_weights, ok_weights[0], rtol=0, atol=1e-15):
        pooled = np.concatenate(pools, axis=0)
    else:
        gen = rng.child(n_comp).gen
        total = sum(p.shape[0] for p in pools)
        counts = gen.multinomial(total, ok_weights)
        pooled = np.concatenate([
            pools[k][gen.integers(0, pools[k].shape[0], size=counts[k])] for k in range(len(pools))
        ], axis=0)

    diagnostics = _diagnostics([results[i] for i in ok])
    diagnostics['failed_components'] = failed
    diagnostics['n_components'] = n_comp
    return IPosterior(
        draws=pooled,
        method=EPOST,
        names=priors.all_names(),
        diagnostics=diagnostics,
        provenance=_provenance(source, measurements, rng, priors),
    )


def infer(method, spec, source, measurements, priors, config=None, rng=None, propagate_sigma_a=False,
          n_jobs=1, component_config=None):
    """Despachar para o método de propagação pedido"""
    method = method if isinstance(method, UpMethod) else UpMethod.parse(method)
    if method.kind is UpMethodKind.POINT:
        return infer_point(spec, source, measurements, priors, config, rng, method.estimator, propagate_sigma_a)
    if method.kind is UpMethodKind.ELIK:
        return infer_elik(spec, source, measurements, priors, config, rng, propagate_sigma_a)
    if method.kind is UpMethodKind.ELOGLIK:
        return infer_eloglik(spec, source, measurements, priors, config, rng, propagate_sigma_a)
    return infer_epost(spec, source, measurements, priors, config, rng, propagate_sigma_a, n_jobs,
                       component_config)


@timer
def infer_simulator(sim, measurements, priors, config=None, rng=None):
    """Posterior de referência contra o simulador verdadeiro: y ~ N(ℳ(ω_I), σ_I²)"""
    rng = _default_rng(rng)
    ys = measurements.ys

    def log_prob_batch(x):
        x, omega, sigma_i = _split(priors, x)
        out = _log_prior(priors, x)
        valid = np.isfinite(out) & (sigma_i > 0)
        out = np.where(valid, out, -np.inf)
        if np.any(valid) and ys.size:
            inputs = _measurement_inputs(measurements, omega[valid])
            n_props, n_meas = inputs.shape[:2]
            mean = simulate_batch(sim, inputs.reshape(n_props * n_meas, -1)).reshape(n_props, n_meas)
            out[valid] += normal_logpdf(ys[None, :], mean, sigma_i[valid][:, None]).sum(axis=1)
        return out

    chains = sample(_target(log_prob_batch, priors, 'istep:simulator'), _default_config(config), rng)
    return IPosterior(
        draws=chains.pooled(),
        method=UpMethod(UpMethodKind.POINT),
        names=priors.all_names(),
        diagnostics=_diagnostics([chains]),
        provenance={'reference': 'simulator', 'simulator': sim.to_dict(),
                    'measurements_hash': hash_array(measurements.ys, measurements.times),
                    'seed': {'seed': rng.seed, 'stream': list(rng.stream)}},
    )


# ===================================
# Densidades para sondagem
# ===================================

def _quadrature_interval(prior):
    lo, hi = prior.support()
    if prior.family in (Family.NORMAL, Family.TRUNCATED_NORMAL):
        lo = max(lo, prior.mu - 12.0 * prior.sigma)
        hi = min(hi, prior.mu + 12.0 * prior.sigma)
    elif prior.family is Family.HALF_NORMAL:
        hi = 12.0 * prior.sigma
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise DistributionError("Normalização por quadratura requer prior com suporte efetivo limitado")
    return lo, hi


def _log_evidence(log_fn, lo, hi):
    """log ∫ exp(log_fn(ω)) dω por quadratura adaptativa centrada no máximo"""
    grid = np.linspace(lo, hi, 4001)
    values = log_fn(grid)
    peak = float(np.max(values))
    if not np.isfinite(peak):
        return -np.inf
    mode = float(grid[int(np.argmax(values))])
    result, _ = integrate.quad(lambda w: np.exp(log_fn(np.array([w]))[0] - peak), lo, hi,
                               points=[mode], limit=400, epsabs=0.0, epsrel=1e-11)
    return peak + np.log(result)


def _require_1d_fixed(priors):
    if priors.dim_omega != 1 or priors.samples_sigma_i:
        raise DistributionError("Densidades normalizadas por componente exigem ω_I univariado e σ_I fixo")


def component_log_evidences(spec, coeffs, sigma_a, measurements, priors, propagate_sigma_a=False):
    """log Z_s = log ∫ p(y_I | ω, θ^(s)) p(ω) dω para cada componente"""
    _require_1d_fixed(priors)
    lo, hi = _quadrature_interval(priors.omega[0])
    evidences = np.empty(coeffs.shape[0])
    for s in range(coeffs.shape[0]):
        fn = make_log_posterior(UpMethodKind.POINT, spec, coeffs[s:s + 1],
                                None if sigma_a is None else sigma_a[s:s + 1], np.ones(1), measurements,
                                priors, propagate_sigma_a)
        evidences[s] = _log_evidence(lambda w, fn=fn: fn(np.asarray(w)[:, None]), lo, hi)
    return evidences


def method_log_density(method, spec, source, measurements, priors, propagate_sigma_a=False):
    """
    log-densidade do I-posterior de um método, a menos de constante

    Point/E-Lik/E-Log-Lik devolvem a forma não normalizada do alvo do
    MCMC; E-Post usa a mistura das posteriores por componente
    normalizadas por quadratura (ω_I univariado, σ_I fixo).
    """
    method = method if isinstance(method, UpMethod) else UpMethod.parse(method)
    if method.kind is UpMethodKind.POINT:
        theta = point_estimate(source, method.estimator)
        sigma_a = None if theta.sigma_a is None else np.array([theta.sigma_a])
        return make_log_posterior(UpMethodKind.POINT, spec or source.spec, theta.c[None, :], sigma_a, np.ones(1),
                                  measurements, priors, propagate_sigma_a)

    comp_spec, coeffs, sigma_a, weights = _components(source)
    spec = spec or comp_spec
    if method.kind in (UpMethodKind.ELIK, UpMethodKind.ELOGLIK):
        return make_log_posterior(method.kind, spec, coeffs, sigma_a, weights, measurements, priors,
                                  propagate_sigma_a)

    log_z = component_log_evidences(spec, coeffs, sigma_a, measurements, priors, propagate_sigma_a)

    def epost_log_density(x):
        x, omega, sigma_i = _split(priors, x)
        ll = component_log_likelihoods(spec, coeffs, sigma_a, measurements, omega, sigma_i, propagate_sigma_a)
        return _log_prior(priors, x) + log_sum_exp(ll - log_z[:, None], weights[:, None], axis=0)

    return epost_log_density


def elogpost_log_density(spec, source, measurements, priors, propagate_sigma_a=False):
    """
    E-Log-Post: Σ_s w_s log p(ω_I | y_I, θ^(s)) com cada posterior normalizada

    Difere de E-Log-Lik apenas pela constante Σ_s w_s log Z_s.
    """
    comp_spec, coeffs, sigma_a, weights = _components(source)
    spec = spec or comp_spec
    log_z = component_log_evidences(spec, coeffs, sigma_a, measurements, priors, propagate_sigma_a)

    def log_density_fn(x):
        x, omega, sigma_i = _split(priors, x)
        ll = component_log_likelihoods(spec, coeffs, sigma_a, measurements, omega, sigma_i, propagate_sigma_a)
        log_post = _log_prior(priors, x)[None, :] + ll - log_z[:, None]
        return np.where(weights[:, None] > 0, weights[:, None] * log_post, 0.0).sum(axis=0)

    return log_density_fn
