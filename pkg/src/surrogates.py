#!/usr/bin/env python3
# src/surrogates.py

"""
Famílias paramétricas de surrogates 𝓜̃(ω; c): linear, só-inclinação,
logística paramétrica e expansão em caos polinomial (Legendre).
"""

import itertools
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.polynomial import legendre
from scipy import special

from prob_core import DistSpec, lognormal_logpdf, normal_logpdf
from utils import DistributionError

logger = logging.getLogger(__name__)


class SurrogateKind(str, Enum):
    LINEAR_LM = 'linear_lm'
    SLOPE_ONLY = 'slope_only'
    LOGISTIC_PARAM = 'logistic_param'
    PCE = 'pce'


class LikelihoodFamily(str, Enum):
    NORMAL = 'Normal'
    LOG_NORMAL = 'LogNormal'


LOGISTIC_TRUTH = (2.0, 10.0, 0.0, -1.0)


# ===================================
# Base de Legendre
# ===================================

def legendre_univariate(k, omega):
    """P_k(ω) pela recorrência de Bonnet: (n+1)P_{n+1} = (2n+1)ωP_n − nP_{n−1}"""
    if k < 0:
        raise DistributionError("grau k deve ser ≥ 0")
    omega = np.asarray(omega, dtype=float)
    p_prev = np.ones_like(omega)
    if k == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p_curr = omega.copy()
    for n in range(1, k):
        p_prev, p_curr = p_curr, ((2 * n + 1) * omega * p_curr - n * p_prev) / (n + 1)
    return p_curr if p_curr.ndim else float(p_curr)


def pce_index_set(input_dim, d):
    """
    Multi-índices de grau total ≤ d em ordem graduada-lexicográfica

    O tamanho é C(input_dim + d, d).
    """
    if input_dim < 1 or d < 0:
        raise DistributionError("input_dim ≥ 1 e d ≥ 0 são obrigatórios")
    indices = [alpha for alpha in itertools.product(range(d + 1), repeat=input_dim) if sum(alpha) <= d]
    indices.sort(key=lambda alpha: (sum(alpha), alpha))
    return indices


def pce_basis_matrix(index_set, omega):
    """Matriz Ψ[N, P] das bases tensoriais de Legendre em ω escalonado (N × dim)"""
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    index = np.asarray(index_set, dtype=int)
    max_degree = int(index.max()) if index.size else 0
    # vander[n, j, k] = P_k(ω[n, j])
    vander = legendre.legvander(omega, max_degree)
    psi = np.ones((omega.shape[0], index.shape[0]))
    for j in range(omega.shape[1]):
        psi *= vander[:, j, index[:, j]]
    return psi


# ===================================
# Escalonamento de entradas
# ===================================

def scale_inputs(bounds, omega_raw, return_flag=False):
    """
    Mapa afim de cada dimensão [lo, hi] → [−1, 1]

    Valores fora dos limites são truncados; com return_flag=True devolve
    também se houve truncamento.
    """
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    lo, hi = bounds[:, 0], bounds[:, 1]
    if np.any(lo >= hi):
        raise DistributionError("limites devem satisfazer lo < hi")
    omega_raw = np.asarray(omega_raw, dtype=float)
    clamped = bool(np.any((omega_raw < lo) | (omega_raw > hi)))
    if clamped:
        logger.debug("⚠️ Entradas fora dos limites de treino foram truncadas")
        omega_raw = np.clip(omega_raw, lo, hi)
    scaled = 2.0 * (omega_raw - lo) / (hi - lo) - 1.0
    return (scaled, clamped) if return_flag else scaled


# ===================================
# Especificação e parâmetros
# ===================================

@dataclass(frozen=True, eq=False)
class SurrogateSpec:
    """Família do surrogate, priors dos coeficientes e família da verossimilhança"""

    kind: SurrogateKind
    coeff_priors: tuple
    sigma_a_prior: DistSpec = None
    likelihood_family: LikelihoodFamily = LikelihoodFamily.NORMAL
    input_dim: int = 1
    max_degree: int = None
    index_set: tuple = None
    input_bounds: tuple = None

    def __post_init__(self):
        kind = SurrogateKind(self.kind)
        object.__setattr__(self, 'kind', kind)
        object.__setattr__(self, 'likelihood_family', LikelihoodFamily(self.likelihood_family))
        object.__setattr__(self, 'coeff_priors', tuple(self.coeff_priors))

        if kind is SurrogateKind.PCE:
            if self.max_degree is None:
                raise DistributionError("PCE requer max_degree")
            index = tuple(pce_index_set(self.input_dim, self.max_degree))
            object.__setattr__(self, 'index_set', index)
        elif self.input_dim != 1:
            raise DistributionError(f"{kind.value} aceita apenas entradas univariadas")

        if self.input_bounds is not None:
            bounds = tuple(tuple(float(v) for v in pair) for pair in self.input_bounds)
            if len(bounds) != self.input_dim:
                raise DistributionError("input_bounds deve ter um par por dimensão de entrada")
            object.__setattr__(self, 'input_bounds', bounds)

        if len(self.coeff_priors) != self.n_coeffs:
            raise DistributionError(
                f"{kind.value}: {len(self.coeff_priors)} priors para {self.n_coeffs} coeficientes"
            )

    @property
    def n_coeffs(self):
        return {
            SurrogateKind.LINEAR_LM: 2,
            SurrogateKind.SLOPE_ONLY: 1,
            SurrogateKind.LOGISTIC_PARAM: 4,
        }.get(self.kind) or len(self.index_set)

    @property
    def samples_sigma_a(self):
        return self.sigma_a_prior is not None

    def coeff_names(self):
        if self.kind is SurrogateKind.LOGISTIC_PARAM:
            return ['alpha', 'beta', 'gamma', 'delta']
        return [f"c{i + 1}" for i in range(self.n_coeffs)]

    def to_dict(self):
        return {
            'kind': self.kind.value,
            'coeff_priors': [p.to_dict() for p in self.coeff_priors],
            'sigma_a_prior': None if self.sigma_a_prior is None else self.sigma_a_prior.to_dict(),
            'likelihood_family': self.likelihood_family.value,
            'input_dim': self.input_dim,
            'max_degree': self.max_degree,
            'input_bounds': None if self.input_bounds is None else [list(b) for b in self.input_bounds],
        }

    @classmethod
    def from_dict(cls, payload):
        sigma_a = payload.get('sigma_a_prior')
        return cls(
            kind=payload['kind'],
            coeff_priors=[DistSpec.from_dict(p) for p in payload['coeff_priors']],
            sigma_a_prior=None if sigma_a is None else DistSpec.from_dict(sigma_a),
            likelihood_family=payload.get('likelihood_family', 'Normal'),
            input_dim=payload.get('input_dim', 1),
            max_degree=payload.get('max_degree'),
            input_bounds=payload.get('input_bounds'),
        )


@dataclass(frozen=True, eq=False)
class SurrogateParams:
    """θ = (c, σ_A)"""

    c: np.ndarray
    sigma_a: float = None

    def __post_init__(self):
        object.__setattr__(self, 'c', np.atleast_1d(np.asarray(self.c, dtype=float)))
        if self.sigma_a is not None and not self.sigma_a > 0:
            raise DistributionError(f"σ_A deve ser positivo (recebido {self.sigma_a})")

    def check(self, spec):
        if self.c.size != spec.n_coeffs:
            raise DistributionError(f"{self.c.size} coeficientes para surrogate com {spec.n_coeffs}")
        return self


def linear_surrogate_spec(mu_t0=0.0, sigma_t0=10.0):
    return SurrogateSpec(SurrogateKind.LINEAR_LM, coeff_priors=[DistSpec.normal(mu_t0, sigma_t0)] * 2)


def slope_surrogate_spec(mu_t0=0.0, sigma_t0=10.0):
    return SurrogateSpec(SurrogateKind.SLOPE_ONLY, coeff_priors=[DistSpec.normal(mu_t0, sigma_t0)])


def logistic_surrogate_spec(sigma_a_prior=None):
    """Priors centrados nos valores verdadeiros, desvio 1 (10 para β)"""
    alpha, beta, gamma, delta = LOGISTIC_TRUTH
    priors = [DistSpec.normal(alpha, 1.0), DistSpec.normal(beta, 10.0),
              DistSpec.normal(gamma, 1.0), DistSpec.normal(delta, 1.0)]
    return SurrogateSpec(SurrogateKind.LOGISTIC_PARAM, coeff_priors=priors, sigma_a_prior=sigma_a_prior)


def pce_surrogate_spec(input_dim, max_degree, prior_std=5.0, sigma_a_prior=None,
                       likelihood_family=LikelihoodFamily.NORMAL, input_bounds=None):
    n_coeffs = len(pce_index_set(input_dim, max_degree))
    return SurrogateSpec(
        SurrogateKind.PCE,
        coeff_priors=[DistSpec.normal(0.0, prior_std)] * n_coeffs,
        sigma_a_prior=sigma_a_prior,
        likelihood_family=likelihood_family,
        input_dim=input_dim,
        max_degree=max_degree,
        input_bounds=input_bounds,
    )


# ===================================
# Avaliação
# ===================================

def _prepare_inputs(spec, omega):
    omega = np.asarray(omega, dtype=float)
    if omega.ndim <= 1:
        omega = omega.reshape(-1, 1) if spec.input_dim == 1 else omega.reshape(1, -1)
    if omega.shape[-1] != spec.input_dim:
        raise DistributionError(
            f"Dimensão de ω ({omega.shape[-1]}) não corresponde ao surrogate ({spec.input_dim})"
        )
    if spec.input_bounds is not None:
        omega = scale_inputs(spec.input_bounds, omega)
    return omega


def design_matrix(spec, omega):
    """Matriz de regressão para surrogates lineares nos coeficientes (N × P)"""
    omega = _prepare_inputs(spec, omega)
    if spec.kind is SurrogateKind.LINEAR_LM:
        return np.column_stack([np.ones(omega.shape[0]), omega[:, 0]])
    if spec.kind is SurrogateKind.SLOPE_ONLY:
        return omega[:, :1].copy()
    if spec.kind is SurrogateKind.PCE:
        return pce_basis_matrix(spec.index_set, omega)
    raise DistributionError(f"{spec.kind.value} não é linear nos coeficientes")


def surrogate_eval_batch(spec, coeffs, omega):
    """
    𝓜̃(ω; c) para S vetores de coeficientes e N entradas

    Args:
        spec: SurrogateSpec
        coeffs: array S × P (ou P)
        omega: entradas N × dim no domínio físico (escalonadas se input_bounds)

    Returns:
        array S × N
    """
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    if coeffs.shape[1] != spec.n_coeffs:
        raise DistributionError(f"{coeffs.shape[1]} coeficientes para surrogate com {spec.n_coeffs}")

    if spec.kind is SurrogateKind.LOGISTIC_PARAM:
        x = _prepare_inputs(spec, omega)[:, 0]
        alpha, beta, gamma, delta = (coeffs[:, j:j + 1] for j in range(4))
        return alpha * special.expit(beta * (x[None, :] - gamma)) + delta

    return coeffs @ design_matrix(spec, omega).T


def surrogate_eval(spec, params, omega):
    """Resposta média ỹ = 𝓜̃(ω; c) em um único ponto"""
    params.check(spec)
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if omega.size != spec.input_dim:
        raise DistributionError(f"Dimensão de ω ({omega.size}) não corresponde ao surrogate ({spec.input_dim})")
    return float(surrogate_eval_batch(spec, params.c, omega.reshape(1, -1))[0, 0])


def log_likelihood_matrix(spec, coeffs, omega, y, scale):
    """
    log p(y_n | ω_n, θ^(s)) elemento a elemento (S × N)

    scale: escalar ou array broadcastável para (S, N); use (S, 1) para
    uma escala por draw e (1, N) para uma escala por ponto.
    """
    mean = surrogate_eval_batch(spec, coeffs, omega)
    scale = np.asarray(scale, dtype=float)
    y = np.asarray(y, dtype=float).reshape(1, -1)
    if spec.likelihood_family is LikelihoodFamily.LOG_NORMAL:
        return lognormal_logpdf(y, mean, scale)
    return normal_logpdf(y, mean, scale)


def surrogate_log_likelihood(spec, params, omega, y, scale=None):
    """
    log p(y | ω, θ) com localização 𝓜̃(ω; c)

    A escala é σ_A dos parâmetros, salvo se `scale` for dado.
    """
    sigma = params.sigma_a if scale is None else scale
    if sigma is None:
        raise DistributionError("A verossimilhança requer σ_A ou uma escala explícita")
    omega = np.atleast_1d(np.asarray(omega, dtype=float)).reshape(1, -1)
    return float(log_likelihood_matrix(spec, params.c, omega, [y], sigma)[0, 0])
