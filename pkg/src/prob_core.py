#!/usr/bin/env python3
# src/prob_core.py

"""
Núcleo probabilístico: famílias de distribuição, aritmética estável em
espaço log e geração aleatória semeada por (seed, stream).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import special

from utils import DistributionError

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))
LOG_2 = float(np.log(2.0))


class Family(str, Enum):
    NORMAL = 'Normal'
    MULTIVARIATE_NORMAL = 'MultivariateNormal'
    TRUNCATED_NORMAL = 'TruncatedNormal'
    HALF_NORMAL = 'HalfNormal'
    UNIFORM = 'Uniform'
    LOG_NORMAL = 'LogNormal'
    NEGATIVE_BINOMIAL = 'NegativeBinomial'


# ===================================
# Gerador aleatório
# ===================================

class Rng:
    """
    Gerador baseado em contador (Philox) identificado por (seed, stream)

    Streams podem ser inteiros ou tuplas de inteiros; `child` deriva
    sub-streams independentes para tarefas paralelas.
    """

    def __init__(self, seed, stream=0):
        if int(seed) < 0:
            raise DistributionError("seed deve ser não negativo")
        self.seed = int(seed)
        if isinstance(stream, (tuple, list)):
            self.stream = tuple(int(s) for s in stream)
        else:
            self.stream = (int(stream),)
        if any(s < 0 for s in self.stream):
            raise DistributionError("stream deve ser não negativo")
        self._gen = None

    @property
    def gen(self):
        if self._gen is None:
            sequence = np.random.SeedSequence(self.seed, spawn_key=self.stream)
            self._gen = np.random.Generator(np.random.Philox(sequence))
        return self._gen

    def child(self, *keys):
        """Sub-stream determinístico (não consome o estado deste gerador)"""
        return Rng(self.seed, self.stream + tuple(int(k) for k in keys))

    def __repr__(self):
        return f"Rng(seed={self.seed}, stream={self.stream})"


# ===================================
# Especificação de distribuições
# ===================================

@dataclass(frozen=True, eq=False)
class DistSpec:
    """Distribuição de uma das sete famílias suportadas, validada na construção"""

    family: Family
    mu: float = 0.0
    sigma: float = 1.0
    lo: float = -np.inf
    hi: float = np.inf
    phi: float = 1.0
    mean: np.ndarray = None
    cov: np.ndarray = None
    _chol: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, 'family', family)

        if family is Family.MULTIVARIATE_NORMAL:
            mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
            cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
            if cov.shape != (mean.size, mean.size):
                raise DistributionError(f"Covariância {cov.shape} incompatível com média de dimensão {mean.size}")
            if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-14):
                raise DistributionError("Covariância deve ser simétrica")
            try:
                chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise DistributionError("Covariância não é positiva definida")
            object.__setattr__(self, 'mean', mean)
            object.__setattr__(self, 'cov', cov)
            object.__setattr__(self, '_chol', chol)
            return

        if family is Family.UNIFORM:
            if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
                raise DistributionError(f"Uniform requer limites finitos lo < hi (recebido [{self.lo}, {self.hi}])")
            return

        if family is Family.NEGATIVE_BINOMIAL:
            if not (self.mu > 0 and self.phi > 0):
                raise DistributionError(f"NegativeBinomial requer μ > 0 e φ > 0 (recebido μ={self.mu}, φ={self.phi})")
            return

        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise DistributionError(f"{family.value}: escala deve ser estritamente positiva (recebido {self.sigma})")

        if family is Family.TRUNCATED_NORMAL:
            if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
                raise DistributionError(f"TruncatedNormal requer limites finitos lo < hi (recebido [{self.lo}, {self.hi}])")
            alpha, beta = self._standard_bounds()
            if _log_mass(alpha, beta) == -np.inf:
                raise DistributionError("TruncatedNormal com massa numérica nula no intervalo")

    # Construtores nomeados
    @classmethod
    def normal(cls, mu, sigma):
        return cls(Family.NORMAL, mu=float(mu), sigma=float(sigma))

    @classmethod
    def multivariate_normal(cls, mean, cov):
        return cls(Family.MULTIVARIATE_NORMAL, mean=mean, cov=cov)

    @classmethod
    def truncated_normal(cls, mu, sigma, lo, hi):
        return cls(Family.TRUNCATED_NORMAL, mu=float(mu), sigma=float(sigma), lo=float(lo), hi=float(hi))

    @classmethod
    def half_normal(cls, sigma):
        return cls(Family.HALF_NORMAL, sigma=float(sigma))

    @classmethod
    def uniform(cls, lo, hi):
        return cls(Family.UNIFORM, lo=float(lo), hi=float(hi))

    @classmethod
    def log_normal(cls, mu, sigma):
        return cls(Family.LOG_NORMAL, mu=float(mu), sigma=float(sigma))

    @classmethod
    def negative_binomial(cls, mu, phi):
        return cls(Family.NEGATIVE_BINOMIAL, mu=float(mu), phi=float(phi))

    @property
    def dim(self):
        return self.mean.size if self.family is Family.MULTIVARIATE_NORMAL else 1

    def support(self):
        """Suporte (lo, hi) por coordenada"""
        if self.family in (Family.TRUNCATED_NORMAL, Family.UNIFORM):
            return self.lo, self.hi
        if self.family in (Family.HALF_NORMAL, Family.LOG_NORMAL, Family.NEGATIVE_BINOMIAL):
            return 0.0, np.inf
        return -np.inf, np.inf

    def _standard_bounds(self):
        return (self.lo - self.mu) / self.sigma, (self.hi - self.mu) / self.sigma

    def to_dict(self):
        """Representação serializável (proveniência)"""
        if self.family is Family.MULTIVARIATE_NORMAL:
            return {'family': self.family.value, 'mean': self.mean.tolist(), 'cov': self.cov.tolist()}
        keys = {
            Family.NORMAL: ('mu', 'sigma'),
            Family.TRUNCATED_NORMAL: ('mu', 'sigma', 'lo', 'hi'),
            Family.HALF_NORMAL: ('sigma',),
            Family.UNIFORM: ('lo', 'hi'),
            Family.LOG_NORMAL: ('mu', 'sigma'),
            Family.NEGATIVE_BINOMIAL: ('mu', 'phi'),
        }[self.family]
        payload = {'family': self.family.value}
        payload.update({k: float(getattr(self, k)) for k in keys})
        return payload

    @classmethod
    def from_dict(cls, payload):
        payload = dict(payload)
        family = Family(payload.pop('family'))
        if family is Family.MULTIVARIATE_NORMAL:
            return cls.multivariate_normal(payload['mean'], payload['cov'])
        return cls(family, **{k: float(v) for k, v in payload.items()})


def _log_mass(alpha, beta):
    """log(Φ(β) − Φ(α)) estável nas duas caudas"""
    if alpha > 0:
        return _log_mass(-beta, -alpha)
    log_b = special.log_ndtr(beta)
    log_a = special.log_ndtr(alpha)
    if log_a == -np.inf:
        return float(log_b)
    with np.errstate(divide='ignore'):
        return float(log_b + np.log1p(-np.exp(log_a - log_b)))


# ===================================
# Kernels vetorizados
# ===================================

def normal_logpdf(x, mu, sigma):
    """log N(x | μ, σ²) com broadcasting"""
    z = (np.asarray(x, dtype=float) - mu) / sigma
    return -0.5 * LOG_2PI - np.log(sigma) - 0.5 * z * z


def lognormal_logpdf(x, mu, sigma):
    """log LogNormal(x | μ, σ) com −∞ para x ≤ 0"""
    x = np.asarray(x, dtype=float)
    positive = x > 0
    safe = np.where(positive, x, 1.0)
    log_x = np.log(safe)
    value = normal_logpdf(log_x, mu, sigma) - log_x
    return np.where(positive, value, -np.inf)


def negbin_logpmf(n, mu, phi):
    """log NegBin(n | μ, φ) na parametrização média/forma"""
    n = np.asarray(n, dtype=float)
    valid = (n >= 0) & (n == np.floor(n))
    safe = np.where(valid, n, 0.0)
    value = (special.gammaln(safe + phi) - special.gammaln(safe + 1.0) - special.gammaln(phi)
             + phi * (np.log(phi) - np.log(mu + phi))
             + special.xlogy(safe, mu) - safe * np.log(mu + phi))
    return np.where(valid, value, -np.inf)


def log_density(spec, x):
    """
    Log-densidade (ou log-massa) de x sob spec

    Fora do suporte devolve −∞. Para MultivariateNormal a última
    dimensão de x indexa as coordenadas.
    """
    family = spec.family

    if family is Family.MULTIVARIATE_NORMAL:
        x = np.asarray(x, dtype=float)
        diff = x - spec.mean
        flat = diff.reshape(-1, spec.dim)
        solved = np.linalg.solve(spec._chol, flat.T).T
        log_det = 2.0 * np.sum(np.log(np.diag(spec._chol)))
        value = -0.5 * (spec.dim * LOG_2PI + log_det + np.sum(solved * solved, axis=1))
        value = value.reshape(diff.shape[:-1])
        return float(value) if value.ndim == 0 else value

    x_arr = np.asarray(x, dtype=float)

    if family is Family.NORMAL:
        value = normal_logpdf(x_arr, spec.mu, spec.sigma)
    elif family is Family.TRUNCATED_NORMAL:
        alpha, beta = spec._standard_bounds()
        inside = (x_arr >= spec.lo) & (x_arr <= spec.hi)
        value = np.where(inside, normal_logpdf(x_arr, spec.mu, spec.sigma) - _log_mass(alpha, beta), -np.inf)
    elif family is Family.HALF_NORMAL:
        value = np.where(x_arr >= 0, LOG_2 + normal_logpdf(x_arr, 0.0, spec.sigma), -np.inf)
    elif family is Family.UNIFORM:
        inside = (x_arr >= spec.lo) & (x_arr <= spec.hi)
        value = np.where(inside, -np.log(spec.hi - spec.lo), -np.inf)
    elif family is Family.LOG_NORMAL:
        value = lognormal_logpdf(x_arr, spec.mu, spec.sigma)
    elif family is Family.NEGATIVE_BINOMIAL:
        value = negbin_logpmf(x_arr, spec.mu, spec.phi)
    else:  # pragma: no cover
        raise DistributionError(f"Família desconhecida: {family}")

    value = np.where(np.isnan(x_arr), -np.inf, value)
    return float(value) if value.ndim == 0 else value


def draw(spec, rng, size=None):
    """
    Amostrar de spec usando o gerador rng

    Args:
        spec: DistSpec válido
        rng: Rng (ou numpy Generator)
        size: None para uma amostra escalar, ou forma do array

    Returns:
        amostra(s) no suporte de spec
    """
    gen = rng.gen if isinstance(rng, Rng) else rng
    family = spec.family

    if family is Family.NORMAL:
        return gen.normal(spec.mu, spec.sigma, size=size)

    if family is Family.MULTIVARIATE_NORMAL:
        shape = () if size is None else tuple(np.atleast_1d(size))
        z = gen.standard_normal(shape + (spec.dim,))
        return spec.mean + z @ spec._chol.T

    if family is Family.TRUNCATED_NORMAL:
        alpha, beta = spec._standard_bounds()
        # Inverso da CDF na cauda mais estável
        if alpha > 0:
            p_hi, p_lo = special.ndtr(-alpha), special.ndtr(-beta)
            u = gen.uniform(p_lo, p_hi, size=size)
            x = spec.mu - spec.sigma * special.ndtri(u)
        else:
            p_lo, p_hi = special.ndtr(alpha), special.ndtr(beta)
            u = gen.uniform(p_lo, p_hi, size=size)
            x = spec.mu + spec.sigma * special.ndtri(u)
        return np.clip(x, spec.lo, spec.hi)

    if family is Family.HALF_NORMAL:
        return np.abs(gen.normal(0.0, spec.sigma, size=size))

    if family is Family.UNIFORM:
        return gen.uniform(spec.lo, spec.hi, size=size)

    if family is Family.LOG_NORMAL:
        return gen.lognormal(spec.mu, spec.sigma, size=size)

    if family is Family.NEGATIVE_BINOMIAL:
        # Mistura Gamma-Poisson: taxa ~ Gamma(φ, escala μ/φ)
        rate = gen.gamma(spec.phi, spec.mu / spec.phi, size=size)
        return gen.poisson(rate)

    raise DistributionError(f"Família desconhecida: {family}")  # pragma: no cover


# ===================================
# Log-sum-exp
# ===================================

def log_sum_exp(values, weights=None, axis=None):
    """
    log Σ w_i exp(v_i), subtraindo o máximo antes da exponenciação

    Com axis=None o vetor deve ser não vazio; todos os valores −∞ devolvem −∞.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DistributionError("log_sum_exp requer entrada não vazia")

    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        try:
            np.broadcast_shapes(weights.shape, values.shape)
        except ValueError:
            raise DistributionError("weights deve ter o mesmo comprimento que values")
        if weights.ndim == 1 and values.ndim == 1 and weights.size != values.size:
            raise DistributionError("weights deve ter o mesmo comprimento que values")
        if np.any(weights < 0) or not np.any(weights > 0):
            raise DistributionError("weights deve ser não negativo e não totalmente nulo")

    with np.errstate(divide='ignore', invalid='ignore'):
        return special.logsumexp(values, axis=axis, b=weights)
