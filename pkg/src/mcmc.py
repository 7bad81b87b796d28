#!/usr/bin/env python3
# src/mcmc.py

"""
Amostrador Metropolis de passeio aleatório adaptativo em espaço irrestrito,
com adaptação de escala (Robbins–Monro) e covariância apenas no aquecimento,
e o diagnóstico R̂ com divisão de cadeias.
"""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from monitoring import metrics_collector
from utils import SamplerError

logger = logging.getLogger(__name__)

RM_EXPONENT = 0.6
RM_GAIN = 3.0
MAX_INIT_ATTEMPTS = 10


class TransformKind(str, Enum):
    UNBOUNDED = 'unbounded'
    LOWER_BOUNDED = 'lower_bounded'
    INTERVAL = 'interval'


@dataclass(frozen=True)
class Support:
    """Suporte de uma coordenada e a transformação para ℝ"""

    kind: TransformKind = TransformKind.UNBOUNDED
    lo: float = None
    hi: float = None

    @classmethod
    def from_bounds(cls, lo, hi):
        lo_finite, hi_finite = np.isfinite(lo), np.isfinite(hi)
        if lo_finite and hi_finite:
            return cls(TransformKind.INTERVAL, float(lo), float(hi))
        if lo_finite:
            return cls(TransformKind.LOWER_BOUNDED, float(lo))
        if hi_finite:
            raise SamplerError("Suportes limitados apenas superiormente não são suportados")
        return cls()

    def contains(self, x):
        if self.kind is TransformKind.UNBOUNDED:
            return np.isfinite(x)
        if self.kind is TransformKind.LOWER_BOUNDED:
            return x >= self.lo
        return (x >= self.lo) & (x <= self.hi)


def _to_constrained(u, supports):
    x = u.copy()
    log_jac = np.zeros(u.shape[:-1])
    for j, sup in enumerate(supports):
        if sup.kind is TransformKind.LOWER_BOUNDED:
            x[..., j] = sup.lo + np.exp(u[..., j])
            log_jac += u[..., j]
        elif sup.kind is TransformKind.INTERVAL:
            width = sup.hi - sup.lo
            x[..., j] = sup.lo + width / (1.0 + np.exp(-u[..., j]))
            log_jac += np.log(width) - np.logaddexp(0.0, -u[..., j]) - np.logaddexp(0.0, u[..., j])
    return x, log_jac


def _to_unconstrained(x, supports):
    u = np.array(x, dtype=float, copy=True)
    for j, sup in enumerate(supports):
        if sup.kind is TransformKind.LOWER_BOUNDED:
            u[..., j] = np.log(np.maximum(x[..., j] - sup.lo, 1e-300))
        elif sup.kind is TransformKind.INTERVAL:
            frac = np.clip((x[..., j] - sup.lo) / (sup.hi - sup.lo), 1e-12, 1.0 - 1e-12)
            u[..., j] = np.log(frac) - np.log1p(-frac)
    return u


@dataclass
class TargetDensity:
    """
    Densidade-alvo em espaço restrito

    log_prob(x) avalia um ponto; log_prob_batch(X), se dado, avalia uma
    matriz (cadeias × dim) de uma vez. init(rng) devolve um ponto inicial
    (tipicamente uma amostra das priors).
    """

    dim: int
    log_prob: callable
    supports: list = None
    init: callable = None
    log_prob_batch: callable = None
    names: list = None
    label: str = 'target'

    def __post_init__(self):
        if self.supports is None:
            self.supports = [Support()] * self.dim
        if len(self.supports) != self.dim:
            raise SamplerError("Um suporte por coordenada é obrigatório")
        if self.names is None:
            self.names = [f"x{j + 1}" for j in range(self.dim)]

    def evaluate(self, points):
        points = np.atleast_2d(points)
        if self.log_prob_batch is not None:
            return np.asarray(self.log_prob_batch(points), dtype=float)
        return np.array([float(self.log_prob(p)) for p in points])


@dataclass
class SamplerConfig:
    n_chains: int = 4
    n_warmup: int = 500
    n_post: int = 500
    init: str = 'prior'

    def __post_init__(self):
        if self.n_chains < 1 or self.n_post < 1 or self.n_warmup < 0:
            raise SamplerError("n_chains e n_post devem ser ≥ 1; n_warmup ≥ 0")
        if self.init not in ('prior', 'zeros'):
            raise SamplerError(f"Estratégia de inicialização desconhecida: {self.init}")


@dataclass
class Chains:
    """Draws pós-aquecimento em espaço restrito: n_chains × n_post × dim"""

    draws: np.ndarray
    acceptance: np.ndarray
    n_warmup: int
    log_probs: np.ndarray = None
    names: list = None
    seed: dict = field(default_factory=dict)
    step_scales: np.ndarray = None

    @property
    def n_chains(self):
        return self.draws.shape[0]

    @property
    def n_post(self):
        return self.draws.shape[1]

    @property
    def dim(self):
        return self.draws.shape[2]

    def pooled(self):
        return self.draws.reshape(-1, self.dim)

    def pooled_log_probs(self):
        return None if self.log_probs is None else self.log_probs.reshape(-1)


# ===================================
# Cronograma de adaptação
# ===================================

def adaptation_windows(n_warmup):
    """
    Janelas de estimação de covariância dentro do aquecimento

    Buffer inicial (15%) e final (10%) adaptam só a escala; o meio é
    dividido em janelas dobráveis a partir de 25 iterações, a última
    absorvendo o resto. Devolve a lista de fins de janela.
    """
    if n_warmup < 40:
        return []
    init_buffer = int(0.15 * n_warmup)
    term_buffer = int(0.10 * n_warmup)
    start, end = init_buffer, n_warmup - term_buffer
    ends = []
    size = 25
    while start < end:
        stop = start + size
        if end - stop < 2 * size:
            stop = end
        ends.append(stop)
        start = stop
        size *= 2
    return ends


def _regularized_cov(window, previous):
    n, d = window.shape
    if n < 2:
        return previous
    cov = np.atleast_2d(np.cov(window, rowvar=False))
    diag_mean = float(np.mean(np.diag(cov)))
    if not np.isfinite(diag_mean) or diag_mean <= 0:
        return previous
    return (n * cov + 5.0 * 1e-3 * diag_mean * np.eye(d)) / (n + 5.0)


# ===================================
# Amostrador
# ===================================

def _initialize(target, config, gens, rngs):
    n_chains = len(gens)
    u0 = np.zeros((n_chains, target.dim))
    lp0 = np.full(n_chains, -np.inf)
    for c in range(n_chains):
        for attempt in range(MAX_INIT_ATTEMPTS):
            if config.init == 'prior' and target.init is not None:
                x = np.atleast_1d(np.asarray(target.init(rngs[c]), dtype=float))
                u = _to_unconstrained(x, target.supports)
            elif attempt == 0:
                u = np.zeros(target.dim)
            else:
                u = gens[c].uniform(-2.0, 2.0, size=target.dim)
            x, log_jac = _to_constrained(u[None, :], target.supports)
            lp = float(target.evaluate(x)[0]) + float(log_jac[0])
            if np.isnan(lp):
                raise SamplerError(f"log_prob devolveu NaN no ponto inicial {x[0].tolist()}")
            if np.isfinite(lp):
                u0[c], lp0[c] = u, lp
                break
        else:
            raise SamplerError(
                f"Cadeia {c}: log_prob = −∞ em {MAX_INIT_ATTEMPTS} pontos iniciais; reinicialize com outro ponto"
            )
    return u0, lp0


def sample(target, config, rng):
    """
    Metropolis de passeio aleatório adaptativo

    Todas as cadeias avançam em conjunto (avaliações em lote), cada uma com
    seu stream aleatório, escala e covariância de proposta. A adaptação é
    congelada ao fim do aquecimento.

    Args:
        target: TargetDensity
        config: SamplerConfig
        rng: Rng; a cadeia c usa rng.child(c)

    Returns:
        Chains
    """
    start_time = time.perf_counter()
    n_chains, dim = config.n_chains, target.dim
    rngs = [rng.child(c) for c in range(n_chains)]
    gens = [r.gen for r in rngs]
    target_accept = 0.44 if dim == 1 else 0.234

    try:
        u, lp = _initialize(target, config, gens, rngs)

        base_log_scale = np.log(2.38 / np.sqrt(dim))
        log_scale = np.full(n_chains, base_log_scale)
        cov = np.tile(np.eye(dim), (n_chains, 1, 1))
        chol = cov.copy()
        rm_counter = 0
        windows = adaptation_windows(config.n_warmup)
        window_start = int(0.15 * config.n_warmup)
        history = np.empty((config.n_warmup, n_chains, dim))
        term_start = windows[-1] if windows else config.n_warmup // 2
        term_log_scales = []

        n_total = config.n_warmup + config.n_post
        draws = np.empty((n_chains, config.n_post, dim))
        log_probs = np.empty((n_chains, config.n_post))
        accepted = np.zeros(n_chains)

        for it in range(n_total):
            z = np.stack([g.standard_normal(dim) for g in gens])
            step = np.exp(log_scale)[:, None] * np.einsum('cij,cj->ci', chol, z)
            proposal = u + step
            x_prop, log_jac = _to_constrained(proposal, target.supports)
            lp_prop = target.evaluate(x_prop) + log_jac
            if np.any(np.isnan(lp_prop)):
                bad = int(np.flatnonzero(np.isnan(lp_prop))[0])
                raise SamplerError(f"log_prob devolveu NaN no ponto {x_prop[bad].tolist()}")

            log_ratio = np.where(np.isfinite(lp_prop), lp_prop - lp, -np.inf)
            log_u = np.log(np.array([g.uniform() for g in gens]))
            accept = log_u < log_ratio
            u = np.where(accept[:, None], proposal, u)
            lp = np.where(accept, lp_prop, lp)

            if it < config.n_warmup:
                rm_counter += 1
                alpha = np.exp(np.minimum(0.0, log_ratio))
                log_scale = log_scale + RM_GAIN * rm_counter ** (-RM_EXPONENT) * (alpha - target_accept)
                history[it] = u
                if it >= term_start:
                    term_log_scales.append(log_scale.copy())
                if windows and it + 1 == windows[0]:
                    for c in range(n_chains):
                        cov[c] = _regularized_cov(history[window_start:it + 1, c], cov[c])
                        chol[c] = np.linalg.cholesky(cov[c])
                    window_start = it + 1
                    windows = windows[1:]
                    log_scale = np.full(n_chains, base_log_scale)
                    rm_counter = 0
                if it + 1 == config.n_warmup and term_log_scales:
                    # escala congelada = média de Polyak do buffer final
                    log_scale = np.mean(term_log_scales, axis=0)
            else:
                k = it - config.n_warmup
                x_cur, log_jac_cur = _to_constrained(u, target.supports)
                draws[:, k] = x_cur
                log_probs[:, k] = lp - log_jac_cur
                accepted += accept
    except SamplerError:
        metrics_collector.record_run(target.label, success=False)
        raise

    acceptance = accepted / config.n_post
    elapsed = time.perf_counter() - start_time
    chains = Chains(draws=draws, acceptance=acceptance, n_warmup=config.n_warmup, log_probs=log_probs,
                    names=list(target.names), seed={'seed': rng.seed, 'stream': list(rng.stream)},
                    step_scales=np.exp(log_scale))

    rhat = split_rhat(chains) if chains.n_post >= 4 else None
    rhat_max = max_rhat(rhat)
    metrics_collector.record_run(target.label, success=True, run_time=elapsed, acceptance=acceptance,
                                 rhat_max=rhat_max)
    logger.debug(
        f"🔗 {target.label}: {n_chains}×{config.n_post} draws em {elapsed:.2f}s, "
        f"aceitação {np.round(acceptance, 3).tolist()}, R̂ máx {rhat_max}"
    )
    return chains


# ===================================
# Diagnósticos
# ===================================

def split_rhat(chains):
    """
    R̂ com divisão de cadeias, por parâmetro

    Variâncias intra e entre cadeias nulas → NaN (degenerado); intra nula
    com entre positiva → +∞.
    """
    draws = chains.draws if isinstance(chains, Chains) else np.asarray(chains, dtype=float)
    if draws.ndim == 2:
        draws = draws[:, :, None]
    n_chains, n_draws, dim = draws.shape
    if n_draws < 4:
        raise SamplerError("split_rhat requer pelo menos 4 draws por cadeia")

    half = n_draws // 2
    split = np.concatenate([draws[:, :half], draws[:, n_draws - half:]], axis=0)
    n = split.shape[1]

    chain_means = split.mean(axis=1)
    within = split.var(axis=1, ddof=1).mean(axis=0)
    between = n * chain_means.var(axis=0, ddof=1)

    rhat = np.empty(dim)
    for j in range(dim):
        w, b = within[j], between[j]
        if w <= 0 or not np.isfinite(w):
            rhat[j] = np.nan if b <= 0 else np.inf
        else:
            var_plus = (n - 1) / n * w + b / n
            rhat[j] = np.sqrt(var_plus / w)
    return rhat


def max_rhat(rhat):
    """Maior R̂ finito ou infinito; None se todos degenerados"""
    if rhat is None:
        return None
    rhat = np.asarray(rhat, dtype=float)
    valid = rhat[~np.isnan(rhat)]
    return float(valid.max()) if valid.size else None
