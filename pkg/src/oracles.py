#!/usr/bin/env python3
# src/oracles.py

"""
Oráculos de referência: I-posteriors do caso linear em forma fechada ou
por quadratura, e o contra-exemplo discreto em aritmética exata.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy import integrate

from prob_core import log_sum_exp, normal_logpdf
from surrogates import SurrogateKind
from utils import DistributionError, QuadratureError

logger = logging.getLogger(__name__)

GAUSS_HERMITE_NODES = 32
QUAD_RTOL = 1e-6
SPAN_SIGMAS = 8.0
GRID_POINTS = 4001
C2_SPAN = 8.0
C2_GRID_POINTS = 801
COMPONENT_SIGMAS = 6.0


@dataclass
class OracleDensity:
    """
    Densidade univariada de referência para ω_I

    log_unnormalized é vetorizada; log_norm, mean e std vêm de forma
    fechada (Point, E-Log-Lik) ou de quadratura adaptativa.
    """

    method: str
    log_unnormalized: callable
    log_norm: float
    mean: float
    std: float
    lo: float
    hi: float

    def log_pdf(self, x):
        return self.log_unnormalized(np.asarray(x, dtype=float)) - self.log_norm

    def pdf(self, x):
        return np.exp(self.log_pdf(x))

    def grid(self, n=401):
        x = np.linspace(self.lo, self.hi, n)
        return x, self.pdf(x)

    def cdf(self, x):
        xs, dens = self.grid(GRID_POINTS)
        cumulative = integrate.cumulative_trapezoid(dens, xs, initial=0.0)
        cumulative /= cumulative[-1]
        return np.interp(x, xs, cumulative, left=0.0, right=1.0)

    def count_modes(self, n=2001):
        _, dens = self.grid(n)
        inner = (dens[1:-1] > dens[:-2]) & (dens[1:-1] > dens[2:])
        return int(np.count_nonzero(inner))


def _gaussian(method, mean, var):
    std = float(np.sqrt(var))
    return OracleDensity(
        method=method,
        log_unnormalized=lambda x: normal_logpdf(x, mean, std),
        log_norm=0.0,
        mean=float(mean),
        std=std,
        lo=float(mean - SPAN_SIGMAS * std),
        hi=float(mean + SPAN_SIGMAS * std),
    )


def _normalize(method, log_fn, lo, hi):
    """Normalizar log_fn em [lo, hi] por quadratura adaptativa"""
    xs = np.linspace(lo, hi, GRID_POINTS)
    values = log_fn(xs)
    peak = float(np.max(values))
    if not np.isfinite(peak):
        raise QuadratureError(f"{method}: densidade nula em todo o intervalo [{lo}, {hi}]")
    modes = xs[1:-1][(values[1:-1] >= values[:-2]) & (values[1:-1] >= values[2:])]
    breakpoints = sorted(set(float(m) for m in modes[:50]))

    def moment(k):
        value, error = integrate.quad(
            lambda w: w ** k * np.exp(log_fn(np.array([w]))[0] - peak), lo, hi,
            points=breakpoints or None, limit=500, epsabs=0.0, epsrel=1e-10,
        )
        return value, error

    z, z_err = moment(0)
    if not (np.isfinite(z) and z > 0) or z_err > QUAD_RTOL * z:
        raise QuadratureError(f"{method}: quadratura não convergiu (Z={z}, erro={z_err})")
    m1, _ = moment(1)
    m2, _ = moment(2)
    mean = m1 / z
    var = max(m2 / z - mean ** 2, 0.0)
    return OracleDensity(method, log_fn, peak + np.log(z), mean, float(np.sqrt(var)), lo, hi)


def _as_array(y):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.size == 0:
        raise DistributionError("Pelo menos uma medição é necessária para o oráculo")
    return y


def _analytic_moments(tpost):
    analytic = getattr(tpost, 'analytic', None) or tpost
    mean = np.atleast_1d(np.asarray(analytic['mean'], dtype=float))
    cov = np.atleast_2d(np.asarray(analytic['cov'], dtype=float))
    return mean, cov


def _gauss_hermite_nodes(mean, cov):
    """Nós (M × P) e pesos (M) de Gauss–Hermite tensorial para N(mean, cov)"""
    z, w = hermgauss(GAUSS_HERMITE_NODES)
    dim = mean.size
    grids = np.meshgrid(*([z] * dim), indexing='ij')
    nodes = np.stack([g.reshape(-1) for g in grids], axis=1)
    weights = np.ones(nodes.shape[0])
    for g in np.meshgrid(*([w] * dim), indexing='ij'):
        weights *= g.reshape(-1)
    weights /= np.pi ** (dim / 2.0)
    chol = np.linalg.cholesky(cov)
    return mean + np.sqrt(2.0) * nodes @ chol.T, weights


def _features(kind, omega):
    omega = np.asarray(omega, dtype=float)
    if kind is SurrogateKind.SLOPE_ONLY:
        return omega[..., None]
    return np.stack([np.ones_like(omega), omega], axis=-1)


def _log_marginal_shared(ys, means, var_shared, sigma_i):
    """
    log N(y⃗ | m·1, σ_I² I + v 11ᵀ) vetorizado em m e v

    Covariância de medições repetidas que compartilham o mesmo c.
    """
    n = ys.size
    s2 = sigma_i ** 2
    resid = ys - np.asarray(means)[..., None]
    total = resid.sum(axis=-1)
    quad = (resid ** 2).sum(axis=-1) / s2 - var_shared * total ** 2 / (s2 * (s2 + n * var_shared))
    log_det = (n - 1) * np.log(s2) + np.log(s2 + n * var_shared)
    return -0.5 * (n * np.log(2.0 * np.pi) + log_det + quad)


def _epost_log_fn(kind, mean, cov, ys, mu_i0, sigma_i0, sigma_i):
    """
    log p_E-Post(ω | y) não normalizada, com c1 | c2 integrado em forma fechada

    O integrando em (c1, c2) é uma crista de largura σ_I; depois de integrar
    c1 resta uma função suave de c2, somada numa grade fina em ±C2_SPAN σ.
    """
    n = ys.size
    y_bar = float(ys.mean())
    s2 = sigma_i ** 2
    if kind is SurrogateKind.SLOPE_ONLY:
        mu1, mu2, s22, slope, s_cond = 0.0, mean[0], cov[0, 0], 0.0, 0.0
    else:
        mu1, mu2 = mean
        s22 = cov[1, 1]
        slope = cov[0, 1] / s22
        s_cond = max(cov[0, 0] - cov[0, 1] ** 2 / s22, 0.0)

    z = np.linspace(-C2_SPAN, C2_SPAN, C2_GRID_POINTS)
    c2 = mu2 + np.sqrt(s22) * z
    log_w = normal_logpdf(z, 0.0, 1.0) + np.log(z[1] - z[0])
    m = mu1 + slope * (c2 - mu2)
    v = c2 ** 2 * sigma_i0 ** 2
    a = n / s2
    b = n / (s2 + n * v)
    d0 = y_bar - c2 * mu_i0
    shrink = 1.0 + s_cond * (a - b)
    const = 0.5 * np.log1p(n * v / s2) - 0.5 * np.log(shrink) + log_w

    def log_fn(omega):
        omega = np.asarray(omega, dtype=float)
        d1 = y_bar - c2 * omega[..., None]
        quad = (a * (d1 - m) ** 2 - b * (d0 - m) ** 2 - a * b * s_cond * (d1 - d0) ** 2) / shrink
        return normal_logpdf(omega, mu_i0, sigma_i0) + log_sum_exp(const - 0.5 * quad, axis=-1)

    return log_fn


def _component_interval(c1, c2, ys, mu_i0, sigma_i0, sigma_i):
    """Envoltória de ±SPAN_SIGMAS desvios dos posteriors gaussianos de cada componente c"""
    n = ys.size
    precision = sigma_i0 ** -2 + n * c2 ** 2 / sigma_i ** 2
    means = (mu_i0 / sigma_i0 ** 2 + c2 * n * (ys.mean() - c1) / sigma_i ** 2) / precision
    half = SPAN_SIGMAS / np.sqrt(precision)
    return float(np.min(means - half)), float(np.max(means + half))


def _epost_interval(kind, mean, cov, ys, mu_i0, sigma_i0, sigma_i):
    """
    Intervalo de integração do E-Post

    Componentes com c2 perto de zero deslocam seus posteriors para longe
    da prior; o intervalo cobre os componentes em ±COMPONENT_SIGMAS do
    T-posterior, além de ±SPAN_SIGMAS da prior.
    """
    lo, hi = mu_i0 - SPAN_SIGMAS * sigma_i0, mu_i0 + SPAN_SIGMAS * sigma_i0
    z = np.linspace(-COMPONENT_SIGMAS, COMPONENT_SIGMAS, C2_GRID_POINTS)
    if kind is SurrogateKind.SLOPE_ONLY:
        c2 = mean[0] + np.sqrt(cov[0, 0]) * z
        c1 = np.zeros_like(c2)
    else:
        s22 = cov[1, 1]
        s_cond = np.sqrt(max(cov[0, 0] - cov[0, 1] ** 2 / s22, 0.0))
        c2 = mean[1] + np.sqrt(s22) * z
        center = mean[0] + cov[0, 1] / s22 * (c2 - mean[1])
        # a média de cada componente é linear em c1: bastam os extremos
        c2 = np.concatenate([c2, c2])
        c1 = np.concatenate([center - COMPONENT_SIGMAS * s_cond, center + COMPONENT_SIGMAS * s_cond])
    c_lo, c_hi = _component_interval(c1, c2, ys, mu_i0, sigma_i0, sigma_i)
    return min(lo, c_lo), max(hi, c_hi)


def _literal_epost_log_fn(kind, mean, cov, ys, mu_i0, sigma_i0, sigma_i):
    """Variante com cᵀc·σ_I0² no normalizador, integrada por Gauss–Hermite tensorial"""
    nodes, weights = _gauss_hermite_nodes(mean, cov)
    log_w = np.log(weights)
    v = np.sum(nodes ** 2, axis=1) * sigma_i0 ** 2
    log_z = _log_marginal_shared(ys, nodes @ _features(kind, mu_i0), v, sigma_i)
    log_norm_i = -ys.size * (0.5 * np.log(2.0 * np.pi) + np.log(sigma_i))

    def log_fn(omega):
        omega = np.asarray(omega, dtype=float)
        m = _features(kind, omega) @ nodes.T
        ll = log_norm_i - 0.5 * np.sum((ys - m[..., None]) ** 2, axis=-1) / sigma_i ** 2
        return normal_logpdf(omega, mu_i0, sigma_i0) + log_sum_exp(ll - log_z + log_w, axis=-1)

    return log_fn


def analytic_linear_iposterior(method, tpost, y, mu_i0, sigma_i0, sigma_i, kind=SurrogateKind.LINEAR_LM,
                               literal_epost=False):
    """
    I-posterior de referência para o surrogate linear (ou só inclinação)

    Args:
        method: UpMethod ou nome ('point', 'eloglik', 'elik', 'epost')
        tpost: TPosterior analítico (ou dict com 'mean' e 'cov')
        y: medição(ões) repetida(s) no mesmo ω_I
        mu_i0, sigma_i0: prior normal de ω_I
        sigma_i: desvio-padrão fixo da medição
        kind: SurrogateKind.LINEAR_LM ou SLOPE_ONLY
        literal_epost: usar cᵀc·σ_I0² em vez de c2²·σ_I0² no normalizador do E-Post

    Returns:
        OracleDensity
    """
    name = getattr(getattr(method, 'kind', None), 'value', None) or str(method).lower().replace('-', '')
    kind = SurrogateKind(kind)
    ys = _as_array(y)
    n = ys.size
    mean, cov = _analytic_moments(tpost)
    prec0 = sigma_i0 ** -2
    prec_i = sigma_i ** -2

    if kind is SurrogateKind.SLOPE_ONLY:
        mu1, mu2, s12, s22 = 0.0, mean[0], 0.0, cov[0, 0]
    else:
        mu1, mu2 = mean
        s12, s22 = cov[0, 1], cov[1, 1]

    if name == 'point':
        var = 1.0 / (prec0 + n * prec_i * mu2 ** 2)
        return _gaussian('point', var * (prec0 * mu_i0 + prec_i * mu2 * np.sum(ys - mu1)), var)

    if name == 'eloglik':
        var = 1.0 / (prec0 + n * prec_i * (mu2 ** 2 + s22))
        return _gaussian('eloglik', var * (prec0 * mu_i0 + prec_i * np.sum(mu2 * (ys - mu1) - s12)), var)

    lo, hi = mu_i0 - SPAN_SIGMAS * sigma_i0, mu_i0 + SPAN_SIGMAS * sigma_i0

    if name == 'elik':
        def log_fn(omega):
            feats = _features(kind, omega)
            m = feats @ mean
            v = np.einsum('...i,ij,...j->...', feats, cov, feats)
            return normal_logpdf(omega, mu_i0, sigma_i0) + _log_marginal_shared(ys, m, v, sigma_i)

        return _normalize('elik', log_fn, lo, hi)

    if name == 'epost':
        lo, hi = _epost_interval(kind, mean, cov, ys, mu_i0, sigma_i0, sigma_i)
        if literal_epost:
            return _normalize('epost', _literal_epost_log_fn(kind, mean, cov, ys, mu_i0, sigma_i0, sigma_i), lo, hi)
        return _normalize('epost', _epost_log_fn(kind, mean, cov, ys, mu_i0, sigma_i0, sigma_i), lo, hi)

    raise DistributionError(f"Método desconhecido para o oráculo linear: {method}")


# ===================================
# Contra-exemplo discreto
# ===================================

COUNTEREXAMPLE_TABLES = {
    'p_omega': {0: Fraction(1, 2), 1: Fraction(1, 2)},
    'p_theta': {0: Fraction(1, 2), 1: Fraction(1, 2)},
    # p(y=0 | ω, θ); p(y=1 | ω, θ) é o complemento
    'p_y0': {
        (0, 0): Fraction(1, 4), (1, 0): Fraction(1, 2),
        (0, 1): Fraction(1, 2), (1, 1): Fraction(1, 2),
    },
}


def _check_pmf(name, pmf):
    if any(p < 0 for p in pmf.values()) or sum(pmf.values()) != 1:
        raise DistributionError(f"Tabela {name} não é uma pmf normalizada")


def _likelihood_table(tables):
    """p(y | ω, θ) como dict (y, ω, θ) → Fraction"""
    if 'p_y' in tables:
        lik = {k: Fraction(v) for k, v in tables['p_y'].items()}
    else:
        lik = {}
        for (omega, theta), p0 in tables['p_y0'].items():
            lik[(0, omega, theta)] = Fraction(p0)
            lik[(1, omega, theta)] = 1 - Fraction(p0)
    pairs = {(o, t) for _, o, t in lik}
    for omega, theta in pairs:
        _check_pmf(f"p(y | ω={omega}, θ={theta})", {y: p for (y, o, t), p in lik.items() if (o, t) == (omega, theta)})
    return lik


def discrete_posterior(tables, method, y_obs):
    """
    P(ω | y_obs) exato para E-Post ou E-Lik em suportes finitos

    Args:
        tables: {'p_omega': {ω: p}, 'p_theta': {θ: p}, 'p_y0' ou 'p_y'}
        method: 'epost' ou 'elik' (ou UpMethod)
        y_obs: valor observado

    Returns:
        dict ω → Fraction
    """
    p_omega = {k: Fraction(v) for k, v in tables['p_omega'].items()}
    p_theta = {k: Fraction(v) for k, v in tables['p_theta'].items()}
    _check_pmf('p(ω)', p_omega)
    _check_pmf('p(θ)', p_theta)
    lik = _likelihood_table(tables)
    name = getattr(getattr(method, 'kind', None), 'value', None) or str(method).lower().replace('-', '')

    if name == 'elik':
        joint = {w: p_omega[w] * sum(lik[(y_obs, w, t)] * p_theta[t] for t in p_theta) for w in p_omega}
        total = sum(joint.values())
        return {w: joint[w] / total for w in p_omega}

    if name == 'epost':
        result = {w: Fraction(0) for w in p_omega}
        for t, pt in p_theta.items():
            evidence = sum(lik[(y_obs, w, t)] * p_omega[w] for w in p_omega)
            if evidence == 0:
                continue
            for w in p_omega:
                result[w] += pt * p_omega[w] * lik[(y_obs, w, t)] / evidence
        return result

    raise DistributionError(f"Método discreto desconhecido: {method}")
