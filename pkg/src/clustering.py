#!/usr/bin/env python3
# src/clustering.py

"""Fontes ponderadas do I-step: k-means dos draws do T-posterior e nós de quadratura"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.cluster.vq import vq
from scipy.spatial.distance import cdist

from utils import DistributionError

logger = logging.getLogger(__name__)

MAX_REPAIRS = 10
MAX_ITER = 300

QUAD_SPAN_SIGMAS = 7.0
QUAD_MIN_WEIGHT = 1e-12


@dataclass
class ClusterSet:
    """L centróides de θ com pesos α^(l) (fração de draws de cada cluster)"""

    centroids: np.ndarray
    weights: np.ndarray
    spec: object = None
    includes_sigma_a: bool = False
    sigma_a_fixed: float = None
    labels: np.ndarray = None

    def __post_init__(self):
        self.centroids = np.atleast_2d(np.asarray(self.centroids, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.weights.size != self.centroids.shape[0]:
            raise DistributionError("Um peso por centróide é obrigatório")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise DistributionError("Pesos devem ser não negativos e somar 1")

    @property
    def n_clusters(self):
        return self.centroids.shape[0]


def _kmeans_plusplus(points, n_clusters, gen):
    n = points.shape[0]
    chosen = [int(gen.integers(0, n))]
    closest = cdist(points, points[chosen[-1:]], 'sqeuclidean')[:, 0]
    for _ in range(1, n_clusters):
        total = closest.sum()
        if total > 0:
            idx = int(gen.choice(n, p=closest / total))
        else:
            remaining = np.setdiff1d(np.arange(n), chosen)
            idx = int(gen.choice(remaining))
        chosen.append(idx)
        closest = np.minimum(closest, cdist(points, points[idx:idx + 1], 'sqeuclidean')[:, 0])
    return points[chosen].copy()


def _lloyd(points, centers):
    repairs = 0
    labels = None
    for _ in range(MAX_ITER):
        new_labels, dist = vq(points, centers, check_finite=False)
        counts = np.bincount(new_labels, minlength=centers.shape[0])
        empty = np.flatnonzero(counts == 0)
        if empty.size and repairs < MAX_REPAIRS:
            # re-semear no ponto mais distante do seu centróide
            for j in empty:
                far = int(np.argmax(dist))
                centers[j] = points[far]
                dist[far] = 0.0
            repairs += 1
            continue
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(centers.shape[0]):
            mask = labels == j
            if np.any(mask):
                centers[j] = points[mask].mean(axis=0)
    return labels, repairs


def cluster_draws(tpost, n_clusters, rng):
    """
    Agrupar os draws do T-posterior em L clusters (k-means++ e Lloyd)

    Os draws são padronizados por dimensão para a atribuição; os centróides
    devolvidos são médias dos draws originais de cada cluster.

    Args:
        tpost: TPosterior com draws (ou array S × dim)
        n_clusters: L, 1 ≤ L ≤ S
        rng: Rng

    Returns:
        ClusterSet
    """
    draws = getattr(tpost, 'draws', tpost)
    if draws is None:
        raise DistributionError("cluster_draws requer draws do T-posterior")
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    n_draws = draws.shape[0]
    if not 1 <= n_clusters <= n_draws:
        raise DistributionError(f"L deve estar em [1, S={n_draws}] (recebido {n_clusters})")

    center = draws.mean(axis=0)
    spread = draws.std(axis=0)
    spread = np.where(spread > 0, spread, 1.0)
    points = (draws - center) / spread

    gen = rng.gen
    centers = _kmeans_plusplus(points, n_clusters, gen)
    labels, repairs = _lloyd(points, centers)

    counts = np.bincount(labels, minlength=n_clusters)
    keep = np.flatnonzero(counts > 0)
    if keep.size < n_clusters:
        logger.warning(f"⚠️ {n_clusters - keep.size} clusters vazios após {repairs} reparos foram descartados")
    remap = np.full(n_clusters, -1)
    remap[keep] = np.arange(keep.size)
    labels = remap[labels]

    centroids = np.stack([draws[labels == j].mean(axis=0) for j in range(keep.size)])
    weights = counts[keep] / n_draws
    weights = weights / weights.sum()

    logger.debug(f"🧩 {n_draws} draws agrupados em {keep.size} clusters ({repairs} reparos)")
    return ClusterSet(
        centroids=centroids,
        weights=weights,
        spec=getattr(tpost, 'spec', None),
        includes_sigma_a=getattr(tpost, 'includes_sigma_a', False),
        sigma_a_fixed=getattr(tpost, 'sigma_a_fixed', None),
        labels=labels,
    )


# ===================================
# Fonte determinística para T-posteriors gaussianos
# ===================================

def _slope_axis(mu, sigma, scale, span):
    """
    Nós de trapézio para N(mu, sigma²) uniformes em u = asinh(c / scale)

    A grade fica densa perto de c = 0, onde o I-posterior de cada
    componente muda numa escala da ordem de `scale`.
    """
    lo = np.arcsinh((mu - span * sigma) / scale)
    hi = np.arcsinh((mu + span * sigma) / scale)
    step = 0.5 * min(1.0, sigma / (scale + abs(mu) + 3.0 * sigma))
    u = np.linspace(lo, hi, int(np.ceil((hi - lo) / step)) + 1)
    c = scale * np.sinh(u)
    return c, -0.5 * ((c - mu) / sigma) ** 2 + np.log(scale * np.cosh(u))


def _conditional_axis(sigma, scale, span, n_nodes):
    """Nós padronizados para c1 | c2: Gauss–Hermite com n_nodes, ou trapézio com passo ≤ scale / 2"""
    if sigma <= 0:
        return np.zeros(1), np.zeros(1)
    if n_nodes:
        z, w = hermegauss(n_nodes)
        return z, np.log(w)
    step = 0.5 * min(1.0, scale / sigma)
    n_half = int(np.ceil(span / step))
    z = np.linspace(-span, span, 2 * n_half + 1)
    return z, -0.5 * z ** 2


def quadrature_source(tpost, resolution, inner_nodes=None, span=QUAD_SPAN_SIGMAS, min_weight=QUAD_MIN_WEIGHT):
    """
    Nós e pesos de quadratura para o T-posterior gaussiano do surrogate linear

    A inclinação c2 usa uma grade de trapézio esticada em torno de zero; o
    intercepto segue c1 | c2 por Gauss–Hermite (inner_nodes) ou trapézio
    fino. Nós com peso abaixo de min_weight são descartados.

    Args:
        tpost: TPosterior com forma analítica (1 ou 2 coeficientes)
        resolution: escala(s) abaixo das quais a verossimilhança do I-step
            varia, por coeficiente (c1, c2) ou um escalar para ambos
        inner_nodes: nós de Gauss–Hermite para c1 | c2 (None = trapézio)

    Returns:
        ClusterSet
    """
    analytic = getattr(tpost, 'analytic', None)
    if analytic is None:
        raise DistributionError("quadrature_source requer um T-posterior analítico")
    mean = np.atleast_1d(np.asarray(analytic['mean'], dtype=float))
    cov = np.atleast_2d(np.asarray(analytic['cov'], dtype=float))
    if mean.size not in (1, 2):
        raise DistributionError(f"quadrature_source suporta 1 ou 2 coeficientes (recebido {mean.size})")
    resolution = np.broadcast_to(np.atleast_1d(np.asarray(resolution, dtype=float)), mean.shape)
    if np.any(resolution <= 0):
        raise DistributionError("resolution deve ser positiva")

    s22 = cov[-1, -1]
    c2, log_w2 = _slope_axis(mean[-1], np.sqrt(s22), resolution[-1], span)
    if mean.size == 1:
        nodes = c2[:, None]
        log_w = log_w2
    else:
        s_cond = np.sqrt(max(cov[0, 0] - cov[0, 1] ** 2 / s22, 0.0))
        z, log_w1 = _conditional_axis(s_cond, resolution[0], span, inner_nodes)
        c1 = mean[0] + cov[0, 1] / s22 * (c2[:, None] - mean[-1]) + s_cond * z[None, :]
        nodes = np.column_stack([c1.ravel(), np.repeat(c2, z.size)])
        log_w = (log_w2[:, None] + log_w1[None, :]).ravel()

    weights = np.exp(log_w - log_w.max())
    weights /= weights.sum()
    keep = weights >= min_weight
    weights = weights[keep] / weights[keep].sum()

    logger.debug(f"🧩 Quadratura do T-posterior: {keep.sum()} nós (de {keep.size})")
    return ClusterSet(
        centroids=nodes[keep],
        weights=weights,
        spec=getattr(tpost, 'spec', None),
        includes_sigma_a=False,
        sigma_a_fixed=getattr(tpost, 'sigma_a_fixed', None),
    )
