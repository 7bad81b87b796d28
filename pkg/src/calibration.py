#!/usr/bin/env python3
# src/calibration.py

"""
Calibração baseada em simulação (SBC) para o procedimento em dois passos

Cada T-trial treina um surrogate num 𝒟_T novo; dentro dele cada I-trial
sorteia ω_I* da prior, gera medições e guarda o rank de ω_I* entre os
draws (afinados) do I-posterior.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from clustering import cluster_draws
from config import Config
from istep import IStepPriors, UpMethod, infer
from mcmc import SamplerConfig
from monitoring import metrics_collector
from prob_core import DistSpec, Rng
from simulators import (SimulatorKind, generate_measurements, generate_training_data, halton_design_1d,
                        sobol_design_3d)
from surrogates import LOGISTIC_TRUTH, SurrogateKind, SurrogateSpec
from tstep import TPosterior, train_conjugate_linear, train_conjugate_slope, train_mcmc
from utils import (DistributionError, ProgressTracker, SamplerError, SurrogateInferenceError, read_csv,
                   run_jobs, write_csv)

logger = logging.getLogger(__name__)

MAX_FAILURE_FRACTION = 0.10
RECORD_COLUMNS = ['t_trial', 'i_trial', 'dim', 'omega_star', 'rank', 'k_eff', 'rhat_max']


@dataclass
class SbcConfig:
    """Configuração de um experimento SBC (T-trials × I-trials)"""

    simulator: object
    surrogate: SurrogateSpec
    priors: IStepPriors
    method: UpMethod
    n_t: int = 5
    n_i: int = 1
    n_t_trials: int = Config.SBC_T_TRIALS
    n_i_trials: int = Config.SBC_I_TRIALS
    k_eff: int = Config.SBC_K_EFF
    tstep_method: str = 'mcmc'
    tstep_config: SamplerConfig = None
    istep_config: SamplerConfig = None
    sigma_a_fixed: float = None
    n_clusters: int = None
    propagate_sigma_a: bool = False
    noise_phi: float = None
    cheat: bool = False
    n_jobs: int = 1

    def __post_init__(self):
        self.method = self.method if isinstance(self.method, UpMethod) else UpMethod.parse(self.method)
        errors = []
        if self.n_t_trials < 1 or self.n_i_trials < 1:
            errors.append("n_t_trials e n_i_trials devem ser ≥ 1")
        if self.k_eff < 1:
            errors.append("k_eff deve ser ≥ 1")
        if self.n_t < 1 and not self.cheat:
            errors.append("n_t deve ser ≥ 1")
        if self.n_i < 0:
            errors.append("n_i deve ser ≥ 0")
        if self.tstep_method not in ('mcmc', 'conjugate'):
            errors.append(f"tstep_method desconhecido: {self.tstep_method}")
        if self.n_clusters is not None and self.n_clusters < 1:
            errors.append("n_clusters deve ser ≥ 1")
        if errors:
            raise DistributionError("; ".join(errors))

    @property
    def n_trials(self):
        return self.n_t_trials * self.n_i_trials


@dataclass
class SbcRecord:
    t_trial: int
    i_trial: int
    omega_star: tuple
    ranks: tuple
    k_eff: int
    rhat_max: float = None
    sharpness: tuple = ()
    status: str = 'healthy'

    def __post_init__(self):
        if any(not 0 <= r <= self.k_eff for r in self.ranks):
            raise DistributionError(f"Rank fora de [0, {self.k_eff}]: {self.ranks}")


@dataclass
class SbcResult:
    records: list
    n_failed: int = 0
    n_total: int = 0
    failures: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, index):
        return self.records[index]

    def ranks(self, dim=0):
        return np.array([r.ranks[dim] for r in self.records], dtype=int)


# ===================================
# Rank e afinamento
# ===================================

def rank_statistic(omega_star, draws, rng=None):
    """
    Σ_k 𝕀[ω* ≤ ω^(k)], com empates desfeitos uniformemente ao acaso

    Sem rng os empates contam como ω* ≤ ω^(k).
    """
    draws = np.asarray(draws, dtype=float).reshape(-1)
    if draws.size == 0:
        raise DistributionError("rank_statistic requer pelo menos um draw")
    greater = int(np.count_nonzero(draws > omega_star))
    ties = int(np.count_nonzero(draws == omega_star))
    if ties == 0:
        return greater
    if rng is None:
        return greater + ties
    gen = rng.gen if isinstance(rng, Rng) else rng
    return greater + int(gen.integers(0, ties + 1))


def thin_draws(draws, k_eff):
    """Escolher k_eff draws igualmente espaçados"""
    draws = np.asarray(draws)
    n = draws.shape[0]
    if n < k_eff:
        raise DistributionError(f"{n} draws insuficientes para k_eff={k_eff}")
    index = (np.arange(k_eff) * n) // k_eff
    return draws[index]


def sharpness(draws, q=0.9):
    """Largura do intervalo central de probabilidade q"""
    draws = np.asarray(draws, dtype=float).reshape(-1)
    if draws.size == 0 or not 0 < q < 1:
        raise DistributionError("sharpness requer draws e 0 < q < 1")
    lo, hi = np.quantile(draws, [(1 - q) / 2, (1 + q) / 2])
    return float(hi - lo)


def joint_credible_contains(draws, truth, level=0.95):
    """ω* dentro da região de credibilidade elipsoidal (Mahalanobis vs χ²)"""
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    if draws.shape[0] == 1:
        draws = draws.T
    truth = np.atleast_1d(np.asarray(truth, dtype=float))
    mean = draws.mean(axis=0)
    cov = np.atleast_2d(np.cov(draws, rowvar=False))
    diff = truth - mean
    try:
        distance = float(diff @ np.linalg.solve(cov, diff))
    except np.linalg.LinAlgError:
        return False
    return distance <= stats.chi2.ppf(level, df=truth.size)


def rank_histogram(ranks, k_eff, n_bins=20):
    """Contagens de ranks em n_bins bins de {0, …, k_eff}"""
    ranks = np.asarray(ranks, dtype=int)
    n_bins = min(n_bins, k_eff + 1)
    edges = np.linspace(0, k_eff + 1, n_bins + 1)
    counts, _ = np.histogram(ranks, bins=edges)
    return counts


# ===================================
# Uniformidade: log-γ e envelopes
# ===================================

def _eval_points(k_eff):
    return np.arange(1, k_eff + 1) / (k_eff + 1)


def _ecdf_counts(ranks, k_eff):
    """Contagem de ranks < i para i = 1..k_eff; ranks pode ser (N,) ou (M, N)"""
    ranks = np.atleast_2d(np.asarray(ranks, dtype=int))
    counts = np.stack([np.bincount(row, minlength=k_eff + 1) for row in ranks])
    return np.cumsum(counts, axis=1)[:, :k_eff]


def _log_gamma_from_counts(counts, n, z):
    log_lower = stats.binom.logcdf(counts, n, z)
    log_upper = stats.binom.logsf(counts - 1, n, z)
    log_p = np.log(2.0) + np.minimum(log_lower, log_upper)
    return np.minimum(np.min(log_p, axis=-1), 0.0)


def log_gamma_statistic(ranks, k_eff):
    """
    log γ: mínimo, sobre os pontos de avaliação, da probabilidade de cauda
    binomial bilateral da contagem da ECDF dos ranks sob uniformidade
    """
    ranks = np.asarray(ranks, dtype=int)
    if ranks.size == 0:
        raise DistributionError("log_gamma_statistic requer ranks")
    counts = _ecdf_counts(ranks, k_eff)[0]
    return float(_log_gamma_from_counts(counts, ranks.size, _eval_points(k_eff)))


def log_gamma_threshold(confidence, n_ranks, k_eff, n_sim=None, rng=None):
    """Quantil (1 − confidence) de log γ em n_sim conjuntos de ranks uniformes"""
    if not 0 < confidence < 1:
        raise DistributionError("confidence deve estar em (0, 1)")
    n_sim = n_sim or Config.SBC_N_SIM
    rng = rng or Rng(Config.DEFAULT_SEED)
    gen = rng.gen if isinstance(rng, Rng) else rng
    # ranks uniformes em {0..k_eff}: as contagens por valor são multinomiais
    bins = gen.multinomial(n_ranks, np.full(k_eff + 1, 1.0 / (k_eff + 1)), size=n_sim)
    counts = np.cumsum(bins, axis=1)[:, :k_eff]
    simulated = _log_gamma_from_counts(counts, n_ranks, _eval_points(k_eff))
    return float(np.quantile(simulated, 1.0 - confidence))


def ecdf_envelope(ranks, k_eff, confidence=None, n_sim=None, rng=None):
    """
    Bandas simultâneas para a diferença ECDF − uniforme dos ranks normalizados

    As bandas são os quantis binomiais no nível γ* = exp(limiar de log γ),
    o que dá cobertura simultânea calibrada por Monte Carlo.

    Returns:
        dict com z, lower, upper, ecdf_diff, log_gamma_threshold e inside
    """
    confidence = confidence or Config.SBC_CONFIDENCE
    ranks = np.asarray(ranks, dtype=int)
    n = ranks.size
    if n < 20:
        logger.warning(f"⚠️ Apenas {n} ranks; envelope pouco informativo")
    z = _eval_points(k_eff)
    threshold = log_gamma_threshold(confidence, n, k_eff, n_sim, rng)
    gamma = np.exp(threshold)
    lower = stats.binom.ppf(gamma / 2.0, n, z) / n - z
    upper = stats.binom.ppf(1.0 - gamma / 2.0, n, z) / n - z
    diff = _ecdf_counts(ranks, k_eff)[0] / n - z
    return {
        'z': z,
        'lower': lower,
        'upper': upper,
        'ecdf_diff': diff,
        'log_gamma_threshold': threshold,
        'inside': bool(np.all((diff >= lower) & (diff <= upper))),
    }


def write_envelope(path, envelope):
    rows = zip(envelope['z'], envelope['lower'], envelope['upper'], envelope['ecdf_diff'])
    return write_csv(path, ['z', 'lower', 'upper', 'ecdf_diff'], ([float(v) for v in row] for row in rows))


# ===================================
# Algoritmo SBC
# ===================================

def exact_tposterior(simulator, surrogate):
    """T-posterior pontual nos parâmetros que reproduzem o simulador"""
    if simulator.kind is SimulatorKind.LOGISTIC and surrogate.kind is SurrogateKind.LOGISTIC_PARAM:
        theta = LOGISTIC_TRUTH
    elif simulator.kind is SimulatorKind.LINEAR and surrogate.kind is SurrogateKind.LINEAR_LM:
        theta = (simulator.a, simulator.b)
    elif simulator.kind is SimulatorKind.SLOPE_ONLY and surrogate.kind is SurrogateKind.SLOPE_ONLY:
        theta = (simulator.c,)
    else:
        raise DistributionError(
            f"Sem parametrização exata de {simulator.kind.value} por {surrogate.kind.value}"
        )
    return TPosterior(spec=surrogate, draws=np.array([theta], dtype=float), sigma_a_fixed=None,
                      provenance={'method': 'exact'})


def _design(cfg):
    if cfg.simulator.kind is SimulatorKind.SIR:
        return sobol_design_3d(cfg.n_t, cfg.simulator.bounds)
    return halton_design_1d(cfg.n_t)


def train_surrogate(cfg, rng):
    """T-step de um trial: 𝒟_T novo e ajuste do surrogate"""
    if cfg.cheat:
        return exact_tposterior(cfg.simulator, cfg.surrogate)
    data = generate_training_data(cfg.simulator, _design(cfg), cfg.simulator.sigma_s, rng.child(0))
    tstep_config = cfg.tstep_config or SamplerConfig(Config.MCMC_CHAINS, Config.MCMC_WARMUP, Config.MCMC_POST)
    if cfg.tstep_method == 'conjugate':
        trainer = train_conjugate_slope if cfg.surrogate.kind is SurrogateKind.SLOPE_ONLY else train_conjugate_linear
        prior = cfg.surrogate.coeff_priors[0]
        n_draws = tstep_config.n_chains * tstep_config.n_post
        return trainer(data, prior.mu, prior.sigma, cfg.sigma_a_fixed, n_samples=n_draws, rng=rng.child(1),
                       spec=cfg.surrogate)
    return train_mcmc(cfg.surrogate, data, tstep_config, rng.child(1), sigma_a_fixed=cfg.sigma_a_fixed)


def _measurement_noise(cfg, sigma_i):
    if cfg.noise_phi is not None:
        return DistSpec.negative_binomial(1.0, cfg.noise_phi)
    return DistSpec.normal(0.0, sigma_i)


def _i_trial(cfg, source, rng, t, i):
    prior_draw = np.atleast_1d(cfg.priors.draw_prior(rng.child(0), 1)[0])
    omega_star = prior_draw[:cfg.priors.dim_omega]
    sigma_i = prior_draw[cfg.priors.dim_omega] if cfg.priors.samples_sigma_i else cfg.priors.sigma_i
    measurements = generate_measurements(cfg.simulator, omega_star, _measurement_noise(cfg, sigma_i), cfg.n_i,
                                         rng.child(1))
    ipost = infer(cfg.method, None, source, measurements, cfg.priors, cfg.istep_config, rng.child(2),
                  propagate_sigma_a=cfg.propagate_sigma_a)

    thinned = thin_draws(ipost.draws, cfg.k_eff)
    tie_rng = rng.child(3)
    truth = np.concatenate([omega_star, [sigma_i]]) if cfg.priors.samples_sigma_i else omega_star
    ranks = tuple(rank_statistic(truth[j], thinned[:, j], tie_rng) for j in range(truth.size))
    widths = tuple(sharpness(ipost.draws[:, j]) for j in range(truth.size))
    return SbcRecord(
        t_trial=t,
        i_trial=i,
        omega_star=tuple(float(v) for v in truth),
        ranks=ranks,
        k_eff=cfg.k_eff,
        rhat_max=ipost.diagnostics.get('rhat_max'),
        sharpness=widths,
        status=ipost.diagnostics.get('status', 'healthy'),
    )


def run_t_trial(task):
    """Um T-trial completo; nível de módulo para o pool de processos"""
    cfg, seed, stream, t = task
    rng = Rng(seed, stream).child(t)
    records, failures = [], []
    try:
        tpost = train_surrogate(cfg, rng.child(0))
        source = tpost
        if cfg.n_clusters is not None and tpost.n_draws > cfg.n_clusters:
            source = cluster_draws(tpost, cfg.n_clusters, rng.child(2))
    except SurrogateInferenceError as e:
        logger.warning(f"⚠️ T-trial {t} falhou: {e}")
        return records, [(t, i, str(e)) for i in range(cfg.n_i_trials)]

    for i in range(cfg.n_i_trials):
        try:
            records.append(_i_trial(cfg, source, rng.child(1, i), t, i))
        except SurrogateInferenceError as e:
            logger.warning(f"⚠️ I-trial ({t}, {i}) falhou: {e}")
            failures.append((t, i, str(e)))
    return records, failures


def sbc_run(cfg, rng):
    """
    Executar n_t_trials × n_i_trials trials SBC

    T-trials rodam num pool de processos (cfg.n_jobs); os registros são
    reunidos pela ordem dos índices. Mais de 10% de falhas aborta a execução.

    Returns:
        SbcResult
    """
    logger.info(f"🎯 SBC {cfg.method.label}: {cfg.n_t_trials} T-trials × {cfg.n_i_trials} I-trials, "
                f"N_T={cfg.n_t}, N_I={cfg.n_i}")
    progress = ProgressTracker(cfg.n_t_trials, f"SBC {cfg.method.label}")
    tasks = [(cfg, rng.seed, rng.stream, t) for t in range(cfg.n_t_trials)]

    if cfg.n_jobs > 1:
        outcomes = run_jobs(run_t_trial, tasks, n_jobs=cfg.n_jobs, processes=True)
    else:
        outcomes = []
        for t, task in enumerate(tasks):
            outcomes.append(run_t_trial(task))
            progress.update(t + 1)

    records = [r for recs, _ in outcomes for r in recs]
    failures = [f for _, fails in outcomes for f in fails]
    records.sort(key=lambda r: (r.t_trial, r.i_trial))

    for _ in records:
        metrics_collector.record_run(f"sbc:{cfg.method.label}", success=True)
    for _ in failures:
        metrics_collector.record_run(f"sbc:{cfg.method.label}", success=False)

    if len(failures) > MAX_FAILURE_FRACTION * cfg.n_trials:
        raise SamplerError(f"SBC: {len(failures)} de {cfg.n_trials} trials falharam (limite 10%)")
    if failures:
        logger.warning(f"⚠️ {len(failures)} trials excluídos do SBC")
    progress.finish(f"{len(records)} registros")
    return SbcResult(records=records, n_failed=len(failures), n_total=cfg.n_trials, failures=failures)


def summarize_sbc(result, k_eff, confidence=None, n_sim=None, rng=None, names=None):
    """log γ, limiar, envelope, histograma e nitidez por dimensão"""
    confidence = confidence or Config.SBC_CONFIDENCE
    rng = rng or Rng(Config.DEFAULT_SEED)
    if not result.records:
        raise DistributionError("Nenhum registro SBC para resumir")
    n_dims = len(result.records[0].ranks)
    names = names or [f"dim{j}" for j in range(n_dims)]
    summary = {'n_records': len(result.records), 'n_failed': result.n_failed, 'confidence': confidence,
               'k_eff': k_eff, 'dims': {}}
    for j in range(n_dims):
        ranks = result.ranks(j)
        envelope = ecdf_envelope(ranks, k_eff, confidence, n_sim, rng.child(j))
        log_gamma = log_gamma_statistic(ranks, k_eff)
        widths = [r.sharpness[j] for r in result.records if len(r.sharpness) > j]
        summary['dims'][names[j]] = {
            'log_gamma': log_gamma,
            'log_gamma_threshold': envelope['log_gamma_threshold'],
            'passed': log_gamma >= envelope['log_gamma_threshold'],
            'envelope_inside': envelope['inside'],
            'sharpness_median': float(np.median(widths)) if widths else None,
            'rank_histogram': rank_histogram(ranks, k_eff).tolist(),
        }
    return summary


def write_sbc_records(path, records):
    rows = []
    for record in records:
        for j, (truth, rank) in enumerate(zip(record.omega_star, record.ranks)):
            rows.append([record.t_trial, record.i_trial, j, truth, rank, record.k_eff,
                         '' if record.rhat_max is None else record.rhat_max])
    return write_csv(path, RECORD_COLUMNS, rows)


def read_sbc_records(path):
    header, rows = read_csv(path)
    if header != RECORD_COLUMNS:
        raise DistributionError(f"Cabeçalho inesperado em {path}: {header}")
    grouped = {}
    for row in rows:
        key = (int(row[0]), int(row[1]))
        grouped.setdefault(key, []).append(row)
    records = []
    for (t, i), group in sorted(grouped.items()):
        group.sort(key=lambda r: int(r[2]))
        rhat = group[0][6]
        records.append(SbcRecord(
            t_trial=t,
            i_trial=i,
            omega_star=tuple(float(r[3]) for r in group),
            ranks=tuple(int(r[4]) for r in group),
            k_eff=int(group[0][5]),
            rhat_max=float(rhat) if rhat not in ('', None) else None,
        ))
    return records
