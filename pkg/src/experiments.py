#!/usr/bin/env python3
# src/experiments.py

"""
Executores dos experimentos declarados em config/*.toml

Cada executor grava seus artefatos no diretório de saída e devolve um
resumo (dict). Falhas de diagnóstico (R̂ acima do limiar) são levantadas
como DiagnosticError somente depois que as saídas parciais foram gravadas.
"""

import logging
import time
from pathlib import Path

import numpy as np
import scipy

from calibration import (SbcConfig, ecdf_envelope, joint_credible_contains, sbc_run, sharpness, summarize_sbc,
                         write_envelope, write_sbc_records)
from clustering import cluster_draws, quadrature_source
from experiment_config import (build_priors, build_simulator, build_surrogate, epost_config, methods,
                               sampler_config)
from istep import UpMethodKind, infer, infer_simulator, write_iposterior
from mcmc import SamplerConfig
from monitoring import get_system_info, metrics_collector
from oracles import COUNTEREXAMPLE_TABLES, analytic_linear_iposterior, discrete_posterior
from prob_core import DistSpec, Rng
from simulators import (Measurements, SimulatorKind, generate_measurements, generate_training_data, halton_design_1d,
                        sobol_design_3d)
from surrogates import SurrogateKind, pce_surrogate_spec
from tstep import (save_tposterior, tpredictive, train_conjugate_linear, train_conjugate_slope, train_mcmc,
                   write_tpredictive)
from utils import DiagnosticError, ProgressTracker, write_csv, write_json

logger = logging.getLogger(__name__)

# nós de Gauss–Hermite em c1 | c2 para o E-Post do caso 1
EPOST_INNER_NODES = 3


class DiagnosticsLog:
    """Acumula status de diagnóstico das execuções de um experimento"""

    def __init__(self):
        self.entries = []

    def add(self, label, diagnostics):
        status = diagnostics.get('status') or diagnostics.get('diagnostics_status') or 'healthy'
        self.entries.append({'label': label, 'status': status, 'rhat_max': diagnostics.get('rhat_max')})

    @property
    def failed(self):
        return [e for e in self.entries if e['status'] == 'error']

    def to_dict(self):
        return {'entries': self.entries, 'n_failed': len(self.failed)}


def _moments(draws):
    draws = np.asarray(draws, dtype=float)
    return {'mean': draws.mean(axis=0).tolist(), 'std': draws.std(axis=0, ddof=1).tolist()}


def _noise(cfg, sigma_i=None):
    istep = cfg.istep
    kind = istep.get('noise', 'normal')
    if kind == 'none':
        return None
    if kind == 'negbin':
        return DistSpec.negative_binomial(1.0, istep.get('phi', 9.6))
    return DistSpec.normal(0.0, sigma_i if sigma_i is not None else istep.get('sigma_i', 0.1))


def _omega_star_values(cfg):
    istep = cfg.istep
    if 'omega_star_values' in istep:
        return [np.atleast_1d(np.asarray(v, dtype=float)) for v in istep['omega_star_values']]
    return [np.atleast_1d(np.asarray(istep.get('omega_star', 0.0), dtype=float))]


def _n_t_values(cfg, default=5):
    training = cfg.training
    if 'n_t_values' in training:
        return list(training['n_t_values'])
    return [training.get('n_t', default)]


def _design(simulator, n_t, design=None):
    if (design or ('sobol' if simulator.kind is SimulatorKind.SIR else 'halton')) == 'sobol':
        return sobol_design_3d(n_t, simulator.bounds)
    return halton_design_1d(n_t)


def _label(value):
    return '_'.join(f"{v:g}" for v in np.atleast_1d(value))


# ===================================
# Caso 1: linear analítico
# ===================================

def _case1_sources(s, tpost, resolution, rng):
    """
    Fonte do I-step por método

    'quadrature' (padrão) integra o T-posterior analítico por nós
    determinísticos: trapézio fino para E-Lik/E-Log-Lik e poucos nós em
    c1 | c2 para o E-Post, que faz um ajuste por nó. 'draws' usa os draws
    do T-posterior, agrupados quando n_clusters é dado.
    """
    if s.get('source', 'quadrature') == 'quadrature':
        dense = quadrature_source(tpost, resolution)
        return {
            UpMethodKind.POINT: tpost,
            UpMethodKind.ELIK: dense,
            UpMethodKind.ELOGLIK: dense,
            UpMethodKind.EPOST: quadrature_source(tpost, resolution, inner_nodes=EPOST_INNER_NODES),
        }
    source = cluster_draws(tpost, s['n_clusters'], rng) if s.get('n_clusters') else tpost
    return dict.fromkeys(UpMethodKind, source)


def run_case1(cfg, rng, out):
    """
    Surrogate linear (ou só inclinação) com T-posterior conjugado

    Para cada σ_A da varredura: T-posterior, I-posteriors por MCMC e as
    densidades de referência em forma fechada/quadratura numa grade.
    """
    simulator = build_simulator(cfg)
    spec = build_surrogate(cfg, simulator)
    priors = build_priors(cfg)
    config = sampler_config(cfg)
    s = cfg.surrogate
    istep = cfg.istep
    log = DiagnosticsLog()

    inputs = np.asarray(cfg.training.get('inputs', [-0.9, -0.3]), dtype=float)
    data = generate_training_data(simulator, inputs, simulator.sigma_s, rng.child(0))
    omega_star = _omega_star_values(cfg)[0]
    if 'y' in istep:
        measurements = Measurements(ys=np.asarray(istep['y'], dtype=float), meta={'omega_star': omega_star.tolist()})
    else:
        measurements = generate_measurements(simulator, omega_star, _noise(cfg), istep.get('n_i', 1), rng.child(1))

    prior = priors.omega[0]
    sigma_i = priors.sigma_i
    trainer = train_conjugate_slope if spec.kind is SurrogateKind.SLOPE_ONLY else train_conjugate_linear
    n_draws = s.get('n_draws', config.n_chains * config.n_post)
    grid_points = istep.get('grid_points', 401)
    literal = istep.get('literal_epost', False)
    # larguras da verossimilhança em c1 e em c2 (perto de c2 = 0)
    n_i = max(len(measurements), 1)
    resolution = np.array([sigma_i / np.sqrt(n_i), sigma_i / (prior.sigma * np.sqrt(n_i))])[-spec.n_coeffs:]

    grid_rows, summary = [], {'measurements': measurements.ys.tolist(), 'cells': {}}
    sweep = s.get('sigma_a_values', [s.get('sigma_a', 0.1)])
    for k, sigma_a in enumerate(sweep):
        cell_dir = Path(out) / f"sigma_a_{sigma_a:g}"
        tpost = trainer(data, s.get('prior_mu', 0.0), s.get('prior_sigma', 10.0), sigma_a,
                        n_samples=n_draws, rng=rng.child(2, k), spec=spec)
        save_tposterior(tpost, cell_dir / 'tposterior.csv')
        sources = _case1_sources(s, tpost, resolution, rng.child(3, k))

        cell = {'mu_t1': np.asarray(tpost.analytic['mean']).tolist(),
                'sigma_t1': np.asarray(tpost.analytic['cov']).tolist(),
                'source': s.get('source', 'quadrature'), 'methods': {}}
        for j, method in enumerate(methods(cfg)):
            oracle = analytic_linear_iposterior(method, tpost, measurements.ys, prior.mu, prior.sigma, sigma_i,
                                                kind=spec.kind, literal_epost=literal)
            ipost = infer(method, spec, sources[method.kind], measurements, priors, config, rng.child(4, k, j),
                          n_jobs=cfg.n_jobs, component_config=epost_config(cfg))
            write_iposterior(cell_dir / f"iposterior_{method.label}.csv", ipost)
            log.add(f"sigma_a={sigma_a:g}/{method.label}", ipost.diagnostics)

            mcmc_mean = float(ipost.draws[:, 0].mean())
            mcmc_std = float(ipost.draws[:, 0].std(ddof=1))
            cell['methods'][method.label] = {
                'oracle_mean': oracle.mean, 'oracle_std': oracle.std,
                'mcmc_mean': mcmc_mean, 'mcmc_std': mcmc_std,
                'mean_rel_error': abs(mcmc_mean - oracle.mean) / max(abs(oracle.mean), 1e-12),
                'std_rel_error': abs(mcmc_std - oracle.std) / oracle.std,
                'rhat_max': ipost.diagnostics.get('rhat_max'),
            }
            xs, dens = oracle.grid(grid_points)
            grid_rows.extend([sigma_a, method.label, float(x), float(d)] for x, d in zip(xs, dens))
        summary['cells'][f"{sigma_a:g}"] = cell
        logger.info(f"✅ Caso 1, σ_A={sigma_a:g}: {len(cell['methods'])} métodos")

    write_csv(Path(out) / 'density_grid.csv', ['sigma_a', 'method', 'omega', 'density'], grid_rows)
    return summary, log


# ===================================
# Contra-exemplo discreto
# ===================================

def run_counterexample(cfg, rng, out):
    result = {}
    for name in ('epost', 'elik'):
        posterior = discrete_posterior(COUNTEREXAMPLE_TABLES, name, y_obs=0)
        result[name] = {str(w): str(p) for w, p in posterior.items()}
    summary = {
        'p_omega0_given_y0': {name: result[name]['0'] for name in result},
        'posteriors': result,
        'equal': result['epost'] == result['elik'],
    }
    write_json(Path(out) / 'counterexample.json', summary)
    logger.info(f"📊 P(ω=0|y=0): E-Post {summary['p_omega0_given_y0']['epost']}, "
                f"E-Lik {summary['p_omega0_given_y0']['elik']}")
    return summary, DiagnosticsLog()


# ===================================
# Casos 2 e 3: procedimento em dois passos por MCMC
# ===================================

def _train(cfg, spec, simulator, n_t, config, rng):
    s = cfg.surrogate
    data = generate_training_data(simulator, _design(simulator, n_t, cfg.training.get('design')),
                                  simulator.sigma_s, rng.child(0))
    if s.get('tstep', 'mcmc') == 'conjugate':
        trainer = train_conjugate_slope if spec.kind is SurrogateKind.SLOPE_ONLY else train_conjugate_linear
        return trainer(data, s.get('prior_mu', 0.0), s.get('prior_sigma', 10.0), s.get('sigma_a', 0.1),
                       n_samples=s.get('n_draws', config.n_chains * config.n_post), rng=rng.child(1), spec=spec)
    return train_mcmc(spec, data, config, rng.child(1), sigma_a_fixed=s.get('sigma_a'))


def run_two_step(cfg, rng, out):
    """case2-logistic, case2-pce e case3-sir: T-step por MCMC, I-step pelos métodos pedidos"""
    simulator = build_simulator(cfg)
    propagate = cfg.surrogate.get('propagate_sigma_a', False)
    spec = build_surrogate(cfg, simulator, sample_sigma_a=propagate)
    priors = build_priors(cfg)
    config = sampler_config(cfg)
    istep = cfg.istep
    repetitions = istep.get('repetitions', 1)
    level = istep.get('level', 0.95)
    log = DiagnosticsLog()
    summary = {'cells': {}}

    for a, n_t in enumerate(_n_t_values(cfg, default=38 if simulator.kind is SimulatorKind.SIR else 5)):
        t_dir = Path(out) / f"n_t_{n_t}"
        tpost = _train(cfg, spec, simulator, n_t, config, rng.child(0, a))
        save_tposterior(tpost, t_dir / 'tposterior.csv')
        log.add(f"n_t={n_t}/tstep", tpost.provenance)
        if simulator.kind is not SimulatorKind.SIR:
            grid = np.linspace(-1.0, 1.0, 201)
            write_tpredictive(t_dir / 'tpredictive.csv', grid, tpredictive(tpost, grid, rng.child(1, a)))

        source = tpost
        if cfg.surrogate.get('n_clusters'):
            source = cluster_draws(tpost, cfg.surrogate['n_clusters'], rng.child(2, a))

        for b, omega_star in enumerate(_omega_star_values(cfg)):
            cell_key = f"n_t={n_t}/omega={_label(omega_star)}"
            cell_dir = t_dir / f"omega_{_label(omega_star)}"
            cell = {'omega_star': omega_star.tolist(), 'methods': {}}
            for r in range(repetitions):
                rep_rng = rng.child(3, a, b, r)
                measurements = generate_measurements(simulator, omega_star, _noise(cfg), istep.get('n_i', 5),
                                                     rep_rng.child(0))
                rep_dir = cell_dir if repetitions == 1 else cell_dir / f"rep_{r}"
                for j, method in enumerate(methods(cfg)):
                    ipost = infer(method, spec, source, measurements, priors, config, rep_rng.child(1, j),
                                  propagate_sigma_a=propagate, n_jobs=cfg.n_jobs,
                                  component_config=epost_config(cfg))
                    write_iposterior(rep_dir / f"iposterior_{method.label}.csv", ipost)
                    log.add(f"{cell_key}/rep={r}/{method.label}", ipost.diagnostics)
                    omega_draws = ipost.omega(priors.dim_omega)
                    entry = cell['methods'].setdefault(method.label, {'moments': [], 'covered': [],
                                                                      'sharpness': []})
                    entry['moments'].append(_moments(omega_draws))
                    entry['covered'].append(bool(joint_credible_contains(omega_draws, omega_star, level)))
                    entry['sharpness'].append([sharpness(omega_draws[:, d]) for d in range(omega_draws.shape[1])])

                if simulator.kind is not SimulatorKind.SIR and istep.get('noise', 'normal') == 'normal':
                    reference = infer_simulator(simulator, measurements, priors, config, rep_rng.child(2))
                    write_iposterior(rep_dir / 'iposterior_simulator.csv', reference)
                    cell.setdefault('simulator', []).append(_moments(reference.omega(priors.dim_omega)))

            for entry in cell['methods'].values():
                entry['coverage'] = float(np.mean(entry['covered']))
            summary['cells'][cell_key] = cell
            logger.info(f"✅ {cfg.experiment} {cell_key} concluído")

    return summary, log


# ===================================
# SBC
# ===================================

def run_sbc(cfg, rng, out):
    """SBC por (método, N_T), com log γ, limiar, envelope e nitidez"""
    simulator = build_simulator(cfg)
    propagate = cfg.surrogate.get('propagate_sigma_a', False)
    spec = build_surrogate(cfg, simulator, sample_sigma_a=propagate)
    priors = build_priors(cfg)
    config = sampler_config(cfg)
    sbc = cfg.sbc
    log = DiagnosticsLog()
    summary = {}

    for j, method in enumerate(methods(cfg)):
        for a, n_t in enumerate(_n_t_values(cfg)):
            sbc_cfg = SbcConfig(
                simulator=simulator,
                surrogate=spec,
                priors=priors,
                method=method,
                n_t=n_t,
                n_i=cfg.istep.get('n_i', 5),
                n_t_trials=sbc['n_t_trials'],
                n_i_trials=sbc['n_i_trials'],
                k_eff=sbc['k_eff'],
                tstep_method=cfg.surrogate.get('tstep', 'mcmc'),
                tstep_config=config,
                istep_config=config,
                sigma_a_fixed=cfg.surrogate.get('sigma_a'),
                n_clusters=cfg.surrogate.get('n_clusters'),
                propagate_sigma_a=propagate,
                noise_phi=cfg.istep.get('phi') if cfg.istep.get('noise') == 'negbin' else None,
                cheat=sbc['cheat'],
                n_jobs=cfg.n_jobs,
            )
            cell_rng = rng.child(j, a)
            result = sbc_run(sbc_cfg, cell_rng.child(0))
            cell_dir = Path(out) / method.label / f"n_t_{n_t}"
            write_sbc_records(cell_dir / 'sbc_records.csv', result.records)
            cell = summarize_sbc(result, sbc['k_eff'], sbc['confidence'], sbc['n_sim'], cell_rng.child(1),
                                 names=priors.all_names())
            for d, name in enumerate(priors.all_names()):
                envelope = ecdf_envelope(result.ranks(d), sbc['k_eff'], sbc['confidence'], sbc['n_sim'],
                                         cell_rng.child(1).child(d))
                write_envelope(cell_dir / f"envelope_{name}.csv", envelope)
            for record in result.records:
                log.add(f"{method.label}/n_t={n_t}/{record.t_trial}.{record.i_trial}",
                        {'status': record.status, 'rhat_max': record.rhat_max})
            summary.setdefault(method.label, {})[str(n_t)] = cell
            logger.info(f"📊 SBC {method.label} N_T={n_t}: " + ", ".join(
                f"{k} log γ={v['log_gamma']:.2f} (limiar {v['log_gamma_threshold']:.2f})"
                for k, v in cell['dims'].items()))

    write_json(Path(out) / 'sbc_summary.json', summary)
    return summary, log


# ===================================
# Tempos
# ===================================

def run_timing(cfg, rng, out):
    """
    Tempo de amostragem por (método, d, L) com surrogate PCE

    E-Post faz o aquecimento completo por componente e amostra post/L
    iterações em cada um.
    """
    simulator = build_simulator(cfg)
    priors = build_priors(cfg)
    config = sampler_config(cfg)
    timing = cfg.timing
    n_t = timing.get('n_t', 10)
    log = DiagnosticsLog()
    rows = []

    degrees = timing.get('degrees', [2])
    clusters = timing.get('clusters', [2, 25])
    progress = ProgressTracker(len(degrees) * len(clusters), "Tempos")
    step = 0
    for a, degree in enumerate(degrees):
        spec = pce_surrogate_spec(1, degree, prior_std=cfg.surrogate.get('prior_sigma', 5.0))
        data = generate_training_data(simulator, halton_design_1d(n_t), simulator.sigma_s, rng.child(0, a))
        tpost = train_mcmc(spec, data, config, rng.child(1, a), sigma_a_fixed=cfg.surrogate.get('sigma_a'))
        measurements = generate_measurements(simulator, _omega_star_values(cfg)[0], _noise(cfg),
                                             cfg.istep.get('n_i', 5), rng.child(2, a))
        for b, n_clusters in enumerate(clusters):
            source = cluster_draws(tpost, min(n_clusters, tpost.n_draws), rng.child(3, a, b))
            for j, method in enumerate(methods(cfg)):
                component_config = None
                if method.kind is UpMethodKind.EPOST:
                    component_config = SamplerConfig(config.n_chains, config.n_warmup,
                                                     max(1, config.n_post // source.n_clusters))
                start = time.perf_counter()
                ipost = infer(method, spec, source, measurements, priors, config, rng.child(4, a, b, j),
                              component_config=component_config)
                seconds = time.perf_counter() - start
                log.add(f"d={degree}/L={n_clusters}/{method.label}", ipost.diagnostics)
                rows.append([method.label, degree, source.n_clusters, seconds])
            step += 1
            progress.update(step)

    progress.finish()
    write_csv(Path(out) / 'timing.csv', ['method', 'degree', 'n_clusters', 'seconds'], rows)
    summary = {'rows': [dict(zip(['method', 'degree', 'n_clusters', 'seconds'], r)) for r in rows]}
    return summary, log


RUNNERS = {
    'case1': run_case1,
    'counterexample': run_counterexample,
    'case2-logistic': run_two_step,
    'case2-pce': run_two_step,
    'case3-sir': run_two_step,
    'sbc': run_sbc,
    'timing': run_timing,
}


def provenance(cfg, started, duration, diagnostics=None):
    return {
        'experiment': cfg.experiment,
        'config_source': cfg.source,
        'config_hash': cfg.config_hash(),
        'config': cfg.to_dict(),
        'seed': cfg.seed,
        'started': started,
        'duration_s': duration,
        'versions': {'numpy': np.__version__, 'scipy': scipy.__version__},
        'system': get_system_info(),
        'metrics': metrics_collector.get_metrics(),
        'diagnostics': diagnostics,
    }


def run_experiment(cfg, runner=None):
    """
    Executar um experimento e gravar summary.json e provenance.json

    Raises:
        DiagnosticError: algum ajuste com R̂ acima do limiar (saídas já gravadas)
    """
    runner = runner or RUNNERS[cfg.experiment]
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = Rng(cfg.seed)
    started = time.strftime('%Y-%m-%dT%H:%M:%S')
    start = time.perf_counter()
    logger.info(f"🎯 Iniciando {cfg.experiment} (seed {cfg.seed}) → {out}")

    summary, log = runner(cfg, rng, out)
    write_json(out / 'summary.json', summary)
    write_json(out / 'provenance.json', provenance(cfg, started, time.perf_counter() - start, log.to_dict()))

    if log.failed:
        labels = ', '.join(e['label'] for e in log.failed[:5])
        raise DiagnosticError(f"{len(log.failed)} ajustes reprovados no diagnóstico de convergência: {labels}")
    logger.info(f"✅ {cfg.experiment} concluído em {time.perf_counter() - start:.1f}s")
    return summary
