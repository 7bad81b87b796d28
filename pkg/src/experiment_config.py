#!/usr/bin/env python3
# src/experiment_config.py

"""
Configuração declarativa de experimentos (TOML)

O esquema é validado por completo antes de qualquer cômputo: chaves
desconhecidas, tipos errados, escalas não positivas e contagens < 1 são
acumulados e reportados juntos em ConfigSchemaError.
"""

import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from config import Config
from istep import IStepPriors, UpMethod
from mcmc import SamplerConfig
from prob_core import DistSpec, Family
from simulators import SimulatorKind, SimulatorSpec
from surrogates import (LikelihoodFamily, SurrogateKind, linear_surrogate_spec, logistic_surrogate_spec,
                        pce_surrogate_spec, slope_surrogate_spec)
from utils import ConfigSchemaError, DistributionError, hash_payload

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = ('case1', 'counterexample', 'case2-logistic', 'case2-pce', 'case3-sir', 'sbc', 'timing')

_NUMBER = (int, float)
_LIST = (list,)
_TABLE = (dict,)

# seção → chave → tipos aceitos
SCHEMA = {
    '': {
        'experiment': (str,), 'seed': (int,), 'output_dir': (str,), 'n_jobs': (int,), 'methods': _LIST,
        'description': (str,),
    },
    'mcmc': {'chains': (int,), 'warmup': (int,), 'post': (int,), 'init': (str,), 'epost_warmup': (int,),
             'epost_post': (int,)},
    'simulator': {
        'kind': (str,), 'a': _NUMBER, 'b': _NUMBER, 'c': _NUMBER, 'sigma_s': _NUMBER,
        'n_pop': _NUMBER, 'i0': _NUMBER, 'r0': _NUMBER, 'bounds': _LIST,
    },
    'training': {'inputs': _LIST, 'n_t': (int,), 'n_t_values': _LIST, 'design': (str,)},
    'surrogate': {
        'kind': (str,), 'tstep': (str,), 'prior_mu': _NUMBER, 'prior_sigma': _NUMBER, 'max_degree': (int,),
        'sigma_a': _NUMBER, 'sigma_a_values': _LIST, 'sigma_a_prior': _TABLE, 'likelihood': (str,),
        'propagate_sigma_a': (bool,), 'n_clusters': (int,), 'n_draws': (int,), 'source': (str,),
    },
    'istep': {
        'omega_star': _NUMBER + _LIST, 'omega_star_values': _LIST, 'n_i': (int,), 'y': _LIST,
        'sigma_i': _NUMBER, 'sigma_i_prior': _TABLE, 'omega_prior': _LIST + _TABLE, 'noise': (str,),
        'phi': _NUMBER, 'grid_points': (int,), 'literal_epost': (bool,), 'estimator': (str,),
        'repetitions': (int,), 'level': _NUMBER,
    },
    'sbc': {
        'n_t_trials': (int,), 'n_i_trials': (int,), 'k_eff': (int,), 'confidence': _NUMBER, 'n_sim': (int,),
        'cheat': (bool,),
    },
    'timing': {'degrees': _LIST, 'clusters': _LIST, 'n_t': (int,)},
}

_POSITIVE = {
    ('simulator', 'n_pop'), ('surrogate', 'prior_sigma'), ('surrogate', 'sigma_a'), ('istep', 'sigma_i'),
    ('istep', 'phi'),
}
_AT_LEAST_ONE = {
    ('', 'n_jobs'), ('mcmc', 'chains'), ('mcmc', 'post'), ('mcmc', 'epost_post'), ('training', 'n_t'),
    ('surrogate', 'n_clusters'), ('surrogate', 'n_draws'), ('surrogate', 'max_degree'), ('istep', 'grid_points'),
    ('istep', 'repetitions'), ('sbc', 'n_t_trials'), ('sbc', 'n_i_trials'), ('sbc', 'k_eff'), ('sbc', 'n_sim'),
    ('timing', 'n_t'),
}
_NON_NEGATIVE = {
    ('', 'seed'), ('mcmc', 'warmup'), ('mcmc', 'epost_warmup'), ('simulator', 'sigma_s'), ('istep', 'n_i'),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Configuração validada; as seções ficam como dicts com defaults aplicados"""

    experiment: str
    seed: int
    output_dir: str
    n_jobs: int = 1
    methods: tuple = ('point', 'epost', 'elik', 'eloglik')
    description: str = ''
    mcmc: dict = field(default_factory=dict)
    simulator: dict = field(default_factory=dict)
    training: dict = field(default_factory=dict)
    surrogate: dict = field(default_factory=dict)
    istep: dict = field(default_factory=dict)
    sbc: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    source: str = None

    def to_dict(self):
        return {
            'experiment': self.experiment, 'seed': self.seed, 'output_dir': self.output_dir,
            'n_jobs': self.n_jobs, 'methods': list(self.methods), 'description': self.description,
            'mcmc': self.mcmc, 'simulator': self.simulator, 'training': self.training,
            'surrogate': self.surrogate, 'istep': self.istep, 'sbc': self.sbc, 'timing': self.timing,
        }

    def config_hash(self):
        return hash_payload(self.to_dict())

    def with_overrides(self, seed=None, n_jobs=None, output_dir=None):
        """Cópia com --seed/--jobs/--out da linha de comando aplicados"""
        payload = self.to_dict()
        if seed is not None:
            payload['seed'] = int(seed)
        if n_jobs is not None:
            payload['n_jobs'] = int(n_jobs)
        if output_dir is not None:
            payload['output_dir'] = str(output_dir)
        return parse_experiment_config(payload, source=self.source)


# ===================================
# Validação
# ===================================

def parse_distribution(table):
    """{family = "TruncatedNormal", mu = 0, sigma = 0.5, lo = -1, hi = 1} → DistSpec"""
    table = dict(table)
    family = table.pop('family', None)
    if family is None:
        raise DistributionError("distribuição sem 'family'")
    allowed = {'mu', 'sigma', 'lo', 'hi', 'phi'}
    unknown = set(table) - allowed
    if unknown:
        raise DistributionError(f"chaves desconhecidas na distribuição: {sorted(unknown)}")
    return DistSpec(Family(family), **{k: float(v) for k, v in table.items()})


def _check_types(payload, errors):
    for section, keys in SCHEMA.items():
        values = payload if section == '' else payload.get(section, {})
        if section and not isinstance(values, dict):
            errors.append(f"[{section}] deve ser uma tabela")
            continue
        for key, value in values.items():
            if section == '' and key in SCHEMA:
                continue
            name = f"{section}.{key}" if section else key
            if key not in keys:
                errors.append(f"chave desconhecida: {name}")
                continue
            types = keys[key]
            if isinstance(value, bool) and bool not in types:
                errors.append(f"{name}: tipo inválido ({type(value).__name__})")
            elif not isinstance(value, types):
                errors.append(f"{name}: tipo inválido ({type(value).__name__})")
            elif (section, key) in _POSITIVE and not value > 0:
                errors.append(f"{name} deve ser positivo (recebido {value})")
            elif (section, key) in _AT_LEAST_ONE and value < 1:
                errors.append(f"{name} deve ser ≥ 1 (recebido {value})")
            elif (section, key) in _NON_NEGATIVE and value < 0:
                errors.append(f"{name} deve ser não negativo (recebido {value})")


def _check_semantics(payload, errors):
    kind = payload.get('experiment')
    if kind not in EXPERIMENT_KINDS:
        errors.append(f"experiment deve ser um de {list(EXPERIMENT_KINDS)} (recebido {kind!r})")

    for method in payload.get('methods', []):
        try:
            UpMethod.parse(method)
        except DistributionError as e:
            errors.append(str(e))

    simulator = payload.get('simulator', {})
    if 'kind' in simulator and simulator['kind'] not in [k.value for k in SimulatorKind]:
        errors.append(f"simulator.kind desconhecido: {simulator['kind']}")

    surrogate = payload.get('surrogate', {})
    if 'kind' in surrogate and surrogate['kind'] not in [k.value for k in SurrogateKind]:
        errors.append(f"surrogate.kind desconhecido: {surrogate['kind']}")
    if surrogate.get('tstep', 'mcmc') not in ('mcmc', 'conjugate'):
        errors.append(f"surrogate.tstep deve ser 'mcmc' ou 'conjugate' (recebido {surrogate['tstep']!r})")
    if surrogate.get('source', 'quadrature') not in ('quadrature', 'draws'):
        errors.append(f"surrogate.source deve ser 'quadrature' ou 'draws' (recebido {surrogate['source']!r})")
    if 'likelihood' in surrogate and surrogate['likelihood'] not in [f.value for f in LikelihoodFamily]:
        errors.append(f"surrogate.likelihood desconhecida: {surrogate['likelihood']}")
    for value in surrogate.get('sigma_a_values', []):
        if not isinstance(value, _NUMBER) or not value > 0:
            errors.append(f"surrogate.sigma_a_values deve conter escalas positivas (recebido {value})")

    training = payload.get('training', {})
    for value in training.get('n_t_values', []):
        if not isinstance(value, int) or value < 1:
            errors.append(f"training.n_t_values deve conter inteiros ≥ 1 (recebido {value})")
    if training.get('design', 'halton') not in ('halton', 'sobol'):
        errors.append(f"training.design deve ser 'halton' ou 'sobol' (recebido {training['design']!r})")

    istep = payload.get('istep', {})
    if istep.get('noise', 'normal') not in ('normal', 'negbin', 'none'):
        errors.append(f"istep.noise deve ser 'normal', 'negbin' ou 'none' (recebido {istep['noise']!r})")
    if istep.get('estimator', 'mean') not in ('mean', 'median', 'mode'):
        errors.append(f"istep.estimator desconhecido: {istep['estimator']}")
    level = istep.get('level', 0.95)
    if not 0 < level < 1:
        errors.append(f"istep.level deve estar em (0, 1) (recebido {level})")
    prior = istep.get('omega_prior', [])
    for table in [prior] if isinstance(prior, dict) else prior:
        try:
            parse_distribution(table)
        except (DistributionError, ValueError, TypeError) as e:
            errors.append(f"istep.omega_prior: {e}")
    for section, key in (('istep', 'sigma_i_prior'), ('surrogate', 'sigma_a_prior')):
        table = payload.get(section, {}).get(key)
        if table is not None:
            try:
                parse_distribution(table)
            except (DistributionError, ValueError, TypeError) as e:
                errors.append(f"{section}.{key}: {e}")

    confidence = payload.get('sbc', {}).get('confidence', 0.95)
    if not 0 < confidence < 1:
        errors.append(f"sbc.confidence deve estar em (0, 1) (recebido {confidence})")

    for value in payload.get('timing', {}).get('clusters', []):
        if not isinstance(value, int) or value < 1:
            errors.append(f"timing.clusters deve conter inteiros ≥ 1 (recebido {value})")


def parse_experiment_config(payload, source=None):
    """Validar um dict (já lido do TOML) e devolver ExperimentConfig"""
    errors = []
    _check_types(payload, errors)
    if not errors:
        _check_semantics(payload, errors)
    if errors:
        raise ConfigSchemaError("Erros de configuração:\n" + "\n".join(f"- {e}" for e in errors))

    kind = payload['experiment']
    return ExperimentConfig(
        experiment=kind,
        seed=int(payload.get('seed', Config.DEFAULT_SEED)),
        output_dir=str(payload.get('output_dir', Path(Config.OUTPUT_DIR) / kind)),
        n_jobs=int(payload.get('n_jobs', Config.N_JOBS)),
        methods=tuple(payload.get('methods', ('point', 'epost', 'elik', 'eloglik'))),
        description=payload.get('description', ''),
        mcmc={'chains': Config.MCMC_CHAINS, 'warmup': Config.MCMC_WARMUP, 'post': Config.MCMC_POST,
              'init': 'prior', **payload.get('mcmc', {})},
        simulator=dict(payload.get('simulator', {})),
        training=dict(payload.get('training', {})),
        surrogate=dict(payload.get('surrogate', {})),
        istep=dict(payload.get('istep', {})),
        sbc={'n_t_trials': Config.SBC_T_TRIALS, 'n_i_trials': Config.SBC_I_TRIALS, 'k_eff': Config.SBC_K_EFF,
             'confidence': Config.SBC_CONFIDENCE, 'n_sim': Config.SBC_N_SIM, 'cheat': False,
             **payload.get('sbc', {})},
        timing=dict(payload.get('timing', {})),
        source=None if source is None else str(source),
    )


def load_experiment_config(path):
    """Ler e validar um arquivo TOML de experimento"""
    path = Path(path)
    try:
        with open(path, 'rb') as f:
            payload = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigSchemaError(f"Arquivo de configuração não encontrado: {path}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigSchemaError(f"TOML inválido em {path}: {e}")
    cfg = parse_experiment_config(payload, source=path)
    logger.info(f"📋 Configuração carregada: {path} ({cfg.experiment}, hash {cfg.config_hash()})")
    return cfg


# ===================================
# Construtores de objetos de domínio
# ===================================

def sampler_config(cfg):
    m = cfg.mcmc
    return SamplerConfig(n_chains=m['chains'], n_warmup=m['warmup'], n_post=m['post'], init=m['init'])


def build_simulator(cfg):
    s = cfg.simulator
    kind = SimulatorKind(s.get('kind', 'linear'))
    return SimulatorSpec(
        kind,
        a=float(s.get('a', 0.5)),
        b=float(s.get('b', 2.0)),
        c=float(s.get('c', 1.0)),
        sigma_s=float(s.get('sigma_s', 0.0)),
        n_pop=s.get('n_pop'),
        i0=s.get('i0'),
        r0=s.get('r0'),
        bounds=s.get('bounds'),
    )


def build_surrogate(cfg, simulator=None, sample_sigma_a=False):
    """
    SurrogateSpec a partir de [surrogate]

    Com sample_sigma_a (σ_A propagado ao I-step) a prior de σ_A é obrigatória.
    """
    s = cfg.surrogate
    kind = SurrogateKind(s.get('kind', 'linear_lm'))
    sigma_a_prior = parse_distribution(s['sigma_a_prior']) if 'sigma_a_prior' in s else None
    if sample_sigma_a and sigma_a_prior is None:
        raise ConfigSchemaError("surrogate.sigma_a_prior é obrigatório para propagar σ_A")

    if kind is SurrogateKind.LINEAR_LM:
        return linear_surrogate_spec(s.get('prior_mu', 0.0), s.get('prior_sigma', 10.0))
    if kind is SurrogateKind.SLOPE_ONLY:
        return slope_surrogate_spec(s.get('prior_mu', 0.0), s.get('prior_sigma', 10.0))
    if kind is SurrogateKind.LOGISTIC_PARAM:
        return logistic_surrogate_spec(sigma_a_prior)

    simulator = simulator or build_simulator(cfg)
    sir = simulator.kind is SimulatorKind.SIR
    return pce_surrogate_spec(
        input_dim=simulator.input_dim,
        max_degree=s.get('max_degree', 5),
        prior_std=s.get('prior_sigma', 5.0),
        sigma_a_prior=sigma_a_prior,
        likelihood_family=LikelihoodFamily(s.get('likelihood', 'Normal')),
        input_bounds=simulator.bounds if sir else None,
    )


def build_priors(cfg):
    i = cfg.istep
    prior = i.get('omega_prior', [{'family': 'Normal', 'mu': 0.0, 'sigma': 1.0}])
    tables = [prior] if isinstance(prior, dict) else prior
    omega = [parse_distribution(t) for t in tables]
    if 'sigma_i_prior' in i:
        sigma_i = parse_distribution(i['sigma_i_prior'])
    else:
        sigma_i = float(i.get('sigma_i', 0.1))
    names = ['beta', 'gamma'] if len(omega) == 2 and cfg.simulator.get('kind') == 'sir' else None
    return IStepPriors(omega=omega, sigma_i=sigma_i, names=names)


def methods(cfg):
    return [UpMethod.parse(m) for m in cfg.methods]


def epost_config(cfg):
    """Configuração por componente do E-Post ([mcmc] epost_warmup/epost_post), ou None"""
    m = cfg.mcmc
    if 'epost_warmup' not in m and 'epost_post' not in m:
        return None
    return SamplerConfig(n_chains=m['chains'], n_warmup=m.get('epost_warmup', m['warmup']),
                         n_post=m.get('epost_post', m['post']), init=m['init'])
