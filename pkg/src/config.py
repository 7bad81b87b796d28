#!/usr/bin/env python3
# src/config.py

import os
from pathlib import Path

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:  # python-dotenv é opcional em desenvolvimento
    pass


def _env_int(name, default):
    return int(os.getenv(name, default))


def _env_float(name, default):
    return float(os.getenv(name, default))


class Config:
    """Configurações centralizadas dos experimentos de inferência com surrogates"""

    # Diretórios
    PROJECT_ROOT = Path(__file__).parent.parent
    LOGS_DIR = PROJECT_ROOT / "logs"
    OUTPUT_DIR = Path(os.getenv('OUTPUT_DIR', str(PROJECT_ROOT / "results")))

    APP_ENV = os.getenv('APP_ENV', 'development')

    # Logs
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FILE = LOGS_DIR / os.getenv('LOG_FILE', 'surrogate.log')

    # Execução
    DEFAULT_SEED = _env_int('DEFAULT_SEED', 20240601)
    N_JOBS = _env_int('N_JOBS', 1)

    # MCMC (escala de bancada; execuções longas ajustam pelo TOML)
    MCMC_CHAINS = _env_int('MCMC_CHAINS', 4)
    MCMC_WARMUP = _env_int('MCMC_WARMUP', 500)
    MCMC_POST = _env_int('MCMC_POST', 500)
    RHAT_THRESHOLD = _env_float('RHAT_THRESHOLD', 1.05)
    RHAT_WARNING = _env_float('RHAT_WARNING', 1.01)
    ACCEPTANCE_BOUNDS = (0.1, 0.6)

    # SBC
    SBC_K_EFF = _env_int('SBC_K_EFF', 99)
    SBC_N_SIM = _env_int('SBC_N_SIM', 1000)
    SBC_T_TRIALS = _env_int('SBC_T_TRIALS', 5)
    SBC_I_TRIALS = _env_int('SBC_I_TRIALS', 10)
    SBC_CONFIDENCE = _env_float('SBC_CONFIDENCE', 0.95)

    # SIR (condições iniciais padrão)
    SIR_N_POP = _env_float('SIR_N_POP', 1000.0)
    SIR_I0 = _env_float('SIR_I0', 10.0)
    SIR_R0 = _env_float('SIR_R0', 0.0)

    @classmethod
    def validate(cls):
        """Validar configurações"""
        errors = []

        if cls.N_JOBS < 1:
            errors.append("N_JOBS deve ser pelo menos 1")

        for name in ('MCMC_CHAINS', 'MCMC_WARMUP', 'MCMC_POST', 'SBC_K_EFF',
                     'SBC_N_SIM', 'SBC_T_TRIALS', 'SBC_I_TRIALS'):
            if getattr(cls, name) < 1:
                errors.append(f"{name} deve ser pelo menos 1")

        if cls.RHAT_THRESHOLD <= 1.0:
            errors.append("RHAT_THRESHOLD deve ser maior que 1")

        if not (0.0 < cls.SBC_CONFIDENCE < 1.0):
            errors.append("SBC_CONFIDENCE deve estar em (0, 1)")

        if cls.SIR_I0 < 0 or cls.SIR_R0 < 0 or cls.SIR_I0 + cls.SIR_R0 > cls.SIR_N_POP:
            errors.append("Condições iniciais SIR inválidas (I0, R0 ≥ 0 e I0 + R0 ≤ N)")

        if cls.LOG_LEVEL.upper() not in ('DEBUG', 'INFO', 'WARNING', 'ERROR'):
            errors.append("LOG_LEVEL deve ser DEBUG, INFO, WARNING ou ERROR")

        if errors:
            raise ValueError("Erros de configuração:\n" + "\n".join(f"- {e}" for e in errors))

        return True

    @classmethod
    def ensure_directories(cls):
        """Garantir que diretórios necessários existem"""
        for directory in [cls.LOGS_DIR]:
            directory.mkdir(parents=True, exist_ok=True)

    @classmethod
    def get_summary(cls):
        """Obter resumo das configurações"""
        return {
            'environment': cls.APP_ENV,
            'log_level': cls.LOG_LEVEL,
            'default_seed': cls.DEFAULT_SEED,
            'n_jobs': cls.N_JOBS,
            'mcmc': {
                'chains': cls.MCMC_CHAINS,
                'warmup': cls.MCMC_WARMUP,
                'post': cls.MCMC_POST,
                'rhat_threshold': cls.RHAT_THRESHOLD,
            },
            'sbc': {
                'k_eff': cls.SBC_K_EFF,
                'n_sim': cls.SBC_N_SIM,
                't_trials': cls.SBC_T_TRIALS,
                'i_trials': cls.SBC_I_TRIALS,
            },
        }


class DevelopmentConfig(Config):
    """Configurações para desenvolvimento"""
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'DEBUG')


class ProductionConfig(Config):
    """Configurações para execuções longas"""
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')


# Mapping de configurações por ambiente
config_map = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'default': DevelopmentConfig
}


def get_config():
    """Obter configuração baseada no ambiente"""
    env = os.getenv('APP_ENV', 'development')
    config_class = config_map.get(env, config_map['default'])

    config_class.validate()
    config_class.ensure_directories()

    return config_class
