#!/usr/bin/env python3
# src/cli.py

"""
Ponto de entrada de linha de comando

    python src/cli.py run config/case1.toml
    python src/cli.py sbc config/sbc.toml --jobs 4
    python src/cli.py timing config/timing.toml --out outputs/timing

Códigos de saída: 0 sucesso, 2 configuração inválida, 3 falha numérica,
4 diagnóstico de convergência reprovado (saídas parciais gravadas).
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from config import get_config
from experiment_config import load_experiment_config
from experiments import run_experiment, run_sbc, run_timing
from monitoring import metrics_collector
from utils import SurrogateInferenceError, setup_logging, write_json

logger = logging.getLogger(__name__)

COMMANDS = {
    'run': None,
    'sbc': run_sbc,
    'timing': run_timing,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog='surrogate-inference',
        description='Inferência bayesiana em dois passos com surrogates (T-step + I-step)',
    )
    sub = parser.add_subparsers(dest='command', required=True)
    for name, help_text in (
        ('run', 'Executar o experimento descrito no arquivo de configuração'),
        ('sbc', 'Executar calibração baseada em simulação (SBC)'),
        ('timing', 'Medir tempos de amostragem por método/grau/clusters'),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument('config', help='Arquivo TOML do experimento')
        cmd.add_argument('--seed', type=int, default=None, help='Semente (sobrepõe a do arquivo)')
        cmd.add_argument('--jobs', type=int, default=None, help='Número de workers paralelos')
        cmd.add_argument('--out', default=None, help='Diretório de saída')
    return parser


def error_payload(error):
    exit_code = getattr(error, 'exit_code', None)
    if exit_code is None:
        exit_code = 3 if isinstance(error, (ArithmeticError, np.linalg.LinAlgError)) else 1
    return {'error': str(error), 'type': type(error).__name__, 'exit_code': exit_code}


def _report_error(error, out_dir=None):
    payload = error_payload(error)
    print(json.dumps(payload, ensure_ascii=False))
    # Erros de configuração não deixam arquivos para trás
    if out_dir is not None and Path(out_dir).is_dir():
        write_json(Path(out_dir) / 'error.json', payload)
    return payload['exit_code']


def main(argv=None):
    args = build_parser().parse_args(argv)
    app_config = get_config()
    setup_logging(app_config)

    cfg = None
    try:
        cfg = load_experiment_config(args.config)
        cfg = cfg.with_overrides(seed=args.seed, n_jobs=args.jobs, output_dir=args.out)
        runner = COMMANDS[args.command]
        if args.command == 'sbc' and cfg.experiment != 'sbc':
            logger.warning(f"⚠️ Experimento '{cfg.experiment}' executado como SBC")
        if args.command == 'timing' and cfg.experiment != 'timing':
            logger.warning(f"⚠️ Experimento '{cfg.experiment}' executado como timing")
        run_experiment(cfg, runner=runner)
    except SurrogateInferenceError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return _report_error(e, None if cfg is None else cfg.output_dir)
    except Exception as e:
        logger.exception(f"❌ Erro inesperado: {e}")
        return _report_error(e, None if cfg is None else cfg.output_dir)

    metrics = metrics_collector.get_metrics()
    runs = metrics['runs']
    if runs['total']:
        logger.info(f"📊 Execuções do amostrador: {runs['total']} (sucesso {runs['success_rate']:.1f}%)")
    return 0


if __name__ == '__main__':
    sys.exit(main())
