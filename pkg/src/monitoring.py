#!/usr/bin/env python3
# src/monitoring.py

import os
import platform
import threading
import time
import logging
from collections import deque
from datetime import datetime

import numpy as np

try:
    import psutil
except ImportError:  # métricas de sistema são opcionais
    psutil = None

from config import Config

logger = logging.getLogger(__name__)


class MetricsCollector:
    """Coletor de métricas das execuções de amostragem"""

    def __init__(self):
        self.metrics = {
            'runs_total': 0,
            'runs_success': 0,
            'runs_failed': 0,
            'run_times': deque(maxlen=1000),
            'acceptance_rates': deque(maxlen=1000),
            'rhat_max': deque(maxlen=1000),
            'start_time': time.time(),
        }
        self.by_label = {}

        # Lock para thread safety
        self._lock = threading.Lock()

    def record_run(self, label, success=True, run_time=None, acceptance=None, rhat_max=None):
        """Registrar uma execução de amostrador"""
        with self._lock:
            self.metrics['runs_total'] += 1
            entry = self.by_label.setdefault(label, {'count': 0, 'failed': 0, 'time': 0.0})
            entry['count'] += 1

            if success:
                self.metrics['runs_success'] += 1
                if run_time is not None:
                    self.metrics['run_times'].append(run_time)
                    entry['time'] += run_time
                if acceptance is not None:
                    self.metrics['acceptance_rates'].append(float(np.mean(acceptance)))
                if rhat_max is not None and np.isfinite(rhat_max):
                    self.metrics['rhat_max'].append(float(rhat_max))
            else:
                self.metrics['runs_failed'] += 1
                entry['failed'] += 1

    def get_metrics(self):
        """Obter todas as métricas"""
        with self._lock:
            times = list(self.metrics['run_times'])
            rates = list(self.metrics['acceptance_rates'])
            rhats = list(self.metrics['rhat_max'])
            total = self.metrics['runs_total']

            return {
                'uptime_seconds': time.time() - self.metrics['start_time'],
                'runs': {
                    'total': total,
                    'success': self.metrics['runs_success'],
                    'failed': self.metrics['runs_failed'],
                    'success_rate': (self.metrics['runs_success'] / max(1, total)) * 100,
                },
                'run_time': _stats(times),
                'acceptance': _stats(rates),
                'rhat_max': max(rhats) if rhats else None,
                'by_label': {k: dict(v) for k, v in sorted(self.by_label.items())},
            }

    def reset(self):
        with self._lock:
            self.__init__()


def _stats(values):
    if not values:
        return {}
    return {
        'avg': sum(values) / len(values),
        'min': min(values),
        'max': max(values),
        'count': len(values),
    }


class DiagnosticsChecker:
    """Verificador de diagnósticos de convergência com limiares de aviso/erro"""

    def __init__(self):
        self.checks = []

    def add_check(self, name, check_func, warning_threshold=None, error_threshold=None,
                  lower_warning=None):
        """Adicionar verificação (valor acima do limiar = problema)"""
        self.checks.append({
            'name': name,
            'func': check_func,
            'warning_threshold': warning_threshold,
            'error_threshold': error_threshold,
            'lower_warning': lower_warning,
        })

    def run_checks(self):
        """Executar todas as verificações"""
        results = {
            'status': 'healthy',
            'checks': [],
        }

        for check in self.checks:
            try:
                value = check['func']()
                status = 'healthy'
                message = 'OK'

                if value is None or (isinstance(value, float) and np.isnan(value)):
                    status = 'warning'
                    message = 'Valor degenerado'
                    if results['status'] == 'healthy':
                        results['status'] = 'warning'
                elif check['error_threshold'] is not None and value > check['error_threshold']:
                    status = 'error'
                    message = f"Valor {value:.4g} acima do limite crítico {check['error_threshold']}"
                    results['status'] = 'error'
                elif ((check['warning_threshold'] is not None and value > check['warning_threshold'])
                      or (check['lower_warning'] is not None and value < check['lower_warning'])):
                    status = 'warning'
                    message = f"Valor {value:.4g} fora da faixa de aviso"
                    if results['status'] == 'healthy':
                        results['status'] = 'warning'

                results['checks'].append({
                    'name': check['name'],
                    'status': status,
                    'value': None if value is None else float(value),
                    'message': message,
                })

            except Exception as e:
                results['checks'].append({
                    'name': check['name'],
                    'status': 'error',
                    'value': None,
                    'message': f"Erro na verificação: {e}",
                })
                results['status'] = 'error'

        return results


def chain_diagnostics(rhat, acceptance, rhat_threshold=None):
    """
    Avaliar R̂ e taxas de aceitação de uma execução

    Args:
        rhat: array de R̂ por parâmetro (NaN = degenerado)
        acceptance: taxas de aceitação por cadeia
        rhat_threshold: limiar de erro (padrão Config.RHAT_THRESHOLD)

    Returns:
        dict: status agregado e checks individuais
    """
    threshold = Config.RHAT_THRESHOLD if rhat_threshold is None else rhat_threshold
    rhat = np.atleast_1d(np.asarray(rhat, dtype=float)) if rhat is not None else np.array([])
    finite = rhat[~np.isnan(rhat)]

    checker = DiagnosticsChecker()
    if finite.size:
        checker.add_check('rhat_max', lambda: float(np.max(finite)),
                          warning_threshold=Config.RHAT_WARNING, error_threshold=threshold)
    lo, hi = Config.ACCEPTANCE_BOUNDS
    if acceptance is not None and len(acceptance):
        acc = np.asarray(acceptance, dtype=float)
        checker.add_check('acceptance_min', lambda: float(np.min(acc)), lower_warning=lo)
        checker.add_check('acceptance_max', lambda: float(np.max(acc)), warning_threshold=hi)
    return checker.run_checks()


def get_system_info():
    """Obter informações do sistema para a proveniência"""
    info = {
        'platform': platform.platform(),
        'python_version': platform.python_version(),
        'cpu_count': os.cpu_count(),
        'timestamp': datetime.now().isoformat(),
    }
    if psutil is not None:
        try:
            info['memory_gb'] = round(psutil.virtual_memory().total / (1024 ** 3), 2)
        except Exception as e:
            logger.warning(f"⚠️ Erro ao obter métricas do sistema: {e}")
    return info


# Instância global
metrics_collector = MetricsCollector()
