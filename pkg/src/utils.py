#!/usr/bin/env python3
# src/utils.py

import csv
import hashlib
import json
import logging
import threading
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from functools import wraps
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


# ===================================
# Exceções
# ===================================

class SurrogateInferenceError(Exception):
    """Erro base do pacote"""
    exit_code = 3


class DistributionError(SurrogateInferenceError, ValueError):
    """Parâmetros de distribuição inválidos (detectados na construção)"""


class SamplerError(SurrogateInferenceError):
    """Falha do amostrador MCMC (NaN, inicialização impossível)"""


class QuadratureError(SurrogateInferenceError):
    """Quadratura numérica não convergiu"""


class SolverError(SurrogateInferenceError):
    """Falha do integrador de EDO"""


class ConfigSchemaError(SurrogateInferenceError, ValueError):
    """Configuração de experimento inválida"""
    exit_code = 2


class DiagnosticError(SurrogateInferenceError):
    """Diagnóstico de convergência reprovado (saídas parciais existem)"""
    exit_code = 4


# ===================================
# Logging
# ===================================

def setup_logging(config):
    """Configurar logging do console e do arquivo de log"""
    config.ensure_directories()
    handlers = [logging.StreamHandler()]
    try:
        handlers.append(logging.FileHandler(config.LOG_FILE, encoding='utf-8'))
    except OSError as e:
        print(f"⚠️ Não foi possível abrir o arquivo de log {config.LOG_FILE}: {e}")

    logging.basicConfig(
        level=getattr(logging, str(config.LOG_LEVEL).upper(), logging.INFO),
        format='%(asctime)s [%(levelname)s] %(name)s: %(message)s',
        handlers=handlers,
        force=True,
    )


def timer(func):
    """Decorator para medir tempo de execução de funções"""
    @wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        result = func(*args, **kwargs)
        execution_time = time.perf_counter() - start_time
        logger.debug(f"⏱️ {func.__name__} executado em {execution_time:.3f}s")
        return result
    return wrapper


def format_duration(seconds):
    """Formatar duração em formato MM:SS"""
    if seconds < 60:
        return f"{seconds:.1f}s"

    minutes = int(seconds // 60)
    seconds = seconds % 60
    return f"{minutes}:{seconds:04.1f}"


class ProgressTracker:
    """Rastrear progresso de operações longas (SBC, ajustes E-Post)"""

    def __init__(self, total_steps, description="Processando", log_every=1):
        self.total_steps = max(1, int(total_steps))
        self.current_step = 0
        self.description = description
        self.log_every = max(1, int(log_every))
        self.start_time = time.perf_counter()
        # update() é chamado das threads de run_jobs
        self._lock = threading.Lock()

    def update(self, step=None, message=None):
        """Atualizar progresso; registra a cada log_every passos e no último"""
        with self._lock:
            if step is not None:
                self.current_step = step
            else:
                self.current_step += 1
            current = self.current_step

        percentage = (current / self.total_steps) * 100
        if current % self.log_every and current < self.total_steps:
            return percentage
        elapsed = time.perf_counter() - self.start_time

        if current > 0:
            eta = (elapsed / current) * (self.total_steps - current)
            eta_str = f"ETA: {eta:.1f}s"
        else:
            eta_str = "ETA: --"

        status_msg = f"{self.description}: {percentage:.1f}% ({current}/{self.total_steps}) - {eta_str}"
        if message:
            status_msg += f" - {message}"

        logger.info(status_msg)
        return percentage

    def finish(self, message="Concluído"):
        """Finalizar progresso"""
        elapsed = time.perf_counter() - self.start_time
        logger.info(f"{self.description}: {message} em {format_duration(elapsed)}")


# ===================================
# Hashes de proveniência
# ===================================

def hash_array(*arrays):
    """Hash SHA-256 curto e estável de arrays numéricos"""
    digest = hashlib.sha256()
    for array in arrays:
        if array is None:
            digest.update(b"none")
            continue
        data = np.ascontiguousarray(np.asarray(array, dtype=float))
        digest.update(str(data.shape).encode())
        digest.update(data.tobytes())
    return digest.hexdigest()[:16]


def hash_payload(payload):
    """Hash de um objeto serializável em JSON (chaves ordenadas)"""
    text = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()[:16]


# ===================================
# CSV / JSON
# ===================================

def _format_cell(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows):
    """Escrever CSV com cabeçalho, separador decimal '.', UTF-8"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])
    logger.debug(f"💾 CSV salvo: {path}")
    return path


def read_csv(path):
    """Ler CSV escrito por write_csv: devolve (header, linhas como strings)"""
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [row for row in reader]
    return header, rows


def read_numeric_csv(path):
    """Ler CSV puramente numérico: devolve (header, matriz float)"""
    header, rows = read_csv(path)
    matrix = np.array([[float(v) for v in row] for row in rows], dtype=float)
    if matrix.size == 0:
        matrix = np.zeros((0, len(header)))
    return header, matrix


def write_json(path, payload):
    """Escrever JSON indentado com chaves ordenadas"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=_json_default)
        f.write('\n')
    return path


def read_json(path):
    with open(path, encoding='utf-8') as f:
        return json.load(f)


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Tipo não serializável: {type(value)!r}")


# ===================================
# Pool de tarefas
# ===================================

def run_jobs(func, tasks, n_jobs=1, processes=False):
    """
    Executar func(task) para cada tarefa num pool limitado

    Args:
        func: função aplicada a cada tarefa (nível de módulo se processes=True)
        tasks: lista de argumentos
        n_jobs: grau de paralelismo (1 = sequencial)
        processes: usar processos em vez de threads

    Returns:
        list: resultados na mesma ordem das tarefas
    """
    tasks = list(tasks)
    if n_jobs is None or n_jobs <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]

    executor_cls = ProcessPoolExecutor if processes else ThreadPoolExecutor
    workers = min(int(n_jobs), len(tasks))
    logger.debug(f"🧵 Executando {len(tasks)} tarefas com {workers} workers ({executor_cls.__name__})")
    with executor_cls(max_workers=workers) as executor:
        return list(executor.map(func, tasks))
