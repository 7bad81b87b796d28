#!/usr/bin/env python3
# src/simulators.py

"""
Simuladores "caros" (linear, só-inclinação, logístico, SIR), desenhos
quase-aleatórios e geração de dados sintéticos de treino e de medição.
"""

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.stats import qmc

from config import Config
from prob_core import DistSpec, Family, draw
from utils import DistributionError, SolverError, timer

logger = logging.getLogger(__name__)

SIR_BOUNDS = ((1.0, 14.0), (1.0, 3.0), (0.1, 0.9))
UNIT_BOUNDS = ((-1.0, 1.0),)


class SimulatorKind(str, Enum):
    LINEAR = 'linear'
    SLOPE_ONLY = 'slope_only'
    LOGISTIC = 'logistic'
    SIR = 'sir'


@dataclass(frozen=True)
class SimulatorSpec:
    """Simulador ℳ(ω) com ruído opcional e_S ~ N(0, σ_S²)"""

    kind: SimulatorKind
    a: float = 0.5
    b: float = 2.0
    c: float = 1.0
    n_pop: float = None
    s0: float = None
    i0: float = None
    r0: float = None
    sigma_s: float = 0.0
    bounds: tuple = None

    def __post_init__(self):
        kind = SimulatorKind(self.kind)
        object.__setattr__(self, 'kind', kind)
        if self.sigma_s < 0:
            raise DistributionError("σ_S deve ser não negativo")
        if kind is SimulatorKind.SIR:
            n_pop = Config.SIR_N_POP if self.n_pop is None else float(self.n_pop)
            i0 = Config.SIR_I0 if self.i0 is None else float(self.i0)
            r0 = Config.SIR_R0 if self.r0 is None else float(self.r0)
            s0 = n_pop - i0 - r0 if self.s0 is None else float(self.s0)
            if min(n_pop, s0, i0, r0) < 0:
                raise DistributionError("Populações SIR devem ser não negativas")
            if abs(s0 + i0 + r0 - n_pop) > 1e-9 * max(1.0, n_pop):
                raise DistributionError(f"s0 + i0 + r0 = {s0 + i0 + r0} difere de N = {n_pop}")
            for name, value in (('n_pop', n_pop), ('s0', s0), ('i0', i0), ('r0', r0)):
                object.__setattr__(self, name, value)
        if self.bounds is None:
            object.__setattr__(self, 'bounds', SIR_BOUNDS if kind is SimulatorKind.SIR else UNIT_BOUNDS)
        else:
            object.__setattr__(self, 'bounds', tuple(tuple(float(v) for v in pair) for pair in self.bounds))

    @property
    def input_dim(self):
        return 3 if self.kind is SimulatorKind.SIR else 1

    @classmethod
    def linear(cls, a=0.5, b=2.0, sigma_s=0.0):
        return cls(SimulatorKind.LINEAR, a=a, b=b, sigma_s=sigma_s)

    @classmethod
    def slope_only(cls, c=1.0, sigma_s=0.0):
        return cls(SimulatorKind.SLOPE_ONLY, c=c, sigma_s=sigma_s)

    @classmethod
    def logistic(cls, sigma_s=0.0):
        return cls(SimulatorKind.LOGISTIC, sigma_s=sigma_s)

    @classmethod
    def sir(cls, n_pop=None, i0=None, r0=None, s0=None):
        return cls(SimulatorKind.SIR, n_pop=n_pop, i0=i0, r0=r0, s0=s0)

    def to_dict(self):
        payload = {'kind': self.kind.value, 'sigma_s': self.sigma_s, 'bounds': [list(b) for b in self.bounds]}
        if self.kind is SimulatorKind.LINEAR:
            payload.update(a=self.a, b=self.b)
        elif self.kind is SimulatorKind.SLOPE_ONLY:
            payload.update(c=self.c)
        elif self.kind is SimulatorKind.SIR:
            payload.update(n_pop=self.n_pop, s0=self.s0, i0=self.i0, r0=self.r0)
        return payload


@dataclass
class TrainingDataset:
    """𝒟_T: N_T triplas (ω_T, σ_S, y_T)"""

    inputs: np.ndarray
    noise_hypers: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        if self.inputs.ndim == 1:
            self.inputs = self.inputs[:, None]
        self.noise_hypers = np.asarray(self.noise_hypers, dtype=float).reshape(-1)
        self.outputs = np.asarray(self.outputs, dtype=float).reshape(-1)
        n = self.inputs.shape[0]
        if n < 1:
            raise DistributionError("TrainingDataset requer N_T ≥ 1")
        if self.noise_hypers.size != n or self.outputs.size != n:
            raise DistributionError("inputs, noise_hypers e outputs devem ter o mesmo comprimento")

    def __len__(self):
        return self.outputs.size


@dataclass
class Measurements:
    """y_I com tempos opcionais (SIR) e verdade sintética em meta"""

    ys: np.ndarray
    times: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ys = np.asarray(self.ys, dtype=float).reshape(-1)
        if self.times is not None:
            self.times = np.asarray(self.times, dtype=float).reshape(-1)
            if self.times.size != self.ys.size:
                raise DistributionError("times e ys devem ter o mesmo comprimento")

    def __len__(self):
        return self.ys.size


# ===================================
# SIR
# ===================================

@dataclass
class SirTrajectory:
    t: np.ndarray
    S: np.ndarray
    I: np.ndarray
    R: np.ndarray
    max_step_discrepancy: float = 0.0


def _sir_rhs(state, beta, gamma, n_pop):
    s, i, _ = state
    infection = beta * s * i / n_pop
    recovery = gamma * i
    return np.stack([-infection, infection - recovery, recovery])


def _rk4_grid(y0, beta, gamma, n_pop, times, h_max):
    """RK4 de passo fixo a partir de t=0, pousando exatamente nos tempos pedidos"""
    state = y0.copy()
    out = np.empty((len(times),) + state.shape)
    t_now = 0.0
    for k, t_next in enumerate(times):
        span = t_next - t_now
        if span > 0:
            n_sub = int(np.ceil(span / h_max - 1e-12))
            h = span / n_sub
            if not h > 0 or not np.isfinite(h):
                raise SolverError(f"Passo do integrador inválido (h={h}) no intervalo [{t_now}, {t_next}]")
            for _ in range(n_sub):
                k1 = _sir_rhs(state, beta, gamma, n_pop)
                k2 = _sir_rhs(state + 0.5 * h * k1, beta, gamma, n_pop)
                k3 = _sir_rhs(state + 0.5 * h * k2, beta, gamma, n_pop)
                k4 = _sir_rhs(state + h * k3, beta, gamma, n_pop)
                state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k] = state
        t_now = t_next
    if not np.all(np.isfinite(out)):
        raise SolverError(f"Integrador SIR produziu valores não finitos (β={beta}, γ={gamma})")
    return out


def sir_solve(spec, beta, gamma, t_grid, n_steps=2000, check=True):
    """
    Resolver o sistema SIR por RK4 clássico de passo fixo

    Condições iniciais em t=0. O passo é h = t_max/n_steps (refinado para
    pousar em cada ponto da grade). beta e gamma podem ser arrays (lote).

    Args:
        spec: SimulatorSpec do tipo SIR
        beta, gamma: taxas (≥ 0), escalares ou arrays de mesmo tamanho
        t_grid: tempos estritamente crescentes, t_grid[0] ≥ 0
        n_steps: número de passos de referência sobre [0, t_max]
        check: comparar com a solução de passo h/2

    Returns:
        SirTrajectory com S, I, R de forma (len(t_grid),) ou (lote, len(t_grid))
    """
    if spec.kind is not SimulatorKind.SIR:
        raise DistributionError("sir_solve requer um simulador SIR")
    t_grid = np.asarray(t_grid, dtype=float).reshape(-1)
    if t_grid.size == 0 or t_grid[0] < 0 or np.any(np.diff(t_grid) <= 0):
        raise DistributionError("t_grid deve ser estritamente crescente e começar em t ≥ 0")

    scalar = np.ndim(beta) == 0 and np.ndim(gamma) == 0
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    beta, gamma = np.broadcast_arrays(beta, gamma)
    if np.any(beta < 0) or np.any(gamma < 0):
        raise DistributionError("β e γ devem ser não negativos")

    y0 = np.tile(np.array([[spec.s0], [spec.i0], [spec.r0]]), (1, beta.size))
    t_max = float(t_grid[-1])
    h_max = t_max / n_steps if t_max > 0 else 1.0

    sol = _rk4_grid(y0, beta, gamma, spec.n_pop, t_grid, h_max)
    discrepancy = 0.0
    if check and t_max > 0:
        fine = _rk4_grid(y0, beta, gamma, spec.n_pop, t_grid, h_max / 2.0)
        discrepancy = float(np.max(np.abs(fine - sol)))
        if discrepancy > 1e-4 * spec.n_pop:
            raise SolverError(
                f"Verificação de meio passo falhou: discrepância {discrepancy:.3e} (β={beta}, γ={gamma})"
            )

    # sol: (tempos, 3, lote)
    S, I, R = (np.moveaxis(sol[:, j, :], 0, -1) for j in range(3))
    if scalar:
        S, I, R = S[0], I[0], R[0]
    return SirTrajectory(t=t_grid, S=S, I=I, R=R, max_step_discrepancy=discrepancy)


def sir_infected_at(spec, t, beta, gamma):
    """I(t) para vetores (t, β, γ) emparelhados, resolvidos num lote"""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    beta = np.broadcast_to(np.asarray(beta, dtype=float), t.shape)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), t.shape)
    grid, inverse = np.unique(t, return_inverse=True)
    traj = sir_solve(spec, beta, gamma, grid)
    # traj.I: (lote, tempos)
    return traj.I[np.arange(t.size), inverse]


# ===================================
# Avaliação do simulador
# ===================================

def _as_inputs(spec, omega):
    omega = np.asarray(omega, dtype=float)
    if omega.ndim == 0:
        omega = omega.reshape(1, 1)
    elif omega.ndim == 1:
        omega = omega.reshape(-1, 1) if spec.input_dim == 1 else omega.reshape(1, -1)
    if omega.shape[-1] != spec.input_dim:
        raise DistributionError(
            f"Dimensão de ω ({omega.shape[-1]}) não corresponde ao simulador {spec.kind.value} ({spec.input_dim})"
        )
    return omega


def simulate_batch(spec, omegas):
    """ℳ(ω) sem ruído para uma matriz de entradas (N × dim)"""
    omegas = _as_inputs(spec, omegas)
    kind = spec.kind
    if kind is SimulatorKind.LINEAR:
        return spec.a + spec.b * omegas[:, 0]
    if kind is SimulatorKind.SLOPE_ONLY:
        return spec.c * omegas[:, 0]
    if kind is SimulatorKind.LOGISTIC:
        return 2.0 / (1.0 + np.exp(-10.0 * omegas[:, 0])) - 1.0
    return sir_infected_at(spec, omegas[:, 0], omegas[:, 1], omegas[:, 2])


def simulate(spec, omega, rng=None):
    """
    Saída do simulador em ω, com ruído N(0, σ_S²) quando rng é dado

    Para o SIR, ω = (t, β, γ) e a saída é I(t).
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if omega.size != spec.input_dim:
        raise DistributionError(
            f"Dimensão de ω ({omega.size}) não corresponde ao simulador {spec.kind.value} ({spec.input_dim})"
        )
    value = float(simulate_batch(spec, omega.reshape(1, -1))[0])
    if rng is not None and spec.sigma_s > 0:
        value += float(draw(DistSpec.normal(0.0, spec.sigma_s), rng))
    return value


def in_training_bounds(spec, omega):
    """Verificar se (β, γ) estão na caixa em que o surrogate foi treinado"""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if spec.kind is not SimulatorKind.SIR:
        lo, hi = spec.bounds[0]
        return bool(np.all((omega >= lo) & (omega <= hi)))
    params = omega[-2:]
    return all(lo <= v <= hi for v, (lo, hi) in zip(params, spec.bounds[1:]))


# ===================================
# Desenhos quase-aleatórios
# ===================================

def halton_design_1d(n):
    """
    Halton 1-D modificado em [−1, 1]: (−1, 1, 0) seguido de van der Corput base 2

    O prefixo é estável: aumentar n apenas estende a sequência.
    """
    if n < 1:
        raise DistributionError("n deve ser pelo menos 1")
    prefix = np.array([-1.0, 1.0, 0.0])
    if n <= 3:
        return prefix[:n].copy()
    # 0 e 1/2 já emitidos como −1 e 0
    sampler = qmc.Halton(d=1, scramble=False)
    unit = sampler.random(n - 3 + 2)[2:, 0]
    return np.concatenate([prefix, 2.0 * unit - 1.0])


def sobol_design_3d(n, bounds=SIR_BOUNDS):
    """Sequência de Sobol 3-D (Joe–Kuo, sem embaralhamento) mapeada para a caixa"""
    if n < 1:
        raise DistributionError("n deve ser pelo menos 1")
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape != (3, 2) or np.any(bounds[:, 0] >= bounds[:, 1]):
        raise DistributionError("bounds deve conter três pares lo < hi")
    sampler = qmc.Sobol(d=3, scramble=False)
    with warnings.catch_warnings():
        # n fora de potências de 2 perde a propriedade de balanço, não a validade
        warnings.simplefilter('ignore', UserWarning)
        unit = sampler.random(n)
    return qmc.scale(unit, bounds[:, 0], bounds[:, 1])


# ===================================
# Dados sintéticos
# ===================================

@timer
def generate_training_data(spec, design, sigma_s, rng):
    """
    Gerar 𝒟_T: y_T = ℳ(ω_T) + N(0, σ_S²)

    O SIR é resolvido sem ruído (solução determinística da EDO).
    """
    design = _as_inputs(spec, design)
    if design.shape[0] < 1:
        raise DistributionError("design não pode ser vazio")
    if sigma_s < 0:
        raise DistributionError("σ_S deve ser não negativo")

    outputs = simulate_batch(spec, design)
    if spec.kind is SimulatorKind.SIR:
        outputs = np.maximum(outputs, 0.0)
    elif sigma_s > 0:
        outputs = outputs + draw(DistSpec.normal(0.0, sigma_s), rng, size=outputs.size)

    logger.debug(f"🧪 Dados de treino gerados: N_T={design.shape[0]}, σ_S={sigma_s}")
    return TrainingDataset(inputs=design, noise_hypers=np.full(design.shape[0], float(sigma_s)),
                           outputs=outputs)


def generate_measurements(spec, omega_star, noise, n_i, rng, times=None):
    """
    Gerar medições y_I em ω_I*

    Args:
        spec: SimulatorSpec
        omega_star: ω_I* (escalar; (β, γ) no SIR)
        noise: DistSpec Normal (μ ignorado, somado a ℳ), NegativeBinomial
               (média substituída por ℳ) ou None para medições sem ruído
        n_i: número de medições
        rng: Rng
        times: tempos das medições (SIR; padrão n_i pontos igualmente espaçados)

    Returns:
        Measurements com a verdade em meta
    """
    if n_i < 0:
        raise DistributionError("n_i deve ser não negativo")
    omega_star = np.atleast_1d(np.asarray(omega_star, dtype=float))
    meta = {'omega_star': omega_star.tolist(), 'noise': None if noise is None else noise.to_dict()}

    if spec.kind is SimulatorKind.SIR:
        if omega_star.size != 2:
            raise DistributionError("ω_I* do SIR deve ser (β, γ)")
        if times is None:
            lo, hi = spec.bounds[0]
            times = np.linspace(lo, hi, n_i)
        times = np.asarray(times, dtype=float)
        meta['in_training_bounds'] = in_training_bounds(spec, omega_star)
        if not meta['in_training_bounds']:
            logger.warning(f"⚠️ ω_I* = {omega_star.tolist()} fora da região de treino do surrogate")
        mean = np.maximum(sir_solve(spec, omega_star[0], omega_star[1], times).I, 1e-12) if n_i else np.zeros(0)
    else:
        if omega_star.size != 1:
            raise DistributionError("ω_I* deve ser escalar para este simulador")
        times = None
        mean = np.full(n_i, simulate(spec, omega_star))

    if noise is None or n_i == 0:
        ys = mean.copy()
    elif noise.family is Family.NORMAL:
        meta['sigma_i'] = noise.sigma
        ys = mean + draw(DistSpec.normal(0.0, noise.sigma), rng, size=n_i)
    elif noise.family is Family.NEGATIVE_BINOMIAL:
        meta['phi'] = noise.phi
        ys = np.array([draw(DistSpec.negative_binomial(m, noise.phi), rng) for m in mean], dtype=float)
    else:
        raise DistributionError(f"Ruído de medição não suportado: {noise.family.value}")

    return Measurements(ys=ys, times=times, meta=meta)
