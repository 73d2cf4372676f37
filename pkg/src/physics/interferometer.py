"""
Interferometer forward model for DelayLab

Плотность исходов спектрометрической схемы, вероятности split-детекторов
(точная квадратура и разложение второго порядка по Δωτ), усреднение по
флуктуациям выравнивания и генератор фотонов Монте-Карло.

Внутри всё считается в безразмерной системе: u = (ω − ω₀)/Δω, θ = Δω·τ,
φ_c = φ − ω₀τ (фаза относительно несущей), так что φ − ωτ = φ_c − uθ.
"""
import dataclasses
import enum
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Union

import numpy as np
from scipy import special

from errors import OutsideRegime, SingularModel
from .dataset import SIGNS, DetectionDataset, DetectionMode, sign_index
from .spectrum import Spectrum, SpectrumKind
from rng import SeedLike, substream

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 1 << 20


class FluctuationMode(enum.Enum):
    """Корреляция флуктуаций выравнивания φ′"""
    PHOTON = "photon"
    PULSE = "pulse"


@dataclass(frozen=True)
class ModelParams:
    """Параметры модели (τ, φ, ε, Ω) и спектр источника"""
    tau: float
    phi: float
    spectrum: Spectrum
    epsilon: float = 0.0
    omega_noise: float = 0.0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.omega_noise >= 0:
            raise ValueError(f"omega_noise must be >= 0, got {self.omega_noise}")
        if not self.in_working_range:
            logger.debug(f"Parameters outside the small-delay range: theta={self.theta:.3e}, "
                         f"w_max*tau={self.spectrum.support[1] * abs(self.tau):.3e}")

    @classmethod
    def from_theta(cls, theta: float, phi: float, spectrum: Spectrum,
                   epsilon: float = 0.0, omega_ratio: float = 0.0) -> "ModelParams":
        """Построение из безразмерных θ = Δω·τ и Ω/Δω"""
        return cls(tau=theta / spectrum.spread, phi=phi, spectrum=spectrum,
                   epsilon=epsilon, omega_noise=omega_ratio * spectrum.spread)

    @property
    def theta(self) -> float:
        return self.spectrum.spread * self.tau

    @property
    def rho(self) -> float:
        return self.spectrum.rho

    @property
    def visibility(self) -> float:
        """V = exp(−ε²/2)"""
        return math.exp(-0.5 * self.epsilon ** 2)

    @property
    def omega_ratio(self) -> float:
        """Ω/Δω"""
        return self.omega_noise / self.spectrum.spread

    @property
    def carrier_phase(self) -> float:
        """φ_c = φ − ω₀τ"""
        return self.phi - self.spectrum.center * self.tau

    @property
    def in_working_range(self) -> bool:
        """|Δω·τ| ≪ 1 и ω_max·|τ| < 1"""
        return abs(self.theta) < 0.1 and self.spectrum.support[1] * abs(self.tau) < 1.0

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def truth(self) -> Dict[str, float]:
        """Истинные параметры для метаданных набора данных"""
        return {"tau": self.tau, "phi": self.phi, "epsilon": self.epsilon, "omega_noise": self.omega_noise}


def interference_factor(q, visibility: float, psi):
    """
    Множитель 1 + q·V·cos ψ в форме без сокращения вблизи тёмного порта

    Args:
        q: Порт(ы) ±1
        visibility: V = exp(−ε²/2)
        psi: Фаза φ − ωτ

    Returns:
        Значение множителя (≥ 0)
    """
    half = 0.5 * np.asarray(psi, dtype=float)
    tail = np.where(np.asarray(q) < 0, np.sin(half) ** 2, np.cos(half) ** 2)
    result = (1.0 - visibility) + 2.0 * visibility * tail
    return float(result) if np.ndim(result) == 0 else result


def port_density(m: ModelParams, q: int, omega):
    """
    Плотность исходов p_q(ω) = ½·p₀(ω)·[1 + q·e^{−ε²/2}·cos(φ − ωτ)]

    Args:
        m: Параметры модели
        q: Порт ±1
        omega: Частота(ы) [рад/с]

    Returns:
        Плотность вероятности [1/(рад/с)], ноль вне носителя
    """
    omega = np.asarray(omega, dtype=float)
    psi = m.phi - omega * m.tau
    result = 0.5 * np.asarray(m.spectrum.density(omega)) * interference_factor(q, m.visibility, psi)
    return float(result) if np.ndim(result) == 0 else result


def _port_mass(m: ModelParams, q: int, lower: float = None, upper: float = None, gate=None) -> float:
    """½∫ p_u·G(u)·[1 + qV cos(φ_c − uθ)] du по отрезку носителя"""
    phase, theta, visibility = m.carrier_phase, m.theta, m.visibility
    if gate is None:
        func = lambda u: interference_factor(q, visibility, phase - u * theta)
    else:
        func = lambda u: gate(u) * interference_factor(q, visibility, phase - u * theta)
    return 0.5 * m.spectrum.integrate_u(func, lower, upper)


def port_probability(m: ModelParams, q: int) -> float:
    """
    Интегральная доля фотонов в порту q

    Args:
        m: Параметры модели
        q: Порт ±1

    Returns:
        float: P_q
    """
    sign_index(q)
    return _port_mass(m, q)


def split_probabilities_exact(m: ModelParams) -> np.ndarray:
    """
    Вероятности p_{rq} split-детекторов точной квадратурой

    Зарегистрированная частота размывается гауссовым шумом масштаба Ω
    и сравнивается с порогом ω₀.

    Args:
        m: Параметры модели

    Returns:
        np.ndarray: Матрица 2×2, строки r, столбцы q в порядке SIGNS
    """
    probabilities = np.empty((2, 2))
    ratio = m.omega_ratio
    for j, q in enumerate(SIGNS):
        if ratio == 0.0:
            probabilities[0, j] = _port_mass(m, q, lower=0.0)
            probabilities[1, j] = _port_mass(m, q, upper=0.0)
            continue
        for i, r in enumerate(SIGNS):
            gate = lambda u, r=r: special.ndtr(r * u / ratio)
            # излом сглаженного порога в u = 0
            probabilities[i, j] = (_port_mass(m, q, upper=0.0, gate=gate)
                                   + _port_mass(m, q, lower=0.0, gate=gate))
    return probabilities


def second_order_split_formula(theta: float, phi: float, epsilon: float = 0.0,
                               omega_ratio: float = 0.0) -> np.ndarray:
    """
    Вероятности split-детекторов во втором порядке по Δωτ для гауссова спектра

    p_{rq} = ¼[1 + qV(1 − θ²/2)cos φ] + rqVθ·sin φ / (2√(2π(1 + (Ω/Δω)²)))

    Args:
        theta: Безразмерная задержка θ = Δω·τ
        phi: Фаза выравнивания [рад]
        epsilon: Амплитуда флуктуаций выравнивания [рад]
        omega_ratio: Шум считывания Ω/Δω

    Returns:
        np.ndarray: Матрица 2×2, строки r, столбцы q в порядке SIGNS
    """
    probabilities = SecondOrderCellModel(epsilon, omega_ratio).probabilities(theta, phi)
    if np.any(probabilities < 0):
        raise OutsideRegime(f"Second-order split formula gives negative probability at "
                            f"theta={theta:.3e}, phi={phi:.4f}")
    return probabilities


def split_probabilities_second_order(m: ModelParams) -> np.ndarray:
    """Формула второго порядка в точке (θ, φ_c, ε, Ω/Δω)"""
    if m.spectrum.kind is not SpectrumKind.GAUSSIAN:
        logger.warning("Second-order split formula assumes a Gaussian spectrum")
    return second_order_split_formula(m.theta, m.carrier_phase, m.epsilon, m.omega_ratio)


class SplitCellModel:
    """
    Точная модель ячеек p_{rq}(θ, φ_c) на фиксированных узлах квадратуры

    Узлы строятся один раз, после чего вероятности и их первые и вторые
    производные по (θ, φ_c) вычисляются аналитически. Используется
    правдоподобием и информацией Фишера.
    """

    def __init__(self, spectrum: Spectrum, epsilon: float = 0.0, omega_ratio: float = 0.0,
                 order: int = 24, panels: int = 24):
        self.visibility = math.exp(-0.5 * epsilon ** 2)
        if omega_ratio > 0:
            edges = [0.0] + [sign * omega_ratio * k for k in (1, 2, 4, 8) for sign in (1, -1)]
        else:
            edges = [0.0]
        u, weights = spectrum.quadrature_nodes(order=order, panels=panels, extra_edges=edges)
        if omega_ratio > 0:
            gates = np.vstack((special.ndtr(u / omega_ratio), special.ndtr(-u / omega_ratio)))
        else:
            gates = np.vstack((u > 0, u < 0)).astype(float)
        self._u = u
        self._gated = gates * weights[None, :]

    def probabilities(self, theta: float, phase: float) -> np.ndarray:
        psi = phase - self._u * theta
        columns = [0.5 * self._gated @ interference_factor(q, self.visibility, psi) for q in SIGNS]
        return np.column_stack(columns)

    def derivatives(self, theta: float, phase: float):
        """
        Вероятности, градиент и гессиан по (θ, φ_c)

        Returns:
            (p, grad, hess): формы (2, 2), (2, 2, 2), (2, 2, 2, 2)
        """
        u = self._u
        psi = phase - u * theta
        cos, sin = np.cos(psi), np.sin(psi)
        scale = 0.5 * self.visibility * SIGNS[None, :]

        moment = lambda values: (self._gated @ values)[:, None] * scale
        grad = np.empty((2, 2, 2))
        grad[..., 0] = moment(u * sin)
        grad[..., 1] = -moment(sin)
        hess = np.empty((2, 2, 2, 2))
        hess[..., 0, 0] = -moment(u * u * cos)
        hess[..., 0, 1] = hess[..., 1, 0] = moment(u * cos)
        hess[..., 1, 1] = -moment(cos)
        return self.probabilities(theta, phase), grad, hess


class SecondOrderCellModel:
    """Формула второго порядка по θ с аналитическими производными (без проверки знака)"""

    def __init__(self, epsilon: float = 0.0, omega_ratio: float = 0.0):
        self.visibility = math.exp(-0.5 * epsilon ** 2)
        self.slope = 1.0 / (2.0 * math.sqrt(2.0 * math.pi * (1.0 + omega_ratio ** 2)))
        self._rq = SIGNS[:, None] * SIGNS[None, :]
        self._q = np.broadcast_to(SIGNS[None, :], (2, 2))

    def probabilities(self, theta: float, phase: float) -> np.ndarray:
        v, k = self.visibility, self.slope
        even = 0.25 * (1.0 + self._q * v * (1.0 - 0.5 * theta ** 2) * math.cos(phase))
        return even + self._rq * v * k * theta * math.sin(phase)

    def derivatives(self, theta: float, phase: float):
        v, k = self.visibility, self.slope
        cos, sin = math.cos(phase), math.sin(phase)
        qv, rqv = 0.25 * self._q * v, self._rq * v * k
        grad = np.empty((2, 2, 2))
        grad[..., 0] = -qv * theta * cos + rqv * sin
        grad[..., 1] = -qv * (1.0 - 0.5 * theta ** 2) * sin + rqv * theta * cos
        hess = np.empty((2, 2, 2, 2))
        hess[..., 0, 0] = -qv * cos
        hess[..., 0, 1] = hess[..., 1, 0] = qv * theta * sin + rqv * cos
        hess[..., 1, 1] = -qv * (1.0 - 0.5 * theta ** 2) * cos - rqv * theta * sin
        return self.probabilities(theta, phase), grad, hess


def split_cell_model(spectrum: Spectrum, epsilon: float = 0.0, omega_ratio: float = 0.0,
                     which: str = "exact"):
    """Модель ячеек split-детекторов: "exact" или "second_order" """
    if which == "exact":
        return SplitCellModel(spectrum, epsilon, omega_ratio)
    if which == "second_order":
        return SecondOrderCellModel(epsilon, omega_ratio)
    raise ValueError(f"Unknown split model: {which}")


def postselection_probability(m: ModelParams, q_dark: int = -1) -> float:
    """Вероятность постселекции в тёмный порт"""
    return port_probability(m, q_dark)


def dark_port_mean_shift(m: ModelParams, q_dark: int = -1) -> float:
    """
    Сдвиг средней частоты в тёмном порту ⟨ω⟩_q − ω₀ квадратурой

    Args:
        m: Параметры модели
        q_dark: Тёмный порт

    Returns:
        float: Сдвиг [рад/с]
    """
    phase, theta, visibility = m.carrier_phase, m.theta, m.visibility
    factor = lambda u: interference_factor(q_dark, visibility, phase - u * theta)
    mass = m.spectrum.integrate_u(factor)
    if mass <= 0.0:
        raise SingularModel(f"Port {q_dark} carries no photons at tau={m.tau:.3e}, phi={m.phi:.4f}")
    first = m.spectrum.integrate_u(lambda u: u * factor(u))
    return m.spectrum.spread * first / mass


def expected_dataset(m: ModelParams, mode: Union[DetectionMode, str], order: int = 24,
                     panels: int = 24, split_model: str = "exact") -> DetectionDataset:
    """
    Взвешенный набор данных, эмпирическая мера которого совпадает с законом модели (N = ∞)

    Args:
        m: Параметры модели
        mode: Режим детектирования
        order: Узлов Гаусса–Лежандра на панель (спектрометр)
        panels: Число панелей (спектрометр)
        split_model: "exact" или "second_order" для split-режима

    Returns:
        DetectionDataset: Набор с exact=True и суммой весов 1
    """
    mode = DetectionMode(mode)
    spectrum = m.spectrum
    if mode is DetectionMode.SPLIT:
        if split_model == "exact":
            counts = split_probabilities_exact(m)
        elif split_model == "second_order":
            counts = split_probabilities_second_order(m)
        else:
            raise ValueError(f"Unknown split model: {split_model}")
        return DetectionDataset(mode, spectrum, counts=counts, truth=m.truth(), exact=True)

    u, weights = spectrum.quadrature_nodes(order=order, panels=panels)
    omega = spectrum.center + spectrum.spread * u
    psi = m.carrier_phase - u * m.theta
    q_parts, omega_parts, weight_parts = [], [], []
    for q in SIGNS:
        w = 0.5 * weights * interference_factor(q, m.visibility, psi)
        keep = w > 0
        q_parts.append(np.full(int(keep.sum()), q, dtype=np.int8))
        omega_parts.append(omega[keep])
        weight_parts.append(w[keep])
    return DetectionDataset(mode, spectrum, q=np.concatenate(q_parts), omega=np.concatenate(omega_parts),
                            weights=np.concatenate(weight_parts), truth=m.truth(), exact=True)


def sample_photons(m: ModelParams, mode: Union[DetectionMode, str], n: int, seed: SeedLike,
                   smear_spectrometer: bool = False, fluctuation: Union[FluctuationMode, str] = "photon",
                   photons_per_pulse: int = 1, chunk_size: int = DEFAULT_CHUNK_SIZE) -> DetectionDataset:
    """
    Генерация N фотонов Монте-Карло

    Для каждого фотона: φ′ ~ Normal(φ, ε²), ω ~ p₀, порт q = +1 с вероятностью
    ½[1 + cos(φ′ − ωτ)]. Фотоны обрабатываются блоками, у каждого блока свой
    подпоток (seed, номер блока), поэтому результат не зависит от планирования.

    Args:
        m: Параметры модели
        mode: Режим детектирования
        n: Число фотонов N ≥ 0
        seed: Зерно (или SeedSequence кампании)
        smear_spectrometer: Размывать частоты спектрометра шумом Ω
        fluctuation: "photon" - независимая φ′ на фотон, "pulse" - общая на импульс
        photons_per_pulse: Фотонов в импульсе для режима "pulse"
        chunk_size: Размер блока

    Returns:
        DetectionDataset: Синтетический набор данных
    """
    if n < 0 or int(n) != n:
        raise ValueError(f"Photon count must be a non-negative integer, got {n}")
    n = int(n)
    mode = DetectionMode(mode)
    fluctuation = FluctuationMode(fluctuation)
    if photons_per_pulse < 1:
        raise ValueError(f"photons_per_pulse must be >= 1, got {photons_per_pulse}")

    per_pulse = photons_per_pulse if fluctuation is FluctuationMode.PULSE else 1
    chunk = per_pulse * max(1, chunk_size // per_pulse)

    spectrum = m.spectrum
    q_parts, omega_parts = [], []
    counts = np.zeros((2, 2))

    for index, start in enumerate(range(0, n, chunk)):
        size = min(chunk, n - start)
        rng = substream(seed, index)

        n_draws = -(-size // per_pulse)
        phi_prime = m.phi + m.epsilon * rng.standard_normal(n_draws)
        if per_pulse > 1:
            phi_prime = np.repeat(phi_prime, per_pulse)[:size]

        omega = spectrum.sample(rng, size)
        bright = np.cos(0.5 * (phi_prime - omega * m.tau)) ** 2
        q = np.where(rng.random(size) < bright, 1, -1).astype(np.int8)

        if mode is DetectionMode.SPLIT:
            recorded = omega - spectrum.center
            if m.omega_noise > 0:
                recorded = recorded + m.omega_noise * rng.standard_normal(size)
            r_index = np.where(recorded > 0, 0, 1)
            q_index = np.where(q > 0, 0, 1)
            np.add.at(counts, (r_index, q_index), 1.0)
        else:
            if smear_spectrometer and m.omega_noise > 0:
                omega = omega + m.omega_noise * rng.standard_normal(size)
            q_parts.append(q)
            omega_parts.append(omega)

    seed_value: Optional[int] = int(seed) if isinstance(seed, (int, np.integer)) else None
    if mode is DetectionMode.SPLIT:
        dataset = DetectionDataset(mode, spectrum, counts=counts, seed=seed_value, truth=m.truth())
    else:
        q_all = np.concatenate(q_parts) if q_parts else np.empty(0, dtype=np.int8)
        omega_all = np.concatenate(omega_parts) if omega_parts else np.empty(0)
        dataset = DetectionDataset(mode, spectrum, q=q_all, omega=omega_all, seed=seed_value, truth=m.truth())

    logger.debug(f"Sampled {n} photons ({mode.value}, fluctuation={fluctuation.value}) seed={seed_value}")
    return dataset
