"""
Log-likelihood functions for DelayLab

Правдоподобие параметризовано безразмерными координатами (θ, φ_c), где
θ = Δω·τ и φ_c = φ − ω₀τ. В этих координатах θ и фаза почти не коррелированы,
что упрощает поиск максимума. Для спектрометра значение считается без
постоянного слагаемого Σ log p₀(ω): l = Σ_i w_i·log(½[1 + q_i·V·cos ψ_i]).
"""
import logging
import math
from typing import Tuple

import numpy as np

from physics.dataset import DetectionDataset, DetectionMode
from physics.interferometer import interference_factor, split_cell_model

logger = logging.getLogger(__name__)


class CarrierLikelihood:
    """Общий интерфейс правдоподобия в координатах (θ, φ_c)"""

    dataset: DetectionDataset

    def value(self, theta: float, phase: float) -> float:
        raise NotImplementedError

    def derivatives(self, theta: float, phase: float) -> Tuple[float, np.ndarray, np.ndarray]:
        """Значение, градиент и гессиан по (θ, φ_c)"""
        raise NotImplementedError

    def value_grid(self, thetas: np.ndarray, phases: np.ndarray) -> np.ndarray:
        """Значения на прямоугольной сетке, форма (len(thetas), len(phases))"""
        return np.array([[self.value(t, p) for p in phases] for t in thetas])

    @property
    def total_weight(self) -> float:
        return float(self.dataset.n_photons)


class SpectrometerLikelihood(CarrierLikelihood):
    """Правдоподобие по записям (q, ω) с весами"""

    def __init__(self, dataset: DetectionDataset, assumed_epsilon: float = 0.0):
        """
        Инициализация

        Args:
            dataset: Спектрометрический набор данных (записи или гистограмма)
            assumed_epsilon: Предполагаемая амплитуда флуктуаций ε
        """
        if dataset.mode is not DetectionMode.SPECTROMETER:
            raise ValueError("SpectrometerLikelihood needs a spectrometer dataset")
        self.dataset = dataset
        self.visibility = math.exp(-0.5 * assumed_epsilon ** 2)
        weights = dataset.record_weights
        keep = weights > 0
        spectrum = dataset.spectrum
        self.q = dataset.q[keep].astype(float)
        self.u = (dataset.omega[keep] - spectrum.center) / spectrum.spread
        self.weights = weights[keep]
        self._offset = math.log(0.5) * float(self.weights.sum())

    def _psi(self, theta, phase):
        return phase - self.u * theta

    def value(self, theta: float, phase: float) -> float:
        g = interference_factor(self.q, self.visibility, self._psi(theta, phase))
        if np.any(g <= 0.0):
            return -math.inf
        return self._offset + float(self.weights @ np.log(g))

    def value_grid(self, thetas: np.ndarray, phases: np.ndarray) -> np.ndarray:
        phases = np.asarray(phases, dtype=float)
        grid = np.empty((len(thetas), phases.size))
        for i, theta in enumerate(thetas):
            psi = phases[:, None] - self.u[None, :] * theta
            g = interference_factor(self.q[None, :], self.visibility, psi)
            with np.errstate(divide='ignore'):
                grid[i] = self._offset + np.log(g) @ self.weights
        return grid

    def derivatives(self, theta: float, phase: float) -> Tuple[float, np.ndarray, np.ndarray]:
        psi = self._psi(theta, phase)
        g = interference_factor(self.q, self.visibility, psi)
        if np.any(g <= 0.0):
            return -math.inf, np.full(2, np.nan), np.full((2, 2), np.nan)
        v = self.visibility
        sin, cos = np.sin(psi), np.cos(psi)
        a = self.q * v * sin / g
        h = -self.q * v * cos / g - a * a
        w, u = self.weights, self.u

        value = self._offset + float(w @ np.log(g))
        grad = np.array([w @ (a * u), -(w @ a)])
        hess = np.array([[w @ (u * u * h), -(w @ (u * h))],
                         [-(w @ (u * h)), w @ h]])
        return value, grad, hess


class SplitLikelihood(CarrierLikelihood):
    """Правдоподобие четырёх счётчиков Σ n_{rq}·log p_{rq}"""

    def __init__(self, dataset: DetectionDataset, assumed_epsilon: float = 0.0,
                 assumed_omega_noise: float = 0.0, model: str = "exact"):
        """
        Инициализация

        Args:
            dataset: Набор данных split-детекторов
            assumed_epsilon: Предполагаемая ε
            assumed_omega_noise: Предполагаемый шум считывания Ω [рад/с]
            model: "exact" (квадратура) или "second_order"
        """
        if dataset.mode is not DetectionMode.SPLIT:
            raise ValueError("SplitLikelihood needs a split-detector dataset")
        self.dataset = dataset
        self.counts = dataset.counts
        self.model = split_cell_model(dataset.spectrum, assumed_epsilon,
                                      assumed_omega_noise / dataset.spectrum.spread, model)

    def _log_terms(self, p: np.ndarray):
        occupied = self.counts > 0
        if np.any(p[occupied] <= 0.0):
            return None
        return np.where(occupied, self.counts * np.log(np.where(occupied, p, 1.0)), 0.0)

    def value(self, theta: float, phase: float) -> float:
        terms = self._log_terms(self.model.probabilities(theta, phase))
        return -math.inf if terms is None else float(terms.sum())

    def derivatives(self, theta: float, phase: float) -> Tuple[float, np.ndarray, np.ndarray]:
        p, dp, d2p = self.model.derivatives(theta, phase)
        terms = self._log_terms(p)
        if terms is None:
            return -math.inf, np.full(2, np.nan), np.full((2, 2), np.nan)
        occupied = self.counts > 0
        ratio = np.where(occupied, self.counts / np.where(occupied, p, 1.0), 0.0)
        grad = np.einsum('rq,rqi->i', ratio, dp)
        hess = (np.einsum('rq,rqij->ij', ratio, d2p)
                - np.einsum('rq,rqi,rqj->ij', ratio / np.where(occupied, p, 1.0), dp, dp))
        return float(terms.sum()), grad, hess


def build_likelihood(dataset: DetectionDataset, assumed_epsilon: float = 0.0,
                     assumed_omega_noise: float = 0.0, split_model: str = "exact") -> CarrierLikelihood:
    """Правдоподобие, соответствующее режиму набора данных"""
    if dataset.mode is DetectionMode.SPLIT:
        return SplitLikelihood(dataset, assumed_epsilon, assumed_omega_noise, split_model)
    return SpectrometerLikelihood(dataset, assumed_epsilon)


def log_likelihood(dataset: DetectionDataset, tau: float, phi: float, assumed_epsilon: float = 0.0,
                   assumed_omega_noise: float = 0.0, split_model: str = "exact") -> float:
    """
    Логарифм правдоподобия набора данных в точке (τ, φ)

    Args:
        dataset: Набор данных
        tau: Задержка [с]
        phi: Фаза выравнивания [рад]
        assumed_epsilon: Предполагаемая ε
        assumed_omega_noise: Предполагаемый Ω [рад/с] (только split-режим)
        split_model: Модель ячеек split-детекторов

    Returns:
        float: l(τ, φ), либо −∞ если запись попала в точку нулевой плотности
    """
    spectrum = dataset.spectrum
    likelihood = build_likelihood(dataset, assumed_epsilon, assumed_omega_noise, split_model)
    return likelihood.value(spectrum.spread * tau, phi - spectrum.center * tau)
