"""
Closed-form estimators for DelayLab

Аналитические оценщики реализованы дословно по формулам сбалансированного
режима и split-детекторов, без подгонки констант. Их отношение к численному
ML фиксирует модуль audit. Фаза φ̂ этих оценщиков отсчитывается от несущей.
"""
import logging
import math

import numpy as np

from errors import Degenerate, OutsideRegime, UndefinedEstimator
from physics.dataset import SIGNS, DetectionDataset, DetectionMode
from .types import Estimate, FitMethod, PhiReference

logger = logging.getLogger(__name__)

BALANCE_GUARD = 0.3
REGIME_FACTOR = 10.0


def _port_statistics(dataset: DetectionDataset):
    """P_q, ⟨ω − c⟩_q, ⟨(ω − c)²⟩_q относительно общего среднего c"""
    weights = dataset.record_weights
    total = weights.sum()
    reference = float(weights @ dataset.omega / total)
    shifted = dataset.omega - reference
    fractions, first, second = [], [], []
    for port in SIGNS:
        mask = dataset.q == port
        mass = weights[mask].sum()
        fractions.append(mass / total)
        if mass > 0:
            first.append(float(weights[mask] @ shifted[mask] / mass))
            second.append(float(weights[mask] @ (shifted[mask] ** 2) / mass))
        else:
            first.append(0.0)
            second.append(0.0)
    return reference, np.array(fractions), np.array(first), np.array(second)


def balanced_closed_form(dataset: DetectionDataset, assumed_epsilon: float = 0.0) -> Estimate:
    """
    Оценка сбалансированного режима

    φ̂ = π/2 − e^{ε²/2}·Σ_q q·P_q
    τ̂ = e^{ε²/2}/(4Δω)·[(1/Δω)·Σ_q q·P_q·⟨ω⟩_q − Σ_q q·P_q]
    где P_q, ⟨ω⟩_q и Δω² = Σ_q P_q⟨ω²⟩_q − (Σ_q P_q⟨ω⟩_q)² берутся из данных.

    Args:
        dataset: Спектрометрический набор данных
        assumed_epsilon: Предполагаемая ε

    Returns:
        Estimate: Оценка (φ̂ относительно несущей)
    """
    if dataset.mode is not DetectionMode.SPECTROMETER:
        raise ValueError("Balanced closed form needs a spectrometer dataset")
    if float(dataset.n_photons) <= 0:
        raise Degenerate("Empty dataset")

    reference, fractions, first, second = _port_statistics(dataset)
    imbalance = float(SIGNS @ fractions)
    if abs(imbalance) >= BALANCE_GUARD:
        raise OutsideRegime(f"Port imbalance {imbalance:.4f} outside the balanced regime (|.| < {BALANCE_GUARD})")

    variance = float(fractions @ second - (fractions @ first) ** 2)
    if not variance > 0:
        raise Degenerate("Dataset has no frequency spread")
    spread = math.sqrt(variance)
    amplification = math.exp(0.5 * assumed_epsilon ** 2)

    weighted_mean = reference * imbalance + float(SIGNS @ (fractions * first))
    tau_hat = amplification / (4.0 * spread) * (weighted_mean / spread - imbalance)
    phi_hat = math.pi / 2 - amplification * imbalance

    logger.info(f"Balanced closed form: tau_hat={tau_hat:.6e} s, phi_hat={phi_hat:.6f}")
    return Estimate(tau_hat=tau_hat, phi_hat=phi_hat, method=FitMethod.BALANCED_CLOSED_FORM,
                    assumed_epsilon=assumed_epsilon, phi_reference=PhiReference.CARRIER,
                    n_photons=float(dataset.n_photons))


def split_closed_form(dataset: DetectionDataset, assumed_epsilon: float = 0.0,
                      assumed_omega_noise: float = 0.0) -> Estimate:
    """
    Оценка по счётчикам split-детекторов

    φ̂ = arccos(e^{ε²/2}(P₊ − P₋))
    τ̂ = √(2π(1 + (Ω/Δω)²)) / (8Δω·√(e^{−ε²} − (P₊ − P₋)²)) · Σ_{rq} r·q·f_{rq}/(1 + q(P₊ − P₋))

    Args:
        dataset: Набор данных split-детекторов
        assumed_epsilon: Предполагаемая ε
        assumed_omega_noise: Предполагаемый Ω [рад/с]

    Returns:
        Estimate: Оценка (φ̂ относительно несущей)
    """
    if dataset.mode is not DetectionMode.SPLIT:
        raise ValueError("Split closed form needs a split-detector dataset")
    if float(dataset.n_photons) <= 0:
        raise Degenerate("Empty dataset")

    cells = dataset.cell_fractions()
    fractions = cells.sum(axis=0)
    contrast = float(fractions[0] - fractions[1])
    radicand = math.exp(-assumed_epsilon ** 2) - contrast ** 2
    if radicand <= 0:
        raise UndefinedEstimator(f"exp(-eps^2) - (P+ - P-)^2 = {radicand:.3e} <= 0")

    spread = dataset.spectrum.spread
    ratio = assumed_omega_noise / spread
    signs = SIGNS[:, None] * SIGNS[None, :]
    correlation = float(np.sum(signs * cells / (1.0 + SIGNS[None, :] * contrast)))
    tau_hat = (math.sqrt(2.0 * math.pi * (1.0 + ratio ** 2)) / (8.0 * spread * math.sqrt(radicand))
               * correlation)
    phi_hat = math.acos(math.exp(0.5 * assumed_epsilon ** 2) * contrast)

    if abs(math.sin(phi_hat)) < REGIME_FACTOR * abs(spread * tau_hat):
        logger.warning(f"Split closed form near an interference extremum: sin(phi)={math.sin(phi_hat):.3e}")

    logger.info(f"Split closed form: tau_hat={tau_hat:.6e} s, phi_hat={phi_hat:.6f}")
    return Estimate(tau_hat=tau_hat, phi_hat=phi_hat, method=FitMethod.SPLIT_CLOSED_FORM,
                    assumed_epsilon=assumed_epsilon, assumed_omega_noise=assumed_omega_noise,
                    phi_reference=PhiReference.CARRIER, n_photons=float(dataset.n_photons))


def wva_estimate(dataset: DetectionDataset, alpha: float, q_dark: int = -1) -> Estimate:
    """
    Оценка по сдвигу средней частоты тёмного порта (усиление слабым значением)

    τ̂ = −α·(⟨ω⟩_dark − ω₀)/(2Δω²), ω₀ и Δω - параметры спектра источника.

    Args:
        dataset: Спектрометрический набор данных (используется только тёмный порт)
        alpha: Рабочая отстройка α = φ − ω₀τ [рад]
        q_dark: Тёмный порт

    Returns:
        Estimate: Оценка с абсолютной фазой φ̂ = α + ω₀τ̂
    """
    if dataset.mode is not DetectionMode.SPECTROMETER:
        raise ValueError("WVA estimate needs a spectrometer dataset")
    dark = dataset.port_subset(q_dark)
    weights = dark.record_weights
    if weights.sum() <= 0:
        raise Degenerate(f"No photons in dark port {q_dark}")

    spectrum = dataset.spectrum
    shift = float(weights @ (dark.omega - spectrum.center) / weights.sum())
    tau_hat = -alpha * shift / (2.0 * spectrum.spread ** 2)
    if abs(alpha) < REGIME_FACTOR * spectrum.spread * abs(tau_hat):
        raise OutsideRegime(f"|alpha|={abs(alpha):.3e} is not >> dw*tau={spectrum.spread * abs(tau_hat):.3e}")

    logger.info(f"WVA estimate: tau_hat={tau_hat:.6e} s from {weights.sum():.6g} dark-port photons")
    return Estimate(tau_hat=tau_hat, phi_hat=alpha + spectrum.center * tau_hat, method=FitMethod.WVA_BASELINE,
                    phi_reference=PhiReference.ABSOLUTE, n_photons=float(dataset.n_photons))
