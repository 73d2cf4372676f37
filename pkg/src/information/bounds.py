"""
Closed-form precision bounds and ultimate-precision curves for DelayLab
"""
import enum
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from errors import DomainError, UndefinedBound, UndefinedBudget
from physics.interferometer import ModelParams
from .fisher import cramer_rao, fisher_spectrometer, fisher_split

logger = logging.getLogger(__name__)

BUDGET_FACTOR = 10.0


class Scheme(str, enum.Enum):
    """Схемы измерения для сравнения предельной точности"""
    STANDARD = "StandardInterferometry"
    WVA = "WeakValueAmplification"
    JOINT = "JointWeakMeasurement"


@dataclass
class PrecisionCurve:
    """Предельная точность Δτ_ult на сетке τ для одной схемы"""
    scheme: Scheme
    tau: np.ndarray
    delta_tau_ult: np.ndarray
    parameters: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        self.delta_tau_ult = np.asarray(self.delta_tau_ult, dtype=float)
        if self.tau.shape != self.delta_tau_ult.shape:
            raise ValueError("tau grid and delta_tau_ult must have the same length")
        if np.any(self.delta_tau_ult < 0):
            raise ValueError("delta_tau_ult must be non-negative")


def closed_form_bounds(spread: float, epsilon: float, omega_noise: float, phi: float,
                       n: float) -> Tuple[float, float]:
    """
    Аналитические статистические границы для двух схем детектирования

    Спектрометр: e^{ε²/2}/(4Δω√N).
    Split-детекторы: √(2π)/(4Δω√N)·[1 + ½(ε/sin φ)² + ½(Ω/Δω)²].

    Args:
        spread: Ширина спектра Δω [рад/с]
        epsilon: Амплитуда флуктуаций ε [рад]
        omega_noise: Шум считывания Ω [рад/с]
        phi: Фаза выравнивания [рад]
        n: Число фотонов N

    Returns:
        (spectrometer, split): Границы [с]
    """
    return spectrometer_bound(spread, epsilon, n), split_bound(spread, epsilon, omega_noise, phi, n)


def _check_inputs(spread: float, n: float):
    if not spread > 0:
        raise ValueError(f"Frequency spread must be positive, got {spread}")
    if not n >= 1:
        raise ValueError(f"Photon count must be >= 1, got {n}")


def spectrometer_bound(spread: float, epsilon: float, n: float) -> float:
    """e^{ε²/2}/(4Δω√N)"""
    _check_inputs(spread, n)
    return math.exp(0.5 * epsilon ** 2) / (4.0 * spread * math.sqrt(n))


def split_bound(spread: float, epsilon: float, omega_noise: float, phi: float, n: float) -> float:
    """√(2π)/(4Δω√N)·[1 + ½(ε/sin φ)² + ½(Ω/Δω)²]"""
    _check_inputs(spread, n)
    factor = bias_factor(epsilon, phi, omega_noise / spread)
    return math.sqrt(2.0 * math.pi) / (4.0 * spread * math.sqrt(n)) * factor


def bias_factor(epsilon: float, phi: float, omega_ratio: float = 0.0) -> float:
    """Множитель систематического занижения 1 + ½(ε/sin φ)² + ½(Ω/Δω)²"""
    sin_phi = math.sin(phi)
    if abs(sin_phi) < 1e-12:
        raise UndefinedBound(f"Bias factor undefined at sin(phi) = {sin_phi:.3e}")
    return 1.0 + 0.5 * (epsilon / sin_phi) ** 2 + 0.5 * omega_ratio ** 2


def photon_budget(spread: float, tau: float) -> int:
    """
    Оценка числа фотонов ≈ 10/(Δω·τ)² для хорошей точности

    Args:
        spread: Δω [рад/с]
        tau: Задержка [с]

    Returns:
        int: ceil(10/(Δωτ)²) с поглощением ошибки округления
    """
    product = spread * tau
    if product == 0:
        raise UndefinedBudget("Photon budget undefined for dw*tau = 0")
    budget = BUDGET_FACTOR / product ** 2
    nearest = round(budget)
    if abs(budget - nearest) <= 1e-9 * budget:
        return int(nearest)
    return int(math.ceil(budget))


def ultimate_curves(epsilon: float, c_wva: float, omega_ref: float,
                    tau_grid: Sequence[float]) -> List[PrecisionCurve]:
    """
    Кривые предельной точности трёх схем

    Стандартная интерферометрия: ε/ω; усиление слабым значением: C·ε;
    совместное слабое измерение: ε²τ/2.

    Args:
        epsilon: Амплитуда флуктуаций ε [рад]
        c_wva: Константа C схемы усиления [с]
        omega_ref: Опорная частота ω [рад/с]
        tau_grid: Сетка задержек [с]

    Returns:
        List[PrecisionCurve]: Три кривые
    """
    tau = np.asarray(tau_grid, dtype=float)
    if not (epsilon > 0 and c_wva > 0 and omega_ref > 0):
        raise ValueError("epsilon, C and omega_ref must be positive")
    if tau.size == 0:
        raise ValueError("tau grid must be non-empty")
    parameters = {"epsilon": epsilon, "C": c_wva, "omega": omega_ref}
    return [
        PrecisionCurve(Scheme.STANDARD, tau, np.full(tau.shape, epsilon / omega_ref), parameters),
        PrecisionCurve(Scheme.WVA, tau, np.full(tau.shape, c_wva * epsilon), parameters),
        PrecisionCurve(Scheme.JOINT, tau, 0.5 * epsilon ** 2 * np.abs(tau), parameters),
    ]


def crossover(epsilon: float, c_wva: float) -> float:
    """Задержка 2C/ε, ниже которой совместное измерение точнее схемы усиления"""
    return 2.0 * c_wva / epsilon


def export_curves(curves: Sequence[PrecisionCurve], path: Union[str, Path], gnuplot: bool = False) -> Path:
    """
    Экспорт кривых: CSV `scheme,tau,delta_tau_ult` или блоки gnuplot через пустую строку

    Args:
        curves: Кривые
        path: Путь к файлу
        gnuplot: Формат gnuplot

    Returns:
        Path: Путь к записанному файлу
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frames = [pd.DataFrame({"scheme": c.scheme.value, "tau": c.tau, "delta_tau_ult": c.delta_tau_ult})
              for c in curves]

    if not gnuplot:
        table = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(
            columns=["scheme", "tau", "delta_tau_ult"])
        table.to_csv(path, index=False, lineterminator='\n')
    else:
        with open(path, 'w', encoding='utf-8') as f:
            for index, frame in enumerate(frames):
                if index:
                    f.write('\n\n')
                f.write(f"# {curves[index].scheme.value}\n")
                frame[["tau", "delta_tau_ult"]].to_csv(f, sep=' ', index=False, header=False,
                                                       lineterminator='\n')

    logger.info(f"Curves exported to {path} ({'gnuplot' if gnuplot else 'csv'})")
    return path


def bound_audit(m: ModelParams, n: float) -> Dict[str, Optional[float]]:
    """
    Квадратурные границы Крамера–Рао рядом с аналитическими и их отношения

    Args:
        m: Параметры модели
        n: Число фотонов

    Returns:
        dict: Границы [с] и отношения квадратура / формула
    """
    spectrum = m.spectrum
    report: Dict[str, Optional[float]] = {
        "cr_spectrometer": None, "cr_split_exact": None, "cr_split_second_order": None,
        "closed_form_spectrometer": None, "closed_form_split": None,
        "ratio_spectrometer": None, "ratio_split": None,
    }

    def attempt(key: str, compute):
        try:
            report[key] = compute()
        except DomainError as e:
            logger.warning(f"Bound {key} undefined: {type(e).__name__}: {e}")

    attempt("cr_spectrometer", lambda: cramer_rao(fisher_spectrometer(m), n)[0])
    attempt("cr_split_exact", lambda: cramer_rao(fisher_split(m, "exact"), n)[0])
    attempt("cr_split_second_order", lambda: cramer_rao(fisher_split(m, "second_order"), n)[0])
    attempt("closed_form_spectrometer",
            lambda: spectrometer_bound(spectrum.spread, m.epsilon, n))
    attempt("closed_form_split",
            lambda: split_bound(spectrum.spread, m.epsilon, m.omega_noise, m.carrier_phase, n))

    if report["cr_spectrometer"] and report["closed_form_spectrometer"]:
        report["ratio_spectrometer"] = report["cr_spectrometer"] / report["closed_form_spectrometer"]
    if report["cr_split_exact"] and report["closed_form_split"]:
        report["ratio_split"] = report["cr_split_exact"] / report["closed_form_split"]
    return report
