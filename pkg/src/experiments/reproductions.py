"""
Headline reproductions for DelayLab: relative-error law and scheme comparison
"""
import logging
import math
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from errors import InsufficientPower
from estimation.closed_form import balanced_closed_form, split_closed_form
from estimation.fitting import FitOptions, hinted, ml_fit
from information.bounds import PrecisionCurve, Scheme, bias_factor, crossover, ultimate_curves
from information.fisher import cramer_rao, fisher_spectrometer, fisher_split
from physics.dataset import DetectionMode
from physics.interferometer import ModelParams, expected_dataset, sample_photons
from physics.spectrum import Spectrum
from rng import seed_sequence

logger = logging.getLogger(__name__)

POWER_FACTOR = 5.0


class RelativeErrorRow(BaseModel):
    """Одна точка проверки закона относительной ошибки"""
    epsilon: float
    omega_noise: float
    tau_true: float
    phi_true: float
    tau_hat_reference: float
    tau_hat_noisy: float
    factor_measured: float
    factor_predicted: float
    relative_error: float
    ultimate_proxy: float
    ultimate_predicted: float

    @property
    def excess_measured(self) -> float:
        return self.factor_measured - 1.0

    @property
    def excess_predicted(self) -> float:
        return self.factor_predicted - 1.0


class RelativeErrorTable(BaseModel):
    """Результат reproduce_relative_error_law"""
    mode: str
    estimator: str
    n_photons: Optional[int] = None
    rows: List[RelativeErrorRow] = Field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([row.model_dump() for row in self.rows])
        if not frame.empty:
            frame["excess_measured"] = frame["factor_measured"] - 1.0
            frame["excess_predicted"] = frame["factor_predicted"] - 1.0
        return frame


def _fit_tau(dataset, mode: DetectionMode, estimator: str, options: FitOptions) -> float:
    if estimator == "ml":
        return ml_fit(dataset, 0.0, options).tau_hat
    if estimator == "closed_form":
        if mode is DetectionMode.SPLIT:
            return split_closed_form(dataset, 0.0, 0.0).tau_hat
        return balanced_closed_form(dataset, 0.0).tau_hat
    raise ValueError(f"Unknown estimator: {estimator}")


def _check_power(m: ModelParams, mode: DetectionMode, n: int, predicted_excess: float):
    information = fisher_split(m, "exact") if mode is DetectionMode.SPLIT else fisher_spectrometer(m)
    stat = cramer_rao(information, n)[0]
    systematic = predicted_excess * abs(m.tau)
    if not systematic > POWER_FACTOR * stat:
        raise InsufficientPower(f"Predicted systematic shift {systematic:.3e} s is not > "
                                f"{POWER_FACTOR:g} x CR bound {stat:.3e} s at N={n}")


def reproduce_relative_error_law(epsilons: Sequence[float], taus: Sequence[float],
                                 mode: str, spectrum: Spectrum, n_photons: Optional[int] = None,
                                 phi: float = math.pi / 2, omega_ratios: Sequence[float] = (0.0,),
                                 estimator: str = "ml", seed: int = 0,
                                 options: Optional[FitOptions] = None) -> RelativeErrorTable:
    """
    Проверка закона систематической ошибки при неучтённых помехах

    Данные генерируются с истинными ε и Ω, оценка делается в предположении
    ε = Ω = 0. Измеренный множитель τ̂_ref/τ̂_noisy (τ̂_ref - тот же оценщик
    на данных без помех) сравнивается с 1 + ½(ε/sin φ)² + ½(Ω/Δω)².

    Args:
        epsilons: Истинные ε [рад]
        taus: Истинные задержки [с]
        mode: "spectrometer" или "split"
        spectrum: Спектр источника
        n_photons: N на точку; None - точный закон модели (N = ∞)
        phi: Фаза выравнивания относительно несущей φ_c [рад]
        omega_ratios: Истинные Ω/Δω
        estimator: "ml" или "closed_form"
        seed: Зерно для выборочного режима
        options: Параметры численного ML

    Returns:
        RelativeErrorTable: Таблица измеренных и предсказанных множителей
    """
    mode = DetectionMode(mode)
    options = hinted(options or FitOptions(), phi)
    table = RelativeErrorTable(mode=mode.value, estimator=estimator, n_photons=n_photons)

    point = 0
    for epsilon in epsilons:
        for omega_ratio in omega_ratios:
            predicted = bias_factor(epsilon, phi, omega_ratio)
            for tau in taus:
                noisy = ModelParams(tau=tau, phi=phi + spectrum.center * tau, spectrum=spectrum,
                                    epsilon=epsilon, omega_noise=omega_ratio * spectrum.spread)
                clean = noisy.replace(epsilon=0.0, omega_noise=0.0)

                if n_photons is None:
                    noisy_data = expected_dataset(noisy, mode)
                    clean_data = expected_dataset(clean, mode)
                else:
                    if predicted > 1.0:
                        _check_power(noisy, mode, n_photons, predicted - 1.0)
                    noisy_data = sample_photons(noisy, mode, n_photons, seed_sequence(seed, point, 0))
                    clean_data = sample_photons(clean, mode, n_photons, seed_sequence(seed, point, 1))
                point += 1

                tau_noisy = _fit_tau(noisy_data, mode, estimator, options)
                tau_ref = _fit_tau(clean_data, mode, estimator, options)
                table.rows.append(RelativeErrorRow(
                    epsilon=epsilon,
                    omega_noise=noisy.omega_noise,
                    tau_true=tau,
                    phi_true=phi,
                    tau_hat_reference=tau_ref,
                    tau_hat_noisy=tau_noisy,
                    factor_measured=tau_ref / tau_noisy,
                    factor_predicted=predicted,
                    relative_error=(tau_noisy - tau) / tau,
                    ultimate_proxy=abs(tau_noisy - tau),
                    ultimate_predicted=0.5 * epsilon ** 2 * abs(tau),
                ))
                logger.info(f"Relative-error law: eps={epsilon}, Omega/dw={omega_ratio}, tau={tau:.3e}: "
                            f"measured {tau_ref / tau_noisy:.6f}, predicted {predicted:.6f}")
    return table


class SchemeComparison(BaseModel):
    """Кривые предельной точности трёх схем и точка пересечения"""
    epsilon: float
    c_wva: float
    omega_ref: float
    crossover: float
    tau: List[float]
    standard: List[float]
    wva: List[float]
    joint: List[float]
    joint_below_wva: List[bool]

    def curves(self) -> List[PrecisionCurve]:
        parameters = {"epsilon": self.epsilon, "C": self.c_wva, "omega": self.omega_ref}
        return [
            PrecisionCurve(Scheme.STANDARD, self.tau, self.standard, parameters),
            PrecisionCurve(Scheme.WVA, self.tau, self.wva, parameters),
            PrecisionCurve(Scheme.JOINT, self.tau, self.joint, parameters),
        ]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "tau": self.tau,
            Scheme.STANDARD.value: self.standard,
            Scheme.WVA.value: self.wva,
            Scheme.JOINT.value: self.joint,
            "joint_below_wva": self.joint_below_wva,
        })


def reproduce_scheme_comparison(epsilon: float, c_wva: float, omega_ref: float,
                                tau_grid: Sequence[float]) -> SchemeComparison:
    """
    Сравнение предельной точности стандартной интерферометрии, усиления
    слабым значением и совместного слабого измерения

    Args:
        epsilon: ε [рад]
        c_wva: Константа C [с]
        omega_ref: Опорная частота [рад/с]
        tau_grid: Сетка задержек [с]

    Returns:
        SchemeComparison: Кривые, 2C/ε и область τ, где совместная схема лучше
    """
    standard, wva, joint = ultimate_curves(epsilon, c_wva, omega_ref, tau_grid)
    below = joint.delta_tau_ult < wva.delta_tau_ult
    point = crossover(epsilon, c_wva)
    logger.info(f"Scheme comparison: crossover at {point:.3e} s, joint below WVA on "
                f"{int(np.count_nonzero(below))}/{below.size} grid points")
    return SchemeComparison(
        epsilon=epsilon, c_wva=c_wva, omega_ref=omega_ref, crossover=point,
        tau=standard.tau.tolist(), standard=standard.delta_tau_ult.tolist(),
        wva=wva.delta_tau_ult.tolist(), joint=joint.delta_tau_ult.tolist(),
        joint_below_wva=below.tolist(),
    )
