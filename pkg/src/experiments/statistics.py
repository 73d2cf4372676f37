"""
Trial statistics for DelayLab campaigns
"""
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass
class TrialStatistics:
    """Статистика оценок τ̂ одной ячейки кампании"""
    count: int
    mean: float
    bias: float
    rmse: float
    rmse_se: float

    def rmse_over(self, bound: Optional[float]) -> Optional[float]:
        if bound is None or not bound > 0 or not math.isfinite(self.rmse):
            return None
        return self.rmse / bound


def summarize(estimates: Sequence[float], truth: float) -> TrialStatistics:
    """
    Смещение, RMSE и стандартная ошибка RMSE по испытаниям

    Стандартная ошибка RMSE получена дельта-методом из выборочной дисперсии
    квадратов ошибок: se(√MSE) = sd(e²) / (2√MSE·√n).

    Args:
        estimates: Оценки τ̂ успешных испытаний
        truth: Истинное значение τ

    Returns:
        TrialStatistics: Статистика (NaN при отсутствии оценок)
    """
    values = np.asarray(estimates, dtype=float)
    n = values.size
    if n == 0:
        return TrialStatistics(count=0, mean=math.nan, bias=math.nan, rmse=math.nan, rmse_se=math.nan)

    errors = values - truth
    squared = errors ** 2
    mse = float(squared.mean())
    rmse = math.sqrt(mse)
    if n > 1 and rmse > 0:
        rmse_se = float(squared.std(ddof=1)) / (2.0 * rmse * math.sqrt(n))
    else:
        rmse_se = math.nan
    mean = float(values.mean())
    return TrialStatistics(count=n, mean=mean, bias=mean - truth, rmse=rmse, rmse_se=rmse_se)


def circular_mean(phases: Sequence[float]) -> float:
    """Среднее направление фаз в [0, 2π)"""
    phases = np.asarray(phases, dtype=float)
    if phases.size == 0:
        return math.nan
    angle = math.atan2(float(np.sin(phases).mean()), float(np.cos(phases).mean()))
    return angle % (2.0 * math.pi)


def combined_ratio_error(a: TrialStatistics, b: TrialStatistics) -> float:
    """Стандартная ошибка отношения a.rmse / b.rmse (дельта-метод)"""
    ratio = a.rmse / b.rmse
    return ratio * math.hypot(a.rmse_se / a.rmse, b.rmse_se / b.rmse)
