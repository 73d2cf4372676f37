"""
Numeric maximum-likelihood fitting for DelayLab
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy import optimize

from errors import Degenerate, NotConverged
from physics.dataset import DetectionDataset, DetectionMode
from .likelihood import CarrierLikelihood, build_likelihood
from .types import Estimate, FitMethod, PhiReference

logger = logging.getLogger(__name__)

# Больше записей - грубая сетка считается по гистограмме
GRID_RECORD_LIMIT = 20000


class FitOptions(BaseModel):
    """Параметры численного ML"""
    grid_theta: int = Field(64, ge=2)
    grid_phi: int = Field(64, ge=2)
    theta_window: float = Field(10.0, gt=0)
    xatol: float = Field(1e-10, gt=0)
    max_iterations: int = Field(10_000, ge=1)
    newton_steps: int = Field(20, ge=0)
    likelihood: str = Field("records", pattern="^(records|histogram)$")
    bin_width: Optional[float] = Field(None, gt=0)
    split_model: str = Field("exact", pattern="^(exact|second_order)$")
    assumed_omega_noise: float = Field(0.0, ge=0)
    # Правдоподобие симметрично к (θ, φ_c) → (−θ, −φ_c): выбирается ветвь
    # с фазой несущей в пределах ±π/2 от подсказки
    phase_hint: float = math.pi / 2


def hinted(options: FitOptions, phase: float) -> FitOptions:
    """Подсказка ветви по известной фазе несущей, если она не задана явно"""
    if "phase_hint" in options.model_fields_set:
        return options
    return options.model_copy(update={"phase_hint": phase})


def _check_identifiable(dataset: DetectionDataset):
    """Проверка вырожденности набора данных"""
    n = float(dataset.n_photons)
    if n <= 0 or (not dataset.exact and n < 2):
        raise Degenerate(f"Need at least 2 photons, got N={dataset.n_photons}")
    if dataset.mode is DetectionMode.SPLIT:
        if np.count_nonzero(dataset.counts) < 2:
            raise Degenerate("All photons fall into a single split-detector cell")
        return
    fractions = dataset.port_fractions()
    weights = dataset.record_weights
    omega = dataset.omega[weights > 0]
    single_port = np.count_nonzero(fractions) < 2
    no_spread = omega.size == 0 or np.ptp(omega) == 0.0
    if single_port and no_spread:
        raise Degenerate("Photons in one port only and no frequency spread")


def _grid_start(likelihood: CarrierLikelihood, options: FitOptions) -> Tuple[float, float, float, float]:
    """Грубый поиск по сетке (θ, φ_c); возвращает точку и шаги сетки"""
    thetas = np.linspace(-options.theta_window, options.theta_window, options.grid_theta)
    phases = np.linspace(0.0, 2.0 * math.pi, options.grid_phi, endpoint=False)
    values = likelihood.value_grid(thetas, phases)
    if not np.any(np.isfinite(values)):
        raise Degenerate("Log-likelihood is -inf on the whole search grid")
    i, j = np.unravel_index(int(np.nanargmax(np.where(np.isfinite(values), values, -np.inf))), values.shape)
    return float(thetas[i]), float(phases[j]), float(thetas[1] - thetas[0]), float(phases[1] - phases[0])


def _nelder_mead(likelihood: CarrierLikelihood, start: np.ndarray, steps: np.ndarray,
                 options: FitOptions) -> optimize.OptimizeResult:
    """Безградиентное уточнение максимума"""
    initial = likelihood.value(*start)
    scale = max(1.0, abs(initial)) if np.isfinite(initial) else 1.0

    def objective(x):
        value = likelihood.value(x[0], x[1])
        return math.inf if not np.isfinite(value) else -value

    simplex = np.array([start, start + [steps[0], 0.0], start + [0.0, steps[1]]])
    result = optimize.minimize(objective, start, method="Nelder-Mead",
                               options={"xatol": options.xatol * max(1.0, abs(start[0])),
                                        "fatol": 1e-13 * scale,
                                        "maxiter": options.max_iterations,
                                        "maxfev": 4 * options.max_iterations,
                                        "initial_simplex": simplex})
    if result.status != 0 and result.nit >= options.max_iterations:
        raise NotConverged(f"Nelder-Mead stopped after {result.nit} iterations: {result.message}")
    if result.status != 0:
        logger.warning(f"Nelder-Mead: {result.message}")
    return result


def _newton_polish(likelihood: CarrierLikelihood, x: np.ndarray, steps: int) -> Tuple[np.ndarray, int]:
    """Шаги Ньютона по аналитическому градиенту, принимаются только без убывания l"""
    value, grad, hess = likelihood.derivatives(x[0], x[1])
    taken = 0
    for _ in range(steps):
        if not np.isfinite(value) or not np.all(np.isfinite(hess)):
            break
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        candidate = x + step
        new_value, new_grad, new_hess = likelihood.derivatives(candidate[0], candidate[1])
        if not new_value >= value - 1e-14 * max(1.0, abs(value)):
            break
        x, value, grad, hess = candidate, new_value, new_grad, new_hess
        taken += 1
        if np.all(np.abs(step) <= 1e-15 * np.maximum(np.abs(x), 1e-300)):
            break
    return x, taken


def _standard_errors(hess: np.ndarray, rho: float, spread: float) -> Tuple[Optional[float], Optional[float]]:
    """Ошибки из обратной наблюдаемой информации, пересчитанные в (τ, φ)"""
    information = -hess
    if not np.all(np.isfinite(information)) or np.linalg.det(information) <= 0 or information[0, 0] <= 0:
        logger.warning("Observed information is not positive definite, standard errors omitted")
        return None, None
    covariance = np.linalg.inv(information)
    jacobian = np.array([[1.0 / spread, 0.0], [rho, 1.0]])
    covariance = jacobian @ covariance @ jacobian.T
    var_tau, var_phi = covariance[0, 0], covariance[1, 1]
    stderr_tau = math.sqrt(var_tau) if var_tau > 0 else None
    stderr_phi = math.sqrt(var_phi) if var_phi > 0 else None
    return stderr_tau, stderr_phi


def _select_branch(theta: float, phase: float, hint: float) -> Tuple[float, float]:
    """Зеркальный образ (−θ, −φ_c), если φ_c дальше π/2 от подсказки"""
    offset = math.remainder(phase - hint, 2.0 * math.pi)
    if abs(offset) > math.pi / 2:
        logger.debug(f"Mirror branch selected: theta={theta:.4g} -> {-theta:.4g}")
        return -theta, -phase
    return theta, phase


def ml_fit(dataset: DetectionDataset, assumed_epsilon: float = 0.0,
           options: Optional[FitOptions] = None) -> Estimate:
    """
    Совместная оценка (τ, φ) максимумом правдоподобия

    Сетка 64×64 по (θ, φ_c) ∈ [−θ_w, θ_w] × [0, 2π), затем Nelder–Mead
    и полировка Ньютоном по аналитическим производным.

    Args:
        dataset: Набор данных
        assumed_epsilon: Предполагаемая ε
        options: Параметры оптимизации

    Returns:
        Estimate: Оценка с ошибками из наблюдаемой информации
    """
    options = options or FitOptions()
    _check_identifiable(dataset)
    spectrum = dataset.spectrum

    fit_data = dataset
    if dataset.mode is DetectionMode.SPECTROMETER and options.likelihood == "histogram":
        fit_data = dataset.histogram(options.bin_width)
    likelihood = build_likelihood(fit_data, assumed_epsilon, options.assumed_omega_noise, options.split_model)

    grid_likelihood = likelihood
    if fit_data.mode is DetectionMode.SPECTROMETER and fit_data.q.size > GRID_RECORD_LIMIT:
        grid_likelihood = build_likelihood(fit_data.histogram(options.bin_width), assumed_epsilon)

    theta0, phase0, d_theta, d_phase = _grid_start(grid_likelihood, options)
    start = np.array([theta0, phase0])
    steps = np.array([d_theta, d_phase])
    logger.debug(f"Grid start: theta={theta0:.4g}, phase={phase0:.4g}")

    if grid_likelihood is not likelihood:
        coarse = _nelder_mead(grid_likelihood, start, steps, options)
        start = coarse.x
        steps = np.array([max(1e-6, 1e-3 * abs(start[0])), 1e-3])

    result = _nelder_mead(likelihood, start, steps, options)
    x, newton = _newton_polish(likelihood, np.array(result.x), options.newton_steps)

    value, _, hess = likelihood.derivatives(x[0], x[1])
    if not np.isfinite(value):
        value = likelihood.value(x[0], x[1])
    stderr_tau, stderr_phi = _standard_errors(hess, spectrum.rho, spectrum.spread)

    theta, phase = _select_branch(float(x[0]), float(x[1]), options.phase_hint)
    estimate = Estimate(
        tau_hat=theta / spectrum.spread,
        phi_hat=phase + spectrum.rho * theta,
        method=FitMethod.NUMERIC_ML,
        log_likelihood=value,
        converged=True,
        iterations=int(result.nit) + newton,
        stderr_tau=stderr_tau,
        stderr_phi=stderr_phi,
        assumed_epsilon=assumed_epsilon,
        assumed_omega_noise=options.assumed_omega_noise,
        phi_reference=PhiReference.ABSOLUTE,
        n_photons=float(dataset.n_photons),
    )
    logger.info(f"ML fit ({dataset.mode.value}): tau_hat={estimate.tau_hat:.6e} s, "
                f"phi_hat={estimate.phi_hat:.6f}, iterations={estimate.iterations}")
    return estimate
