"""
Formula audit for DelayLab

Сверка аналитических оценщиков с численным ML на одной и той же выборке
(точный закон модели или большая синтетическая выборка). Отношение
τ̂_closed/τ̂_ML публикуется как есть; постоянство отношения по θ при
фиксированных φ, ε, Ω - основной результат аудита.
"""
import itertools
import logging
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from errors import DomainError
from physics.dataset import DetectionDataset, DetectionMode
from physics.interferometer import ModelParams, expected_dataset, sample_photons
from physics.spectrum import Spectrum
from rng import seed_sequence
from .closed_form import balanced_closed_form, split_closed_form
from .fitting import FitOptions, hinted, ml_fit
from .types import AuditRecord, AuditReport, AuditSummary

logger = logging.getLogger(__name__)

METHODS = ("balanced", "split", "split_second_order")
EXACT_TOLERANCE = 1e-6
SAMPLED_TOLERANCE = 0.02


class AuditGrid(BaseModel):
    """Сетка аудита; фазы заданы относительно несущей φ_c"""
    thetas: List[float] = Field(default_factory=list)
    phis: List[float] = Field(default_factory=lambda: [math.pi / 2])
    epsilons: List[float] = Field(default_factory=lambda: [0.0])
    omega_ratios: List[float] = Field(default_factory=lambda: [0.0])
    n_photons: Optional[int] = Field(None, ge=1)
    seed: int = Field(0, ge=0)
    methods: List[str] = Field(default_factory=lambda: list(METHODS))


def _dataset_for(method: str, m: ModelParams, grid: AuditGrid, point: int) -> Optional[DetectionDataset]:
    mode = DetectionMode.SPECTROMETER if method == "balanced" else DetectionMode.SPLIT
    if grid.n_photons is None:
        model = "second_order" if method == "split_second_order" else "exact"
        return expected_dataset(m, mode, split_model=model)
    if method == "split_second_order":
        return None
    return sample_photons(m, mode, grid.n_photons, seed_sequence(grid.seed, point, METHODS.index(method)))


def _estimators(method: str, m: ModelParams, options: FitOptions) -> Tuple[Callable, Callable]:
    """(численный ML, аналитический оценщик) в предположении истинных ε и Ω"""
    fit_options = options.model_copy(update={
        "assumed_omega_noise": m.omega_noise,
        "split_model": "second_order" if method == "split_second_order" else "exact",
    })
    numeric = lambda d: ml_fit(d, m.epsilon, hinted(fit_options, m.carrier_phase))
    if method == "balanced":
        closed = lambda d: balanced_closed_form(d, m.epsilon)
    else:
        closed = lambda d: split_closed_form(d, m.epsilon, m.omega_noise)
    return numeric, closed


def audit_formulas(grid: AuditGrid, spectrum: Spectrum, options: Optional[FitOptions] = None) -> AuditReport:
    """
    Аудит аналитических оценщиков против численного ML

    Args:
        grid: Сетка (θ, φ_c, ε, Ω/Δω) и вид входных данных
        spectrum: Спектр источника
        options: Параметры численного ML

    Returns:
        AuditReport: Записи по точкам и сводка постоянства отношений
    """
    options = options or FitOptions()
    unknown = set(grid.methods) - set(METHODS)
    if unknown:
        raise ValueError(f"Unknown audit method(s): {', '.join(sorted(unknown))}")

    input_kind = "exact" if grid.n_photons is None else "sampled"
    report = AuditReport(input_kind=input_kind)
    tolerance = EXACT_TOLERANCE if grid.n_photons is None else SAMPLED_TOLERANCE

    groups = itertools.product(grid.phis, grid.epsilons, grid.omega_ratios)
    point = 0
    for phi, epsilon, omega_ratio in groups:
        for method in grid.methods:
            ratios: List[float] = []
            for theta in grid.thetas:
                m = ModelParams.from_theta(theta, 0.0, spectrum, epsilon, omega_ratio)
                m = m.replace(phi=phi + spectrum.center * m.tau)
                record = AuditRecord(theta_true=theta, phi_true=phi, epsilon=epsilon,
                                     omega_noise=m.omega_noise, method=method, tau_true=m.tau)
                point += 1
                dataset = _dataset_for(method, m, grid, point)
                if dataset is None:
                    continue
                numeric, closed = _estimators(method, m, options)
                try:
                    record.tau_numeric_ml = numeric(dataset).tau_hat
                    record.tau_closed_form = closed(dataset).tau_hat
                except DomainError as e:
                    record.failure = type(e).__name__
                    logger.warning(f"Audit {method} at theta={theta:.3e}: {record.failure}: {e}")
                if record.tau_numeric_ml and record.tau_closed_form is not None:
                    record.ratio = record.tau_closed_form / record.tau_numeric_ml
                    ratios.append(record.ratio)
                report.records.append(record)

            if not grid.thetas or (grid.n_photons is not None and method == "split_second_order"):
                continue
            summary = AuditSummary(method=method, phi_true=phi, epsilon=epsilon,
                                   omega_noise=omega_ratio * spectrum.spread, points=len(ratios))
            if ratios:
                mean = float(np.mean(ratios))
                summary.mean_ratio = mean
                summary.ratio_dispersion = float((max(ratios) - min(ratios)) / abs(mean)) if mean else math.inf
                summary.constant = summary.ratio_dispersion < tolerance
            report.summary.append(summary)

    logger.info(f"Audit finished: {len(report.records)} records, {len(report.summary)} groups ({input_kind})")
    return report


def save_audit(report: AuditReport, json_path: Union[str, Path],
               csv_path: Union[str, Path] = None) -> Dict[str, Path]:
    """Запись отчёта аудита в JSON и CSV"""
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    with open(json_path, 'w', encoding='utf-8') as f:
        f.write(report.model_dump_json(indent=2))
        f.write('\n')
    written = {"json": json_path}
    if csv_path is not None:
        csv_path = Path(csv_path)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        report.to_frame().to_csv(csv_path, index=False, lineterminator='\n')
        written["csv"] = csv_path
    return written
