"""
Monte Carlo campaign runner for DelayLab

Кампания - декартово произведение сеток (τ, φ, ε, Ω, N, режим, оценщик).
Каждая ячейка прогоняет `trials` независимых испытаний
«генерация → оценка» с подпотоком случайных чисел (master seed, ячейка,
испытание), поэтому результат не зависит от числа процессов.
"""
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import pandas as pd
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from config import Config
from errors import ConfigInvalid, DomainError
from estimation.closed_form import balanced_closed_form, split_closed_form, wva_estimate
from estimation.fitting import FitOptions, hinted, ml_fit
from estimation.types import Estimate, PhiReference
from information.fisher import cramer_rao, fisher_spectrometer, fisher_split
from physics.dataset import DetectionMode
from physics.interferometer import ModelParams, sample_photons
from physics.spectrum import DEFAULT_N_SIGMA, Spectrum
from rng import seed_sequence
from .statistics import circular_mean, summarize

logger = logging.getLogger(__name__)
campaign_logger = logging.getLogger("delaylab.campaign")

CSV_COLUMNS = [
    "tau_true", "phi_true", "epsilon", "omega_noise", "mode", "estimator", "n_photons", "trials",
    "tau_hat_mean", "bias", "rmse", "rmse_se", "cr_bound", "rmse_over_cr", "failures", "seed",
]

ESTIMATORS = ("ml", "balanced", "split", "wva")
COMPATIBLE = {
    "spectrometer": ("ml", "balanced", "wva"),
    "split": ("ml", "split"),
}


class SpectrumSection(BaseModel):
    """Секция [spectrum]"""
    kind: str = Field("gaussian", pattern="^(gaussian|file)$")
    center: float = Field(2.0e15, gt=0)
    spread: float = Field(1.0e15, gt=0)
    n_sigma: float = Field(DEFAULT_N_SIGMA, gt=0)
    path: Optional[str] = None

    @model_validator(mode="after")
    def _file_needs_path(self):
        if self.kind == "file" and not self.path:
            raise ValueError("spectrum.kind = 'file' needs spectrum.path")
        return self

    def build(self) -> Spectrum:
        if self.kind == "file":
            return Spectrum.from_file(self.path)
        return Spectrum.gaussian(self.center, self.spread, n_sigma=self.n_sigma)


class GridsSection(BaseModel):
    """Секция [grids]: τ [с], φ [рад], ε [рад], Ω [рад/с], N"""
    tau: List[float] = Field(min_length=1)
    phi: List[float] = Field(default_factory=lambda: [math.pi / 2], min_length=1)
    epsilon: List[float] = Field(default_factory=lambda: [0.0], min_length=1)
    omega_noise: List[float] = Field(default_factory=lambda: [0.0], min_length=1)
    n_photons: List[int] = Field(min_length=1)
    modes: List[str] = Field(default_factory=lambda: ["spectrometer"], min_length=1)
    estimators: List[str] = Field(default_factory=lambda: ["ml"], min_length=1)

    @field_validator("epsilon", "omega_noise")
    @classmethod
    def _non_negative(cls, values: List[float]) -> List[float]:
        if any(not v >= 0 for v in values):
            raise ValueError("noise amplitudes must be >= 0")
        return values

    @field_validator("n_photons")
    @classmethod
    def _counts(cls, values: List[int]) -> List[int]:
        if any(v < 0 for v in values):
            raise ValueError("photon counts must be >= 0")
        return values

    @field_validator("modes")
    @classmethod
    def _modes(cls, values: List[str]) -> List[str]:
        for value in values:
            DetectionMode(value)
        return values

    @field_validator("estimators")
    @classmethod
    def _estimators(cls, values: List[str]) -> List[str]:
        unknown = [v for v in values if v not in ESTIMATORS]
        if unknown:
            raise ValueError(f"unknown estimators {unknown}, expected one of {list(ESTIMATORS)}")
        return values


class RunSection(BaseModel):
    """Секция [run]"""
    trials: int = Field(ge=1)
    seed: int = Field(ge=0)
    workers: Optional[int] = Field(None, ge=1)
    # Сетка φ задана относительно несущей (φ_c) или абсолютно
    phi_reference: PhiReference = PhiReference.CARRIER
    fluctuation: str = Field("photon", pattern="^(photon|pulse)$")
    photons_per_pulse: int = Field(1, ge=1)


class FitSection(BaseModel):
    """Секция [fit]: предполагаемые помехи и параметры ML"""
    assumed_epsilon: float = Field(0.0, ge=0)
    assumed_omega_noise: float = Field(0.0, ge=0)
    likelihood: str = Field("histogram", pattern="^(records|histogram)$")
    split_model: str = Field("exact", pattern="^(exact|second_order)$")
    grid_theta: int = Field(64, ge=2)
    grid_phi: int = Field(64, ge=2)
    theta_window: float = Field(10.0, gt=0)
    wva_alpha: Optional[float] = None
    # None: ветвь ML выбирается по истинной фазе несущей ячейки
    phase_hint: Optional[float] = None

    def options(self) -> FitOptions:
        extra = {} if self.phase_hint is None else {"phase_hint": self.phase_hint}
        return FitOptions(grid_theta=self.grid_theta, grid_phi=self.grid_phi, theta_window=self.theta_window,
                          likelihood=self.likelihood, split_model=self.split_model,
                          assumed_omega_noise=self.assumed_omega_noise, **extra)


class OutputSection(BaseModel):
    """Секция [output]"""
    csv: str = "results/campaign.csv"
    json_path: Optional[str] = Field(None, alias="json")

    model_config = {"populate_by_name": True}


class CampaignConfig(BaseModel):
    """Конфигурация кампании"""
    name: str = "campaign"
    spectrum: SpectrumSection = Field(default_factory=SpectrumSection)
    grids: GridsSection
    run: RunSection
    fit: FitSection = Field(default_factory=FitSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _has_cells(self):
        pairs = [(m, e) for m in self.grids.modes for e in self.grids.estimators if e in COMPATIBLE[m]]
        if not pairs:
            raise ValueError(f"no estimator in {self.grids.estimators} applies to modes {self.grids.modes}")
        return self

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True)


@dataclass(frozen=True)
class CampaignCell:
    """Координаты одной ячейки"""
    index: int
    tau: float
    phi: float
    epsilon: float
    omega_noise: float
    n_photons: int
    mode: str
    estimator: str


class CellResult(BaseModel):
    """Агрегированный результат ячейки"""
    tau_true: float
    phi_true: float
    epsilon: float
    omega_noise: float
    mode: str
    estimator: str
    n_photons: int
    trials: int
    tau_hat_mean: Optional[float] = None
    phi_hat_mean: Optional[float] = None
    bias: Optional[float] = None
    rmse: Optional[float] = None
    rmse_se: Optional[float] = None
    cr_bound: Optional[float] = None
    rmse_over_cr: Optional[float] = None
    failures: int = 0
    failure_reasons: Dict[str, int] = Field(default_factory=dict)
    seed: int

    def csv_row(self) -> Dict:
        return {column: getattr(self, column) for column in CSV_COLUMNS}


def load_config(path: Union[str, Path]) -> CampaignConfig:
    """
    Загрузка конфигурации из TOML или JSON

    Args:
        path: Путь к файлу (.toml или .json)

    Returns:
        CampaignConfig: Проверенная конфигурация
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigInvalid(f"Cannot read campaign config {path}: {e}") from e

    try:
        data = json.loads(text) if path.suffix.lower() == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigInvalid(f"{path}: {e}") from e
    return parse_config(data)


def parse_config(data: Dict) -> CampaignConfig:
    """Проверка словаря конфигурации"""
    try:
        return CampaignConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigInvalid(f"Invalid campaign config: {e}") from e


def campaign_cells(config: CampaignConfig) -> List[CampaignCell]:
    """Ячейки кампании в детерминированном порядке"""
    grids = config.grids
    cells = []
    product = itertools.product(grids.tau, grids.phi, grids.epsilon, grids.omega_noise,
                                grids.n_photons, grids.modes, grids.estimators)
    for tau, phi, epsilon, omega_noise, n, mode, estimator in product:
        if estimator not in COMPATIBLE[mode]:
            continue
        cells.append(CampaignCell(len(cells), tau, phi, epsilon, omega_noise, n, mode, estimator))
    return cells


@lru_cache(maxsize=4)
def _spectrum_for(section_json: str) -> Spectrum:
    return SpectrumSection.model_validate_json(section_json).build()


def _model_for(cell: CampaignCell, spectrum: Spectrum, reference: PhiReference) -> ModelParams:
    phi = cell.phi + spectrum.center * cell.tau if reference is PhiReference.CARRIER else cell.phi
    return ModelParams(tau=cell.tau, phi=phi, spectrum=spectrum, epsilon=cell.epsilon, omega_noise=cell.omega_noise)


def _estimate(cell: CampaignCell, model: ModelParams, dataset, config: CampaignConfig) -> Estimate:
    fit = config.fit
    if cell.estimator == "ml":
        return ml_fit(dataset, fit.assumed_epsilon, hinted(fit.options(), model.carrier_phase))
    if cell.estimator == "balanced":
        return balanced_closed_form(dataset, fit.assumed_epsilon)
    if cell.estimator == "split":
        return split_closed_form(dataset, fit.assumed_epsilon, fit.assumed_omega_noise)
    alpha = fit.wva_alpha if fit.wva_alpha is not None else model.carrier_phase
    return wva_estimate(dataset, alpha)


def _phase_in_reference(estimate: Estimate, spectrum: Spectrum, reference: PhiReference) -> float:
    if estimate.phi_reference is reference:
        return estimate.phi_hat
    shift = spectrum.center * estimate.tau_hat
    return estimate.phi_hat - shift if reference is PhiReference.CARRIER else estimate.phi_hat + shift


def _cr_bound(cell: CampaignCell, model: ModelParams) -> Optional[float]:
    if cell.n_photons < 1:
        return None
    try:
        if cell.mode == DetectionMode.SPLIT.value:
            information = fisher_split(model, "exact")
        else:
            information = fisher_spectrometer(model)
        return cramer_rao(information, cell.n_photons)[0]
    except DomainError as e:
        logger.warning(f"Cell {cell.index}: CR bound undefined ({type(e).__name__})")
        return None


def run_cell(cell: CampaignCell, config: CampaignConfig) -> CellResult:
    """
    Прогон всех испытаний одной ячейки

    Args:
        cell: Координаты ячейки
        config: Конфигурация кампании

    Returns:
        CellResult: Агрегированная статистика
    """
    spectrum = _spectrum_for(config.spectrum.model_dump_json())
    model = _model_for(cell, spectrum, config.run.phi_reference)
    reference = config.run.phi_reference

    taus, phases = [], []
    reasons: Dict[str, int] = {}
    for trial in range(config.run.trials):
        seed = seed_sequence(config.run.seed, cell.index, trial)
        try:
            dataset = sample_photons(model, cell.mode, cell.n_photons, seed,
                                     fluctuation=config.run.fluctuation,
                                     photons_per_pulse=config.run.photons_per_pulse)
            estimate = _estimate(cell, model, dataset, config)
        except DomainError as e:
            name = type(e).__name__
            reasons[name] = reasons.get(name, 0) + 1
            logger.debug(f"Cell {cell.index} trial {trial}: {name}: {e}")
            continue
        taus.append(estimate.tau_hat)
        phases.append(_phase_in_reference(estimate, spectrum, reference))

    stats = summarize(taus, cell.tau)
    cr_bound = _cr_bound(cell, model)
    finite = lambda x: x if x is not None and math.isfinite(x) else None
    result = CellResult(
        tau_true=cell.tau, phi_true=cell.phi, epsilon=cell.epsilon, omega_noise=cell.omega_noise,
        mode=cell.mode, estimator=cell.estimator, n_photons=cell.n_photons, trials=config.run.trials,
        tau_hat_mean=finite(stats.mean), phi_hat_mean=finite(circular_mean(phases)),
        bias=finite(stats.bias), rmse=finite(stats.rmse), rmse_se=finite(stats.rmse_se),
        cr_bound=cr_bound, rmse_over_cr=finite(stats.rmse_over(cr_bound)),
        failures=sum(reasons.values()), failure_reasons=reasons, seed=config.run.seed,
    )
    campaign_logger.info(f"Cell {cell.index} done: tau={cell.tau:.3e} mode={cell.mode} "
                         f"estimator={cell.estimator} N={cell.n_photons} rmse={result.rmse} "
                         f"failures={result.failures}")
    return result


def _run_cell_task(task: Tuple[CampaignCell, CampaignConfig]) -> CellResult:
    return run_cell(*task)


def run_campaign(config: CampaignConfig, workers: Optional[int] = None) -> List[CellResult]:
    """
    Прогон кампании

    Args:
        config: Конфигурация
        workers: Число процессов (по умолчанию run.workers или Config.WORKERS)

    Returns:
        List[CellResult]: Результаты в порядке индексов ячеек
    """
    cells = campaign_cells(config)
    workers = workers or config.run.workers or Config.WORKERS
    campaign_logger.info(f"Campaign '{config.name}': {len(cells)} cells x {config.run.trials} trials, "
                         f"seed={config.run.seed}, workers={workers}")

    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_run_cell_task, [(cell, config) for cell in cells]))
    else:
        results = [run_cell(cell, config) for cell in cells]

    failed = sum(1 for r in results if r.failures)
    campaign_logger.info(f"Campaign '{config.name}' finished: {len(results)} cells, {failed} with failures")
    return results


def results_frame(results: List[CellResult]) -> pd.DataFrame:
    """Таблица результатов с колонками CSV кампании"""
    return pd.DataFrame([r.csv_row() for r in results], columns=CSV_COLUMNS)


def write_results(results: List[CellResult], csv_path: Union[str, Path],
                  json_path: Union[str, Path] = None) -> Path:
    """
    Запись результатов в CSV (и, по запросу, полный JSON с причинами отказов)

    Args:
        results: Результаты ячеек
        csv_path: Путь к CSV
        json_path: Путь к JSON

    Returns:
        Path: Путь к CSV
    """
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    results_frame(results).to_csv(csv_path, index=False, lineterminator='\n', float_format='%.17g')
    if json_path is not None:
        json_path = Path(json_path)
        json_path.parent.mkdir(parents=True, exist_ok=True)
        payload = [r.model_dump() for r in results]
        json_path.write_text(json.dumps(payload, indent=2) + '\n', encoding='utf-8')
    logger.info(f"Campaign results written to {csv_path}")
    return csv_path
