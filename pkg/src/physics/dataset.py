"""
Detection datasets for DelayLab

Спектрометрический режим хранит записи (q, ω) с необязательными весами
(взвешенная гистограмма или квадратурные узлы для пути N = ∞), режим
split-детекторов хранит четыре счётчика n_{rq}.
"""
import enum
import json
import logging
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from errors import DatasetFormatError
from .spectrum import Spectrum

logger = logging.getLogger(__name__)

# Порядок индексов в массивах 2×2: индекс 0 ↔ +1, индекс 1 ↔ −1
SIGNS = np.array([1, -1])


def sign_index(sign: int) -> int:
    """Индекс строки/столбца для знака ±1"""
    if sign not in (1, -1):
        raise ValueError(f"Outcome must be +1 or -1, got {sign}")
    return 0 if sign == 1 else 1


class DetectionMode(enum.Enum):
    """Режимы детектирования"""
    SPECTROMETER = "spectrometer"
    SPLIT = "split"


class DatasetMetadata(BaseModel):
    """JSON-сайдкар набора данных"""
    mode: str
    seed: Optional[int] = None
    n: float
    tau: Optional[float] = None
    phi: Optional[float] = None
    epsilon: Optional[float] = None
    omega_noise: Optional[float] = None
    spectrum: Dict


class DetectionDataset:
    """Зарегистрированные исходы фотонов"""

    def __init__(self, mode: DetectionMode, spectrum: Spectrum,
                 q: np.ndarray = None, omega: np.ndarray = None, weights: np.ndarray = None,
                 counts: np.ndarray = None, seed: Optional[int] = None,
                 truth: Optional[Dict[str, float]] = None, exact: bool = False):
        """
        Инициализация набора данных

        Args:
            mode: Режим детектирования
            spectrum: Спектр источника (априорное знание для split-режима и системы единиц)
            q: Порты ±1 (спектрометр)
            omega: Зарегистрированные частоты [рад/с] (спектрометр)
            weights: Веса записей (None - все равны 1)
            counts: Счётчики n_{rq} формы (2, 2), индексы по SIGNS
            seed: Зерно генерации для синтетических данных
            truth: Истинные параметры {tau, phi, epsilon, omega_noise}
            exact: Веса задают точный закон модели (путь N = ∞), а не счёт фотонов
        """
        self.mode = mode
        self.exact = exact
        self.spectrum = spectrum
        self.seed = seed
        self.truth = dict(truth) if truth else None

        if mode is DetectionMode.SPECTROMETER:
            q = np.asarray(q if q is not None else [], dtype=np.int8)
            omega = np.asarray(omega if omega is not None else [], dtype=float)
            if q.shape != omega.shape or q.ndim != 1:
                raise ValueError("q and omega must be 1-D arrays of equal length")
            if q.size and not np.all(np.abs(q) == 1):
                raise ValueError("Port labels must be +1 or -1")
            if weights is not None:
                weights = np.asarray(weights, dtype=float)
                if weights.shape != q.shape or np.any(weights < 0):
                    raise ValueError("Weights must be non-negative and match the records")
            self.q, self.omega, self.weights = q, omega, weights
            self.counts = None
        else:
            counts = np.zeros((2, 2)) if counts is None else np.asarray(counts, dtype=float)
            if counts.shape != (2, 2) or np.any(counts < 0):
                raise ValueError("Split counts must be a non-negative 2x2 array")
            self.counts = counts
            self.q = self.omega = self.weights = None

    # --------------------------------------------------------------- свойства

    @property
    def n_photons(self) -> Union[int, float]:
        """Полное число фотонов N (сумма весов для взвешенных данных)"""
        if self.mode is DetectionMode.SPLIT:
            total = float(self.counts.sum())
            return int(total) if total.is_integer() else total
        if self.weights is None:
            return int(self.q.size)
        return float(self.weights.sum())

    @property
    def record_weights(self) -> np.ndarray:
        """Веса записей (единицы для невзвешенных данных)"""
        return np.ones(self.q.size) if self.weights is None else self.weights

    def port_fractions(self) -> np.ndarray:
        """Эмпирические доли портов f_q, индексы по SIGNS"""
        if self.mode is DetectionMode.SPLIT:
            by_port = self.counts.sum(axis=0)
        else:
            w = self.record_weights
            by_port = np.array([w[self.q == 1].sum(), w[self.q == -1].sum()])
        total = by_port.sum()
        return by_port / total if total > 0 else np.zeros(2)

    def cell_fractions(self) -> np.ndarray:
        """Эмпирические доли ячеек f_{rq} (split-режим)"""
        self._require(DetectionMode.SPLIT)
        total = self.counts.sum()
        return self.counts / total if total > 0 else np.zeros((2, 2))

    def _require(self, mode: DetectionMode):
        if self.mode is not mode:
            raise ValueError(f"Operation needs a {mode.value} dataset, got {self.mode.value}")

    # ---------------------------------------------------------- преобразования

    def flipped_ports(self) -> "DetectionDataset":
        """Набор данных с переставленными портами q → −q"""
        if self.mode is DetectionMode.SPLIT:
            return DetectionDataset(self.mode, self.spectrum, counts=self.counts[:, ::-1].copy(),
                                    seed=self.seed, truth=self.truth, exact=self.exact)
        return DetectionDataset(self.mode, self.spectrum, q=-self.q, omega=self.omega.copy(),
                                weights=self.weights, seed=self.seed, truth=self.truth, exact=self.exact)

    def scaled(self, factor: float) -> "DetectionDataset":
        """Набор данных в растянутых единицах частоты ω → λω"""
        truth = None
        if self.truth:
            truth = dict(self.truth)
            truth["tau"] = truth.get("tau", 0.0) / factor
            truth["omega_noise"] = truth.get("omega_noise", 0.0) * factor
        spectrum = self.spectrum.scaled(factor)
        if self.mode is DetectionMode.SPLIT:
            return DetectionDataset(self.mode, spectrum, counts=self.counts.copy(), seed=self.seed,
                                    truth=truth, exact=self.exact)
        return DetectionDataset(self.mode, spectrum, q=self.q.copy(), omega=self.omega * factor,
                                weights=self.weights, seed=self.seed, truth=truth, exact=self.exact)

    def port_subset(self, port: int) -> "DetectionDataset":
        """Записи только одного порта (например, тёмного)"""
        self._require(DetectionMode.SPECTROMETER)
        mask = self.q == port
        weights = None if self.weights is None else self.weights[mask]
        return DetectionDataset(self.mode, self.spectrum, q=self.q[mask], omega=self.omega[mask],
                                weights=weights, seed=self.seed, truth=self.truth, exact=self.exact)

    def histogram(self, bin_width: float = None) -> "DetectionDataset":
        """
        Взвешенная гистограмма по портам (центры бинов как записи)

        Args:
            bin_width: Ширина бина [рад/с], по умолчанию Δω/100

        Returns:
            DetectionDataset: Взвешенный набор данных
        """
        self._require(DetectionMode.SPECTROMETER)
        width = bin_width or self.spectrum.spread / 100.0
        lower, upper = self.spectrum.support
        if self.omega.size:
            lower = min(lower, float(self.omega.min()))
            upper = max(upper, float(self.omega.max()))
        n_bins = max(1, int(np.ceil((upper - lower) / width)))
        edges = lower + width * np.arange(n_bins + 1)
        centers = 0.5 * (edges[:-1] + edges[1:])
        index = np.clip(((self.omega - lower) / width).astype(np.int64), 0, n_bins - 1)

        q_out, omega_out, weight_out = [], [], []
        for port in (1, -1):
            mask = self.q == port
            counts = np.bincount(index[mask], weights=self.record_weights[mask], minlength=n_bins)
            occupied = counts > 0
            q_out.append(np.full(int(occupied.sum()), port, dtype=np.int8))
            omega_out.append(centers[occupied])
            weight_out.append(counts[occupied])

        return DetectionDataset(self.mode, self.spectrum, q=np.concatenate(q_out),
                                omega=np.concatenate(omega_out), weights=np.concatenate(weight_out),
                                seed=self.seed, truth=self.truth, exact=self.exact)

    # -------------------------------------------------------------------- I/O

    def metadata(self) -> DatasetMetadata:
        """Метаданные для JSON-сайдкара"""
        truth = self.truth or {}
        return DatasetMetadata(mode=self.mode.value, seed=self.seed, n=self.n_photons,
                               tau=truth.get("tau"), phi=truth.get("phi"),
                               epsilon=truth.get("epsilon"), omega_noise=truth.get("omega_noise"),
                               spectrum=self.spectrum.to_dict())

    def save(self, csv_path: Union[str, Path]) -> Tuple[Path, Path]:
        """
        Сохранение в CSV с заголовком и JSON-сайдкар рядом

        Args:
            csv_path: Путь к CSV

        Returns:
            (csv, json): Пути к записанным файлам
        """
        csv_path = Path(csv_path)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        sidecar = sidecar_path(csv_path)

        if self.mode is DetectionMode.SPECTROMETER:
            frame = pd.DataFrame({"q": self.q.astype(int), "omega": self.omega})
            if self.weights is not None:
                frame["weight"] = self.weights
        else:
            rows = [(int(r), int(q), self.counts[i, j]) for i, r in enumerate(SIGNS) for j, q in enumerate(SIGNS)]
            frame = pd.DataFrame(rows, columns=["r", "q", "count"])
            if np.all(np.mod(self.counts, 1) == 0):
                frame["count"] = frame["count"].astype(np.int64)

        frame.to_csv(csv_path, index=False, lineterminator='\n')
        with open(sidecar, 'w', encoding='utf-8') as f:
            f.write(self.metadata().model_dump_json(indent=2))
            f.write('\n')

        logger.info(f"Dataset saved: {csv_path} ({self.mode.value}, N={self.n_photons})")
        return csv_path, sidecar

    @classmethod
    def load(cls, csv_path: Union[str, Path]) -> "DetectionDataset":
        """
        Загрузка CSV + JSON-сайдкара с диагностикой места ошибки

        Args:
            csv_path: Путь к CSV

        Returns:
            DetectionDataset: Загруженный набор данных
        """
        csv_path = Path(csv_path)
        sidecar = sidecar_path(csv_path)
        if not csv_path.exists():
            raise DatasetFormatError(str(csv_path), None, "file not found")
        if not sidecar.exists():
            raise DatasetFormatError(str(sidecar), None, "metadata sidecar not found")

        try:
            with open(sidecar, 'r', encoding='utf-8') as f:
                meta = DatasetMetadata.model_validate(json.load(f))
            spectrum = Spectrum.from_dict(meta.spectrum)
            mode = DetectionMode(meta.mode)
        except json.JSONDecodeError as e:
            raise DatasetFormatError(str(sidecar), e.lineno, e.msg)
        except (ValidationError, KeyError, ValueError, TypeError) as e:
            raise DatasetFormatError(str(sidecar), None, f"invalid metadata: {e}")

        try:
            frame = pd.read_csv(csv_path, dtype=str, skip_blank_lines=True)
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise DatasetFormatError(str(csv_path), _parser_line(str(e)), str(e).strip())

        truth = {k: getattr(meta, k) for k in ("tau", "phi", "epsilon", "omega_noise")
                 if getattr(meta, k) is not None}

        if mode is DetectionMode.SPECTROMETER:
            columns = ["q", "omega"] + (["weight"] if "weight" in frame.columns else [])
            values = _numeric_columns(frame, columns, csv_path)
            q = values["q"]
            bad = np.flatnonzero(np.abs(q) != 1)
            if bad.size:
                raise DatasetFormatError(str(csv_path), int(bad[0]) + 2, "port q must be +1 or -1")
            weights = values.get("weight")
            if weights is not None and np.any(weights < 0):
                raise DatasetFormatError(str(csv_path), int(np.flatnonzero(weights < 0)[0]) + 2,
                                         "negative weight")
            dataset = cls(mode, spectrum, q=q.astype(np.int8), omega=values["omega"], weights=weights,
                          seed=meta.seed, truth=truth)
        else:
            values = _numeric_columns(frame, ["r", "q", "count"], csv_path)
            counts = np.zeros((2, 2))
            for row, (r, q, n) in enumerate(zip(values["r"], values["q"], values["count"])):
                if abs(r) != 1 or abs(q) != 1:
                    raise DatasetFormatError(str(csv_path), row + 2, "r and q must be +1 or -1")
                if n < 0:
                    raise DatasetFormatError(str(csv_path), row + 2, "negative count")
                counts[sign_index(int(r)), sign_index(int(q))] += n
            dataset = cls(mode, spectrum, counts=counts, seed=meta.seed, truth=truth)

        if not np.isclose(float(dataset.n_photons), meta.n, rtol=1e-12, atol=0.0):
            raise DatasetFormatError(str(sidecar), None,
                                     f"sidecar n={meta.n} does not match data N={dataset.n_photons}")

        logger.info(f"Dataset loaded: {csv_path} ({mode.value}, N={dataset.n_photons})")
        return dataset


def sidecar_path(csv_path: Union[str, Path]) -> Path:
    """Путь JSON-сайдкара для CSV"""
    return Path(csv_path).with_suffix('.json')


def _parser_line(message: str) -> Optional[int]:
    """Номер строки из сообщения парсера pandas"""
    marker = "line "
    if marker not in message:
        return None
    tail = message.split(marker, 1)[1]
    digits = ''.join(ch for ch in tail.split(',')[0] if ch.isdigit())
    return int(digits) if digits else None


def _numeric_columns(frame: pd.DataFrame, columns, csv_path: Path) -> Dict[str, np.ndarray]:
    """Проверка заголовка и преобразование колонок в числа"""
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise DatasetFormatError(str(csv_path), 1, f"missing column(s): {', '.join(missing)}")
    result = {}
    for column in columns:
        converted = pd.to_numeric(frame[column].str.strip(), errors='coerce').to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(converted))
        if bad.size:
            raise DatasetFormatError(str(csv_path), int(bad[0]) + 2,
                                     f"column '{column}': not a number: {frame[column].iloc[bad[0]]!r}")
        result[column] = converted
    return result
