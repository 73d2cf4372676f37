"""
Initial frequency distribution p₀(ω) for DelayLab

Спектр хранит исходные единицы СИ [рад/с], но все ядра вычислений работают
в безразмерной системе u = (ω − ω₀)/Δω, где ω₀ и Δω - пересчитанные
(а не номинальные) среднее и стандартное отклонение усечённой плотности.
"""
import enum
import logging
from functools import cached_property
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special
from scipy.interpolate import PchipInterpolator

from config import Config
from errors import DatasetFormatError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

DEFAULT_N_SIGMA = 6.0


class SpectrumKind(enum.Enum):
    """Виды спектров"""
    GAUSSIAN = "gaussian"
    TABULATED = "tabulated"


class Spectrum:
    """Нормированный спектр лазера p₀(ω) на конечном носителе [ω_min, ω_max]"""

    def __init__(self, kind: SpectrumKind, support: Tuple[float, float],
                 mu: float = None, sigma: float = None,
                 grid: np.ndarray = None, values: np.ndarray = None,
                 cdf_nodes: int = None):
        """
        Инициализация спектра (используйте фабрики gaussian/tabulated/from_file)

        Args:
            kind: Вид спектра
            support: Границы усечения [рад/с]
            mu: Номинальный центр гауссианы [рад/с]
            sigma: Номинальная ширина гауссианы [рад/с]
            grid: Строго возрастающая сетка частот для табличного спектра
            values: Неотрицательные значения плотности на сетке
            cdf_nodes: Число узлов таблицы обратной функции распределения
        """
        lower, upper = float(support[0]), float(support[1])
        if not (0.0 <= lower < upper) or not np.isfinite(upper):
            raise ValueError(f"Support must satisfy 0 <= w_min < w_max < inf, got {support}")

        self.kind = kind
        self.support = (lower, upper)
        self._cdf_nodes = int(cdf_nodes or Config.CDF_NODES)

        if kind is SpectrumKind.GAUSSIAN:
            if not (mu > 0 and sigma > 0):
                raise ValueError(f"Gaussian spectrum needs center > 0 and spread > 0, got {mu}, {sigma}")
            self.mu = float(mu)
            self.sigma = float(sigma)
            self._a = (lower - self.mu) / self.sigma
            self._b = (upper - self.mu) / self.sigma
            # Нормировка через разность хвостов точнее при симметричном усечении
            self._norm = float(special.ndtr(self._b) - special.ndtr(self._a))
            if not self._norm > 0:
                raise ValueError("Truncation interval carries no probability mass")
            self.grid = None
            self.values = None
        else:
            grid = np.asarray(grid, dtype=float)
            values = np.asarray(values, dtype=float)
            if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
                raise ValueError("Tabulated spectrum needs matching 1-D grid and values with >= 2 nodes")
            if np.any(np.diff(grid) <= 0):
                raise ValueError("Tabulated grid must be strictly increasing")
            if np.any(values < 0) or not np.all(np.isfinite(values)):
                raise ValueError("Tabulated density values must be finite and non-negative")
            total = float(np.sum(np.diff(grid) * (values[:-1] + values[1:]) / 2.0))
            if not total > 0:
                raise ValueError("Tabulated density integrates to zero")
            self.mu = None
            self.sigma = None
            self.grid = grid
            self.values = values / total
            self.grid.setflags(write=False)
            self.values.setflags(write=False)
            self._segment_mass = np.diff(self.grid) * (self.values[:-1] + self.values[1:]) / 2.0
            self._cumulative = np.concatenate(([0.0], np.cumsum(self._segment_mass)))

        self.center, variance = self._compute_moments()
        self.spread = float(np.sqrt(variance))

        logger.debug(f"Spectrum {kind.value}: center={self.center:.6e}, spread={self.spread:.6e}, "
                     f"support={self.support}")

    # ------------------------------------------------------------------ фабрики

    @classmethod
    def gaussian(cls, center: float, spread: float, n_sigma: float = DEFAULT_N_SIGMA,
                 support: Optional[Tuple[float, float]] = None, cdf_nodes: int = None) -> "Spectrum":
        """
        Гауссов спектр, усечённый по умолчанию до [max(0, ω₀−6Δω), ω₀+6Δω]

        Args:
            center: Номинальный центр ω₀ [рад/с]
            spread: Номинальная ширина Δω [рад/с]
            n_sigma: Полуширина усечения в единицах Δω
            support: Явные границы усечения (перекрывают n_sigma)
            cdf_nodes: Число узлов таблицы обратной CDF

        Returns:
            Spectrum: Гауссов спектр
        """
        if support is None:
            support = (max(0.0, center - n_sigma * spread), center + n_sigma * spread)
        return cls(SpectrumKind.GAUSSIAN, support, mu=center, sigma=spread, cdf_nodes=cdf_nodes)

    @classmethod
    def tabulated(cls, grid: Sequence[float], values: Sequence[float], cdf_nodes: int = None) -> "Spectrum":
        """Табличный спектр с линейной интерполяцией, перенормированный при создании"""
        grid = np.asarray(grid, dtype=float)
        return cls(SpectrumKind.TABULATED, (grid[0], grid[-1]), grid=grid, values=values,
                   cdf_nodes=cdf_nodes)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "Spectrum":
        """
        Загрузка табличного спектра из текстового файла

        Формат: две колонки (частота [рад/с], ненормированная плотность),
        строки, начинающиеся с '#', игнорируются.

        Args:
            path: Путь к файлу

        Returns:
            Spectrum: Табличный спектр
        """
        path = Path(path)
        if not path.exists():
            raise DatasetFormatError(str(path), None, "file not found")

        grid, values = [], []
        with open(path, 'r', encoding='utf-8') as f:
            for line_number, line in enumerate(f, start=1):
                text = line.strip()
                if not text or text.startswith('#'):
                    continue
                fields = text.replace(',', ' ').split()
                if len(fields) != 2:
                    raise DatasetFormatError(str(path), line_number,
                                             f"expected 2 columns, found {len(fields)}")
                try:
                    omega, density = float(fields[0]), float(fields[1])
                except ValueError:
                    raise DatasetFormatError(str(path), line_number, f"not a number: {text!r}")
                if density < 0:
                    raise DatasetFormatError(str(path), line_number, "negative density")
                if grid and omega <= grid[-1]:
                    raise DatasetFormatError(str(path), line_number, "frequency grid must be strictly increasing")
                grid.append(omega)
                values.append(density)

        if len(grid) < 2:
            raise DatasetFormatError(str(path), None, "need at least two data rows")
        if grid[0] < 0:
            raise DatasetFormatError(str(path), None, "frequencies must be non-negative")

        logger.info(f"Загружен табличный спектр из {path}: {len(grid)} узлов")
        try:
            return cls.tabulated(grid, values)
        except ValueError as e:
            raise DatasetFormatError(str(path), None, str(e))

    @classmethod
    def from_dict(cls, data: Dict) -> "Spectrum":
        """Восстановление спектра из словаря to_dict()"""
        kind = SpectrumKind(data["kind"])
        if kind is SpectrumKind.GAUSSIAN:
            if len(data["support"]) != 2:
                raise ValueError(f"support must have 2 bounds, got {data['support']}")
            params = data.get("parameters") or {"mu": data["center"], "sigma": data["spread"]}
            return cls.gaussian(params["mu"], params["sigma"], support=tuple(data["support"]))
        table = np.asarray(data["table"], dtype=float)
        if table.ndim != 2 or table.shape[1] != 2:
            raise ValueError(f"table must be rows of (omega, density), got shape {table.shape}")
        return cls.tabulated(table[:, 0], table[:, 1])

    def to_dict(self) -> Dict:
        """Словарь для JSON-сайдкара"""
        data = {
            "kind": self.kind.value,
            "center": self.center,
            "spread": self.spread,
            "support": list(self.support),
        }
        if self.kind is SpectrumKind.GAUSSIAN:
            data["parameters"] = {"mu": self.mu, "sigma": self.sigma}
        else:
            data["table"] = np.column_stack((self.grid, self.values)).tolist()
        return data

    def scaled(self, factor: float) -> "Spectrum":
        """Спектр в единицах, растянутых в factor раз (ω → λω)"""
        if not factor > 0:
            raise ValueError(f"Scale factor must be positive, got {factor}")
        if self.kind is SpectrumKind.GAUSSIAN:
            return Spectrum.gaussian(self.mu * factor, self.sigma * factor,
                                     support=(self.support[0] * factor, self.support[1] * factor),
                                     cdf_nodes=self._cdf_nodes)
        return Spectrum.tabulated(self.grid * factor, self.values / factor, cdf_nodes=self._cdf_nodes)

    # ------------------------------------------------------------ плотность

    def density(self, omega: ArrayLike) -> ArrayLike:
        """
        Плотность p₀(ω), равная нулю вне носителя

        Args:
            omega: Частота(ы) [рад/с]

        Returns:
            Плотность вероятности [1/(рад/с)]
        """
        omega = np.asarray(omega, dtype=float)
        inside = (omega >= self.support[0]) & (omega <= self.support[1])
        if self.kind is SpectrumKind.GAUSSIAN:
            z = (omega - self.mu) / self.sigma
            value = np.exp(-0.5 * z * z) / (np.sqrt(2.0 * np.pi) * self.sigma * self._norm)
        else:
            value = np.interp(omega, self.grid, self.values, left=0.0, right=0.0)
        result = np.where(inside, value, 0.0)
        return float(result) if result.ndim == 0 else result

    def cdf(self, omega: ArrayLike) -> ArrayLike:
        """Функция распределения спектра"""
        omega = np.clip(np.asarray(omega, dtype=float), self.support[0], self.support[1])
        if self.kind is SpectrumKind.GAUSSIAN:
            z = (omega - self.mu) / self.sigma
            result = (special.ndtr(z) - special.ndtr(self._a)) / self._norm
        else:
            index = np.clip(np.searchsorted(self.grid, omega, side='right') - 1, 0, self.grid.size - 2)
            x0 = self.grid[index]
            y0 = self.values[index]
            slope = (self.values[index + 1] - y0) / (self.grid[index + 1] - x0)
            dx = omega - x0
            result = self._cumulative[index] + dx * (y0 + 0.5 * slope * dx)
        result = np.clip(result, 0.0, 1.0)
        return float(result) if result.ndim == 0 else result

    # --------------------------------------------------- безразмерная система

    @property
    def rho(self) -> float:
        """ρ = ω₀/Δω"""
        return self.center / self.spread

    @property
    def support_u(self) -> Tuple[float, float]:
        """Носитель в переменной u = (ω − ω₀)/Δω"""
        return ((self.support[0] - self.center) / self.spread,
                (self.support[1] - self.center) / self.spread)

    @property
    def breakpoints_u(self) -> np.ndarray:
        """Внутренние изломы плотности в переменной u"""
        if self.kind is SpectrumKind.GAUSSIAN:
            return np.empty(0)
        return (self.grid[1:-1] - self.center) / self.spread

    def density_u(self, u: ArrayLike) -> ArrayLike:
        """Плотность в переменной u: Δω·p₀(ω₀ + Δω·u)"""
        u = np.asarray(u, dtype=float)
        if self.kind is SpectrumKind.GAUSSIAN:
            lower, upper = self.support_u
            scale = self.spread / self.sigma
            z = (self.center - self.mu) / self.sigma + scale * u
            value = scale * np.exp(-0.5 * z * z) / (np.sqrt(2.0 * np.pi) * self._norm)
            result = np.where((u >= lower) & (u <= upper), value, 0.0)
        else:
            result = self.spread * np.interp(self.center + self.spread * u, self.grid, self.values,
                                             left=0.0, right=0.0)
        return float(result) if np.ndim(result) == 0 else result

    def integrate_u(self, func: Callable[[float], float], lower: float = None, upper: float = None,
                    epsabs: float = None, epsrel: float = 1e-12) -> float:
        """
        Адаптивная квадратура ∫ p_u(u)·func(u) du по носителю

        Args:
            func: Скалярная функция от u
            lower: Нижний предел (обрезается носителем)
            upper: Верхний предел (обрезается носителем)
            epsabs: Абсолютная точность (по умолчанию Config.QUAD_EPSABS)
            epsrel: Относительная точность

        Returns:
            float: Значение интеграла
        """
        u_min, u_max = self.support_u
        a = u_min if lower is None else max(lower, u_min)
        b = u_max if upper is None else min(upper, u_max)
        if b <= a:
            return 0.0
        epsabs = Config.QUAD_EPSABS if epsabs is None else epsabs
        points = [p for p in self.breakpoints_u if a < p < b]
        limit = max(200, 4 * len(points) + 50)

        def integrand(u):
            return self.density_u(u) * func(u)

        value, error = integrate.quad(integrand, a, b, points=points or None,
                                      epsabs=epsabs, epsrel=epsrel, limit=limit)
        return value

    def quadrature_nodes(self, order: int = 24, panels: int = 24,
                         extra_edges: Sequence[float] = ()) -> Tuple[np.ndarray, np.ndarray]:
        """
        Составная квадратура Гаусса–Лежандра с весом p_u

        Args:
            order: Число узлов на панель
            panels: Число панелей для гауссова спектра
            extra_edges: Дополнительные границы панелей (изломы подынтегральной функции)

        Returns:
            (u, weights): узлы и веса, Σ weights ≈ 1
        """
        u_min, u_max = self.support_u
        if self.kind is SpectrumKind.GAUSSIAN:
            edges = np.linspace(u_min, u_max, panels + 1)
        else:
            edges = (self.grid - self.center) / self.spread
            order = min(order, 8)
        inside = [e for e in extra_edges if u_min < e < u_max]
        if inside:
            edges = np.union1d(edges, inside)
        x, w = leggauss(order)
        left, right = edges[:-1, None], edges[1:, None]
        half = (right - left) / 2.0
        nodes = (left + right) / 2.0 + half * x[None, :]
        weights = half * w[None, :]
        nodes = nodes.ravel()
        weights = weights.ravel() * self.density_u(nodes)
        return nodes, weights

    # ---------------------------------------------------------------- моменты

    def _compute_moments(self) -> Tuple[float, float]:
        """Среднее и дисперсия усечённой плотности квадратурой"""
        if self.kind is SpectrumKind.GAUSSIAN:
            norm_pdf = lambda z: np.exp(-0.5 * z * z) / (np.sqrt(2.0 * np.pi) * self._norm)
            m1, _ = integrate.quad(lambda z: z * norm_pdf(z), self._a, self._b,
                                   epsabs=1e-15, epsrel=1e-13, limit=200)
            m2, _ = integrate.quad(lambda z: z * z * norm_pdf(z), self._a, self._b,
                                   epsabs=1e-15, epsrel=1e-13, limit=200)
            return self.mu + self.sigma * m1, self.sigma ** 2 * (m2 - m1 * m1)

        # Симпсон точен на каждом отрезке: (ω − c)^k·линейная функция при k ≤ 2
        reference = 0.5 * (self.grid[0] + self.grid[-1])
        x0, x1 = self.grid[:-1] - reference, self.grid[1:] - reference
        y0, y1 = self.values[:-1], self.values[1:]
        xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        h = (x1 - x0) / 6.0
        m1 = float(np.sum(h * (x0 * y0 + 4.0 * xm * ym + x1 * y1)))
        m2 = float(np.sum(h * (x0 ** 2 * y0 + 4.0 * xm ** 2 * ym + x1 ** 2 * y1)))
        return reference + m1, m2 - m1 * m1

    def moments(self) -> Tuple[float, float, float]:
        """
        Моменты спектра

        Returns:
            (mean, variance, second raw moment) в единицах СИ
        """
        variance = self.spread ** 2
        return self.center, variance, variance + self.center ** 2

    # ----------------------------------------------------------------- выборка

    @cached_property
    def _inverse_cdf(self) -> PchipInterpolator:
        """Монотонная кубическая интерполяция обратной CDF на таблице узлов"""
        omega = np.linspace(self.support[0], self.support[1], self._cdf_nodes)
        if self.kind is SpectrumKind.TABULATED:
            omega = np.union1d(omega, self.grid)
        probability = np.asarray(self.cdf(omega))
        probability[0], probability[-1] = 0.0, 1.0
        # ведущий участок с нулевой плотностью: берём его правый конец
        start = int(np.flatnonzero(probability == 0.0)[-1])
        omega, probability = omega[start:], probability[start:]
        keep = np.concatenate(([True], np.diff(probability) > 0))
        return PchipInterpolator(probability[keep], omega[keep])

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> ArrayLike:
        """
        Выборка частот с законом p₀ методом обратной функции распределения

        Args:
            rng: Генератор случайных чисел, принадлежащий вызывающему коду
            size: Размер выборки (None - одно значение)

        Returns:
            Частоты [рад/с]
        """
        values = self._inverse_cdf(rng.random(size))
        return float(values) if size is None else np.asarray(values)

    def __repr__(self) -> str:
        return (f"Spectrum(kind={self.kind.value}, center={self.center:.6g}, "
                f"spread={self.spread:.6g}, support=({self.support[0]:.6g}, {self.support[1]:.6g}))")
