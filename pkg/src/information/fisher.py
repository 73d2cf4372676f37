"""
Fisher information and Cramér-Rao bounds for DelayLab

Матрицы считаются в безразмерных координатах (θ, φ_c) и переводятся в
единицы СИ (τ, φ) только на выходе.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from errors import SingularInformation, SingularModel
from physics.interferometer import ModelParams, split_cell_model

logger = logging.getLogger(__name__)

FD_STEP = 1e-6


@dataclass(frozen=True)
class FisherMatrix:
    """
    Матрица Фишера 2×2 в параметрах (τ, φ)

    frame="absolute" - фаза φ, frame="carrier" - фаза φ_c = φ − ω₀τ.
    Матрица, полученная из системы несущей, хранит исходную в `source`:
    обратный сдвиг при ω₀/Δω ≫ 1 теряет точность на вычитании.
    """
    tau_tau: float
    tau_phi: float
    phi_phi: float
    per_photon: bool = True
    frame: str = "absolute"
    center: float = 0.0
    source: Optional["FisherMatrix"] = field(default=None, compare=False, repr=False)

    @classmethod
    def from_dimensionless(cls, theta_theta: float, theta_phase: float, phase_phase: float,
                           spread: float, center: float, frame: str = "carrier") -> "FisherMatrix":
        """Из безразмерных элементов (θ, φ) в единицы СИ (τ = θ/Δω)"""
        return cls(tau_tau=spread ** 2 * theta_theta, tau_phi=spread * theta_phase, phi_phi=phase_phase,
                   frame=frame, center=center)

    def as_array(self) -> np.ndarray:
        return np.array([[self.tau_tau, self.tau_phi], [self.tau_phi, self.phi_phi]])

    def _sheared(self, shift: float, frame: str, center: float, source=None) -> "FisherMatrix":
        # φ_old = φ_new + shift·τ
        return FisherMatrix(
            tau_tau=self.tau_tau + 2.0 * shift * self.tau_phi + shift ** 2 * self.phi_phi,
            tau_phi=self.tau_phi + shift * self.phi_phi,
            phi_phi=self.phi_phi,
            per_photon=self.per_photon,
            frame=frame,
            center=center,
            source=source,
        )

    def carrier_frame(self, omega0: float = None) -> "FisherMatrix":
        """
        Матрица в параметрах (τ, φ_c), φ_c = φ − ω₀τ

        Args:
            omega0: Частота несущей [рад/с], по умолчанию центр спектра

        Returns:
            FisherMatrix: Матрица в системе несущей
        """
        omega0 = self.center if omega0 is None else omega0
        if self.frame == "carrier":
            return self if omega0 == self.center else self.absolute().carrier_frame(omega0)
        if self.source is not None and omega0 == self.center:
            return self.source
        return self._sheared(omega0, "carrier", omega0)

    def absolute(self) -> "FisherMatrix":
        """Матрица в параметрах (τ, φ)"""
        if self.frame == "absolute":
            return self
        return self._sheared(-self.center, "absolute", self.center, source=self)

    def total(self, n: float) -> "FisherMatrix":
        """Информация всего набора данных N·𝓘"""
        return FisherMatrix(self.tau_tau * n, self.tau_phi * n, self.phi_phi * n,
                            per_photon=False, frame=self.frame, center=self.center,
                            source=self.source.total(n) if self.source is not None else None)

    def scaled_units(self, factor: float) -> "FisherMatrix":
        """Пересчёт при растяжении частот ω → λω (τ → τ/λ)"""
        return FisherMatrix(self.tau_tau * factor ** 2, self.tau_phi * factor, self.phi_phi,
                            per_photon=self.per_photon, frame=self.frame, center=self.center * factor,
                            source=self.source.scaled_units(factor) if self.source is not None else None)

    @property
    def determinant(self) -> float:
        # сдвиг фазы не меняет определитель, в системе несущей нет сокращения
        m = self.carrier_frame() if self.center else self
        return m.tau_tau * m.phi_phi - m.tau_phi ** 2

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.as_array())

    def inverse_diagonal(self) -> Tuple[float, float]:
        """((𝓘⁻¹)_ττ, (𝓘⁻¹)_φφ) с учётом системы отсчёта фазы"""
        carrier = self.carrier_frame() if self.center else self
        det = carrier.tau_tau * carrier.phi_phi - carrier.tau_phi ** 2
        scale = abs(carrier.tau_tau * carrier.phi_phi)
        if not det > 1e-12 * scale or not det > 0:
            raise SingularInformation(f"Fisher matrix is singular (det={det:.3e})")
        inv_tau = carrier.phi_phi / det
        inv_phi = self.absolute().tau_tau / det
        return inv_tau, inv_phi

    def to_dict(self) -> Dict:
        return {
            "tau_tau": self.tau_tau,
            "tau_phi": self.tau_phi,
            "phi_phi": self.phi_phi,
            "per_photon": self.per_photon,
            "frame": self.frame,
            "center": self.center,
        }


def _spectrometer_kernel(visibility: float, one_minus_v2: float) -> Callable:
    """K(ψ) = V²sin²ψ / (sin²ψ + (1 − V²)cos²ψ); при V = 1 равно 1"""
    v2 = visibility ** 2

    def kernel(psi):
        sin2 = math.sin(psi) ** 2
        denominator = sin2 + one_minus_v2 * math.cos(psi) ** 2
        return v2 * sin2 / denominator if denominator > 0 else v2

    return kernel


def fisher_spectrometer(m: ModelParams) -> FisherMatrix:
    """
    Информация Фишера на один фотон для спектрометрической схемы

    Сумма по портам сводится к ядру K(ψ):
    𝓘_φφ = E[K], 𝓘_θφ = −E[wK], 𝓘_θθ = E[w²K], w = ω/Δω.

    Args:
        m: Параметры модели

    Returns:
        FisherMatrix: Матрица в абсолютной системе (τ, φ)
    """
    spectrum = m.spectrum
    phase, theta = m.carrier_phase, m.theta
    if m.epsilon == 0.0 and theta == 0.0 and abs(math.sin(phase)) < 1e-12:
        raise SingularModel("Dark-port density vanishes on the whole support (tau = 0, sin(phi) = 0, eps = 0)")

    kernel = _spectrometer_kernel(m.visibility, -math.expm1(-m.epsilon ** 2))
    k = lambda u: kernel(phase - u * theta)

    phase_phase = spectrum.integrate_u(k)
    theta_phase = -spectrum.integrate_u(lambda u: u * k(u))
    theta_theta = spectrum.integrate_u(lambda u: u * u * k(u))

    carrier = FisherMatrix.from_dimensionless(theta_theta, theta_phase, phase_phase,
                                              spectrum.spread, spectrum.center)
    logger.debug(f"Spectrometer Fisher (carrier): {carrier.to_dict()}")
    return carrier.absolute()


def _finite_difference(model, theta: float, phase: float, step: float = FD_STEP):
    """Центральные разности с уточнением Ричардсона"""
    def central(h):
        d_theta = (model.probabilities(theta + h, phase) - model.probabilities(theta - h, phase)) / (2 * h)
        d_phase = (model.probabilities(theta, phase + h) - model.probabilities(theta, phase - h)) / (2 * h)
        return np.stack((d_theta, d_phase), axis=-1)

    coarse, fine = central(step), central(step / 2)
    return (4.0 * fine - coarse) / 3.0


def fisher_split(m: ModelParams, which: str = "exact", derivatives: str = "analytic") -> FisherMatrix:
    """
    Информация Фишера на один фотон для четырёх исходов split-детекторов

    Args:
        m: Параметры модели
        which: "exact" (квадратура) или "second_order"
        derivatives: "analytic" или "fd" (центральные разности с шагом 10⁻⁶)

    Returns:
        FisherMatrix: Матрица в абсолютной системе (τ, φ)
    """
    spectrum = m.spectrum
    model = split_cell_model(spectrum, m.epsilon, m.omega_ratio, which)
    theta, phase = m.theta, m.carrier_phase

    if derivatives == "analytic":
        p, grad, _ = model.derivatives(theta, phase)
    elif derivatives == "fd":
        p = model.probabilities(theta, phase)
        grad = _finite_difference(model, theta, phase)
    else:
        raise ValueError(f"Unknown derivative mode: {derivatives}")

    if np.any(p <= 0):
        raise SingularModel(f"Split-detector cell probability vanishes: min p = {p.min():.3e}")

    info = np.einsum('rqi,rqj->ij', grad / p[..., None], grad)
    carrier = FisherMatrix.from_dimensionless(info[0, 0], 0.5 * (info[0, 1] + info[1, 0]), info[1, 1],
                                              spectrum.spread, spectrum.center)
    return carrier.absolute()


def cramer_rao(f: FisherMatrix, n: float) -> Tuple[float, float]:
    """
    Границы Крамера–Рао (Δτ_stat, Δφ_stat) для N фотонов

    Args:
        f: Матрица Фишера на один фотон
        n: Число фотонов N ≥ 1

    Returns:
        (√((𝓘⁻¹)_ττ/N), √((𝓘⁻¹)_φφ/N))
    """
    if not n >= 1:
        raise ValueError(f"Photon count must be >= 1, got {n}")
    inv_tau, inv_phi = f.inverse_diagonal()
    return math.sqrt(inv_tau / n), math.sqrt(inv_phi / n)
