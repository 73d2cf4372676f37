"""
Estimation result types for DelayLab
"""
import math
from enum import Enum
from typing import ClassVar, Dict, List, Optional

import pandas as pd
from pydantic import BaseModel, Field, field_validator

TWO_PI = 2.0 * math.pi


def wrap_phase(phi: float) -> float:
    """Приведение фазы к [0, 2π)"""
    wrapped = math.fmod(phi, TWO_PI)
    if wrapped < 0:
        wrapped += TWO_PI
    return 0.0 if wrapped >= TWO_PI else wrapped


class FitMethod(str, Enum):
    """Методы оценки"""
    NUMERIC_ML = "NumericML"
    BALANCED_CLOSED_FORM = "BalancedClosedForm"
    SPLIT_CLOSED_FORM = "SplitClosedForm"
    WVA_BASELINE = "WvaBaseline"


class PhiReference(str, Enum):
    """Отсчёт фазы: абсолютная φ или относительно несущей φ_c = φ − ω₀τ"""
    ABSOLUTE = "absolute"
    CARRIER = "carrier"


class Estimate(BaseModel):
    """Оценка (τ̂, φ̂) с диагностикой"""
    tau_hat: float
    phi_hat: float
    method: FitMethod
    log_likelihood: Optional[float] = None
    converged: bool = True
    iterations: int = 0
    stderr_tau: Optional[float] = None
    stderr_phi: Optional[float] = None
    assumed_epsilon: float = 0.0
    assumed_omega_noise: float = 0.0
    phi_reference: PhiReference = PhiReference.ABSOLUTE
    n_photons: Optional[float] = None

    @field_validator("phi_hat")
    @classmethod
    def _wrap(cls, value: float) -> float:
        return wrap_phase(value)

    @field_validator("stderr_tau", "stderr_phi")
    @classmethod
    def _positive(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not value > 0:
            raise ValueError("standard errors must be positive")
        return value

    def to_json(self) -> str:
        return self.model_dump_json()


class AuditRecord(BaseModel):
    """Одна точка сетки аудита для одного аналитического оценщика"""
    theta_true: float
    phi_true: float
    epsilon: float
    omega_noise: float
    method: str
    tau_true: float
    tau_numeric_ml: Optional[float] = None
    tau_closed_form: Optional[float] = None
    ratio: Optional[float] = None
    failure: Optional[str] = None


class AuditSummary(BaseModel):
    """Постоянство отношения closed form / numeric ML по θ при фиксированных остальных параметрах"""
    method: str
    phi_true: float
    epsilon: float
    omega_noise: float
    points: int
    mean_ratio: Optional[float] = None
    ratio_dispersion: Optional[float] = None
    constant: bool = False


class AuditReport(BaseModel):
    """Отчёт сверки аналитических оценщиков с численным максимумом правдоподобия"""
    records: List[AuditRecord] = Field(default_factory=list)
    summary: List[AuditSummary] = Field(default_factory=list)
    input_kind: str = "exact"

    CSV_COLUMNS: ClassVar[List[str]] = ["theta_true", "phi_true", "epsilon", "omega_noise", "method", "tau_hat", "ratio"]

    def to_frame(self) -> pd.DataFrame:
        rows = [{
            "theta_true": r.theta_true,
            "phi_true": r.phi_true,
            "epsilon": r.epsilon,
            "omega_noise": r.omega_noise,
            "method": r.method,
            "tau_hat": r.tau_closed_form,
            "ratio": r.ratio,
        } for r in self.records]
        return pd.DataFrame(rows, columns=self.CSV_COLUMNS)

    def summary_for(self, method: str) -> List[AuditSummary]:
        return [s for s in self.summary if s.method == method]

    def failures(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for record in self.records:
            if record.failure:
                counts[record.failure] = counts.get(record.failure, 0) + 1
        return counts
