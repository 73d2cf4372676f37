"""
DelayLab - HTTP service for precision bounds and Fisher information
"""
import logging
import math
from typing import List, Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from config import Config
from errors import DomainError
from experiments.reproductions import reproduce_scheme_comparison
from information.bounds import bias_factor, photon_budget, spectrometer_bound, split_bound
from information.fisher import cramer_rao, fisher_spectrometer, fisher_split
from physics.dataset import DetectionMode
from physics.interferometer import ModelParams
from physics.spectrum import DEFAULT_N_SIGMA, Spectrum

logger = logging.getLogger(__name__)

# Создание FastAPI приложения
app = FastAPI(
    title="DelayLab",
    description="Точность совместного слабого измерения ультракоротких задержек",
    version="1.0.0"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_methods=["*"],
    allow_headers=["*"],
)


class BoundsRequest(BaseModel):
    """Запрос аналитических границ"""
    dw: float = Field(gt=0, description="Ширина спектра [рад/с]")
    n: float = Field(ge=1, description="Число фотонов")
    epsilon: float = Field(0.0, ge=0, description="Амплитуда флуктуаций [рад]")
    omega_noise: float = Field(0.0, ge=0, description="Шум считывания [рад/с]")
    phi: float = Field(math.pi / 2, description="Фаза относительно несущей [рад]")


class BudgetRequest(BaseModel):
    dw: float = Field(gt=0)
    tau: float


class CurvesRequest(BaseModel):
    epsilon: float = Field(gt=0)
    c: float = Field(gt=0)
    omega_ref: float = Field(gt=0)
    tau: List[float] = Field(min_length=1)


class FisherRequest(BaseModel):
    """Запрос матрицы Фишера для гауссова спектра"""
    center: float = Field(gt=0, description="Центр спектра [рад/с]")
    dw: float = Field(gt=0, description="Ширина спектра [рад/с]")
    n_sigma: float = Field(DEFAULT_N_SIGMA, gt=0)
    tau: float = 0.0
    phi: float = math.pi / 2
    epsilon: float = Field(0.0, ge=0)
    omega_noise: float = Field(0.0, ge=0)
    mode: DetectionMode = DetectionMode.SPECTROMETER
    model: str = Field("exact", pattern="^(exact|second_order)$")
    n: Optional[float] = Field(None, ge=1)


@app.exception_handler(DomainError)
async def domain_error_handler(request: Request, exc: DomainError):
    """Доменные ошибки возвращаются как 422 с именем класса"""
    logger.warning(f"{request.url.path}: {type(exc).__name__}: {exc}")
    return JSONResponse(status_code=422, content={"error": type(exc).__name__, "detail": str(exc)})


@app.get("/")
async def root():
    """Корневой эндпоинт для проверки работы API"""
    return {"message": "DelayLab is running", "status": "ok"}


@app.get("/health")
async def health_check():
    """Эндпоинт для проверки здоровья сервиса"""
    return {"status": "healthy"}


@app.post("/bounds")
async def bounds(body: BoundsRequest):
    """Границы спектрометра и split-детекторов"""
    return {
        "spectrometer_bound": spectrometer_bound(body.dw, body.epsilon, body.n),
        "split_bound": split_bound(body.dw, body.epsilon, body.omega_noise, body.phi, body.n),
        "bias_factor": bias_factor(body.epsilon, body.phi, body.omega_noise / body.dw),
    }


@app.post("/budget")
async def budget(body: BudgetRequest):
    """Бюджет фотонов 10/(Δω·τ)²"""
    return {"photon_budget": photon_budget(body.dw, body.tau)}


@app.post("/curves")
async def curves(body: CurvesRequest):
    """Кривые предельной точности трёх схем"""
    comparison = reproduce_scheme_comparison(body.epsilon, body.c, body.omega_ref, body.tau)
    return comparison.model_dump()


@app.post("/fisher")
async def fisher(body: FisherRequest):
    """Информация Фишера на фотон и, при заданном n, границы Крамера–Рао"""
    spectrum = Spectrum.gaussian(body.center, body.dw, n_sigma=body.n_sigma)
    m = ModelParams(tau=body.tau, phi=body.phi, spectrum=spectrum,
                    epsilon=body.epsilon, omega_noise=body.omega_noise)
    if body.mode is DetectionMode.SPLIT:
        info = fisher_split(m, body.model)
    else:
        info = fisher_spectrometer(m)
    payload = {"fisher": info.to_dict(), "carrier": info.carrier_frame().to_dict()}
    if body.n is not None:
        delta_tau, delta_phi = cramer_rao(info, body.n)
        payload["cramer_rao"] = {"delta_tau": delta_tau, "delta_phi": delta_phi}
    return payload


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host=Config.HOST, port=Config.PORT)
