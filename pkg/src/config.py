"""
Configuration module for DelayLab
"""
import logging
import os
from typing import Optional

from dotenv import load_dotenv

# Загружаем переменные окружения из .env файла
load_dotenv()

logger = logging.getLogger(__name__)


class Config:
    """Класс конфигурации приложения"""

    # Логирование
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    LOG_FILE: str = os.getenv("LOG_FILE", "logs/app.log")
    CAMPAIGN_LOG_FILE: str = os.getenv("CAMPAIGN_LOG_FILE", "logs/campaign.log")

    # Результаты
    RESULTS_DIR: str = os.getenv("RESULTS_DIR", "results")

    # Архив кампаний (SQLAlchemy URL)
    DATABASE_URL: Optional[str] = os.getenv("DATABASE_URL")

    # Параллельность кампаний
    WORKERS: int = int(os.getenv("WORKERS", "1"))

    # FastAPI
    HOST: str = os.getenv("HOST", "127.0.0.1")
    PORT: int = int(os.getenv("PORT", "8000"))

    # Численные параметры
    QUAD_EPSABS: float = float(os.getenv("QUAD_EPSABS", "1e-12"))
    CDF_NODES: int = int(os.getenv("CDF_NODES", "4096"))

    @classmethod
    def validate(cls) -> bool:
        """
        Валидация параметров конфигурации

        Returns:
            bool: True если все параметры допустимы
        """
        problems = []
        if cls.LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            problems.append(f"LOG_LEVEL={cls.LOG_LEVEL}")
        if cls.WORKERS < 1:
            problems.append(f"WORKERS={cls.WORKERS}")
        if cls.CDF_NODES < 16:
            problems.append(f"CDF_NODES={cls.CDF_NODES}")
        if not cls.QUAD_EPSABS > 0:
            problems.append(f"QUAD_EPSABS={cls.QUAD_EPSABS}")

        if problems:
            logger.error(f"Недопустимые переменные окружения: {', '.join(problems)}")
            return False

        return True

    @classmethod
    def print_config(cls):
        """Вывод текущей конфигурации в лог"""
        logger.info("Конфигурация DelayLab:")
        logger.info(f"  • LOG_LEVEL: {cls.LOG_LEVEL}")
        logger.info(f"  • RESULTS_DIR: {cls.RESULTS_DIR}")
        logger.info(f"  • WORKERS: {cls.WORKERS}")
        logger.info(f"  • QUAD_EPSABS: {cls.QUAD_EPSABS}")
        logger.info(f"  • CDF_NODES: {cls.CDF_NODES}")
        logger.info(f"  • DATABASE_URL: {'УСТАНОВЛЕН' if cls.DATABASE_URL else 'ОТСУТСТВУЕТ'}")
