#!/usr/bin/env python3
"""
Скрипт запуска DelayLab CLI
"""
import logging
import os
import sys

# Добавляем src в путь для импортов
sys.path.append(os.path.join(os.path.dirname(__file__), 'src'))

from config import Config
from cli.commands import main

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging():
    """Основной лог в файл и stderr, отдельный лог кампаний"""
    for path in (Config.LOG_FILE, Config.CAMPAIGN_LOG_FILE):
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)

    # stdout занят JSON-выводом команд
    logging.basicConfig(
        level=getattr(logging, Config.LOG_LEVEL.upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=[
            logging.FileHandler(Config.LOG_FILE, encoding='utf-8'),
            logging.StreamHandler(sys.stderr)
        ]
    )

    # Настройка отдельного логгера для прогресса кампаний
    campaign_logger = logging.getLogger('delaylab.campaign')
    campaign_logger.setLevel(logging.INFO)
    campaign_handler = logging.FileHandler(Config.CAMPAIGN_LOG_FILE, encoding='utf-8')
    campaign_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    campaign_logger.addHandler(campaign_handler)
    campaign_logger.propagate = False  # Не дублировать в основной лог


if __name__ == "__main__":
    setup_logging()
    if not Config.validate():
        logging.getLogger(__name__).error("Ошибка конфигурации. Проверьте переменные окружения.")
        sys.exit(1)
    sys.exit(main(sys.argv[1:]))
