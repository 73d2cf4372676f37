"""
Database connection and session management for DelayLab
"""
import logging
from typing import Generator

from sqlalchemy import create_engine
from sqlalchemy.orm import Session, sessionmaker
from sqlalchemy.pool import StaticPool

from .models import Base

logger = logging.getLogger(__name__)

DEFAULT_DATABASE_URL = "sqlite:///./delaylab.db"


class DatabaseManager:
    """Менеджер базы данных архива кампаний"""

    def __init__(self, database_url: str = None):
        """
        Инициализация менеджера базы данных

        Args:
            database_url: URL подключения SQLAlchemy (по умолчанию локальный SQLite)
        """
        self.database_url = database_url or DEFAULT_DATABASE_URL

        # Создаем движок базы данных
        if self.database_url.startswith("sqlite"):
            options = {"connect_args": {"check_same_thread": False}}
            if ":memory:" in self.database_url or self.database_url == "sqlite://":
                options["poolclass"] = StaticPool
            self.engine = create_engine(self.database_url, **options)
        else:
            self.engine = create_engine(self.database_url)

        # Создаем фабрику сессий
        self.SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=self.engine)

        # Создаем таблицы
        self.create_tables()

        logger.info(f"Database initialized with URL: {self.database_url}")

    def create_tables(self):
        """Создание таблиц в базе данных"""
        try:
            Base.metadata.create_all(bind=self.engine)
            logger.info("Database tables created successfully")
        except Exception as e:
            logger.error(f"Error creating database tables: {e}")
            raise

    def get_session(self) -> Generator[Session, None, None]:
        """
        Генератор для получения сессии базы данных

        Yields:
            Session: Сессия базы данных
        """
        session = self.SessionLocal()
        try:
            yield session
        finally:
            session.close()

    def get_session_sync(self) -> Session:
        """Получение сессии без генератора (закрывает вызывающий код)"""
        return self.SessionLocal()
