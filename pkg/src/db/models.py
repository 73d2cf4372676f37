"""
Database models for DelayLab campaign archive
"""
from datetime import datetime

from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


class CampaignRun(Base):
    """Модель прогона кампании"""
    __tablename__ = "campaign_runs"

    id = Column(Integer, primary_key=True, index=True)
    name = Column(String(200), nullable=False)
    master_seed = Column(Integer, nullable=False)
    config_json = Column(Text, nullable=False)
    created_at = Column(DateTime, default=datetime.utcnow)
    updated_at = Column(DateTime, default=datetime.utcnow, onupdate=datetime.utcnow)

    # Связи
    cells = relationship("CellRecord", back_populates="run", cascade="all, delete-orphan",
                         order_by="CellRecord.cell_index")


class CellRecord(Base):
    """Модель результата ячейки (колонки CSV кампании)"""
    __tablename__ = "cell_records"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("campaign_runs.id"), nullable=False, index=True)
    cell_index = Column(Integer, nullable=False)
    tau_true = Column(Float, nullable=False)
    phi_true = Column(Float, nullable=False)
    epsilon = Column(Float, nullable=False)
    omega_noise = Column(Float, nullable=False)
    mode = Column(String(20), nullable=False)
    estimator = Column(String(20), nullable=False)
    n_photons = Column(Integer, nullable=False)
    trials = Column(Integer, nullable=False)
    tau_hat_mean = Column(Float, nullable=True)
    bias = Column(Float, nullable=True)
    rmse = Column(Float, nullable=True)
    rmse_se = Column(Float, nullable=True)
    cr_bound = Column(Float, nullable=True)
    rmse_over_cr = Column(Float, nullable=True)
    failures = Column(Integer, default=0)
    failure_reasons = Column(Text, nullable=True)
    seed = Column(Integer, nullable=False)
    created_at = Column(DateTime, default=datetime.utcnow)
    updated_at = Column(DateTime, default=datetime.utcnow, onupdate=datetime.utcnow)

    # Связи
    run = relationship("CampaignRun", back_populates="cells")
