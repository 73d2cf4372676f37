"""
Repository layer for the campaign archive
"""
import json
import logging
import math
from typing import List, Optional, Sequence

from sqlalchemy.orm import Session

from .models import CampaignRun, CellRecord

logger = logging.getLogger(__name__)


def _finite(value: Optional[float]) -> Optional[float]:
    return value if value is not None and math.isfinite(value) else None


class CampaignRepository:
    """Репозиторий для работы с прогонами кампаний"""

    def __init__(self, session: Session):
        self.session = session

    def save_run(self, config, cells: Sequence) -> CampaignRun:
        """
        Сохранение прогона и всех его ячеек

        Args:
            config: CampaignConfig прогона
            cells: Результаты ячеек (CellResult) в порядке индексов

        Returns:
            CampaignRun: Сохранённый прогон
        """
        run = CampaignRun(name=config.name, master_seed=config.run.seed, config_json=config.to_json())
        for index, cell in enumerate(cells):
            run.cells.append(CellRecord(
                cell_index=index,
                tau_true=cell.tau_true,
                phi_true=cell.phi_true,
                epsilon=cell.epsilon,
                omega_noise=cell.omega_noise,
                mode=cell.mode,
                estimator=cell.estimator,
                n_photons=cell.n_photons,
                trials=cell.trials,
                tau_hat_mean=_finite(cell.tau_hat_mean),
                bias=_finite(cell.bias),
                rmse=_finite(cell.rmse),
                rmse_se=_finite(cell.rmse_se),
                cr_bound=_finite(cell.cr_bound),
                rmse_over_cr=_finite(cell.rmse_over_cr),
                failures=cell.failures,
                failure_reasons=json.dumps(cell.failure_reasons, sort_keys=True),
                seed=cell.seed,
            ))
        self.session.add(run)
        self.session.commit()
        self.session.refresh(run)

        logger.info(f"Archived campaign run {run.id} '{run.name}' with {len(cells)} cells")
        return run

    def get_run(self, run_id: int) -> Optional[CampaignRun]:
        """
        Получение прогона по ID

        Args:
            run_id: ID прогона

        Returns:
            Optional[CampaignRun]: Прогон или None
        """
        return self.session.query(CampaignRun).filter(CampaignRun.id == run_id).first()

    def list_runs(self) -> List[CampaignRun]:
        """Все прогоны, новые первыми"""
        return self.session.query(CampaignRun).order_by(CampaignRun.id.desc()).all()

    def get_cells(self, run_id: int) -> List[CellRecord]:
        """
        Ячейки прогона в порядке индексов

        Args:
            run_id: ID прогона

        Returns:
            List[CellRecord]: Ячейки
        """
        run = self.get_run(run_id)
        if not run:
            raise ValueError(f"Campaign run with id {run_id} not found")
        return (self.session.query(CellRecord)
                .filter(CellRecord.run_id == run_id)
                .order_by(CellRecord.cell_index)
                .all())
