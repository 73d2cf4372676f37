"""
Тесты архива кампаний (SQLAlchemy, SQLite в памяти)
"""
import json
import math

import pytest

from db.database import DatabaseManager
from db.models import CampaignRun
from db.repository import CampaignRepository
from experiments.campaign import CellResult, parse_config


@pytest.fixture
def session():
    manager = DatabaseManager("sqlite:///:memory:")
    session = manager.get_session_sync()
    yield session
    session.close()


@pytest.fixture
def config():
    return parse_config({
        "name": "archive",
        "grids": {"tau": [1e-18], "n_photons": [100]},
        "run": {"trials": 2, "seed": 11},
    })


def make_cell(n_photons, rmse=None, reasons=None):
    return CellResult(tau_true=1e-18, phi_true=math.pi / 2, epsilon=0.0, omega_noise=0.0,
                      mode="spectrometer", estimator="ml", n_photons=n_photons, trials=2,
                      rmse=rmse, failures=sum((reasons or {}).values()),
                      failure_reasons=reasons or {}, seed=11)


def test_save_and_read_run(session, config):
    repository = CampaignRepository(session)
    run = repository.save_run(config, [make_cell(100, rmse=3e-19), make_cell(0, reasons={"Degenerate": 2})])
    assert run.id is not None
    assert run.master_seed == 11
    assert json.loads(run.config_json)["name"] == "archive"

    cells = repository.get_cells(run.id)
    assert [c.cell_index for c in cells] == [0, 1]
    assert cells[0].rmse == pytest.approx(3e-19)
    assert cells[1].rmse is None
    assert json.loads(cells[1].failure_reasons) == {"Degenerate": 2}


def test_list_runs_newest_first(session, config):
    repository = CampaignRepository(session)
    first = repository.save_run(config, [make_cell(100)])
    second = repository.save_run(config, [make_cell(100)])
    assert [r.id for r in repository.list_runs()] == [second.id, first.id]
    assert isinstance(repository.get_run(first.id), CampaignRun)


def test_missing_run(session):
    repository = CampaignRepository(session)
    assert repository.get_run(999) is None
    with pytest.raises(ValueError):
        repository.get_cells(999)


def test_non_finite_values_stored_as_null(session, config):
    cell = make_cell(100)
    cell.bias = math.nan
    run = CampaignRepository(session).save_run(config, [cell])
    assert run.cells[0].bias is None
