import math

import numpy as np
import pytest
from sqlalchemy import create_engine
from sqlalchemy.orm import Session, sessionmaker

from chiralroute.store import ExperimentRun, RecordBase
from chiralroute.types import RouterParams, SuperpositionParams

engine = create_engine("sqlite://")
SessionLocal = sessionmaker(engine, expire_on_commit=False)

RecordBase.metadata.create_all(bind=engine)


class ExperimentRunSession(ExperimentRun):
    """Run model with a bound session factory"""

    __session__ = SessionLocal


@pytest.fixture()
def run_model():
    return ExperimentRun


@pytest.fixture()
def run_model_ws():
    return ExperimentRunSession


@pytest.fixture
def session():
    with Session(bind=engine) as session:
        yield session
        session.rollback()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def router_n20():
    """Average-fidelity peak configuration for twenty outputs"""
    return RouterParams(20, 1.0, 4.712)


@pytest.fixture
def router_n40():
    return RouterParams(40, 1.0, math.pi)


@pytest.fixture
def noisy_input():
    """0.7|1⟩ − i√0.51|2⟩"""
    return SuperpositionParams(0.7, 1.5 * math.pi)
