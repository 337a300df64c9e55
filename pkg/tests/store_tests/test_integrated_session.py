import pytest

from chiralroute.store import ExperimentRun


def test_is_add(run_model_ws):
    r = run_model_ws(command="table1", config="{}")
    r = r.add(commit=True)

    assert r.id in [i.id for i in r.all()]
    assert r.id in [i.id for i in r.find(command="table1")]


def test_is_delete(run_model_ws):
    r = run_model_ws(command="integrated-delete", config="{}")
    r = r.add(commit=True)

    assert r.id in [i.id for i in run_model_ws.all()]

    run_model_ws.delete(command="integrated-delete", commit=True)

    assert r.id not in [i.id for i in run_model_ws.all()]


def test_no_session_raises():
    with pytest.raises(ValueError):
        ExperimentRun.all()
