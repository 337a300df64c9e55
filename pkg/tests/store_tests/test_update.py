from sqlalchemy.orm import Session


def test_update(run_model, session: Session):
    r = run_model(command="optimize", config="{}", summary=0.5)
    r = r.add(session, commit=True)

    updated = run_model.update(
        session, values=dict(summary=0.993), commit=True, command="optimize", id=r.id
    )

    assert updated == 1
    found = run_model.find(session, id=r.id)
    assert len(found) == 1
    assert found[0].summary == 0.993
