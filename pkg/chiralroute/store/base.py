import typing as tp

from sqlalchemy.inspection import inspect
from sqlalchemy.orm import DeclarativeBase, Session

from chiralroute.store import operations
from chiralroute.store.session import with_session

_T = tp.TypeVar("_T", bound="RecordBase")


class RecordBase(DeclarativeBase):
    """Declarative base with class-level CRUD helpers.

    Bind ``__session__`` to a sessionmaker to call the helpers without an
    explicit session.
    """

    __session__: tp.ClassVar[tp.Optional[tp.Callable[[], Session]]] = None

    @classmethod
    def _primary_key(cls) -> str:
        return inspect(cls).primary_key[0].name

    @classmethod
    @with_session
    def find(
        cls: tp.Type[_T],
        session: Session,
        /,
        *,
        rows: tp.Optional[int] = None,
        offset: int = 0,
        **filters,
    ) -> tp.Sequence[_T]:
        """Records matching ``filters``, ordered by primary key.

        Example:
        ```
        # every stored phase scan
        ExperimentRun.find(session, command="scan")
        ```

        Args:
            session (Session): SQLAlchemy session
            rows (int, optional): Number of rows to return. Defaults to None.
            offset (int, optional): Number of rows to skip. Defaults to 0.
            **filters: column equality filters
        """
        stmt = operations.find(cls, offset=offset, rows=rows, **filters)
        return session.scalars(stmt).all()

    @classmethod
    @with_session
    def find_by_pk(cls: tp.Type[_T], session: Session, /, *, pk: tp.Any) -> tp.Optional[_T]:
        """Record with primary key ``pk``, or None."""
        return session.get(cls, pk)

    @classmethod
    @with_session
    def exists(cls, session: Session, /, **filters) -> bool:
        return session.scalar(operations.count(cls, **filters)) > 0

    @classmethod
    @with_session
    def all(cls: tp.Type[_T], session: Session, /) -> tp.Sequence[_T]:
        return session.scalars(operations.find(cls)).all()

    @classmethod
    @with_session
    def delete(cls, session: Session, /, *, commit: bool = False, **filters) -> bool:
        """Delete records matching ``filters``.

        Returns:
            bool: True if anything was deleted
        """
        if not cls.exists(session, **filters):
            return False
        session.execute(operations.delete_(cls, **filters))
        if commit:
            session.commit()
        return True

    @classmethod
    @with_session
    def add_many(
        cls: tp.Type[_T], session: Session, /, *, items: tp.List[_T], commit: bool = False
    ) -> None:
        session.add_all(items)
        if commit:
            session.commit()

    @with_session
    def add(self: _T, session: Session, /, *, commit: bool = False) -> _T:
        """Add this record.

        Example:
        ```
        ExperimentRun(command="table1", config="{}").add(session, commit=True)
        ```
        """
        session.add(self)
        if commit:
            session.commit()
        return self

    @classmethod
    @with_session
    def update(
        cls, session: Session, /, *, values: dict, commit: bool = False, **filters
    ) -> int:
        """Set ``values`` on records matching ``filters``.

        Returns:
            int: number of updated rows
        """
        result = session.execute(operations.update_(cls, values=values, **filters))
        if commit:
            session.commit()
        return result.rowcount
