import typing as tp

from sqlalchemy import Select, func, select
from sqlalchemy.inspection import inspect


def _ordered(cls, stmt: Select) -> Select:
    # stable listings: CSV exports of stored runs must not depend on the backend
    return stmt.order_by(*inspect(cls).primary_key)


def find(
    cls,
    offset: tp.Optional[int] = None,
    rows: tp.Optional[int] = None,
    **filters,
) -> Select:
    """Select statement for records matching ``filters``, ordered by primary key.

    Args:
        cls: record class
        offset (int, optional): number of rows to skip. Defaults to None.
        rows (int, optional): number of rows to return. Defaults to None.
        **filters: column equality filters

    Returns:
        Select: select statement
    """
    stmt = _ordered(cls, select(cls).filter_by(**filters))
    if offset is not None:
        stmt = stmt.offset(offset)
    if rows is not None:
        stmt = stmt.limit(rows)
    return stmt


def count(cls, **filters) -> Select:
    """Select statement counting records matching ``filters``."""
    return select(func.count()).select_from(cls).filter_by(**filters)
