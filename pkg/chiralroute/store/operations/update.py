from sqlalchemy import Update, update


def update_(cls, values: dict, **filters) -> Update:
    """Update statement setting ``values`` on records matching ``filters``.

    Args:
        values (dict): column values to set

    Returns:
        Update: update statement
    """
    return update(cls).filter_by(**filters).values(**values)
