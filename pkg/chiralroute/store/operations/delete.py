from sqlalchemy import Delete, delete


def delete_(cls, **filters) -> Delete:
    """Delete statement for records matching ``filters``."""
    return delete(cls).filter_by(**filters)
