import typing as tp
from functools import wraps

_RT = tp.TypeVar("_RT")  # return type
P = tp.ParamSpec("P")


def with_session(f: tp.Callable[P, _RT]) -> tp.Callable[P, _RT]:
    """Supply a session to a record method.

    A session passed as the first positional argument after the record (or
    record class) is used as is. Otherwise the class-level ``__session__``
    factory opens one for the duration of the call.
    """

    @wraps(f)
    def wrapper(*args: P.args, **kwargs: P.kwargs):
        ref, rest = args[0], args[1:]
        session = rest[0] if rest else None

        if session is not None:
            return f(ref, session, *rest[1:], **kwargs)

        if ref.__session__ is not None:
            with ref.__session__() as session:
                return f(ref, session, *rest[1:], **kwargs)

        raise ValueError(
            f"{getattr(ref, '__name__', type(ref).__name__)}: "
            "no session given and no __session__ factory bound"
        )

    return wrapper
