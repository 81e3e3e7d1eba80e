"""
Lists of hook functions.

Solvers expose a :class:`CallbackList` so that callers
(for example the command-line tool) can observe progress
without the solver knowing about logging or output files.
"""
from typing import Callable, Generic, List, TypeVar, cast

T = TypeVar("T", bound=Callable)


def as_T(function):
    """
    MyPy helper: cast *function* to type *T*, giving
    :meth:`CallbackList.__call__` the signature of the hooks.
    """
    return cast(T, function)


class CallbackList(Generic[T]):
    """
    A sequence of hooks called in order of registration.

    The class is generic in the hook signature.
    """

    _callbacks: List[T]

    def __init__(self, *functions: T):
        self._callbacks = list(functions)

    def __len__(self) -> int:
        return len(self._callbacks)

    def add(self, function: T) -> None:
        """
        Append *function* to the list.
        """
        self._callbacks.append(function)

    def clear(self) -> None:
        del self._callbacks[:]

    @as_T
    def __call__(self, *args, **kwds):
        """
        Call every hook with the given arguments; results
        are ignored.
        """
        for function in self._callbacks:
            function(*args, **kwds)
