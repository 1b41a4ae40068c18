"""Per-PE work deque: the owner consumes oldest-first, thieves take the youngest."""

from __future__ import annotations

from collections import deque
from typing import Generic, TypeVar

T = TypeVar("T")


class StealDeque(Generic[T]):
    """Owner pushes at the tail and takes from the head (FIFO); thieves pop the tail.

    ``collections.deque.append``/``popleft``/``pop`` are single atomic
    operations, so an element is handed to exactly one caller even when the
    owner and several thieves race on the last element.
    """

    __slots__ = ("_items", "owner")

    def __init__(self, owner: int = 0):
        self._items: deque[T] = deque()
        self.owner = owner

    def push(self, item: T) -> None:
        self._items.append(item)

    def take_own(self) -> T | None:
        try:
            return self._items.popleft()
        except IndexError:
            return None

    def steal(self) -> T | None:
        try:
            return self._items.pop()
        except IndexError:
            return None

    def __len__(self) -> int:
        return len(self._items)

    def __bool__(self) -> bool:
        return bool(self._items)

    def snapshot(self) -> list[T]:
        """Head-to-tail copy, for tests and diagnostics."""
        return list(self._items)


def deque_push(dq: StealDeque[T], item: T) -> None:
    dq.push(item)


def deque_take_own(dq: StealDeque[T]) -> T | None:
    return dq.take_own()


def deque_steal(dq: StealDeque[T], thief: int | None = None) -> T | None:
    return dq.steal()
