"""Indexed binary min-heap keyed by (cost, node id) with O(log n) priority updates."""

from __future__ import annotations


class OpenQueue:
    """Min-heap over node ids ordered by cost, ties broken by id.

    Entries are (cost, id) tuples compared directly; a position map gives
    O(log n) membership updates and removals, which the cost-ordered expansion
    relies on.
    """

    __slots__ = ("_heap", "_pos")

    def __init__(self):
        self._heap: list[tuple[float, int]] = []
        self._pos: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self._heap)

    def __contains__(self, node: int) -> bool:
        return node in self._pos

    def _sift_up(self, i: int) -> None:
        h = self._heap
        item = h[i]
        while i > 0:
            parent = (i - 1) // 2
            if item < h[parent]:
                h[i] = h[parent]
                self._pos[h[i][1]] = i
                i = parent
            else:
                break
        h[i] = item
        self._pos[item[1]] = i

    def _sift_down(self, i: int) -> None:
        h = self._heap
        n = len(h)
        item = h[i]
        while True:
            left = 2 * i + 1
            if left >= n:
                break
            right = left + 1
            child = left
            if right < n and h[right] < h[left]:
                child = right
            if h[child] < item:
                h[i] = h[child]
                self._pos[h[i][1]] = i
                i = child
            else:
                break
        h[i] = item
        self._pos[item[1]] = i

    def insert(self, node: int, cost: float) -> None:
        if node in self._pos:
            raise ValueError(f"node {node} already queued")
        self._heap.append((cost, node))
        self._pos[node] = len(self._heap) - 1
        self._sift_up(len(self._heap) - 1)

    def update(self, node: int, cost: float) -> None:
        """Change a queued node's priority (either direction)."""
        i = self._pos[node]
        self._heap[i] = (cost, node)
        self._sift_up(i)
        self._sift_down(self._pos[node])

    def pop(self) -> tuple[int, float]:
        cost, node = self._heap[0]
        self.remove(node)
        return node, cost

    def remove(self, node: int) -> None:
        i = self._pos.pop(node)
        last = self._heap.pop()
        if i < len(self._heap):
            self._heap[i] = last
            self._pos[last[1]] = i
            self._sift_up(i)
            self._sift_down(self._pos[last[1]])

    def top(self) -> tuple[int, float]:
        cost, node = self._heap[0]
        return node, cost

    def top_cost(self) -> float:
        return self._heap[0][0]

    def cost_of(self, node: int) -> float:
        return self._heap[self._pos[node]][0]

    def clear(self) -> None:
        self._heap.clear()
        self._pos.clear()

    def members(self) -> list[int]:
        return sorted(self._pos)
