"""Score memory: a FIFO of recent batches concatenated into the loss.

Stored entries are raw values, detached from any gradient computation.  The
loss sees ``[current batch, newest stored, ..., oldest stored]`` and the
gradient is afterwards restricted to the current batch with
:func:`mask_gradient`.

Entries may be score vectors or, more generally, arrays whose leading axis
indexes items (e.g. embedding rows); they are concatenated along that axis.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import InvalidInputError

__all__ = ["MemoryBuffer", "mask_gradient"]


class MemoryBuffer:
    """FIFO of the last ``capacity`` committed batches.

    Not thread-safe; a buffer belongs to a single training loop.
    """

    def __init__(self, capacity: int):
        if capacity < 0:
            raise InvalidInputError("memory capacity must be nonnegative")
        self.capacity = int(capacity)
        self._entries: deque[tuple[np.ndarray, np.ndarray]] = deque()

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def stored_items(self) -> int:
        return sum(s.shape[0] for s, _ in self._entries)

    def entries(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Stored ``(scores, labels)`` pairs, newest first."""
        return list(self._entries)

    def extend(self, batch_scores, batch_labels):
        """Concatenate the current batch with the stored ones.

        Returns ``(scores, labels, current_mask)`` where the mask is 1 exactly
        on the current-batch positions, which come first.  The batch is not
        stored; call :meth:`commit` for that.
        """
        s = np.asarray(batch_scores)
        t = np.asarray(batch_labels)
        if s.shape[0] == 0:
            raise InvalidInputError("batch must be non-empty")
        if t.shape[0] != s.shape[0]:
            raise InvalidInputError("batch scores and labels differ in length")
        scores = [s] + [e[0] for e in self._entries]
        labels = [t] + [e[1] for e in self._entries]
        mask = np.zeros(s.shape[0] + self.stored_items, dtype=np.int8)
        mask[: s.shape[0]] = 1
        return np.concatenate(scores), np.concatenate(labels), mask

    def commit(self, batch_scores, batch_labels) -> None:
        """Store a copy of the batch, evicting the oldest beyond capacity."""
        if self.capacity == 0:
            return
        self._entries.appendleft((np.array(batch_scores, copy=True), np.array(batch_labels, copy=True)))
        while len(self._entries) > self.capacity:
            self._entries.pop()

    def clear(self) -> None:
        self._entries.clear()


def mask_gradient(grad, current_mask):
    """Zero the gradient outside the current batch.

    Returns ``(masked, current)``: the full-length masked gradient and the
    current-batch slice in batch order.
    """
    g = np.asarray(grad, dtype=np.float64)
    m = np.asarray(current_mask).astype(bool)
    if g.shape[0] != m.shape[0]:
        raise InvalidInputError(f"gradient length {g.shape[0]} does not match mask length {m.shape[0]}")
    masked = np.where(m.reshape((-1,) + (1,) * (g.ndim - 1)), g, 0.0)
    return masked, masked[m]
