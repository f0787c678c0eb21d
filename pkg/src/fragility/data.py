"""Observed (A, Y, Yhat) count tables."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

__all__ = ["TableError", "ObservedTable", "CELLS"]

CELLS = tuple(
    (a, y, p) for a in (0, 1) for y in (0, 1) for p in (0, 1)
)


class TableError(ValueError):
    """Raised for malformed count tables."""


@dataclass(frozen=True)
class ObservedTable:
    """Counts per (attribute, observed outcome, prediction) cell.

    Under proxy bias the outcome column holds the proxy; under selection the
    counts are understood as conditional on the selection indicator, recorded
    in ``conditioned_on``.
    """

    counts: tuple[tuple[tuple[int, int, int], int], ...]
    conditioned_on: str | None = None

    @classmethod
    def from_counts(cls, counts, conditioned_on=None) -> "ObservedTable":
        cells = {}
        for cell, count in dict(counts).items():
            cell = tuple(int(v) for v in cell)
            if cell not in CELLS:
                raise TableError(f"cell {cell} out of the binary domain")
            if not isinstance(count, int) or isinstance(count, bool) or count < 0:
                raise TableError(f"count for cell {cell} must be a nonnegative integer")
            cells[cell] = count
        full = tuple((c, cells.get(c, 0)) for c in CELLS)
        table = cls(full, conditioned_on)
        if table.total <= 0:
            raise TableError("table is empty")
        return table

    @property
    def total(self) -> int:
        return sum(count for _, count in self.counts)

    def count(self, cell) -> int:
        return dict(self.counts)[tuple(cell)]

    def frequencies(self) -> dict[tuple[int, int, int], Fraction]:
        total = self.total
        return {cell: Fraction(count, total) for cell, count in self.counts}

    def marginal(self, **fixed) -> Fraction:
        """Frequency of the cells matching the given A/Y/P values."""
        key = {"a": 0, "y": 1, "p": 2}
        total = Fraction(0)
        for cell, freq in self.frequencies().items():
            if all(cell[key[k]] == v for k, v in fixed.items()):
                total += freq
        return total
