"""Multiplication counting.

Cost bounds in this package are stated in scalar multiplications: one
multiply (or multiply-add) of two floats is one op. Additions on their own,
comparisons, and memory traffic are free. Counters are plain objects passed
explicitly to the operations that should be charged; passing None skips all
accounting, so the hot paths stay branch-cheap.
"""

from __future__ import annotations


class OpCounter:
    """Accumulates a scalar-multiplication count."""

    __slots__ = ("ops",)

    def __init__(self) -> None:
        self.ops = 0

    def add(self, n: int | float) -> None:
        self.ops += int(n)

    def reset(self) -> None:
        self.ops = 0

    def __repr__(self) -> str:
        return f"OpCounter(ops={self.ops})"


def charge(counter: OpCounter | None, n: int | float) -> None:
    """Add n multiplies to counter, tolerating counter=None."""
    if counter is not None:
        counter.add(n)
