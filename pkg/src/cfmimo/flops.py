"""Floating-point operation accounting for the schedulers.

Convention: an ``(m x n) @ (n x p)`` product costs ``2mnp``; an ``n x n``
inversion or Cholesky-based determinant costs ``n^3``; a length-``n`` inner
product or squared norm costs ``2n``. Complex arithmetic is not weighted
separately. Only relative comparisons between schedulers are meaningful.
"""

from __future__ import annotations


class FlopCounter:
    def __init__(self):
        self.count = 0

    def add(self, n: int) -> None:
        self.count += int(n)

    def matmul(self, m: int, n: int, p: int) -> None:
        self.count += 2 * m * n * p

    def inverse(self, n: int) -> None:
        self.count += n**3

    def det(self, n: int) -> None:
        self.count += n**3

    def inner(self, n: int) -> None:
        self.count += 2 * n

    def __int__(self):
        return self.count

    def __repr__(self):
        return f"FlopCounter({self.count})"


class _NullCounter(FlopCounter):
    def add(self, n):
        pass

    def matmul(self, m, n, p):
        pass

    def inverse(self, n):
        pass

    def det(self, n):
        pass

    def inner(self, n):
        pass


NULL_COUNTER = _NullCounter()
