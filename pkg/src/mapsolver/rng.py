"""Knuth's subtractive generator in the layout used by .NET ``System.Random``.

Every random decision in the package (instance weights, perturbation,
crossover, parent choice) is drawn from this generator, so a seed fully
determines a run under the virtual clock.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .errors import DomainError

MBIG = 2**31 - 1
MSEED = 161803398
_INV_MBIG = 1.0 / MBIG


def _i32(x: int) -> int:
    return (x + 2**31) % 2**32 - 2**31


@njit(cache=True)
def _fill(state, inext, inextp, lo, span, out):
    for k in range(out.shape[0]):
        inext += 1
        if inext >= 56:
            inext = 1
        inextp += 1
        if inextp >= 56:
            inextp = 1
        ret = state[inext] - state[inextp]
        if ret == MBIG:
            ret -= 1
        if ret < 0:
            ret += MBIG
        state[inext] = ret
        out[k] = lo + np.int64(ret * _INV_MBIG * span)
    return inext, inextp


class SubtractiveRng:
    """Lagged subtractive generator with a 56-slot table (lags 21 and 55)."""

    def __init__(self, seed: int):
        seed = int(seed)
        if not -(2**31) <= seed < 2**31:
            raise DomainError(f"seed {seed} does not fit in 32 bits")
        self.seed = seed
        subtraction = MBIG if seed == -(2**31) else abs(seed)
        mj = _i32(MSEED - subtraction)
        table = [0] * 56
        table[55] = mj
        mk = 1
        for i in range(1, 55):
            ii = (21 * i) % 55
            table[ii] = mk
            mk = _i32(mj - mk)
            if mk < 0:
                mk += MBIG
            mj = table[ii]
        for _ in range(4):
            for i in range(1, 56):
                table[i] = _i32(table[i] - table[1 + (i + 30) % 55])
                if table[i] < 0:
                    table[i] += MBIG
        self._table = table
        self._inext = 0
        self._inextp = 21

    def sample(self) -> int:
        """Next raw draw in [0, 2^31 - 1)."""
        t = self._table
        inext = self._inext + 1
        if inext >= 56:
            inext = 1
        inextp = self._inextp + 1
        if inextp >= 56:
            inextp = 1
        ret = t[inext] - t[inextp]
        if ret == MBIG:
            ret -= 1
        if ret < 0:
            ret += MBIG
        t[inext] = ret
        self._inext = inext
        self._inextp = inextp
        return ret

    def next_double(self) -> float:
        """Uniform float in [0, 1)."""
        return self.sample() * _INV_MBIG

    def next_int(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi); returns ``lo`` when ``lo == hi``."""
        if lo > hi:
            raise DomainError(f"empty range [{lo}, {hi})")
        span = hi - lo
        if span > MBIG:
            raise DomainError("range wider than 2^31 - 1 is not supported")
        return lo + int(self.sample() * _INV_MBIG * span)

    def ints(self, lo: int, hi: int, size: int) -> np.ndarray:
        """``size`` consecutive :meth:`next_int` draws as an int64 array."""
        if lo > hi:
            raise DomainError(f"empty range [{lo}, {hi})")
        if hi - lo > MBIG:
            raise DomainError("range wider than 2^31 - 1 is not supported")
        state = np.array(self._table, dtype=np.int64)
        out = np.empty(int(size), dtype=np.int64)
        self._inext, self._inextp = _fill(state, self._inext, self._inextp, lo, float(hi - lo), out)
        self._table = state.tolist()
        return out

    def permutation(self, k: int) -> list[int]:
        """Random permutation of range(k) by Fisher-Yates."""
        p = list(range(k))
        for i in range(k - 1, 0, -1):
            j = self.next_int(0, i + 1)
            p[i], p[j] = p[j], p[i]
        return p

    def getstate(self) -> tuple:
        return (tuple(self._table), self._inext, self._inextp)

    def setstate(self, state: tuple) -> None:
        table, self._inext, self._inextp = state
        self._table = list(table)


def rng_new(seed: int) -> SubtractiveRng:
    return SubtractiveRng(seed)
