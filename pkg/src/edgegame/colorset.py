"""Bit-vector color sets over a fixed universe {0, ..., universe-1}.

All set algebra is exact integer-mask arithmetic.  Uniform sampling follows a
rank contract: the j-th set color in ascending color-id order is returned,
where j is drawn uniformly from {0, ..., k-1}.  This makes every seeded run
bit-reproducible.
"""

from __future__ import annotations

import random
from typing import Iterable, Iterator

_M64 = (1 << 64) - 1


def nth_set_bit(mask: int, j: int) -> int:
    """Return the position of the j-th set bit of mask (j is 0-based, rank order)."""
    if j < 0 or j >= mask.bit_count():
        raise IndexError(f"rank {j} out of range for mask with {mask.bit_count()} bits")
    base = 0
    while True:
        chunk = mask & _M64
        c = chunk.bit_count()
        if j < c:
            break
        j -= c
        mask >>= 64
        base += 64
    width = 64
    while width > 1:
        half = width // 2
        low = chunk & ((1 << half) - 1)
        c = low.bit_count()
        if j < c:
            chunk = low
        else:
            j -= c
            chunk >>= half
            base += half
        width = half
    return base


def sample_mask(mask: int, rng: random.Random) -> int:
    """Draw a uniform element from a nonempty bitmask, per the rank contract."""
    k = mask.bit_count()
    if k == 0:
        raise ValueError("cannot sample from an empty set")
    return nth_set_bit(mask, rng.randrange(k))


class ColorSet:
    """An immutable-by-convention subset of the color universe."""

    __slots__ = ("mask", "universe")

    def __init__(self, mask: int, universe: int):
        if universe < 0:
            raise ValueError("universe must be nonnegative")
        if mask < 0 or mask >> universe:
            raise ValueError("mask has bits outside the universe")
        self.mask = mask
        self.universe = universe

    @classmethod
    def full(cls, universe: int) -> "ColorSet":
        return cls((1 << universe) - 1, universe)

    @classmethod
    def empty(cls, universe: int) -> "ColorSet":
        return cls(0, universe)

    @classmethod
    def from_colors(cls, colors: Iterable[int], universe: int) -> "ColorSet":
        mask = 0
        for c in colors:
            if not 0 <= c < universe:
                raise ValueError(f"color {c} outside universe of size {universe}")
            mask |= 1 << c
        return cls(mask, universe)

    def __contains__(self, color: int) -> bool:
        return 0 <= color < self.universe and (self.mask >> color) & 1 == 1

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __bool__(self) -> bool:
        return self.mask != 0

    def __iter__(self) -> Iterator[int]:
        mask = self.mask
        while mask:
            low = mask & -mask
            yield low.bit_length() - 1
            mask ^= low

    def _check(self, other: "ColorSet") -> None:
        if self.universe != other.universe:
            raise ValueError("color sets live in different universes")

    def __and__(self, other: "ColorSet") -> "ColorSet":
        self._check(other)
        return ColorSet(self.mask & other.mask, self.universe)

    def __or__(self, other: "ColorSet") -> "ColorSet":
        self._check(other)
        return ColorSet(self.mask | other.mask, self.universe)

    def __sub__(self, other: "ColorSet") -> "ColorSet":
        self._check(other)
        return ColorSet(self.mask & ~other.mask, self.universe)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, ColorSet)
            and self.mask == other.mask
            and self.universe == other.universe
        )

    def __hash__(self) -> int:
        return hash((self.mask, self.universe))

    def issubset(self, other: "ColorSet") -> bool:
        self._check(other)
        return self.mask & ~other.mask == 0

    def sample(self, rng: random.Random) -> int:
        """Uniform draw; raises ValueError on an empty set."""
        return sample_mask(self.mask, rng)

    def __repr__(self) -> str:
        return f"ColorSet({sorted(self)}, universe={self.universe})"
