"""Tags, timestamps, and saturating interval arithmetic.

Logical time is a ``Tag``: a (timestamp, microstep) pair under lexicographic
order. Timestamps and intervals are signed 64-bit nanosecond counts where the
extreme representable values stand in for +/- infinity. Arithmetic on them
saturates instead of wrapping, which makes addition non-associative right at
the edge of the representable range; callers that care stay away from that
regime.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

# Sentinels: the extreme 64-bit values play the role of +/- infinity.
INF = 2**63 - 1
NEG_INF = -(2**63)

_MICROSTEP_MAX = 2**32 - 1


class UndefinedSumError(ArithmeticError):
    """Raised for inf + (-inf), which has no defined value."""


class InvalidDelayError(ValueError):
    """Raised when a tag delay is negative."""


def is_finite(value: int) -> bool:
    return NEG_INF < value < INF


def _saturate(value: int) -> int:
    if value >= INF:
        return INF
    if value <= NEG_INF:
        return NEG_INF
    return value


def interval_add(a: int, b: int) -> int:
    """Add two intervals with sentinel absorption and overflow saturation."""
    if a == INF:
        if b == NEG_INF:
            raise UndefinedSumError("inf + (-inf) is undefined")
        return INF
    if a == NEG_INF:
        if b == INF:
            raise UndefinedSumError("(-inf) + inf is undefined")
        return NEG_INF
    if b == INF:
        return INF
    if b == NEG_INF:
        return NEG_INF
    return _saturate(a + b)


def interval_sub(a: int, b: int) -> int:
    """a - b under the same sentinel and saturation rules as interval_add."""
    if b == INF:
        negated = NEG_INF
    elif b == NEG_INF:
        negated = INF
    else:
        negated = -b
    return interval_add(a, negated)


@dataclass(frozen=True, order=False)
class Tag:
    """A point in logical time: nanosecond timestamp plus a microstep.

    Tags whose timestamp is a sentinel are canonicalized to microstep 0 so
    that the infinities behave as unique global extremes.
    """

    time: int
    microstep: int = 0

    def __post_init__(self) -> None:
        if not NEG_INF <= self.time <= INF:
            raise ValueError(f"timestamp out of range: {self.time}")
        if not 0 <= self.microstep <= _MICROSTEP_MAX:
            raise ValueError(f"microstep out of range: {self.microstep}")
        if not is_finite(self.time) and self.microstep != 0:
            object.__setattr__(self, "microstep", 0)

    def _key(self) -> tuple[int, int]:
        return (self.time, self.microstep)

    def __lt__(self, other: Tag) -> bool:
        return self._key() < other._key()

    def __le__(self, other: Tag) -> bool:
        return self._key() <= other._key()

    def __gt__(self, other: Tag) -> bool:
        return self._key() > other._key()

    def __ge__(self, other: Tag) -> bool:
        return self._key() >= other._key()

    def __str__(self) -> str:
        return format_tag(self)

    @property
    def timestamp(self) -> int:
        """The physical-time interpretation of this tag (microstep dropped)."""
        return self.time


TAG_MIN = Tag(NEG_INF, 0)
TAG_MAX = Tag(INF, 0)


def tag_delay(g: Tag, d: int) -> Tag:
    """Delay a tag by a nonnegative interval.

    A strictly positive delay advances the timestamp and resets the
    microstep; a zero delay increments the microstep instead, so repeated
    zero-delay hops still produce strictly increasing tags.
    """
    if d < 0:
        raise InvalidDelayError(f"negative delay: {d}")
    if d == 0:
        if not is_finite(g.time):
            return g
        return Tag(g.time, g.microstep + 1)
    return Tag(interval_add(g.time, d), 0)


def tag_compare(a: Tag, b: Tag) -> int:
    """Three-way lexicographic comparison: -1, 0, or 1."""
    ka, kb = a._key(), b._key()
    if ka < kb:
        return -1
    if ka > kb:
        return 1
    return 0


# --- textual rendering -------------------------------------------------

def format_interval(value: int) -> str:
    if value == INF:
        return "inf"
    if value == NEG_INF:
        return "-inf"
    return str(value)


def format_tag(g: Tag) -> str:
    return f"({format_interval(g.time)}, {g.microstep})"


_TAG_RE = re.compile(r"^\(\s*(-?\w+)\s*,\s*(\d+)\s*\)$")

_UNIT_NS = {
    "ns": 1,
    "nsec": 1,
    "us": 1_000,
    "usec": 1_000,
    "ms": 1_000_000,
    "msec": 1_000_000,
    "s": 1_000_000_000,
    "sec": 1_000_000_000,
}

_DURATION_RE = re.compile(r"^(-?\d+)\s*([a-z]+)?$")


def parse_interval(text: str | int) -> int:
    """Parse a duration: bare ns count, inf/-inf, or a number with a unit."""
    if isinstance(text, int):
        return text
    s = text.strip().lower()
    if s in ("inf", "+inf", "forever"):
        return INF
    if s == "-inf":
        return NEG_INF
    m = _DURATION_RE.match(s)
    if not m:
        raise ValueError(f"cannot parse duration: {text!r}")
    value = int(m.group(1))
    unit = m.group(2)
    if unit is None:
        return _saturate(value)
    if unit not in _UNIT_NS:
        raise ValueError(f"unknown time unit {unit!r} in {text!r}")
    return _saturate(value * _UNIT_NS[unit])


def parse_tag(text: str) -> Tag:
    m = _TAG_RE.match(text.strip())
    if not m:
        raise ValueError(f"cannot parse tag: {text!r}")
    return Tag(parse_interval(m.group(1)), int(m.group(2)))


# Convenience constructors used all over scenario definitions and tests.
def ms(n: int) -> int:
    return n * 1_000_000


def us(n: int) -> int:
    return n * 1_000


def sec(n: int) -> int:
    return n * 1_000_000_000
