"""Integer microsecond time base used by every simulator component."""

US_PER_S = 1_000_000


def to_us(seconds: float) -> int:
    return int(round(seconds * US_PER_S))


def to_s(us: int) -> float:
    return us / US_PER_S
