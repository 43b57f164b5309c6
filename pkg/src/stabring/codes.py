"""Bit encodings used by the safe-register protocols."""
from __future__ import annotations

from .registers import majority_decode


class RangeError(ValueError):
    pass


def graycode_encode(x: int, m: int) -> tuple:
    """Reflected binary Gray code of ``x`` as ``m`` bits, high-order bit first."""
    if not 0 <= x < (1 << m):
        raise RangeError(f"{x} does not fit in {m} bits")
    g = x ^ (x >> 1)
    return tuple((g >> (m - 1 - i)) & 1 for i in range(m))


def graycode_decode(bits) -> int:
    x = 0
    acc = 0
    for b in bits:
        acc ^= b
        x = (x << 1) | acc
    return x


def parity(bits) -> int:
    p = 0
    for b in bits:
        p ^= b
    return p


def to_bits(value: int, width: int) -> tuple:
    return tuple((value >> (width - 1 - i)) & 1 for i in range(width))


def from_bits(bits) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | b
    return v


def composite_encode(label: int, guard: int, L: int) -> tuple:
    """Guard bit tripled, then each of the ``L`` label bits tripled."""
    if not 0 <= label < (1 << L):
        raise RangeError(f"label {label} does not fit in {L} bits")
    if guard not in (0, 1):
        raise RangeError("guard must be a bit")
    out = (guard,) * 3
    for b in to_bits(label, L):
        out += (b,) * 3
    return out


def composite_decode(bits) -> tuple:
    """(guard, label) recovered by majority vote over each triple."""
    maj = majority_decode(bits)
    return maj[0], from_bits(maj[1:])
