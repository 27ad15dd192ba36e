"""Pauli strings as paired X/Z bit vectors with a phase.

A Pauli is stored as ``i**k * H(x, z)`` where ``H(x, z)`` is the Hermitian
string with ``Y`` at sites where both bits are set. Stored generators of a
stabilizer state always have ``k`` in ``{0, 2}``; odd ``k`` only appears
transiently when anticommuting operators are multiplied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_CHARS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {v: k for k, v in _CHARS.items()}


def product_phase(x1, z1, x2, z2) -> int:
    """Power of ``i`` picked up by ``H(x1,z1) @ H(x2,z2)``, reduced mod 4."""
    x1 = np.asarray(x1, dtype=bool)
    z1 = np.asarray(z1, dtype=bool)
    x2 = np.asarray(x2, dtype=bool)
    z2 = np.asarray(z2, dtype=bool)
    plus = (x1 & z1 & ~x2 & z2) | (x1 & ~z1 & x2 & z2) | (~x1 & z1 & x2 & ~z2)
    minus = (x1 & z1 & x2 & ~z2) | (x1 & ~z1 & ~x2 & z2) | (~x1 & z1 & x2 & z2)
    return int(plus.sum() - minus.sum()) % 4


@dataclass(eq=False)
class PauliOperator:
    x_bits: np.ndarray
    z_bits: np.ndarray
    phase_exp: int = 0

    def __post_init__(self):
        self.x_bits = np.asarray(self.x_bits, dtype=np.uint8) & 1
        self.z_bits = np.asarray(self.z_bits, dtype=np.uint8) & 1
        if self.x_bits.shape != self.z_bits.shape or self.x_bits.ndim != 1:
            raise ValueError("x_bits and z_bits must be 1D arrays of equal length")
        self.phase_exp %= 4

    @classmethod
    def identity(cls, n: int) -> "PauliOperator":
        return cls(np.zeros(n, np.uint8), np.zeros(n, np.uint8))

    @classmethod
    def from_string(cls, text: str) -> "PauliOperator":
        """Parse strings like ``"+XZI"``, ``"-YY"`` or ``"iZ"``."""
        text = text.strip()
        k = 0
        if text.startswith("-i"):
            k, text = 3, text[2:]
        elif text.startswith("+i"):
            k, text = 1, text[2:]
        elif text.startswith("i"):
            k, text = 1, text[1:]
        elif text.startswith("-"):
            k, text = 2, text[1:]
        elif text.startswith("+"):
            text = text[1:]
        try:
            bits = [_BITS[c] for c in text.upper()]
        except KeyError as err:
            raise ValueError(f"bad Pauli character {err.args[0]!r}") from None
        x = np.array([b[0] for b in bits], np.uint8)
        z = np.array([b[1] for b in bits], np.uint8)
        return cls(x, z, k)

    @classmethod
    def single(cls, n: int, site: int, kind: str, sign: int = +1) -> "PauliOperator":
        p = cls.identity(n)
        p.x_bits[site], p.z_bits[site] = _BITS[kind.upper()]
        p.phase_exp = 0 if sign > 0 else 2
        return p

    @property
    def num_sites(self) -> int:
        return len(self.x_bits)

    @property
    def phase(self) -> int:
        """Real sign of a Hermitian Pauli (+1 or -1)."""
        if self.phase_exp & 1:
            raise ValueError("operator has an imaginary phase")
        return 1 if self.phase_exp == 0 else -1

    @property
    def weight(self) -> int:
        return int(np.count_nonzero(self.x_bits | self.z_bits))

    def commutes(self, other: "PauliOperator") -> bool:
        sym = np.sum(self.x_bits & other.z_bits) + np.sum(self.z_bits & other.x_bits)
        return int(sym) % 2 == 0

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        if self.num_sites != other.num_sites:
            raise ValueError("length mismatch")
        g = product_phase(self.x_bits, self.z_bits, other.x_bits, other.z_bits)
        return PauliOperator(
            self.x_bits ^ other.x_bits,
            self.z_bits ^ other.z_bits,
            self.phase_exp + other.phase_exp + g,
        )

    def __neg__(self) -> "PauliOperator":
        return PauliOperator(self.x_bits.copy(), self.z_bits.copy(), self.phase_exp + 2)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliOperator):
            return NotImplemented
        return (
            self.phase_exp == other.phase_exp
            and np.array_equal(self.x_bits, other.x_bits)
            and np.array_equal(self.z_bits, other.z_bits)
        )

    def __hash__(self):
        return hash((self.phase_exp, self.x_bits.tobytes(), self.z_bits.tobytes()))

    def __str__(self) -> str:
        prefix = ["+", "+i", "-", "-i"][self.phase_exp]
        return prefix + "".join(_CHARS[(int(a), int(b))] for a, b in zip(self.x_bits, self.z_bits))

    __repr__ = __str__
