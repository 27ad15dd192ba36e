"""The two-qubit Clifford group modulo global phase (11,520 elements).

An element is a symplectic 4x4 matrix over GF(2) (720 of them) together with
four sign bits, one per image of the generators X_a, Z_a, X_b, Z_b. Local
Paulis are encoded as a 4-bit index ``x_a | z_a << 1 | x_b << 2 | z_b << 3``.

``action_tables()`` returns ``(out, flip)``: ``out[g, p]`` is the 4-bit image
of local Pauli ``p`` under gate ``g`` and ``flip[g, p]`` is 1 when the image
carries a minus sign.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import product

import numpy as np

from .pauli import product_phase

GROUP_ORDER = 11520
NUM_SYMPLECTIC = 720

# symplectic form for (x_a, z_a, x_b, z_b)
_OMEGA = np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.uint8)


def _vec(p: int) -> np.ndarray:
    return np.array([(p >> i) & 1 for i in range(4)], dtype=np.uint8)


def _sym(u: int, v: int) -> int:
    return int(_vec(u) @ _OMEGA @ _vec(v)) & 1


def _symplectic_images() -> list[tuple[int, int, int, int]]:
    """All 4-tuples (images of X_a, Z_a, X_b, Z_b) that preserve the form."""
    basis = (1, 2, 4, 8)
    target = [[_sym(u, v) for v in basis] for u in basis]
    sym_table = [[_sym(u, v) for v in range(16)] for u in range(16)]
    out = []
    for imgs in product(range(1, 16), repeat=4):
        ok = all(
            sym_table[imgs[i]][imgs[j]] == target[i][j] for i in range(4) for j in range(i + 1, 4)
        )
        if ok:
            out.append(imgs)
    return out


def _local_phase_table() -> list[list[int]]:
    table = []
    for pa in range(16):
        va = _vec(pa)
        row = []
        for pb in range(16):
            vb = _vec(pb)
            row.append(product_phase(va[[0, 2]], va[[1, 3]], vb[[0, 2]], vb[[1, 3]]))
        table.append(row)
    return table


_LOCAL_PHASE = _local_phase_table()


def _local_mul(a: tuple[int, int], b: tuple[int, int]) -> tuple[int, int]:
    """Multiply (phase_exp, pauli4) pairs on two qubits."""
    ka, pa = a
    kb, pb = b
    return (ka + kb + _LOCAL_PHASE[pa][pb]) % 4, pa ^ pb


def _action_of(imgs, signs) -> tuple[np.ndarray, np.ndarray]:
    gens = [(2 * ((signs >> i) & 1), imgs[i]) for i in range(4)]
    out = np.zeros(16, dtype=np.uint8)
    flip = np.zeros(16, dtype=np.uint8)
    for p in range(16):
        # Hermitian form: i^{x_a z_a + x_b z_b} X_a^x_a Z_a^z_a X_b^x_b Z_b^z_b
        acc = ((p & 1) * ((p >> 1) & 1) + ((p >> 2) & 1) * ((p >> 3) & 1), 0)
        for i in range(4):
            if (p >> i) & 1:
                acc = _local_mul(acc, gens[i])
        k, img = acc
        if k & 1:
            raise AssertionError("non-Hermitian image; symplectic enumeration is broken")
        out[p] = img
        flip[p] = k >> 1
    return out, flip


@lru_cache(maxsize=None)
def action_tables() -> tuple[np.ndarray, np.ndarray]:
    imgs_all = _symplectic_images()
    if len(imgs_all) != NUM_SYMPLECTIC:
        raise AssertionError(f"found {len(imgs_all)} symplectic matrices, expected 720")
    out = np.zeros((GROUP_ORDER, 16), dtype=np.uint8)
    flip = np.zeros((GROUP_ORDER, 16), dtype=np.uint8)
    for s_idx, imgs in enumerate(imgs_all):
        for signs in range(16):
            g = s_idx * 16 + signs
            out[g], flip[g] = _action_of(imgs, signs)
    out.setflags(write=False)
    flip.setflags(write=False)
    return out, flip


def sample_uniform_clifford2(rng: np.random.Generator, size=None):
    """Uniform gate index (or array of indices) in ``[0, 11520)``."""
    return rng.integers(0, GROUP_ORDER, size=size)


def validate_gate(gate) -> int:
    g = int(gate)
    if not 0 <= g < GROUP_ORDER:
        raise ValueError(f"gate index {gate} outside [0, {GROUP_ORDER})")
    return g


@lru_cache(maxsize=None)
def _index_by_action() -> dict:
    out, flip = action_tables()
    return {(out[g].tobytes(), flip[g].tobytes()): g for g in range(GROUP_ORDER)}


def gate_from_images(images: dict[str, str]) -> int:
    """Look up a gate from the images of ``XI, ZI, IX, IZ`` given as strings.

    Example: CNOT(a->b) is ``{"XI": "+XX", "ZI": "+ZI", "IX": "+IX", "IZ": "+ZZ"}``.
    """
    from .pauli import PauliOperator

    imgs, signs = [], 0
    for i, key in enumerate(("XI", "ZI", "IX", "IZ")):
        p = PauliOperator.from_string(images[key])
        imgs.append(int(p.x_bits[0] | p.z_bits[0] << 1 | p.x_bits[1] << 2 | p.z_bits[1] << 3))
        if p.phase < 0:
            signs |= 1 << i
    out, flip = _action_of(tuple(imgs), signs)
    try:
        return _index_by_action()[(out.tobytes(), flip.tobytes())]
    except KeyError:
        raise ValueError("images do not define a Clifford gate") from None


@lru_cache(maxsize=None)
def named_gates() -> dict[str, int]:
    return {
        "I": gate_from_images({"XI": "XI", "ZI": "ZI", "IX": "IX", "IZ": "IZ"}),
        "H0": gate_from_images({"XI": "ZI", "ZI": "XI", "IX": "IX", "IZ": "IZ"}),
        "H1": gate_from_images({"XI": "XI", "ZI": "ZI", "IX": "IZ", "IZ": "IX"}),
        "S0": gate_from_images({"XI": "YI", "ZI": "ZI", "IX": "IX", "IZ": "IZ"}),
        "S1": gate_from_images({"XI": "XI", "ZI": "ZI", "IX": "IY", "IZ": "IZ"}),
        "CNOT": gate_from_images({"XI": "XX", "ZI": "ZI", "IX": "IX", "IZ": "ZZ"}),
        "CZ": gate_from_images({"XI": "XZ", "ZI": "ZI", "IX": "ZX", "IZ": "IZ"}),
        "SWAP": gate_from_images({"XI": "IX", "ZI": "IZ", "IX": "XI", "IZ": "ZI"}),
        "X0": gate_from_images({"XI": "XI", "ZI": "-ZI", "IX": "IX", "IZ": "IZ"}),
    }
