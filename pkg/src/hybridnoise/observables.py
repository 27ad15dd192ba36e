"""Entropy, mutual information and negativity of stabilizer states (in bits).

All functions are read-only on the state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gf2 import rank_packed, symplectic_gram_packed
from .tableau import StabilizerState


@dataclass(frozen=True)
class ObservableSample:
    kind: str  # "S", "I_AB", "E_N" or "I_ABR"
    value: float
    time: int


def half_chains(L: int) -> tuple[list[int], list[int]]:
    """Default bipartition: left half A and right half B of the system sites."""
    return list(range(L // 2)), list(range(L // 2, L))


def _sites(state: StabilizerState, region) -> list[int]:
    sites = sorted({int(s) for s in region})
    for s in sites:
        if not 0 <= s < state.num_sites:
            raise IndexError(f"site {s} outside [0, {state.num_sites})")
    return sites


def _restricted_rank(state: StabilizerState, sites) -> int:
    if state.m == 0 or not sites:
        return 0
    return int(rank_packed(state.packed_rows(sites)))


def entropy(state: StabilizerState, region) -> int:
    """Von Neumann entropy of ``region`` in bits.

    ``S = |region| - dim(subgroup supported inside region)`` and that
    dimension is ``m - rank(generators restricted to the complement)``.
    """
    sites = _sites(state, region)
    inside_set = set(sites)
    comp = [q for q in range(state.num_sites) if q not in inside_set]
    inside = state.m - _restricted_rank(state, comp)
    return len(sites) - inside


def mutual_information(state: StabilizerState, A, B) -> int:
    a, b = _sites(state, A), _sites(state, B)
    if set(a) & set(b):
        raise ValueError("regions overlap")
    return entropy(state, a) + entropy(state, b) - entropy(state, a + b)


def log_negativity(state: StabilizerState, B) -> float:
    """Logarithmic negativity (base 2) for the partial transpose on ``B``.

    Equal to half the GF(2) rank of the commutation matrix of the
    generators restricted to ``B``.
    """
    sites = _sites(state, B)
    if state.m == 0 or not sites:
        return 0.0
    mk = state.mask(sites)
    gram = symplectic_gram_packed(state.xs[: state.m], state.zs[: state.m], mk)
    r = int(rank_packed(gram))
    return r / 2


def info_retention(state: StabilizerState, reference: int | None = None) -> int:
    """I(AB:R) between the system and the reference site (the last site by default)."""
    if state.num_sites < 2:
        raise ValueError("state has no reference site")
    ref = state.num_sites - 1 if reference is None else int(reference)
    if not 0 <= ref < state.num_sites:
        raise ValueError(f"reference site {ref} not in state")
    system = [q for q in range(state.num_sites) if q != ref]
    return mutual_information(state, system, [ref])


def purity_entropy(state: StabilizerState) -> int:
    """Entropy of the full state, ``n - m``."""
    return state.num_sites - state.m


def summary(state: StabilizerState, L: int, with_reference: bool) -> dict[str, float]:
    """Final-state observables used by sweeps: S_A, S_B, S_AB, I_AB, E_N (and I_ABR)."""
    A, B = half_chains(L)
    s_a = entropy(state, A)
    s_b = entropy(state, B)
    s_ab = entropy(state, A + B)
    out = {
        "S_A": float(s_a),
        "S_B": float(s_b),
        "S_AB": float(s_ab),
        "I_AB": float(s_a + s_b - s_ab),
    }
    if with_reference:
        out["E_N"] = _negativity_within_system(state, L)
        out["I_ABR"] = float(info_retention(state, L))
    else:
        out["E_N"] = log_negativity(state, B)
    return out


def _negativity_within_system(state: StabilizerState, L: int) -> float:
    """E_N between the halves after tracing out the reference site."""
    ref = L
    sub = state.copy()
    # tracing out = keep only the subgroup trivial on the reference
    sub.reset(ref)
    A, B = half_chains(L)
    return log_negativity(sub, B)


def entropy_profile(state: StabilizerState, L: int) -> np.ndarray:
    """S of the contiguous prefix [0, l) for l = 0..L."""
    return np.array([entropy(state, range(l)) for l in range(L + 1)])
