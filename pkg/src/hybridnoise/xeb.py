"""Linear XEB and fidelity between a noiseless and a noisy stabilizer state.

Both are computed from GF(2) data alone, so the cost is polynomial in the
number of sites.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gf2 import gf2_rank, unpack_bits
from .tableau import StabilizerState, _eliminate_x, _group_sign, _rowmul


@dataclass
class DiagonalDistribution:
    """``<s|rho|s>`` is ``2**-(n-k)`` on ``{s : constraints @ s = offsets (mod 2)}``, else 0."""

    num_sites: int
    constraints: np.ndarray  # uint8[k, n]
    offsets: np.ndarray  # uint8[k]

    @property
    def k(self) -> int:
        return int(self.constraints.shape[0])

    @property
    def weight(self) -> float:
        return 2.0 ** -(self.num_sites - self.k)

    def probability(self, bits) -> float:
        s = np.asarray(bits, dtype=np.int64) & 1
        ok = np.all((self.constraints.astype(np.int64) @ s) % 2 == self.offsets)
        return self.weight if ok else 0.0

    def probabilities(self) -> np.ndarray:
        """Full distribution over ``2**n`` bitstrings; site 0 is the most significant bit."""
        n = self.num_sites
        if n > 20:
            raise ValueError("refusing to enumerate more than 2**20 bitstrings")
        idx = np.arange(2**n)
        bits = (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
        ok = np.all((bits @ self.constraints.T.astype(np.int64)) % 2 == self.offsets, axis=1)
        return np.where(ok, self.weight, 0.0)


@dataclass
class PairSummary:
    xeb: float
    fidelity: float

    @property
    def ratio(self) -> float:
        return self.fidelity / self.xeb if self.xeb != 0 else float("nan")


def diagonal_distribution(state: StabilizerState) -> DiagonalDistribution:
    """Basis of the purely Z-type part of the stabilizer group, with signs."""
    n, m = state.num_sites, state.m
    xs = state.xs[:m].copy()
    zs = state.zs[:m].copy()
    sg = state.signs[:m].copy()
    rank_x = _eliminate_x(xs, zs, sg, m) if m else 0
    cons = unpack_bits(zs[rank_x:m], n) if m > rank_x else np.zeros((0, n), np.uint8)
    return DiagonalDistribution(n, cons.astype(np.uint8), sg[rank_x:m].astype(np.uint8))


def xeb(pure: DiagonalDistribution, noisy: DiagonalDistribution) -> float:
    """``2**n * sum_s p(s) q(s) - 1`` evaluated exactly on the affine supports."""
    if pure.num_sites != noisy.num_sites:
        raise ValueError("distributions live on different numbers of sites")
    C = np.concatenate([pure.constraints, noisy.constraints], axis=0)
    b = np.concatenate([pure.offsets, noisy.offsets])
    if C.shape[0] == 0:
        return 0.0
    r = gf2_rank(C)
    if gf2_rank(np.concatenate([C, b[:, None]], axis=1)) != r:
        return -1.0
    # 2^n * 2^(k_p - n) * 2^(k_q - n) * 2^(n - r) - 1
    return float(2 ** (pure.k + noisy.k - r)) - 1.0


def _left_kernel(C: np.ndarray) -> np.ndarray:
    """Basis (rows) of ``{a : a @ C = 0 mod 2}``."""
    m, n = C.shape
    aug = np.concatenate([C.astype(np.uint8) & 1, np.eye(m, dtype=np.uint8)], axis=1)
    row = 0
    for col in range(n):
        piv = next((r for r in range(row, m) if aug[r, col]), None)
        if piv is None:
            continue
        aug[[row, piv]] = aug[[piv, row]]
        hits = np.nonzero(aug[:, col])[0]
        for r in hits:
            if r != row:
                aug[r] ^= aug[row]
        row += 1
    return aug[row:, n:]


def fidelity(pure_state: StabilizerState, noisy_state: StabilizerState) -> float:
    """``<psi|rho|psi>`` for a pure ``psi``.

    Equals ``2**(dim(G_psi cap G_rho) - n)`` when the signs agree on the
    intersection and 0 otherwise.
    """
    n = pure_state.num_sites
    if noisy_state.num_sites != n:
        raise ValueError("states live on different numbers of sites")
    if not pure_state.is_pure:
        raise ValueError("first argument must be a pure state")
    m = noisy_state.m
    if m == 0:
        return 2.0**-n
    # elements of G_rho commuting with all of G_psi lie in +-G_psi (G_psi is maximal)
    rx = unpack_bits(noisy_state.xs[:m], n).astype(np.int64)
    rz = unpack_bits(noisy_state.zs[:m], n).astype(np.int64)
    px = unpack_bits(pure_state.xs[:n], n).astype(np.int64)
    pz = unpack_bits(pure_state.zs[:n], n).astype(np.int64)
    comm = (rx @ pz.T + rz @ px.T) % 2
    kernel = _left_kernel(comm)
    W = noisy_state.xs.shape[1]
    for a in kernel:
        idx = np.nonzero(a)[0]
        bx = np.zeros((2, W), np.uint64)
        bz = np.zeros((2, W), np.uint64)
        bs = np.zeros(2, np.uint8)
        for i in idx:
            bx[1], bz[1], bs[1] = noisy_state.xs[i], noisy_state.zs[i], noisy_state.signs[i]
            _rowmul(bx, bz, bs, 0, 1)
        s = _group_sign(pure_state.xs, pure_state.zs, pure_state.signs, n, bx[0], bz[0])
        if s < 0:
            raise AssertionError("intersection element missing from the pure group")
        if s != bs[0]:
            return 0.0
    return 2.0 ** (len(kernel) - n)


def pair_summary(pure_state: StabilizerState, noisy_state: StabilizerState) -> PairSummary:
    return PairSummary(
        xeb=xeb(diagonal_distribution(pure_state), diagonal_distribution(noisy_state)),
        fidelity=fidelity(pure_state, noisy_state),
    )
