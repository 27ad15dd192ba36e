"""Mixed stabilizer states on bit-packed generator rows.

A state on ``n`` sites is a list of ``m <= n`` independent, mutually
commuting Hermitian Pauli generators; ``rho = 2**-n * prod_i (1 + g_i)``.
No destabilizers are kept, so the same code handles pure and mixed states.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from . import clifford2
from .gf2 import WORD, num_words, popcount64, rank_packed, site_mask
from .pauli import PauliOperator

_ONE = np.uint64(1)


@njit(cache=True, inline="always")
def _getbit(arr, r, q):
    return (arr[r, q >> 6] >> np.uint64(q & 63)) & _ONE


@njit(cache=True)
def _rowmul(xs, zs, signs, t, s):
    """Row ``t`` <- row ``t`` * row ``s``. The two rows must commute."""
    plus = 0
    minus = 0
    for k in range(xs.shape[1]):
        x1 = xs[t, k]
        z1 = zs[t, k]
        x2 = xs[s, k]
        z2 = zs[s, k]
        p = (x1 & z1 & ~x2 & z2) | (x1 & ~z1 & x2 & z2) | (~x1 & z1 & x2 & ~z2)
        q = (x1 & z1 & x2 & ~z2) | (x1 & ~z1 & ~x2 & z2) | (~x1 & z1 & x2 & z2)
        plus += popcount64(p)
        minus += popcount64(q)
        xs[t, k] = x1 ^ x2
        zs[t, k] = z1 ^ z2
    e = (2 * np.int64(signs[t]) + 2 * np.int64(signs[s]) + np.int64(plus) - np.int64(minus)) % 4
    signs[t] = np.uint8(e >> 1)


@njit(cache=True)
def _copy_row(xs, zs, signs, dst, src):
    for k in range(xs.shape[1]):
        xs[dst, k] = xs[src, k]
        zs[dst, k] = zs[src, k]
    signs[dst] = signs[src]


@njit(cache=True)
def _set_single_z(xs, zs, signs, r, site, sign):
    for k in range(xs.shape[1]):
        xs[r, k] = 0
        zs[r, k] = 0
    zs[r, site >> 6] = _ONE << np.uint64(site & 63)
    signs[r] = sign


@njit(cache=True)
def _apply_gate(xs, zs, signs, m, out_tab, flip_tab, g, a, b):
    wa = a >> 6
    sa = np.uint64(a & 63)
    wb = b >> 6
    sb = np.uint64(b & 63)
    for r in range(m):
        xa = (xs[r, wa] >> sa) & _ONE
        za = (zs[r, wa] >> sa) & _ONE
        xb = (xs[r, wb] >> sb) & _ONE
        zb = (zs[r, wb] >> sb) & _ONE
        p = xa | (za << _ONE) | (xb << np.uint64(2)) | (zb << np.uint64(3))
        if p == 0:
            continue
        o = np.uint64(out_tab[g, p])
        signs[r] ^= flip_tab[g, p]
        xs[r, wa] = (xs[r, wa] & ~(_ONE << sa)) | ((o & _ONE) << sa)
        zs[r, wa] = (zs[r, wa] & ~(_ONE << sa)) | (((o >> _ONE) & _ONE) << sa)
        xs[r, wb] = (xs[r, wb] & ~(_ONE << sb)) | (((o >> np.uint64(2)) & _ONE) << sb)
        zs[r, wb] = (zs[r, wb] & ~(_ONE << sb)) | (((o >> np.uint64(3)) & _ONE) << sb)


@njit(cache=True)
def _apply_gates(xs, zs, signs, m, out_tab, flip_tab, gates, pairs):
    for i in range(gates.shape[0]):
        _apply_gate(xs, zs, signs, m, out_tab, flip_tab, gates[i], pairs[i, 0], pairs[i, 1])


@njit(cache=True)
def _group_sign(xs, zs, signs, m, tx, tz):
    """Sign bit ``s`` such that ``(-1)**s * P`` is in the group, or -1 if ``+-P`` is not.

    ``P`` is the Hermitian Pauli with packed bits ``tx``/``tz``; it must commute
    with every generator. Row ``m`` of the working copy accumulates the product
    of pivot rows needed to build the target.
    """
    n_words = xs.shape[1]
    ax = np.zeros((m + 1, n_words), dtype=np.uint64)
    az = np.zeros((m + 1, n_words), dtype=np.uint64)
    asg = np.zeros(m + 1, dtype=np.uint8)
    ax[:m] = xs[:m]
    az[:m] = zs[:m]
    asg[:m] = signs[:m]
    rank = 0
    for half in range(2):
        arr = ax if half == 0 else az
        tgt = tx if half == 0 else tz
        for w in range(n_words):
            for b in range(WORD):
                if rank == m:
                    break
                bit = _ONE << np.uint64(b)
                piv = -1
                for r in range(rank, m):
                    if arr[r, w] & bit:
                        piv = r
                        break
                if piv < 0:
                    continue
                if piv != rank:
                    for k in range(n_words):
                        t1 = ax[piv, k]
                        ax[piv, k] = ax[rank, k]
                        ax[rank, k] = t1
                        t2 = az[piv, k]
                        az[piv, k] = az[rank, k]
                        az[rank, k] = t2
                    t3 = asg[piv]
                    asg[piv] = asg[rank]
                    asg[rank] = t3
                for r in range(rank + 1, m):
                    if arr[r, w] & bit:
                        _rowmul(ax, az, asg, r, rank)
                if (arr[m, w] & bit) != (tgt[w] & bit):
                    _rowmul(ax, az, asg, m, rank)
                rank += 1
    for k in range(n_words):
        if ax[m, k] != tx[k] or az[m, k] != tz[k]:
            return -1
    return np.int64(asg[m])


@njit(cache=True)
def _z_membership(xs, zs, signs, m, site):
    n_words = xs.shape[1]
    tx = np.zeros(n_words, dtype=np.uint64)
    tz = np.zeros(n_words, dtype=np.uint64)
    tz[site >> 6] = _ONE << np.uint64(site & 63)
    return _group_sign(xs, zs, signs, m, tx, tz)


@njit(cache=True)
def _eliminate_x(xs, zs, signs, m):
    """In-place row echelon form on the X block only; returns the X rank.

    Rows ``rank..m-1`` afterwards have zero X part and generate the Z-type subgroup.
    """
    n_words = xs.shape[1]
    rank = 0
    for w in range(n_words):
        for b in range(WORD):
            if rank == m:
                return rank
            bit = _ONE << np.uint64(b)
            piv = -1
            for r in range(rank, m):
                if xs[r, w] & bit:
                    piv = r
                    break
            if piv < 0:
                continue
            if piv != rank:
                for k in range(n_words):
                    t1 = xs[piv, k]
                    xs[piv, k] = xs[rank, k]
                    xs[rank, k] = t1
                    t2 = zs[piv, k]
                    zs[piv, k] = zs[rank, k]
                    zs[rank, k] = t2
                t3 = signs[piv]
                signs[piv] = signs[rank]
                signs[rank] = t3
            for r in range(rank + 1, m):
                if xs[r, w] & bit:
                    _rowmul(xs, zs, signs, r, rank)
            rank += 1
    return rank


@njit(cache=True)
def _measure_z(xs, zs, signs, m, n, site, coin, need_outcome):
    """Measure Z_site. Returns (outcome, new_m, branch); branch 0/1/2 = random/determined/mixed.

    ``outcome`` is -1 only when ``need_outcome`` is false and the outcome is
    determined on a pure state (the state is unchanged in that case).
    """
    w = site >> 6
    bit = _ONE << np.uint64(site & 63)
    piv = -1
    for r in range(m):
        if xs[r, w] & bit:
            piv = r
            break
    outcome = 1 if coin < 0.5 else 0
    if piv >= 0:
        for r in range(piv + 1, m):
            if xs[r, w] & bit:
                _rowmul(xs, zs, signs, r, piv)
        _set_single_z(xs, zs, signs, piv, site, np.uint8(outcome))
        return outcome, m, 0
    if m == n and not need_outcome:
        return -1, m, 1
    s = _z_membership(xs, zs, signs, m, site)
    if s >= 0:
        return s, m, 1
    _set_single_z(xs, zs, signs, m, site, np.uint8(outcome))
    return outcome, m + 1, 2


@njit(cache=True)
def _reset(xs, zs, signs, m, site):
    """Partial trace of ``site`` followed by preparing |0> there. Returns new m."""
    w = site >> 6
    bit = _ONE << np.uint64(site & 63)
    p1 = -1
    for r in range(m):
        if xs[r, w] & bit:
            p1 = r
            break
    if p1 >= 0:
        for r in range(p1 + 1, m):
            if xs[r, w] & bit:
                _rowmul(xs, zs, signs, r, p1)
    p2 = -1
    for r in range(m):
        if r != p1 and (zs[r, w] & bit):
            p2 = r
            break
    if p2 >= 0:
        for r in range(p2 + 1, m):
            if r != p1 and (zs[r, w] & bit):
                _rowmul(xs, zs, signs, r, p2)
    hi = max(p1, p2)
    lo = min(p1, p2)
    if hi >= 0:
        m -= 1
        _copy_row(xs, zs, signs, hi, m)
    if lo >= 0:
        m -= 1
        _copy_row(xs, zs, signs, lo, m)
    _set_single_z(xs, zs, signs, m, site, np.uint8(0))
    return m + 1


@njit(cache=True)
def _commutation_violations(xs, zs, m):
    for i in range(m):
        for j in range(i + 1, m):
            acc = np.uint64(0)
            for k in range(xs.shape[1]):
                acc ^= (xs[i, k] & zs[j, k]) ^ (zs[i, k] & xs[j, k])
            if popcount64(acc) & _ONE:
                return i, j
    return -1, -1


class StabilizerState:
    """Stabilizer group with ``m <= n`` generators on ``n`` sites.

    Mutating methods work in place and return ``self``.
    """

    def __init__(self, num_sites: int):
        if num_sites < 1:
            raise ValueError("need at least one site")
        self.num_sites = int(num_sites)
        n_words = num_words(num_sites)
        self.xs = np.zeros((num_sites, n_words), dtype=np.uint64)
        self.zs = np.zeros((num_sites, n_words), dtype=np.uint64)
        self.signs = np.zeros(num_sites, dtype=np.uint8)
        self.m = 0

    # construction -----------------------------------------------------------
    @classmethod
    def zero_state(cls, num_sites: int) -> "StabilizerState":
        st = cls(num_sites)
        for i in range(num_sites):
            _set_single_z(st.xs, st.zs, st.signs, i, i, np.uint8(0))
        st.m = num_sites
        return st

    @classmethod
    def maximally_mixed(cls, num_sites: int) -> "StabilizerState":
        return cls(num_sites)

    @classmethod
    def from_generators(cls, generators, check: bool = True) -> "StabilizerState":
        gens = [PauliOperator.from_string(g) if isinstance(g, str) else g for g in generators]
        if not gens:
            raise ValueError("use maximally_mixed() for an empty generator list")
        n = gens[0].num_sites
        if len(gens) > n:
            raise ValueError("more generators than sites")
        st = cls(n)
        x = np.array([g.x_bits for g in gens], dtype=np.uint8)
        z = np.array([g.z_bits for g in gens], dtype=np.uint8)
        from .gf2 import pack_bits

        st.xs[: len(gens)] = pack_bits(x)
        st.zs[: len(gens)] = pack_bits(z)
        st.signs[: len(gens)] = [0 if g.phase > 0 else 1 for g in gens]
        st.m = len(gens)
        if check:
            st.check()
        return st

    def copy(self) -> "StabilizerState":
        new = StabilizerState.__new__(StabilizerState)
        new.num_sites = self.num_sites
        new.xs = self.xs.copy()
        new.zs = self.zs.copy()
        new.signs = self.signs.copy()
        new.m = self.m
        return new

    # inspection -------------------------------------------------------------
    @property
    def num_generators(self) -> int:
        return self.m

    @property
    def is_pure(self) -> bool:
        return self.m == self.num_sites

    def generator(self, i: int) -> PauliOperator:
        if not 0 <= i < self.m:
            raise IndexError(i)
        x = np.array([int(_getbit(self.xs, i, q)) for q in range(self.num_sites)], np.uint8)
        z = np.array([int(_getbit(self.zs, i, q)) for q in range(self.num_sites)], np.uint8)
        return PauliOperator(x, z, 2 * int(self.signs[i]))

    @property
    def generators(self) -> list[PauliOperator]:
        return [self.generator(i) for i in range(self.m)]

    def check(self) -> None:
        """Raise ``ValueError`` unless generators commute and are independent."""
        i, j = _commutation_violations(self.xs, self.zs, self.m)
        if i >= 0:
            raise ValueError(f"generators {i} and {j} anticommute")
        rows = np.concatenate([self.xs[: self.m], self.zs[: self.m]], axis=1)
        if self.m and rank_packed(rows) != self.m:
            raise ValueError("generators are not independent")

    def _check_site(self, site: int) -> int:
        site = int(site)
        if not 0 <= site < self.num_sites:
            raise IndexError(f"site {site} outside [0, {self.num_sites})")
        return site

    # operations -------------------------------------------------------------
    def apply_clifford2(self, gate: int, a: int, b: int) -> "StabilizerState":
        g = clifford2.validate_gate(gate)
        a, b = self._check_site(a), self._check_site(b)
        if a == b:
            raise ValueError("gate sites must be distinct")
        out, flip = clifford2.action_tables()
        _apply_gate(self.xs, self.zs, self.signs, self.m, out, flip, g, a, b)
        return self

    def apply_gates(self, gates: np.ndarray, pairs: np.ndarray) -> "StabilizerState":
        """Apply many gates without per-gate validation (hot path)."""
        out, flip = clifford2.action_tables()
        _apply_gates(self.xs, self.zs, self.signs, self.m, out, flip,
                     np.asarray(gates, dtype=np.int64), np.asarray(pairs, dtype=np.int64))
        return self

    def measure_z(self, site: int, coin: float, need_outcome: bool = True) -> int:
        """Measure Z on ``site``; a random outcome is 1 iff ``coin < 0.5``."""
        site = self._check_site(site)
        outcome, self.m, _ = _measure_z(self.xs, self.zs, self.signs, self.m,
                                        self.num_sites, site, float(coin), need_outcome)
        return int(outcome)

    def reset(self, site: int) -> "StabilizerState":
        site = self._check_site(site)
        self.m = int(_reset(self.xs, self.zs, self.signs, self.m, site))
        return self

    # GF(2) views ------------------------------------------------------------
    def mask(self, sites) -> np.ndarray:
        return site_mask(sites, self.num_sites)

    def packed_rows(self, sites=None) -> np.ndarray:
        """``uint64[m, 2W]`` rows ``[x | z]``, optionally masked to ``sites``."""
        x = self.xs[: self.m]
        z = self.zs[: self.m]
        if sites is not None:
            mk = self.mask(sites)
            x = x & mk
            z = z & mk
        return np.ascontiguousarray(np.concatenate([x, z], axis=1))

    def __repr__(self) -> str:
        gens = ", ".join(str(g) for g in self.generators)
        return f"StabilizerState(n={self.num_sites}, m={self.m}, [{gens}])"


# functional API ------------------------------------------------------------

def apply_two_qubit_clifford(state: StabilizerState, gate: int, sites) -> StabilizerState:
    a, b = sites
    return state.apply_clifford2(gate, a, b)


def measure_z(state: StabilizerState, site: int, randomness) -> tuple[int, StabilizerState]:
    """Z measurement; ``randomness`` is a numpy Generator or a uniform coin in [0, 1)."""
    coin = randomness.random() if isinstance(randomness, np.random.Generator) else float(randomness)
    return state.measure_z(site, coin), state


def reset_qubit(state: StabilizerState, site: int) -> StabilizerState:
    return state.reset(site)


def restrict_generators(state: StabilizerState, region) -> np.ndarray:
    """``m x 2|region|`` 0/1 matrix ``[x-block | z-block]`` of generators on ``region``."""
    sites = [state._check_site(s) for s in region]
    out = np.zeros((state.m, 2 * len(sites)), dtype=np.uint8)
    for j, q in enumerate(sites):
        out[:, j] = (state.xs[: state.m, q >> 6] >> np.uint64(q & 63)) & _ONE
        out[:, len(sites) + j] = (state.zs[: state.m, q >> 6] >> np.uint64(q & 63)) & _ONE
    return out
