"""Truncated plane-wave pair basis.

A basis element is a pair ``(G1, G2)`` from the two reciprocal lattices with
``|G1 + G2| <= W`` and ``|G1 - G2| <= L``.  It carries the plane wave
``exp(i (G1 + G2) . x)``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import BasisTooLarge, DimensionMismatch
from .lattice import RECIPROCAL
from .potential import _index_box

DEFAULT_MAX_SIZE = 200_000


@dataclass(frozen=True, eq=False)
class BasisSet:
    recip1: object
    recip2: object
    W: float
    L: float
    n1: np.ndarray  # (N, d) int
    n2: np.ndarray  # (N, d) int
    negation: np.ndarray  # (N,) permutation
    _keys: np.ndarray
    _perm: np.ndarray
    _lo: np.ndarray
    _span: np.ndarray

    @property
    def size(self):
        return self.n1.shape[0]

    def __len__(self):
        return self.size

    @property
    def dim(self):
        return self.recip1.dim

    @property
    def G1(self):
        return self.recip1.vectors(self.n1)

    @property
    def G2(self):
        return self.recip2.vectors(self.n2)

    @property
    def q(self):
        """Plane-wave vectors ``G1 + G2``, shape (N, d)."""
        return self.G1 + self.G2

    @property
    def origin_index(self):
        return pair_index(self, np.zeros(self.dim, int), np.zeros(self.dim, int))

    def _encode(self, nn):
        rel = nn - self._lo
        inside = np.all((rel >= 0) & (rel < self._span), axis=1)
        key = np.zeros(nn.shape[0], dtype=np.int64)
        for c in range(nn.shape[1]):
            key = key * self._span[c] + np.where(inside, rel[:, c], 0)
        return key, inside

    def lookup(self, n1, n2):
        """Vectorised index lookup; -1 where the pair is not in the basis."""
        n1 = np.asarray(n1, dtype=np.int64).reshape(-1, self.dim)
        n2 = np.asarray(n2, dtype=np.int64).reshape(-1, self.dim)
        key, inside = self._encode(np.hstack([n1, n2]))
        pos = np.searchsorted(self._keys, key)
        pos = np.minimum(pos, len(self._keys) - 1)
        found = inside & (self._keys[pos] == key)
        return np.where(found, self._perm[pos], -1)


def _candidates(recip, radius):
    n = _index_box(recip, radius)
    g = recip.vectors(n)
    keep = np.linalg.norm(g, axis=1) <= radius * (1 + 1e-12)
    return n[keep], g[keep]


def build_basis(recip1, recip2, W, L, max_size=DEFAULT_MAX_SIZE):
    """Enumerate every pair inside the truncation, deterministically ordered
    by ``(|G1+G2|, n1, n2)``."""
    if recip1.kind != RECIPROCAL or recip2.kind != RECIPROCAL:
        raise DimensionMismatch("build_basis needs reciprocal lattices")
    if recip1.dim != recip2.dim:
        raise DimensionMismatch("lattices differ in dimension")
    if not (W > 0 and L > 0):
        raise ValueError("W and L must be positive")
    d = recip1.dim
    # |G1+G2| <= W and |G1-G2| <= L imply |G1|, |G2| <= (W+L)/2
    radius = 0.5 * (W + L)
    c1, g1 = _candidates(recip1, radius)
    c2, g2 = _candidates(recip2, radius)

    blocks1, blocks2 = [], []
    total = 0
    step = max(1, 4_000_000 // max(len(c2), 1))
    for s in range(0, len(c1), step):
        ga = g1[s:s + step, None, :]
        q = np.linalg.norm(ga + g2[None, :, :], axis=2)
        p = np.linalg.norm(ga - g2[None, :, :], axis=2)
        ia, ib = np.nonzero((q <= W) & (p <= L))
        total += len(ia)
        if total > max_size:
            raise BasisTooLarge(f"basis exceeds max_size={max_size} (W={W}, L={L})")
        blocks1.append(c1[s + ia])
        blocks2.append(c2[ib])
    n1 = np.concatenate(blocks1).astype(np.int64)
    n2 = np.concatenate(blocks2).astype(np.int64)

    qnorm = np.linalg.norm(recip1.vectors(n1) + recip2.vectors(n2), axis=1)
    sort_keys = [n2[:, c] for c in reversed(range(d))] + [n1[:, c] for c in reversed(range(d))] + [qnorm]
    order = np.lexsort(sort_keys)
    n1, n2 = n1[order], n2[order]
    n1.setflags(write=False)
    n2.setflags(write=False)

    both = np.hstack([n1, n2])
    lo = both.min(axis=0)
    span = both.max(axis=0) - lo + 1
    tmp = BasisSet(recip1, recip2, float(W), float(L), n1, n2, np.empty(0, np.int64),
                   np.empty(0, np.int64), np.empty(0, np.int64), lo, span)
    key, _ = tmp._encode(both)
    perm = np.argsort(key, kind="stable")
    keys = key[perm]
    basis = BasisSet(recip1, recip2, float(W), float(L), n1, n2, np.empty(0, np.int64), keys, perm, lo, span)
    neg = basis.lookup(-n1, -n2)
    # both constraints are norms, so the set is closed under negation
    assert (neg >= 0).all()
    object.__setattr__(basis, "negation", neg)
    return basis


def pair_index(basis, n1, n2):
    """Index of the pair ``(n1, n2)`` or None when it is truncated away."""
    i = int(basis.lookup(np.atleast_1d(n1), np.atleast_1d(n2))[0])
    return None if i < 0 else i
