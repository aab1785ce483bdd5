"""Random N-ary recursive trees with multiplicative leaf weights.

Trees are flat: an array of leaf weights plus the sizes of the N root
subtrees. Growing a tree picks a uniform leaf, overwrites it with its first
child and appends the other N-1 children, so a growth step is O(1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numba as nb
import numpy as np
from scipy import special

from .errors import DomainError
from .kernel import KernelSpec, sample_weights, spectral_S

EXACT_SHAPE_LIMIT = 20
_CHUNK_NODES = 1 << 21


def n_leaves(n_children: int, size: int) -> int:
    return (n_children - 1) * size + 1


@dataclass
class WeightedTree:
    n_children: int
    size: int
    leaf_weights: np.ndarray
    subtree_sizes: tuple[int, ...]


@dataclass
class TreeBatch:
    """``count`` trees of a common size, stored row-wise."""

    n_children: int
    size: int
    leaf_weights: np.ndarray   # (count, f_size)
    subtree_sizes: np.ndarray  # (count, N)

    def __len__(self):
        return self.leaf_weights.shape[0]

    def __getitem__(self, i) -> WeightedTree:
        return WeightedTree(self.n_children, self.size, self.leaf_weights[i],
                            tuple(int(x) for x in self.subtree_sizes[i]))


@dataclass(frozen=True)
class WeightStats:
    gamma: float
    M: float
    M_tilde: float
    beta_max: float


# -- numba kernels ----------------------------------------------------------------

@nb.njit(cache=True, nogil=True)
def _grow_one(leaf_u, A, weights, tags, sizes):
    """Grow one tree in place; ``weights``/``tags`` must hold f_k entries."""
    k = leaf_u.shape[0]
    N = A.shape[1]
    weights[0] = 1.0
    tags[0] = -1
    sizes[:] = 0
    f = 1
    for step in range(k):
        idx = int(leaf_u[step] * f)
        if idx >= f:
            idx = f - 1
        w = weights[idx]
        tag = tags[idx]
        if tag >= 0:
            sizes[tag] += 1
        weights[idx] = w * A[step, 0]
        tags[idx] = 0 if tag < 0 else tag
        for j in range(1, N):
            weights[f + j - 1] = w * A[step, j]
            tags[f + j - 1] = j if tag < 0 else tag
        f += N - 1


@nb.njit(cache=True, nogil=True)
def _grow_many(leaf_u, A, weights, sizes):
    """Grow ``weights.shape[0]`` trees; row r uses leaf_u[r] and A[r]."""
    tags = np.empty(weights.shape[1], dtype=np.int64)
    for r in range(weights.shape[0]):
        _grow_one(leaf_u[r], A[r], weights[r], tags, sizes[r])


@nb.njit(cache=True, nogil=True)
def _grow_shapes(leaf_u, n_children, sizes):
    """Subtree sizes only: leaves carry their root-branch tag, no weights."""
    count, k = leaf_u.shape
    tags = np.empty((n_children - 1) * k + 1, dtype=np.int64)
    for r in range(count):
        for j in range(n_children):
            sizes[r, j] = 0
        if k == 0:
            continue
        for j in range(n_children):
            tags[j] = j
        f = n_children
        for step in range(1, k):
            idx = int(leaf_u[r, step] * f)
            if idx >= f:
                idx = f - 1
            tag = tags[idx]
            sizes[r, tag] += 1
            for j in range(1, n_children):
                tags[f + j - 1] = tag
            f += n_children - 1


# -- growth -------------------------------------------------------------------------

def grow_tree(rng: np.random.Generator, spec: KernelSpec, size: int) -> WeightedTree:
    """Grow one weighted recursive tree with ``size`` internal nodes."""
    if size < 0:
        raise DomainError("tree size must be >= 0")
    leaf_u = rng.random(size)
    A = sample_weights(spec, rng, size)
    f = n_leaves(spec.n_children, size)
    weights = np.empty(f)
    tags = np.empty(f, dtype=np.int64)
    sizes = np.zeros(spec.n_children, dtype=np.int64)
    _grow_one(leaf_u, A, weights, tags, sizes)
    return WeightedTree(spec.n_children, size, weights, tuple(int(x) for x in sizes))


def grow_trees(rng: np.random.Generator, spec: KernelSpec, size: int,
               count: int) -> TreeBatch:
    """Grow ``count`` independent trees of the same size."""
    if size < 0:
        raise DomainError("tree size must be >= 0")
    n = spec.n_children
    f = n_leaves(n, size)
    weights = np.empty((count, f))
    sizes = np.zeros((count, n), dtype=np.int64)
    step = max(1, _CHUNK_NODES // max(1, size * n))
    for lo in range(0, count, step):
        hi = min(count, lo + step)
        m = hi - lo
        leaf_u = rng.random((m, size))
        A = sample_weights(spec, rng, m * size).reshape(m, size, n)
        _grow_many(leaf_u, A, weights[lo:hi], sizes[lo:hi])
    return TreeBatch(n, size, weights, sizes)


def grow_shapes(rng: np.random.Generator, n_children: int, size: int,
                count: int) -> np.ndarray:
    """Root-subtree sizes of ``count`` trees, shape (count, N)."""
    if size < 0:
        raise DomainError("tree size must be >= 0")
    sizes = np.zeros((count, n_children), dtype=np.int64)
    step = max(1, _CHUNK_NODES // max(1, size))
    for lo in range(0, count, step):
        hi = min(count, lo + step)
        _grow_shapes(rng.random((hi - lo, size)), n_children, sizes[lo:hi])
    return sizes


def subtree_fraction_sample(rng: np.random.Generator, n_children: int, size: int,
                            batch: int) -> np.ndarray:
    """Fractions (i_1/n, ..., i_N/n) over ``batch`` trees of size n.

    As n grows these approach a Dirichlet(1/(N-1), ..., 1/(N-1)) vector whose
    coordinates are Beta(1/(N-1), 1), CDF x^{1/(N-1)}.
    """
    if size < 1:
        raise DomainError("subtree fractions need size >= 1")
    return grow_shapes(rng, n_children, size, batch) / size


def dirichlet_marginal_cdf(n_children: int):
    """CDF of one coordinate of Dirichlet(1/(N-1), ..., 1/(N-1)), i.e. Beta(1/(N-1), 1)."""
    a = 1.0 / (n_children - 1)
    return lambda x: np.clip(x, 0.0, 1.0) ** a


# -- exact shape law -------------------------------------------------------------

def _leaf_count_product(n_children: int, upto: int):
    out = 1
    for m in range(upto):
        out *= (n_children - 1) * m + 1
    return out


def shape_probability(n_children: int, sizes: Sequence[int], exact: bool | None = None):
    """P{root subtrees have sizes (i_1, ..., i_N)} for a tree of size sum(i)+1.

    Exact :class:`~fractions.Fraction` up to size ``EXACT_SHAPE_LIMIT`` (or when
    ``exact=True``), log-Gamma float beyond.
    """
    sizes = [int(i) for i in sizes]
    if len(sizes) != n_children or any(i < 0 for i in sizes):
        raise DomainError(f"need {n_children} nonnegative subtree sizes, got {sizes}")
    k = sum(sizes) + 1
    if exact is None:
        exact = k <= EXACT_SHAPE_LIMIT
    if exact:
        num = math.factorial(k - 1)
        for i in sizes:
            num //= math.factorial(i)
        for i in sizes:
            num *= _leaf_count_product(n_children, i)
        return Fraction(num, _leaf_count_product(n_children, k))
    # prod_{m<i} f_m = (N-1)^i Gamma(i + r) / Gamma(r), r = 1/(N-1)
    r = 1.0 / (n_children - 1)
    lnc = math.log(n_children - 1)

    def log_prod(i):
        return i * lnc + math.lgamma(i + r) - math.lgamma(r)

    logp = math.lgamma(k) - sum(math.lgamma(i + 1) for i in sizes)
    logp += sum(log_prod(i) for i in sizes) - log_prod(k)
    return math.exp(logp)


def shape_profiles(n_children: int, size: int):
    """All (i_1, ..., i_N) with sum size - 1."""
    def rec(n, total):
        if n == 1:
            yield (total,)
            return
        for i in range(total + 1):
            for rest in rec(n - 1, total - i):
                yield (i,) + rest
    if size < 1:
        raise DomainError("shape profiles need size >= 1")
    return list(rec(n_children, size - 1))


# -- weight norms ----------------------------------------------------------------------

def weight_norm_product(S: float, n_children: int, n: int) -> float:
    """m_n = prod_{k<n} (1 + S / f_k)."""
    k = np.arange(n)
    return float(np.prod(1.0 + S / ((n_children - 1) * k + 1.0)))


def weight_norm_pochhammer(S: float, n_children: int, n: int) -> float:
    """m_n = ((S+1)/(N-1))_n / (1/(N-1))_n via log-Gamma."""
    r = 1.0 / (n_children - 1)
    a = (S + 1.0) * r
    if a <= 0:
        # S = -1: every factor after the first vanishes
        return weight_norm_product(S, n_children, n)
    return math.exp(special.gammaln(a + n) - special.gammaln(a)
                    - special.gammaln(r + n) + special.gammaln(r))


def weight_norm_asymptotic(S: float, n_children: int, n: int) -> float:
    """Leading term n^{S/(N-1)} Gamma(1/(N-1)) / Gamma((S+1)/(N-1))."""
    r = 1.0 / (n_children - 1)
    return n ** (S * r) * math.gamma(r) / math.gamma((S + 1.0) * r)


def expected_weight_norm(spec: KernelSpec, gamma: float, n: int,
                         rtol: float = 1e-10) -> float:
    """m_n(gamma) = E[sum of leaf weights^gamma] for a tree of size n.

    Computed as a running product and as a Pochhammer ratio; the two must agree.
    """
    S = float(spectral_S(spec, gamma))
    if not math.isfinite(S):
        raise DomainError(f"S({gamma}) is infinite")
    prod = weight_norm_product(S, spec.n_children, n)
    poch = weight_norm_pochhammer(S, spec.n_children, n)
    if not math.isclose(prod, poch, rel_tol=rtol, abs_tol=1e-300):
        raise ArithmeticError(f"m_n mismatch: product {prod!r} vs Pochhammer {poch!r}")
    return prod


def weight_stats(tree: WeightedTree, gamma: float, spec: KernelSpec) -> WeightStats:
    m = expected_weight_norm(spec, gamma, tree.size)
    w = np.asarray(tree.leaf_weights)
    M = float(np.sum(np.where(w > 0, w ** gamma, 0.0)))
    return WeightStats(gamma, M, M / m, float(w.max()) / m ** (1.0 / gamma))


def batch_weight_stats(batch: TreeBatch, gamma: float, spec: KernelSpec) -> dict:
    """Vectorised :func:`weight_stats` over a batch; returns column arrays."""
    m = expected_weight_norm(spec, gamma, batch.size)
    w = batch.leaf_weights
    M = np.where(w > 0, w ** gamma, 0.0).sum(axis=1)
    return {"M": M, "M_tilde": M / m, "beta_max": w.max(axis=1) / m ** (1.0 / gamma)}
