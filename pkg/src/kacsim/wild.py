"""Truncated Wild series for discrete kernels.

phi(t, xi) = sum_k zeta(t, k) q_k(xi) with q_0 = phi_0 and

    q_k(xi) = sum_{i in I_k} p_k(i) E[prod_j q_{i_j}(A_j xi)].

For a discrete kernel every argument reached by the recursion is
xi * prod_d w_d^{e_d} over the distinct nonzero weight values w_d, so values
are cached under the integer exponent vector e (plus the level), evaluated on
the whole xi grid at once. No float ever serves as a key.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, UnsupportedError
from .initial_data import InitialLaw, has_cf
from .kernel import KernelSpec
from .montecarlo import nu_log_pmf
from .trees import shape_probability, shape_profiles


@dataclass(frozen=True)
class WildEvaluation:
    xi: float
    t: float
    K: int
    value: complex
    tail_bound: float


class _Series:
    """q_k evaluated on a fixed xi grid, cached by (k, exponent vector)."""

    def __init__(self, spec: KernelSpec, law: InitialLaw, xi):
        if not spec.is_discrete:
            raise UnsupportedError("the Wild series needs a kernel with finitely many atoms")
        if not has_cf(law):
            raise UnsupportedError(f"no analytic characteristic function for {law!r}")
        self.n = spec.n_children
        self.law = law
        self.xi = np.atleast_1d(np.asarray(xi, dtype=float))
        atoms = spec.atoms()
        values = sorted({w for _, ws in atoms for w in ws if w > 0 and w != 1.0})
        self.base = np.asarray(values)
        pos = {w: d for d, w in enumerate(values)}
        # per atom and component: exponent index, -1 for weight one, None for zero
        self.atoms = [(p, [None if w == 0 else (-1 if w == 1.0 else pos[w]) for w in ws])
                      for p, ws in atoms]
        self.profiles: dict[int, list] = {}
        self.cache: dict[tuple, np.ndarray] = {}

    def _profiles(self, k):
        if k not in self.profiles:
            self.profiles[k] = [(float(shape_probability(self.n, i)), i)
                                for i in shape_profiles(self.n, k)]
        return self.profiles[k]

    def _scaled(self, e):
        if not any(e):
            return self.xi
        return self.xi * float(np.prod(self.base ** np.asarray(e)))

    def q(self, k: int, e: tuple | None = None) -> np.ndarray:
        e = e or (0,) * self.base.size
        key = (k, e)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        if k == 0:
            out = np.asarray(self.law.cf(self._scaled(e)), dtype=complex)
        else:
            out = np.zeros(self.xi.shape, dtype=complex)
            for pk, sizes in self._profiles(k):
                for pa, comps in self.atoms:
                    term = np.full(self.xi.shape, pk * pa, dtype=complex)
                    for size, d in zip(sizes, comps):
                        if d is None:
                            continue  # q_m(0) = 1
                        if d < 0:
                            term *= self.q(size, e)
                        else:
                            child = list(e)
                            child[d] += 1
                            term *= self.q(size, tuple(child))
                    out += term
        self.cache[key] = out
        return out


def wild_q(spec: KernelSpec, law: InitialLaw, k: int, xi):
    """q_k(xi) for a discrete kernel; complex scalar or array matching ``xi``."""
    if k < 0:
        raise DomainError("k must be >= 0")
    out = _Series(spec, law, xi).q(k)
    return complex(out[0]) if np.ndim(xi) == 0 else out


def clock_weights(t: float, n_children: int, K: int) -> np.ndarray:
    """zeta(t, k) for k = 0..K."""
    return np.exp(nu_log_pmf(t, n_children, np.arange(K + 1)))


def wild_grid(spec: KernelSpec, law: InitialLaw, t: float, xi, K: int = 12) -> list[WildEvaluation]:
    if K < 0:
        raise DomainError("truncation K must be >= 0")
    if t < 0:
        raise DomainError("time must be >= 0")
    series = _Series(spec, law, xi)
    zeta = clock_weights(t, spec.n_children, K)
    total = sum(z * series.q(k) for k, z in enumerate(zeta))
    tail = min(1.0, max(0.0, 1.0 - float(zeta.sum())))
    return [WildEvaluation(float(x), float(t), K, complex(v), tail)
            for x, v in zip(series.xi, total)]


def wild_solution(spec: KernelSpec, law: InitialLaw, t: float, xi: float,
                  K: int = 12) -> WildEvaluation:
    """Partial sum up to K with the bound |phi - value| <= tail_bound."""
    return wild_grid(spec, law, t, [xi], K)[0]


def save_wild_csv(evals, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["xi", "re", "im", "tail_bound"])
        for ev in evals:
            w.writerow([repr(ev.xi), repr(ev.value.real), repr(ev.value.imag), repr(ev.tail_bound)])
    return path
