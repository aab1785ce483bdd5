"""Exact-in-law sampling of the kinetic solution V_t and of its long-time limit.

A draw of V_t is W_{nu_t}: nu_t internal nodes are grown into a weighted
recursive tree, i.i.d. F_0 values sit on the leaves, and W is the weighted
sum. nu_t is negative binomial with parameters (1/(N-1), exp(-(N-1)t)).
"""
from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numba as nb
import numpy as np
from scipy import special, stats

from .errors import CostLimitError, DomainError, StateError
from .initial_data import HGammaProfile, InitialLaw, law_label, sample_stable
from .kernel import (Beta, Constant, Deterministic, DiscreteMixture, KernelSpec,
                     Uniform01Power, sample_weights, spectral_mu)
from .rng import stream

MAX_EXPECTED_NODES = 10**7
_CHUNK_NODES = 1 << 19
_MAX_CHUNK_DRAWS = 4096


@dataclass(frozen=True)
class SampleBatch:
    values: np.ndarray
    t: float  # math.inf for draws of the limit
    rescale_gamma: float | None = None
    seed: int | None = None
    kernel_label: str = ""
    law_label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise DomainError("sample batch contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    def metadata(self) -> dict:
        meta = asdict(self)
        del meta["values"]
        meta["t"] = "infinity" if math.isinf(self.t) else self.t
        meta["count"] = len(self)
        return meta


def save_batch(batch: SampleBatch, path) -> tuple[Path, Path]:
    """Write one value per line to ``path`` and metadata to a JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("value\n")
        fh.writelines(f"{x!r}\n" for x in batch.values.tolist())
    side = path.with_suffix(".json")
    side.write_text(json.dumps(batch.metadata(), indent=2, sort_keys=True) + "\n")
    return path, side


def load_batch(path) -> SampleBatch:
    path = Path(path)
    values = np.loadtxt(path, skiprows=1, ndmin=1)
    meta = json.loads(path.with_suffix(".json").read_text())
    t = math.inf if meta["t"] == "infinity" else float(meta["t"])
    return SampleBatch(values, t, meta.get("rescale_gamma"), meta.get("seed"),
                       meta.get("kernel_label", ""), meta.get("law_label", ""))


# -- the clock nu_t ---------------------------------------------------------------

def expected_nu(t: float, n_children: int) -> float:
    return math.expm1((n_children - 1) * t) / (n_children - 1)


def nu_log_pmf(t: float, n_children: int, k) -> np.ndarray:
    """log zeta(t, k) = log[b_k e^{-t} (1 - e^{-(N-1)t})^k], b_k = (1/(N-1))_k / k!."""
    k = np.asarray(k, dtype=float)
    r = 1.0 / (n_children - 1)
    if t == 0:
        return np.where(k == 0, 0.0, -np.inf)
    log_q = math.log(-math.expm1(-(n_children - 1) * t))
    return (special.gammaln(k + r) - special.gammaln(r) - special.gammaln(k + 1)
            - t + k * log_q)


class _NuTable:
    """Running CDF of nu_t, extended on demand."""

    def __init__(self, t: float, n_children: int):
        self.t = t
        self.n = n_children
        mean = expected_nu(t, n_children)
        self.cdf = np.empty(0)
        self._extend(int(64 + 8 * mean))

    def _extend(self, upto: int):
        start = self.cdf.shape[0]
        pmf = np.exp(nu_log_pmf(self.t, self.n, np.arange(start, upto)))
        base = self.cdf[-1] if start else 0.0
        self.cdf = np.concatenate([self.cdf, base + np.cumsum(pmf)])
        self.last_pmf = pmf[-1] if pmf.size else 0.0

    def invert(self, u: np.ndarray) -> np.ndarray:
        umax = u.max(initial=0.0)
        # stop once the remaining mass is below double resolution
        while self.cdf[-1] <= umax and self.last_pmf > 1e-20:
            self._extend(2 * self.cdf.shape[0])
        idx = np.searchsorted(self.cdf, u, side="right")
        return np.minimum(idx, self.cdf.shape[0] - 1).astype(np.int64)


_NU_TABLES: dict[tuple[float, int], _NuTable] = {}


def _nu_table(t: float, n_children: int) -> _NuTable:
    key = (float(t), int(n_children))
    table = _NU_TABLES.get(key)
    if table is None:
        if len(_NU_TABLES) > 64:
            _NU_TABLES.clear()
        table = _NU_TABLES[key] = _NuTable(*key)
    return table


def sample_nu(rng: np.random.Generator, t: float, n_children: int, size: int | None = None):
    """Negative-binomial clock nu_t by inversion of its running CDF."""
    if t < 0:
        raise DomainError("time must be >= 0")
    n = 1 if size is None else size
    u = rng.random(n)
    if t == 0:
        out = np.zeros(n, dtype=np.int64)
    else:
        out = _nu_table(t, n_children).invert(u)
    return int(out[0]) if size is None else out


def clock_scale(S_gamma: float, gamma: float, n_children: int) -> float:
    """c_gamma = (Gamma(1/(N-1)) / Gamma((S(gamma)+1)/(N-1)))^(1/gamma)."""
    r = 1.0 / (n_children - 1)
    return (math.gamma(r) / math.gamma((S_gamma + 1.0) * r)) ** (1.0 / gamma)


@dataclass(frozen=True)
class ClockCheck:
    ks: float
    c_gamma: float | None
    note: str = ""


def gamma_clock_check(rng: np.random.Generator, t: float, n_children: int, count: int,
                      S_gamma: float | None = None, gamma: float | None = None) -> ClockCheck:
    """KS distance of nu_t e^{-(N-1)t} to Gamma(1/(N-1), 1)."""
    note = ""
    if math.exp(-(n_children - 1) * t) >= 0.05:
        note = "t too small for the Gamma limit: exp(-(N-1)t) >= 0.05"
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    z = sample_nu(rng, t, n_children, count) * math.exp(-(n_children - 1) * t)
    ks = stats.kstest(z, stats.gamma(1.0 / (n_children - 1)).cdf).statistic
    c = None
    if S_gamma is not None and gamma is not None:
        c = clock_scale(S_gamma, gamma, n_children)
    return ClockCheck(float(ks), c, note)


# -- V_t -----------------------------------------------------------------------------

_U53 = 1.0 / 9007199254740992.0
_MASK53 = (1 << 53) - 1

# weight-law programs consumed by the numba loop
_DETERMINISTIC, _MIXTURE, _UNIFORM_DRIVEN, _PRESAMPLED = 0, 1, 2, 3
_CONST, _UPOW, _CUPOW = 0, 1, 2


@dataclass(frozen=True)
class _Program:
    mode: int
    table: np.ndarray    # (atoms, N) weight rows
    cum: np.ndarray      # cumulative atom probabilities
    codes: np.ndarray    # per component: constant, U^p or (1-U_partner)^p
    params: np.ndarray
    partner: np.ndarray
    words: int           # raw 64-bit words per internal node


_PROGRAMS: dict[KernelSpec, _Program] = {}


def _program(spec: KernelSpec) -> _Program:
    prog = _PROGRAMS.get(spec)
    if prog is not None:
        return prog
    n = spec.n_children
    law = spec.law
    table = np.zeros((1, n))
    cum = np.ones(1)
    codes = np.zeros(n, dtype=np.int64)
    params = np.zeros(n)
    partner = np.zeros(n, dtype=np.int64)
    if isinstance(law, Deterministic):
        mode, words = _DETERMINISTIC, 1
        table = np.asarray([law.weights], dtype=float)
    elif isinstance(law, DiscreteMixture):
        mode, words = _MIXTURE, 2
        table = np.asarray([w for _, w in law.atoms], dtype=float)
        cum = np.cumsum([p for p, _ in law.atoms])
        cum /= cum[-1]
    elif any(isinstance(m, Beta) for m in law.marginals):
        mode, words = _PRESAMPLED, 1
    else:
        mode, words = _UNIFORM_DRIVEN, 1
        for j, m in enumerate(law.marginals):
            if isinstance(m, Constant):
                codes[j], params[j] = _CONST, m.value
            elif isinstance(m, Uniform01Power):
                codes[j], params[j] = _UPOW, m.power
                words += 1
            else:
                codes[j], params[j], partner[j] = _CUPOW, m.power, m.partner
    prog = _PROGRAMS[spec] = _Program(mode, table, cum, codes, params, partner, words)
    return prog


@nb.njit(cache=True, nogil=True)
def _tree_sums(nu, raw, words, mode, table, cum, codes, params, partner, A_pre, X, out):
    """Grow one tree per entry of ``nu`` and return sum(weight * X) per tree.

    Every internal node consumes ``words`` raw 64-bit values: the first picks
    the leaf to expand, the rest drive the weight draw.
    """
    N = table.shape[1]
    maxf = (N - 1) * (nu.max() if nu.shape[0] else 0) + 1
    w = np.empty(maxf)
    a = np.empty(N)
    us = np.empty(N)
    pr = 0
    pa = 0
    px = 0
    for d in range(nu.shape[0]):
        k = nu[d]
        w[0] = 1.0
        f = 1
        for step in range(k):
            idx = int(((raw[pr] >> 11) & _MASK53) * _U53 * f)
            if idx >= f:
                idx = f - 1
            if mode == 0:
                for j in range(N):
                    a[j] = table[0, j]
            elif mode == 1:
                u = (((raw[pr + 1] >> 11) & _MASK53) + 0.5) * _U53
                r = 0
                while r < cum.shape[0] - 1 and u >= cum[r]:
                    r += 1
                for j in range(N):
                    a[j] = table[r, j]
            elif mode == 2:
                q = 1
                for j in range(N):
                    if codes[j] == 1:
                        us[j] = (((raw[pr + q] >> 11) & _MASK53) + 0.5) * _U53
                        q += 1
                for j in range(N):
                    c = codes[j]
                    if c == 0:
                        a[j] = params[j]
                    else:
                        u = us[j] if c == 1 else 1.0 - us[partner[j]]
                        p = params[j]
                        if p == 0.5:
                            a[j] = math.sqrt(u)
                        elif p == 1.0:
                            a[j] = u
                        else:
                            a[j] = u ** p
            else:
                for j in range(N):
                    a[j] = A_pre[pa, j]
                pa += 1
            pr += words
            b = w[idx]
            w[idx] = b * a[0]
            for j in range(1, N):
                w[f + j - 1] = b * a[j]
            f += N - 1
        s = 0.0
        for i in range(f):
            s += w[i] * X[px + i]
        out[d] = s
        px += f


def _rescale_factor(spec: KernelSpec, t: float, rescale: float | None) -> float:
    if rescale is None:
        return 1.0
    mu = float(spectral_mu(spec, rescale))
    if not math.isfinite(mu):
        raise DomainError(f"S({rescale}) is infinite; cannot rescale")
    return math.exp(-mu * t)


def _check_cost(t: float, n_children: int, max_expected_nodes: float):
    cost = expected_nu(t, n_children)
    if cost > max_expected_nodes:
        raise CostLimitError(
            f"E[nu_t] = {cost:.3g} internal nodes per draw at t = {t} exceeds the cap "
            f"{max_expected_nodes:.3g}")


def _sample_chunk(rng, spec, law, t, size, factor):
    n = spec.n_children
    prog = _program(spec)
    nu = sample_nu(rng, t, n, size)
    total = int(nu.sum())
    # int64 view: numba mixes uint64 and int64 through floats
    raw = rng.bit_generator.random_raw(total * prog.words).view(np.int64)
    if prog.mode == _PRESAMPLED:
        A = sample_weights(spec, rng, total)
    else:
        A = np.empty((0, n))
    X = law.sample(rng, int(((n - 1) * nu + 1).sum()))
    out = np.empty(size)
    _tree_sums(nu, raw, prog.words, prog.mode, prog.table, prog.cum, prog.codes,
               prog.params, prog.partner, A, np.ascontiguousarray(X, dtype=float), out)
    return out * factor if factor != 1.0 else out


def sample_solution(rng: np.random.Generator, spec: KernelSpec, law: InitialLaw, t: float,
                    rescale: float | None = None,
                    max_expected_nodes: float = MAX_EXPECTED_NODES) -> float:
    """One draw of V_t, or of exp(-mu(gamma) t) V_t when ``rescale=gamma``."""
    if t < 0:
        raise DomainError("time must be >= 0")
    _check_cost(t, spec.n_children, max_expected_nodes)
    factor = _rescale_factor(spec, t, rescale)
    return float(_sample_chunk(rng, spec, law, t, 1, factor)[0])


def chunk_size(t: float, n_children: int) -> int:
    """Draws per RNG stream; a function of the scenario only."""
    per_draw = 1.0 + expected_nu(t, n_children) * n_children
    return int(min(_MAX_CHUNK_DRAWS, max(1, _CHUNK_NODES // per_draw)))


def sample_batch(seed: int, spec: KernelSpec, law: InitialLaw, t: float,
                 rescale: float | None = None, count: int = 1, workers: int = 1,
                 max_expected_nodes: float = MAX_EXPECTED_NODES) -> SampleBatch:
    """``count`` i.i.d. draws of (rescaled) V_t.

    Chunk c uses stream (seed, c), so the output is identical for every
    ``workers`` value.
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    if t < 0:
        raise DomainError("time must be >= 0")
    _check_cost(t, spec.n_children, max_expected_nodes)
    factor = _rescale_factor(spec, t, rescale)
    step = chunk_size(t, spec.n_children)
    bounds = [(lo, min(count, lo + step)) for lo in range(0, count, step)]
    out = np.empty(count)

    def run(c):
        lo, hi = bounds[c]
        out[lo:hi] = _sample_chunk(stream(seed, c), spec, law, t, hi - lo, factor)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(run, range(len(bounds))))
    else:
        for c in range(len(bounds)):
            run(c)
    return SampleBatch(out, float(t), rescale, seed, spec.label, law_label(law))


# -- the limit V_infinity ------------------------------------------------------------

def sample_limit(rng: np.random.Generator, mixing, profile: HGammaProfile,
                 size: int | None = None):
    """Draws of the self-similar limit: Y^(1/gamma) times a stable draw.

    Y is resampled from the mixing population; in case H1a the limit is m0 * Y.
    """
    pop = np.asarray(mixing.population)
    if pop.size == 0:
        raise StateError("mixing population is empty")
    n = 1 if size is None else size
    y = pop[rng.integers(0, pop.size, n)]
    if profile.case == "H1a":
        out = profile.m0 * y
    else:
        out = y ** (1.0 / profile.gamma) * sample_stable(rng, profile, n)
    return float(out[0]) if size is None else out


def sample_limit_batch(seed: int, mixing, profile: HGammaProfile, count: int,
                       law_label_: str = "") -> SampleBatch:
    vals = sample_limit(stream(seed, 0), mixing, profile, count)
    return SampleBatch(vals, math.inf, profile.gamma, seed, mixing.kernel_label, law_label_)
