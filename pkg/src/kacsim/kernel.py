"""Collision kernels: laws of the nonnegative weight vector A = (A_1, ..., A_N).

A kernel is a frozen :class:`KernelSpec`. The helpers here check the standing
hypotheses on A, evaluate the spectral quantities

    S(s)  = E[sum_j A_j^s] - 1      (with 0^0 = 0)
    mu(s) = S(s) / s

and locate the conjugate exponent q*, the second root of mu(q) = mu(gamma).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import special

from .errors import DomainError, KernelSpecError

PROB_TOL = 1e-12


# -- marginal laws for IndependentComponents ---------------------------------

@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Uniform01Power:
    """U**power with U uniform on (0, 1)."""

    power: float


@dataclass(frozen=True)
class Beta:
    a: float
    b: float


@dataclass(frozen=True)
class ComplementUniformPower:
    """(1 - U)**power where U is the uniform driving component ``partner``."""

    power: float
    partner: int


Marginal = Union[Constant, Uniform01Power, Beta, ComplementUniformPower]


# -- kernel laws --------------------------------------------------------------

@dataclass(frozen=True)
class Deterministic:
    weights: tuple[float, ...]


@dataclass(frozen=True)
class DiscreteMixture:
    atoms: tuple[tuple[float, tuple[float, ...]], ...]


@dataclass(frozen=True)
class IndependentComponents:
    marginals: tuple[Marginal, ...]


Law = Union[Deterministic, DiscreteMixture, IndependentComponents]


@dataclass(frozen=True)
class KernelSpec:
    n_children: int
    law: Law
    label: str = ""

    def __post_init__(self):
        check_spec(self)

    @property
    def is_discrete(self) -> bool:
        return isinstance(self.law, (Deterministic, DiscreteMixture))

    def atoms(self) -> list[tuple[float, np.ndarray]]:
        """Atoms ``(probability, weight vector)`` of a discrete kernel."""
        if isinstance(self.law, Deterministic):
            return [(1.0, np.asarray(self.law.weights, dtype=float))]
        if isinstance(self.law, DiscreteMixture):
            return [(float(p), np.asarray(w, dtype=float)) for p, w in self.law.atoms]
        raise KernelSpecError(f"kernel {self.label!r} has no finite atom list")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return sample_weights(self, rng, size)


def deterministic(*weights: float, label: str = "") -> KernelSpec:
    return KernelSpec(len(weights), Deterministic(tuple(float(w) for w in weights)),
                      label or "det(" + ",".join(f"{w:g}" for w in weights) + ")")


def kac2() -> KernelSpec:
    """(sqrt(U), sqrt(1-U)): the conservative Kac-type kernel at gamma = 2."""
    return KernelSpec(2, IndependentComponents((Uniform01Power(0.5),
                                                ComplementUniformPower(0.5, 0))), "kac2")


def uniform_split() -> KernelSpec:
    """(U, 1-U): conservative at gamma = 1."""
    return KernelSpec(2, IndependentComponents((Uniform01Power(1.0),
                                                ComplementUniformPower(1.0, 0))), "uniform_split")


PRESETS = {"kac2": kac2, "uniform_split": uniform_split}


def check_spec(spec: KernelSpec) -> None:
    """Raise :class:`KernelSpecError` if the spec is malformed."""
    n = spec.n_children
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise KernelSpecError(f"n_children must be an integer >= 2, got {n!r}")
    law = spec.law
    if isinstance(law, Deterministic):
        _check_vector(law.weights, n)
    elif isinstance(law, DiscreteMixture):
        if not law.atoms:
            raise KernelSpecError("mixture needs at least one atom")
        total = 0.0
        for p, w in law.atoms:
            if not p >= 0:
                raise KernelSpecError(f"negative atom probability {p}")
            total += p
            _check_vector(w, n)
        if abs(total - 1.0) > PROB_TOL:
            raise KernelSpecError(f"atom probabilities sum to {total!r}, not 1")
    elif isinstance(law, IndependentComponents):
        if len(law.marginals) != n:
            raise KernelSpecError(f"{len(law.marginals)} marginals for N = {n}")
        for j, m in enumerate(law.marginals):
            if isinstance(m, Constant):
                if not m.value >= 0:
                    raise KernelSpecError(f"negative constant {m.value}")
            elif isinstance(m, Beta):
                if not (m.a > 0 and m.b > 0):
                    raise KernelSpecError(f"Beta parameters must be positive: {m}")
            elif isinstance(m, ComplementUniformPower):
                if not 0 <= m.partner < n or m.partner == j:
                    raise KernelSpecError(f"component {j}: bad partner {m.partner}")
                if not isinstance(law.marginals[m.partner], Uniform01Power):
                    raise KernelSpecError(f"component {j}: partner must be Uniform01Power")
            elif not isinstance(m, Uniform01Power):
                raise KernelSpecError(f"unknown marginal {m!r}")
    else:
        raise KernelSpecError(f"unknown law {law!r}")


def _check_vector(w, n):
    if len(w) != n:
        raise KernelSpecError(f"atom {tuple(w)} has length {len(w)}, expected {n}")
    if any(not x >= 0 for x in w):
        raise KernelSpecError(f"atom {tuple(w)} has a negative entry")


# -- validation of the standing hypotheses ------------------------------------

@dataclass
class Condition:
    name: str
    passed: bool
    value: float
    detail: str


@dataclass
class ValidationReport:
    label: str
    conditions: list[Condition] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def failed(self) -> list[str]:
        return [c.name for c in self.conditions if not c.passed]

    def to_dict(self) -> dict:
        return {"label": self.label, "passed": self.passed,
                "conditions": [vars(c) for c in self.conditions]}


def _positive_count_law(spec: KernelSpec) -> tuple[float, float, float]:
    """(P{#positive in {0,1}}, E[#positive], P{all A_i in {0,1}}), exactly."""
    law = spec.law
    if spec.is_discrete:
        p01 = mean = pbin = 0.0
        for p, w in spec.atoms():
            cnt = int(np.count_nonzero(w > 0))
            p01 += p * (cnt <= 1)
            mean += p * cnt
            pbin += p * bool(np.all((w == 0) | (w == 1)))
        return p01, mean, pbin
    # independent components: positivity of each marginal is almost sure or null
    cnt = 0
    all_binary = True
    for m in law.marginals:
        if isinstance(m, Constant):
            cnt += m.value > 0
            all_binary &= m.value in (0.0, 1.0)
        elif isinstance(m, (Uniform01Power, ComplementUniformPower)):
            cnt += 1
            all_binary &= m.power == 0
        else:
            cnt += 1
            all_binary = False
    return float(cnt <= 1), float(cnt), float(all_binary)


def validate_kernel(spec: KernelSpec) -> ValidationReport:
    """Evaluate the three non-degeneracy conditions on the law of A."""
    check_spec(spec)
    p01, mean, pbin = _positive_count_law(spec)
    report = ValidationReport(spec.label)
    report.conditions.append(Condition(
        "P{#(A_i>0) in {0,1}} < 1", p01 < 1, p01,
        f"probability that at most one weight is positive = {p01:g}"))
    report.conditions.append(Condition(
        "E[#(A_i>0)] > 1", mean > 1, mean,
        f"expected number of positive weights = {mean:g}"))
    report.conditions.append(Condition(
        "P{A_i in {0,1} for all i} < 1", pbin < 1, pbin,
        f"probability that every weight is 0 or 1 = {pbin:g}"))
    return report


# -- spectral quantities -------------------------------------------------------

def _marginal_moment(m: Marginal, s: np.ndarray) -> np.ndarray:
    if isinstance(m, Constant):
        if m.value == 0:
            return np.zeros_like(s)
        return np.power(m.value, s)
    if isinstance(m, (Uniform01Power, ComplementUniformPower)):
        e = m.power * s
        with np.errstate(divide="ignore"):
            out = np.where(e > -1, 1.0 / (e + 1.0), np.inf)
        return out
    # Beta(a, b): E[X^s] = B(a+s, b) / B(a, b)
    return np.exp(special.betaln(m.a + s, m.b) - special.betaln(m.a, m.b))


def moment_sum(spec: KernelSpec, s):
    """E[sum_j A_j^s] with 0^0 = 0; vectorised over ``s``; +inf where it diverges."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise DomainError("spectral quantities need s >= 0")
    if spec.is_discrete:
        out = np.zeros_like(s_arr)
        for p, w in spec.atoms():
            pos = w[w > 0]
            out = out + p * np.power.outer(pos, s_arr).sum(axis=0)
    else:
        out = sum(_marginal_moment(m, s_arr) for m in spec.law.marginals)
    return out if out.ndim else float(out)


def spectral_S(spec: KernelSpec, s):
    return moment_sum(spec, s) - 1.0


def spectral_mu(spec: KernelSpec, s):
    s_arr = np.asarray(s, dtype=float)
    S = np.asarray(spectral_S(spec, s_arr))
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = np.where(s_arr > 0, S / np.where(s_arr > 0, s_arr, 1.0), np.inf)
    return mu if mu.ndim else float(mu)


def spectral(spec: KernelSpec, s: float) -> tuple[float, float]:
    """Return ``(S(s), mu(s))``. mu(0) is reported as +inf."""
    return float(spectral_S(spec, s)), float(spectral_mu(spec, s))


def spectral_montecarlo(spec: KernelSpec, s: float, rng: np.random.Generator,
                        size: int = 100_000) -> tuple[float, float]:
    """Monte Carlo estimate of S(s) and its standard error."""
    if s < 0:
        raise DomainError("spectral quantities need s >= 0")
    a = sample_weights(spec, rng, size)
    with np.errstate(divide="ignore"):
        terms = np.where(a > 0, np.power(a, s), 0.0).sum(axis=1)
    return float(terms.mean() - 1.0), float(terms.std(ddof=1) / math.sqrt(size))


def cross_moment(spec: KernelSpec, gamma: float) -> float:
    """E[sum_{i != j} A_i^gamma A_j^gamma]."""
    if spec.is_discrete:
        total = 0.0
        for p, w in spec.atoms():
            v = np.where(w > 0, np.power(w, gamma), 0.0)
            total += p * (v.sum() ** 2 - (v ** 2).sum())
        return float(total)
    margs = spec.law.marginals
    g = np.array([float(_marginal_moment(m, np.float64(gamma))) for m in margs])
    total = 0.0
    for i, mi in enumerate(margs):
        for j, mj in enumerate(margs):
            if i == j:
                continue
            pair = _coupled_pair(mi, mj, i, j)
            if pair is not None:
                # E[U^a (1-U)^b] = B(a+1, b+1)
                a, b = pair
                total += math.exp(special.betaln(a * gamma + 1, b * gamma + 1))
            else:
                total += g[i] * g[j]
    return float(total)


def _coupled_pair(mi, mj, i, j):
    if isinstance(mj, ComplementUniformPower) and mj.partner == i:
        return mi.power, mj.power
    if isinstance(mi, ComplementUniformPower) and mi.partner == j:
        return mj.power, mi.power
    return None


def is_conservative(spec: KernelSpec, gamma: float, tol: float = 1e-12) -> bool:
    """True when sum_i A_i^gamma = 1 almost surely (exact for every shipped law)."""
    if spec.is_discrete:
        return all(abs(np.where(w > 0, np.power(w, gamma), 0.0).sum() - 1.0) <= tol
                   for p, w in spec.atoms() if p > 0)
    # only a (U^p, (1-U)^p) pair with p * gamma = 1 plus zero constants qualifies
    margs = spec.law.marginals
    rest = []
    pair_ok = False
    for j, m in enumerate(margs):
        if isinstance(m, ComplementUniformPower):
            partner = margs[m.partner]
            pair_ok = (abs(m.power * gamma - 1) <= tol
                       and abs(partner.power * gamma - 1) <= tol)
            rest = [k for k in range(len(margs)) if k not in (j, m.partner)]
            break
    if not pair_ok:
        return False
    return all(isinstance(margs[k], Constant) and margs[k].value == 0 for k in rest)


# -- conjugate exponent ---------------------------------------------------------

@dataclass(frozen=True)
class SpectralProfile:
    gamma: float
    s_value: float
    S: float
    mu: float
    q_star: float
    note: str = ""


def _bisect(f, lo: float, hi: float, flo: float, tol: float) -> float:
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def conjugate_exponent(spec: KernelSpec, gamma: float, s_max: float = 64.0,
                       grid: int = 4096, tol: float = 1e-9) -> float:
    return spectral_profile(spec, gamma, s_max=s_max, grid=grid, tol=tol).q_star


def spectral_profile(spec: KernelSpec, gamma: float, s_max: float = 64.0,
                     grid: int = 4096, tol: float = 1e-9) -> SpectralProfile:
    """S, mu at ``gamma`` and the conjugate exponent q* with a diagnostic note.

    q* is the root q != gamma of g(q) = S(q) - q mu(gamma). g is convex with
    g(gamma) = 0, so at most one other root exists; it is bracketed on a grid
    over (0, s_max] and refined by bisection. When none exists q* = +inf.
    """
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    S_g, mu_g = spectral(spec, gamma)
    if not math.isfinite(S_g):
        raise DomainError(f"S({gamma}) is infinite")

    def g(q):
        return spectral_S(spec, q) - q * mu_g

    eps = 1e-6 * max(1.0, gamma)
    note = "monotone"
    q_star = math.inf
    if gamma + eps < s_max:
        right = np.linspace(gamma + eps, s_max, grid)
        vals = np.asarray(g(right))
        if vals[0] < 0:
            pos = np.flatnonzero(vals > 0)
            if pos.size:
                i = pos[0]
                q_star = _bisect(g, right[i - 1], right[i], vals[i - 1], tol)
                note = "root above gamma"
            elif vals[-1] >= vals[-2]:
                # g turns upward below s_max, so a root may lie beyond the cap
                note = f"s_max = {s_max:g} binding: no crossing found above gamma"
    if not math.isfinite(q_star) and gamma - eps > 0:
        left = np.linspace(gamma - eps, min(eps, gamma / 2), grid)
        vals = np.asarray(g(left))
        if vals[0] < 0:
            pos = np.flatnonzero(vals > 0)
            if pos.size:
                i = pos[0]
                q_star = _bisect(g, left[i], left[i - 1], vals[i], tol)
                note = "root below gamma"
    return SpectralProfile(gamma, gamma, S_g, mu_g, q_star, note)


# -- sampling ---------------------------------------------------------------------

def sample_weights(spec: KernelSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` i.i.d. draws of A as an array of shape (size, N)."""
    n = spec.n_children
    law = spec.law
    if isinstance(law, Deterministic):
        return np.tile(np.asarray(law.weights, dtype=float), (size, 1))
    if isinstance(law, DiscreteMixture):
        probs = np.array([p for p, _ in law.atoms])
        table = np.array([w for _, w in law.atoms], dtype=float)
        cdf = np.cumsum(probs)
        idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
        return table[np.minimum(idx, len(probs) - 1)]
    out = np.empty((size, n))
    uniforms = {}
    for j, m in enumerate(law.marginals):
        if isinstance(m, Constant):
            out[:, j] = m.value
        elif isinstance(m, Uniform01Power):
            u = rng.random(size)
            uniforms[j] = u
            out[:, j] = u ** m.power
        elif isinstance(m, Beta):
            out[:, j] = rng.beta(m.a, m.b, size)
    for j, m in enumerate(law.marginals):
        if isinstance(m, ComplementUniformPower):
            out[:, j] = (1.0 - uniforms[m.partner]) ** m.power
    return out


# -- serialisation ------------------------------------------------------------------

_MARGINAL_KINDS = {
    "constant": (Constant, ("value",)),
    "uniform_power": (Uniform01Power, ("power",)),
    "beta": (Beta, ("a", "b")),
    "complement_uniform_power": (ComplementUniformPower, ("power", "partner")),
}


def kernel_to_dict(spec: KernelSpec) -> dict:
    law = spec.law
    if isinstance(law, Deterministic):
        d = {"kind": "deterministic", "weights": list(law.weights)}
    elif isinstance(law, DiscreteMixture):
        d = {"kind": "mixture",
             "atoms": [{"p": p, "weights": list(w)} for p, w in law.atoms]}
    else:
        margs = []
        for m in law.marginals:
            kind = next(k for k, (cls, _) in _MARGINAL_KINDS.items() if isinstance(m, cls))
            margs.append({"kind": kind, **vars(m)})
        d = {"kind": "independent", "marginals": margs}
    return {"n_children": spec.n_children, "label": spec.label, "law": d}


def kernel_from_dict(d) -> KernelSpec:
    """Build a kernel from a config mapping, or from a preset name."""
    if isinstance(d, str):
        if d not in PRESETS:
            raise KernelSpecError(f"unknown kernel preset {d!r}")
        return PRESETS[d]()
    try:
        if "preset" in d:
            return kernel_from_dict(d["preset"])
        law = d["law"]
        kind = law["kind"]
        if kind == "deterministic":
            obj = Deterministic(tuple(float(x) for x in law["weights"]))
        elif kind == "mixture":
            obj = DiscreteMixture(tuple((float(a["p"]), tuple(float(x) for x in a["weights"]))
                                        for a in law["atoms"]))
        elif kind == "independent":
            margs = []
            for m in law["marginals"]:
                cls, keys = _MARGINAL_KINDS[m["kind"]]
                margs.append(cls(*(m[k] for k in keys)))
            obj = IndependentComponents(tuple(margs))
        else:
            raise KernelSpecError(f"unknown law kind {kind!r}")
        n = int(d.get("n_children", _law_length(obj)))
        return KernelSpec(n, obj, str(d.get("label", "")))
    except (KeyError, TypeError) as exc:
        raise KernelSpecError(f"malformed kernel config: {exc}") from exc


def _law_length(law) -> int:
    if isinstance(law, Deterministic):
        return len(law.weights)
    if isinstance(law, DiscreteMixture):
        return len(law.atoms[0][1])
    return len(law.marginals)
