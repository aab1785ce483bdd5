"""Population dynamics for the mean-one mixing law of the self-similar profile.

The mixing variable Y solves Y = Theta^{S(gamma)} sum_i A_i^gamma Y_i with Theta
uniform on (0, 1) and E[Y] = 1. An equivalent Dirichlet form solves
M = sum_i A_i^gamma U_i^{S/(N-1)} M_i, and Y = c_gamma^gamma Z^{S/(N-1)} M with
Z ~ Gamma(1/(N-1), 1) independent.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateError, DomainError
from .kernel import (Constant, KernelSpec, cross_moment, moment_sum, sample_weights,
                     spectral_S)
from .montecarlo import clock_scale

FORMS = ("theta", "dirichlet")


@dataclass(frozen=True)
class MixingLaw:
    population: np.ndarray
    gamma: float
    kernel_label: str = ""
    sweeps_run: int = 0
    converged: bool = False
    final_distance: float = math.nan
    form: str = "theta"

    def __len__(self):
        return self.population.shape[0]

    def metadata(self) -> dict:
        return {"gamma": self.gamma, "kernel_label": self.kernel_label,
                "sweeps_run": self.sweeps_run, "converged": self.converged,
                "final_distance": self.final_distance, "form": self.form,
                "size": len(self)}


def w1_sorted(a: np.ndarray, b: np.ndarray) -> float:
    """Wasserstein-1 between two equal-size populations via sorted coupling."""
    return float(np.mean(np.abs(np.sort(a) - np.sort(b))))


def _check_nondegenerate(spec: KernelSpec):
    if spec.is_discrete:
        if all(not np.any(w > 0) for p, w in spec.atoms() if p > 0):
            raise DegenerateError(f"all weights of {spec.label!r} vanish")
    elif all(isinstance(m, Constant) and m.value == 0 for m in spec.law.marginals):
        raise DegenerateError(f"all weights of {spec.label!r} vanish")


def sweep(rng: np.random.Generator, spec: KernelSpec, gamma: float, population: np.ndarray,
          form: str = "theta", S: float | None = None) -> np.ndarray:
    """One generation of the update map, renormalised to mean one."""
    P = population.shape[0]
    n = spec.n_children
    if S is None:
        S = float(spectral_S(spec, gamma))
    A = sample_weights(spec, rng, P)
    Ag = np.where(A > 0, A, 0.0) ** gamma
    parents = population[rng.integers(0, P, (P, n))]
    if form == "theta":
        # 1 - U lies in (0, 1], so negative powers stay finite
        theta = 1.0 - rng.random(P)
        new = theta ** S * np.sum(Ag * parents, axis=1)
    elif form == "dirichlet":
        U = rng.dirichlet(np.full(n, 1.0 / (n - 1)), P)
        new = np.sum(Ag * U ** (S / (n - 1)) * parents, axis=1)
    else:
        raise DomainError(f"unknown update form {form!r}")
    mean = new.mean()
    if not mean > 0 or not math.isfinite(mean):
        raise ArithmeticError(f"population mean became {mean}")
    return new / mean


def solve_mixing(rng: np.random.Generator, spec: KernelSpec, gamma: float,
                 pop_size: int = 100_000, max_sweeps: int = 200, tol: float = 1e-3,
                 form: str = "theta", min_sweeps: int = 1) -> MixingLaw:
    """Iterate the update map from the all-ones population until successive
    generations are within ``tol`` in Wasserstein-1."""
    _check_nondegenerate(spec)
    S = float(spectral_S(spec, gamma))
    if not math.isfinite(S):
        raise DomainError(f"S({gamma}) is infinite")
    pop = np.ones(pop_size)
    dist = math.inf
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        new = sweep(rng, spec, gamma, pop, form, S)
        dist = w1_sorted(new, pop)
        pop = new
        sweeps += 1
        if sweeps >= min_sweeps and dist < tol:
            converged = True
            break
    return MixingLaw(pop, gamma, spec.label, sweeps, converged, dist, form)


def scale_dirichlet(rng: np.random.Generator, spec: KernelSpec, mixing: MixingLaw) -> MixingLaw:
    """Map a Dirichlet-form population M to Y = c_gamma^gamma Z^{S/(N-1)} M."""
    if mixing.form != "dirichlet":
        raise DomainError("only Dirichlet-form populations need scaling")
    n = spec.n_children
    g = mixing.gamma
    S = float(spectral_S(spec, g))
    z = rng.gamma(1.0 / (n - 1), 1.0, len(mixing))
    y = clock_scale(S, g, n) ** g * z ** (S / (n - 1)) * mixing.population
    return MixingLaw(y, g, mixing.kernel_label, mixing.sweeps_run, mixing.converged,
                     mixing.final_distance, "dirichlet-scaled")


# -- moments ---------------------------------------------------------------------------

def exact_second_moment(spec: KernelSpec, gamma: float) -> float:
    """E[Y^2] = C / (2 S(gamma) + 1 - S_2), +inf when the denominator is not positive.

    S_2 = E[sum A_i^{2 gamma}] and C = E[sum_{i != j} A_i^gamma A_j^gamma]; the
    factor 1/(2S + 1) is E[Theta^{2S}].
    """
    S = float(spectral_S(spec, gamma))
    S2 = float(moment_sum(spec, 2 * gamma))
    if not (math.isfinite(S) and math.isfinite(S2)):
        raise DomainError(f"E[sum A^{2 * gamma}] is not available")
    if 2 * S + 1 <= 0:
        return math.inf
    denom = 2 * S + 1 - S2
    if denom <= 0:
        return math.inf
    return cross_moment(spec, gamma) / denom


@dataclass(frozen=True)
class MomentEstimate:
    p_over_gamma: float
    estimate: float
    predicted_finite: bool
    nested: tuple[float, ...] | None = None  # estimates on P/4, P/2, P when infinite
    growing: bool | None = None


def mixing_moment(mixing: MixingLaw, p_over_gamma: float, q_star: float) -> MomentEstimate:
    """Empirical E[Y^{p/gamma}] with the prediction: finite iff p < q*."""
    pop = mixing.population
    est = float(np.mean(pop ** p_over_gamma))
    finite = p_over_gamma * mixing.gamma < q_star
    if finite:
        return MomentEstimate(p_over_gamma, est, True)
    P = pop.shape[0]
    nested = tuple(float(np.mean(pop[:m] ** p_over_gamma)) for m in (P // 4, P // 2, P))
    growing = nested[0] < nested[1] < nested[2]
    return MomentEstimate(p_over_gamma, est, False, nested, growing)


# -- Beta-Gamma-Dirichlet identity ---------------------------------------------------------

def lemma_sides(rng: np.random.Generator, n_children: int, size: int):
    """Samples of (Z U_1, ..., Z U_N) and (V Z_1, ..., V Z_N).

    Z, Z_i ~ Gamma(1/(N-1), 1), U ~ Dirichlet(1/(N-1), ...), V ~ Beta(1/(N-1), 1);
    the two arrays have the same law.
    """
    r = 1.0 / (n_children - 1)
    left = rng.gamma(r, 1.0, (size, 1)) * rng.dirichlet(np.full(n_children, r), size)
    right = rng.beta(r, 1.0, (size, 1)) * rng.gamma(r, 1.0, (size, n_children))
    return left, right


# -- persistence --------------------------------------------------------------------------

def save_mixing(mixing: MixingLaw, path) -> tuple[Path, Path]:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("value\n")
        fh.writelines(f"{x!r}\n" for x in mixing.population.tolist())
    side = path.with_suffix(".json")
    side.write_text(json.dumps(mixing.metadata(), indent=2, sort_keys=True) + "\n")
    return path, side


def load_mixing(path) -> MixingLaw:
    path = Path(path)
    pop = np.loadtxt(path, skiprows=1, ndmin=1)
    meta = json.loads(path.with_suffix(".json").read_text())
    return MixingLaw(pop, float(meta["gamma"]), meta.get("kernel_label", ""),
                     int(meta.get("sweeps_run", 0)), bool(meta.get("converged", False)),
                     float(meta.get("final_distance", math.nan)), meta.get("form", "theta"))
