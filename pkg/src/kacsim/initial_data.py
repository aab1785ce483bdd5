"""Initial laws F_0, their stable-attraction class, and stable samplers."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ClassificationError, KernelSpecError, UnsupportedError


@dataclass(frozen=True)
class Gaussian:
    sigma: float = 1.0

    def sample(self, rng, size):
        return rng.normal(0.0, self.sigma, size)

    def cf(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.exp(-0.5 * (self.sigma * xi) ** 2) + 0j


@dataclass(frozen=True)
class PointMass:
    m0: float = 0.0

    def sample(self, rng, size):
        return np.full(size, float(self.m0))

    def cf(self, xi):
        return np.exp(1j * self.m0 * np.asarray(xi, dtype=float))


def _random_signs(rng, size):
    bits = np.unpackbits(np.frombuffer(rng.bytes(-(-size // 8)), dtype=np.uint8))
    return 1.0 - 2.0 * bits[:size]


def _pareto_magnitudes(rng, size, x0, gamma):
    # 1 - u lies in (0, 1], so the power is finite
    v = 1.0 - rng.random(size)
    if gamma == 1:
        return x0 / v
    return x0 * v ** (-1.0 / gamma)


@dataclass(frozen=True)
class Rademacher:
    def sample(self, rng, size):
        return _random_signs(rng, size)

    def cf(self, xi):
        return np.cos(np.asarray(xi, dtype=float)) + 0j


@dataclass(frozen=True)
class SymmetricPareto:
    """Pure power tails: P{X > x} = P{X < -x} = c0 x^-gamma for x >= x0 = (2 c0)^(1/gamma)."""

    gamma: float
    c0: float

    def __post_init__(self):
        if not (0 < self.gamma < 2 and self.c0 > 0):
            raise KernelSpecError(f"invalid SymmetricPareto{(self.gamma, self.c0)}")

    @property
    def x0(self) -> float:
        return (2.0 * self.c0) ** (1.0 / self.gamma)

    def sample(self, rng, size):
        return _random_signs(rng, size) * _pareto_magnitudes(rng, size, self.x0, self.gamma)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.maximum(np.abs(x), self.x0)
        tail = self.c0 * ax ** -self.gamma
        return np.where(x >= self.x0, 1.0 - tail, np.where(x <= -self.x0, tail, 0.5))

    def cf(self, xi):
        raise UnsupportedError("no closed-form characteristic function for Pareto laws")


@dataclass(frozen=True)
class SkewPareto:
    """Tails c_plus x^-gamma and c_minus |x|^-gamma beyond x0 = (c_plus + c_minus)^(1/gamma).

    For gamma > 1 the law is shifted to have mean zero.
    """

    gamma: float
    c_plus: float
    c_minus: float

    def __post_init__(self):
        if not (0 < self.gamma < 2) or self.c_plus < 0 or self.c_minus < 0 \
                or self.c_plus + self.c_minus <= 0:
            raise KernelSpecError(f"invalid SkewPareto{(self.gamma, self.c_plus, self.c_minus)}")

    @property
    def x0(self) -> float:
        return (self.c_plus + self.c_minus) ** (1.0 / self.gamma)

    @property
    def shift(self) -> float:
        if self.gamma <= 1:
            return 0.0
        g = self.gamma
        raw_mean = (self.c_plus - self.c_minus) * g * self.x0 ** (1 - g) / (g - 1)
        return -raw_mean

    def sample(self, rng, size):
        p_plus = self.c_plus / (self.c_plus + self.c_minus)
        sign = np.where(rng.random(size) < p_plus, 1.0, -1.0)
        return sign * _pareto_magnitudes(rng, size, self.x0, self.gamma) + self.shift

    def cdf(self, x):
        y = np.asarray(x, dtype=float) - self.shift
        ay = np.maximum(np.abs(y), self.x0)
        right = 1.0 - self.c_plus * ay ** -self.gamma
        left = self.c_minus * ay ** -self.gamma
        p_minus = self.c_minus / (self.c_plus + self.c_minus)
        return np.where(y >= self.x0, right, np.where(y <= -self.x0, left, p_minus))

    def cf(self, xi):
        raise UnsupportedError("no closed-form characteristic function for Pareto laws")


InitialLaw = Union[Gaussian, PointMass, Rademacher, SymmetricPareto, SkewPareto]


def sample_initial(rng: np.random.Generator, law: InitialLaw, size: int | None = None):
    """Draw i.i.d. values from F_0; a scalar when ``size`` is None."""
    if size is None:
        return float(law.sample(rng, 1)[0])
    return law.sample(rng, size)


def has_cf(law: InitialLaw) -> bool:
    return isinstance(law, (Gaussian, PointMass, Rademacher))


# -- stable-attraction classification ------------------------------------------------

@dataclass(frozen=True)
class HGammaProfile:
    """Case of the tail hypothesis at exponent ``gamma`` with its constants.

    ``case`` is one of "H1a" (finite mean m0), "H1b" (symmetric Cauchy tail
    c_plus), "H2" (variance sigma2) or "Hgamma" (tails c_plus, c_minus).
    """

    gamma: float
    case: str
    m0: float = 0.0
    sigma2: float = 0.0
    c_plus: float = 0.0
    c_minus: float = 0.0

    @property
    def k0(self) -> float:
        g = self.gamma
        if self.case == "Hgamma":
            return (self.c_plus + self.c_minus) * math.pi / (
                2.0 * math.gamma(g) * math.sin(math.pi * g / 2.0))
        if self.case == "H1b":
            return math.pi * self.c_plus
        if self.case == "H2":
            return self.sigma2 / 2.0
        return 0.0

    @property
    def eta0(self) -> float:
        if self.case == "Hgamma":
            return (self.c_plus - self.c_minus) / (self.c_plus + self.c_minus)
        return 0.0


def classify(law: InitialLaw, gamma: float) -> HGammaProfile:
    """Which tail hypothesis ``law`` satisfies at ``gamma``; raises if none."""
    if not 0 < gamma <= 2:
        raise ClassificationError(f"gamma must lie in (0, 2], got {gamma}")
    if isinstance(law, (Gaussian, Rademacher, PointMass)):
        mean = law.m0 if isinstance(law, PointMass) else 0.0
        second = {Gaussian: lambda: law.sigma ** 2, Rademacher: lambda: 1.0,
                  PointMass: lambda: law.m0 ** 2}[type(law)]()
        if gamma == 1:
            return HGammaProfile(1.0, "H1a", m0=mean)
        if gamma == 2:
            if mean != 0:
                raise ClassificationError("H2 needs a centred law: mean is not zero")
            if not second > 0:
                raise ClassificationError("H2 needs 0 < E[X^2] < inf: E[X^2] = 0")
            return HGammaProfile(2.0, "H2", sigma2=second)
        raise ClassificationError(
            f"tail condition at gamma = {gamma}: lim x^gamma (1 - F(x)) = 0 for a "
            "law with all moments, so c_plus + c_minus > 0 fails")
    if isinstance(law, (SymmetricPareto, SkewPareto)):
        cp, cm = ((law.c0, law.c0) if isinstance(law, SymmetricPareto)
                  else (law.c_plus, law.c_minus))
        a = law.gamma
        if gamma == a:
            if gamma == 1:
                if cp != cm:
                    raise ClassificationError("H1 case (b) needs a symmetric law")
                return HGammaProfile(1.0, "H1b", c_plus=cp, c_minus=cm)
            return HGammaProfile(gamma, "Hgamma", c_plus=cp, c_minus=cm)
        if gamma == 1 and a > 1:
            # both Pareto families are centred when the mean exists
            return HGammaProfile(1.0, "H1a", m0=0.0)
        if gamma > a:
            raise ClassificationError(
                f"tail condition at gamma = {gamma}: x^gamma (1 - F(x)) diverges "
                f"for a tail of index {a}")
        raise ClassificationError(
            f"tail condition at gamma = {gamma}: x^gamma (1 - F(x)) -> 0 for a tail "
            f"of index {a}, so c_plus + c_minus > 0 fails")
    raise ClassificationError(f"unknown law {law!r}")


def stable_cf(profile: HGammaProfile, xi):
    """Characteristic function of the attracting law at ``xi`` (complex array)."""
    xi = np.asarray(xi, dtype=float)
    case = profile.case
    if case == "H1a":
        return np.exp(1j * profile.m0 * xi)
    if case == "H1b":
        return np.exp(-math.pi * profile.c_plus * np.abs(xi)) + 0j
    if case == "H2":
        return np.exp(-profile.sigma2 * xi ** 2 / 2.0) + 0j
    g = profile.gamma
    skew = 1j * profile.eta0 * math.tan(math.pi * g / 2.0) * np.sign(xi)
    return np.exp(-profile.k0 * np.abs(xi) ** g * (1.0 - skew))


def sample_stable(rng: np.random.Generator, profile: HGammaProfile, size: int | None = None):
    """Draws whose characteristic function is :func:`stable_cf` of ``profile``.

    General exponents use the Chambers-Mallows-Stuck transform of a uniform
    angle and a unit exponential.
    """
    n = 1 if size is None else size
    case = profile.case
    if case == "H1a":
        out = np.full(n, float(profile.m0))
    elif case == "H2":
        out = rng.normal(0.0, math.sqrt(profile.sigma2), n)
    elif case == "H1b":
        if profile.c_plus != profile.c_minus:
            raise UnsupportedError("asymmetric stable law with exponent 1")
        v = rng.uniform(-math.pi / 2, math.pi / 2, n)
        out = math.pi * profile.c_plus * np.tan(v)
    else:
        a = profile.gamma
        beta = profile.eta0
        scale = profile.k0 ** (1.0 / a)
        t = beta * math.tan(math.pi * a / 2.0)
        b = math.atan(t) / a
        s = (1.0 + t * t) ** (1.0 / (2.0 * a))
        v = rng.uniform(-math.pi / 2, math.pi / 2, n)
        w = rng.exponential(1.0, n)
        x = (s * np.sin(a * (v + b)) / np.cos(v) ** (1.0 / a)
             * (np.cos(v - a * (v + b)) / w) ** ((1.0 - a) / a))
        out = scale * x
    return float(out[0]) if size is None else out


# -- serialisation --------------------------------------------------------------------

_FAMILIES = {
    "gaussian": (Gaussian, ("sigma",)),
    "point_mass": (PointMass, ("m0",)),
    "rademacher": (Rademacher, ()),
    "symmetric_pareto": (SymmetricPareto, ("gamma", "c0")),
    "skew_pareto": (SkewPareto, ("gamma", "c_plus", "c_minus")),
}


def law_to_dict(law: InitialLaw) -> dict:
    family = next(k for k, (cls, _) in _FAMILIES.items() if type(law) is cls)
    return {"family": family, **vars(law)}


def law_from_dict(d: dict) -> InitialLaw:
    try:
        cls, keys = _FAMILIES[d["family"]]
        return cls(*(float(d[k]) for k in keys if k in d))
    except (KeyError, TypeError) as exc:
        raise KernelSpecError(f"malformed initial law config {d!r}: {exc}") from exc


def law_label(law: InitialLaw) -> str:
    d = law_to_dict(law)
    params = ",".join(f"{k}={v:g}" for k, v in d.items() if k != "family")
    return f"{d['family']}({params})"
