import cmath
import math

import numpy as np
import pytest
from scipy import stats

from kacsim import initial_data as I
from kacsim.errors import ClassificationError, KernelSpecError, UnsupportedError
from kacsim.metrics import empirical_cf, ks_distance
from kacsim.rng import stream

XI = np.array([0.25, 1.0, 4.0])
N = 10 ** 6


def test_classify_examples():
    p = I.classify(I.Gaussian(1.0), 2.0)
    assert (p.case, p.sigma2) == ("H2", 1.0)
    p = I.classify(I.PointMass(3.0), 1.0)
    assert (p.case, p.m0) == ("H1a", 3.0)
    p = I.classify(I.SymmetricPareto(1.0, 0.5), 1.0)
    assert (p.case, p.c_plus) == ("H1b", 0.5)
    assert I.SymmetricPareto(1.0, 0.5).x0 == 1.0


def test_classify_mismatch_names_condition():
    with pytest.raises(ClassificationError, match="tail condition"):
        I.classify(I.Gaussian(), 1.5)
    with pytest.raises(ClassificationError, match="centred"):
        I.classify(I.PointMass(1.0), 2.0)
    with pytest.raises(ClassificationError, match="symmetric"):
        I.classify(I.SkewPareto(1.0, 0.7, 0.3), 1.0)
    with pytest.raises(ClassificationError):
        I.classify(I.SymmetricPareto(0.8, 0.5), 1.2)


def test_skew_pareto_profile_constants():
    p = I.classify(I.SkewPareto(1.5, 0.3, 0.1), 1.5)
    assert p.case == "Hgamma"
    assert p.eta0 == pytest.approx(0.5)
    assert p.k0 == pytest.approx(0.4 * math.pi / (2 * math.gamma(1.5) * math.sin(0.75 * math.pi)))


def test_k0_closed_form():
    p = I.HGammaProfile(0.5, "Hgamma", c_plus=0.5, c_minus=0.5)
    assert p.k0 == pytest.approx(math.sqrt(math.pi / 2), rel=1e-12)
    assert p.eta0 == 0


def test_invalid_law_parameters():
    with pytest.raises(KernelSpecError):
        I.SymmetricPareto(2.5, 0.5)
    with pytest.raises(KernelSpecError):
        I.SkewPareto(1.2, 0.0, 0.0)


def test_point_mass_and_rademacher_samples():
    assert np.all(I.sample_initial(stream(0), I.PointMass(2.5), 100) == 2.5)
    x = I.sample_initial(stream(1), I.Rademacher(), N)
    assert set(np.unique(x)) == {-1.0, 1.0}
    assert abs(x.mean()) < 4 / math.sqrt(N)
    assert isinstance(I.sample_initial(stream(2), I.Rademacher()), float)


def test_pareto_tail():
    law = I.SymmetricPareto(1.0, 0.5)
    x = I.sample_initial(stream(3), law, N)
    assert np.all(np.abs(x) >= law.x0)
    p_hat = np.mean(x > 100)
    se = 100 * math.sqrt(0.005 * 0.995 / N)
    assert abs(100 * p_hat - 0.5) < 3 * se


def test_skew_pareto_is_centred_and_matches_cdf():
    law = I.SkewPareto(1.5, 0.3, 0.1)
    x = law.sample(stream(4), N)
    assert ks_distance(x, law.cdf) < 0.003
    # heavy-tailed mean: loose check only
    assert abs(x.mean()) < 0.05


@pytest.mark.parametrize("law", [I.Gaussian(1.3), I.PointMass(0.7), I.Rademacher()])
def test_empirical_cf_matches_analytic(law):
    x = I.sample_initial(stream(5), law, N)
    assert np.all(np.abs(empirical_cf(x, XI) - law.cf(XI)) < 5 / math.sqrt(N))


def test_pareto_has_no_cf():
    with pytest.raises(UnsupportedError):
        I.SymmetricPareto(1.0, 0.5).cf(1.0)
    assert not I.has_cf(I.SymmetricPareto(1.0, 0.5))


def test_stable_cf_values():
    assert I.stable_cf(I.HGammaProfile(2.0, "H2", sigma2=1.0), 1.0) == pytest.approx(math.exp(-0.5))
    assert I.stable_cf(I.HGammaProfile(1.0, "H1a", m0=3.0), 1.0) == pytest.approx(cmath.exp(3j))


@pytest.mark.parametrize("profile", [
    I.HGammaProfile(2.0, "H2", sigma2=1.0),
    I.HGammaProfile(1.0, "H1b", c_plus=0.5, c_minus=0.5),
    I.HGammaProfile(1.5, "Hgamma", c_plus=0.3, c_minus=0.1),
    I.HGammaProfile(0.5, "Hgamma", c_plus=0.2, c_minus=0.6),
    I.HGammaProfile(1.0, "H1a", m0=-2.0),
])
def test_stable_cf_properties_and_sampler(profile):
    xi = np.linspace(-5, 5, 41)
    g = I.stable_cf(profile, xi)
    assert np.all(np.abs(g) <= 1 + 1e-15)
    assert I.stable_cf(profile, 0.0) == pytest.approx(1.0)
    assert np.allclose(I.stable_cf(profile, -xi), np.conj(g))
    x = I.sample_stable(stream(6), profile, N)
    assert np.all(np.abs(empirical_cf(x, XI) - I.stable_cf(profile, XI)) < 5 / math.sqrt(N))


def test_sample_stable_examples():
    assert I.sample_stable(stream(0), I.HGammaProfile(1.0, "H1a", m0=3.0)) == 3.0
    x = I.sample_stable(stream(7), I.HGammaProfile(2.0, "H2", sigma2=1.0), N)
    assert x.var() == pytest.approx(1.0, rel=0.01)
    x = I.sample_stable(stream(8), I.HGammaProfile(1.0, "H1b", c_plus=0.5, c_minus=0.5), N)
    assert ks_distance(x, stats.cauchy(0, math.pi / 2).cdf) < 0.005
    with pytest.raises(UnsupportedError):
        I.sample_stable(stream(0), I.HGammaProfile(1.0, "H1b", c_plus=0.7, c_minus=0.3))


@pytest.mark.parametrize("law", [I.Gaussian(2.0), I.PointMass(-1.0), I.Rademacher(),
                                 I.SymmetricPareto(1.2, 0.4), I.SkewPareto(0.7, 0.1, 0.3)])
def test_law_round_trip(law):
    assert I.law_from_dict(I.law_to_dict(law)) == law
