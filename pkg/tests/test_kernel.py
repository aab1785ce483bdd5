import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kacsim import kernel as K
from kacsim.errors import DomainError, KernelSpecError
from kacsim.rng import stream

# q* for Deterministic(1.2, 0.5) at gamma = 1, from an independent bisection on
# 1.2^q + 0.5^q - 1 - 0.7 q with mpmath at 30 digits
Q_STAR_12_05 = 12.483978878587166


def test_validate_passes_symmetric():
    rep = K.validate_kernel(K.deterministic(2 ** -0.5, 2 ** -0.5))
    assert rep.passed
    assert len(rep.conditions) == 3


def test_validate_single_positive_fails_first():
    rep = K.validate_kernel(K.deterministic(1, 0))
    assert not rep.conditions[0].passed


def test_validate_binary_weights_fail_third():
    rep = K.validate_kernel(K.deterministic(1, 1))
    assert rep.conditions[0].passed and rep.conditions[1].passed
    assert not rep.conditions[2].passed


def test_malformed_spec_is_not_a_hypothesis_failure():
    with pytest.raises(KernelSpecError):
        K.deterministic(0.5, -0.1)
    with pytest.raises(KernelSpecError):
        K.KernelSpec(2, K.DiscreteMixture(((0.5, (1.0, 0.5)), (0.4, (0.2, 0.3)))))
    with pytest.raises(KernelSpecError):
        K.KernelSpec(3, K.Deterministic((0.5, 0.5)))


def test_mixture_validation_is_exact():
    spec = K.KernelSpec(2, K.DiscreteMixture(((0.5, (1.0, 0.0)), (0.5, (0.5, 0.5)))))
    rep = K.validate_kernel(spec)
    assert rep.conditions[0].value == 0.5
    assert rep.conditions[1].value == 1.5
    assert rep.passed


def test_kac2_closed_form():
    s = np.array([0.5, 1.0, 2.0, 3.0, 4.0])
    assert np.allclose(K.spectral_S(K.kac2(), s), (2 - s) / (2 + s), rtol=0, atol=1e-14)
    assert K.spectral_S(K.kac2(), 2.0) == pytest.approx(0.0, abs=1e-15)
    assert K.spectral_S(K.kac2(), 4.0) == pytest.approx(-1 / 3, abs=1e-14)


def test_kac2_matches_quadrature():
    from scipy import integrate
    for s in (0.3, 1.7, 5.0):
        val, _ = integrate.quad(lambda u: u ** (s / 2) + (1 - u) ** (s / 2), 0, 1)
        assert float(K.spectral_S(K.kac2(), s)) == pytest.approx(val - 1, abs=1e-10)


def test_S_at_zero_counts_positive_weights():
    assert K.spectral_S(K.deterministic(0.3, 0.4, 0.9), 0.0) == 2.0
    assert K.spectral_S(K.deterministic(0.3, 0.0, 0.9), 0.0) == 1.0


def test_deterministic_arithmetic():
    S, mu = K.spectral(K.deterministic(0.6, 0.7), 1.0)
    assert S == pytest.approx(0.3, abs=1e-15)
    assert mu == pytest.approx(0.3, abs=1e-15)


def test_negative_s_rejected():
    with pytest.raises(DomainError):
        K.spectral_S(K.kac2(), -0.1)


def test_beta_closed_form_matches_quadrature():
    from scipy import integrate, stats
    spec = K.KernelSpec(2, K.IndependentComponents((K.Beta(2.0, 3.0), K.Beta(0.5, 0.5))))
    for s in (0.5, 1.0, 2.5):
        exact = sum(integrate.quad(lambda x, a=a, b=b: x ** s * stats.beta(a, b).pdf(x), 0, 1)[0]
                    for a, b in ((2.0, 3.0), (0.5, 0.5))) - 1
        assert float(K.spectral_S(spec, s)) == pytest.approx(exact, abs=1e-8)


def test_divergent_power_reports_inf():
    spec = K.KernelSpec(2, K.IndependentComponents((K.Uniform01Power(-2.0), K.Constant(0.5))))
    assert math.isinf(K.spectral_S(spec, 1.0))
    assert math.isfinite(K.spectral_S(spec, 0.4))


def test_montecarlo_agrees_with_exact_for_mixtures():
    spec = K.KernelSpec(2, K.DiscreteMixture(((0.3, (0.9, 0.2)), (0.7, (0.4, 0.6)))))
    for s in (0.5, 1.0, 2.0):
        est, se = K.spectral_montecarlo(spec, s, stream(3, int(10 * s)), 200_000)
        assert abs(est - float(K.spectral_S(spec, s))) < 4 * se + 1e-12


def test_conservative_gives_exact_zero():
    assert K.spectral_S(K.deterministic(0.6, 0.8), 2.0) == pytest.approx(0.0, abs=1e-15)
    assert K.is_conservative(K.deterministic(0.6, 0.8), 2.0)
    assert K.is_conservative(K.kac2(), 2.0)
    assert K.is_conservative(K.uniform_split(), 1.0)
    assert not K.is_conservative(K.deterministic(0.6, 0.7), 1.0)


def test_q_star_kac2_is_infinite():
    assert math.isinf(K.conjugate_exponent(K.kac2(), 2.0))


def test_q_star_monotone_case():
    prof = K.spectral_profile(K.deterministic(0.6, 0.7), 1.0)
    assert math.isinf(prof.q_star)
    assert prof.note == "monotone"
    assert float(K.spectral_mu(K.deterministic(0.6, 0.7), 0.5)) == pytest.approx(1.2225, abs=1e-4)
    assert float(K.spectral_mu(K.deterministic(0.6, 0.7), 2.0)) == pytest.approx(-0.075, abs=1e-12)


def test_q_star_finite_root():
    spec = K.deterministic(1.2, 0.5)
    q = K.conjugate_exponent(spec, 1.0)
    assert 12 < q < 13
    assert q == pytest.approx(Q_STAR_12_05, abs=1e-8)
    mu = K.spectral_mu(spec, np.array([12.0, 13.0]))
    assert mu[0] < 0.7 < mu[1]


def test_q_star_root_below_gamma():
    # g is positive just below the root, so the other root sits on the left
    spec = K.deterministic(1.2, 0.5)
    q = K.conjugate_exponent(spec, Q_STAR_12_05)
    assert q == pytest.approx(1.0, abs=1e-7)


def test_s_max_binding_is_reported():
    prof = K.spectral_profile(K.deterministic(1.2, 0.5), 1.0, s_max=10.0)
    assert math.isinf(prof.q_star)
    assert "binding" in prof.note


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.05, 1.5), min_size=2, max_size=4),
       st.floats(0.0, 6.0), st.floats(0.0, 6.0))
def test_convexity(ws, s1, s2):
    spec = K.deterministic(*ws)
    lo, hi = sorted((s1, s2))
    mid = float(K.spectral_S(spec, (lo + hi) / 2))
    ends = (float(K.spectral_S(spec, lo)) + float(K.spectral_S(spec, hi))) / 2
    assert mid <= ends + 1e-9


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(1.05, 1.6))
def test_q_star_invariant_under_reordering(a, b, c):
    p = [(0.25, (a, c)), (0.75, (b, a))]
    s1 = K.KernelSpec(2, K.DiscreteMixture(tuple(p)))
    s2 = K.KernelSpec(2, K.DiscreteMixture(tuple(reversed(p))))
    s3 = K.KernelSpec(2, K.DiscreteMixture(tuple((q, w[::-1]) for q, w in p)))
    q1, q2, q3 = (K.conjugate_exponent(s, 1.0) for s in (s1, s2, s3))
    if math.isinf(q1):
        assert math.isinf(q2) and math.isinf(q3)
    else:
        assert q1 == pytest.approx(q2, abs=1e-8) and q1 == pytest.approx(q3, abs=1e-8)


def test_sample_weights_shapes_and_coupling():
    A = K.sample_weights(K.kac2(), stream(1), 1000)
    assert A.shape == (1000, 2)
    assert np.allclose((A ** 2).sum(axis=1), 1.0)
    mix = K.KernelSpec(2, K.DiscreteMixture(((0.25, (1.0, 0.5)), (0.75, (0.3, 0.3)))))
    A = K.sample_weights(mix, stream(2), 100_000)
    assert np.mean(A[:, 0] == 1.0) == pytest.approx(0.25, abs=0.01)


def test_cross_moment_for_coupled_pair():
    # E[2 sqrt(U (1-U))] = 2 B(3/2, 3/2) = pi / 4
    assert K.cross_moment(K.kac2(), 1.0) == pytest.approx(math.pi / 4, rel=1e-12)
    assert K.cross_moment(K.deterministic(0.6, 0.7), 1.0) == pytest.approx(0.84)


@pytest.mark.parametrize("spec", [
    K.kac2(), K.uniform_split(), K.deterministic(0.6, 0.7),
    K.KernelSpec(3, K.DiscreteMixture(((0.5, (1.0, 0.5, 0.0)), (0.5, (0.2, 0.3, 0.4)))), "m3"),
    K.KernelSpec(2, K.IndependentComponents((K.Beta(2.0, 3.0), K.Constant(0.5))), "b"),
])
def test_config_round_trip(spec):
    assert K.kernel_from_dict(K.kernel_to_dict(spec)) == spec


def test_presets_and_bad_config():
    assert K.kernel_from_dict("kac2") == K.kac2()
    assert K.kernel_from_dict({"preset": "uniform_split"}) == K.uniform_split()
    with pytest.raises(KernelSpecError):
        K.kernel_from_dict("nope")
    with pytest.raises(KernelSpecError):
        K.kernel_from_dict({"law": {"kind": "deterministic"}})
