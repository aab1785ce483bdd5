import cmath
import math

import numpy as np
import pytest

from kacsim import initial_data as I
from kacsim import kernel as K
from kacsim import montecarlo as M
from kacsim import wild as W
from kacsim.metrics import empirical_cf

MIX = K.KernelSpec(2, K.DiscreteMixture(((0.5, (0.6, 0.7)), (0.5, (0.9, 0.0)))), "mix")


def test_q0_is_initial_cf():
    assert W.wild_q(K.deterministic(0.6, 0.7), I.Gaussian(), 0, 1.3) == pytest.approx(
        math.exp(-0.5 * 1.3 ** 2))


def test_conservative_point_mass():
    for k in range(6):
        assert W.wild_q(K.deterministic(0.5, 0.5), I.PointMass(1.0), k, 0.8) == pytest.approx(
            cmath.exp(0.8j), abs=1e-14)


def test_unit_weights_rademacher():
    xi = 0.9
    assert W.wild_q(K.deterministic(1, 1), I.Rademacher(), 1, xi) == pytest.approx(math.cos(xi) ** 2)


def test_q2_by_hand():
    # k = 2, N = 2: profiles (1, 0) and (0, 1), each with probability 1/2
    a, b, xi = 0.6, 0.7, 1.1
    phi = math.cos

    def q1(x):
        return phi(a * x) * phi(b * x)

    expect = 0.5 * (q1(a * xi) * phi(b * xi)) + 0.5 * (phi(a * xi) * q1(b * xi))
    assert W.wild_q(K.deterministic(a, b), I.Rademacher(), 2, xi) == pytest.approx(expect)


@pytest.mark.parametrize("spec", [K.deterministic(0.6, 0.7), MIX,
                                  K.deterministic(0.3, 0.5, 0.9)])
def test_q_properties(spec):
    xi = np.linspace(-3, 3, 13)
    for k in range(5):
        q = W.wild_q(spec, I.Gaussian(0.8), k, xi)
        assert np.all(np.abs(q) <= 1 + 1e-12)
        assert np.allclose(q[::-1], np.conj(q))
        assert W.wild_q(spec, I.Gaussian(0.8), k, 0.0) == pytest.approx(1.0)


def test_time_zero():
    ev = W.wild_solution(K.deterministic(0.6, 0.7), I.Rademacher(), 0.0, 1.0)
    assert ev.value == pytest.approx(math.cos(1.0))
    assert ev.tail_bound == 0.0


def test_at_zero_frequency_value_complements_tail():
    ev = W.wild_solution(MIX, I.Gaussian(), 1.5, 0.0, K=6)
    assert ev.value.real + ev.tail_bound == pytest.approx(1.0, abs=1e-12)


def test_tail_bound_decreases_in_K():
    tails = [W.wild_solution(MIX, I.Rademacher(), 1.0, 1.0, K).tail_bound for K in range(8)]
    assert all(b < a for a, b in zip(tails, tails[1:]))


def test_conservative_point_mass_bound():
    for t in (0.5, 2.0):
        ev = W.wild_solution(K.deterministic(0.5, 0.5), I.PointMass(1.0), t, 0.7, K=5)
        assert abs(ev.value - cmath.exp(0.7j)) <= ev.tail_bound + 1e-12


def test_mixture_against_monte_carlo():
    xi = [0.5, 1.5]
    evals = W.wild_grid(MIX, I.Gaussian(), 1.0, xi, K=10)
    b = M.sample_batch(21, MIX, I.Gaussian(), 1.0, None, 100_000)
    ecf = empirical_cf(b, xi)
    for ev, e in zip(evals, ecf):
        assert abs(ev.value - e) <= ev.tail_bound + 5 / math.sqrt(len(b))


def test_unsupported_inputs():
    from kacsim.errors import UnsupportedError
    with pytest.raises(UnsupportedError):
        W.wild_q(K.kac2(), I.Rademacher(), 1, 1.0)
    with pytest.raises(UnsupportedError):
        W.wild_q(K.deterministic(0.6, 0.7), I.SymmetricPareto(1.0, 0.5), 1, 1.0)


def test_csv_export(tmp_path):
    evals = W.wild_grid(K.deterministic(0.6, 0.7), I.Rademacher(), 1.0, [0.5, 1.0], K=4)
    p = W.save_wild_csv(evals, tmp_path / "w.csv")
    lines = p.read_text().splitlines()
    assert lines[0] == "xi,re,im,tail_bound"
    assert len(lines) == 3
