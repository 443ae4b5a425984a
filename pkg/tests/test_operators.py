import math

import numpy as np
import pytest

from vortexsheet.operators import (
    Form,
    acceleration,
    commutator_bessel,
    commutator_bessel_difference,
    commutator_hilbert,
    margin,
    phi_of,
    quadratic_Q,
)
from vortexsheet.spectral import TrigPoly, derivative, hilbert, multiply, nodal, random_trig


def cos(k=1, a=1.0, K=None):
    return TrigPoly.from_modes(K or k, cos={k: a})


def sin(k=1, a=1.0, K=None):
    return TrigPoly.from_modes(K or k, sin={k: a})


def sup(f):
    return float(np.max(np.abs(nodal(f, 4 * (2 * f.K + 1)))))


def test_phi_of():
    assert np.allclose(phi_of(cos(a=0.3)).coeffs, sin(a=0.3).coeffs)
    assert np.allclose(phi_of(sin()).coeffs, -cos().coeffs)
    assert np.all(phi_of(TrigPoly.zeros(2)).coeffs == 0)


@pytest.mark.parametrize("a", [0.2, 0.45, 1.0])
def test_margin_cosine(a):
    m = margin(cos(a=a, K=4), 1.0)
    assert m.min_value == pytest.approx(1.0 - 2 * a, abs=1e-14)
    assert m.argmin_x == 0.0
    m = margin(cos(a=-a, K=4), 1.0)
    assert m.min_value == pytest.approx(1.0 - 2 * a, abs=1e-14)
    assert m.argmin_x == pytest.approx(math.pi)
    assert m.grid_oversample == 4


def test_margin_of_zero_and_oversample():
    assert margin(TrigPoly.zeros(3), 2.5).min_value == pytest.approx(2.5, abs=1e-15)
    with pytest.raises(ValueError):
        margin(cos(), 1.0, oversample=2)


@pytest.mark.parametrize("a", [0.1, 1.0, 3.0])
def test_Q_cosine_closed_form(a):
    q = quadratic_Q(cos(a=a, K=3))
    assert sup(q - a * a) <= 1e-12


def test_Q_zero_and_homogeneity():
    assert np.all(quadratic_Q(TrigPoly.zeros(4)).coeffs == 0)
    f = random_trig(3, 10, 2.0)
    assert np.allclose(quadratic_Q(3.0 * f).coeffs, 9.0 * quadratic_Q(f).coeffs, atol=1e-12)


def test_Q_mean_identity():
    # form C has zero mean, so mean(Q) = mean(-2 phi_x varphi_xx)
    for seed in range(5):
        f = random_trig(seed, 12, 2.0)
        phi = hilbert(f)
        expect = multiply(-2.0 * derivative(phi, 1), derivative(f, 2)).mean
        assert quadratic_Q(f).mean == pytest.approx(expect, rel=1e-11, abs=1e-13)


def test_commutator_hilbert_examples():
    assert np.allclose(commutator_hilbert(TrigPoly.constant(2.0, 3), random_trig(1, 5)).coeffs, 0, atol=1e-15)
    c = commutator_hilbert(cos(), sin())
    assert np.allclose(c.coeffs, TrigPoly.constant(0.5, 2).coeffs, atol=1e-15)
    assert np.allclose(commutator_hilbert(cos(), cos()).coeffs, 0, atol=1e-15)


def test_commutator_bessel_examples():
    f = random_trig(4, 6)
    assert np.allclose(commutator_bessel(1.5, TrigPoly.constant(3.0, 2), f).coeffs, 0, atol=1e-13)
    assert np.allclose(commutator_bessel(0.0, random_trig(5, 4), f).coeffs, 0, atol=1e-15)
    c = commutator_bessel(1.0, cos(), cos())
    expect = TrigPoly.from_modes(2, cos={2: (math.sqrt(5) - math.sqrt(2)) / 2},
                                 const=0.5 - math.sqrt(2) / 2)
    assert np.allclose(c.coeffs, expect.coeffs, atol=1e-15)


@pytest.mark.parametrize("tau", [0.6, 1.0, 2.0, 2.5])
def test_commutator_bessel_two_ways(tau):
    for seed in range(4):
        v, f = random_trig(seed, 9, 1.0) + 0.3, random_trig(seed + 100, 13, 0.5)
        a = commutator_bessel(tau, v, f)
        b = commutator_bessel_difference(tau, v, f)
        assert a.K == b.K == v.K + f.K
        scale = np.max(np.abs(b.coeffs))
        assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-12 * scale


def test_commutator_bessel_rejects_negative_tau():
    with pytest.raises(ValueError):
        commutator_bessel(-1.0, cos(), cos())


@pytest.mark.parametrize("form", list(Form))
def test_acceleration_zero(form):
    assert np.all(acceleration(TrigPoly.zeros(5), 1.0, form).coeffs == 0)


@pytest.mark.parametrize("form", list(Form))
def test_acceleration_mean_free_and_degree(form):
    f = random_trig(8, 10, 1.5, 0.5)
    acc = acceleration(f, 1.3, form)
    assert acc.K == 20
    assert abs(acc.mean) <= 1e-12 * np.max(np.abs(acc.coeffs))
    assert acceleration(f, 1.3, form, truncate_to=10).K == 10


def test_forms_agree():
    for seed in range(10):
        f = random_trig(seed, 16, 1.0, 0.4)
        a, b, c = (nodal(acceleration(f, 0.7, form), 129) for form in Form)
        scale = np.max(np.abs(a))
        assert np.max(np.abs(a - b)) <= 1e-12 * scale
        assert np.max(np.abs(a - c)) <= 1e-12 * scale


def test_acceleration_linear_part():
    # for tiny data the quadratic terms are negligible: varphi_tt ~ mu varphi_xx
    f = cos(3, 1e-8, K=3)
    acc = acceleration(f, 2.0, "C")
    assert np.allclose(acc.resize(3).coeffs, (2.0 * derivative(f, 2)).coeffs, atol=1e-15)
