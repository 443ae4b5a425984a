"""Nonlocal operators of the amplitude equation.

The unknown ``varphi`` is a mean-zero TrigPoly and ``phi = H[varphi]``.  The
right-hand side of ``varphi_tt = ...`` can be written in three algebraically
equivalent ways:

* form A: ``mu varphi_xx + (1/2 H[phi^2]_xx + phi varphi_xx)_x``
* form B: ``mu varphi_xx + ([H; phi] phi_xx + H[phi_x^2])_x``
* form C: ``(mu - 2 phi_x) varphi_xx - Q[varphi]``

with ``Q[varphi] = -3 [H; phi_x] phi_xx - [H; phi] phi_xxx``.  All products
are exact, so the forms agree to rounding at degree 2K.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .spectral import (
    TrigPoly,
    bessel,
    derivative,
    hilbert,
    multiply,
    synthesize,
)


class Form(str, Enum):
    A = "A"
    B = "B"
    C = "C"


@dataclass(frozen=True)
class Margin:
    """Minimum of the hyperbolicity coefficient ``mu - 2 phi_x`` on a grid."""

    min_value: float
    argmin_x: float
    grid_oversample: int


def phi_of(varphi: TrigPoly) -> TrigPoly:
    return hilbert(varphi)


def margin_field(varphi: TrigPoly, mu: float) -> TrigPoly:
    """The coefficient ``mu - 2 phi_x`` as a TrigPoly."""
    return mu - 2.0 * derivative(hilbert(varphi), 1)


def margin(varphi: TrigPoly, mu: float, oversample: int = 4) -> Margin:
    if oversample < 4:
        raise ValueError("oversample must be at least 4")
    grid = synthesize(margin_field(varphi, mu), oversample * (2 * varphi.K + 1))
    j = int(np.argmin(grid.values))
    return Margin(float(grid.values[j]), float(grid.nodes[j]), oversample)


def commutator_hilbert(v: TrigPoly, f: TrigPoly) -> TrigPoly:
    """``[H; v] f = H[v f] - v H[f]``, degree ``v.K + f.K``."""
    return hilbert(multiply(v, f)) - multiply(v, hilbert(f))


def commutator_bessel(tau: float, v: TrigPoly, f: TrigPoly) -> TrigPoly:
    """``[<d/dx>^tau; v] f`` from the kernel (<k>^tau - <l>^tau) v(k-l) f(l)."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    Kv, Kf = v.K, f.K
    Ko = Kv + Kf
    k = np.arange(-Ko, Ko + 1)[:, None]
    l = np.arange(-Kf, Kf + 1)[None, :]
    m = k - l
    inside = np.abs(m) <= Kv
    V = np.where(inside, v.coeffs[np.clip(m + Kv, 0, 2 * Kv)], 0.0)
    W = (1.0 + k.astype(float) ** 2) ** (0.5 * tau) - (1.0 + l.astype(float) ** 2) ** (0.5 * tau)
    c = (W * V) @ f.coeffs
    return TrigPoly._trusted(0.5 * (c + np.conj(c[::-1])))


def commutator_bessel_difference(tau: float, v: TrigPoly, f: TrigPoly) -> TrigPoly:
    """Same commutator evaluated as ``<d>^tau (v f) - v <d>^tau f``."""
    return bessel(multiply(v, f), tau) - multiply(v, bessel(f, tau))


def quadratic_Q(varphi: TrigPoly) -> TrigPoly:
    """``Q[varphi]`` at degree 2K; quadratically homogeneous."""
    phi = hilbert(varphi)
    phi_x = derivative(phi, 1)
    phi_xx = derivative(phi, 2)
    phi_xxx = derivative(phi, 3)
    return -3.0 * commutator_hilbert(phi_x, phi_xx) - commutator_hilbert(phi, phi_xxx)


def acceleration(varphi: TrigPoly, mu: float, form: Form | str = Form.C,
                 truncate_to: int | None = None) -> TrigPoly:
    """Right-hand side of ``varphi_tt = ...`` in the selected form.

    The result has degree 2K; pass ``truncate_to`` for the Galerkin projection.
    """
    form = Form(form)
    phi = hilbert(varphi)
    varphi_xx = derivative(varphi, 2)
    if form is Form.A:
        inner = 0.5 * derivative(hilbert(multiply(phi, phi)), 2) + multiply(phi, varphi_xx)
        acc = mu * varphi_xx + derivative(inner, 1)
    elif form is Form.B:
        phi_x = derivative(phi, 1)
        inner = commutator_hilbert(phi, derivative(phi_x, 1)) + hilbert(multiply(phi_x, phi_x))
        acc = mu * varphi_xx + derivative(inner, 1)
    else:
        coeff = mu - 2.0 * derivative(phi, 1)
        acc = multiply(coeff, varphi_xx) - quadratic_Q(varphi)
    return acc if truncate_to is None else acc.resize(truncate_to)
