"""Truncated Fourier series on the torus R/2piZ.

A real function is stored by its complex coefficients c_k, k = -K..K, with
the normalization c_k = (1/2pi) * integral f(x) exp(-ikx) dx.  Products are
exact coefficient convolutions, so the degree of a product is the sum of the
degrees and nothing is aliased.  Every physical-space integral in this
package is normalized by 1/2pi, which makes ``inner_l2(f, f) == norm(f)**2``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ResolutionTooLow, SymmetryViolation

SYMMETRY_TOL = 1e-12


@lru_cache(maxsize=256)
def wavenumbers(K: int) -> np.ndarray:
    k = np.arange(-K, K + 1, dtype=float)
    k.flags.writeable = False
    return k


@lru_cache(maxsize=512)
def bracket_power(K: int, s: float) -> np.ndarray:
    """<k>**s = (1 + k**2)**(s/2) on modes -K..K."""
    w = (1.0 + wavenumbers(K) ** 2) ** (0.5 * s)
    w.flags.writeable = False
    return w


@dataclass(frozen=True, eq=False)
class TrigPoly:
    """Real trigonometric polynomial of degree ``K``.

    ``coeffs[K + k]`` holds the coefficient of ``exp(ikx)``.  The array is
    copied and made read-only on construction; Hermitian symmetry
    ``c_{-k} = conj(c_k)`` is validated to ``SYMMETRY_TOL`` and then imposed
    exactly.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size % 2 == 0 or c.size < 3:
            raise ValueError("coefficient array must have odd length 2K+1 with K >= 1")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        scale = np.max(np.abs(c))
        if np.max(np.abs(c - np.conj(c[::-1])), initial=0.0) > SYMMETRY_TOL * max(scale, 1e-300):
            raise SymmetryViolation("coefficients are not Hermitian-symmetric")
        c = 0.5 * (c + np.conj(c[::-1]))
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def _trusted(cls, c: np.ndarray) -> "TrigPoly":
        # Internal constructor for arrays already known to be Hermitian.
        obj = object.__new__(cls)
        c = np.asarray(c, dtype=complex)
        c.flags.writeable = False
        object.__setattr__(obj, "coeffs", c)
        return obj

    # -- constructors ---------------------------------------------------------
    @classmethod
    def zeros(cls, K: int) -> "TrigPoly":
        return cls._trusted(np.zeros(2 * K + 1, dtype=complex))

    @classmethod
    def constant(cls, value: float, K: int = 1) -> "TrigPoly":
        c = np.zeros(2 * K + 1, dtype=complex)
        c[K] = value
        return cls._trusted(c)

    @classmethod
    def from_modes(cls, K: int, cos=None, sin=None, const: float = 0.0) -> "TrigPoly":
        """Build ``const + sum a_k cos(kx) + sum b_k sin(kx)`` from ``{k: a_k}`` maps."""
        c = np.zeros(2 * K + 1, dtype=complex)
        c[K] = const
        for k, a in (cos or {}).items():
            if not 1 <= k <= K:
                raise ValueError(f"mode {k} outside 1..{K}")
            c[K + k] += 0.5 * a
            c[K - k] += 0.5 * a
        for k, b in (sin or {}).items():
            if not 1 <= k <= K:
                raise ValueError(f"mode {k} outside 1..{K}")
            c[K + k] += -0.5j * b
            c[K - k] += 0.5j * b
        return cls._trusted(c)

    # -- basic structure ------------------------------------------------------
    @property
    def K(self) -> int:
        return (self.coeffs.size - 1) // 2

    max_mode = K

    def coeff(self, k: int) -> complex:
        K = self.K
        return complex(self.coeffs[K + k]) if abs(k) <= K else 0j

    @property
    def mean(self) -> float:
        return float(self.coeffs[self.K].real)

    def is_mean_zero(self, atol: float = 0.0) -> bool:
        return abs(self.coeffs[self.K]) <= atol

    def resize(self, K: int) -> "TrigPoly":
        """Zero-pad or truncate (Galerkin projection) to degree ``K``."""
        K0 = self.K
        if K == K0:
            return self
        if K > K0:
            c = np.zeros(2 * K + 1, dtype=complex)
            c[K - K0:K + K0 + 1] = self.coeffs
            return TrigPoly._trusted(c)
        return TrigPoly._trusted(self.coeffs[K0 - K:K0 + K + 1].copy())

    def positive_modes(self) -> np.ndarray:
        """Coefficients for k = 0..K."""
        return self.coeffs[self.K:]

    # -- arithmetic -----------------------------------------------------------
    def _aligned(self, other: "TrigPoly"):
        K = max(self.K, other.K)
        return self.resize(K).coeffs, other.resize(K).coeffs

    def __add__(self, other):
        if isinstance(other, TrigPoly):
            a, b = self._aligned(other)
            return TrigPoly._trusted(a + b)
        if np.isscalar(other) and np.isreal(other):
            c = self.coeffs.copy()
            c[self.K] += float(np.real(other))
            return TrigPoly._trusted(c)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, TrigPoly):
            a, b = self._aligned(other)
            return TrigPoly._trusted(a - b)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return TrigPoly._trusted(-self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, TrigPoly):
            return multiply(self, scalar)
        if np.isscalar(scalar) and np.isreal(scalar):
            return TrigPoly._trusted(float(np.real(scalar)) * self.coeffs)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)

    def __repr__(self):
        return f"TrigPoly(K={self.K}, coeffs[0..K]={np.array2string(self.positive_modes(), precision=4)})"

    # -- serialization --------------------------------------------------------
    def to_dict(self) -> dict:
        return {"K": self.K, "coeffs": [[float(c.real), float(c.imag)] for c in self.positive_modes()]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "TrigPoly":
        K = int(data["K"])
        pos = np.array([complex(re, im) for re, im in data["coeffs"]])
        if pos.size != K + 1:
            raise ValueError(f"expected {K + 1} coefficient pairs, got {pos.size}")
        if abs(pos[0].imag) > 0:
            raise SymmetryViolation("mean coefficient must be real")
        return cls._trusted(np.concatenate([np.conj(pos[:0:-1]), pos]))

    @classmethod
    def from_json(cls, text: str) -> "TrigPoly":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class SampleGrid:
    """Values of a real function at the nodes x_j = 2 pi j / M."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("a sample grid needs at least two nodes")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def nodes(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.size) / self.size

    @classmethod
    def from_function(cls, func, M: int) -> "SampleGrid":
        return cls(func(2.0 * np.pi * np.arange(M) / M))


def analyze(samples: SampleGrid, K: int) -> TrigPoly:
    """Discrete Fourier coefficients of modes -K..K from nodal samples."""
    M = samples.size
    if M < 2 * K + 1:
        raise ResolutionTooLow(f"{M} samples cannot resolve {K} modes (need {2 * K + 1})")
    F = np.fft.fft(samples.values) / M
    idx = np.arange(-K, K + 1) % M
    c = F[idx]
    return TrigPoly._trusted(0.5 * (c + np.conj(c[::-1])))


def synthesize(f: TrigPoly, M: int) -> SampleGrid:
    """Evaluate ``f`` at the ``M`` equispaced nodes."""
    K = f.K
    if M < 2 * K + 1:
        raise ResolutionTooLow(f"{M} nodes cannot represent degree {K} (need {2 * K + 1})")
    buf = np.zeros(M, dtype=complex)
    buf[np.arange(-K, K + 1) % M] = f.coeffs
    vals = np.fft.ifft(buf) * M
    scale = np.max(np.abs(vals), initial=0.0)
    if np.max(np.abs(vals.imag), initial=0.0) > 1e-12 * max(scale, 1e-300):
        raise SymmetryViolation("synthesized values have a non-negligible imaginary part")
    return SampleGrid(vals.real)


def nodal(f: TrigPoly, M: int | None = None) -> np.ndarray:
    """Shorthand for ``synthesize(f, M).values`` with the minimal grid by default."""
    return synthesize(f, M or 2 * f.K + 1).values


def derivative(f: TrigPoly, m: int = 1) -> TrigPoly:
    if m < 0:
        raise ValueError("derivative order must be non-negative")
    if m == 0:
        return f
    k = wavenumbers(f.K)
    return TrigPoly._trusted((1j * k) ** m * f.coeffs)


def hilbert(f: TrigPoly) -> TrigPoly:
    """Periodic Hilbert transform, symbol -i sgn(k); H[cos] = sin."""
    return TrigPoly._trusted(-1j * np.sign(wavenumbers(f.K)) * f.coeffs)


def bessel(f: TrigPoly, s: float) -> TrigPoly:
    """Bessel potential <d/dx>^s, symbol (1 + k^2)^(s/2)."""
    return TrigPoly._trusted(bracket_power(f.K, float(s)) * f.coeffs)


def multiply(f: TrigPoly, g: TrigPoly, truncate_to: int | None = None) -> TrigPoly:
    """Exact pointwise product, degree ``f.K + g.K`` unless truncated."""
    c = np.convolve(f.coeffs, g.coeffs)
    c = 0.5 * (c + np.conj(c[::-1]))
    h = TrigPoly._trusted(c)
    return h if truncate_to is None else h.resize(truncate_to)


def sobolev_norm(f: TrigPoly, s: float = 0.0) -> float:
    c = f.coeffs
    if s == 0:
        return float(np.sqrt(np.sum(c.real ** 2 + c.imag ** 2)))
    w = bracket_power(f.K, 2.0 * float(s))
    return float(np.sqrt(np.sum(w * (c.real ** 2 + c.imag ** 2))))


def inner_l2(f: TrigPoly, g: TrigPoly) -> float:
    """(1/2pi) * integral of f*g over the torus."""
    K = min(f.K, g.K)
    a = f.coeffs[f.K - K:f.K + K + 1]
    b = g.coeffs[g.K - K:g.K + K + 1]
    return float(np.real(np.vdot(b, a)))


def project_mean_zero(f: TrigPoly) -> TrigPoly:
    c = f.coeffs.copy()
    c[f.K] = 0.0
    return TrigPoly._trusted(c)


def random_trig(seed: int, K: int, decay: float = 1.0, amplitude: float = 1.0) -> TrigPoly:
    """Seeded mean-zero random polynomial with c_k = amplitude <k>^(-decay-1) u_k.

    Real and imaginary parts of u_k are independent uniform(-1, 1) draws, so
    the result stays bounded in H^decay uniformly in ``K``.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.0, 1.0, K) + 1j * rng.uniform(-1.0, 1.0, K)
    k = np.arange(1, K + 1, dtype=float)
    pos = amplitude * (1.0 + k ** 2) ** (-0.5 * (decay + 1.0)) * u
    c = np.concatenate([np.conj(pos[::-1]), [0.0], pos])
    return TrigPoly._trusted(c)
