"""Dephasing coefficients and the single-qubit dephasing map.

Two environments are modelled:

* classical 1/f^alpha noise from a population of random telegraph
  fluctuators whose switching rates are distributed as ``p_alpha(gamma)``;
* a zero-temperature bosonic bath with Ohmic-family spectral density of
  Ohmicity ``s`` and cutoff ``omega_c``.

Both reduce to a real coefficient ``lam(t)`` multiplying the coherence of the
qubit density matrix.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import integrate

__all__ = [
    "DensityMatrix",
    "ColoredNoiseParams",
    "OhmicBathParams",
    "QuadratureError",
    "PoleError",
    "rtn_kernel",
    "color_weight",
    "lambda_classical",
    "gamma_function",
    "lambda_quantum",
    "dephase",
    "LambdaCache",
]

BRANCH_EPS = 1e-6  # |gamma - 2| below which the kernel uses its Taylor form
UNIT_EPS = 1e-9  # |alpha - 1| or |s - 1| below which the log branch is used
_TOL = 1e-12


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, abserr: float):
        super().__init__(message)
        self.abserr = abserr


class PoleError(ValueError):
    """Gamma function evaluated at a non-positive integer."""


@dataclass(frozen=True)
class DensityMatrix:
    """Qubit density matrix stored by its independent entries.

    ``a10`` is implied as the conjugate of ``a01``.
    """

    a00: float
    a11: float
    a01: complex

    def __post_init__(self):
        if abs(self.a00 + self.a11 - 1.0) > _TOL:
            raise ValueError(f"trace {self.a00 + self.a11} != 1")
        if self.a00 * self.a11 - abs(self.a01) ** 2 < -_TOL:
            raise ValueError("density matrix is not positive semidefinite")

    @classmethod
    def from_bloch(cls, b) -> "DensityMatrix":
        bx, by, bz = (float(v) for v in b)
        return cls(0.5 * (1.0 + bz), 0.5 * (1.0 - bz), complex(0.5 * bx, -0.5 * by))

    @classmethod
    def from_array(cls, m) -> "DensityMatrix":
        m = np.asarray(m, dtype=complex)
        if m.shape != (2, 2) or not np.allclose(m, m.conj().T, atol=_TOL):
            raise ValueError("expected a 2x2 Hermitian matrix")
        return cls(float(m[0, 0].real), float(m[1, 1].real), complex(m[0, 1]))

    @property
    def bloch(self) -> np.ndarray:
        return np.array([2.0 * self.a01.real, -2.0 * self.a01.imag, self.a00 - self.a11])

    @property
    def purity(self) -> float:
        return self.a00**2 + self.a11**2 + 2.0 * abs(self.a01) ** 2

    def to_array(self) -> np.ndarray:
        return np.array([[self.a00, self.a01], [self.a01.conjugate(), self.a11]], dtype=complex)


@dataclass(frozen=True)
class ColoredNoiseParams:
    alpha: float
    gamma1: float = 1e-4
    gamma2: float = 1e4
    quad_tol: float = 1e-10

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if not 0 < self.gamma1 < self.gamma2:
            raise ValueError("need 0 < gamma1 < gamma2")
        if self.quad_tol <= 0:
            raise ValueError("quad_tol must be > 0")


@dataclass(frozen=True)
class OhmicBathParams:
    s: float
    omega_c: float = 1.0

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError("s must be > 0")
        if self.omega_c <= 0:
            raise ValueError("omega_c must be > 0")


def rtn_kernel(t: float, gamma: float) -> float:
    """Coherence factor of a qubit coupled to one random telegraph fluctuator.

    ``G(t, gamma) = exp(-gamma t) [cosh(delta t) + gamma/delta sinh(delta t)]``
    with ``delta = sqrt(gamma**2 - 4)``. The three regimes (overdamped,
    underdamped, critical) are evaluated separately so that the result stays
    finite and accurate for rates up to 1e4 and beyond.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    if t == 0:
        return 1.0
    d2 = gamma * gamma - 4.0
    if abs(gamma - 2.0) < BRANCH_EPS:
        # cosh(dt) + gamma sinh(dt)/d as a series in d^2, valid for either sign
        tt = t * t
        total = 0.0
        c_even = 1.0  # t^{2k}/(2k)!
        c_odd = t  # t^{2k+1}/(2k+1)!
        dk = 1.0
        for k in range(4):
            total += dk * (c_even + gamma * c_odd)
            dk *= d2
            c_even *= tt / ((2 * k + 1) * (2 * k + 2))
            c_odd *= tt / ((2 * k + 2) * (2 * k + 3))
        return math.exp(-gamma * t) * total
    if d2 > 0:
        delta = math.sqrt(d2)
        slow = 4.0 / (gamma + delta)  # gamma - delta without cancellation
        ratio = gamma / delta
        return 0.5 * (1.0 + ratio) * math.exp(-slow * t) + 0.5 * (1.0 - ratio) * math.exp(
            -(gamma + delta) * t
        )
    omega = math.sqrt(-d2)
    return math.exp(-gamma * t) * (math.cos(omega * t) + gamma / omega * math.sin(omega * t))


def _weight_norm(alpha: float, gamma1: float, gamma2: float) -> float:
    # (alpha - 1) / (gamma1^(1-alpha) - gamma2^(1-alpha)), written with expm1
    e = 1.0 - alpha
    denom = gamma2**e * math.expm1(e * math.log(gamma1 / gamma2))
    return (alpha - 1.0) / denom


def color_weight(gamma: float, p: ColoredNoiseParams) -> float:
    """Switching-rate density that produces a 1/f^alpha spectrum on [gamma1, gamma2]."""
    if not p.gamma1 <= gamma <= p.gamma2:
        raise ValueError(f"gamma={gamma} outside [{p.gamma1}, {p.gamma2}]")
    if abs(p.alpha - 1.0) < UNIT_EPS:
        return 1.0 / (gamma * math.log(p.gamma2 / p.gamma1))
    return _weight_norm(p.alpha, p.gamma1, p.gamma2) * gamma ** (-p.alpha)


def _log_integrand(u: float, t: float, p: ColoredNoiseParams) -> float:
    g = math.exp(u)
    if abs(p.alpha - 1.0) < UNIT_EPS:
        w = 1.0 / math.log(p.gamma2 / p.gamma1)
    else:
        w = _weight_norm(p.alpha, p.gamma1, p.gamma2) * g ** (1.0 - p.alpha)
    return rtn_kernel(t, g) * w


def lambda_classical(t: float, p: ColoredNoiseParams) -> float:
    """Dephasing coefficient for 1/f^alpha noise.

    Integrates ``G(t, gamma) p_alpha(gamma)`` over the rate band in the
    variable ``u = ln(gamma)`` with QUADPACK's adaptive Gauss-Kronrod rule.
    The range is split at ``gamma = 2`` where the kernel changes regime.

    Raises:
        QuadratureError: if the error estimate exceeds ``p.quad_tol``.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0:
        return 1.0
    lo, hi = math.log(p.gamma1), math.log(p.gamma2)
    pieces = [(lo, hi)]
    if p.gamma1 < 2.0 < p.gamma2:
        pieces = [(lo, math.log(2.0)), (math.log(2.0), hi)]
    total, err = 0.0, 0.0
    for a, b in pieces:
        val, e = integrate.quad(
            _log_integrand, a, b, args=(t, p), epsabs=p.quad_tol / 4, epsrel=0.0, limit=400
        )
        total += val
        err += e
    if err > p.quad_tol:
        raise QuadratureError(f"quadrature error {err:.3e} exceeds tol {p.quad_tol:.1e}", err)
    return total


# Lanczos approximation, g = 7, n = 9
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma_function(x: float) -> float:
    """Complete gamma function for real ``x``.

    Lanczos approximation for ``x >= 0.5``, reflection formula below that.
    Integers up to 20 are returned exactly from the factorial.

    Raises:
        PoleError: at 0, -1, -2, ...
    """
    if x <= 0 and x == math.floor(x):
        raise PoleError(f"gamma has a pole at {x}")
    if x == math.floor(x) and x <= 21:
        return float(math.factorial(int(x) - 1))
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma_function(1.0 - x))
    z = x - 1.0
    acc = _LANCZOS_COEF[0]
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        acc += c / (z + i)
    tg = z + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * tg ** (z + 0.5) * math.exp(-tg) * acc


def ohmic_exponent(t: float, p: OhmicBathParams) -> float:
    """Decoherence exponent ``Gamma(t)`` of a zero-temperature Ohmic-family bath."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    x = p.omega_c * t
    if abs(p.s - 1.0) < UNIT_EPS:
        return 0.5 * math.log1p(x * x)
    e = p.s - 1.0
    c = math.cos(e * math.atan(x))
    damp = -0.5 * e * math.log1p(x * x)
    # 1 - c * exp(damp), avoiding cancellation near s = 1
    one_minus = -(c * math.expm1(damp) - 2.0 * math.sin(0.5 * e * math.atan(x)) ** 2)
    return gamma_function(e) * one_minus


def lambda_quantum(t: float, p: OhmicBathParams) -> float:
    return math.exp(-ohmic_exponent(t, p))


def dephase(rho0: DensityMatrix, lam: float) -> DensityMatrix:
    """Scale the coherence of ``rho0`` by ``lam``; populations are untouched."""
    if abs(lam) > 1.0 + _TOL:
        raise ValueError(f"|lam| must be <= 1, got {lam}")
    return DensityMatrix(rho0.a00, rho0.a11, rho0.a01 * lam)


class LambdaCache:
    """Thread-safe memo of dephasing coefficients keyed by (kind, value, t).

    ``kind`` is ``"classical"`` (value is alpha) or ``"quantum"`` (value is s).
    """

    def __init__(self, gamma1=1e-4, gamma2=1e4, omega_c=1.0, quad_tol=1e-10):
        self.gamma1 = gamma1
        self.gamma2 = gamma2
        self.omega_c = omega_c
        self.quad_tol = quad_tol
        self._store: dict[tuple[str, float, float], float] = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._store)

    def compute(self, kind: str, value: float, t: float) -> float:
        if kind == "classical":
            return lambda_classical(
                t, ColoredNoiseParams(value, self.gamma1, self.gamma2, self.quad_tol)
            )
        if kind == "quantum":
            return lambda_quantum(t, OhmicBathParams(value, self.omega_c))
        raise ValueError(f"unknown noise kind {kind!r}")

    def __call__(self, kind: str, value: float, t: float) -> float:
        key = (kind, float(value), float(t))
        with self._lock:
            hit = self._store.get(key)
        if hit is not None:
            return hit
        val = self.compute(kind, value, t)
        with self._lock:
            self._store[key] = val
        return val

    def table(self, kind: str, values, times) -> np.ndarray:
        """Coefficients on a (len(values), len(times)) grid."""
        return np.array([[self(kind, v, t) for t in times] for v in values])
