"""Forward model of homodyne tomography.

Quadrature densities of a state, the Radon transform of its Wigner
function, Fourier-slice relations, the Gaussian detection-noise
convolution, and the weighted-L2 class-membership integral.

Density convention: all densities here are conditional-in-x densities
with respect to Lebesgue measure at fixed phase; the uniform phase
Phi ~ U[0, pi] is handled by the sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._quad import gl_panels
from .errors import CoverageError, ForwardModelError, ValidationError
from .fockspace import DensityMatrix, hermite_psi_table

_GAMMA_OF = lambda eta: (1.0 - eta) / (4.0 * eta)


@dataclass(frozen=True)
class NoiseModel:
    """Detection-efficiency noise: Y = sqrt(eta) X + sqrt((1-eta)/2) xi.

    gamma = (1-eta)/(4 eta) is the deconvolution exponent constant.
    """

    eta: float
    gamma: float = None  # derived from eta unless explicitly supplied

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ValidationError(f"eta must lie in (0, 1), got {self.eta!r}")
        g = _GAMMA_OF(self.eta)
        if self.gamma is None:
            object.__setattr__(self, "gamma", g)
        elif abs(self.gamma - g) > 4.0 * abs(g) * np.finfo(float).eps:
            raise ValidationError(
                f"gamma {self.gamma!r} inconsistent with eta {self.eta!r}"
            )


@dataclass(frozen=True)
class SmoothnessClass:
    """Parameters (beta, r, L) of the supersmooth class

        A(beta, r, L) = { W : int |W~(w)|^2 exp(2 beta |w|^r) dw <= (2 pi)^2 L }.
    """

    beta: float
    r: float
    L: float

    def __post_init__(self):
        if not self.beta > 0.0:
            raise ValidationError("beta must be > 0")
        if not 0.0 < self.r <= 2.0:
            raise ValidationError("r must lie in (0, 2]")
        if not self.L > 0.0:
            raise ValidationError("L must be > 0")

    @property
    def rhs(self) -> float:
        """Right-hand side (2 pi)^2 L of the class inequality."""
        return (2.0 * math.pi) ** 2 * self.L


def x_support_radius(dim: int) -> float:
    """Quadrature truncation radius: classical turning point plus margin."""
    return math.sqrt(2.0 * dim) + 6.0


def _diagonal_profiles(rho: DensityMatrix, x: np.ndarray) -> list:
    """s_d(x) = sum_j rho_{j,j+d} psi_j(x) psi_{j+d}(x) for every diagonal d."""
    psi = hermite_psi_table(rho.dim - 1, x)
    out = []
    for d in range(rho.dim):
        diag = np.diagonal(rho.entries, offset=d)
        if np.any(diag):
            out.append((d, diag @ (psi[: rho.dim - d] * psi[d:])))
        else:
            out.append((d, None))
    return out


def quad_density_profile(rho: DensityMatrix, x, phi: float) -> np.ndarray:
    """Vectorized p_rho(x | phi) over an array of quadrature results x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    psi = hermite_psi_table(rho.dim - 1, x)
    total = np.zeros(x.shape, dtype=complex)
    for d in range(rho.dim):
        diag = np.diagonal(rho.entries, offset=d)
        if not np.any(diag):
            continue
        s_d = (diag[:, None] * psi[: rho.dim - d] * psi[d:]).sum(axis=0)
        if d == 0:
            total += s_d
        else:
            total += 2.0 * (s_d * np.exp(1j * d * phi)).real
    if np.max(np.abs(total.imag)) > 1e-10:
        raise ForwardModelError(
            f"quadrature density has imaginary part {np.max(np.abs(total.imag)):.3e}"
        )
    p = total.real
    if np.min(p) < -1e-9:
        raise ForwardModelError(
            f"quadrature density is negative ({np.min(p):.3e}): broken DensityMatrix"
        )
    return np.clip(p, 0.0, None)


def quad_density(rho: DensityMatrix, x, phi: float):
    """Quadrature density p_rho(x | phi) = sum_jk rho_jk psi_j psi_k e^{-i(j-k)phi}."""
    if np.ndim(x) == 0:
        return float(quad_density_profile(rho, [float(x)], phi)[0])
    return quad_density_profile(rho, x, phi)


def radon_numeric(
    wigner: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x: float,
    phi: float,
    radius: float,
    *,
    panel_width: float = 0.125,
) -> float:
    """Line integral of a Wigner evaluator along the direction phi at offset x.

    Integrates W(x cos phi - t sin phi, x sin phi + t cos phi) over t with a
    composite Gauss-Legendre rule; the evaluator must cover the disc of the
    given radius (absolute error target 1e-7 for smooth Wigner functions).
    """
    if abs(x) >= radius:
        raise CoverageError(f"|x| = {abs(x)} outside evaluator radius {radius}")
    t_max = math.sqrt(radius * radius - x * x)
    t, w = gl_panels(-t_max, t_max, panel_width)
    q = x * math.cos(phi) - t * math.sin(phi)
    p = x * math.sin(phi) + t * math.cos(phi)
    return float(np.dot(w, wigner(q, p)))


def wigner_line_evaluator(rho: DensityMatrix):
    """(callable, radius) pair suitable for radon_numeric, backed by a state."""
    from .fockspace import wigner_eval_many

    radius = x_support_radius(rho.dim)
    return (lambda q, p: wigner_eval_many(rho, q, p)), radius


def noisy_density(rho: DensityMatrix, noise: NoiseModel, y: float, phi: float) -> float:
    """Efficiency-corrected density of Y = sqrt(eta) X + sqrt((1-eta)/2) xi:

        p^eta(y | phi) = (pi (1-eta))^{-1/2}
                         int p(x | phi) exp[-(eta/(1-eta)) (x - y/sqrt(eta))^2] dx.
    """
    eta = noise.eta
    sigma_g = math.sqrt((1.0 - eta) / (2.0 * eta))   # std of the x-space Gaussian
    center = y / math.sqrt(eta)
    xm = x_support_radius(rho.dim)
    lo = max(-xm, center - 10.0 * sigma_g)
    hi = min(xm, center + 10.0 * sigma_g)
    if hi <= lo:
        return 0.0
    width = min(0.25, sigma_g / 2.0)
    t, w = gl_panels(lo, hi, width)
    dens = quad_density_profile(rho, t, phi)
    kern = np.exp(-eta / (1.0 - eta) * (t - center) ** 2)
    val = float(np.dot(w, dens * kern)) / math.sqrt(math.pi * (1.0 - eta))
    return max(val, 0.0)


def fourier_slice(rho: DensityMatrix, t: float, phi: float) -> complex:
    """F_1[p_rho(.|phi)](t) = Tr(rho exp(i t X_phi)), by quadrature in x."""
    xm = x_support_radius(rho.dim)
    width = min(0.25, math.pi / (4.0 * abs(t))) if t != 0.0 else 0.25
    xs, w = gl_panels(-xm, xm, width)
    dens = quad_density_profile(rho, xs, phi)
    val = complex(np.dot(w, dens * np.exp(1j * t * xs)))
    return val


@dataclass(frozen=True)
class ClassIntegralResult:
    """Outcome of the class-membership integral in polar coordinates."""

    value: float
    converged: bool
    in_class: bool
    diagnostic: Optional[str] = None


def class_integral(
    profile: Callable[[np.ndarray], np.ndarray],
    cls: SmoothnessClass,
    *,
    block: float = 8.0,
    t_cap: float = 400.0,
    panel_width: float = 0.25,
) -> ClassIntegralResult:
    """Weighted L2 integral of a radial Fourier profile:

        int_{R^2} |W~(w)|^2 exp(2 beta |w|^r) dw
            = 2 pi int_0^inf t |W~(t)|^2 exp(2 beta t^r) dt.

    Integrates block by block, stopping once blocks are negligible and
    decreasing; growth across blocks is flagged as divergence.
    """
    total = 0.0
    prev_contrib = None
    grow_count = 0
    t0 = 0.0
    while t0 < t_cap:
        t, w = gl_panels(t0, t0 + block, panel_width)
        g = 2.0 * math.pi * t * np.abs(np.asarray(profile(t), dtype=float)) ** 2
        g = g * np.exp(2.0 * cls.beta * t ** cls.r)
        contrib = float(np.dot(w, g))
        total += contrib
        if prev_contrib is not None and contrib > prev_contrib and contrib > 1e-290:
            grow_count += 1
            if grow_count >= 3:
                return ClassIntegralResult(
                    value=total,
                    converged=False,
                    in_class=False,
                    diagnostic=f"integrand growing past t = {t0 + block:.1f}",
                )
        else:
            grow_count = 0
        if contrib <= 1e-13 * max(total, 1e-300) and prev_contrib is not None:
            return ClassIntegralResult(
                value=total, converged=True, in_class=total <= cls.rhs
            )
        prev_contrib = contrib
        t0 += block
    return ClassIntegralResult(
        value=total,
        converged=False,
        in_class=False,
        diagnostic=f"no convergence by t = {t_cap}",
    )
