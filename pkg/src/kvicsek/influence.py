"""Influence kernels: the spatial/angular pair (Phi, Psi) and its structure.

Structural requirements: Phi is even with unit mass; Psi(theta) =
sin(theta) * psi(theta) with psi smooth, even and nonnegative, so that
the primitive U(theta) = int_{-pi}^theta Psi is nonpositive on T.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .spectral import (
    TWO_PI,
    AngularProfile,
    SpectralField,
    TorusGrid,
    _reflect,
    theta_points,
)


@dataclass(frozen=True)
class AngularKernel:
    """Angular influence Psi = sin * psi with its primitive U."""

    psi: AngularProfile          # Psi itself
    psi_factor: AngularProfile   # the even factor psi
    primitive: AngularProfile    # U(theta), U(-pi) = 0

    @property
    def n_theta(self) -> int:
        return self.psi.n


def _primitive_profile(psi: AngularProfile) -> AngularProfile:
    """U(theta) = int_{-pi}^theta Psi, assuming the mean of Psi vanishes."""
    l = psi.l.astype(np.float64)
    coeffs = np.zeros_like(psi.coeffs)
    nz = l != 0
    coeffs[nz] = psi.coeffs[nz] / (1j * l[nz])
    # pin U(-pi) = 0 through the mean coefficient
    coeffs[0] = -np.sum(coeffs[nz] * np.exp(-1j * l[nz] * np.pi))
    return AngularProfile(coeffs)


def angular_kernel(n_theta: int, psi_factor: Callable[[np.ndarray], np.ndarray] | None = None) -> AngularKernel:
    """Build the angular kernel from the even factor psi (default psi = 1)."""
    th = theta_points(n_theta)
    pf = np.ones_like(th) if psi_factor is None else np.asarray(psi_factor(th), dtype=np.float64)
    psi_vals = np.sin(th) * pf
    psi = AngularProfile.from_values(psi_vals)
    return AngularKernel(
        psi=psi,
        psi_factor=AngularProfile.from_values(pf),
        primitive=_primitive_profile(psi),
    )


def bump_phi(sigma: float = 1.0) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Periodic bump concentrated near the origin for width sigma."""

    def phi(x1, x2):
        return np.exp((np.cos(x1) + np.cos(x2) - 2.0) / sigma**2)

    return phi


def uniform_phi() -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    def phi(x1, x2):
        return np.full(np.broadcast(x1, x2).shape, 1.0 / TWO_PI**2)

    return phi


@dataclass(frozen=True)
class InfluencePair:
    """The (Phi, Psi) kernel pair with precomputed spectra on a grid."""

    grid: TorusGrid
    phi_values: np.ndarray
    phi_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    angular: AngularKernel
    phi_is_uniform: bool = False

    def __post_init__(self):
        pv = np.ascontiguousarray(self.phi_values, dtype=np.float64)
        pv.flags.writeable = False
        object.__setattr__(self, "phi_values", pv)
        if self.angular.n_theta != self.grid.n_theta:
            raise ValueError("angular kernel resolution differs from grid")

    @cached_property
    def phi_coeffs(self) -> np.ndarray:
        return np.fft.fft2(self.phi_values) / (self.grid.n_x1 * self.grid.n_x2)

    @cached_property
    def multiplier(self) -> np.ndarray:
        """Coefficient multiplier of L: (2pi)^3 Phihat(-k) Psihat(-l).

        Phi and Psi are real, so the reflected spectra are the conjugates.
        """
        phi_neg = np.conj(self.phi_coeffs)
        psi_neg = np.conj(self.angular.psi.coeffs)
        return TWO_PI**3 * phi_neg[:, :, None] * psi_neg[None, None, :]

    def apply(self, f: SpectralField) -> SpectralField:
        if f.grid != self.grid:
            raise ValueError("field lives on a different grid")
        return SpectralField(self.grid, self.multiplier * f.coeffs)

    @property
    def phi_max(self) -> float:
        return float(np.max(np.abs(self.phi_values)))

    @property
    def psi_max(self) -> float:
        return float(np.max(np.abs(self.angular.psi.values.real)))


def make_influence(
    grid: TorusGrid,
    phi: str | Callable = "bump",
    sigma: float = 1.0,
    psi_factor: str | Callable | None = "one",
    normalize: bool = True,
) -> InfluencePair:
    """Assemble an InfluencePair on a grid.

    Parameters
    ----------
    phi : "bump", "uniform" or a periodic callable phi(x1, x2)
    sigma : width of the default bump
    psi_factor : "one" (Psi = sin), "cos_squared" ((1+cos)^2), or callable
    normalize : rescale Phi so its discrete integral is exactly 1
    """
    uniform = phi == "uniform"
    if phi == "bump":
        phi_fn = bump_phi(sigma)
    elif phi == "uniform":
        phi_fn = uniform_phi()
    elif callable(phi):
        phi_fn = phi
    else:
        raise ValueError(f"unknown phi choice {phi!r}")

    pv = np.asarray(phi_fn(grid.x1[:, None], grid.x2[None, :]), dtype=np.float64)
    pv = np.broadcast_to(pv, (grid.n_x1, grid.n_x2)).copy()
    if normalize:
        mass = float(np.sum(pv)) * TWO_PI**2 / (grid.n_x1 * grid.n_x2)
        pv /= mass
        base_fn = phi_fn
        phi_fn = lambda x1, x2, _fn=base_fn, _m=mass: _fn(x1, x2) / _m

    if psi_factor in (None, "one"):
        pf = None
    elif psi_factor == "cos_squared":
        pf = lambda th: (1.0 + np.cos(th)) ** 2
    elif callable(psi_factor):
        pf = psi_factor
    else:
        raise ValueError(f"unknown psi_factor choice {psi_factor!r}")

    return InfluencePair(
        grid=grid,
        phi_values=pv,
        phi_fn=phi_fn,
        angular=angular_kernel(grid.n_theta, pf),
        phi_is_uniform=uniform,
    )


@dataclass(frozen=True)
class KernelCheck:
    name: str
    passed: bool
    worst: float
    detail: str = ""


@dataclass(frozen=True)
class KernelReport:
    checks: tuple[KernelCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[KernelCheck]:
        return [c for c in self.checks if not c.passed]


def validate_kernels(pair: InfluencePair, tol: float = 1e-12) -> KernelReport:
    """Check every structural assumption; reports violations, never raises."""
    checks: list[KernelCheck] = []
    pv = pair.phi_values
    scale = max(float(np.max(np.abs(pv))), 1e-300)

    sym_dev = np.abs(pv - _reflect(pv))
    idx = np.unravel_index(int(np.argmax(sym_dev)), sym_dev.shape)
    worst = float(sym_dev[idx]) / scale
    checks.append(
        KernelCheck(
            "phi_even",
            worst <= tol,
            worst,
            f"max violation at grid index {idx}",
        )
    )

    mass = float(np.sum(pv)) * TWO_PI**2 / pv.size
    checks.append(KernelCheck("phi_mass_one", abs(mass - 1.0) <= tol, abs(mass - 1.0)))

    th = theta_points(pair.grid.n_theta)
    psi_vals = pair.angular.psi.values
    pf_vals = pair.angular.psi_factor.values
    pscale = max(float(np.max(np.abs(psi_vals))), 1e-300)
    imag = max(float(np.max(np.abs(psi_vals.imag))), float(np.max(np.abs(pf_vals.imag))))
    checks.append(KernelCheck("psi_real", imag <= tol * pscale, imag))
    psi_vals = psi_vals.real
    pf_vals = pf_vals.real

    factor_dev = float(np.max(np.abs(psi_vals - np.sin(th) * pf_vals))) / pscale
    checks.append(KernelCheck("psi_eq_sin_times_factor", factor_dev <= tol, factor_dev))

    neg = float(max(0.0, -np.min(pf_vals))) / pscale
    checks.append(KernelCheck("psi_factor_nonneg", neg <= tol, neg))

    even_dev = float(np.max(np.abs(pf_vals - _reflect(pf_vals)))) / pscale
    checks.append(KernelCheck("psi_factor_even", even_dev <= tol, even_dev))

    mean_psi = abs(pair.angular.psi.mass) / max(pscale, 1.0)
    checks.append(KernelCheck("psi_zero_mean", mean_psi <= tol, mean_psi))

    u_vals = pair.angular.primitive.values.real
    u_pos = float(max(0.0, np.max(u_vals))) / max(float(np.max(np.abs(u_vals))), 1e-300)
    checks.append(KernelCheck("primitive_nonpositive", u_pos <= tol, u_pos))

    u_start = abs(float(u_vals[0]))  # theta grid starts at -pi
    checks.append(KernelCheck("primitive_zero_at_minus_pi", u_start <= tol * max(pscale, 1.0), u_start))

    dU = pair.angular.primitive.derivative().values.real
    deriv_dev = float(np.max(np.abs(dU - psi_vals))) / pscale
    checks.append(KernelCheck("primitive_derivative_is_psi", deriv_dev <= 1e-10, deriv_dev))

    return KernelReport(tuple(checks))
