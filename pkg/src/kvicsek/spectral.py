"""Spectral core: grids, transforms, norms and the x-average/remainder split.

Functions on the domain T^2 x T (positions on [0, 2pi)^2, angles on
[-pi, pi)) are represented by Fourier coefficients under the convention

    f(x, theta) = sum_{k, l} fhat(k, l) e^{i k.x} e^{i l theta},
    fhat(k, l) = (2pi)^{-3} integral f e^{-i k.x - i l theta} dx dtheta.

Coefficient arrays use the FFT frequency layout (``numpy.fft.fftfreq``
ordering).  Because the angular grid starts at -pi rather than 0, the
angular axis of every transform carries an extra (-1)^l phase.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np

TWO_PI = 2.0 * np.pi


def theta_points(n: int) -> np.ndarray:
    """Collocation angles -pi + 2pi*j/n, j = 0..n-1 (endpoint-exclusive)."""
    return -np.pi + TWO_PI * np.arange(n) / n


def x_points(n: int) -> np.ndarray:
    """Collocation positions 2pi*j/n on [0, 2pi)."""
    return TWO_PI * np.arange(n) / n


@lru_cache(maxsize=64)
def fft_wavenumbers(n: int) -> np.ndarray:
    """Integer wavenumbers in FFT layout: 0, 1, ..., n/2-1, -n/2, ..., -1."""
    out = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
    out.flags.writeable = False
    return out


@lru_cache(maxsize=64)
def _theta_phase(n: int) -> np.ndarray:
    # (-1)^l factor from the -pi grid offset
    out = np.where(fft_wavenumbers(n) % 2 == 0, 1.0, -1.0)
    out.flags.writeable = False
    return out


def _validate_count(n: int, name: str) -> None:
    if n < 4 or n % 2 != 0:
        raise ValueError(f"{name} must be an even integer >= 4, got {n}")


def _reflect(coeffs: np.ndarray) -> np.ndarray:
    """Index map k -> -k (mod n) applied on every axis."""
    out = coeffs
    for ax in range(coeffs.ndim):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


@dataclass(frozen=True)
class TorusGrid:
    """Uniform collocation grid on T^2 x T; all counts even and >= 4."""

    n_x1: int
    n_x2: int
    n_theta: int

    def __post_init__(self):
        _validate_count(self.n_x1, "n_x1")
        _validate_count(self.n_x2, "n_x2")
        _validate_count(self.n_theta, "n_theta")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_x1, self.n_x2, self.n_theta)

    @property
    def size(self) -> int:
        return self.n_x1 * self.n_x2 * self.n_theta

    @cached_property
    def x1(self) -> np.ndarray:
        return x_points(self.n_x1)

    @cached_property
    def x2(self) -> np.ndarray:
        return x_points(self.n_x2)

    @cached_property
    def theta(self) -> np.ndarray:
        return theta_points(self.n_theta)

    @cached_property
    def k1(self) -> np.ndarray:
        return fft_wavenumbers(self.n_x1)

    @cached_property
    def k2(self) -> np.ndarray:
        return fft_wavenumbers(self.n_x2)

    @cached_property
    def l(self) -> np.ndarray:
        return fft_wavenumbers(self.n_theta)

    @cached_property
    def theta_phase(self) -> np.ndarray:
        return _theta_phase(self.n_theta)

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Open (broadcastable) meshgrid of collocation coordinates."""
        return (
            self.x1[:, None, None],
            self.x2[None, :, None],
            self.theta[None, None, :],
        )

    @cached_property
    def k_squared(self) -> np.ndarray:
        """|k|^2 + l^2 on the full coefficient array."""
        return (
            self.k1[:, None, None] ** 2
            + self.k2[None, :, None] ** 2
            + self.l[None, None, :] ** 2
        ).astype(np.float64)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: True on retained modes, all three indices."""
        keep1 = np.abs(self.k1) <= self.n_x1 // 3
        keep2 = np.abs(self.k2) <= self.n_x2 // 3
        keep3 = np.abs(self.l) <= self.n_theta // 3
        return keep1[:, None, None] & keep2[None, :, None] & keep3[None, None, :]


# ---------------------------------------------------------------------------
# Angular profiles (functions on T)
# ---------------------------------------------------------------------------


def profile_coeffs_from_values(values: np.ndarray) -> np.ndarray:
    n = values.shape[-1]
    return np.fft.fft(values, axis=-1) / n * _theta_phase(n)


def profile_values_from_coeffs(coeffs: np.ndarray) -> np.ndarray:
    n = coeffs.shape[-1]
    return np.fft.ifft(coeffs * _theta_phase(n), axis=-1) * n


@dataclass(frozen=True)
class AngularProfile:
    """Function g(theta) on T held as Fourier coefficients ghat(l).

    Real profiles (densities, kernels) and complex ones (per-mode states
    eta_k) share this representation.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(self.coeffs, dtype=np.complex128)
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)
        _validate_count(self.n, "n_theta")

    @classmethod
    def from_values(cls, values: np.ndarray) -> "AngularProfile":
        return cls(profile_coeffs_from_values(np.asarray(values)))

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], n: int) -> "AngularProfile":
        return cls.from_values(fn(theta_points(n)))

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def l(self) -> np.ndarray:
        return fft_wavenumbers(self.n)

    @property
    def values(self) -> np.ndarray:
        return profile_values_from_coeffs(self.coeffs)

    @property
    def real_values(self) -> np.ndarray:
        v = self.values
        scale = np.max(np.abs(v)) or 1.0
        if np.max(np.abs(v.imag)) > 1e-10 * scale:
            raise ValueError("profile is not real-valued")
        return v.real

    @property
    def mass(self) -> float:
        """integral g dtheta = 2pi ghat(0)."""
        return float((TWO_PI * self.coeffs[0]).real)

    @property
    def order_parameter(self) -> complex:
        """m = integral e^{-i theta} g dtheta / integral g dtheta = ghat(1)/ghat(0)."""
        return complex(self.coeffs[1] / self.coeffs[0])

    def norm_l2(self) -> float:
        return float(np.sqrt(TWO_PI * np.sum(np.abs(self.coeffs) ** 2)))

    def norm_hs(self, s: float) -> float:
        w = (1.0 + self.l.astype(np.float64) ** 2) ** s
        return float(np.sqrt(TWO_PI * np.sum(w * np.abs(self.coeffs) ** 2)))

    def derivative(self) -> "AngularProfile":
        l = self.l.astype(np.float64)
        l[self.n // 2] = 0.0  # Nyquist dropped for odd-order derivatives
        return AngularProfile(1j * l * self.coeffs)

    def convolve(self, other: "AngularProfile") -> "AngularProfile":
        """(self * other)(theta) = integral self(theta - w) other(w) dw."""
        if other.n != self.n:
            raise ValueError("profile resolution mismatch")
        return AngularProfile(TWO_PI * self.coeffs * other.coeffs)

    def rotate(self, phi: float) -> "AngularProfile":
        """Profile of theta -> g(theta + phi)."""
        return AngularProfile(self.coeffs * np.exp(1j * self.l * phi))

    def eval(self, theta: np.ndarray, cutoff: float = 1e-15) -> np.ndarray:
        """Evaluate the trigonometric sum at arbitrary angles."""
        theta = np.asarray(theta, dtype=np.float64)
        amax = np.max(np.abs(self.coeffs))
        out = np.zeros(theta.shape, dtype=np.complex128)
        for l, c in zip(self.l, self.coeffs):
            if np.abs(c) > cutoff * max(amax, 1.0):
                out += c * np.exp(1j * l * theta)
        return out


# ---------------------------------------------------------------------------
# Spectral fields (functions on T^2 x T)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralField:
    """Coefficient array fhat(k1, k2, l) on a TorusGrid; immutable value."""

    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != self.grid.shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} != grid shape {self.grid.shape}"
            )
        c = np.ascontiguousarray(self.coeffs, dtype=np.complex128)
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_values(cls, grid: TorusGrid, values: np.ndarray) -> "SpectralField":
        c = np.fft.fftn(values) / grid.size
        c *= grid.theta_phase[None, None, :]
        return cls(grid, c)

    @classmethod
    def from_function(cls, grid: TorusGrid, fn) -> "SpectralField":
        x1, x2, th = grid.mesh()
        return cls.from_values(grid, np.broadcast_to(fn(x1, x2, th), grid.shape))

    @property
    def values(self) -> np.ndarray:
        c = self.coeffs * self.grid.theta_phase[None, None, :]
        return np.fft.ifftn(c) * self.grid.size

    @property
    def real_values(self) -> np.ndarray:
        return self.values.real

    @property
    def mass(self) -> float:
        """integral f dx dtheta = (2pi)^3 fhat(0,0,0)."""
        return float((TWO_PI**3 * self.coeffs[0, 0, 0]).real)

    def is_real(self, rtol: float = 1e-12) -> bool:
        """Conjugate symmetry fhat(-k,-l) = conj(fhat(k,l)) to rtol (relative)."""
        dev = np.max(np.abs(_reflect(self.coeffs) - np.conj(self.coeffs)))
        scale = np.max(np.abs(self.coeffs))
        return bool(dev <= rtol * max(scale, 1e-300))

    def dealiased(self) -> "SpectralField":
        return SpectralField(self.grid, np.where(self.grid.dealias_mask, self.coeffs, 0.0))


def x_average(f: SpectralField) -> AngularProfile:
    """Spatial mean <f>(theta) = (2pi)^{-2} integral f dx: the k=(0,0) slice."""
    return AngularProfile(f.coeffs[0, 0, :].copy())


def remainder(f: SpectralField) -> SpectralField:
    """f_neq = f - <f>; zeroes the k=(0,0) coefficients exactly."""
    c = f.coeffs.copy()
    c[0, 0, :] = 0.0
    return SpectralField(f.grid, c)


def norm(f: SpectralField, kind: str = "L2", s: float | None = None) -> float:
    """Norm of a spectral field.

    Parameters
    ----------
    kind : {"L1", "L2", "Hs", "Hm1_nonzero"}
        L2/Hs are evaluated by Parseval on the coefficients; L1 by
        quadrature on collocation values.  ``Hm1_nonzero`` is the
        homogeneous H^{-1} norm over the k != 0 modes with weight
        1/(|k|^2 + l^2); it rejects fields carrying k=(0,0) content.
    s : float
        Sobolev order, required for kind "Hs".
    """
    g = f.grid
    if kind == "L2":
        return float(np.sqrt(TWO_PI**3 * np.sum(np.abs(f.coeffs) ** 2)))
    if kind == "L1":
        w = TWO_PI**3 / g.size
        return float(w * np.sum(np.abs(f.values)))
    if kind == "Hs":
        if s is None:
            raise ValueError("Hs norm requires the order s")
        weights = (1.0 + g.k_squared) ** s
        return float(np.sqrt(TWO_PI**3 * np.sum(weights * np.abs(f.coeffs) ** 2)))
    if kind == "Hm1_nonzero":
        zero_slice = np.max(np.abs(f.coeffs[0, 0, :]))
        scale = max(np.max(np.abs(f.coeffs)), 1e-300)
        if zero_slice > 1e-13 * scale:
            raise ValueError(
                "Hm1_nonzero requires the x-average removed; pass remainder(f)"
            )
        weights = np.zeros(g.shape)
        nonzero = np.ones(g.shape, dtype=bool)
        nonzero[0, 0, :] = False
        weights[nonzero] = 1.0 / g.k_squared[nonzero]
        return float(np.sqrt(TWO_PI**3 * np.sum(weights * np.abs(f.coeffs) ** 2)))
    raise ValueError(f"unknown norm kind {kind!r}")


def convolve_xtheta(multiplier: np.ndarray, f: SpectralField) -> SpectralField:
    """Apply a convolution kernel given as its coefficient multiplier.

    For the alignment kernel Phi(x)Psi(theta) the multiplier is
    (2pi)^3 Phihat(-k) Psihat(-l); see influence.InfluencePair.multiplier.
    """
    if multiplier.shape != f.grid.shape:
        raise ValueError("kernel multiplier computed on a different grid")
    return SpectralField(f.grid, multiplier * f.coeffs)


# ---------------------------------------------------------------------------
# Snapshot I/O: one JSON header line, then raw little-endian payload
# ---------------------------------------------------------------------------


def write_snapshot(path, f: SpectralField, time: float = 0.0, parameters: dict | None = None) -> None:
    header = {
        "n_x1": f.grid.n_x1,
        "n_x2": f.grid.n_x2,
        "n_theta": f.grid.n_theta,
        "time": time,
        "parameters": parameters or {},
        "layout": "row-major",
        "dtype": "float64 little-endian",
        "order": "(k1,k2,l) complex interleaved",
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        fh.write(np.ascontiguousarray(f.coeffs).astype("<c16").tobytes())


def read_snapshot(path) -> tuple[SpectralField, dict]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        payload = fh.read()
    grid = TorusGrid(header["n_x1"], header["n_x2"], header["n_theta"])
    coeffs = np.frombuffer(payload, dtype="<c16").reshape(grid.shape)
    return SpectralField(grid, coeffs.astype(np.complex128)), header
