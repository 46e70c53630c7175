"""Spatially homogeneous dynamics, free energy, and the ordered states.

The angular density g (a probability density on T) obeys

    d/dt g = kappa d_theta(g (Psi * g)) + nu d^2/dtheta^2 g,

whose free energy nu int g log g + (kappa/2) int int U(theta-w) g g
decays at the rate given by the Fisher information
int g |nu d_theta log g + kappa Psi*g|^2.  For Psi = sin the constant
state loses stability at kappa/nu = 2, where a branch of von Mises
profiles parameterized by the order parameter appears.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import NumericsError, StepSizeError
from .influence import AngularKernel
from .spectral import (
    TWO_PI,
    AngularProfile,
    fft_wavenumbers,
    profile_coeffs_from_values,
    profile_values_from_coeffs,
    theta_points,
)


@dataclass(frozen=True)
class HomogeneousState:
    """Probability density g on T at time t, with parameters kappa, nu."""

    g: AngularProfile
    t: float
    kappa: float
    nu: float

    def __post_init__(self):
        if abs(self.g.mass - 1.0) > 1e-10:
            raise ValueError(f"g must have unit mass, got {self.g.mass}")

    @property
    def order_parameter(self) -> complex:
        """m = integral e^{-i theta} g dtheta."""
        return complex(TWO_PI * self.g.coeffs[1])


def constant_state(n_theta: int, kappa: float, nu: float) -> HomogeneousState:
    vals = np.full(n_theta, 1.0 / TWO_PI)
    return HomogeneousState(AngularProfile.from_values(vals), 0.0, kappa, nu)


def _dealias_mask(n: int) -> np.ndarray:
    return np.abs(fft_wavenumbers(n)) <= n // 3


def _derivative_factor(n: int) -> np.ndarray:
    l = fft_wavenumbers(n).astype(np.float64)
    l[n // 2] = 0.0
    return 1j * l


@lru_cache(maxsize=32)
def _step_tables(n: int, nu: float, dt: float):
    mask = _dealias_mask(n)
    deriv = _derivative_factor(n)
    l = fft_wavenumbers(n).astype(np.float64)
    heat = np.exp(-nu * l**2 * dt)
    for arr in (mask, deriv, heat):
        arr.flags.writeable = False
    return mask, deriv, heat


def _alignment_rhs(
    g_coeffs: np.ndarray,
    psi_coeffs: np.ndarray,
    kappa: float,
    mask: np.ndarray,
    deriv: np.ndarray,
) -> tuple[np.ndarray, float]:
    """kappa d_theta(g (Psi*g)) in coefficients, 2/3-dealiased flux form."""
    gd = np.where(mask, g_coeffs, 0.0)
    conv = np.where(mask, TWO_PI * psi_coeffs * g_coeffs, 0.0)
    gv = profile_values_from_coeffs(gd)
    cv = profile_values_from_coeffs(conv)
    prod = profile_coeffs_from_values(gv * cv)
    rhs = kappa * deriv * np.where(mask, prod, 0.0)
    return rhs, float(np.max(np.abs(cv)))


def _step_coeffs(c: np.ndarray, psi_coeffs: np.ndarray, kappa: float, dt: float, tables) -> np.ndarray:
    mask, deriv, heat = tables
    n = c.shape[0]

    def align_half(c):
        h = 0.5 * dt
        r1, conv_max = _alignment_rhs(c, psi_coeffs, kappa, mask, deriv)
        if dt > 0.5 / (kappa * (n // 2) * conv_max + 1.0):
            raise StepSizeError(
                f"dt={dt} violates the alignment sub-step guard (|Psi*g|max={conv_max:.3g})"
            )
        r2, _ = _alignment_rhs(c + h * r1, psi_coeffs, kappa, mask, deriv)
        return c + 0.5 * h * (r1 + r2)

    if kappa != 0.0:
        c = align_half(c)
    c = c * heat
    if kappa != 0.0:
        c = align_half(c)
    return c


def step_homogeneous(s: HomogeneousState, kernel: AngularKernel, dt: float) -> HomogeneousState:
    """Strang step: Heun alignment half / exact diffusion / Heun alignment half."""
    tables = _step_tables(s.g.n, s.nu, dt)
    c = _step_coeffs(s.g.coeffs, kernel.psi.coeffs, s.kappa, dt, tables)
    if not np.all(np.isfinite(c)):
        raise NumericsError(f"NaN in homogeneous step at t={s.t}")
    return replace(s, g=AngularProfile(c), t=s.t + dt)


@dataclass(frozen=True)
class HomogeneousTrajectory:
    t: np.ndarray
    order_parameter: np.ndarray  # complex m(t)
    free_energy: np.ndarray | None
    fisher: np.ndarray | None
    final: HomogeneousState


def evolve_homogeneous(
    s: HomogeneousState,
    kernel: AngularKernel,
    dt: float,
    n_steps: int,
    sample_every: int = 1,
    record_energy: bool = False,
) -> HomogeneousTrajectory:
    """Advance the homogeneous dynamics, sampling m(t) (and optionally F, D)."""
    tables = _step_tables(s.g.n, s.nu, dt)
    psi_coeffs = kernel.psi.coeffs
    c = s.g.coeffs
    t0 = s.t
    ts, ms = [s.t], [s.order_parameter]
    fs = [free_energy(s, kernel)] if record_energy else None
    ds = [fisher_information(s, kernel)] if record_energy else None

    def snapshot(c, t):
        state = replace(s, g=AngularProfile(c), t=t)
        ts.append(t)
        ms.append(state.order_parameter)
        if record_energy:
            fs.append(free_energy(state, kernel))
            ds.append(fisher_information(state, kernel))
        return state

    state = s
    for i in range(n_steps):
        c = _step_coeffs(c, psi_coeffs, s.kappa, dt, tables)
        if (i + 1) % sample_every == 0 or i == n_steps - 1:
            if not np.all(np.isfinite(c)):
                raise NumericsError(f"NaN in homogeneous evolution near t={t0 + (i + 1) * dt}")
            state = snapshot(c, t0 + (i + 1) * dt)
    return HomogeneousTrajectory(
        t=np.asarray(ts),
        order_parameter=np.asarray(ms),
        free_energy=None if fs is None else np.asarray(fs),
        fisher=None if ds is None else np.asarray(ds),
        final=state,
    )


# ---------------------------------------------------------------------------
# Energy structure
# ---------------------------------------------------------------------------


def free_energy(s: HomogeneousState, kernel: AngularKernel) -> float:
    """nu int g log g + (kappa/2) int g (U*g); +inf if g is not positive."""
    g = s.g.values.real
    if np.min(g) <= 0.0:
        return math.inf
    quad = TWO_PI / s.g.n
    entropy = quad * float(np.sum(g * np.log(g)))
    ug = kernel.primitive.convolve(s.g).values.real
    interaction = quad * float(np.sum(g * ug))
    return s.nu * entropy + 0.5 * s.kappa * interaction


def fisher_information(s: HomogeneousState, kernel: AngularKernel, floor: float | None = None) -> float:
    """int g |nu d_theta log g + kappa (Psi*g)|^2 dtheta.

    Requires g > 0; pass ``floor`` to clamp instead of rejecting.
    """
    g = s.g.values.real
    if floor is not None:
        g = np.maximum(g, floor)
    if np.min(g) <= 0.0:
        raise ValueError("Fisher information requires a positive density")
    dg = s.g.derivative().values.real
    conv = kernel.psi.convolve(s.g).values.real
    drift = s.nu * dg / g + s.kappa * conv
    quad = TWO_PI / s.g.n
    return quad * float(np.sum(g * drift**2))


def homogeneous_rhs(s: HomogeneousState, kernel: AngularKernel) -> AngularProfile:
    """Full right-hand side kappa d_theta(g (Psi*g)) + nu d^2 g, no dealiasing.

    Used for stationarity residuals; vanishes at compatible von Mises states.
    """
    conv = kernel.psi.convolve(s.g)
    flux = AngularProfile.from_values(s.g.values * conv.values)
    ddg = AngularProfile(s.g.derivative().derivative().coeffs)
    return AngularProfile(s.kappa * flux.derivative().coeffs + s.nu * ddg.coeffs)


# ---------------------------------------------------------------------------
# Linear stability of the constant state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityReport:
    rates: np.ndarray  # sigma_l for l = 1..l_max
    stable: bool


def u_hat_unnormalized(kernel: AngularKernel, l: int) -> complex:
    """The transform integral U e^{-i l theta} dtheta = 2 pi Uhat(l)."""
    return complex(TWO_PI * kernel.primitive.coeffs[l])


def linear_stability(kernel: AngularKernel, kappa: float, nu: float, l_max: int) -> StabilityReport:
    """Per-mode growth rates sigma_l = -l^2 (nu + (kappa/2pi) Re Uhat(l)).

    The verdict is stable iff every sigma_l is strictly negative.
    """
    if l_max < 1:
        raise ValueError("l_max must be at least 1")
    ls = np.arange(1, l_max + 1)
    uh = np.array([u_hat_unnormalized(kernel, int(l)).real for l in ls])
    rates = -(ls.astype(np.float64) ** 2) * (nu + kappa / TWO_PI * uh)
    return StabilityReport(rates=rates, stable=bool(np.all(rates < 0.0)))


# ---------------------------------------------------------------------------
# Modified Bessel ratio and the compatibility condition
# ---------------------------------------------------------------------------

_SERIES_CUT = 15.0


def bessel_ratio(z):
    """I_1(z)/I_0(z), increasing from 0 at z=0 toward 1 as z -> infinity.

    Power series below |z| = 15, continued fraction beyond; accepts
    complex arguments (enables complex-step differentiation).
    """
    if isinstance(z, np.ndarray):
        return np.array([bessel_ratio(zi) for zi in z.ravel()]).reshape(z.shape)
    if abs(z) <= _SERIES_CUT:
        return _ratio_series(z)
    return _ratio_continued_fraction(z)


def _ratio_series(z):
    q = z * z / 4.0
    term0 = 1.0
    i0 = term0
    term1 = 0.5
    i1 = term1
    for m in range(1, 200):
        term0 = term0 * q / (m * m)
        term1 = term1 * q / (m * (m + 1))
        i0 += term0
        i1 += term1
        if abs(term0) < 1e-18 * abs(i0) and abs(term1) < 1e-18 * abs(i1):
            break
    return z * i1 / i0


def _ratio_continued_fraction(z):
    # t_nu = I_nu / I_{nu-1} satisfies 1/t_nu = 2 nu / z + t_{nu+1}
    depth = int(abs(z)) + 50
    t = 0.0
    for nu in range(depth, 0, -1):
        t = 1.0 / (2.0 * nu / z + t)
    return t


@dataclass(frozen=True)
class StationaryRoot:
    """Admissible order-parameter magnitudes at a given kappa/nu ratio."""

    ratio: float
    roots: tuple[float, ...]
    r2: float | None

    def __post_init__(self):
        if 0.0 not in self.roots:
            raise ValueError("the trivial root 0 is always admissible")


BISECTION_TOL = 1e-12
BISECTION_CAP = 200


def solve_compatibility(ratio: float) -> StationaryRoot:
    """Solve I_1(z)/I_0(z) = z nu/kappa for the order-parameter magnitude.

    Roots are reported as |r| = z / ratio.  Only the trivial root exists
    for ratio <= 2; a unique positive root r2 in (0, 1) appears beyond.
    """
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    if ratio <= 2.0:
        return StationaryRoot(ratio=ratio, roots=(0.0,), r2=None)

    def h(z):
        return bessel_ratio(z) - z / ratio

    a = 1e-8
    while h(a) <= 0.0 and a > 1e-300:
        a /= 1e3
    b = None
    for cand in np.linspace(ratio, 10.0 * ratio, 10):
        if h(cand) < 0.0:
            b = float(cand)
            break
    if b is None or h(a) <= 0.0:
        raise NumericsError(f"failed to bracket the compatibility root at ratio {ratio}")
    for _ in range(BISECTION_CAP):
        mid = 0.5 * (a + b)
        if h(mid) > 0.0:
            a = mid
        else:
            b = mid
        if b - a <= BISECTION_TOL:
            break
    z_root = 0.5 * (a + b)
    r2 = z_root / ratio
    return StationaryRoot(ratio=ratio, roots=(0.0, r2), r2=r2)


def von_mises_state(ratio: float, r: complex, n_theta: int) -> AngularProfile:
    """Normalized profile proportional to exp{ratio |r| cos(theta + arg r)}.

    With the order-parameter convention m = integral e^{-i theta} g, the
    concentration is (kappa/nu)|r| and the profile's own order parameter
    solves the compatibility condition.
    """
    r = complex(r)
    if not (0.0 <= abs(r) < 1.0):
        raise ValueError("|r| must lie in [0, 1)")
    th = theta_points(n_theta)
    c = ratio * abs(r)
    vals = np.exp(c * np.cos(th + np.angle(r)))
    prof = AngularProfile.from_values(vals)
    return AngularProfile(prof.coeffs / (TWO_PI * prof.coeffs[0]))


# ---------------------------------------------------------------------------
# Frouvelle-Liu sphere formulation (numerical equivalence oracle)
# ---------------------------------------------------------------------------


def frouvelle_liu_rhs(g: AngularProfile) -> tuple[AngularProfile, AngularProfile]:
    """Alignment drift computed two ways: sphere projection vs flux form.

    Returns (-div_p((I - p(x)p)J[g] g), d_theta(g (sin*g))); the two
    agree identically, which validates the angular formulation.
    """
    n = g.n
    th = theta_points(n)
    gv = g.values

    # sphere formulation through the projection matrix algebra
    j1 = float(TWO_PI * g.coeffs[1].real)     # integral cos(theta') g
    j2 = float(-TWO_PI * g.coeffs[1].imag)    # integral sin(theta') g
    sin, cos = np.sin(th), np.cos(th)
    f1 = (sin**2 * j1 - sin * cos * j2) * gv
    f2 = (-sin * cos * j1 + cos**2 * j2) * gv
    df1 = AngularProfile.from_values(f1).derivative().values
    df2 = AngularProfile.from_values(f2).derivative().values
    sphere = AngularProfile.from_values(-(-sin * df1 + cos * df2))

    # direct flux form with the angular convolution
    sin_profile = AngularProfile.from_values(np.sin(th))
    conv = sin_profile.convolve(g).values
    direct = AngularProfile.from_values(gv * conv).derivative()
    return sphere, direct
