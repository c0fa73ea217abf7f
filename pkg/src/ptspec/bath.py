"""Ohmic-bath scalar functions and integrals.

All quantities use k_B = hbar = 1 units with frequencies/energies in 1/ps and
times in ps.  Temperatures given in Kelvin are converted at the CLI boundary
only, via :data:`KELVIN_TO_INVERSE_PS`.

The spectral density is J(w) = 2*alpha*w*exp(-w/omega_c) (zero for w < 0).
Every improper frequency integral is cut off at ``CUTOFF_FACTOR * omega_c``,
where the integrand has decayed below 1e-15 of its peak, and evaluated with
adaptive quadrature; oscillatory factors cos(w*t), sin(w*t) are handled by
the dedicated QAWO weights so large t stays accurate.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
import scipy.constants
import scipy.integrate

from .errors import IntegrationError, ValidationError

__all__ = [
    "KELVIN_TO_INVERSE_PS",
    "BathSpec",
    "DiscreteBath",
    "EtaCoefficients",
    "spectral_density",
    "reorganization_energy",
    "bose_occupation",
    "autocorrelation",
    "eta_coefficients",
    "lamb_shift",
    "eigenstate_splitting",
    "wcme_rates",
    "phonon_propagator_diff",
    "polaron_rates",
    "memory_time",
    "sample_modes",
]

# k_B / hbar in 1/(ps K): multiplies T[K] to give T in 1/ps (100 K -> 13.09).
KELVIN_TO_INVERSE_PS = scipy.constants.k / scipy.constants.hbar * 1e-12

# Frequency integrals run over [0, CUTOFF_FACTOR * omega_c]; the exponential
# cutoff makes the dropped tail < 1e-15 relative.
CUTOFF_FACTOR = 40.0
QUAD_ABS_TOL = 1e-11
QUAD_LIMIT = 500

# Horizon and smallness threshold for the polaron time integral.
POLARON_TIME_CAP = 200.0
POLARON_TAIL_EPS = 1e-10


@dataclass(frozen=True)
class BathSpec:
    """Ohmic bath: dimensionless coupling, cutoff frequency and temperature."""

    alpha: float
    omega_c: float
    temperature: float

    def __post_init__(self):
        if self.alpha < 0:
            raise ValidationError(f"alpha must be >= 0, got {self.alpha}")
        if self.omega_c <= 0:
            raise ValidationError(f"omega_c must be > 0, got {self.omega_c}")
        if self.temperature <= 0:
            raise ValidationError(
                f"temperature must be > 0, got {self.temperature}"
            )


@dataclass(frozen=True)
class DiscreteBath:
    """Finite set of modes (w_k, g_k); the few-mode oracle's bath.

    The autocorrelation and memory-kernel coefficients of a discrete bath
    are closed-form trigonometric sums, so PT construction against it is
    quadrature-free.
    """

    frequencies: Tuple[float, ...]
    couplings: Tuple[float, ...]
    temperature: float

    def __post_init__(self):
        if len(self.frequencies) != len(self.couplings):
            raise ValidationError("frequencies and couplings differ in length")
        if any(w <= 0 for w in self.frequencies):
            raise ValidationError("mode frequencies must be positive")
        if self.temperature <= 0:
            raise ValidationError("temperature must be > 0")


@dataclass(frozen=True)
class EtaCoefficients:
    """Discretized memory kernel: eta_0 .. eta_K for time step dt."""

    dt: float
    values: np.ndarray  # complex, length K+1

    def __len__(self):
        return len(self.values)


def _coth(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    with np.errstate(divide="ignore"):
        out = np.where(small, 1.0 / x + x / 3.0, 1.0 / np.tanh(safe))
    return out if out.ndim else float(out)


def _quad(func, a, b, atol=1e-9, **kwargs):
    """scipy.integrate.quad with convergence checking."""
    out = scipy.integrate.quad(
        func, a, b, epsabs=QUAD_ABS_TOL, epsrel=QUAD_ABS_TOL,
        limit=QUAD_LIMIT, full_output=True, **kwargs
    )
    value, abserr = out[0], out[1]
    if len(out) > 3 or abserr > atol * max(1.0, abs(value)):
        raise IntegrationError(
            f"quadrature did not converge on [{a}, {b}] "
            f"(abserr={abserr:.3e})",
            achieved=abserr,
        )
    return value


def spectral_density(b: BathSpec, w) -> float:
    """J(w) = 2*alpha*w*exp(-w/omega_c); zero for w < 0."""
    w = np.asarray(w, dtype=float)
    j = 2.0 * b.alpha * w * np.exp(-np.abs(w) / b.omega_c)
    out = np.where(w >= 0.0, j, 0.0)
    return out if out.ndim else float(out)


def reorganization_energy(b) -> float:
    """lambda = integral J(w)/w dw; 2*alpha*omega_c for the Ohmic form."""
    if isinstance(b, DiscreteBath):
        return float(sum(g * g / w for w, g in zip(b.frequencies, b.couplings)))
    return 2.0 * b.alpha * b.omega_c


def bose_occupation(b: BathSpec, w: float) -> float:
    """Bose-Einstein occupation N(w) at the bath temperature."""
    return 1.0 / math.expm1(w / b.temperature)


def autocorrelation(b, tau: float) -> complex:
    """Bath autocorrelation C(tau) = integral J(w)[cos(w tau)coth(w/2T) - i sin(w tau)].

    The w->0 limit of the real integrand is finite (4*alpha*T) and is
    substituted analytically.
    """
    if tau < 0:
        raise ValidationError(f"tau must be >= 0, got {tau}")
    if isinstance(b, DiscreteBath):
        w = np.asarray(b.frequencies)
        g2 = np.asarray(b.couplings) ** 2
        coth = _coth(w / (2.0 * b.temperature))
        return complex(
            np.sum(g2 * (coth * np.cos(w * tau) - 1j * np.sin(w * tau)))
        )
    if b.alpha == 0.0:
        return 0.0 + 0.0j
    cutoff = CUTOFF_FACTOR * b.omega_c
    two_t = 2.0 * b.temperature

    def real_integrand(w):
        if w < 1e-12 * b.omega_c:
            return 4.0 * b.alpha * b.temperature
        return spectral_density(b, w) * _coth(w / two_t)

    def imag_integrand(w):
        return spectral_density(b, w)

    if tau == 0.0:
        re = _quad(real_integrand, 0.0, cutoff)
        return complex(re, 0.0)
    re = _quad(real_integrand, 0.0, cutoff, weight="cos", wvar=tau)
    im = -_quad(imag_integrand, 0.0, cutoff, weight="sin", wvar=tau)
    return complex(re, im)


def eta_coefficients(b, dt: float, K: int) -> EtaCoefficients:
    """Memory-kernel coefficients eta_0 .. eta_K.

    eta_0 is the double integral of C over the triangle 0 <= t'' <= t' <= dt;
    eta_k (k >= 1) over the square t' in [k dt, (k+1) dt], t'' in [0, dt].
    Both reduce to single frequency integrals:

        eta_0 = int dw J/w^2 [coth(w/2T)(1 - cos(w dt)) - i(w dt - sin(w dt))]
        eta_k = int dw J/w^2 4 sin^2(w dt/2) [coth(w/2T) cos(w k dt) - i sin(w k dt)]

    using 2 cos(b) - cos(b+c) - cos(b-c) = 4 cos(b) sin^2(c/2) (and the sine
    analogue) to collapse the three-frequency combination.
    """
    if dt <= 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    if K < 0:
        raise ValidationError(f"K must be >= 0, got {K}")
    if isinstance(b, DiscreteBath):
        return _discrete_eta(b, dt, K)
    if b.alpha == 0.0:
        return EtaCoefficients(dt=dt, values=np.zeros(K + 1, dtype=complex))

    cutoff = CUTOFF_FACTOR * b.omega_c
    two_t = 2.0 * b.temperature
    alpha = b.alpha

    def eta0_real(w):
        if w < 1e-10 * b.omega_c:
            return 2.0 * alpha * b.temperature * dt * dt
        return spectral_density(b, w) / w**2 * _coth(w / two_t) * (1.0 - np.cos(w * dt))

    def eta0_imag(w):
        if w < 1e-6 * b.omega_c:
            # w*dt - sin(w*dt) ~ (w*dt)^3/6; J/w^2 ~ 2 alpha / w
            return 2.0 * alpha * w * w * dt**3 / 6.0
        return spectral_density(b, w) / w**2 * (w * dt - np.sin(w * dt))

    def etak_coth(w):
        if w < 1e-10 * b.omega_c:
            return 4.0 * alpha * b.temperature * dt * dt
        return (
            4.0 * spectral_density(b, w) / w**2
            * np.sin(w * dt / 2.0) ** 2 * _coth(w / two_t)
        )

    def etak_bare(w):
        if w < 1e-10 * b.omega_c:
            return 2.0 * alpha * w * dt * dt
        return 4.0 * spectral_density(b, w) / w**2 * np.sin(w * dt / 2.0) ** 2

    values = np.empty(K + 1, dtype=complex)
    values[0] = complex(
        _quad(eta0_real, 0.0, cutoff), -_quad(eta0_imag, 0.0, cutoff)
    )
    for k in range(1, K + 1):
        tk = k * dt
        re = _quad(etak_coth, 0.0, cutoff, weight="cos", wvar=tk)
        im = -_quad(etak_bare, 0.0, cutoff, weight="sin", wvar=tk)
        values[k] = complex(re, im)
    return EtaCoefficients(dt=dt, values=values)


def _discrete_eta(b: DiscreteBath, dt: float, K: int) -> EtaCoefficients:
    w = np.asarray(b.frequencies)
    g2 = np.asarray(b.couplings) ** 2
    coth = _coth(w / (2.0 * b.temperature))
    values = np.empty(K + 1, dtype=complex)
    values[0] = np.sum(
        g2 / w**2 * (coth * (1.0 - np.cos(w * dt)) - 1j * (w * dt - np.sin(w * dt)))
    )
    for k in range(1, K + 1):
        tk = k * dt
        kernel = 4.0 * g2 / w**2 * np.sin(w * dt / 2.0) ** 2
        values[k] = np.sum(kernel * (coth * np.cos(w * tk) - 1j * np.sin(w * tk)))
    return EtaCoefficients(dt=dt, values=values)


def _occupied_density(b: BathSpec, w: float) -> float:
    """J(w)(N(w)+1) continued to negative w as J(-w)N(-w); value 2*alpha*T at 0."""
    scale = 1e-10 * b.omega_c
    if abs(w) < scale:
        return 2.0 * b.alpha * b.temperature
    if w > 0:
        return spectral_density(b, w) * (bose_occupation(b, w) + 1.0)
    return spectral_density(b, -w) * bose_occupation(b, -w)


def lamb_shift(b: BathSpec, nu: float) -> float:
    """Principal-value energy shift S(nu) of the transition at frequency nu.

    Evaluated by singularity subtraction on the window [-W, W], W = 40*omega_c:
    the subtracted integrand (F(w) - F(nu))/(nu - w) is regular at nu, and the
    subtracted pole integrates to the analytic log remainder.
    """
    if nu == 0.0:
        raise ValidationError("lamb_shift is undefined at nu = 0")
    if b.alpha == 0.0:
        return 0.0
    window = max(CUTOFF_FACTOR * b.omega_c, 4.0 * abs(nu))
    if abs(nu) >= window:
        raise ValidationError(f"nu = {nu} outside the resolvable window {window}")
    f_nu = _occupied_density(b, nu)

    def subtracted(w):
        d = nu - w
        if abs(d) < 1e-9 * b.omega_c:
            # derivative limit via a symmetric difference around nu
            h = 1e-6 * b.omega_c
            return -(_occupied_density(b, nu + h) - _occupied_density(b, nu - h)) / (2 * h)
        return (_occupied_density(b, w) - f_nu) / d

    body = _quad(subtracted, -window, window, points=[0.0, nu])
    remainder = f_nu * math.log(abs((nu + window) / (nu - window)))
    return body + remainder


def eigenstate_splitting(b: BathSpec, omega_el: float) -> float:
    """Bath-renormalized splitting between the excited eigenstates.

    delta_E = 2*Omega*(1 + 2 * PV int_0^inf J(w) coth(w/2T) / ((2 Omega)^2 - w^2) dw),
    equal to 2*Omega + S(2*Omega) - S(-2*Omega).
    """
    if omega_el <= 0:
        raise ValidationError(f"omega_el must be > 0, got {omega_el}")
    if b.alpha == 0.0:
        return 2.0 * omega_el
    nu = 2.0 * omega_el
    window = max(CUTOFF_FACTOR * b.omega_c, 4.0 * nu)
    two_t = 2.0 * b.temperature

    def numerator(w):
        if w < 1e-10 * b.omega_c:
            return 4.0 * b.alpha * b.temperature
        return spectral_density(b, w) * _coth(w / two_t)

    g_nu = numerator(nu)

    def subtracted(w):
        d = nu * nu - w * w
        if abs(nu - w) < 1e-9 * b.omega_c:
            h = 1e-6 * b.omega_c
            return -(numerator(nu + h) - numerator(nu - h)) / (2 * h) / (2.0 * nu)
        return (numerator(w) - g_nu) / d

    body = _quad(subtracted, 0.0, window, points=[nu])
    remainder = g_nu / (2.0 * nu) * math.log((window + nu) / (window - nu))
    return 2.0 * omega_el * (1.0 + 2.0 * (body + remainder))


def wcme_rates(b: BathSpec, omega_el: float) -> Tuple[float, float]:
    """Downward/upward rates gamma_1 = 2 pi J(2 Omega)(N+1), gamma_2 = 2 pi J N."""
    if omega_el <= 0:
        raise ValidationError(f"omega_el must be > 0, got {omega_el}")
    nu = 2.0 * omega_el
    j = spectral_density(b, nu)
    n = bose_occupation(b, nu)
    return 2.0 * math.pi * j * (n + 1.0), 2.0 * math.pi * j * n


def phonon_propagator_diff(b: BathSpec, t: float) -> complex:
    """phi(t) - phi(0) = int dw J/w^2 [(cos(wt) - 1) coth(w/2T) - i sin(wt)].

    phi(0) alone diverges for Ohmic J, so only the difference is computed.
    The imaginary part is the exact sine transform -2*alpha*arctan(omega_c*t);
    the real part splits into a smooth low-frequency piece and a QAWO cosine
    piece so large t stays cheap and accurate.
    """
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    if t == 0.0 or b.alpha == 0.0:
        return 0.0 + 0.0j
    cutoff = CUTOFF_FACTOR * b.omega_c
    two_t = 2.0 * b.temperature

    def envelope(w):
        # J coth / w^2; integrable only against (cos - 1)
        return spectral_density(b, w) / w**2 * _coth(w / two_t)

    def combined(w):
        if w < 1e-10 * b.omega_c:
            return -2.0 * b.alpha * b.temperature * t * t
        return envelope(w) * (np.cos(w * t) - 1.0)

    split = min(b.omega_c, max(0.5 / t, 1e-3 * b.omega_c))
    re = _quad(combined, 0.0, split)
    re += _quad(envelope, split, cutoff, weight="cos", wvar=t)
    re -= _quad(envelope, split, cutoff)
    im = -2.0 * b.alpha * math.atan(b.omega_c * t)
    return complex(re, im)


def polaron_rates(b: BathSpec, omega_el: float):
    """Polaron master-equation rates (L1, L2, L3) and Lamb shift.

    L1 = L2 = Omega^2 * Re int_0^inf e^{4(phi(t)-phi(0))} dt, L3 = 2 L1; the
    imaginary part of the same integral is returned as the Lamb shift.  The
    integrand is followed until it drops below POLARON_TAIL_EPS or the
    POLARON_TIME_CAP horizon is hit, in which case the tail never converged
    and an IntegrationError is raised.
    """
    if omega_el < 0:
        raise ValidationError(f"omega_el must be >= 0, got {omega_el}")
    if omega_el == 0.0:
        return 0.0, 0.0, 0.0, 0.0
    if b.alpha == 0.0:
        raise IntegrationError(
            "polaron time integral diverges for a decoupled bath (alpha = 0)"
        )
    log_eps = math.log(POLARON_TAIL_EPS)
    t_max = None
    t = 0.05
    while t <= POLARON_TIME_CAP:
        if 4.0 * phonon_propagator_diff(b, t).real < log_eps:
            t_max = t
            break
        t *= 1.5
    if t_max is None:
        raise IntegrationError(
            f"polaron integrand still above {POLARON_TAIL_EPS} at the "
            f"{POLARON_TIME_CAP} ps horizon"
        )

    cache = {}

    def dressing(t_):
        if t_ not in cache:
            cache[t_] = np.exp(4.0 * phonon_propagator_diff(b, t_)) if t_ > 0 else 1.0
        return cache[t_]

    re = scipy.integrate.quad(
        lambda t_: dressing(t_).real, 0.0, t_max, epsabs=1e-10, epsrel=1e-10, limit=200
    )[0]
    im = scipy.integrate.quad(
        lambda t_: dressing(t_).imag, 0.0, t_max, epsabs=1e-10, epsrel=1e-10, limit=200
    )[0]
    l1 = omega_el**2 * re
    lamb = omega_el**2 * im
    return l1, l1, 2.0 * l1, lamb


@lru_cache(maxsize=32)
def memory_time(b, threshold: float = 1e-3, t_max: float = 60.0) -> float:
    """Time for |C(tau)| to decay below threshold * |C|_max (coarse scan)."""
    c0 = abs(autocorrelation(b, 0.0))
    if c0 == 0.0:
        return 0.0
    peak = c0
    tau = 0.0
    step = 0.1
    while tau < t_max:
        tau += step
        c = abs(autocorrelation(b, tau))
        peak = max(peak, c)
        if c <= threshold * peak:
            return tau
        if tau > 2.0:
            step = 0.25
    return t_max


def sample_modes(b: BathSpec, n_modes: int, omega_max: float = None) -> DiscreteBath:
    """Discretize J into n_modes with equal coupling weight per bin.

    Each bin [e_i, e_{i+1}] contributes one mode at the J-weighted centroid
    with g_k^2 = int_bin J.  Used only to seed the few-mode test oracle.
    """
    if n_modes < 1:
        raise ValidationError("n_modes must be >= 1")
    if omega_max is None:
        omega_max = 5.0 * b.omega_c
    total = _quad(lambda w: spectral_density(b, w), 0.0, omega_max)
    targets = np.linspace(0.0, total, n_modes + 1)
    edges = [0.0]
    for target in targets[1:-1]:
        lo, hi = edges[-1], omega_max
        while hi - lo > 1e-10 * omega_max:
            mid = 0.5 * (lo + hi)
            if _quad(lambda w: spectral_density(b, w), 0.0, mid) < target:
                lo = mid
            else:
                hi = mid
        edges.append(0.5 * (lo + hi))
    edges.append(omega_max)
    freqs, coups = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        weight = _quad(lambda w: spectral_density(b, w), lo, hi)
        first_moment = _quad(lambda w: w * spectral_density(b, w), lo, hi)
        freqs.append(first_moment / weight)
        coups.append(math.sqrt(weight))
    return DiscreteBath(
        frequencies=tuple(freqs), couplings=tuple(coups), temperature=b.temperature
    )
