"""Complex frequency shift <-> complex permeability for a centered bar sample.

Two independent routes compute the dimensionless geometry factor g that
couples the sample to the TE10n mode:

  * closed forms: analytic integrals of the selected |H|^2 components
    over the centered box (sinc products), plus the published prefactor
    variant 4 a^2 (1 - sinc(k_z a1)) (4 pi a^2 + lambda_g^2)^-1
    (1 - sinc(k_x l1)) kept verbatim for diagnostics;
  * numerical quadrature: midpoint box integration of the same field
    energy with Richardson acceleration over grid doublings.

The two routes cross-check each other; extraction defaults to the
quadrature-backed value.  Sign conventions (time factor e^{+j w t},
mu_r = mu_re - j mu_im):

    shift = -(mu_r / (2 mu_rs) - 1/2) * g
    re(shift) = (f_loaded - f_empty) / f_loaded  (< 0 when mu_re > 1)
    im(shift) = (1/2) (1/Q_loaded - 1/Q_empty)   (> 0 when lossy)

so that invert_permeability is the exact algebraic inverse of
fractional_shift_closed.

Naming note: the bar extent along x is called l1 and the extent along z
is called a1.  The cross-axis naming is kept deliberately because the
closed forms are conventionally written with (1 - sinc(k_z a1)) and
(1 - sinc(k_x l1)); swapping the labels silently breaks that pairing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from math import pi, sin

import numpy as np

from .cavity import CavitySpec, ModeSpec, guided_wavelength, stored_field_norm, wavenumbers
from .errors import (
    AccuracyError,
    DegenerateGeometryError,
    InvalidGeometryError,
    SuspiciousPairingWarning,
    UnphysicalResultError,
    UnsupportedModeError,
)

#: g below this is treated as "no sample" and refuses to invert.
DEGENERATE_G = 1e-12

#: Relative tolerance of the convergence-by-doubling quadrature loop.
QUADRATURE_RTOL = 1e-6

#: Maximum number of grid doublings before giving up.
MAX_DOUBLINGS = 3


class InteractionChoice(str, Enum):
    """Which magnetic-field components the sample is taken to interact with.

    The component along z (``transverse-hz``) carries the
    (1 - sinc)(1 - sinc) structure of the published closed form and is
    the extraction default; the component maximal at the cavity center
    (``axial-hx``) gives the uniform-field small-sample limit.
    """

    AXIAL_HX = "axial-hx"
    TRANSVERSE_HZ = "transverse-hz"
    BOTH = "both-components"


@dataclass(frozen=True)
class SampleSpec:
    """Bar sample centered at (a/2, l/2), axis-aligned.

    extent_x_l1 : bar extent along x (meters)
    extent_z_a1 : bar extent along z (meters)
    thickness   : extent along y (meters)
    """

    extent_x_l1: float
    extent_z_a1: float
    thickness: float

    def __post_init__(self):
        for name in ("extent_x_l1", "extent_z_a1", "thickness"):
            if not getattr(self, name) > 0:
                raise InvalidGeometryError(f"{name} must be > 0")

    @property
    def volume(self) -> float:
        return self.extent_x_l1 * self.extent_z_a1 * self.thickness


@dataclass(frozen=True)
class ComplexPermeability:
    """mu_r = mu_re - j mu_im with magnetic loss tangent mu_im / mu_re."""

    mu_re: float
    mu_im: float = 0.0

    def __post_init__(self):
        if not self.mu_re > 0:
            raise InvalidGeometryError("mu_re must be > 0")
        if self.mu_im < 0:
            raise InvalidGeometryError("mu_im must be >= 0")

    @classmethod
    def from_loss_tangent(cls, mu_re: float, tan_dm: float) -> "ComplexPermeability":
        return cls(mu_re, mu_re * tan_dm)

    @property
    def tan_dm(self) -> float:
        return self.mu_im / self.mu_re

    @property
    def as_complex(self) -> complex:
        return self.mu_re - 1j * self.mu_im


@dataclass(frozen=True)
class FractionalShift:
    """Complex fractional resonance shift between empty and loaded states."""

    re: float
    im: float

    def __post_init__(self):
        if not (np.isfinite(self.re) and np.isfinite(self.im)):
            raise InvalidGeometryError("shift components must be finite")
        if not abs(self.re) < 1:
            raise InvalidGeometryError("|re| of a fractional shift must be < 1")

    @property
    def as_complex(self) -> complex:
        return self.re + 1j * self.im


@dataclass(frozen=True)
class GeometryFactor:
    """Dimensionless coupling factor with its computation provenance."""

    value: float
    provenance: str

    def __post_init__(self):
        if self.value < 0:
            raise InvalidGeometryError("geometry factor must be >= 0")


def _sinc(u: float) -> float:
    """Unnormalized cardinal sine sin(u)/u with sinc(0) = 1."""
    return sin(u) / u if u != 0.0 else 1.0


def _check_sample(cavity: CavitySpec, sample: SampleSpec) -> None:
    if sample.extent_x_l1 > cavity.a_eff:
        raise InvalidGeometryError("extent_x_l1 exceeds cavity width")
    if sample.extent_z_a1 > cavity.length_l:
        raise InvalidGeometryError("extent_z_a1 exceeds cavity length_l")
    if sample.thickness > cavity.height_h:
        raise InvalidGeometryError("thickness exceeds cavity height_h")


def _require_even(mode: ModeSpec, what: str) -> None:
    if not mode.is_even:
        raise UnsupportedModeError(
            f"{what} is defined for even mode indices only (got n={mode.n})"
        )


def geometry_factor_printed(
    cavity: CavitySpec, sample: SampleSpec, mode: ModeSpec
) -> GeometryFactor:
    """Published closed-form factor, kept verbatim.

    4 a^2 (1 - sinc(k_z a1)) (4 pi a^2 + lambda_g^2)^-1 (1 - sinc(k_x l1))

    Whether the 4 pi a^2 term should read 4 pi^2 a^2 is an open question;
    this form is reported as a diagnostic (see cli quadcheck) and never
    silently preferred for extraction.
    """
    _require_even(mode, "printed geometry factor")
    _check_sample(cavity, sample)
    a = cavity.a_eff
    k_x, k_z = wavenumbers(cavity, mode)
    lam_g = guided_wavelength(cavity, mode)
    value = (
        4.0
        * a**2
        * (1.0 - _sinc(k_z * sample.extent_z_a1))
        / (4.0 * pi * a**2 + lam_g**2)
        * (1.0 - _sinc(k_x * sample.extent_x_l1))
    )
    return GeometryFactor(value, "printed")


def geometry_factor_derived(
    cavity: CavitySpec,
    sample: SampleSpec,
    mode: ModeSpec,
    choice: InteractionChoice = InteractionChoice.TRANSVERSE_HZ,
) -> GeometryFactor:
    """Closed-form sample/cavity energy ratio for the selected components.

    Exact integrals over the centered box (width w, even n):

        int sin^2(k x) = (w/2)(1 + sinc(k w))   across the x half-wave
        int cos^2(k x) = (w/2)(1 - sinc(k w))
        int cos^2(k z) = (w/2)(1 + sinc(k w))   across the z standing wave
        int sin^2(k z) = (w/2)(1 - sinc(k w))

    divided by the whole-cavity field norm.
    """
    _require_even(mode, "derived geometry factor")
    _check_sample(cavity, sample)
    k_x, k_z = wavenumbers(cavity, mode)
    l1, a1, t = sample.extent_x_l1, sample.extent_z_a1, sample.thickness
    sinc_x = _sinc(k_x * l1)
    sinc_z = _sinc(k_z * a1)
    ix_sin = (l1 / 2.0) * (1.0 + sinc_x)  # int sin^2(k_x x) dx over the bar
    ix_cos = (l1 / 2.0) * (1.0 - sinc_x)
    iz_cos = (a1 / 2.0) * (1.0 + sinc_z)  # int cos^2(k_z z) dz over the bar
    iz_sin = (a1 / 2.0) * (1.0 - sinc_z)
    axial = k_z**2 * ix_sin * iz_cos
    transverse = k_x**2 * ix_cos * iz_sin
    if choice == InteractionChoice.AXIAL_HX:
        numerator, tag = axial, "derived-axial"
    elif choice == InteractionChoice.TRANSVERSE_HZ:
        numerator, tag = transverse, "derived-transverse"
    else:
        numerator, tag = axial + transverse, "derived-both"
    value = numerator * t / stored_field_norm(cavity, mode)
    return GeometryFactor(value, tag)


def geometry_factor_conventional(
    cavity: CavitySpec, sample: SampleSpec, mode: ModeSpec
) -> GeometryFactor:
    """Uniform-maximum-field small-sample factor.

    Classical baseline: the sample is assumed to sit in the field
    maximum, |H|^2 = k_z^2 uniformly, giving
    4 k_z^2 V_s / (V_c (k_x^2 + k_z^2)).  Coincides with the vanishing-
    extent limit of the axial-hx derived factor.
    """
    _check_sample(cavity, sample)
    k_x, k_z = wavenumbers(cavity, mode)
    value = (
        4.0
        * k_z**2
        * sample.volume
        / (cavity.volume * (k_x**2 + k_z**2))
    )
    return GeometryFactor(value, "conventional")


def _selected_energy(
    cavity: CavitySpec,
    mode: ModeSpec,
    choice: InteractionChoice,
    x: np.ndarray,
    z: np.ndarray,
) -> np.ndarray:
    """|H|^2 of the selected components on an (x, z) product grid."""
    k_x, k_z = wavenumbers(cavity, mode)
    sx2 = np.sin(k_x * x) ** 2
    cx2 = np.cos(k_x * x) ** 2
    sz2 = np.sin(k_z * z) ** 2
    cz2 = np.cos(k_z * z) ** 2
    if choice == InteractionChoice.AXIAL_HX:
        return k_z**2 * np.outer(sx2, cz2)
    if choice == InteractionChoice.TRANSVERSE_HZ:
        return k_x**2 * np.outer(cx2, sz2)
    return k_z**2 * np.outer(sx2, cz2) + k_x**2 * np.outer(cx2, sz2)


def sample_energy_midpoint(
    cavity: CavitySpec,
    sample: SampleSpec,
    mode: ModeSpec,
    choice: InteractionChoice,
    cells_per_axis: int,
) -> float:
    """Midpoint product rule for the sample-box integral of selected |H|^2.

    The integrand is uniform along y, so the y sum collapses to a factor
    of the sample thickness.  Summation order is fixed by the grid, so
    the result is deterministic for a given cells_per_axis.
    """
    a, l = cavity.a_eff, cavity.length_l
    l1, a1 = sample.extent_x_l1, sample.extent_z_a1
    m = cells_per_axis
    dx = l1 / m
    dz = a1 / m
    x = (a - l1) / 2.0 + (np.arange(m) + 0.5) * dx
    z = (l - a1) / 2.0 + (np.arange(m) + 0.5) * dz
    total = float(_selected_energy(cavity, mode, choice, x, z).sum())
    return total * dx * dz * sample.thickness


def sample_energy_quadrature(
    cavity: CavitySpec,
    sample: SampleSpec,
    mode: ModeSpec,
    choice: InteractionChoice = InteractionChoice.TRANSVERSE_HZ,
    cells_per_axis: int = 64,
) -> float:
    """Convergence-by-doubling box integral of the selected |H|^2.

    Builds midpoint sums at cells_per_axis, 2x, 4x, ... and Richardson-
    extrapolates the ladder (the midpoint error is a clean h^2 series
    for trigonometric integrands, so each doubling gains two orders).
    Converged when successive extrapolants agree to QUADRATURE_RTOL;
    raises AccuracyError after MAX_DOUBLINGS doublings without that.
    """
    if cells_per_axis < 8:
        raise InvalidGeometryError("cells_per_axis must be >= 8")
    _check_sample(cavity, sample)
    diagonal: list[float] = []
    rows: list[list[float]] = []
    delta = float("inf")
    for k in range(MAX_DOUBLINGS + 1):
        m = cells_per_axis * (2**k)
        row = [sample_energy_midpoint(cavity, sample, mode, choice, m)]
        for j in range(1, k + 1):
            weight = 4.0**j
            row.append((weight * row[j - 1] - rows[k - 1][j - 1]) / (weight - 1.0))
        rows.append(row)
        diagonal.append(row[-1])
        if k > 0:
            delta = abs(diagonal[-1] - diagonal[-2]) / max(abs(diagonal[-1]), 1e-300)
            if delta < QUADRATURE_RTOL:
                return diagonal[-1]
    raise AccuracyError(
        f"box integral did not converge within {MAX_DOUBLINGS} grid doublings "
        f"(last relative delta {delta:.3e})",
        last_delta=delta,
    )


def shift_complex(mu_r: ComplexPermeability, mu_rs: complex, g_value: float) -> complex:
    """Raw complex shift -(mu_r/(2 mu_rs) - 1/2) * g, unvalidated."""
    return -(mu_r.as_complex / (2.0 * complex(mu_rs)) - 0.5) * g_value


def fractional_shift_quadrature(
    cavity: CavitySpec,
    sample: SampleSpec,
    mode: ModeSpec,
    mu_r: ComplexPermeability,
    choice: InteractionChoice = InteractionChoice.TRANSVERSE_HZ,
    cells_per_axis: int = 64,
) -> FractionalShift:
    """Fractional shift from direct numerical integration of the field energy.

    -(1/2) (mu_r/mu_rs - 1) * (box integral of selected |H|^2) / norm.
    Works for any mode index (odd n included); the closed forms are the
    even-n specialization.
    """
    integral = sample_energy_quadrature(cavity, sample, mode, choice, cells_per_axis)
    g = integral / stored_field_norm(cavity, mode)
    delta = shift_complex(mu_r, cavity.mu_rs, g)
    return FractionalShift(delta.real, delta.imag)


def fractional_shift_closed(
    mu_r: ComplexPermeability, mu_rs: complex, g: GeometryFactor
) -> FractionalShift:
    """Closed-form fractional shift -(mu_r/(2 mu_rs) - 1/2) * g."""
    if not np.isfinite(g.value):
        raise InvalidGeometryError("geometry factor must be finite")
    delta = shift_complex(mu_r, mu_rs, g.value)
    return FractionalShift(delta.real, delta.imag)


def complex_shift_from_resonances(empty, loaded) -> FractionalShift:
    """Measured fractional shift between an empty and a loaded resonance.

    re = (f_loaded - f_empty) / f_loaded
    im = (1/2) (1/Q_loaded - 1/Q_empty), unloaded Q on both sides.
    """
    if not (empty.f0 > 0 and loaded.f0 > 0):
        raise InvalidGeometryError("resonance frequencies must be > 0")
    if not (empty.q_unloaded > 0 and loaded.q_unloaded > 0):
        raise InvalidGeometryError("unloaded Q must be > 0")
    if loaded.f0 > 1.10 * empty.f0:
        warnings.warn(
            f"loaded resonance at {loaded.f0:.6g} Hz sits more than 10% above "
            f"the empty one at {empty.f0:.6g} Hz; resonances are likely "
            "mismatched across modes",
            SuspiciousPairingWarning,
            stacklevel=2,
        )
    re = (loaded.f0 - empty.f0) / loaded.f0
    im = 0.5 * (1.0 / loaded.q_unloaded - 1.0 / empty.q_unloaded)
    return FractionalShift(re, im)


def invert_permeability(
    shift: FractionalShift, g: GeometryFactor, mu_rs: complex
) -> ComplexPermeability:
    """Exact algebraic inverse of fractional_shift_closed.

    mu_r = mu_rs (1 - 2 shift / g); raises when the factor is degenerate
    or the result leaves the model's parameter space.
    """
    if g.value <= DEGENERATE_G:
        raise DegenerateGeometryError(
            f"geometry factor {g.value:.3e} is degenerate (<= {DEGENERATE_G:.0e}); "
            "sample volume is effectively zero"
        )
    mu_c = complex(mu_rs) * (1.0 - 2.0 * shift.as_complex / g.value)
    mu_re, mu_im = mu_c.real, -mu_c.imag
    if mu_re <= 0:
        raise UnphysicalResultError(
            f"extracted mu_re = {mu_re:.6g} <= 0; shift inconsistent with the model"
        )
    if mu_im < 0:
        raise UnphysicalResultError(
            f"extracted mu_im = {mu_im:.6g} < 0 (negative magnetic loss); "
            "shift inconsistent with the model"
        )
    return ComplexPermeability(mu_re, mu_im)


def invert_conventional(
    shift: FractionalShift,
    cavity: CavitySpec,
    sample: SampleSpec,
    mode: ModeSpec,
    mu_rs: complex,
) -> ComplexPermeability:
    """Baseline inversion with the uniform-maximum-field factor."""
    return invert_permeability(
        shift, geometry_factor_conventional(cavity, sample, mode), mu_rs
    )
