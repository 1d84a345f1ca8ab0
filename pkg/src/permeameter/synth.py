"""Forward trace synthesis: known permeability -> loaded resonance -> S21 trace.

Stands in for a full-wave solver at desk scale: the perturbation model
maps a material to a resonance shift, and a single-resonance Lorentzian
with optional seeded noise renders the scattering trace.  Coupling
(insertion loss) is held constant between empty and loaded states.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cavity import CavitySpec, ModeSpec
from .errors import ConfigurationError, ModelBreakdownError
from .cavity import stored_field_norm
from .perturbation import (
    ComplexPermeability,
    FractionalShift,
    InteractionChoice,
    SampleSpec,
    geometry_factor_derived,
    geometry_factor_printed,
    sample_energy_quadrature,
    shift_complex,
)
from .traceio import FrequencyTrace, Resonance, write_touchstone

FORWARD_MODELS = ("quadrature", "derived", "printed")


@dataclass(frozen=True)
class SynthConfig:
    """Sweep window and trace options for synthesized S21 data."""

    f_start: float
    f_stop: float
    n_points: int = 4001
    noise_floor_db: float | None = None
    seed: int = 0
    il_linear: float = 0.3

    def __post_init__(self):
        if not self.f_start < self.f_stop:
            raise ConfigurationError("f_start must be < f_stop")
        if self.n_points < 101:
            raise ConfigurationError("n_points must be >= 101")
        if self.noise_floor_db is not None and not self.noise_floor_db < -20:
            raise ConfigurationError("noise_floor_db must be < -20 dB")
        if not 0 < self.il_linear < 1:
            raise ConfigurationError("il_linear must be in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must fit in 64 bits")


def _model_delta(
    cavity: CavitySpec,
    sample: SampleSpec,
    mode: ModeSpec,
    mu_r: ComplexPermeability,
    model: str,
    choice: InteractionChoice,
    cells_per_axis: int,
) -> complex:
    """Raw complex shift for the selected forward model tag."""
    if model == "quadrature":
        integral = sample_energy_quadrature(cavity, sample, mode, choice, cells_per_axis)
        g_value = integral / stored_field_norm(cavity, mode)
    elif model == "derived":
        g_value = geometry_factor_derived(cavity, sample, mode, choice).value
    elif model == "printed":
        g_value = geometry_factor_printed(cavity, sample, mode).value
    else:
        raise ConfigurationError(
            f"unknown forward model {model!r}; expected one of {FORWARD_MODELS}"
        )
    return shift_complex(mu_r, cavity.mu_rs, g_value)


def model_shift(
    cavity: CavitySpec,
    sample: SampleSpec,
    mode: ModeSpec,
    mu_r: ComplexPermeability,
    model: str = "quadrature",
    choice: InteractionChoice = InteractionChoice.TRANSVERSE_HZ,
    cells_per_axis: int = 64,
) -> FractionalShift:
    """Fractional shift for the selected forward model tag."""
    delta = _model_delta(cavity, sample, mode, mu_r, model, choice, cells_per_axis)
    return FractionalShift(delta.real, delta.imag)


def forward_load(
    cavity: CavitySpec,
    sample: SampleSpec,
    mode: ModeSpec,
    mu_r: ComplexPermeability,
    empty: Resonance,
    model: str = "quadrature",
    choice: InteractionChoice = InteractionChoice.TRANSVERSE_HZ,
    cells_per_axis: int = 64,
) -> Resonance:
    """Loaded resonance predicted for a sample of known permeability.

    f_loaded = f_empty / (1 - re); 1/Q_loaded = 1/Q_empty + 2 im, on
    unloaded Q.  Coupling is copied from the empty state.
    """
    delta = _model_delta(cavity, sample, mode, mu_r, model, choice, cells_per_axis)
    if delta.real >= 1:
        raise ModelBreakdownError(
            f"fractional shift re = {delta.real:.4g} >= 1; perturbation assumption violated"
        )
    f_loaded = empty.f0 / (1.0 - delta.real)
    inv_q = 1.0 / empty.q_unloaded + 2.0 * delta.imag
    if inv_q <= 0:
        raise ModelBreakdownError("predicted unloaded Q is not positive")
    q_unloaded = 1.0 / inv_q
    q_loaded = q_unloaded * (1.0 - empty.il_linear)
    return Resonance(f_loaded, q_loaded, q_unloaded, empty.il_linear, method="model")


def lorentzian_trace(res: Resonance, cfg: SynthConfig) -> FrequencyTrace:
    """Single-resonance transmission trace on a uniform frequency grid.

    S21(f) = IL / (1 + 2j Q_L (f - f0)/f0), i.e. magnitude
    IL/sqrt(1 + 4 Q_L^2 u^2) with phase -atan(2 Q_L u).  Optional noise
    is complex Gaussian with RMS 10^(noise_floor_db/20), reproducible
    for a fixed seed.
    """
    bw = res.f0 / res.q_loaded
    if not (cfg.f_start + 3.0 * bw <= res.f0 <= cfg.f_stop - 3.0 * bw):
        raise ConfigurationError(
            f"resonance at {res.f0:.6g} Hz needs 3 bandwidths "
            f"({3 * bw:.6g} Hz) of margin inside ({cfg.f_start:.6g}, {cfg.f_stop:.6g})"
        )
    f = np.linspace(cfg.f_start, cfg.f_stop, cfg.n_points)
    u = (f - res.f0) / res.f0
    s21 = res.il_linear / (1.0 + 2j * res.q_loaded * u)
    if cfg.noise_floor_db is not None:
        rng = np.random.default_rng(cfg.seed)
        sigma = 10.0 ** (cfg.noise_floor_db / 20.0) / np.sqrt(2.0)
        s21 = s21 + sigma * (
            rng.standard_normal(cfg.n_points) + 1j * rng.standard_normal(cfg.n_points)
        )
    return FrequencyTrace(f, s21, None, source=f"synth seed={cfg.seed}")


def _item_seed(base_seed: int, label: str) -> int:
    """Stable per-item seed: campaign seed mixed with the material label."""
    return (base_seed ^ zlib.crc32(label.encode("utf-8"))) % 2**64


def synth_campaign(
    cavity: CavitySpec,
    sample: SampleSpec,
    mode: ModeSpec,
    sample_table: list[tuple[str, ComplexPermeability]],
    empty: Resonance,
    cfg: SynthConfig,
    out_dir: str | Path,
    campaign: str = "campaign",
    model: str = "quadrature",
    choice: InteractionChoice = InteractionChoice.TRANSVERSE_HZ,
    cells_per_axis: int = 64,
) -> dict[str, Path]:
    """Write one Touchstone file per material plus the empty-cavity file.

    Returns {label: path}; the empty trace is keyed "empty".  Labels may
    not collide with it or each other.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = [name for name, _ in sample_table]
    if len(set(labels)) != len(labels) or "empty" in labels:
        raise ConfigurationError("material labels must be unique and not 'empty'")

    written: dict[str, Path] = {}

    def emit(label: str, res: Resonance) -> None:
        item_cfg = SynthConfig(
            cfg.f_start,
            cfg.f_stop,
            cfg.n_points,
            cfg.noise_floor_db,
            _item_seed(cfg.seed, label),
            cfg.il_linear,
        )
        trace = lorentzian_trace(res, item_cfg)
        path = out / f"{campaign}_{label}.s2p"
        path.write_bytes(write_touchstone(trace, fmt="RI"))
        written[label] = path

    emit("empty", empty)
    for name, mu_r in sample_table:
        loaded = forward_load(
            cavity, sample, mode, mu_r, empty, model, choice, cells_per_axis
        )
        emit(name, loaded)
    return written
