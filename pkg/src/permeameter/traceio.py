"""Touchstone two-port I/O, resonance detection, and Q extraction.

Accepted file grammar (Touchstone v1.0, two ports):

    ! comment lines anywhere; trailing '!' comments allowed on any line
    # <unit> S <fmt> R <z0>      one option line, case-insensitive,
                                 unit in {HZ, KHZ, MHZ, GHZ},
                                 fmt in {RI, MA, DB}
    f  S11 S11  S21 S21  S12 S12  S22 S22     nine numbers per row,
                                              v1 column order

v2 files ([Version] ...) are rejected.  All parse errors carry the
1-based line number of the offending line.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .errors import (
    FitFailureError,
    InsufficientSpanError,
    InvalidGeometryError,
    NearCriticalCouplingWarning,
    NoPairableResonanceError,
    OverCoupledError,
    TouchstoneParseError,
)

FREQ_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
FORMATS = ("RI", "MA", "DB")

HALF_POWER_DB = 10.0 * math.log10(2.0)  # 3.0103 dB
DB_FLOOR = -400.0  # clamp for log of zero magnitudes

#: Pairing guard band: loaded resonance must sit within this fraction
#: of the empty resonance frequency.
PAIRING_GUARD = 0.10


@dataclass(frozen=True)
class FrequencyTrace:
    """Frequency grid with complex linear transmission samples."""

    freqs: np.ndarray
    s21: np.ndarray
    s11: np.ndarray | None = None
    z0: float = 50.0
    fmt: str = "RI"
    source: str = ""

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        s21 = np.asarray(self.s21, dtype=complex)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "s21", s21)
        if self.s11 is not None:
            s11 = np.asarray(self.s11, dtype=complex)
            object.__setattr__(self, "s11", s11)
            if s11.shape != freqs.shape or not np.all(np.isfinite(s11)):
                raise InvalidGeometryError("s11 must be finite and match freqs")
        if freqs.ndim != 1 or len(freqs) < 1:
            raise InvalidGeometryError("trace needs at least one point")
        if s21.shape != freqs.shape:
            raise InvalidGeometryError("s21 length must match freqs")
        if np.any(np.diff(freqs) <= 0):
            raise InvalidGeometryError("freqs must be strictly increasing")
        if not (np.all(np.isfinite(freqs)) and np.all(np.isfinite(s21))):
            raise InvalidGeometryError("trace values must be finite")
        if not self.z0 > 0:
            raise InvalidGeometryError("reference impedance z0 must be > 0")

    def __len__(self) -> int:
        return len(self.freqs)

    @property
    def s21_db(self) -> np.ndarray:
        return 20.0 * np.log10(np.maximum(np.abs(self.s21), 1e-300))


@dataclass(frozen=True)
class Resonance:
    """One resonant feature of a transmission trace."""

    f0: float
    q_loaded: float
    q_unloaded: float
    il_linear: float
    method: str = ""

    def __post_init__(self):
        if not self.f0 > 0:
            raise InvalidGeometryError("f0 must be > 0")
        if not self.q_loaded > 0:
            raise InvalidGeometryError("q_loaded must be > 0")
        if not 0 < self.il_linear < 1:
            raise InvalidGeometryError("il_linear must be in (0, 1)")
        expected = self.q_loaded / (1.0 - self.il_linear)
        if abs(self.q_unloaded - expected) > 1e-9 * expected:
            raise InvalidGeometryError(
                "q_unloaded inconsistent with q_loaded/(1 - il_linear)"
            )

    @classmethod
    def from_loaded(
        cls, f0: float, q_loaded: float, il_linear: float, method: str = ""
    ) -> "Resonance":
        return cls(f0, q_loaded, unload_q(q_loaded, il_linear), il_linear, method)


# ---------------------------------------------------------------------------
# Touchstone parsing / writing
# ---------------------------------------------------------------------------


def _pair_to_complex(a: float, b: float, fmt: str) -> complex:
    if fmt == "RI":
        return complex(a, b)
    phase = math.radians(b)
    mag = a if fmt == "MA" else 10.0 ** (a / 20.0)
    return mag * complex(math.cos(phase), math.sin(phase))


def parse_touchstone(data: bytes | str, source: str = "") -> FrequencyTrace:
    """Parse a Touchstone v1.0 two-port file into a FrequencyTrace."""
    text = data.decode("latin-1") if isinstance(data, bytes) else data
    unit = fmt = None
    z0 = 50.0
    freqs: list[float] = []
    s11: list[complex] = []
    s21: list[complex] = []
    last_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        last_line = lineno
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            raise TouchstoneParseError(
                lineno, f"keyword {line.split()[0]!r} is Touchstone v2; only v1.0 is supported"
            )
        if line.startswith("#"):
            if fmt is not None:
                raise TouchstoneParseError(lineno, "multiple option lines")
            tokens = line[1:].split()
            if len(tokens) != 5:
                raise TouchstoneParseError(
                    lineno, "option line must read '# <unit> S <fmt> R <z0>'"
                )
            u, s_tok, f_tok, r_tok, z_tok = (t.upper() for t in tokens)
            if u not in FREQ_UNITS:
                raise TouchstoneParseError(lineno, f"unknown frequency unit {tokens[0]!r}")
            if s_tok != "S":
                raise TouchstoneParseError(lineno, f"unsupported parameter type {tokens[1]!r}")
            if f_tok not in FORMATS:
                raise TouchstoneParseError(lineno, f"unknown format token {tokens[2]!r}")
            if r_tok != "R":
                raise TouchstoneParseError(lineno, f"expected 'R', got {tokens[3]!r}")
            try:
                z0 = float(z_tok)
            except ValueError:
                raise TouchstoneParseError(lineno, f"bad reference impedance {tokens[4]!r}") from None
            if not z0 > 0:
                raise TouchstoneParseError(lineno, "reference impedance must be > 0")
            unit, fmt = u, f_tok
            continue
        if fmt is None:
            raise TouchstoneParseError(lineno, "data row before the option line")
        fields = line.split()
        if len(fields) != 9:
            raise TouchstoneParseError(
                lineno, f"expected 9 numbers per row, got {len(fields)}"
            )
        try:
            nums = [float(tok) for tok in fields]
        except ValueError as exc:
            raise TouchstoneParseError(lineno, f"bad number: {exc}") from None
        if not all(math.isfinite(v) for v in nums):
            raise TouchstoneParseError(lineno, "non-finite number in data row")
        f_hz = nums[0] * FREQ_UNITS[unit]
        if freqs and f_hz <= freqs[-1]:
            raise TouchstoneParseError(
                lineno, f"frequency {f_hz:.6g} Hz not strictly increasing"
            )
        freqs.append(f_hz)
        s11.append(_pair_to_complex(nums[1], nums[2], fmt))
        s21.append(_pair_to_complex(nums[3], nums[4], fmt))
    if fmt is None:
        raise TouchstoneParseError(max(last_line, 1), "missing option line")
    if not freqs:
        raise TouchstoneParseError(max(last_line, 1), "no data rows")
    return FrequencyTrace(
        np.array(freqs), np.array(s21), np.array(s11), z0=z0, fmt=fmt, source=source
    )


def _complex_to_pair(v: complex, fmt: str) -> tuple[float, float]:
    if fmt == "RI":
        return v.real, v.imag
    mag = abs(v)
    ang = math.degrees(math.atan2(v.imag, v.real))
    if fmt == "MA":
        return mag, ang
    db = 20.0 * math.log10(mag) if mag > 0 else DB_FLOOR
    return max(db, DB_FLOOR), ang


def write_touchstone(trace: FrequencyTrace, fmt: str = "RI") -> bytes:
    """Serialize a trace as Touchstone v1.0, normalized to HZ frequencies.

    Values are written with 17 significant digits so a parse round trip
    reproduces the trace to working precision.  S12 mirrors S21 and S22
    mirrors S11 (reciprocal, symmetric network assumed).
    """
    fmt = fmt.upper()
    if fmt not in FORMATS:
        raise InvalidGeometryError(f"unknown Touchstone format {fmt!r}")
    lines = []
    if trace.s11 is None:
        lines.append("! s11 synthesized as zero")
        s11 = np.zeros_like(trace.s21)
    else:
        s11 = trace.s11
    lines.append(f"# HZ S {fmt} R {trace.z0:.17g}")
    for f_hz, v11, v21 in zip(trace.freqs, s11, trace.s21):
        cells = [f"{f_hz:.17g}"]
        for v in (v11, v21, v21, v11):  # v1 order: S11 S21 S12 S22
            a, b = _complex_to_pair(v, fmt)
            cells.append(f"{a:.17g}")
            cells.append(f"{b:.17g}")
        lines.append(" ".join(cells))
    return ("\n".join(lines) + "\n").encode("ascii")


def write_csv(trace: FrequencyTrace) -> str:
    """CSV export: freq_hz,s21_re,s21_im,s21_db with one row per point."""
    lines = ["freq_hz,s21_re,s21_im,s21_db"]
    for f_hz, v, db in zip(trace.freqs, trace.s21, trace.s21_db):
        lines.append(f"{f_hz:.17g},{v.real:.17g},{v.imag:.17g},{db:.17g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Resonance detection and Q extraction
# ---------------------------------------------------------------------------


def find_resonances(trace: FrequencyTrace, min_prominence_db: float = 3.0) -> list[int]:
    """Indices of |S21| (dB) local maxima with at least the given prominence.

    Prominence is the height above the higher of the two flanking
    minima; first/last samples never qualify.  Sorted by frequency.
    """
    if not min_prominence_db > 0:
        raise InvalidGeometryError("min_prominence_db must be > 0")
    peaks, _ = find_peaks(trace.s21_db, prominence=min_prominence_db)
    return [int(i) for i in peaks]


def _parabolic_vertex(f: np.ndarray, y: np.ndarray, i: int) -> tuple[float, float]:
    """Vertex of the parabola through points i-1, i, i+1 of (f, y)."""
    f0, f1, f2 = f[i - 1], f[i], f[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    d1, d2 = f1 - f0, f1 - f2
    num = d1**2 * (y1 - y2) - d2**2 * (y1 - y0)
    den = d1 * (y1 - y2) - d2 * (y1 - y0)
    if den == 0:
        return f1, y1
    fv = f1 - 0.5 * num / den
    # evaluate the parabola at its vertex via Lagrange form
    l0 = (fv - f1) * (fv - f2) / ((f0 - f1) * (f0 - f2))
    l1 = (fv - f0) * (fv - f2) / ((f1 - f0) * (f1 - f2))
    l2 = (fv - f0) * (fv - f1) / ((f2 - f0) * (f2 - f1))
    return fv, y0 * l0 + y1 * l1 + y2 * l2


def _crossing(
    f: np.ndarray, db: np.ndarray, peak: int, target: float, step: int
) -> float:
    """Frequency where db falls to target, walking from peak by step."""
    side = "left" if step < 0 else "right"
    j = peak
    while True:
        j += step
        if j < 0 or j >= len(db):
            raise InsufficientSpanError(side)
        if db[j] <= target:
            # linear interpolation in (f, dB) between j and the sample before it
            f_a, f_b = f[j - step], f[j]
            y_a, y_b = db[j - step], db[j]
            return f_a + (target - y_a) * (f_b - f_a) / (y_b - y_a)


def q_3db(trace: FrequencyTrace, peak_index: int) -> Resonance:
    """Half-power-bandwidth Q at a detected peak.

    Crossing frequencies are linearly interpolated in (f, dB); the peak
    frequency and level are refined by a parabola through the three dB
    samples around the maximum.
    """
    db = trace.s21_db
    f = trace.freqs
    i = peak_index
    if i <= 0 or i >= len(f) - 1:
        raise InsufficientSpanError("left" if i <= 0 else "right", "peak at trace edge")
    target = db[i] - HALF_POWER_DB
    f_lo = _crossing(f, db, i, target, -1)
    f_hi = _crossing(f, db, i, target, +1)
    f0, peak_db = _parabolic_vertex(f, db, i)
    q_loaded = f0 / (f_hi - f_lo)
    il = 10.0 ** (peak_db / 20.0)
    return Resonance.from_loaded(f0, q_loaded, il, method="three-db")


def _lorentzian_mag2(f: np.ndarray, f0: float, q: float, il: float) -> np.ndarray:
    u = (f - f0) / f0
    return il**2 / (1.0 + 4.0 * q**2 * u**2)


def fit_lorentzian(
    trace: FrequencyTrace, peak_index: int, window_bandwidths: float = 5.0
) -> Resonance:
    """Least-squares Lorentzian refinement of a resonance.

    Fits |S21|^2 = IL^2 / (1 + 4 Q^2 ((f - f0)/f0)^2) over a window of
    window_bandwidths 3-dB bandwidths centered on the peak, starting
    from the bandwidth-method estimate.  Levenberg-Marquardt on scaled
    parameters; stops when the relative parameter change drops below
    1e-10 or after 100 iterations.  Divergence raises FitFailureError
    carrying the bandwidth-method result as fallback (when available).
    """
    if window_bandwidths < 3:
        raise InvalidGeometryError("window_bandwidths must be >= 3")
    fallback = None
    f = trace.freqs
    try:
        fallback = q_3db(trace, peak_index)
        f0, q, il = fallback.f0, fallback.q_loaded, fallback.il_linear
    except (InsufficientSpanError, InvalidGeometryError):
        # crude starting point; the fit either rescues it or reports failure
        i = min(max(peak_index, 0), len(f) - 1)
        f0 = f[i]
        q = f0 / (f[-1] - f[0])
        il = min(float(np.max(np.abs(trace.s21))), 0.999)
        if il <= 0:
            raise FitFailureError("trace has no transmission to fit", None) from None

    half_span = 0.5 * window_bandwidths * f0 / q
    mask = (f >= f0 - half_span) & (f <= f0 + half_span)
    if mask.sum() < 4:
        raise FitFailureError("fewer than 4 samples in the fit window", fallback)
    fw = f[mask]
    y = np.abs(trace.s21[mask]) ** 2
    if np.max(y) - np.min(y) <= 1e-12 * np.max(y):
        raise FitFailureError("no curvature in the fit window", fallback)

    scale = np.array([f0, q, il])
    p = np.ones(3)
    lam = 1e-3

    def residuals(params: np.ndarray) -> np.ndarray:
        f0_, q_, il_ = params * scale
        return y - _lorentzian_mag2(fw, f0_, q_, il_)

    def gradient(params: np.ndarray) -> np.ndarray:
        # d(model)/d(params), columns scaled like the parameters
        f0_, q_, il_ = params * scale
        u = (fw - f0_) / f0_
        den = 1.0 + 4.0 * q_**2 * u**2
        d_f0 = il_**2 * 8.0 * q_**2 * u * fw / (f0_**2 * den**2)
        d_q = -(il_**2) * 8.0 * q_ * u**2 / den**2
        d_il = 2.0 * il_ / den
        return np.column_stack([d_f0 * scale[0], d_q * scale[1], d_il * scale[2]])

    r = residuals(p)
    cost = float(r @ r)
    for _ in range(100):
        jac = gradient(p)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        try:
            step = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj)), jtr)
        except np.linalg.LinAlgError:
            raise FitFailureError("singular normal equations", fallback) from None
        p_new = p + step
        if not np.all(np.isfinite(p_new)):
            raise FitFailureError("parameters diverged to non-finite values", fallback)
        r_new = residuals(p_new)
        cost_new = float(r_new @ r_new)
        if not math.isfinite(cost_new):
            raise FitFailureError("cost diverged to non-finite values", fallback)
        if cost_new <= cost:
            rel_change = float(np.max(np.abs(step) / np.maximum(np.abs(p_new), 1e-30)))
            p, r, cost = p_new, r_new, cost_new
            lam = max(lam / 4.0, 1e-12)
            if rel_change < 1e-10:
                break
        else:
            lam *= 8.0
            if lam > 1e12:
                raise FitFailureError("damping exploded without progress", fallback)

    f0_fit, q_fit, il_fit = p * scale
    if not (q_fit > 0 and f0_fit > 0 and 0 < il_fit < 1):
        raise FitFailureError(
            f"fit left the valid region (f0={f0_fit:.6g}, Q={q_fit:.6g}, IL={il_fit:.6g})",
            fallback,
        )
    return Resonance.from_loaded(f0_fit, q_fit, il_fit, method="lorentzian-fit")


def unload_q(q_loaded: float, il_linear: float) -> float:
    """Unloaded Q for symmetric two-port coupling: Q_L / (1 - IL)."""
    if not q_loaded > 0:
        raise InvalidGeometryError("q_loaded must be > 0")
    if il_linear < 0:
        raise InvalidGeometryError("il_linear must be >= 0")
    if il_linear >= 1:
        raise OverCoupledError(
            f"il_linear = {il_linear:.6g} >= 1; trace shows net gain, unloading undefined"
        )
    if il_linear > 0.9:
        warnings.warn(
            f"il_linear = {il_linear:.3g} is near critical coupling; "
            "unloaded Q is poorly conditioned",
            NearCriticalCouplingWarning,
            stacklevel=2,
        )
    return q_loaded / (1.0 - il_linear)


def pair_resonances(
    empty: list[Resonance],
    loaded: list[Resonance],
    guard_fraction: float = PAIRING_GUARD,
) -> list[tuple[Resonance, Resonance]]:
    """Nearest-frequency pairing of empty/loaded resonances.

    Each loaded resonance is matched to the closest empty one within
    the +-guard_fraction band; every resonance is used at most once.
    Raises NoPairableResonanceError when nothing pairs.
    """
    pairs: list[tuple[Resonance, Resonance]] = []
    remaining = list(loaded)
    for e in sorted(empty, key=lambda r: r.f0):
        if not remaining:
            break
        best = min(remaining, key=lambda r: abs(r.f0 - e.f0))
        if abs(best.f0 - e.f0) <= guard_fraction * e.f0:
            pairs.append((e, best))
            remaining.remove(best)
    if not pairs:
        raise NoPairableResonanceError(
            f"no loaded resonance within {guard_fraction:.0%} of an empty one"
        )
    return pairs
