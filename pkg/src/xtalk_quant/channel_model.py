"""Werner-model channel synthesis, measured-channel loading, and parameter fits.

A vectored binder of ``p`` twisted pairs is described per tone by a complex
``p x p`` matrix ``H(f)``.  The direct paths sit on the diagonal ``D``, the
far-end crosstalk (FEXT) on the off-diagonal part ``F = H - diag(D)``.  The
synthetic model used throughout:

    |H_ii(f)|   = exp(-alpha * ell * sqrt(f))            (insertion loss, amplitude)
    |H_ij(f)|^2 = K_ij * f^2 * exp(-2 * alpha * ell * sqrt(f))   (FEXT power)

with one log-normal coupling gain ``K_ij`` drawn per ordered pair and reused
across the whole band (the coupling is frequency-flat; only the ``f^2`` ramp
and the insertion loss shape the spectrum).

Note the squared-magnitude (and hence SNR) decay constant is *twice* the
amplitude aggregate ``alpha * ell``.  Both parameterizations are exposed;
closed-form bound helpers in :mod:`xtalk_quant.analytic_bounds` expect the
SNR decay constant.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DominanceViolation,
    InsufficientData,
    InvalidParams,
    ParseError,
    SingularDiagonal,
)

DMT_SPACING_HZ = 4312.5

# Calibrated so that a 10-pair, 300 m binder has r(H) near the measured-line
# row-dominance trend at the top of a 0-30 MHz band (see calibrate_k_mean_slope).
DEFAULT_K_MEAN_SLOPE = 4.5e-20
DEFAULT_K_SIGMA_LOG = 1.0

CHANNEL_FORMAT_VERSION = 1

_K_STREAM = 0
_PHASE_STREAM = 1


def _stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator: child streams keyed by position, not call order."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=key))
    )


@dataclass(frozen=True)
class ToneGrid:
    """Uniform frequency grid; tone k sits at ``f_start + k * spacing``."""

    f_start: float
    f_end: float
    spacing: float

    def __post_init__(self):
        if not (
            math.isfinite(self.f_start)
            and math.isfinite(self.f_end)
            and math.isfinite(self.spacing)
        ):
            raise InvalidParams("tone grid fields must be finite")
        if self.f_start < 0 or self.f_end <= self.f_start or self.spacing <= 0:
            raise InvalidParams(
                f"bad tone grid: f_start={self.f_start}, f_end={self.f_end}, "
                f"spacing={self.spacing}"
            )

    @property
    def count(self) -> int:
        return int(math.floor((self.f_end - self.f_start) / self.spacing)) + 1

    def freq(self, k: int) -> float:
        return self.f_start + k * self.spacing

    @property
    def freqs(self) -> np.ndarray:
        return self.f_start + np.arange(self.count) * self.spacing

    @property
    def bandwidth(self) -> float:
        """Rectangle-rule measure of the band: every tone owns one bin."""
        return self.count * self.spacing

    @classmethod
    def vdsl_band(cls, decimation: int = 1, f_end: float = 30e6) -> "ToneGrid":
        """0..f_end grid at the standard DMT spacing, optionally decimated."""
        if decimation < 1:
            raise InvalidParams("decimation must be >= 1")
        return cls(0.0, f_end, DMT_SPACING_HZ * decimation)

    @classmethod
    def single_tone(cls, freq: float) -> "ToneGrid":
        return cls(freq, freq + 0.5, 1.0)


@dataclass(frozen=True)
class WernerParams:
    """Cable/binder parameters of the synthetic channel model.

    ``alpha`` is the per-meter attenuation constant; only the aggregate
    ``alpha * loop_length_m`` enters the matrices, so a fitted aggregate can be
    carried with ``loop_length_m=1``.
    """

    alpha: float
    loop_length_m: float
    p: int
    k_mean_slope: float = DEFAULT_K_MEAN_SLOPE
    k_sigma_log: float = DEFAULT_K_SIGMA_LOG

    def __post_init__(self):
        vals = (self.alpha, self.loop_length_m, self.k_mean_slope, self.k_sigma_log)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParams("non-finite Werner parameter")
        if self.alpha <= 0 or self.loop_length_m <= 0:
            raise InvalidParams("alpha and loop_length_m must be positive")
        if self.p < 2:
            raise InvalidParams("need at least two pairs")
        if self.k_mean_slope <= 0 or self.k_sigma_log < 0:
            raise InvalidParams("bad coupling-gain distribution parameters")

    @property
    def aggregate(self) -> float:
        """Amplitude attenuation aggregate alpha * ell (per sqrt-Hz)."""
        return self.alpha * self.loop_length_m

    @property
    def snr_decay(self) -> float:
        """Decay constant of |H_ii|^2 (and hence of the SNR profile)."""
        return 2.0 * self.aggregate


@dataclass(frozen=True)
class RowDominanceFit:
    """Least-squares line r(f) ~ gamma1 + gamma2 * f with its worst residual."""

    gamma1: float
    gamma2: float
    max_residual: float = 0.0

    def value(self, freq):
        return self.gamma1 + self.gamma2 * np.asarray(freq, dtype=float)


def row_dominance(h: np.ndarray) -> float:
    """max_i sum_{j != i} |h_ij| / |h_ii| (Gersgorin-style dominance measure)."""
    a = np.abs(np.asarray(h))
    diag = np.diagonal(a)
    if np.any(diag == 0.0):
        raise SingularDiagonal("zero diagonal entry")
    off = a.sum(axis=1) - diag
    return float(np.max(off / diag))


@dataclass(frozen=True)
class ChannelSnapshot:
    """One tone: H plus its diagonal/off-diagonal split and dominance value."""

    freq: float
    H: np.ndarray
    D: np.ndarray
    F: np.ndarray
    r: float

    @classmethod
    def from_matrix(cls, freq: float, H: np.ndarray, tone: int = -1) -> "ChannelSnapshot":
        H = np.asarray(H, dtype=complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise InvalidParams(f"channel matrix must be square, got {H.shape}")
        if not np.all(np.isfinite(H.view(float))):
            raise InvalidParams("non-finite channel entry")
        D = np.diagonal(H).copy()
        if np.any(D == 0.0):
            raise SingularDiagonal(
                f"zero diagonal entry at tone {tone} (f={freq} Hz)", tone=tone
            )
        F = H.copy()
        np.fill_diagonal(F, 0.0)
        return cls(freq=freq, H=H, D=D, F=F, r=row_dominance(H))

    @property
    def p(self) -> int:
        return self.H.shape[0]

    def q_matrix(self) -> np.ndarray:
        """I + D^{-1} F, the row-normalized channel."""
        return np.eye(self.p) + self.F / self.D[:, None]


@dataclass(frozen=True)
class ChannelEnsemble:
    """Per-tone snapshots over a grid, plus provenance."""

    grid: ToneGrid
    snapshots: tuple
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.snapshots) != self.grid.count:
            raise InvalidParams(
                f"{len(self.snapshots)} snapshots for a {self.grid.count}-tone grid"
            )

    @property
    def p(self) -> int:
        return self.snapshots[0].p

    @property
    def freqs(self) -> np.ndarray:
        return self.grid.freqs

    @property
    def r_values(self) -> np.ndarray:
        return np.array([s.r for s in self.snapshots])

    @property
    def r_max(self) -> float:
        return float(np.max(self.r_values))

    def diag_matrix(self) -> np.ndarray:
        """(p, tones) array of direct-path gains d_ii(f)."""
        return np.stack([s.D for s in self.snapshots], axis=1)


def synthesize_channel(
    params: WernerParams,
    grid: ToneGrid,
    seed: int,
    phases: str = "uniform",
    dominance_ceiling: float | None = None,
    fail_on_dominance: bool = True,
) -> ChannelEnsemble:
    """Draw a binder realization and evaluate it on every tone of the grid.

    The coupling gains K_ij are drawn once (frequency-flat) from a log-normal
    with mean ``k_mean_slope * loop_length_m``; phases are drawn per entry per
    tone (``phases="uniform"``) or fixed to zero (``phases="zero"``).
    Deterministic for a fixed seed and independent of evaluation order.
    """
    if phases not in ("uniform", "zero"):
        raise InvalidParams(f"unknown phase mode {phases!r}")
    p = params.p
    sigma = params.k_sigma_log
    mean_k = params.k_mean_slope * params.loop_length_m
    mu = math.log(mean_k) - 0.5 * sigma * sigma
    k_gain = _stream(seed, _K_STREAM).lognormal(mu, sigma, size=(p, p))
    sqrt_k = np.sqrt(k_gain)
    agg = params.aggregate

    snapshots = []
    for k, f in enumerate(grid.freqs):
        il = math.exp(-agg * math.sqrt(f))
        mag = sqrt_k * (f * il)
        np.fill_diagonal(mag, il)
        if phases == "zero":
            H = mag.astype(complex)
        else:
            ph = _stream(seed, _PHASE_STREAM, k).uniform(0.0, 2.0 * math.pi, size=(p, p))
            H = mag * np.exp(1j * ph)
        snap = ChannelSnapshot.from_matrix(f, H, tone=k)
        if dominance_ceiling is not None and snap.r > dominance_ceiling:
            msg = (
                f"r(H)={snap.r:.4f} exceeds ceiling {dominance_ceiling} "
                f"at tone {k} (f={f:.0f} Hz)"
            )
            if fail_on_dominance:
                raise DominanceViolation(msg)
            warnings.warn(msg)
        snapshots.append(snap)

    source = {
        "kind": "synthesized",
        "seed": int(seed),
        "phases": phases,
        "alpha": params.alpha,
        "loop_length_m": params.loop_length_m,
        "p": p,
        "k_mean_slope": params.k_mean_slope,
        "k_sigma_log": params.k_sigma_log,
    }
    return ChannelEnsemble(grid=grid, snapshots=tuple(snapshots), source=source)


def calibrate_k_mean_slope(
    p: int,
    loop_length_m: float,
    k_sigma_log: float,
    target_r: float,
    f_ref: float,
) -> float:
    """Coupling-gain slope that puts the expected r(H(f_ref)) near target_r.

    For this model r(f) = f * max_i sum_{j!=i} sqrt(K_ij), so the calibration
    reduces to moments of the log-normal; the max over rows is approximated by
    mean + c * std with c = 1.539 (expected max of ten standard normals).
    """
    if target_r <= 0 or f_ref <= 0:
        raise InvalidParams("target_r and f_ref must be positive")
    s2 = k_sigma_log * k_sigma_log
    # E sqrt(K) = sqrt(mean_K) * exp(-s2/8); Var sqrt(K) = mean_K (1 - exp(-s2/4))
    mean_term = (p - 1) * math.exp(-s2 / 8.0)
    std_term = 1.539 * math.sqrt((p - 1) * (1.0 - math.exp(-s2 / 4.0)))
    sqrt_mean_k = (target_r / f_ref) / (mean_term + std_term)
    return sqrt_mean_k * sqrt_mean_k / loop_length_m


def fit_row_dominance(ensemble: ChannelEnsemble) -> RowDominanceFit:
    """Least-squares line through the (f, r(H(f))) points of the ensemble."""
    f = ensemble.freqs
    if f.size < 2:
        raise InsufficientData("need at least two tones to fit a line")
    r = ensemble.r_values
    design = np.column_stack([np.ones_like(f), f])
    coef, *_ = np.linalg.lstsq(design, r, rcond=None)
    resid = r - design @ coef
    return RowDominanceFit(
        gamma1=float(coef[0]),
        gamma2=float(coef[1]),
        max_residual=float(np.max(np.abs(resid))),
    )


def fit_alpha(ensemble: ChannelEnsemble) -> float:
    """Aggregate attenuation alpha*ell from -ln|H_ii(f)| ~ slope * sqrt(f).

    Pooled over users and tones, slope-only (the model has no intercept).
    """
    mags = np.abs(ensemble.diag_matrix())
    if np.any(mags == 0.0):
        raise SingularDiagonal("zero diagonal magnitude")
    if np.any(mags > 1.0 + 1e-12):
        raise InvalidParams("diagonal magnitudes must lie in (0, 1]")
    x = np.sqrt(ensemble.freqs)
    y = -np.log(mags)  # (p, tones)
    sxx = float(mags.shape[0] * np.dot(x, x))
    if sxx == 0.0:
        raise InsufficientData("all tones at f=0; slope is unidentifiable")
    sxy = float(np.dot(y.sum(axis=0), x))
    return sxy / sxx


def save_channel(ensemble: ChannelEnsemble, path) -> None:
    """Write the documented JSON channel format (lossless for float64)."""
    save_matrix_set(path, ensemble.grid, [s.H for s in ensemble.snapshots])


def save_matrix_set(path, grid: ToneGrid, matrices: Sequence[np.ndarray]) -> None:
    """Write any per-tone p x p matrix collection in the channel-file grammar.

    Used e.g. to export computed precoders; ``load_channel`` reads the result
    back (its nonzero-diagonal check holds for any sane precoder).
    """
    if len(matrices) != grid.count:
        raise InvalidParams(f"{len(matrices)} matrices for a {grid.count}-tone grid")
    p = int(np.asarray(matrices[0]).shape[0])
    tones = []
    for m in matrices:
        flat = np.asarray(m, dtype=complex).reshape(-1)
        if flat.size != p * p:
            raise InvalidParams("inconsistent matrix sizes in set")
        tones.append([[float(z.real), float(z.imag)] for z in flat])
    doc = {
        "format_version": CHANNEL_FORMAT_VERSION,
        "kind": "xtalk-quant-channel",
        "p": p,
        "tone_count": grid.count,
        "f_start": grid.f_start,
        "spacing": grid.spacing,
        "tones": tones,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_channel(path) -> ChannelEnsemble:
    """Parse a channel file; errors carry the offending tone index."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}") from exc

    for key in ("format_version", "p", "tone_count", "f_start", "spacing", "tones"):
        if key not in doc:
            raise ParseError(f"missing header field {key!r}")
    if doc["format_version"] != CHANNEL_FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {doc['format_version']!r}")
    p = int(doc["p"])
    n = int(doc["tone_count"])
    if p < 1 or n < 1:
        raise ParseError("p and tone_count must be positive")
    if len(doc["tones"]) != n:
        raise ParseError(
            f"tone_count={n} but {len(doc['tones'])} tone records present"
        )
    f_start = float(doc["f_start"])
    spacing = float(doc["spacing"])
    grid = ToneGrid(f_start, f_start + (n - 1) * spacing + 0.5 * spacing, spacing)
    if grid.count != n:
        raise ParseError("grid reconstruction mismatch")

    snapshots = []
    for k, rec in enumerate(doc["tones"]):
        if len(rec) != p * p:
            raise ParseError(
                f"tone {k}: expected {p * p} entries, got {len(rec)}", tone=k
            )
        try:
            flat = np.array([complex(re, im) for re, im in rec])
        except (TypeError, ValueError) as exc:
            raise ParseError(f"tone {k}: malformed [re, im] pair", tone=k) from exc
        snapshots.append(ChannelSnapshot.from_matrix(grid.freq(k), flat.reshape(p, p), tone=k))
    return ChannelEnsemble(
        grid=grid, snapshots=tuple(snapshots), source={"kind": "loaded", "path": str(path)}
    )
