"""Ideal diagonalizing precoder, word-length quantization, and the equivalent
channel perturbation.

The zero-forcing precoder is P = (I + D^{-1}F)^{-1} = H^{-1} D, which turns
the precoded channel into pure per-user direct gains.  A perturbed precoder

    P~ = (I + D^{-1}F + E1)^{-1} + E2

(E1: channel estimation error, E2: precoder quantization error) yields an
equivalent channel D (I + Delta) with

    Delta = (I + D^{-1}F) E2 - E1 (I + D^{-1}F + E1)^{-1}.

Everything here is pure and per tone; batching over tones or trials lives in
:mod:`xtalk_quant.monte_carlo`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel_model import ChannelSnapshot
from .errors import InvalidParams, NumericalError, RangeError, SingularChannel
from .units import SQRT2

COND_LIMIT = 1e12
IDENTITY_CHECK_TOL = 1e-10

E2_DETERMINISTIC = "deterministic_rounding"
E2_UNIFORM = "uniform_random"

_E2_STREAM = 2
_E1_STREAM = 3


@dataclass(frozen=True)
class PerturbationSpec:
    """Word length and error models for one experiment.

    ``d_bits`` counts mantissa bits per real/imaginary component (sign
    excluded); ``e1_samples`` is the channel-estimation sample count (None for
    perfect channel knowledge).
    """

    d_bits: int
    e2_model: str = E2_DETERMINISTIC
    e1_samples: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.d_bits < 1:
            raise InvalidParams("d_bits must be >= 1")
        if self.e2_model not in (E2_DETERMINISTIC, E2_UNIFORM):
            raise InvalidParams(f"unknown e2 model {self.e2_model!r}")
        if self.e1_samples is not None and self.e1_samples < 1:
            raise InvalidParams("e1_samples must be >= 1 when set")

    @property
    def step(self) -> float:
        return 2.0 ** (-self.d_bits)


@dataclass(frozen=True)
class QuantizedPrecoder:
    p_quantized: np.ndarray
    e2: np.ndarray
    scale: float = 1.0


@dataclass(frozen=True)
class PrecoderBundle:
    p_ideal: np.ndarray
    p_perturbed: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    delta: np.ndarray
    scale: float = 1.0


def ideal_precoder(snapshot: ChannelSnapshot, cond_limit: float = COND_LIMIT) -> np.ndarray:
    """Solve H P = diag(D) with one refinement step; refuse ill-conditioned tones."""
    H = snapshot.H
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularChannel(
            f"channel condition estimate {cond:.3e} exceeds {cond_limit:.1e} "
            f"at f={snapshot.freq} Hz",
            freq=snapshot.freq,
        )
    rhs = np.diag(snapshot.D)
    P = np.linalg.solve(H, rhs)
    P += np.linalg.solve(H, rhs - H @ P)
    return P


def uniform_error_matrix(p: int, d_bits: int, rng: np.random.Generator) -> np.ndarray:
    """E2 with i.i.d. real/imag components uniform on [-2^-d, 2^-d]."""
    q = 2.0 ** (-d_bits)
    return q * (
        rng.uniform(-1.0, 1.0, size=(p, p)) + 1j * rng.uniform(-1.0, 1.0, size=(p, p))
    )


def _power_of_two_scale(P: np.ndarray) -> float:
    m = max(np.max(np.abs(P.real)), np.max(np.abs(P.imag)), 1.0)
    return float(2.0 ** math.ceil(math.log2(m))) if m > 1.0 else 1.0


def quantize_precoder(
    P: np.ndarray, spec: PerturbationSpec, normalize: bool = False, stream_key: int = 0
) -> QuantizedPrecoder:
    """Represent each real/imag component with ``d_bits`` fractional bits.

    Deterministic rounding maps each component to the nearest multiple of
    2^-d (error <= 2^-d-1); the uniform model adds i.i.d. errors on
    [-2^-d, 2^-d].  Entries must lie in the unit box; with ``normalize`` the
    matrix is pre-divided by a power-of-two block scale instead (the reported
    ``e2`` is the error of the *deployed* precoder, i.e. already rescaled).
    Callers quantizing many matrices under one seed pass a distinct
    ``stream_key`` (e.g. the tone index) per matrix.
    """
    P = np.asarray(P, dtype=complex)
    scale = 1.0
    work = P
    box = max(np.max(np.abs(P.real)), np.max(np.abs(P.imag)))
    if box > 1.0:
        if not normalize:
            raise RangeError(
                f"precoder entry magnitude {box:.6f} outside the unit box; "
                "pass normalize=True to apply block scaling"
            )
        scale = _power_of_two_scale(P)
        work = P / scale

    if spec.e2_model == E2_DETERMINISTIC:
        s = 2.0**spec.d_bits
        pq = (np.round(work.real * s) + 1j * np.round(work.imag * s)) / s
    else:
        rng = np.random.Generator(
            np.random.Philox(
                np.random.SeedSequence(entropy=spec.seed, spawn_key=(_E2_STREAM, stream_key))
            )
        )
        pq = work + uniform_error_matrix(P.shape[0], spec.d_bits, rng)

    pq = pq * scale
    return QuantizedPrecoder(p_quantized=pq, e2=pq - P, scale=scale)


def build_delta(
    snapshot: ChannelSnapshot,
    e1: np.ndarray | None,
    e2: np.ndarray,
    check_tol: float = IDENTITY_CHECK_TOL,
) -> np.ndarray:
    """Equivalent-channel perturbation for given error matrices.

    Also re-derives H P~ = D (I + Delta) from scratch and fails loudly if the
    identity does not hold to ``check_tol`` (relative to max |d_ii|).
    """
    Q = snapshot.q_matrix()
    p = snapshot.p
    e2 = np.asarray(e2, dtype=complex)
    if e1 is None or not np.any(e1):
        delta = Q @ e2
        p_perturbed = _solve_matrix(Q, np.eye(p), snapshot.freq) + e2
    else:
        e1 = np.asarray(e1, dtype=complex)
        m = Q + e1
        m_inv = _solve_matrix(m, np.eye(p), snapshot.freq)
        delta = Q @ e2 - e1 @ m_inv
        p_perturbed = m_inv + e2

    lhs = snapshot.H @ p_perturbed
    rhs = snapshot.D[:, None] * (np.eye(p) + delta)
    err = np.max(np.abs(lhs - rhs)) / np.max(np.abs(snapshot.D))
    if not err < check_tol:
        raise NumericalError(
            f"equivalent-channel identity violated: residual {err:.3e} at "
            f"f={snapshot.freq} Hz"
        )
    return delta


def _solve_matrix(m: np.ndarray, rhs: np.ndarray, freq: float) -> np.ndarray:
    try:
        out = np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularChannel(f"singular system at f={freq} Hz", freq=freq) from exc
    if not np.all(np.isfinite(out.view(float))):
        raise SingularChannel(f"non-finite solve at f={freq} Hz", freq=freq)
    return out


def delta_entry_bound(snapshot: ChannelSnapshot, d_bits: int) -> float:
    """2^(-d+1/2) (1 + r): entrywise ceiling on Delta under quantization only."""
    return SQRT2 * 2.0 ** (-d_bits) * (1.0 + snapshot.r)


def gaussian_csi_error(
    snr_per_user: np.ndarray, n_samples: int, rng: np.random.Generator
) -> np.ndarray:
    """E1 with row-i entries complex Gaussian, variance 1/(n_samples*SNR_i)."""
    p = snr_per_user.shape[0]
    sigma = np.sqrt(1.0 / (n_samples * snr_per_user))[:, None]
    z = rng.standard_normal((p, p)) + 1j * rng.standard_normal((p, p))
    return sigma * z / SQRT2


def make_bundle(
    snapshot: ChannelSnapshot,
    spec: PerturbationSpec,
    snr_per_user: np.ndarray | None = None,
    normalize: bool = False,
    stream_key: int = 0,
) -> PrecoderBundle:
    """Ideal precoder, its perturbation per ``spec``, and the resulting Delta.

    With an estimation-error model the quantizer acts on the *estimated*
    precoder (I + D^{-1}F + E1)^{-1}, matching the additive error split.
    ``stream_key`` decorrelates random draws across tones under one seed.
    """
    p_ideal = ideal_precoder(snapshot)
    if spec.e1_samples is not None:
        if snr_per_user is None:
            raise InvalidParams("snr_per_user required for the estimation-error model")
        rng = np.random.Generator(
            np.random.Philox(
                np.random.SeedSequence(entropy=spec.seed, spawn_key=(_E1_STREAM, stream_key))
            )
        )
        e1 = gaussian_csi_error(snr_per_user, spec.e1_samples, rng)
        p_estimated = _solve_matrix(
            snapshot.q_matrix() + e1, np.eye(snapshot.p), snapshot.freq
        )
    else:
        e1 = np.zeros_like(p_ideal)
        p_estimated = p_ideal

    quant = quantize_precoder(p_estimated, spec, normalize=normalize, stream_key=stream_key)
    delta = build_delta(snapshot, e1 if np.any(e1) else None, quant.e2)
    return PrecoderBundle(
        p_ideal=p_ideal,
        p_perturbed=quant.p_quantized,
        e1=e1,
        e2=quant.e2,
        delta=delta,
        scale=quant.scale,
    )
