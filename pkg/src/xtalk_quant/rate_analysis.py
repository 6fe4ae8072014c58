"""Exact per-tone and band transmission rates, losses, and relative losses.

With the equivalent channel D (I + Delta), user i at tone f sees

    rate      R_i(f)  = log2(1 + SNR_i(f) / Gamma)
    loss      L_i(f)  = -log2(1 - k_i (1 - q_i))

where, writing eSNR = SNR/Gamma,

    a_i = sum_{j != i} (P_j / P_i) |Delta_ij|^2 * SNR_i      (gap-independent)
    q_i = |1 + Delta_ii|^2 / (a_i + 1)
    k_i = eSNR_i / (eSNR_i + 1).

The loss is evaluated through the algebraically identical form
log2(1 + eSNR) - log2(1 + eSNR * q), which avoids the cancellation in
1 - k at high SNR; both ``a`` and ``q`` are reported as defined.
Band quantities are rectangle-rule sums (each tone owns one bin of width
``grid.spacing``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel_model import ChannelEnsemble, ChannelSnapshot, ToneGrid
from .errors import InvalidBudget, NumericalError, RelativeLossUndefined
from .units import LN2, db_to_linear


@dataclass(frozen=True)
class LinkBudget:
    """Per-user transmit PSD, noise PSD, and Shannon gap over a tone grid.

    PSDs are in dBm/Hz; ``psd_dbm_hz`` may be one value (equal PSDs) or one
    per user.  Only PSD/noise *ratios* enter any formula.
    """

    psd_dbm_hz: float | Sequence[float]
    noise_dbm_hz: float
    gamma_db: float
    grid: ToneGrid

    def __post_init__(self):
        psd = np.atleast_1d(np.asarray(self.psd_dbm_hz, dtype=float))
        if psd.ndim != 1 or not np.all(np.isfinite(psd)):
            raise InvalidBudget("per-user PSD must be a finite scalar or 1-D list")
        if not np.isfinite(self.noise_dbm_hz):
            raise InvalidBudget("noise PSD must be finite")
        if not np.isfinite(self.gamma_db) or self.gamma_db < 0:
            raise InvalidBudget("Shannon gap must be finite and >= 0 dB")

    @property
    def gap(self) -> float:
        return float(db_to_linear(self.gamma_db))

    def psd_linear(self, p: int) -> np.ndarray:
        psd = np.atleast_1d(np.asarray(self.psd_dbm_hz, dtype=float))
        if psd.size == 1:
            psd = np.full(p, psd[0])
        if psd.size != p:
            raise InvalidBudget(f"{psd.size} PSD entries for {p} users")
        return db_to_linear(psd)

    def noise_linear(self) -> float:
        return float(db_to_linear(self.noise_dbm_hz))

    def snr(self, snapshot: ChannelSnapshot) -> np.ndarray:
        """Raw (gap-free) linear SNR_i = P_i |d_ii|^2 / noise, per user."""
        p_lin = self.psd_linear(snapshot.p)
        return p_lin * np.abs(snapshot.D) ** 2 / self.noise_linear()

    def snr_matrix(self, ensemble: ChannelEnsemble) -> np.ndarray:
        """(p, tones) raw SNR array."""
        return np.stack([self.snr(s) for s in ensemble.snapshots], axis=1)

    def psd_ratio_max(self, p: int) -> float:
        """max_i max_{j != i} P_j / P_i (1 under equal PSDs)."""
        p_lin = self.psd_linear(p)
        order = np.sort(p_lin)
        # the victim with the smallest PSD sees the largest ratio
        return float(order[-1] / order[0]) if p > 1 else 1.0

    def psd_dynamic_range(self, p: int) -> float:
        """P_max / P_min over users with nonzero PSD (the SPSD(rho) width)."""
        p_lin = self.psd_linear(p)
        return float(p_lin.max() / p_lin.min())


@dataclass(frozen=True)
class ToneLoss:
    """Exact per-tone loss record for one user."""

    freq: float
    user: int
    rate: float
    rate_perturbed: float
    loss: float
    a: float
    q: float
    k: float
    delta_norm: float


@dataclass(frozen=True)
class BandLoss:
    user: int
    rate: float          # bits/s
    loss: float          # bits/s
    eta: float           # loss / rate


@dataclass
class LossReport:
    """Per-tone and band losses for every user of an ensemble."""

    grid: ToneGrid
    rate: np.ndarray            # (p, tones) bits/s/Hz
    loss: np.ndarray            # (p, tones) bits/s/Hz
    a: np.ndarray
    q: np.ndarray
    k: np.ndarray
    band: list = field(default_factory=list)

    @property
    def rate_perturbed(self) -> np.ndarray:
        return self.rate - self.loss


def rate_ideal(budget: LinkBudget, snapshot: ChannelSnapshot, user: int) -> float:
    """Crosstalk-free rate log2(1 + SNR_i/Gamma) in bits/s/Hz."""
    snr = budget.snr(snapshot)[user]
    return float(np.log1p(snr / budget.gap) / LN2)


def loss_arrays(
    snr: np.ndarray, gap: float, psd_lin: np.ndarray, delta: np.ndarray
) -> dict:
    """Vectorized exact-loss kernel.

    ``delta`` has shape (..., p, p); returns arrays of shape (..., p) for
    loss, rate, a, q, k plus the gap-weighted interference delta_norm.
    """
    esnr = snr / gap
    ad2 = delta.real**2 + delta.imag**2
    tot = ad2 @ psd_lin
    dii = np.diagonal(delta, axis1=-2, axis2=-1)
    own = psd_lin * (dii.real**2 + dii.imag**2)
    cross = np.maximum(tot - own, 0.0) / psd_lin
    a = cross * snr
    one_plus = 1.0 + dii
    q = (one_plus.real**2 + one_plus.imag**2) / (a + 1.0)
    k = esnr / (esnr + 1.0)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(q))):
        raise NumericalError("non-finite interference statistics")
    rate = np.log1p(esnr) / LN2
    loss = rate - np.log1p(esnr * q) / LN2
    return {
        "loss": loss,
        "rate": rate,
        "a": a,
        "q": q,
        "k": k,
        "delta_norm": gap * cross,
    }


def loss_exact(
    budget: LinkBudget, snapshot: ChannelSnapshot, delta: np.ndarray, user: int
) -> ToneLoss:
    """Exact rate loss of one user at one tone; negative values (gains) kept."""
    delta = np.asarray(delta, dtype=complex)
    if not np.all(np.isfinite(delta.view(float))):
        raise InvalidBudget("Delta must be finite")
    out = loss_arrays(budget.snr(snapshot), budget.gap, budget.psd_linear(snapshot.p), delta)
    return ToneLoss(
        freq=snapshot.freq,
        user=user,
        rate=float(out["rate"][user]),
        rate_perturbed=float(out["rate"][user] - out["loss"][user]),
        loss=float(out["loss"][user]),
        a=float(out["a"][user]),
        q=float(out["q"][user]),
        k=float(out["k"][user]),
        delta_norm=float(out["delta_norm"][user]),
    )


def loss_band(
    budget: LinkBudget,
    ensemble: ChannelEnsemble,
    deltas: Sequence[np.ndarray],
    user: int,
) -> BandLoss:
    """Rectangle-rule band rate/loss for one user; eta = loss / rate."""
    report = build_report(budget, ensemble, deltas)
    return band_row(report, user)


def band_row(report: LossReport, user: int) -> BandLoss:
    spacing = report.grid.spacing
    rate = float(report.rate[user].sum() * spacing)
    loss = float(report.loss[user].sum() * spacing)
    if rate == 0.0:
        raise RelativeLossUndefined(
            f"user {user} has zero ideal band rate (absolute loss {loss} bits/s)",
            absolute_loss=loss,
        )
    return BandLoss(user=user, rate=rate, loss=loss, eta=loss / rate)


def build_report(
    budget: LinkBudget, ensemble: ChannelEnsemble, deltas: Sequence[np.ndarray]
) -> LossReport:
    """Exact losses for all users over all tones of the ensemble."""
    if len(deltas) != ensemble.grid.count:
        raise InvalidBudget(
            f"{len(deltas)} Delta matrices for {ensemble.grid.count} tones"
        )
    p = ensemble.p
    n = ensemble.grid.count
    rate = np.empty((p, n))
    loss = np.empty((p, n))
    a = np.empty((p, n))
    q = np.empty((p, n))
    kk = np.empty((p, n))
    psd_lin = budget.psd_linear(p)
    for k, snap in enumerate(ensemble.snapshots):
        out = loss_arrays(budget.snr(snap), budget.gap, psd_lin, np.asarray(deltas[k]))
        rate[:, k] = out["rate"]
        loss[:, k] = out["loss"]
        a[:, k] = out["a"]
        q[:, k] = out["q"]
        kk[:, k] = out["k"]
    report = LossReport(grid=ensemble.grid, rate=rate, loss=loss, a=a, q=q, k=kk)
    for user in range(p):
        try:
            report.band.append(band_row(report, user))
        except RelativeLossUndefined:
            report.band.append(
                BandLoss(user=user, rate=0.0, loss=float(loss[user].sum() * ensemble.grid.spacing), eta=float("nan"))
            )
    return report
