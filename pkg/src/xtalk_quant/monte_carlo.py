"""Randomized quantization-error trials and worst-case loss extraction.

Per tone, ``n_trials`` error matrices E2 are drawn with i.i.d. real/imag
components uniform on [-2^-d, 2^-d] (so complex entries stay within the
2^(-d+1/2) disk), the exact per-user loss is evaluated for each draw, and a
statistic (worst case, mean, or a quantile) is reduced per (user, tone).

Band figures come in two flavors:

* ``band_per_bin``: integrate the per-bin statistic (worst case per bin, then
  rectangle-rule sum) - the "maximal loss" convention;
* ``band_joint``: per-trial band integral first, statistic across trials.

Randomness is counter-based: each (purpose, tone) pair owns a Philox stream
keyed by the seed, so results do not depend on evaluation order or thread
count, and the uniform base variates for a given seed are *identical across
word lengths* (scaling by 2^-d happens after the draw).  That gives common
random numbers for free, which keeps the empirical worst case monotone in d.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel_model import ChannelEnsemble
from .errors import InvalidParams, SingularChannel, TargetUnreachable
from .precoding import PerturbationSpec
from .rate_analysis import LinkBudget, loss_arrays
from .units import SQRT2

_MC_E2_STREAM = 10
_MC_E1_STREAM = 11

WORST_CASE = "worst_case"
MEAN = "mean"
QUANTILE = "quantile"


@dataclass(frozen=True)
class TrialConfig:
    """How many draws, which error spec, which statistic."""

    n_trials: int
    spec: PerturbationSpec
    users: tuple | None = None
    statistic: str = WORST_CASE
    quantile_q: float | None = None
    zero_errors: bool = False

    def __post_init__(self):
        if self.n_trials < 1:
            raise InvalidParams("n_trials must be >= 1")
        if self.statistic not in (WORST_CASE, MEAN, QUANTILE):
            raise InvalidParams(f"unknown statistic {self.statistic!r}")
        if self.statistic == QUANTILE:
            if self.quantile_q is None or not 0.0 < self.quantile_q < 1.0:
                raise InvalidParams("quantile statistic needs q in (0, 1)")


@dataclass(frozen=True)
class CsiErrorModel:
    """Channel-estimation error: row-i entries of E1 are zero-mean complex
    Gaussian with variance 1/(n_samples * SNR_i(f))."""

    n_samples: int

    def __post_init__(self):
        if self.n_samples < 1:
            raise InvalidParams("n_samples must be >= 1")


@dataclass
class TrialReport:
    """Reduced losses; arrays are (users, tones) or (users,)."""

    d_bits: int
    statistic: str
    n_trials: int
    seed: int
    freqs: np.ndarray
    users: np.ndarray
    per_tone: np.ndarray
    rate_per_tone: np.ndarray
    band_per_bin: np.ndarray
    band_joint: np.ndarray
    band_rate: np.ndarray
    csi_samples: int | None = None
    trial_failures: list = field(default_factory=list)

    @property
    def eta_band(self) -> np.ndarray:
        """Relative band loss using the per-bin statistic."""
        return self.band_per_bin / self.band_rate

    @property
    def eta_per_tone(self) -> np.ndarray:
        return self.per_tone / self.rate_per_tone


def _stream(seed: int, purpose: int, tone: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(purpose, tone)))
    )


def _reduce(losses: np.ndarray, config: TrialConfig) -> np.ndarray:
    """(trials, p) -> (p,) per the configured statistic."""
    if config.statistic == WORST_CASE:
        return losses.max(axis=0)
    if config.statistic == MEAN:
        return losses.mean(axis=0)
    return np.quantile(losses, config.quantile_q, axis=0)


def _tone_count_threads() -> int:
    try:
        return max(1, int(os.environ.get("XTALK_THREADS", "1")))
    except ValueError:
        return 1


def _map_tones(fn, n_tones: int) -> list:
    threads = _tone_count_threads()
    if threads == 1:
        return [fn(k) for k in range(n_tones)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_tones)))


def _draw_e2(seed: int, tone: int, n: int, p: int, d_bits: int, zero: bool) -> np.ndarray:
    if zero:
        return np.zeros((n, p, p), dtype=complex)
    rng = _stream(seed, _MC_E2_STREAM, tone)
    base = rng.uniform(-1.0, 1.0, size=(2, n, p, p))
    return 2.0 ** (-d_bits) * (base[0] + 1j * base[1])


def run_trials(ensemble: ChannelEnsemble, budget: LinkBudget, config: TrialConfig) -> TrialReport:
    """Quantization-only trials (perfect channel knowledge)."""
    return _run(ensemble, budget, config, csi=None)


def run_trials_with_csi_error(
    ensemble: ChannelEnsemble,
    budget: LinkBudget,
    config: TrialConfig,
    csi: CsiErrorModel,
    retry_cap: int = 5,
) -> TrialReport:
    """Joint trials: Gaussian channel-estimation error plus uniform
    quantization error, with the full two-term equivalent perturbation."""
    return _run(ensemble, budget, config, csi=csi, retry_cap=retry_cap)


def _run(
    ensemble: ChannelEnsemble,
    budget: LinkBudget,
    config: TrialConfig,
    csi: CsiErrorModel | None,
    retry_cap: int = 5,
) -> TrialReport:
    p = ensemble.p
    n = config.n_trials
    d = config.spec.d_bits
    seed = config.spec.seed
    psd_lin = budget.psd_linear(p)
    gap = budget.gap
    n_tones = ensemble.grid.count
    eye = np.eye(p)
    failures: list = []

    def one_tone(k: int):
        snap = ensemble.snapshots[k]
        snr = budget.snr(snap)
        q_mat = snap.q_matrix()
        e2 = _draw_e2(seed, k, n, p, d, config.zero_errors)
        if csi is None:
            delta = q_mat[None, :, :] @ e2
        else:
            e1 = _draw_e1(seed, k, n, p, snr, csi.n_samples)
            m_inv = _invert_with_resampling(
                q_mat, e1, snr, csi.n_samples, seed, k, retry_cap, failures
            )
            delta = q_mat[None, :, :] @ e2 - e1 @ m_inv
        out = loss_arrays(snr, gap, psd_lin, delta)
        return out["loss"], out["rate"][0]

    results = _map_tones(one_tone, n_tones)

    per_tone = np.empty((p, n_tones))
    rate = np.empty((p, n_tones))
    band_joint_acc = np.zeros((n, p))
    for k, (losses, rates) in enumerate(results):
        per_tone[:, k] = _reduce(losses, config)
        rate[:, k] = rates
        band_joint_acc += losses

    spacing = ensemble.grid.spacing
    band_per_bin = per_tone.sum(axis=1) * spacing
    band_joint = _reduce(band_joint_acc * spacing, config)
    band_rate = rate.sum(axis=1) * spacing

    users = np.arange(p) if config.users is None else np.asarray(config.users)
    return TrialReport(
        d_bits=d,
        statistic=config.statistic,
        n_trials=n,
        seed=seed,
        freqs=ensemble.freqs,
        users=users,
        per_tone=per_tone[users],
        rate_per_tone=rate[users],
        band_per_bin=band_per_bin[users],
        band_joint=band_joint[users],
        band_rate=band_rate[users],
        csi_samples=None if csi is None else csi.n_samples,
        trial_failures=failures,
    )


def _draw_e1(seed: int, tone: int, n: int, p: int, snr: np.ndarray, n_samples: int) -> np.ndarray:
    rng = _stream(seed, _MC_E1_STREAM, tone)
    sigma = np.sqrt(1.0 / (n_samples * snr))[:, None]
    z = rng.standard_normal((2, n, p, p))
    return sigma * (z[0] + 1j * z[1]) / SQRT2


def _invert_with_resampling(
    q_mat: np.ndarray,
    e1: np.ndarray,
    snr: np.ndarray,
    n_samples: int,
    seed: int,
    tone: int,
    retry_cap: int,
    failures: list,
) -> np.ndarray:
    """inv(Q + E1) per trial; singular trials get a fresh E1 draw (in place,
    so the caller's delta uses the same matrices), up to ``retry_cap`` times."""
    try:
        return np.linalg.inv(q_mat[None, :, :] + e1)
    except np.linalg.LinAlgError:
        pass
    p = q_mat.shape[0]
    out = np.empty_like(e1)
    resampler = _stream(seed ^ 0x5EED, _MC_E1_STREAM, tone)
    sigma = np.sqrt(1.0 / (n_samples * snr))[:, None]
    for t in range(e1.shape[0]):
        for attempt in range(retry_cap + 1):
            try:
                out[t] = np.linalg.inv(q_mat + e1[t])
                break
            except np.linalg.LinAlgError:
                failures.append((tone, t, attempt))
                if attempt == retry_cap:
                    raise SingularChannel(
                        f"tone {tone} trial {t} singular after {retry_cap} resamples"
                    )
                z = resampler.standard_normal((2, p, p))
                e1[t] = sigma * (z[0] + 1j * z[1]) / SQRT2
    return out


def min_bits_empirical(
    ensemble: ChannelEnsemble,
    budget: LinkBudget,
    config: TrialConfig,
    target_eta: float,
    d_max: int = 32,
) -> int:
    """Smallest word length whose per-tone relative loss statistic meets
    ``target_eta``, by bisection over d.

    The same uniform base draws back every d (common random numbers), so the
    searched statistic is monotone in d and bisection is sound.
    """
    if not 0.0 < target_eta <= 1.0:
        raise InvalidParams("target_eta must lie in (0, 1]")

    def eta_worst(d: int) -> float:
        cfg = TrialConfig(
            n_trials=config.n_trials,
            spec=PerturbationSpec(
                d_bits=d, e2_model=config.spec.e2_model, seed=config.spec.seed
            ),
            users=config.users,
            statistic=config.statistic,
            quantile_q=config.quantile_q,
        )
        rep = run_trials(ensemble, budget, cfg)
        return float(np.max(rep.eta_per_tone))

    lo, hi = 1, d_max
    if eta_worst(lo) <= target_eta:
        return lo
    if eta_worst(hi) > target_eta:
        raise TargetUnreachable(
            f"worst-case relative loss still above {target_eta} at d={d_max}"
        )
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if eta_worst(mid) <= target_eta:
            hi = mid
        else:
            lo = mid
    return hi
