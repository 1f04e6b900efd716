"""Frequency-resolved detection: click statistics, seeded heralding trials, post-click phonon states."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.stats import chisquare

from fbs_herald.exceptions import HeraldError, ValidationError
from fbs_herald.services.analytic import HeraldProbabilityTable, conditional_phonon_state
from fbs_herald.services.ladder import DensityBlock, LadderState, density_from_state
from fbs_herald.utils import get_logger, throw

logger = get_logger(__name__)

BLOCK_SIZE = 4096
NORMALIZATION_TOL = 1e-12
MIN_EXPECTED = 5.0
OUTCOME_HEADER = ["trial", "clicked", "channel", "heralded_phonon"]


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    dark_rate: float = 0.0
    # None monitors every channel j = 0..n_max (modes m = -j).
    channels: frozenset[int] | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.efficiency <= 1:
            throw("efficiency must lie in [0, 1]")
        if not 0 <= self.dark_rate < 1:
            throw("dark_rate must lie in [0, 1)")
        if self.channels is not None:
            channels = frozenset(int(j) for j in self.channels)
            if not channels:
                throw("channels must not be empty")
            if min(channels) < 0:
                throw("channels are indexed by phonon number j >= 0")
            object.__setattr__(self, "channels", channels)

    def resolve_channels(self, n_max: int) -> np.ndarray:
        if self.channels is None:
            return np.arange(n_max + 1)
        channels = np.array(sorted(self.channels))
        if channels[-1] > n_max:
            throw(f"Channel {channels[-1]} is beyond n_max={n_max}.")
        return channels

    def as_dict(self) -> dict[str, Any]:
        return {
            "efficiency": self.efficiency,
            "dark_rate": self.dark_rate,
            "channels": None if self.channels is None else sorted(self.channels),
        }


@dataclass(frozen=True)
class ClickTable:
    """Per-channel click probabilities split into true heralds and dark counts."""

    channels: np.ndarray
    herald: np.ndarray
    dark: np.ndarray
    no_click: float
    gt: float | None = None

    @property
    def probs(self) -> np.ndarray:
        return self.herald + self.dark

    def total(self) -> float:
        return float(np.sum(self.herald) + np.sum(self.dark) + self.no_click)

    def category_probabilities(self) -> np.ndarray:
        """Sampling categories: true herald per channel, dark count per channel, no click."""
        return np.concatenate([self.herald, self.dark, [self.no_click]])

    def probability_of(self, j: int) -> float:
        hits = np.nonzero(self.channels == j)[0]
        return float(self.probs[hits[0]]) if hits.size else 0.0

    def as_dict(self) -> dict[str, Any]:
        return {
            "gt": self.gt,
            "channels": self.channels.tolist(),
            "herald": self.herald.tolist(),
            "dark": self.dark.tolist(),
            "no_click": self.no_click,
        }


@dataclass(frozen=True)
class HeraldOutcome:
    clicked: bool
    channel: int | None
    heralded_phonon: int | None
    gt: float | None
    trial_seed: int
    trial: int = 0
    # Simulation-side truth; a real detector cannot tell a dark count apart.
    dark_count: bool = False

    def __post_init__(self) -> None:
        if self.clicked and (self.channel is None or self.channel != self.heralded_phonon):
            throw("A click must report matching channel and heralded phonon number.")


@dataclass(frozen=True)
class HeraldFrequencies:
    channels: np.ndarray
    herald_counts: np.ndarray
    dark_counts: np.ndarray
    no_click_count: int
    trials: int

    def category_counts(self) -> np.ndarray:
        return np.concatenate([self.herald_counts, self.dark_counts, [self.no_click_count]])

    def click_frequencies(self) -> np.ndarray:
        return (self.herald_counts + self.dark_counts) / self.trials

    def no_click_frequency(self) -> float:
        return self.no_click_count / self.trials

    def as_dict(self) -> dict[str, Any]:
        return {
            "trials": self.trials,
            "channels": self.channels.tolist(),
            "herald_counts": self.herald_counts.tolist(),
            "dark_counts": self.dark_counts.tolist(),
            "no_click_count": self.no_click_count,
        }


@dataclass(frozen=True)
class HeraldSample:
    outcomes: tuple[HeraldOutcome, ...]
    frequencies: HeraldFrequencies
    seed: int


@dataclass(frozen=True)
class PostClickReport:
    channel: int
    click_probability: float
    herald_probability: float
    phonon_density: np.ndarray
    fidelity: float
    purity: float

    def as_dict(self) -> dict[str, Any]:
        return {
            "channel": self.channel,
            "click_probability": self.click_probability,
            "herald_probability": self.herald_probability,
            "fidelity": self.fidelity,
            "purity": self.purity,
        }


def _ideal_probabilities(source: LadderState | DensityBlock | HeraldProbabilityTable) -> np.ndarray:
    if isinstance(source, HeraldProbabilityTable):
        return np.asarray(source.probs, dtype=float)
    if isinstance(source, DensityBlock):
        return source.click_probabilities()
    if isinstance(source, LadderState):
        return source.probabilities()
    throw(f"Cannot build click statistics from {type(source).__name__}.")


def _dark_share(detector: DetectorModel, n_channels: int) -> tuple[float, float]:
    """(probability that some channel fires dark, share assigned to each channel)."""
    any_dark = 1.0 - (1.0 - detector.dark_rate) ** n_channels
    return any_dark, any_dark / n_channels


def click_distribution(
    source: LadderState | DensityBlock | HeraldProbabilityTable,
    detector: DetectorModel | None = None,
    gt: float | None = None,
) -> ClickTable:
    detector = detector or DetectorModel()
    ideal = _ideal_probabilities(source)
    channels = detector.resolve_channels(ideal.size - 1)
    monitored = ideal[channels]
    if np.sum(monitored) > 1.0 + 1e-9:
        throw(f"Ideal click probabilities sum to {np.sum(monitored):.12g} > 1.", ValidationError)

    herald = detector.efficiency * monitored
    missed = max(0.0, 1.0 - float(np.sum(herald)))
    any_dark, per_channel = _dark_share(detector, channels.size)
    dark = np.full(channels.size, missed * per_channel)
    no_click = missed * (1.0 - any_dark)
    if gt is None and isinstance(source, HeraldProbabilityTable):
        gt = source.gt
    table = ClickTable(channels=channels, herald=herald, dark=dark, no_click=no_click, gt=gt)
    drift = abs(table.total() - 1.0)
    if drift > NORMALIZATION_TOL:
        logger.warning("Click table normalization off by %.3e", drift)
    return table


def _sample_block(cdf: np.ndarray, seed: int, block: int, count: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence((seed, block)))
    categories = np.searchsorted(cdf, rng.random(count), side="right")
    return np.minimum(categories, cdf.size - 1)


def sample_heralds(
    dist: ClickTable, trials: int, seed: int, workers: int = 1, block_size: int = BLOCK_SIZE
) -> HeraldSample:
    """Seeded heralding trials; block b draws from SeedSequence((seed, b)) whatever the worker count."""
    if trials < 1:
        throw("trials must be at least 1")
    if seed < 0:
        throw("seed must be a nonnegative integer")
    probs = dist.category_probabilities()
    cdf = np.cumsum(probs)
    cdf = cdf / cdf[-1]

    n_blocks = math.ceil(trials / block_size)
    sizes = [min(block_size, trials - b * block_size) for b in range(n_blocks)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _sample_block(cdf, seed, b, sizes[b]), range(n_blocks)))
    else:
        parts = [_sample_block(cdf, seed, b, sizes[b]) for b in range(n_blocks)]
    categories = np.concatenate(parts)

    k = dist.channels.size
    outcomes = []
    for trial, category in enumerate(categories.tolist()):
        if category == 2 * k:
            outcomes.append(
                HeraldOutcome(False, None, None, dist.gt, trial_seed=seed, trial=trial)
            )
            continue
        j = int(dist.channels[category % k])
        outcomes.append(
            HeraldOutcome(True, j, j, dist.gt, trial_seed=seed, trial=trial, dark_count=category >= k)
        )

    counts = np.bincount(categories, minlength=2 * k + 1)
    frequencies = HeraldFrequencies(
        channels=dist.channels,
        herald_counts=counts[:k],
        dark_counts=counts[k : 2 * k],
        no_click_count=int(counts[2 * k]),
        trials=trials,
    )
    logger.debug("Sampled %d trials in %d blocks (seed=%d)", trials, n_blocks, seed)
    return HeraldSample(outcomes=tuple(outcomes), frequencies=frequencies, seed=seed)


def _pool_small(observed: np.ndarray, expected: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    small = expected < MIN_EXPECTED
    if not np.any(small):
        return observed, expected
    obs, exp = list(observed[~small]), list(expected[~small])
    pooled_obs, pooled_exp = float(np.sum(observed[small])), float(np.sum(expected[small]))
    if pooled_exp >= MIN_EXPECTED or not exp:
        obs.append(pooled_obs)
        exp.append(pooled_exp)
    else:
        idx = int(np.argmin(exp))
        obs[idx] += pooled_obs
        exp[idx] += pooled_exp
    return np.array(obs, dtype=float), np.array(exp, dtype=float)


def goodness_of_fit(frequencies: HeraldFrequencies, dist: ClickTable) -> tuple[float, float]:
    """Chi-square statistic and p-value of sampled categories against the exact table."""
    observed = frequencies.category_counts().astype(float)
    expected = dist.category_probabilities() * frequencies.trials
    impossible = expected == 0
    if np.any(observed[impossible] > 0):
        return math.inf, 0.0
    observed, expected = _pool_small(observed[~impossible], expected[~impossible])
    if observed.size < 2:
        return 0.0, 1.0
    expected = expected * (observed.sum() / expected.sum())
    statistic, p_value = chisquare(observed, expected)
    return float(statistic), float(p_value)


def post_click_state(
    rho: DensityBlock | LadderState, j: int, detector: DetectorModel | None = None
) -> PostClickReport:
    """Phonon state after a click in channel j, and its fidelity to the Fock state |j⟩."""
    if isinstance(rho, LadderState):
        rho = density_from_state(rho)
    true_state = conditional_phonon_state(rho, j)
    detector = detector or DetectorModel()
    table = click_distribution(rho, detector)
    if j not in table.channels:
        throw(f"Channel {j} is not monitored by the detector.", HeraldError)

    herald_weight = detector.efficiency * true_state.click_probability
    click_probability = table.probability_of(j)
    if click_probability <= 0:
        throw(f"Channel {j} has zero click probability at t={rho.t:g}.", HeraldError)

    density = herald_weight * true_state.density
    dark_weight = click_probability - herald_weight
    if dark_weight > 0:
        # Phonon populations left when no photon was registered; a dark count samples this mixture.
        missed = np.real(np.diag(rho.alpha)).copy()
        missed[table.channels] *= 1.0 - detector.efficiency
        missed += rho.beta
        if np.sum(missed) > 0:
            density = density + dark_weight * np.diag(missed / np.sum(missed))
    density = density / np.real(np.trace(density))
    return PostClickReport(
        channel=j,
        click_probability=click_probability,
        herald_probability=herald_weight,
        phonon_density=density,
        fidelity=float(np.real(density[j, j])),
        purity=float(np.real(np.trace(density @ density))),
    )


def outcome_rows(outcomes: tuple[HeraldOutcome, ...]) -> list[list[Any]]:
    return [
        [
            outcome.trial,
            int(outcome.clicked),
            "" if outcome.channel is None else outcome.channel,
            "" if outcome.heralded_phonon is None else outcome.heralded_phonon,
        ]
        for outcome in outcomes
    ]


def summarize(dist: ClickTable, sample: HeraldSample) -> dict[str, Any]:
    freqs = sample.frequencies
    statistic, p_value = goodness_of_fit(freqs, dist)
    return {
        "seed": sample.seed,
        "trials": freqs.trials,
        "channels": dist.channels.tolist(),
        "exact_click": dist.probs.tolist(),
        "exact_dark": dist.dark.tolist(),
        "exact_no_click": dist.no_click,
        "empirical_click": freqs.click_frequencies().tolist(),
        "empirical_dark": (freqs.dark_counts / freqs.trials).tolist(),
        "empirical_no_click": freqs.no_click_frequency(),
        "chi_square": statistic,
        "p_value": p_value,
    }
