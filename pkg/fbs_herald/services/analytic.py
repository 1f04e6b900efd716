"""Closed-form evolution: lossless wavefunction, herald probabilities and the lossy density block."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln

from fbs_herald.config import SystemConfig
from fbs_herald.exceptions import NumericError, UsageError, ValidationError
from fbs_herald.services.ladder import DensityBlock, LadderState
from fbs_herald.utils import get_logger, throw

logger = get_logger(__name__)

QUAD_TOL = 1e-12
WEAK_COHERENT_WARN = 0.3
COHERENCE_WARN = 0.1
_PHASES = np.array([1.0, -1j, -1.0, 1j])


@dataclass(frozen=True)
class HeraldProbabilityTable:
    gt: float
    probs: np.ndarray
    no_click: float

    def total(self) -> float:
        return float(np.sum(self.probs) + self.no_click)

    def as_dict(self) -> dict[str, Any]:
        return {"gt": self.gt, "probs": self.probs.tolist(), "no_click": self.no_click}


@dataclass(frozen=True)
class PhononState:
    fock: int
    click_probability: float
    density: np.ndarray
    purity: float
    fidelity: float

    def as_dict(self) -> dict[str, Any]:
        return {
            "fock": self.fock,
            "click_probability": self.click_probability,
            "purity": self.purity,
            "fidelity": self.fidelity,
        }


def poisson_weights(mu: float, n_max: int) -> np.ndarray:
    """e^{-mu} mu^n / n! for n = 0..n_max, evaluated in log space."""
    n = np.arange(n_max + 1)
    if mu == 0:
        weights = np.zeros(n_max + 1)
        weights[0] = 1.0
        return weights
    return np.exp(n * math.log(mu) - mu - gammaln(n + 1))


def _require_open_ladder(cfg: SystemConfig) -> None:
    blocked = sorted(mode for mode in cfg.suppressed_modes if mode <= 0)
    if blocked:
        throw(
            f"Closed forms assume an unblocked Stokes ladder; modes {blocked} are suppressed. "
            "Use the integrator instead.",
            UsageError,
        )


def _amplitudes(gt: float, n_max: int) -> np.ndarray:
    magnitude = np.sqrt(poisson_weights(gt * gt, n_max))
    return magnitude * _PHASES[np.arange(n_max + 1) % 4]


def wavefunction_closed_form(gt: float, cfg: SystemConfig) -> LadderState:
    """Interaction-picture amplitudes e^{-(gt)²/2}(-i gt)^n/√n! for a single input photon."""
    if cfg.gamma != 0:
        throw("wavefunction_closed_form is lossless only; use density_closed_form for gamma > 0.", UsageError)
    if gt < 0:
        throw("gt must be nonnegative")
    _require_open_ladder(cfg)
    return LadderState(amps=_amplitudes(gt, cfg.n_max), vac_amp=0.0, t=cfg.time_from_gt(gt))


def _loss_factor(gt: float, cfg: SystemConfig) -> float:
    if cfg.gamma == 0:
        return 1.0
    return math.exp(-cfg.gamma * cfg.time_from_gt(gt))


def herald_probabilities(gt: float, cfg: SystemConfig) -> HeraldProbabilityTable:
    """P_j of a click in mode -j; with loss every entry carries e^{-γt}."""
    if gt < 0:
        throw("gt must be nonnegative")
    _require_open_ladder(cfg)
    probs = poisson_weights(gt * gt, cfg.n_max) * _loss_factor(gt, cfg)
    no_click = max(0.0, 1.0 - float(np.sum(probs)))
    return HeraldProbabilityTable(gt=gt, probs=probs, no_click=no_click)


def _warn_weak_coherent(alpha_in: complex) -> None:
    if abs(alpha_in) > WEAK_COHERENT_WARN:
        logger.warning(
            "|alpha_in| = %.3f exceeds %.1f; the one-photon truncation of the coherent input is poor.",
            abs(alpha_in),
            WEAK_COHERENT_WARN,
        )


def weak_coherent_branch(gt: float, alpha_in: complex, cfg: SystemConfig) -> tuple[float, LadderState]:
    """Unnormalized split |vac⟩|0⟩ + α·|ψ(t)⟩: returns (vacuum weight, one-photon branch)."""
    _warn_weak_coherent(alpha_in)
    single = wavefunction_closed_form(gt, cfg)
    return 1.0, LadderState(amps=alpha_in * single.amps, vac_amp=0.0, t=single.t)


def weak_coherent_state(gt: float, alpha_in: complex, cfg: SystemConfig) -> LadderState:
    vacuum_weight, branch = weak_coherent_branch(gt, alpha_in, cfg)
    norm = math.sqrt(vacuum_weight + abs(alpha_in) ** 2)
    return LadderState(amps=branch.amps / norm, vac_amp=math.sqrt(vacuum_weight) / norm, t=branch.t)


def weak_coherent_herald_probabilities(
    gt: float, alpha_in: complex, cfg: SystemConfig
) -> HeraldProbabilityTable:
    _warn_weak_coherent(alpha_in)
    table = herald_probabilities(gt, cfg)
    probs = table.probs * abs(alpha_in) ** 2
    return HeraldProbabilityTable(gt=gt, probs=probs, no_click=max(0.0, 1.0 - float(np.sum(probs))))


def _beta_integrand(tau: float, n: int, g: float, gamma: float) -> float:
    exponent = -((g * tau) ** 2) - gamma * tau
    if n == 0:
        return math.exp(exponent)
    if g * tau == 0:
        return 0.0
    return math.exp(2 * n * math.log(g * tau) - math.lgamma(n + 1) + exponent)


def _beta(n: int, t: float, cfg: SystemConfig) -> float:
    out = quad(
        _beta_integrand,
        0.0,
        t,
        args=(n, cfg.g, cfg.gamma),
        epsabs=QUAD_TOL,
        epsrel=0.0,
        limit=200,
        full_output=1,
    )
    value, abserr = out[0], out[1]
    if len(out) > 3:
        throw(
            f"Quadrature for beta[{n}] at t={t:g} did not converge (achieved {abserr:.2e}, "
            f"wanted {QUAD_TOL:.0e}): {out[3]}",
            NumericError,
        )
    return cfg.gamma * value


def density_closed_form(t: float, cfg: SystemConfig) -> DensityBlock:
    if t < 0:
        throw("t must be nonnegative")
    _require_open_ladder(cfg)
    amps = _amplitudes(cfg.gt_from_time(t), cfg.n_max)
    alpha = np.outer(amps, amps.conj()) * math.exp(-cfg.gamma * t)
    beta = np.zeros(cfg.dim)
    if cfg.gamma > 0 and t > 0:
        beta = np.array([_beta(n, t, cfg) for n in range(cfg.dim)])
    return DensityBlock(alpha=alpha, beta=beta, t=t)


def conditional_phonon_state(rho: DensityBlock, j: int) -> PhononState:
    """Phonon state left by a click in mode -j: ⟨φ_j|ρ|φ_j⟩ = α_jj |j⟩⟨j|."""
    if not 0 <= j <= rho.n_max:
        throw(f"Mode index j={j} is outside 0..{rho.n_max}.", ValidationError)
    selector = np.zeros(rho.n_max + 1)
    selector[j] = 1.0
    projected = np.outer(selector, selector) * rho.alpha
    probability = float(np.real(np.trace(projected)))
    if probability > 0:
        density = projected / probability
    else:
        density = np.outer(selector, selector).astype(complex)
    density.setflags(write=False)
    return PhononState(
        fock=j,
        click_probability=probability,
        density=density,
        purity=float(np.real(np.trace(density @ density))),
        fidelity=float(np.real(density[j, j])),
    )


def unconditioned_phonon_distribution(rho: DensityBlock) -> np.ndarray:
    """Phonon-number distribution with the optical register traced out."""
    return np.real(np.diag(rho.alpha)) + rho.beta


def mean_phonon_number(rho: DensityBlock) -> float:
    dist = unconditioned_phonon_distribution(rho)
    return float(np.dot(np.arange(dist.size), dist))


def coherence_check(cfg: SystemConfig, t: float) -> str | None:
    """Warning text when t leaves the window where mechanical decoherence is negligible."""
    if cfg.mech_decoherence_rate is None:
        return None
    exposure = cfg.mech_decoherence_rate * t
    if exposure <= COHERENCE_WARN:
        return None
    message = (
        f"t·T2^-1 = {exposure:.3f} exceeds {COHERENCE_WARN}; mechanical decoherence is not modeled "
        "and results overstate phonon coherence."
    )
    logger.warning(message)
    return message
