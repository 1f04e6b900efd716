"""Single-excitation ladder |φ_n⟩⊗|n⟩: photon in mode -n, phonon holding n quanta."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.stats import poisson

from fbs_herald.config import SystemConfig
from fbs_herald.exceptions import TruncationError, ValidationError
from fbs_herald.utils import throw

# Upper bound for choose_n_max; far beyond any gt that fits in memory.
MAX_LEVELS = 100_000


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class LadderState:
    amps: np.ndarray
    vac_amp: complex = 0.0
    t: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "amps", _frozen(np.asarray(self.amps, dtype=complex)))
        object.__setattr__(self, "vac_amp", complex(self.vac_amp))
        object.__setattr__(self, "t", float(self.t))
        if self.amps.ndim != 1 or self.amps.size < 2:
            throw("LadderState.amps must be a 1-D array with at least two levels.")

    @property
    def n_max(self) -> int:
        return self.amps.size - 1

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def norm_squared(self) -> float:
        return float(abs(self.vac_amp) ** 2 + np.sum(self.probabilities()))


@dataclass(frozen=True)
class DensityBlock:
    """Coefficients of ρ = Σ α_{nn'} |φ_n⟩⟨φ_n'|⊗|n⟩⟨n'| + Σ β_n |vac⟩⟨vac|⊗|n⟩⟨n|."""

    alpha: np.ndarray
    beta: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        alpha = np.asarray(self.alpha, dtype=complex)
        beta = np.asarray(self.beta, dtype=float)
        if alpha.ndim != 2 or alpha.shape[0] != alpha.shape[1]:
            throw("DensityBlock.alpha must be a square matrix.")
        if beta.shape != (alpha.shape[0],):
            throw("DensityBlock.beta must have one entry per phonon level.")
        object.__setattr__(self, "alpha", _frozen(alpha))
        object.__setattr__(self, "beta", _frozen(beta))
        object.__setattr__(self, "t", float(self.t))

    @property
    def n_max(self) -> int:
        return self.beta.size - 1

    def trace(self) -> float:
        return float(np.real(np.trace(self.alpha)) + np.sum(self.beta))

    def click_probabilities(self) -> np.ndarray:
        return np.real(np.diag(self.alpha)).copy()


def mode_index(n: int) -> int:
    return -n


def choose_n_max(gt_max: float, trunc_tol: float) -> int:
    """Smallest N ≥ 1 whose Poisson(gt_max²) tail at level N is below trunc_tol."""
    if gt_max < 0:
        throw("gt_max must be nonnegative")
    if not 0 < trunc_tol < 1:
        throw("trunc_tol must lie in (0, 1)")
    mu = gt_max**2
    if mu == 0:
        return 1
    start = poisson.isf(trunc_tol, mu)
    n = max(1, int(start) + 1) if np.isfinite(start) else max(1, int(mu))
    while n <= MAX_LEVELS and poisson.sf(n - 1, mu) >= trunc_tol:
        n += 1
    while n > 1 and poisson.sf(n - 2, mu) < trunc_tol:
        n -= 1
    if n > MAX_LEVELS:
        throw(
            f"gt_max={gt_max:g} needs more than {MAX_LEVELS} levels to keep the Poisson tail "
            f"below trunc_tol={trunc_tol:.1e}.",
            TruncationError,
        )
    return n


def initial_state(cfg: SystemConfig) -> LadderState:
    amps = np.zeros(cfg.dim, dtype=complex)
    amps[0] = 1.0
    return LadderState(amps=amps, vac_amp=0.0, t=0.0)


def coupling_vector(cfg: SystemConfig, levels: int | None = None) -> np.ndarray:
    """Entry k couples level k to k+1 at g√(k+1); zero when mode -k or -(k+1) is suppressed."""
    levels = levels or cfg.dim
    k = np.arange(levels - 1)
    couplings = cfg.g * np.sqrt(k + 1.0)
    if cfg.suppressed_modes:
        for mode in cfg.suppressed_modes:
            if mode > 0:
                continue
            n = -mode
            if n < levels - 1:
                couplings[n] = 0.0
            if 0 <= n - 1 < levels - 1:
                couplings[n - 1] = 0.0
    return couplings


def coupling_matrix(cfg: SystemConfig, levels: int | None = None) -> sparse.csr_matrix:
    couplings = coupling_vector(cfg, levels)
    return sparse.diags([couplings, couplings], offsets=[-1, 1], format="csr")


def hamiltonian_action(amps: np.ndarray, couplings: np.ndarray) -> np.ndarray:
    """-i K·amps for the tridiagonal K given by its off-diagonal `couplings`."""
    out = np.zeros_like(amps, dtype=complex)
    out[1:] += couplings * amps[:-1]
    out[:-1] += couplings * amps[1:]
    return -1j * out


def apply_hamiltonian(state: LadderState, cfg: SystemConfig) -> LadderState:
    """Interaction-picture time derivative of `state` (vacuum amplitude is stationary)."""
    if state.amps.size != cfg.dim:
        throw(
            f"State has {state.amps.size} levels but config expects n_max+1 = {cfg.dim}.",
            ValidationError,
        )
    deriv = hamiltonian_action(state.amps, coupling_vector(cfg))
    return LadderState(amps=deriv, vac_amp=0.0, t=state.t)


def to_full_picture(state: LadderState, cfg: SystemConfig) -> LadderState:
    """Apply the free evolution e^{-iH₀t}: phase e^{-iω_p t} on the one-photon sector."""
    phase = np.exp(-1j * cfg.omega_p * state.t)
    return LadderState(amps=state.amps * phase, vac_amp=state.vac_amp, t=state.t)


def check_normalized(state: LadderState, tol: float) -> None:
    deviation = abs(state.norm_squared() - 1.0)
    if deviation > tol:
        throw(f"State is not normalized (|norm² - 1| = {deviation:.3e}).")


def shift_operators(n_max: int, anti_stokes: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Dense A = Σ a_m a†_{m-1} and A† on the one-photon mode register.

    Basis index i holds the photon in mode m = anti_stokes - i, covering
    modes anti_stokes .. -n_max. A moves the photon one mode down (Stokes).
    """
    size = n_max + 1 + anti_stokes
    A = np.zeros((size, size))
    # |1_m⟩ (index i) -> |1_{m-1}⟩ (index i+1)
    A[np.arange(1, size), np.arange(size - 1)] = 1.0
    return A, A.T.copy()


def phonon_operators(n_max: int) -> tuple[np.ndarray, np.ndarray]:
    b = np.diag(np.sqrt(np.arange(1.0, n_max + 1)), k=1)
    return b, b.T.copy()


def density_from_state(state: LadderState) -> DensityBlock:
    # Vacuum/one-photon coherences have no slot in the block; they never enter click statistics.
    alpha = np.outer(state.amps, state.amps.conj())
    beta = np.zeros(state.amps.size)
    beta[0] = abs(state.vac_amp) ** 2
    return DensityBlock(alpha=alpha, beta=beta, t=state.t)
