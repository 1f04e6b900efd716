"""Phonon readout: stop-band checks and optomechanical beam-splitter pulses into an optical register."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.linalg import expm

from fbs_herald.config import SystemConfig
from fbs_herald.exceptions import TruncationError, ValidationError
from fbs_herald.services.herald import DetectorModel, PostClickReport, post_click_state
from fbs_herald.services.integrator import IntegratorSpec, stop_band_deviation
from fbs_herald.services.ladder import DensityBlock
from fbs_herald.utils import get_logger, throw

logger = get_logger(__name__)

STOP_BAND_TOL = 1e-10
NORM_TOL = 1e-9
READOUT_HEADER = ["n", "probability"]


@dataclass(frozen=True)
class PulseSpec:
    target_optical_mode: int
    pump_mode: int
    area: float
    coupling: float
    duration: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.area > 0:
            throw("Pulse area must be positive.")
        if not self.coupling > 0:
            throw("Beam-splitter coupling must be positive.")
        if self.pump_mode != self.target_optical_mode - 1:
            throw("pump_mode must sit one mode below target_optical_mode.")
        object.__setattr__(self, "duration", self.area / (2 * self.coupling))

    def as_dict(self) -> dict[str, Any]:
        return {
            "target_optical_mode": self.target_optical_mode,
            "pump_mode": self.pump_mode,
            "area": self.area,
            "coupling": self.coupling,
            "duration": self.duration,
        }


@dataclass(frozen=True)
class ReadoutRegister:
    """Joint amplitudes psi[n_ph, n_opt] of the phonon and the readout optical mode."""

    psi: np.ndarray

    def __post_init__(self) -> None:
        psi = np.array(self.psi, dtype=complex)
        if psi.ndim != 2 or psi.shape[0] != psi.shape[1]:
            throw("ReadoutRegister.psi must be a square matrix.")
        norm = float(np.sum(np.abs(psi) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            throw(f"ReadoutRegister is not normalized (norm² = {norm:.12g}).")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @property
    def dim(self) -> int:
        return self.psi.shape[0]

    @classmethod
    def from_phonon(cls, amps: np.ndarray, dim: int | None = None) -> ReadoutRegister:
        amps = np.asarray(amps, dtype=complex)
        dim = dim or amps.size
        if amps.size > dim:
            throw(f"Phonon state has {amps.size} levels but the register holds {dim}.")
        psi = np.zeros((dim, dim), dtype=complex)
        psi[: amps.size, 0] = amps
        return cls(psi=psi)

    @classmethod
    def from_fock(cls, j: int, dim: int) -> ReadoutRegister:
        if not 0 <= j < dim:
            throw(f"Fock level {j} does not fit a register of dimension {dim}.")
        amps = np.zeros(dim, dtype=complex)
        amps[j] = 1.0
        return cls.from_phonon(amps)


@dataclass(frozen=True)
class StopBandReport:
    mode: int
    deviation: float
    passed: bool
    threshold: float = STOP_BAND_TOL

    def as_dict(self) -> dict[str, Any]:
        return {"mode": self.mode, "deviation": self.deviation, "passed": self.passed, "threshold": self.threshold}


@dataclass(frozen=True)
class RoundTripReport:
    fock: int
    post_click: PostClickReport
    readout: np.ndarray

    @property
    def peak(self) -> int:
        return int(np.argmax(self.readout))

    @property
    def mass_at_fock(self) -> float:
        return float(self.readout[self.fock]) if self.fock < self.readout.size else 0.0

    def as_dict(self) -> dict[str, Any]:
        return {
            "fock": self.fock,
            "peak": self.peak,
            "mass_at_fock": self.mass_at_fock,
            "post_click": self.post_click.as_dict(),
        }


def validate_stop_band(
    cfg: SystemConfig, j: int, gt_max: float = 2.0, samples: int = 21, spec: IntegratorSpec | None = None
) -> StopBandReport:
    """Check that suppressing mode m=j>0 leaves the single-photon trajectory unchanged."""
    if j <= 0:
        throw(
            f"Stop-band mode must be m > 0, got {j}: modes m <= 0 carry the Stokes cascade "
            "of the input photon, so suppressing them changes the dynamics.",
            ValidationError,
        )
    spec = spec or IntegratorSpec.from_gt(np.linspace(0.0, gt_max, samples), cfg)
    deviation = stop_band_deviation(cfg, j, spec)
    report = StopBandReport(mode=j, deviation=deviation, passed=deviation < STOP_BAND_TOL)
    logger.info("Stop-band m=%d: deviation %.3e (%s)", j, deviation, "PASS" if report.passed else "FAIL")
    return report


def validate_pulse(pulse: PulseSpec, cfg: SystemConfig) -> None:
    stop_band = pulse.pump_mode - 1
    if pulse.target_optical_mode in cfg.suppressed_modes or pulse.pump_mode in cfg.suppressed_modes:
        throw("Pump and target modes of a readout pulse must not be suppressed.")
    if stop_band <= 0 or stop_band not in cfg.suppressed_modes:
        throw(
            f"Pump mode {pulse.pump_mode} must border a suppressed mode m={stop_band} > 0; "
            "otherwise the pulse also drives two-mode squeezing."
        )


def make_pulse(cfg: SystemConfig, stop_band_mode: int, area: float = math.pi, coupling: float = 1.0) -> PulseSpec:
    """Pulse pumping m=j+1 next to the stop band at m=j, transferring into m=j+2."""
    pulse = PulseSpec(
        target_optical_mode=stop_band_mode + 2,
        pump_mode=stop_band_mode + 1,
        area=area,
        coupling=coupling,
    )
    validate_pulse(pulse, cfg)
    return pulse


def _sector(total: int, dim: int) -> np.ndarray:
    return np.arange(max(0, total - dim + 1), min(total, dim - 1) + 1)


def apply_beam_splitter_pulse(
    register: ReadoutRegister, pulse: PulseSpec, trunc_tol: float = 1e-12
) -> ReadoutRegister:
    # n_ph + n_opt is conserved, so each sector is exponentiated on its own
    dim = register.dim
    weights = np.abs(register.psi) ** 2
    totals = np.add.outer(np.arange(dim), np.arange(dim))
    clipped = float(np.sum(weights[totals >= dim]))
    if clipped > trunc_tol:
        throw(
            f"Register weight {clipped:.3e} lies in sectors cut by the truncation (dim {dim}); "
            "enlarge the register.",
            TruncationError,
        )

    theta = pulse.coupling * pulse.duration
    out = np.zeros_like(register.psi)
    for total in range(2 * dim - 1):
        phonons = _sector(total, dim)
        optical = total - phonons
        amps = register.psi[phonons, optical]
        if not np.any(amps):
            continue
        # (p, total-p) <-> (p-1, total-p+1) with amplitude √p·√(total-p+1)
        link = np.sqrt(phonons[1:] * (optical[1:] + 1.0))
        h = np.diag(link, k=1) + np.diag(link, k=-1)
        out[phonons, optical] = expm(-1j * theta * h) @ amps
    return ReadoutRegister(psi=out)


def readout_statistics(register: ReadoutRegister) -> np.ndarray:
    return np.sum(np.abs(register.psi) ** 2, axis=0)


def phonon_statistics(register: ReadoutRegister) -> np.ndarray:
    return np.sum(np.abs(register.psi) ** 2, axis=1)


def total_quanta_distribution(register: ReadoutRegister) -> np.ndarray:
    dim = register.dim
    totals = np.add.outer(np.arange(dim), np.arange(dim))
    return np.bincount(totals.ravel(), weights=(np.abs(register.psi) ** 2).ravel(), minlength=2 * dim - 1)


def readout_from_density(
    density: np.ndarray, pulse: PulseSpec, dim: int | None = None, trunc_tol: float = 1e-12
) -> np.ndarray:
    """Readout distribution for a (possibly mixed) phonon density matrix."""
    eigenvalues, vectors = np.linalg.eigh(density)
    dim = dim or density.shape[0]
    readout = np.zeros(dim)
    for weight, vector in zip(eigenvalues, vectors.T):
        if weight <= 1e-15:
            continue
        register = ReadoutRegister.from_phonon(vector / np.linalg.norm(vector), dim)
        readout += weight * readout_statistics(apply_beam_splitter_pulse(register, pulse, trunc_tol))
    return readout / np.sum(readout)


def tomography_round_trip(
    rho: DensityBlock,
    j: int,
    pulse: PulseSpec,
    detector: DetectorModel | None = None,
    trunc_tol: float = 1e-12,
) -> RoundTripReport:
    """Herald channel j, swap the phonon into the readout mode and return its photon statistics."""
    report = post_click_state(rho, j, detector)
    readout = readout_from_density(report.phonon_density, pulse, trunc_tol=trunc_tol)
    return RoundTripReport(fock=j, post_click=report, readout=readout)
