"""Numerical oracles for the closed forms.

Nothing here imports the analytic module: the ODE paths share only the
ladder definitions, so agreement with the closed forms is an independent check.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from fbs_herald.config import SystemConfig
from fbs_herald.exceptions import IntegratorError, TruncationError, UsageError, ValidationError
from fbs_herald.services.ladder import (
    DensityBlock,
    LadderState,
    check_normalized,
    choose_n_max,
    coupling_matrix,
    coupling_vector,
    hamiltonian_action,
    initial_state,
    phonon_operators,
    shift_operators,
)
from fbs_herald.utils import get_logger, throw

logger = get_logger(__name__)

METHODS = ("rk4", "adaptive")
DT_SCALE = 0.01
NORM_TOL = 1e-8
TRACE_TOL = 1e-8
MIN_STEP = 1e-14
GLAUBER_MAX_LEVELS = 12
GLAUBER_INTERIOR = 2


@dataclass(frozen=True)
class IntegratorSpec:
    """Step control and output grid. Times are in internal units (gt when g = 1)."""

    t_grid: tuple[float, ...]
    method: str = "rk4"
    dt: float | None = None
    rtol: float = 1e-10
    atol: float = 1e-12
    # Extra levels integrated beyond n_max so the hard boundary stays out of the reported levels.
    guard_levels: int = 8

    def __post_init__(self) -> None:
        grid = tuple(float(t) for t in self.t_grid)
        object.__setattr__(self, "t_grid", grid)
        if not grid:
            throw("t_grid must hold at least one output time.")
        if grid[0] < 0 or any(b <= a for a, b in zip(grid, grid[1:])):
            throw("t_grid must be nonnegative and strictly increasing.")
        if self.method not in METHODS:
            throw(f"method must be one of {', '.join(METHODS)}, got {self.method!r}.")
        if self.dt is not None and not self.dt > 0:
            throw("dt must be positive")
        if self.guard_levels < 0:
            throw("guard_levels must be nonnegative")

    @classmethod
    def from_gt(cls, gt_grid: Sequence[float], cfg: SystemConfig, **kwargs) -> IntegratorSpec:
        return cls(t_grid=tuple(cfg.time_from_gt(gt) for gt in gt_grid), **kwargs)

    def step_for(self, cfg: SystemConfig, levels: int) -> float:
        if self.dt is not None:
            return self.dt
        if cfg.g == 0:
            return math.inf
        return DT_SCALE / (cfg.g * math.sqrt(levels - 1))


@dataclass(frozen=True)
class SchrodingerTrajectory:
    states: tuple[LadderState, ...]
    g: float = 1.0

    @property
    def times(self) -> np.ndarray:
        return np.array([state.t for state in self.states])

    @property
    def gt(self) -> np.ndarray:
        return self.g * self.times

    def probabilities(self) -> np.ndarray:
        return np.array([state.probabilities() for state in self.states])

    def amplitudes(self) -> np.ndarray:
        return np.array([state.amps for state in self.states])


@dataclass(frozen=True)
class LindbladTrajectory:
    blocks: tuple[DensityBlock, ...]
    g: float = 1.0
    traces: tuple[float, ...] = field(default_factory=tuple)

    @property
    def times(self) -> np.ndarray:
        return np.array([block.t for block in self.blocks])

    @property
    def gt(self) -> np.ndarray:
        return self.g * self.times

    def probabilities(self) -> np.ndarray:
        return np.array([block.click_probabilities() for block in self.blocks])


def trajectory_header(n_max: int) -> list[str]:
    return ["t", "gt", *(f"P{n}" for n in range(n_max + 1))]


def trajectory_rows(trajectory: SchrodingerTrajectory | LindbladTrajectory) -> list[list[float]]:
    probs = trajectory.probabilities()
    return [
        [float(t), float(gt), *row.tolist()]
        for t, gt, row in zip(trajectory.times, trajectory.gt, probs)
    ]


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _propagate_rk4(f, y0: np.ndarray, t0: float, grid: Sequence[float], dt: float) -> list[np.ndarray]:
    y, t = y0.copy(), t0
    out = []
    for t_out in grid:
        interval = t_out - t
        if interval > 0:
            steps = max(1, math.ceil(interval / dt - 1e-9)) if math.isfinite(dt) else 1
            h = interval / steps
            if h < MIN_STEP:
                throw(f"Step size underflow (h = {h:.3e}) before t = {t_out:g}.", IntegratorError)
            for i in range(steps):
                y = rk4_step(f, t + i * h, y, h)
            t = t_out
            if not np.all(np.isfinite(y)):
                throw(f"Integration diverged before t = {t_out:g}; reduce dt.", IntegratorError)
        out.append(y.copy())
    return out


def _propagate_adaptive(f, y0: np.ndarray, t0: float, grid: Sequence[float], spec: IntegratorSpec) -> list[np.ndarray]:
    shape = y0.shape
    if grid[-1] == t0:
        return [y0.copy() for _ in grid]

    def flat(t, y):
        return f(t, y.reshape(shape)).ravel()

    result = solve_ivp(
        flat,
        (t0, grid[-1]),
        y0.ravel(),
        method="DOP853",
        t_eval=list(grid),
        rtol=spec.rtol,
        atol=spec.atol,
        max_step=spec.dt if spec.dt is not None else np.inf,
    )
    if not result.success:
        throw(f"Adaptive integration failed: {result.message}", IntegratorError)
    return [result.y[:, i].reshape(shape) for i in range(len(grid))]


def _propagate(f, y0: np.ndarray, t0: float, spec: IntegratorSpec, dt: float) -> list[np.ndarray]:
    if spec.t_grid[0] < t0:
        throw(f"t_grid starts at {spec.t_grid[0]:g}, before the initial time {t0:g}.")
    if spec.method == "adaptive":
        return _propagate_adaptive(f, y0, t0, spec.t_grid, spec)
    return _propagate_rk4(f, y0, t0, spec.t_grid, dt)


def _truncation_error(cfg: SystemConfig, leaked: float, t: float) -> None:
    throw(
        f"Truncation leakage {leaked:.3e} at level n_max={cfg.n_max} (t={t:g}) exceeds "
        f"trunc_tol={cfg.trunc_tol:.1e}; increase n_max "
        f"(choose_n_max suggests {choose_n_max(cfg.gt_from_time(t), cfg.trunc_tol)}).",
        TruncationError,
    )


def integrate_schrodinger(psi0: LadderState, cfg: SystemConfig, spec: IntegratorSpec) -> SchrodingerTrajectory:
    if cfg.gamma != 0:
        throw("integrate_schrodinger is lossless only; use integrate_lindblad for gamma > 0.", UsageError)
    if psi0.amps.size != cfg.dim:
        throw(f"Initial state has {psi0.amps.size} levels, config expects {cfg.dim}.", ValidationError)
    check_normalized(psi0, cfg.trunc_tol)

    levels = cfg.dim + spec.guard_levels
    couplings = coupling_vector(cfg, levels)
    y0 = np.zeros(levels, dtype=complex)
    y0[: cfg.dim] = psi0.amps
    vacuum = abs(psi0.vac_amp) ** 2

    def rhs(_t, y):
        return hamiltonian_action(y, couplings)

    states = []
    for t, y in zip(spec.t_grid, _propagate(rhs, y0, psi0.t, spec, spec.step_for(cfg, levels))):
        drift = abs(vacuum + float(np.sum(np.abs(y) ** 2)) - 1.0)
        if drift > NORM_TOL:
            throw(f"Norm drift {drift:.3e} at t={t:g} exceeds {NORM_TOL:.0e}; reduce dt.", IntegratorError)
        amps = y[: cfg.dim]
        leaked = abs(amps[-1]) ** 2
        if leaked > cfg.trunc_tol:
            _truncation_error(cfg, leaked, t)
        states.append(LadderState(amps=amps, vac_amp=psi0.vac_amp, t=t))
    logger.debug("Schrödinger run: %d levels, %d outputs, method=%s", levels, len(states), spec.method)
    return SchrodingerTrajectory(states=tuple(states), g=cfg.g)


def _check_density(rho: DensityBlock) -> None:
    drift = abs(rho.trace() - 1.0)
    if drift > TRACE_TOL:
        throw(f"Initial density block has trace {rho.trace():.12g}; expected 1.")
    if not np.allclose(rho.alpha, rho.alpha.conj().T, atol=1e-12):
        throw("Initial alpha block is not Hermitian.")
    if np.min(np.linalg.eigvalsh(rho.alpha)) < -1e-10 or np.min(rho.beta) < 0:
        throw("Initial density block is not positive semidefinite.")


def integrate_lindblad(rho0: DensityBlock, cfg: SystemConfig, spec: IntegratorSpec) -> LindbladTrajectory:
    """RK integration of the α/β coefficient equations with optical decay rate gamma."""
    if rho0.n_max != cfg.n_max:
        throw(f"Density block has n_max={rho0.n_max}, config expects {cfg.n_max}.", ValidationError)
    _check_density(rho0)

    levels = cfg.dim + spec.guard_levels
    K = coupling_matrix(cfg, levels)
    gamma = cfg.gamma
    # Rows 0..L-1 hold alpha, row L holds beta.
    y0 = np.zeros((levels + 1, levels), dtype=complex)
    y0[: cfg.dim, : cfg.dim] = rho0.alpha
    y0[levels, : cfg.dim] = rho0.beta

    def rhs(_t, y):
        alpha = y[:levels]
        k_alpha = K @ alpha
        # α·K equals (K·αᵀ)ᵀ for the symmetric K
        alpha_k = (K @ alpha.T).T
        out = np.empty_like(y)
        out[:levels] = -1j * (k_alpha - alpha_k) - gamma * alpha
        out[levels] = gamma * np.diagonal(alpha)
        return out

    blocks, traces = [], []
    for t, y in zip(spec.t_grid, _propagate(rhs, y0, rho0.t, spec, spec.step_for(cfg, levels))):
        trace = float(np.real(np.trace(y[:levels])) + np.sum(np.real(y[levels])))
        drift = abs(trace - 1.0)
        if not drift <= TRACE_TOL:
            throw(
                f"Trace drift {drift:.3e} at t={t:g} exceeds {TRACE_TOL:.0e}; integrator failed.",
                IntegratorError,
            )
        alpha = y[: cfg.dim, : cfg.dim]
        leaked = float(np.real(alpha[-1, -1]))
        if leaked > cfg.trunc_tol:
            _truncation_error(cfg, leaked, t)
        blocks.append(DensityBlock(alpha=alpha, beta=np.real(y[levels, : cfg.dim]), t=t))
        traces.append(trace)
    logger.debug("Lindblad run: %d levels, gamma=%g, %d outputs", levels, gamma, len(blocks))
    return LindbladTrajectory(blocks=tuple(blocks), g=cfg.g, traces=tuple(traces))


@dataclass(frozen=True)
class RegisterTrajectory:
    """Amplitudes psi[i, n] with the photon in mode anti_stokes - i and n phonons."""

    times: tuple[float, ...]
    registers: tuple[np.ndarray, ...]
    anti_stokes: int
    g: float = 1.0

    @property
    def gt(self) -> np.ndarray:
        return self.g * np.array(self.times)

    def stacked(self) -> np.ndarray:
        return np.array(self.registers)

    def anti_stokes_weight(self) -> np.ndarray:
        return np.array([float(np.sum(np.abs(psi[: self.anti_stokes]) ** 2)) for psi in self.registers])

    def ladder_amplitudes(self, n_max: int) -> np.ndarray:
        # photon in mode -n together with n phonons
        n = np.arange(n_max + 1)
        return np.array([psi[self.anti_stokes + n, n] for psi in self.registers])


def register_generator(cfg: SystemConfig, levels: int, anti_stokes: int) -> sparse.csr_matrix:
    """g(A⊗b† + A†⊗b) on photon modes anti_stokes..-(levels-1) times phonon levels 0..levels-1.

    Suppressing mode m drops every term containing a_m or a_m†.
    """
    A, _ = shift_operators(levels - 1, anti_stokes)
    for mode in cfg.suppressed_modes:
        i = anti_stokes - mode
        if 0 <= i < A.shape[0]:
            A[i, :] = 0.0
            A[:, i] = 0.0
    A = sparse.csr_matrix(A)
    b, b_dag = phonon_operators(levels - 1)
    return (cfg.g * (sparse.kron(A, sparse.csr_matrix(b_dag)) + sparse.kron(A.T, sparse.csr_matrix(b)))).tocsr()


def integrate_register(
    cfg: SystemConfig, spec: IntegratorSpec, phonons: int = 0, anti_stokes: int | None = None
) -> RegisterTrajectory:
    """Evolve one photon in mode 0 with `phonons` quanta over every optical mode, anti-Stokes included."""
    if cfg.gamma != 0:
        throw("integrate_register is lossless only.", UsageError)
    if not 0 <= phonons < cfg.dim:
        throw(f"phonons must lie in 0..{cfg.n_max}, got {phonons}.")
    if anti_stokes is None:
        anti_stokes = max([phonons + 1, *(mode for mode in cfg.suppressed_modes if mode > 0)])
    if anti_stokes < 1:
        throw("anti_stokes must be at least 1")

    levels = cfg.dim + spec.guard_levels
    H = register_generator(cfg, levels, anti_stokes)
    shape = (anti_stokes + levels, levels)
    y0 = np.zeros(shape[0] * shape[1], dtype=complex)
    y0[anti_stokes * levels + phonons] = 1.0

    def rhs(_t, y):
        return -1j * (H @ y)

    registers = []
    for t, y in zip(spec.t_grid, _propagate(rhs, y0, 0.0, spec, spec.step_for(cfg, levels))):
        drift = abs(float(np.sum(np.abs(y) ** 2)) - 1.0)
        if drift > NORM_TOL:
            throw(f"Norm drift {drift:.3e} at t={t:g} exceeds {NORM_TOL:.0e}; reduce dt.", IntegratorError)
        psi = y.reshape(shape)
        leaked = float(np.sum(np.abs(psi[:, cfg.n_max]) ** 2))
        if leaked > cfg.trunc_tol:
            _truncation_error(cfg, leaked, t)
        if float(np.sum(np.abs(psi[0]) ** 2)) > cfg.trunc_tol:
            throw(
                f"Weight reached the top anti-Stokes mode m={anti_stokes} at t={t:g}; raise anti_stokes.",
                TruncationError,
            )
        registers.append(psi[:, : cfg.dim].copy())
    logger.debug("Register run: %dx%d, %d outputs", shape[0], shape[1], len(registers))
    return RegisterTrajectory(times=tuple(spec.t_grid), registers=tuple(registers), anti_stokes=anti_stokes, g=cfg.g)


def stop_band_deviation(cfg: SystemConfig, mode: int, spec: IntegratorSpec) -> float:
    open_cfg = cfg.with_changes(gamma=0.0, suppressed_modes=[])
    blocked_cfg = open_cfg.with_changes(suppressed_modes=[mode])
    anti_stokes = max(1, mode + 1)
    plain = integrate_register(open_cfg, spec, anti_stokes=anti_stokes).stacked()
    blocked = integrate_register(blocked_cfg, spec, anti_stokes=anti_stokes).stacked()
    return float(np.max(np.abs(blocked - plain)))


def check_glauber_factorization(gt: float, n_max_small: int) -> float:
    """Compare e^{X+Y}|ψ₀⟩ with e^X e^Y e^{-(gt)² AA†/2}|ψ₀⟩ on a small dense space.

    X = -i gt A b†, Y = -i gt A† b, ψ₀ = |φ₀, 0⟩. The deviation is taken over
    basis states at least two levels inside the truncation, where the
    hard boundary has no first-order effect.
    """
    if gt < 0:
        throw("gt must be nonnegative")
    if not 1 <= n_max_small <= GLAUBER_MAX_LEVELS:
        throw(f"n_max_small must lie in 1..{GLAUBER_MAX_LEVELS}, got {n_max_small}.")
    mu = gt * gt
    if mu + 4 * gt + GLAUBER_INTERIOR > n_max_small:
        throw(
            f"Support guard: Poisson mean {mu:g} + 4σ reaches within {GLAUBER_INTERIOR} levels of "
            f"n_max_small={n_max_small}; use a smaller gt or a larger space.",
            TruncationError,
        )

    # One anti-Stokes mode keeps |φ₀⟩ away from the register edge, so AA†|φ₀⟩ = |φ₀⟩.
    A, A_dag = shift_operators(n_max_small, anti_stokes=1)
    b, b_dag = phonon_operators(n_max_small)
    phonon_dim = n_max_small + 1
    X = -1j * gt * np.kron(A, b_dag)
    Y = -1j * gt * np.kron(A_dag, b)
    commutator_term = -0.5 * mu * np.kron(A @ A_dag, np.eye(phonon_dim))

    psi0 = np.zeros(A.shape[0] * phonon_dim, dtype=complex)
    psi0[1 * phonon_dim + 0] = 1.0
    exact = expm(X + Y) @ psi0
    factorized = expm(X) @ (expm(Y) @ (expm(commutator_term) @ psi0))

    # photon index i <-> mode 1 - i; interior means mode ≥ -(n - 2) and phonon ≤ n - 2
    limit = n_max_small - GLAUBER_INTERIOR
    photon_idx, phonon_idx = np.divmod(np.arange(psi0.size), phonon_dim)
    interior = (photon_idx <= limit + 1) & (phonon_idx <= limit)
    deviation = float(np.max(np.abs(exact - factorized)[interior]))
    logger.debug("Glauber check gt=%g n=%d deviation=%.3e", gt, n_max_small, deviation)
    return deviation
