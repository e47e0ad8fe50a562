"""Iterative convolution-thresholding drivers.

Both drivers alternate a conduction solve on the blended materials with
a volume-exact thresholding update of the design field.

``run_classical`` applies the thresholded field unconditionally. Each
step minimizes the linearized objective, which for pure perimeter flows
is monotone, but with the conduction terms the energy J_tau may
oscillate.

``run_prediction_correction`` treats the thresholded field as a
prediction: the candidate swap sets A (0 -> 1) and B (1 -> 0) are ranked
by the potential Phi, and a line-search over swap counts
m_s = floor(N theta^s), s = 0, 1, ... accepts the first trial that
strictly decreases J_tau. Exhausting all counts down to m < 1 means no
single most-favorable swap improves the energy, which is the method's
convergence signal (termination "correction_exhausted"). Accepted
iterations therefore produce a strictly decreasing J_tau sequence.

Volume is conserved exactly: every iterate carries round(beta * n_nodes)
nodes of phase 1.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .cases import ProblemCase, volume_target
from .convolution import KernelParams, _blend_from_conv, _convolve_values
from .energy import EnergyBreakdown, EnergyParams, compute_phi, evaluate_energy
from .fem import LinearHeatSystem, SolverSettings, Triangulation
from .fields import IndicatorField, ScalarField, field_diff_norm
from .thresholding import PredictionSets, prediction_sets, volume_threshold

__all__ = [
    "IctmConfig",
    "IterationRecord",
    "RunResult",
    "CorrectionState",
    "CorrectionResult",
    "correction_step",
    "run_classical",
    "run_prediction_correction",
    "run",
    "VARIANTS",
]

VARIANTS = ("classical", "prediction_correction")


@dataclass(frozen=True)
class IctmConfig:
    """Optimization controls.

    tol is compared against the volume-weighted norm of the design
    update; the default 1e-6 lies below sqrt(cell_volume) for any legal
    grid, so the run stops exactly when an update flips no nodes.
    """

    tau: float
    gamma: float
    xi: float
    theta: float = 0.5
    tol: float = 1e-6
    max_outer_iters: int = 500
    variant: str = "prediction_correction"
    seed: int = 0
    solver: SolverSettings = SolverSettings()
    extension: str = "mirror"

    def __post_init__(self):
        KernelParams(self.tau, self.extension)  # validates tau and extension
        if self.gamma < 0.0:
            raise ValueError("gamma must be non-negative")
        if self.xi < 0.0:
            raise ValueError("xi must be non-negative")
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if self.tol < 0.0:
            raise ValueError("tol must be non-negative")
        if self.max_outer_iters < 0:
            raise ValueError("max_outer_iters must be non-negative")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    @property
    def kernel(self) -> KernelParams:
        return KernelParams(self.tau, self.extension)


@dataclass(frozen=True)
class IterationRecord:
    """One row of the run log; k = 0 describes the initial design."""

    k: int
    J: float
    J_tau: float
    volume_fraction: float
    flipped_nodes: int
    correction_depth: int
    wall_time_ms: float


@dataclass(frozen=True)
class RunResult:
    chi_final: IndicatorField
    records: tuple
    termination: str  # tol_reached | correction_exhausted | max_iters


@dataclass(frozen=True)
class CorrectionState:
    """Inputs the correction needs about the current iterate."""

    chi: IndicatorField
    T: ScalarField
    T_star: ScalarField
    phi: ScalarField
    J_tau: float


@dataclass(frozen=True)
class CorrectionResult:
    chi_new: IndicatorField
    T_new: ScalarField
    breakdown: EnergyBreakdown
    depth: int
    flipped: int
    improved: bool


class _StateEval:
    """Solved conduction state of one design."""

    __slots__ = ("chi", "conv", "kappa", "q", "b", "T", "breakdown")

    def __init__(self, chi, conv, kappa, q, b, T, breakdown):
        self.chi = chi
        self.conv = conv
        self.kappa = kappa
        self.q = q
        self.b = b
        self.T = T
        self.breakdown = breakdown


class _Engine:
    """Shared per-run machinery: mesh, assembler, solver and energy params."""

    def __init__(self, case: ProblemCase, cfg: IctmConfig):
        self.case = case
        self.cfg = cfg
        self.grid = case.grid
        self.tri = Triangulation(case.grid)
        self.kernel = cfg.kernel
        self.params = EnergyParams(
            kappa1=case.kappa1, kappa2=case.kappa2, q1=case.q1, q2=case.q2,
            gamma=cfg.gamma, xi=cfg.xi, kernel=self.kernel,
        )
        self.target = volume_target(case)
        self.system = LinearHeatSystem(self.tri.assembler(case.bc), cfg.solver)

    def check_initial(self, chi0: IndicatorField):
        if chi0.grid != self.grid:
            raise ValueError("initial design grid does not match case grid")
        if chi0.popcount() != self.target:
            raise ValueError(
                f"initial design carries {chi0.popcount()} nodes, volume target is {self.target}"
            )

    def evaluate(self, chi: IndicatorField) -> _StateEval:
        conv = _convolve_values(chi.values.astype(np.float64), self.grid, self.kernel)
        kappa, q = _blend_from_conv(
            conv, self.params.kappa1, self.params.kappa2, self.params.q1, self.params.q2
        )
        self.system.set_kappa(kappa)
        b = self.system.assembler.load_vector(q)
        x = self.system.solve(b)
        x[self.system.assembler.is_dirichlet] = 0.0
        T = ScalarField(self.grid, x)
        breakdown = evaluate_energy(chi, T, self.tri, self.params, conv_chi=conv)
        return _StateEval(chi, conv, kappa, q, b, T, breakdown)

    def adjoint(self, st: _StateEval) -> ScalarField:
        """Adjoint solve at st; assumes the system still holds st's matrix."""
        rhs = -(st.b + self.params.xi * (self.system.matrix @ st.T.values))
        rhs[self.system.assembler.is_dirichlet] = 0.0
        x = self.system.solve(rhs)
        x[self.system.assembler.is_dirichlet] = 0.0
        return ScalarField(self.grid, x)

    def phi(self, st: _StateEval, T_star: ScalarField) -> ScalarField:
        return compute_phi(st.chi, st.T, T_star, self.tri, self.params, conv_chi=st.conv)

    def swap(self, chi: IndicatorField, sets: PredictionSets, m: int) -> IndicatorField:
        vals = chi.values.copy()
        vals[sets.A[:m]] = 1
        vals[sets.B[:m]] = 0
        return IndicatorField(self.grid, vals)

    def correction(self, chi: IndicatorField, J_ref: float, sets: PredictionSets):
        """First trial count m_s = floor(N theta^s) that strictly lowers J_tau.

        Returns (state, depth, flipped) or None when every count down to
        m < 1 fails, which is the method's convergence signal.
        """
        tried = set()
        s = 0
        while True:
            m = int(np.floor(sets.N * self.cfg.theta**s))
            if m < 1:
                return None
            if m not in tried:
                tried.add(m)
                trial = self.evaluate(self.swap(chi, sets, m))
                if trial.breakdown.J_tau < J_ref:
                    return trial, s, 2 * m
            s += 1

    def record(self, k, breakdown, flipped, depth, t_ms) -> IterationRecord:
        return IterationRecord(
            k=k,
            J=breakdown.J,
            J_tau=breakdown.J_tau,
            volume_fraction=self.target / self.grid.n_nodes,
            flipped_nodes=int(flipped),
            correction_depth=int(depth),
            wall_time_ms=float(t_ms),
        )


def _emit(on_iteration, record, chi, breakdown):
    if on_iteration is not None:
        on_iteration(record, chi, breakdown)


def run_classical(case: ProblemCase, cfg: IctmConfig, chi0: IndicatorField,
                  on_iteration=None) -> RunResult:
    """Unconditional thresholding iteration (no energy-decay guarantee)."""
    eng = _Engine(case, cfg)
    eng.check_initial(chi0)
    chi = chi0
    tic = time.perf_counter()
    st = eng.evaluate(chi)
    records = [eng.record(0, st.breakdown, 0, 0, 1e3 * (time.perf_counter() - tic))]
    _emit(on_iteration, records[-1], chi, st.breakdown)

    termination = "max_iters"
    k = 0
    while k < cfg.max_outer_iters:
        tic = time.perf_counter()
        T_star = eng.adjoint(st)
        phi = eng.phi(st, T_star)
        chi_new = volume_threshold(phi, eng.target).chi_new
        flipped = int(np.count_nonzero(chi_new.values != chi.values))
        if flipped == 0:
            termination = "tol_reached"
            break
        chi_prev, chi = chi, chi_new
        st = eng.evaluate(chi)
        k += 1
        records.append(
            eng.record(k, st.breakdown, flipped, 0, 1e3 * (time.perf_counter() - tic))
        )
        _emit(on_iteration, records[-1], chi, st.breakdown)
        if field_diff_norm(chi, chi_prev) <= cfg.tol:
            termination = "tol_reached"
            break

    return RunResult(chi_final=chi, records=tuple(records), termination=termination)


def run_prediction_correction(case: ProblemCase, cfg: IctmConfig, chi0: IndicatorField,
                              on_iteration=None) -> RunResult:
    """Thresholding with the energy-decay line search over swap counts."""
    eng = _Engine(case, cfg)
    eng.check_initial(chi0)
    chi = chi0
    tic = time.perf_counter()
    st = eng.evaluate(chi)
    records = [eng.record(0, st.breakdown, 0, 0, 1e3 * (time.perf_counter() - tic))]
    _emit(on_iteration, records[-1], chi, st.breakdown)

    termination = "max_iters"
    k = 0
    while k < cfg.max_outer_iters:
        tic = time.perf_counter()
        T_star = eng.adjoint(st)
        phi = eng.phi(st, T_star)
        sets = prediction_sets(phi, chi, eng.target)
        if sets.N == 0:
            termination = "tol_reached"
            break
        accepted = eng.correction(chi, st.breakdown.J_tau, sets)
        if accepted is None:
            termination = "correction_exhausted"
            break
        st, depth, flipped = accepted
        chi_prev, chi = chi, st.chi
        k += 1
        records.append(
            eng.record(k, st.breakdown, flipped, depth, 1e3 * (time.perf_counter() - tic))
        )
        _emit(on_iteration, records[-1], chi, st.breakdown)
        if field_diff_norm(chi, chi_prev) <= cfg.tol:
            termination = "tol_reached"
            break

    return RunResult(chi_final=chi, records=tuple(records), termination=termination)


def run(case: ProblemCase, cfg: IctmConfig, chi0: IndicatorField, on_iteration=None) -> RunResult:
    """Dispatch on cfg.variant."""
    if cfg.variant == "classical":
        return run_classical(case, cfg, chi0, on_iteration)
    return run_prediction_correction(case, cfg, chi0, on_iteration)


def correction_step(case: ProblemCase, cfg: IctmConfig, state: CorrectionState,
                    sets: PredictionSets) -> CorrectionResult:
    """One standalone correction from an explicit iterate state.

    Re-solves trial designs with a fresh engine; improved = False means
    every swap count failed and chi is returned unchanged.
    """
    eng = _Engine(case, cfg)
    if state.chi.popcount() != eng.target:
        raise ValueError("state volume does not match the case target")
    accepted = eng.correction(state.chi, state.J_tau, sets)
    if accepted is None:
        st = eng.evaluate(state.chi)
        return CorrectionResult(
            chi_new=state.chi, T_new=st.T, breakdown=st.breakdown,
            depth=0, flipped=0, improved=False,
        )
    trial, depth, flipped = accepted
    return CorrectionResult(
        chi_new=trial.chi, T_new=trial.T, breakdown=trial.breakdown,
        depth=depth, flipped=flipped, improved=True,
    )
