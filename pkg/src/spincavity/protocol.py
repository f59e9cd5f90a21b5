"""GHZ-generation protocol: echo schedules, targets, fidelity metrics, budgets.

The entangling gate is the collective phase exp(i theta J_x^2) accumulated by
a spin-dependent cavity displacement that closes its phase-space loop at
delta*T = 2*k*pi. The echo composition splits the drive into two segments of
equal duration with laser phase 0 then pi; each segment's drive phase is
referenced to the segment start, which makes the second segment retrace the
first segment's cavity displacement exactly, at every total duration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .hilbert import (
    HilbertLayout,
    LayoutError,
    StateVector,
    DensityMatrix,
    spin_collective_jx,
    thermal_weights,
)
from .model import (
    HamiltonianRecipe,
    ModelError,
    SimParams,
    build_driven_hamiltonian,
    build_effective_hamiltonian,
    build_neglected_terms,
    build_raman_hamiltonian,
    build_rotated_hamiltonian,
    effective_eta,
)
from .engine import (
    PropagationSettings,
    TrajectoryResult,
    fit_state_jx2_angle,
    propagate,
    spin_jx2_exponential,
)

TWO_PI = 2.0 * math.pi

SOURCE_BUILDERS: dict[str, Callable[..., HamiltonianRecipe]] = {
    "full": build_driven_hamiltonian,
    "effective": build_effective_hamiltonian,
    "raman": build_raman_hamiltonian,
    "rotated": build_rotated_hamiltonian,
    "neglected": build_neglected_terms,
}

SCHEDULE_SOURCES = ("full", "effective")


class ProtocolError(ValueError):
    """Raised for invalid schedules or protocol parameters."""


@dataclass(frozen=True)
class PulseSegment:
    source: str
    phi: float
    duration: float

    def __post_init__(self):
        if self.duration <= 0:
            raise ProtocolError(f"segment duration must be > 0, got {self.duration}")
        if self.source not in SOURCE_BUILDERS:
            raise ProtocolError(f"unknown source model '{self.source}'")


@dataclass(frozen=True)
class PulseSchedule:
    """Ordered drive segments; each segment's time origin restarts at zero."""

    segments: tuple[PulseSegment, ...]

    @property
    def total_duration(self) -> float:
        return sum(seg.duration for seg in self.segments)

    def is_echo(self) -> bool:
        if len(self.segments) != 2:
            return False
        a, b = self.segments
        return (
            a.phi == 0.0
            and b.phi == math.pi
            and abs(a.duration - b.duration) < 1e-12 * max(a.duration, 1.0)
            and a.source == b.source
        )


def echo_schedule(total_t: float, source: str = "effective") -> PulseSchedule:
    """Two equal segments with laser phase 0 then pi (sign-flipped drive)."""
    if total_t <= 0:
        raise ProtocolError(f"total_t must be > 0, got {total_t}")
    if source not in SCHEDULE_SOURCES:
        raise ProtocolError(f"schedule source must be one of {SCHEDULE_SOURCES}")
    half = total_t / 2.0
    return PulseSchedule(
        (PulseSegment(source, 0.0, half), PulseSegment(source, math.pi, half))
    )


def gamma_of(t: float, eta: float, delta: float) -> float:
    """Echo-gate collective phase gamma(t) = (eta^2/delta)(2 sin(delta t/2)/delta - t).

    Nonpositive for t >= 0; at loop closure delta*t = 2*k*pi it equals
    -eta^2 t / delta, so the realized gate is exp(+i |gamma| J_x^2).
    """
    if delta == 0:
        raise ValueError("delta must be nonzero")
    return (eta**2 / delta) * (2.0 / delta * math.sin(delta * t / 2.0) - t)


def spin_jx_rotation(n_sites: int, angle: float) -> np.ndarray:
    """exp(-i angle J_x) on the spin sector."""
    jx = spin_collective_jx(n_sites)
    evals, evecs = np.linalg.eigh(jx)
    return (evecs * np.exp(-1j * angle * evals)) @ evecs.conj().T


def ghz_target(n_qubits: int) -> np.ndarray:
    """Spin-sector GHZ state produced by the protocol.

    Even N: exp(+i pi/2 J_x^2)|0...0> in closed form,
    (1/sqrt2)(e^{+i pi/4}|0..0> + e^{-i pi(1/4 + N/2)}|1..1>).
    Odd N: the extra rotation exp(-i pi/2 J_x) turns the two-branch
    superposition into a GHZ state of the same form.
    """
    if n_qubits < 2:
        raise ProtocolError(f"GHZ target needs N >= 2, got {n_qubits}")
    dim = 2**n_qubits
    if n_qubits % 2 == 0:
        tgt = np.zeros(dim, dtype=complex)
        tgt[0] = np.exp(1j * math.pi / 4.0) / math.sqrt(2.0)
        tgt[-1] = np.exp(-1j * math.pi * (0.25 + n_qubits / 2.0)) / math.sqrt(2.0)
        return tgt
    zero = np.zeros(dim, dtype=complex)
    zero[0] = 1.0
    state = spin_jx2_exponential(n_qubits, math.pi / 2.0) @ zero
    return spin_jx_rotation(n_qubits, math.pi / 2.0) @ state


def ghz_target_state(layout: HilbertLayout, fock_n: int = 0) -> StateVector:
    """GHZ target extended by the cavity basis state |fock_n>."""
    spin = ghz_target(layout.n_sites)
    full = np.zeros(layout.dim, dtype=complex)
    full = np.kron(spin, _fock_basis(layout.fock_dim, fock_n))
    return StateVector(layout, full)


def _fock_basis(fock_dim: int, n: int) -> np.ndarray:
    v = np.zeros(fock_dim, dtype=complex)
    v[n] = 1.0
    return v


def fidelity(state, target, layout: HilbertLayout | None = None,
             mode: str = "trace", cavity_n: int = 0) -> float:
    """Overlap fidelity |<target|state>|^2 in [0, 1].

    `state` may be a StateVector/DensityMatrix on a spin (x) cavity layout or
    a bare spin-sector array; `target` is a spin-sector array (or StateVector
    whose spin part is used). With a cavity factor present, mode "trace"
    (default) traces the cavity out; mode "project" projects onto the cavity
    basis state |cavity_n> without renormalizing.
    """
    if mode not in ("trace", "project"):
        raise ValueError(f"unknown fidelity mode '{mode}'")
    tgt = target.amplitudes if isinstance(target, StateVector) else np.asarray(target, dtype=complex)

    if isinstance(state, StateVector):
        layout = state.layout
        amp = state.amplitudes
    elif isinstance(state, DensityMatrix):
        layout = state.layout
        amp = None
    else:
        amp = np.asarray(state, dtype=complex)

    if isinstance(state, DensityMatrix):
        spin_dim = state.layout.spin_dim
        if tgt.shape[0] != spin_dim:
            raise LayoutError("target dimension does not match the spin sector")
        rho = state.spin_reduced() if mode == "trace" else _project_cavity_rho(state, cavity_n)
        return float(np.clip(np.real(tgt.conj() @ rho @ tgt), 0.0, 1.0))

    if layout is not None and amp.shape[0] == layout.dim and layout.fock_dim > 1 \
            and tgt.shape[0] == layout.spin_dim:
        psi = amp.reshape(layout.spin_dim, layout.fock_dim)
        if mode == "trace":
            rho = psi @ psi.conj().T
            val = np.real(tgt.conj() @ rho @ tgt)
        else:
            val = abs(np.vdot(tgt, psi[:, cavity_n])) ** 2
        return float(np.clip(val, 0.0, 1.0))

    if amp.shape != tgt.shape:
        raise LayoutError(
            f"state dim {amp.shape[0]} does not match target dim {tgt.shape[0]}"
        )
    return float(np.clip(abs(np.vdot(tgt, amp)) ** 2, 0.0, 1.0))


def _project_cavity_rho(state: DensityMatrix, cavity_n: int) -> np.ndarray:
    s, f = state.layout.spin_dim, state.layout.fock_dim
    r4 = state.matrix.reshape(s, f, s, f)
    return np.ascontiguousarray(r4[:, cavity_n, :, cavity_n])


def infidelity_model(n_qubits: int, eta: float, omega: float, t: float) -> float:
    """Second-order error estimate F_in = xi (1 - cos(2 Omega t)).

    xi = N(N-1) eta^2 / (8 Omega^2); vanishes at the commensurate read-out
    times Omega t = 2 n pi and identically for a single qubit.
    """
    if omega <= 0:
        raise ValueError(f"Omega must be > 0, got {omega}")
    xi = n_qubits * (n_qubits - 1) * eta**2 / (8.0 * omega**2)
    return xi * (1.0 - math.cos(2.0 * omega * t))


def composite_fidelity(overlap: float, f_in: float) -> float:
    """Product form overlap * (1 - F_in), clamped to [0, 1]."""
    if not 0.0 <= overlap <= 1.0 + 1e-12:
        raise ValueError(f"overlap must lie in [0, 1], got {overlap}")
    return float(np.clip(overlap * (1.0 - f_in), 0.0, 1.0))


def commensurability_check(delta: float, omega: float, t: float) -> tuple[float, float, bool]:
    """Residuals (delta*t mod 2pi in [-pi, pi), Omega*t mod 4pi in [-2pi, 2pi)).

    The schedule is commensurate when both residuals are below 1e-9 relative
    to the elapsed phase (threshold 1e-9 * max(t, 1)).
    """
    if delta <= 0 or omega < 0:
        raise ValueError("need delta > 0 and Omega >= 0")
    r_delta = math.remainder(delta * t, TWO_PI)
    r_omega = 2.0 * math.remainder(omega * t / 2.0, TWO_PI)
    tol = 1e-9 * max(abs(t), 1.0)
    return r_delta, r_omega, bool(abs(r_delta) <= tol and abs(r_omega) <= tol)


@dataclass(frozen=True)
class GateReport:
    """Outcome of one protocol run (thermal-averaged where applicable)."""

    n_qubits: int
    source: str
    total_duration: float
    times: np.ndarray
    fidelity_series: np.ndarray | None
    f_in_series: np.ndarray
    final_fidelity: float | None
    final_fidelity_composite: float | None
    gamma_achieved: float | None
    gamma_model: float
    commensurability: tuple[float, float, bool]
    fidelity_mode: str
    per_fock_fidelity: dict[int, float]
    norm_defect_series: np.ndarray
    top_fock_series: np.ndarray
    warnings: tuple[str, ...]
    steps_taken: int

    @property
    def max_norm_defect(self) -> float:
        return float(np.max(self.norm_defect_series))

    @property
    def max_top_fock_pop(self) -> float:
        return float(np.max(self.top_fock_series))


def run_schedule(
    params: SimParams,
    schedule: PulseSchedule,
    initial: StateVector,
    settings: PropagationSettings | None = None,
    times: Sequence[float] | None = None,
) -> TrajectoryResult:
    """Propagate a schedule segment by segment (segment-local time origins).

    Snapshot `times` are global; segment boundaries are attributed to the
    earlier segment. Returns a combined TrajectoryResult over the full run.
    """
    layout = initial.layout
    total = schedule.total_duration
    grid = np.asarray(
        times if times is not None else (0.0, total), dtype=float
    )
    if grid[0] < -1e-12 or grid[-1] > total + 1e-9:
        raise ProtocolError("snapshot times must lie within the schedule duration")

    states: list[np.ndarray] = []
    out_times: list[float] = []
    norm_def: list[float] = []
    top_pop: list[float] = []
    warnings: list[str] = []
    offset = 0.0
    current = initial.amplitudes.astype(complex)
    steps = 0
    failed = False
    for seg in schedule.segments:
        recipe = SOURCE_BUILDERS[seg.source](params, phi=seg.phi)
        in_seg = grid[(grid >= offset - 1e-12) & (grid <= offset + seg.duration + 1e-12)]
        loc = np.clip(in_seg - offset, 0.0, seg.duration)
        loc_times = np.unique(np.concatenate([[0.0], loc, [seg.duration]]))
        res = propagate(recipe, current, 0.0, seg.duration, settings, times=loc_times)
        for t_loc, st, nd, tp in zip(res.times, res.states, res.norm_defects,
                                     res.top_fock_pops):
            t_glob = t_loc + offset
            on_grid = np.any(np.abs(grid - t_glob) < 1e-9)
            fresh = not out_times or t_glob > out_times[-1] + 1e-9
            if on_grid and fresh:
                out_times.append(t_glob)
                states.append(st)
                norm_def.append(nd)
                top_pop.append(tp)
        current = res.final_state
        offset += seg.duration
        steps += res.steps_taken
        failed = failed or res.failed
        warnings.extend(w for w in res.warnings if w not in warnings)

    return TrajectoryResult(
        times=np.asarray(out_times),
        states=tuple(states),
        norm_defects=np.asarray(norm_def),
        top_fock_pops=np.asarray(top_pop),
        warnings=tuple(warnings),
        steps_taken=steps,
        failed=failed,
    )


def run_ghz_protocol(
    params: SimParams,
    source: str = "effective",
    settings: PropagationSettings | None = None,
    k: int = 1,
    n_time_samples: int = 201,
    fidelity_mode: str = "trace",
) -> GateReport:
    """Run the echo-composed entangling protocol from |0...0> and report.

    Total duration is the k-th loop-closure time T = 2*k*pi/delta (for the
    design point delta = 2*sqrt(k)*eta this realizes |gamma| = pi/2). The
    cavity starts in Fock |n> components weighted thermally when
    params.n_bar > 0; fidelities are averaged over components.
    """
    if source not in SCHEDULE_SOURCES:
        raise ProtocolError(f"source must be one of {SCHEDULE_SOURCES}")
    if k < 1:
        raise ProtocolError(f"k must be >= 1, got {k}")
    if n_time_samples < 2:
        raise ProtocolError("need at least 2 time samples")
    settings = settings or PropagationSettings()
    layout = params.qubit_layout()
    total = TWO_PI * k / params.delta
    schedule = echo_schedule(total, source)
    grid = np.linspace(0.0, total, n_time_samples)

    warnings: list[str] = []
    if not params.is_uniform():
        warnings.append(
            "nonuniform eta_j: collective-phase compensation not applied"
        )
    omega_ratio = params.Omega / params.delta if params.delta else 0.0
    if params.Omega > 0 and abs(omega_ratio / 2.0 - round(omega_ratio / 2.0)) > 1e-9:
        warnings.append(
            f"Omega/delta = {omega_ratio:.6g} is not an even integer; "
            f"drive-frame rotation does not close at read-out"
        )

    if params.n_bar > 0:
        # components below 1e-9 weight contribute less than 1e-8 to any
        # fidelity and would otherwise drag boundary-corrupted dynamics in
        weights, _ = thermal_weights(params.n_bar, params.fock_dim)
        components = [(n, float(w)) for n, w in enumerate(weights) if w > 1e-9]
    else:
        components = [(0, 1.0)]

    n_spin = 2**params.N
    target = ghz_target(params.N) if params.N >= 2 else None
    # The fidelity series reads the state out "as if stopped here": the odd-N
    # correction rotation is folded into the comparison target instead of
    # being applied to every snapshot.
    series_target = None
    corr = spin_jx_rotation(params.N, math.pi / 2.0) if params.N % 2 == 1 else None
    if target is not None:
        series_target = target if corr is None else corr.conj().T @ target

    fid_series = np.zeros(len(grid)) if target is not None else None
    f_in_series = np.array([
        infidelity_model(params.N, params.eta, params.Omega, t) if params.Omega > 0 else 0.0
        for t in grid
    ])
    per_fock: dict[int, float] = {}
    final_spin_rho = np.zeros((n_spin, n_spin), dtype=complex)
    norm_def = np.zeros(len(grid))
    top_pop = np.zeros(len(grid))
    steps = 0

    for fock_n, weight in components:
        if fock_n >= params.fock_dim:
            raise ProtocolError(
                f"thermal component |{fock_n}> beyond the Fock truncation"
            )
        initial = layout.basis_state([0] * params.N, fock_n)
        traj = run_schedule(params, schedule, initial, settings, times=grid)
        steps += traj.steps_taken
        warnings.extend(w for w in traj.warnings if w not in warnings)
        norm_def = np.maximum(norm_def, traj.norm_defects)
        top_pop = np.maximum(top_pop, traj.top_fock_pops)
        for i, st in enumerate(traj.states):
            psi = st.reshape(n_spin, params.fock_dim)
            if fid_series is not None:
                if fidelity_mode == "trace":
                    val = np.real(series_target.conj() @ (psi @ (psi.conj().T @ series_target)))
                else:
                    val = abs(np.vdot(series_target, psi[:, fock_n])) ** 2
                fid_series[i] += weight * float(np.clip(val, 0.0, 1.0))
        psi_end = traj.final_state.reshape(n_spin, params.fock_dim)
        final_spin_rho += weight * (psi_end @ psi_end.conj().T)
        if target is not None:
            per_fock[fock_n] = _readout_fidelity(psi_end, target, corr,
                                                 fidelity_mode, fock_n)

    final_fid = None
    final_comp = None
    if target is not None:
        final_fid = float(sum(w * per_fock[n] for n, w in components))
        final_comp = composite_fidelity(min(final_fid, 1.0), float(f_in_series[-1]))

    gamma_fit = None
    evals, evecs = np.linalg.eigh(final_spin_rho)
    try:
        gamma_fit, _ = fit_state_jx2_angle(evecs[:, -1], params.N)
    except (ValueError, ZeroDivisionError):
        gamma_fit = None

    return GateReport(
        n_qubits=params.N,
        source=source,
        total_duration=total,
        times=grid,
        fidelity_series=fid_series,
        f_in_series=f_in_series,
        final_fidelity=final_fid,
        final_fidelity_composite=final_comp,
        gamma_achieved=gamma_fit,
        gamma_model=gamma_of(total, params.eta, params.delta),
        commensurability=commensurability_check(params.delta, params.Omega, total),
        fidelity_mode=fidelity_mode,
        per_fock_fidelity=per_fock,
        norm_defect_series=norm_def,
        top_fock_series=top_pop,
        warnings=tuple(warnings),
        steps_taken=steps,
    )


def _readout_fidelity(psi_end: np.ndarray, target: np.ndarray,
                      corr: np.ndarray | None, mode: str, fock_n: int) -> float:
    """Final-time fidelity with the odd-N correction applied at read-out."""
    if mode == "trace":
        rho = psi_end @ psi_end.conj().T
        if corr is not None:
            rho = corr @ rho @ corr.conj().T
        val = np.real(target.conj() @ rho @ target)
    else:
        vec = psi_end[:, fock_n]
        if corr is not None:
            vec = corr @ vec
        val = abs(np.vdot(target, vec)) ** 2
    return float(np.clip(val, 0.0, 1.0))


@dataclass(frozen=True)
class BudgetReport:
    """Coupling, gate time, and decoherence figures of merit (rad/ns, ns)."""

    eta: float
    gate_time: float
    gamma_eff: float
    kappa: float
    q_factor: float
    omega_c: float
    n_qubits: int
    n_bar: float

    @property
    def t_gamma_eff_n(self) -> float:
        return self.gate_time * self.gamma_eff * self.n_qubits

    @property
    def t_kappa_thermal(self) -> float:
        return self.gate_time * self.kappa * (self.n_bar + 1.0)


def decoherence_budget(params: SimParams) -> BudgetReport:
    """Derived rates from the three-level parameters.

    eta is taken in the far-detuned limit 2 G Omega_L / Delta (the regime the
    level parameters describe); T = pi/eta; Gamma_eff = Gamma0 Omega_L G /
    Delta^2; kappa = omega_c / Q.
    """
    lp = params.lambda_params
    if lp is None:
        raise ModelError("decoherence_budget requires lambda_params")
    if lp.gamma0 is None:
        raise ModelError("decoherence_budget requires lambda_params.gamma0")
    if lp.q_factor is None or lp.q_factor <= 0:
        raise ModelError("decoherence_budget requires a positive q_factor")
    if lp.Delta == 0:
        raise ModelError("Delta must be nonzero")
    eta = 2.0 * lp.G * lp.Omega_L / lp.Delta
    gate_time = math.pi / eta
    gamma_eff = lp.gamma0 * lp.Omega_L * lp.G / lp.Delta**2
    kappa = lp.omega_c / lp.q_factor
    return BudgetReport(
        eta=eta,
        gate_time=gate_time,
        gamma_eff=gamma_eff,
        kappa=kappa,
        q_factor=lp.q_factor,
        omega_c=lp.omega_c,
        n_qubits=params.N,
        n_bar=params.n_bar,
    )


def dyson_infidelity_oracle(params: SimParams, t: float, n_grid: int = 4001) -> float:
    """Second-order error of the fast counter-rotating terms, by quadrature.

    Works in the interaction picture of delta a^dag a + Omega J_x, where the
    dropped terms oscillate at 2(Omega - delta) and 2(Omega + delta); the
    propagator is expanded to second order in the Dyson series with the
    scalar time integrals evaluated numerically (no stationary-envelope
    shortcut). Requires a loop-closure time delta*t = 2*n*pi; returns
    1 - |<target|U'|target>|^2 for the GHZ target with the cavity in vacuum.
    """
    if params.Omega <= 0:
        raise ProtocolError("dyson_infidelity_oracle requires Omega > 0")
    resid = math.remainder(params.delta * t, TWO_PI)
    if abs(resid) > 1e-9 * max(t, 1.0):
        raise ProtocolError(
            f"delta*t = 2*n*pi required (residual {resid:.3e}); "
            f"the estimate is only meaningful at loop closure"
        )
    layout = params.qubit_layout()
    terms = build_neglected_terms(params, phi=0.0).terms
    # frame conjugation doubles each envelope frequency but keeps the matrices
    freqs = [2.0 * term.frequency for term in terms]
    mats = [term.envelope(0.0) * term.matrix for term in terms]

    s_grid = np.linspace(0.0, t, n_grid)
    ds = s_grid[1] - s_grid[0]
    phases = [np.exp(1j * w * s_grid) for w in freqs]

    # cumulative inner integrals by the trapezoid rule
    inner = []
    for ph in phases:
        c = np.concatenate([[0.0], np.cumsum((ph[1:] + ph[:-1]) / 2.0) * ds])
        inner.append(c)

    first = [np.trapezoid(ph, dx=ds) for ph in phases]
    second = np.zeros((len(terms), len(terms)), dtype=complex)
    for i, ph_i in enumerate(phases):
        for j, c_j in enumerate(inner):
            integrand = ph_i * c_j
            second[i, j] = np.trapezoid(integrand, dx=ds)

    dim = layout.dim
    u_err = np.eye(dim, dtype=complex)
    for i, m in enumerate(mats):
        u_err = u_err + (-1j * first[i]) * m
    for i, mi in enumerate(mats):
        for j, mj in enumerate(mats):
            if second[i, j] != 0.0:
                u_err = u_err - second[i, j] * (mi @ mj)

    if params.N >= 2:
        tgt_spin = ghz_target(params.N)
        if params.N % 2 == 1:
            # undo the read-out rotation; the error operator acts pre-correction
            tgt_spin = spin_jx_rotation(params.N, -math.pi / 2.0) @ tgt_spin
    else:
        tgt_spin = np.zeros(2, dtype=complex)
        tgt_spin[0] = 1.0
    psi = np.kron(tgt_spin, _fock_basis(layout.fock_dim, 0))
    amp = np.vdot(psi, u_err @ psi)
    return float(max(0.0, 1.0 - abs(amp) ** 2))
