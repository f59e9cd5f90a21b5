"""Time-dependent Hamiltonian recipes for the driven qubit-cavity system.

Model hierarchy (all in rad/ns, hbar = 1):

* three-level Raman model: sites are (|0>, |1>, |e>) Lambda systems coupled
  to the cavity (strength G) and a classical laser (strength Omega_L); used
  only as the small-N validation oracle for the adiabatic elimination.
* Raman qubit-cavity model: eta (a sigma+ e^{-i(delta t - phi)} + h.c.).
* driven model: Raman model plus the resonant microwave drive Omega J_x;
  this is the numeric truth model.
* rotated-frame model: the driven model in the interaction picture of the
  drive, which splits exactly into effective + neglected parts.
* effective model: eta (a e^{-i(delta t - phi)} + h.c.) J_x, whose propagator
  is known in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .hilbert import (
    HilbertLayout,
    LayoutError,
    collective_jx,
    embed_site_op,
    fock_ops,
    hermiticity_defect,
    site_transition,
    SIGMA_X,
)

TWO_PI = 2.0 * np.pi

# Qubit |+/-> eigenstates of sigma_x, used by the rotated-frame builders.
_PLUS = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
_MINUS = np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0)
PROJ_PM = np.outer(_PLUS, _MINUS.conj())   # |+><-|
PROJ_MP = np.outer(_MINUS, _PLUS.conj())   # |-><+|
PROJ_PM.setflags(write=False)
PROJ_MP.setflags(write=False)


class ModelError(ValueError):
    """Raised for invalid physical parameters or recipe misuse."""


@dataclass(frozen=True)
class LambdaParams:
    """Three-level (Lambda) site parameters, all angular frequencies in rad/ns.

    The cavity couples |0> <-> |e| with strength G; the laser couples
    |1> <-> |e| with strength Omega_L and carries phase phi. Detunings are
    derived from the stored level/drive frequencies:
    Delta = omega_e0 - omega_c and delta_raman = omega_c - omega_10 - omega_L.
    """

    G: float
    Omega_L: float
    omega_c: float
    omega_10: float
    omega_L: float
    omega_e0: float
    gamma0: float | None = None   # excited-state spontaneous decay rate
    q_factor: float | None = None

    @property
    def Delta(self) -> float:
        return self.omega_e0 - self.omega_c

    @property
    def delta_raman(self) -> float:
        return self.omega_c - self.omega_10 - self.omega_L

    @property
    def omega_e1(self) -> float:
        return self.omega_e0 - self.omega_10

    @classmethod
    def from_detunings(
        cls,
        G: float,
        Omega_L: float,
        Delta: float,
        delta: float,
        omega_c: float,
        omega_10: float,
        gamma0: float | None = None,
        q_factor: float | None = None,
    ) -> "LambdaParams":
        """Build a consistent parameter set from the detunings (Delta, delta)."""
        return cls(
            G=G,
            Omega_L=Omega_L,
            omega_c=omega_c,
            omega_10=omega_10,
            omega_L=omega_c - omega_10 - delta,
            omega_e0=omega_c + Delta,
            gamma0=gamma0,
            q_factor=q_factor,
        )


@dataclass(frozen=True)
class SimParams:
    """All protocol-level physical parameters (angular frequencies, rad/ns).

    eta_j, when given, overrides the uniform eta per qubit; nonuniform
    couplings are allowed by the builders but leave the collective gate
    phases uncompensated.
    """

    N: int
    eta: float
    delta: float
    Omega: float = 0.0
    phi: float = 0.0
    n_max: int = 12
    n_bar: float = 0.0
    eta_j: tuple[float, ...] | None = None
    lambda_params: LambdaParams | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ModelError(f"N must be >= 1, got {self.N}")
        if self.eta < 0:
            # eta = 0 is the degenerate no-coupling limit, useful in tests
            raise ModelError(f"eta must be >= 0, got {self.eta}")
        if self.delta <= 0:
            # delta = 0 breaks the closed-form propagator; delta < 0 is out of scope.
            raise ModelError(f"delta must be > 0 (rad/ns), got {self.delta}")
        if self.Omega < 0:
            raise ModelError(f"Omega must be >= 0, got {self.Omega}")
        if self.n_max < 1:
            raise ModelError(f"n_max must be >= 1, got {self.n_max}")
        if self.n_bar < 0:
            raise ModelError(f"n_bar must be >= 0, got {self.n_bar}")
        if self.eta_j is not None:
            etas = tuple(float(e) for e in self.eta_j)
            if len(etas) != self.N:
                raise ModelError(f"eta_j has {len(etas)} entries for N={self.N}")
            if any(e < 0 for e in etas):
                raise ModelError("all eta_j must be >= 0")
            object.__setattr__(self, "eta_j", etas)

    @property
    def fock_dim(self) -> int:
        return self.n_max + 1

    def qubit_layout(self) -> HilbertLayout:
        return HilbertLayout(n_sites=self.N, site_dim=2, fock_dim=self.fock_dim)

    def lambda_layout(self) -> HilbertLayout:
        return HilbertLayout(n_sites=self.N, site_dim=3, fock_dim=self.fock_dim)

    def etas(self) -> tuple[float, ...]:
        return self.eta_j if self.eta_j is not None else (self.eta,) * self.N

    def is_uniform(self) -> bool:
        etas = self.etas()
        return all(e == etas[0] for e in etas)


@dataclass(frozen=True)
class RecipeTerm:
    """One constant operator with a scalar time envelope.

    `frequency` is the signed angular frequency of the envelope (0 for a
    static term), so envelope(t) = envelope(0) * exp(i * frequency * t) for
    pure-phase envelopes; it feeds step-size heuristics and diagnostics.
    """

    matrix: np.ndarray
    envelope: Callable[[float], complex]
    frequency: float = 0.0
    label: str = ""

    def __post_init__(self):
        m = np.ascontiguousarray(np.asarray(self.matrix, dtype=complex))
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class HamiltonianRecipe:
    """H(t) = sum_k envelope_k(t) * M_k on a fixed layout.

    Envelopes are pure functions of t. `fastest_scale` is the angular rate an
    integrator must resolve (drive Rabi frequency when present, else the
    Raman detuning).
    """

    layout: HilbertLayout
    terms: tuple[RecipeTerm, ...]
    label: str
    fastest_scale: float
    check_tol: float = field(default=1e-12, repr=False)

    def matrix_at(self, t: float) -> np.ndarray:
        h = np.zeros((self.layout.dim, self.layout.dim), dtype=complex)
        for term in self.terms:
            h += term.envelope(t) * term.matrix
        defect = hermiticity_defect(h)
        scale = max(1.0, float(np.max(np.abs(h))) if h.size else 1.0)
        if defect > self.check_tol * scale:
            raise ModelError(
                f"recipe '{self.label}' not Hermitian at t={t}: defect {defect:.3e}"
            )
        return h

    def max_frequency(self) -> float:
        return max((abs(term.frequency) for term in self.terms), default=0.0)


def _phase_envelope(omega: float, phase0: float, scale: complex) -> Callable[[float], complex]:
    """scale * exp(i*(omega*t + phase0)) as a pure envelope."""
    s = complex(scale)

    def env(t: float) -> complex:
        return s * np.exp(1j * (omega * t + phase0))

    return env


def _static_envelope(scale: complex) -> Callable[[float], complex]:
    s = complex(scale)

    def env(t: float) -> complex:
        return s

    return env


def _hermitian_pair(matrix: np.ndarray, omega: float, phase0: float,
                    scale: complex, label: str) -> tuple[RecipeTerm, RecipeTerm]:
    """Term c(t) M plus its exact Hermitian partner conj(c)(t) M^dag."""
    return (
        RecipeTerm(matrix, _phase_envelope(omega, phase0, scale), omega, label),
        RecipeTerm(matrix.conj().T, _phase_envelope(-omega, -phase0, np.conj(scale)),
                   -omega, label + "_hc"),
    )


def effective_eta(params: SimParams) -> list[float]:
    """Per-qubit Raman coupling eta_j = G_j Omega_L,j (1/(Delta+delta) + 1/Delta).

    Computed from the three-level parameters and their derived detunings.
    """
    lp = params.lambda_params
    if lp is None:
        raise ModelError("effective_eta requires lambda_params")
    Delta, delta = lp.Delta, lp.delta_raman
    if Delta == 0 or Delta + delta == 0:
        raise ModelError(
            f"singular Raman denominators: Delta={Delta}, Delta+delta={Delta + delta}"
        )
    eta = lp.G * lp.Omega_L * (1.0 / (Delta + delta) + 1.0 / Delta)
    return [eta] * params.N


def build_lambda_hamiltonian(params: SimParams) -> HamiltonianRecipe:
    """Three-level model in the interaction picture of the free Hamiltonian.

    Static level and cavity energies are removed; what remains is
    G_j a |e><0|_j e^{i Delta t} + Omega_L |e><1|_j e^{i (Delta+delta) t - i phi}
    plus Hermitian conjugates, with Delta and delta the derived detunings.
    Serves as the adiabatic-elimination oracle only.
    """
    lp = params.lambda_params
    if lp is None:
        raise ModelError("build_lambda_hamiltonian requires lambda_params")
    layout = params.lambda_layout()
    a, _ = fock_ops(layout)
    Delta, delta = lp.Delta, lp.delta_raman

    terms: list[RecipeTerm] = []
    e_from_0 = np.zeros((layout.dim, layout.dim), dtype=complex)
    e_from_1 = np.zeros((layout.dim, layout.dim), dtype=complex)
    for site in range(1, params.N + 1):
        e_from_0 += (site_transition(layout, site, 2, 0) @ a).matrix
        e_from_1 += site_transition(layout, site, 2, 1).matrix
    terms.extend(_hermitian_pair(e_from_0, Delta, 0.0, lp.G, "cavity_leg"))
    terms.extend(_hermitian_pair(e_from_1, Delta + delta, -params.phi, lp.Omega_L, "laser_leg"))
    return HamiltonianRecipe(
        layout=layout,
        terms=tuple(terms),
        label="lambda_raman_oracle",
        fastest_scale=max(abs(Delta), abs(Delta + delta), 1e-12),
    )


def _raman_terms(params: SimParams, layout: HilbertLayout, phi: float) -> list[RecipeTerm]:
    a, _ = fock_ops(layout)
    coupling = np.zeros((layout.dim, layout.dim), dtype=complex)
    for site, eta_j in enumerate(params.etas(), start=1):
        sp = site_transition(layout, site, 1, 0)  # sigma_j^+
        coupling += eta_j * (a @ sp).matrix
    # eta_j a sigma_j^+ e^{-i(delta t - phi)} + h.c.
    return list(_hermitian_pair(coupling, -params.delta, phi, 1.0, "raman"))


def build_raman_hamiltonian(params: SimParams, phi: float | None = None) -> HamiltonianRecipe:
    """Qubit-cavity exchange sum_j eta_j (a sigma_j^+ e^{-i(delta t - phi)} + h.c.)."""
    layout = params.qubit_layout()
    phi = params.phi if phi is None else phi
    return HamiltonianRecipe(
        layout=layout,
        terms=tuple(_raman_terms(params, layout, phi)),
        label="raman",
        fastest_scale=max(params.delta, 1e-12),
    )


def build_driven_hamiltonian(params: SimParams, phi: float | None = None) -> HamiltonianRecipe:
    """Raman exchange plus the resonant microwave drive Omega J_x (truth model)."""
    layout = params.qubit_layout()
    phi = params.phi if phi is None else phi
    terms = _raman_terms(params, layout, phi)
    if params.Omega != 0.0:
        jx = collective_jx(layout)
        terms.insert(0, RecipeTerm(jx.matrix, _static_envelope(params.Omega), 0.0, "drive"))
    return HamiltonianRecipe(
        layout=layout,
        terms=tuple(terms),
        label="driven",
        fastest_scale=max(params.Omega, params.delta, 1e-12),
    )


def build_effective_hamiltonian(params: SimParams, phi: float | None = None) -> HamiltonianRecipe:
    """Collective spin-dependent cavity drive (a e^{-i(delta t - phi)} + h.c.) J_x.

    phi = 0 gives the forward drive; phi = pi is its exact negation,
    which is the sign flip the echo composition relies on.
    """
    layout = params.qubit_layout()
    phi = params.phi if phi is None else phi
    a, _ = fock_ops(layout)
    coupling = np.zeros((layout.dim, layout.dim), dtype=complex)
    for site, eta_j in enumerate(params.etas(), start=1):
        sx = embed_site_op(layout, site, SIGMA_X / 2.0)
        coupling += eta_j * (a @ sx).matrix
    return HamiltonianRecipe(
        layout=layout,
        terms=tuple(_hermitian_pair(coupling, -params.delta, phi, 1.0, "effective")),
        label="effective",
        fastest_scale=max(params.delta, 1e-12),
    )


def _pm_ladder_terms(params: SimParams, layout: HilbertLayout, phi: float) -> list[RecipeTerm]:
    """Counter-rotating ladder terms (eta_j/2) a e^{-i(delta t - phi)}
    (e^{i Omega t}|+><-|_j - e^{-i Omega t}|-><+|_j) + h.c."""
    a, _ = fock_ops(layout)
    pm = np.zeros((layout.dim, layout.dim), dtype=complex)
    mp = np.zeros((layout.dim, layout.dim), dtype=complex)
    for site, eta_j in enumerate(params.etas(), start=1):
        pm += (eta_j / 2.0) * (a @ embed_site_op(layout, site, PROJ_PM)).matrix
        mp += (eta_j / 2.0) * (a @ embed_site_op(layout, site, PROJ_MP)).matrix
    terms: list[RecipeTerm] = []
    terms.extend(_hermitian_pair(pm, params.Omega - params.delta, phi, 1.0, "fast_pm"))
    terms.extend(_hermitian_pair(mp, -(params.Omega + params.delta), phi, -1.0, "fast_mp"))
    return terms


def build_neglected_terms(params: SimParams, phi: float | None = None) -> HamiltonianRecipe:
    """Terms dropped by the rotating-wave step, oscillating at Omega +/- delta."""
    layout = params.qubit_layout()
    phi = params.phi if phi is None else phi
    return HamiltonianRecipe(
        layout=layout,
        terms=tuple(_pm_ladder_terms(params, layout, phi)),
        label="neglected",
        fastest_scale=max(params.Omega + params.delta, 1e-12),
    )


def build_rotated_hamiltonian(params: SimParams, phi: float | None = None) -> HamiltonianRecipe:
    """Driven model in the interaction picture of the drive term.

    Equal, term by term, to effective + neglected; kept as an independent
    construction so that identity can be checked numerically.
    """
    layout = params.qubit_layout()
    phi = params.phi if phi is None else phi
    a, _ = fock_ops(layout)
    sz_tilde = np.zeros((layout.dim, layout.dim), dtype=complex)
    for site, eta_j in enumerate(params.etas(), start=1):
        # Pauli z in the sigma_x eigenbasis equals sigma_x in the qubit basis.
        sz_tilde += (eta_j / 2.0) * (a @ embed_site_op(layout, site, SIGMA_X)).matrix
    terms = list(_hermitian_pair(sz_tilde, -params.delta, phi, 1.0, "slow_sz"))
    terms.extend(_pm_ladder_terms(params, layout, phi))
    return HamiltonianRecipe(
        layout=layout,
        terms=tuple(terms),
        label="rotated",
        fastest_scale=max(params.Omega + params.delta, 1e-12),
    )
