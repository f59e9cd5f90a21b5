"""Tensor-product Hilbert spaces of N spins and one truncated bosonic mode.

Fixed factor ordering throughout: site 1 ⊗ ... ⊗ site N ⊗ cavity.
All frequencies are angular (rad/ns), all times are ns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

DIM_CAP = 4096
HERMITICITY_TOL = 1e-12

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)   # |1><0|
SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |0><1|

for _m in (SIGMA_X, SIGMA_Y, SIGMA_Z, SIGMA_PLUS, SIGMA_MINUS):
    _m.setflags(write=False)


class LayoutError(ValueError):
    """Raised for inconsistent Hilbert-space layouts or dimension mismatches."""


class TruncationError(ValueError):
    """Raised when the Fock truncation cannot represent the requested state."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HilbertLayout:
    """Dimension bookkeeping for N identical sites and one cavity mode.

    Parameters
    ----------
    n_sites : number of spin factors (>= 1).
    site_dim : 2 for qubits, 3 for three-level (ground, ground, excited) sites.
    fock_dim : cavity truncation n_max + 1 (>= 2); a_dag |n_max> = 0.
    """

    n_sites: int
    site_dim: int
    fock_dim: int

    def __post_init__(self):
        if self.n_sites < 1:
            raise LayoutError(f"n_sites must be >= 1, got {self.n_sites}")
        if self.site_dim not in (2, 3):
            raise LayoutError(f"site_dim must be 2 or 3, got {self.site_dim}")
        if self.fock_dim < 2:
            raise LayoutError(f"fock_dim must be >= 2, got {self.fock_dim}")
        if self.dim > DIM_CAP:
            raise LayoutError(
                f"total dimension {self.dim} exceeds the dense-matrix cap {DIM_CAP}"
            )

    @property
    def spin_dim(self) -> int:
        return self.site_dim**self.n_sites

    @property
    def dim(self) -> int:
        return self.spin_dim * self.fock_dim

    @property
    def n_max(self) -> int:
        return self.fock_dim - 1

    def index_of(self, site_states: Iterable[int], fock_n: int) -> int:
        """Flat index of the product basis state |s_1 ... s_N> x |n>."""
        states = tuple(site_states)
        if len(states) != self.n_sites:
            raise LayoutError(f"expected {self.n_sites} site states, got {len(states)}")
        idx = 0
        for s in states:
            if not 0 <= s < self.site_dim:
                raise LayoutError(f"site state {s} outside 0..{self.site_dim - 1}")
            idx = idx * self.site_dim + s
        if not 0 <= fock_n < self.fock_dim:
            raise LayoutError(f"Fock index {fock_n} outside 0..{self.fock_dim - 1}")
        return idx * self.fock_dim + fock_n

    def basis_state(self, site_states: Iterable[int], fock_n: int) -> "StateVector":
        amp = np.zeros(self.dim, dtype=complex)
        amp[self.index_of(site_states, fock_n)] = 1.0
        return StateVector(self, amp)


def hermiticity_defect(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0


@dataclass(frozen=True)
class Operator:
    """Dense operator on a HilbertLayout. Immutable after construction."""

    layout: HilbertLayout
    matrix: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.layout.dim, self.layout.dim):
            raise LayoutError(
                f"matrix shape {m.shape} does not match layout dimension {self.layout.dim}"
            )
        object.__setattr__(self, "matrix", _freeze(m))
        if self.hermitian:
            defect = hermiticity_defect(m)
            if defect > HERMITICITY_TOL:
                raise LayoutError(
                    f"operator asserted Hermitian but max|M - M^dag| = {defect:.3e}"
                )

    @property
    def dim(self) -> int:
        return self.layout.dim

    def dagger(self) -> "Operator":
        return Operator(self.layout, self.matrix.conj().T, hermitian=self.hermitian)

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, Operator):
            if other.layout != self.layout:
                raise LayoutError("operators act on different layouts")
            return other.matrix
        return np.asarray(other, dtype=complex)

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            # result is unnormalized in general (e.g. ladder operators)
            return self.matrix @ other.amplitudes
        return Operator(self.layout, self.matrix @ self._coerce(other))

    def __add__(self, other):
        return Operator(self.layout, self.matrix + self._coerce(other))

    def __sub__(self, other):
        return Operator(self.layout, self.matrix - self._coerce(other))

    def __mul__(self, scalar):
        return Operator(self.layout, self.matrix * complex(scalar))

    __rmul__ = __mul__


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state on a HilbertLayout."""

    layout: HilbertLayout
    amplitudes: np.ndarray
    norm_tol: float = field(default=1e-10, repr=False)

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if a.shape != (self.layout.dim,):
            raise LayoutError(
                f"amplitude length {a.shape[0]} does not match layout dimension {self.layout.dim}"
            )
        n = np.linalg.norm(a)
        if abs(n - 1.0) > self.norm_tol:
            raise LayoutError(f"state norm {n!r} deviates from 1 beyond {self.norm_tol}")
        object.__setattr__(self, "amplitudes", _freeze(a))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        if other.layout != self.layout:
            raise LayoutError("states live on different layouts")
        return complex(np.vdot(other.amplitudes, self.amplitudes))

    def density_matrix(self) -> "DensityMatrix":
        a = self.amplitudes
        return DensityMatrix(self.layout, np.outer(a, a.conj()))

    def spin_reduced(self) -> np.ndarray:
        """Reduced spin-sector density matrix (cavity traced out)."""
        psi = self.amplitudes.reshape(self.layout.spin_dim, self.layout.fock_dim)
        return psi @ psi.conj().T

    def top_fock_population(self) -> float:
        psi = self.amplitudes.reshape(self.layout.spin_dim, self.layout.fock_dim)
        return float(np.sum(np.abs(psi[:, -1]) ** 2))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite state on a HilbertLayout."""

    layout: HilbertLayout
    matrix: np.ndarray
    tol: float = field(default=1e-10, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.layout.dim, self.layout.dim):
            raise LayoutError("density matrix shape does not match layout dimension")
        if hermiticity_defect(m) > self.tol:
            raise LayoutError("density matrix is not Hermitian within tolerance")
        tr = np.trace(m).real
        if abs(tr - 1.0) > self.tol:
            raise LayoutError(f"density matrix trace {tr!r} deviates from 1")
        evals = np.linalg.eigvalsh((m + m.conj().T) / 2.0)
        if evals.min() < -self.tol:
            raise LayoutError(f"density matrix has negative eigenvalue {evals.min():.3e}")
        object.__setattr__(self, "matrix", _freeze(m))

    def spin_reduced(self) -> np.ndarray:
        s, f = self.layout.spin_dim, self.layout.fock_dim
        return np.einsum("afbf->ab", self.matrix.reshape(s, f, s, f))

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)


def _site_kron(layout: HilbertLayout, site: int, local: np.ndarray) -> np.ndarray:
    # site is 1-based; identity padding on every other factor, cavity last
    left_dim = layout.site_dim ** (site - 1)
    right_dim = layout.site_dim ** (layout.n_sites - site) * layout.fock_dim
    out = np.kron(np.kron(np.eye(left_dim), local), np.eye(right_dim))
    return out.astype(complex)


def embed_site_op(layout: HilbertLayout, site: int, local) -> Operator:
    """Embed a single-site operator at 1-based position `site`.

    The result acts as `local` on that site and as the identity on every
    other site and on the cavity factor.
    """
    local_m = local.matrix if isinstance(local, Operator) else np.asarray(local, dtype=complex)
    if local_m.shape != (layout.site_dim, layout.site_dim):
        raise LayoutError(
            f"local operator shape {local_m.shape} does not match site_dim {layout.site_dim}"
        )
    if not 1 <= site <= layout.n_sites:
        raise LayoutError(f"site {site} outside 1..{layout.n_sites}")
    return Operator(layout, _site_kron(layout, site, local_m))


def site_transition(layout: HilbertLayout, site: int, upper: int, lower: int) -> Operator:
    """Embedded |upper><lower| on one site (levels indexed 0..site_dim-1)."""
    local = np.zeros((layout.site_dim, layout.site_dim), dtype=complex)
    local[upper, lower] = 1.0
    return embed_site_op(layout, site, local)


def fock_destroy_local(fock_dim: int) -> np.ndarray:
    """Truncated-ladder annihilation operator on the cavity factor alone."""
    return np.diag(np.sqrt(np.arange(1.0, fock_dim)), k=1).astype(complex)


def fock_ops(layout: HilbertLayout) -> tuple[Operator, Operator]:
    """Annihilation and creation operators of the cavity mode, embedded.

    a|n> = sqrt(n)|n-1> on the truncated ladder; a_dag is the exact adjoint,
    so a_dag|n_max> = 0 (hard cutoff).
    """
    a_local = fock_destroy_local(layout.fock_dim)
    a_full = np.kron(np.eye(layout.spin_dim), a_local).astype(complex)
    a = Operator(layout, a_full)
    return a, a.dagger()


def spin_collective_jx(n_sites: int) -> np.ndarray:
    """J_x = sum_j sigma_x^j / 2 on the spin sector only (no cavity factor)."""
    dim = 2**n_sites
    jx = np.zeros((dim, dim), dtype=complex)
    for site in range(n_sites):
        left = np.eye(2**site)
        right = np.eye(2 ** (n_sites - site - 1))
        jx += np.kron(np.kron(left, SIGMA_X / 2.0), right)
    return jx


def collective_jx(layout: HilbertLayout) -> Operator:
    """Collective J_x = sum_j sigma_x^j / 2, embedded in the full space."""
    if layout.site_dim != 2:
        raise LayoutError("collective_jx requires a qubit layout (site_dim=2)")
    total = np.zeros((layout.dim, layout.dim), dtype=complex)
    for site in range(1, layout.n_sites + 1):
        total = total + embed_site_op(layout, site, SIGMA_X / 2.0).matrix
    return Operator(layout, total, hermitian=True)


def thermal_weights(n_bar: float, fock_dim: int, tail_tol: float = 1e-6) -> tuple[np.ndarray, float]:
    """Bose-Einstein occupation weights on the truncated ladder.

    Returns (weights, tail_mass): w_n proportional to n_bar^n/(n_bar+1)^(n+1),
    renormalized to sum to 1; tail_mass is the probability discarded by the
    truncation before renormalization.
    """
    if n_bar < 0:
        raise ValueError(f"n_bar must be >= 0, got {n_bar}")
    if n_bar == 0:
        w = np.zeros(fock_dim)
        w[0] = 1.0
        return w, 0.0
    n = np.arange(fock_dim)
    raw = np.exp(n * np.log(n_bar) - (n + 1) * np.log(n_bar + 1.0))
    tail = 1.0 - float(raw.sum())
    if tail > tail_tol:
        raise TruncationError(
            f"thermal tail mass {tail:.3e} exceeds {tail_tol:.0e} at n_bar={n_bar}; "
            f"increase fock_dim beyond {fock_dim}"
        )
    return raw / raw.sum(), max(tail, 0.0)
