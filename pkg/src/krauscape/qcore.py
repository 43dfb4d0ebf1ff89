"""Two-level quantum states and channels.

Density matrices in the Stokes (Bloch) representation, Kraus maps with
their trace-preservation constraint, reduction of a Hermitian target
observable to the rank-one projector, the trace-form yield functional,
and the unitary dilation of a channel onto a system-plus-ancilla space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ComplexScalar",
    "CompletenessError",
    "BlochVector",
    "DensityMatrix",
    "TargetOperator",
    "KrausSet",
    "DilatedUnitary",
    "THETA0",
    "bloch_to_density",
    "density_to_bloch",
    "apply_kraus",
    "completeness_residual",
    "kraus_conjugate",
    "reduce_target",
    "objective_trace",
    "dilate",
    "verify_dilation",
]

# Complex scalars use the native type; every constructor taking one
# rejects non-finite components.
ComplexScalar = complex

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)


class CompletenessError(ValueError):
    """Raised when Kraus operators fail the trace-preservation constraint."""

    def __init__(self, residual: float, tol: float):
        super().__init__(
            f"completeness residual {residual:.6e} exceeds tolerance {tol:.1e}"
        )
        self.residual = residual
        self.tol = tol


def _as_complex(a, shape, what: str) -> np.ndarray:
    m = np.array(a, dtype=complex)
    if m.shape != shape:
        raise ValueError(f"{what} must have shape {shape}, got {m.shape}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise ValueError(f"{what} contains non-finite entries")
    m.setflags(write=False)
    return m


def _eig2_hermitian(m: np.ndarray) -> tuple[float, float, np.ndarray]:
    """Closed-form eigensystem of a 2x2 Hermitian matrix.

    Returns (lambda1, lambda2, basis) with lambda1 >= lambda2 and the
    columns of ``basis`` holding the corresponding orthonormal
    eigenvectors.
    """
    a = m[0, 0].real
    c = m[1, 1].real
    b = m[0, 1]
    h = 0.5 * (a - c)
    r = math.hypot(h, abs(b))
    lam1 = 0.5 * (a + c) + r
    lam2 = 0.5 * (a + c) - r
    # Pick the eigenvector formula that stays away from cancellation.
    if h >= 0.0:
        v1 = np.array([h + r, np.conj(b)], dtype=complex)
    else:
        v1 = np.array([b, r - h], dtype=complex)
    n1 = np.linalg.norm(v1)
    if n1 < 1e-300:
        # Degenerate target: any basis diagonalizes it.
        return lam1, lam2, IDENTITY2.copy()
    v1 = v1 / n1
    v2 = np.array([-np.conj(v1[1]), np.conj(v1[0])], dtype=complex)
    basis = np.column_stack([v1, v2])
    return lam1, lam2, basis


@dataclass(frozen=True)
class BlochVector:
    """Stokes vector (alpha, beta, gamma) of a qubit state, norm <= 1."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise ValueError(f"Stokes component {name} must be finite")
            object.__setattr__(self, name, val)
        if self.norm() > 1.0 + 1e-12:
            raise ValueError(f"Stokes vector norm {self.norm()!r} exceeds 1")

    def norm(self) -> float:
        return math.sqrt(self.alpha**2 + self.beta**2 + self.gamma**2)

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma])


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Validated 2x2 density matrix: Hermitian, unit trace, positive."""

    entries: np.ndarray

    def __post_init__(self):
        m = _as_complex(self.entries, (2, 2), "density matrix")
        if np.abs(m - m.conj().T).max() > 1e-12:
            raise ValueError("density matrix is not Hermitian within 1e-12")
        tr = m[0, 0] + m[1, 1]
        if abs(tr - 1.0) > 1e-12:
            raise ValueError(f"density matrix trace {tr} is not 1 within 1e-12")
        lam1, lam2, _ = _eig2_hermitian(m)
        if lam2 < -1e-12:
            raise ValueError(f"density matrix has negative eigenvalue {lam2:.3e}")
        object.__setattr__(self, "entries", m)


@dataclass(frozen=True, eq=False)
class TargetOperator:
    """Hermitian 2x2 observable with cached closed-form eigensystem.

    ``lambda1 >= lambda2`` and the columns of ``eigenbasis`` are the
    matching orthonormal eigenvectors, the lambda1 vector first.
    """

    entries: np.ndarray
    lambda1: float = field(init=False)
    lambda2: float = field(init=False)
    eigenbasis: np.ndarray = field(init=False)

    def __post_init__(self):
        m = _as_complex(self.entries, (2, 2), "target operator")
        if np.abs(m - m.conj().T).max() > 1e-12:
            raise ValueError("target operator is not Hermitian within 1e-12")
        lam1, lam2, basis = _eig2_hermitian(m)
        basis.setflags(write=False)
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "lambda1", lam1)
        object.__setattr__(self, "lambda2", lam2)
        object.__setattr__(self, "eigenbasis", basis)


THETA0 = TargetOperator(np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex))


def _ops_completeness_residual(ops) -> float:
    acc = np.zeros((2, 2), dtype=complex)
    for op in ops:
        acc += op.conj().T @ op
    return float(np.abs(acc - IDENTITY2).max())


@dataclass(frozen=True, eq=False)
class KrausSet:
    """Between one and four 2x2 Kraus operators summing to the identity.

    The trace-preservation residual ``max_ij |sum_l K_l^+ K_l - I|_ij``
    must stay below ``tol`` (default 1e-10).
    """

    operators: tuple
    tol: float = 1e-10

    def __post_init__(self):
        ops = tuple(_as_complex(op, (2, 2), "Kraus operator") for op in self.operators)
        if not 1 <= len(ops) <= 4:
            raise ValueError(f"expected 1..4 Kraus operators, got {len(ops)}")
        object.__setattr__(self, "operators", ops)
        res = _ops_completeness_residual(ops)
        if res > self.tol:
            raise CompletenessError(res, self.tol)

    @property
    def m(self) -> int:
        return len(self.operators)


@dataclass(frozen=True, eq=False)
class DilatedUnitary:
    """Unitary on system x ancilla implementing a Kraus map by restriction."""

    entries: np.ndarray
    ancilla_dim: int

    def __post_init__(self):
        dim = 2 * self.ancilla_dim
        m = _as_complex(self.entries, (dim, dim), "dilated unitary")
        res = np.abs(m.conj().T @ m - np.eye(dim)).max()
        if res > 1e-10:
            raise ValueError(f"dilation unitarity residual {res:.3e} exceeds 1e-10")
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return 2 * self.ancilla_dim


def bloch_to_density(w: BlochVector) -> DensityMatrix:
    """Map a Stokes vector to its density matrix (1 + <w, sigma>) / 2."""
    m = 0.5 * (
        IDENTITY2 + w.alpha * PAULI_X + w.beta * PAULI_Y + w.gamma * PAULI_Z
    )
    return DensityMatrix(m)


def density_to_bloch(rho: DensityMatrix) -> BlochVector:
    """Extract the Stokes vector; exact inverse of :func:`bloch_to_density`."""
    m = rho.entries
    alpha = float((m[0, 1] + m[1, 0]).real)
    beta = float((m[1, 0] - m[0, 1]).imag)
    gamma = float((m[0, 0] - m[1, 1]).real)
    return BlochVector(alpha, beta, gamma)


def completeness_residual(k) -> float:
    """Trace-preservation residual of a KrausSet or a raw operator list."""
    if isinstance(k, KrausSet):
        return _ops_completeness_residual(k.operators)
    return _ops_completeness_residual([np.asarray(op, dtype=complex) for op in k])


def apply_kraus(k: KrausSet, rho: DensityMatrix) -> DensityMatrix:
    """Propagate a state through the channel rho -> sum_l K_l rho K_l^+."""
    res = _ops_completeness_residual(k.operators)
    if res > k.tol:
        raise CompletenessError(res, k.tol)
    out = np.zeros((2, 2), dtype=complex)
    r = rho.entries
    for op in k.operators:
        out += op @ r @ op.conj().T
    return DensityMatrix(out)


def kraus_conjugate(k: KrausSet, u: np.ndarray) -> KrausSet:
    """Conjugate every operator by a 2x2 unitary: K_l -> U^+ K_l U."""
    u = np.asarray(u, dtype=complex)
    return KrausSet(tuple(u.conj().T @ op @ u for op in k.operators), tol=k.tol)


def reduce_target(theta: TargetOperator) -> tuple[float, float, np.ndarray]:
    """Split a Hermitian target into projector form.

    Returns ``(scale, offset, basis)`` with ``scale = lambda1 - lambda2``,
    ``offset = lambda2``, and ``basis`` the eigenbasis unitary, so that
    in the rotated frame the observable becomes
    ``scale * diag(1, 0) + offset * I``.  A degenerate target gives
    ``scale = 0``: the induced landscape is flat and callers simply see a
    constant objective, never an error.
    """
    return (
        theta.lambda1 - theta.lambda2,
        theta.lambda2,
        np.array(theta.eigenbasis),
    )


def objective_trace(k: KrausSet, rho0: DensityMatrix, theta: TargetOperator) -> float:
    """Yield Tr[Phi(rho0) Theta] of the channel output against the target.

    For ``theta = THETA0`` this is the (1,1) entry of the output state and
    lies in [0, 1].
    """
    out = apply_kraus(k, rho0)
    val = np.trace(out.entries @ theta.entries)
    return float(val.real)


def _dilation_columns(k: KrausSet) -> tuple[np.ndarray, np.ndarray]:
    """The two prescribed unitary columns, one per system basis state.

    Basis ordering is system-major: index s*M + a holds system state s and
    ancilla state a.  Column s stacks entry (s', s) of operator a at index
    s'*M + a, so the image of |s> x |0> carries K_a |s> in ancilla sector a.
    """
    m = k.m
    cols = np.zeros((2 * m, 2), dtype=complex)
    for a, op in enumerate(k.operators):
        for s_out in (0, 1):
            for s_in in (0, 1):
                cols[s_out * m + a, s_in] = op[s_out, s_in]
    return cols[:, 0], cols[:, 1]


def dilate(k: KrausSet) -> DilatedUnitary:
    """Build a unitary on a 2M-dimensional space that restricts to the channel.

    The ancilla starts in its first basis state; the two columns acting on
    |psi> x |0> are fixed by the Kraus operators and the remaining columns
    are completed by modified Gram-Schmidt over the standard basis in index
    order, skipping candidates whose orthogonal remainder is below 1e-8.
    """
    m = k.m
    dim = 2 * m
    c0, c1 = _dilation_columns(k)
    u = np.zeros((dim, dim), dtype=complex)
    u[:, 0] = c0
    u[:, m] = c1
    fixed_slots = {0, m}
    free_slots = [j for j in range(dim) if j not in fixed_slots]
    chosen = [c0, c1]
    slot_iter = iter(free_slots)

    def _orthogonalize(idx: int, threshold: float) -> np.ndarray | None:
        cand = np.zeros(dim, dtype=complex)
        cand[idx] = 1.0
        for v in chosen:
            cand = cand - v * np.vdot(v, cand)
        norm = np.linalg.norm(cand)
        if norm < threshold:
            return None
        cand = cand / norm
        # Second orthogonalization pass tightens numerical orthogonality.
        for v in chosen:
            cand = cand - v * np.vdot(v, cand)
        return cand / np.linalg.norm(cand)

    skipped = []
    for idx in range(dim):
        if len(chosen) == dim:
            break
        cand = _orthogonalize(idx, 1e-8)
        if cand is None:
            skipped.append(idx)
            continue
        chosen.append(cand)
        u[:, next(slot_iter)] = cand
    # Rescue pass: near-parallel candidates may still carry an independent
    # remainder; only exact dependence (at most two vectors) is unusable.
    for idx in skipped:
        if len(chosen) == dim:
            break
        cand = _orthogonalize(idx, 1e-15)
        if cand is None:
            continue
        chosen.append(cand)
        u[:, next(slot_iter)] = cand
    if len(chosen) != dim:
        raise RuntimeError("failed to complete dilation basis")
    return DilatedUnitary(u, ancilla_dim=m)


def verify_dilation(u: DilatedUnitary, k: KrausSet, rho: DensityMatrix) -> float:
    """Max-abs residual between the dilated evolution and the Kraus map.

    Evolves rho x |0><0| by the unitary, traces out the ancilla, and
    compares against :func:`apply_kraus`.
    """
    m = k.m
    if u.ancilla_dim != m:
        raise ValueError(
            f"dilation has ancilla dimension {u.ancilla_dim}, channel has {m} operators"
        )
    p0 = np.zeros((m, m), dtype=complex)
    p0[0, 0] = 1.0
    big = np.kron(rho.entries, p0)
    evolved = u.entries @ big @ u.entries.conj().T
    reduced = np.zeros((2, 2), dtype=complex)
    for s in (0, 1):
        for t in (0, 1):
            reduced[s, t] = evolved[s * m : (s + 1) * m, t * m : (t + 1) * m].trace()
    direct = apply_kraus(k, rho)
    return float(np.abs(reduced - direct.entries).max())
