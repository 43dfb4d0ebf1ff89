"""Complex Stiefel manifold geometry for Kraus-map parameter spaces.

A two-level channel with up to four Kraus operators is a pair of
orthonormal vectors in C^8: the first-column entries of all operators
stacked over the second-column entries.  This module supplies the frame
type, the channel <-> frame correspondence, tangent-space projection,
QR and polar retractions, Haar sampling, and orthonormal tangent bases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qcore import CompletenessError, KrausSet

__all__ = [
    "StiefelPoint",
    "KrausPoint",
    "TangentVector",
    "TangentBasis",
    "kraus_to_point",
    "point_to_kraus",
    "constraint_residuals",
    "project_tangent",
    "retract",
    "random_point",
    "random_kraus_point",
    "orthonormal_tangent_basis",
    "real_inner",
]


def _as_c4(a, what: str) -> np.ndarray:
    v = np.array(a, dtype=complex).reshape(-1)
    if v.shape != (4,):
        raise ValueError(f"{what} must be a length-4 complex vector")
    if not np.all(np.isfinite(v.real)) or not np.all(np.isfinite(v.imag)):
        raise ValueError(f"{what} contains non-finite entries")
    v.setflags(write=False)
    return v


def real_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Real inner product Re sum conj(a) b on stacked complex arrays."""
    return float(np.vdot(a, b).real)


@dataclass(frozen=True, eq=False)
class StiefelPoint:
    """Orthonormal k-frame in C^n, stored as the columns of ``frame``."""

    n: int
    k: int
    frame: np.ndarray

    def __post_init__(self):
        f = np.array(self.frame, dtype=complex)
        if f.shape != (self.n, self.k):
            raise ValueError(f"frame must have shape {(self.n, self.k)}, got {f.shape}")
        if not np.all(np.isfinite(f.real)) or not np.all(np.isfinite(f.imag)):
            raise ValueError("frame contains non-finite entries")
        gram = f.conj().T @ f
        if np.abs(gram - np.eye(self.k)).max() > 1e-10:
            raise ValueError("frame columns are not orthonormal within 1e-10")
        f.setflags(write=False)
        object.__setattr__(self, "frame", f)


@dataclass(frozen=True, eq=False)
class KrausPoint:
    """Feasible channel coordinates: four C^4 blocks of operator entries.

    ``u1``/``v1`` hold the (1,1)/(2,1) entries of operators 1..4 and
    ``u2``/``v2`` the (1,2)/(2,2) entries.  Feasibility means
    |u1|^2+|v1|^2 = 1, |u2|^2+|v2|^2 = 1 and <u1,u2>+<v1,v2> = 0, each
    within 1e-10.
    """

    u1: np.ndarray
    u2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray

    def __post_init__(self):
        for name in ("u1", "u2", "v1", "v2"):
            object.__setattr__(self, name, _as_c4(getattr(self, name), name))
        phi1, phi2, phi3 = constraint_residuals(self.u1, self.u2, self.v1, self.v2)
        worst = max(abs(phi1), abs(phi2), abs(phi3))
        if worst > 1e-10:
            raise ValueError(
                f"infeasible channel coordinates: constraint residual {worst:.3e}"
            )

    @property
    def matrix(self) -> np.ndarray:
        """8x2 frame: column 0 is u1 over v1, column 1 is u2 over v2."""
        return np.column_stack([
            np.concatenate([self.u1, self.v1]),
            np.concatenate([self.u2, self.v2]),
        ])

    @classmethod
    def from_matrix(cls, w: np.ndarray) -> "KrausPoint":
        w = np.asarray(w, dtype=complex)
        return cls(u1=w[:4, 0], u2=w[:4, 1], v1=w[4:, 0], v2=w[4:, 1])

    def to_stiefel(self) -> StiefelPoint:
        return StiefelPoint(8, 2, self.matrix)

    @classmethod
    def from_stiefel(cls, p: StiefelPoint) -> "KrausPoint":
        if (p.n, p.k) != (8, 2):
            raise ValueError("channel coordinates require a 2-frame in C^8")
        return cls.from_matrix(p.frame)


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Ambient matrix delta attached to a base frame, tangency validated."""

    base: StiefelPoint
    delta: np.ndarray

    def __post_init__(self):
        d = np.array(self.delta, dtype=complex)
        if d.shape != (self.base.n, self.base.k):
            raise ValueError("tangent delta shape does not match the base frame")
        x = self.base.frame
        sym = x.conj().T @ d
        sym = sym + sym.conj().T
        if np.abs(sym).max() > 1e-10:
            raise ValueError("delta is not tangent at the base point within 1e-10")
        d.setflags(write=False)
        object.__setattr__(self, "delta", d)

    def norm(self) -> float:
        return float(np.linalg.norm(self.delta))


@dataclass(frozen=True, eq=False)
class TangentBasis:
    """Orthonormal basis of the tangent space at a frame, real dimension 2nk-k^2."""

    base: StiefelPoint
    vectors: tuple

    def __post_init__(self):
        n, k = self.base.n, self.base.k
        expected = 2 * n * k - k * k
        vecs = tuple(self.vectors)
        if len(vecs) != expected:
            raise ValueError(f"expected {expected} basis vectors, got {len(vecs)}")
        stack = np.stack([v.delta for v in vecs])
        flat = stack.reshape(len(vecs), -1)
        gram = (flat.conj() @ flat.T).real
        if np.abs(gram - np.eye(len(vecs))).max() > 1e-10:
            raise ValueError("tangent basis is not orthonormal within 1e-10")
        object.__setattr__(self, "vectors", vecs)

    def as_array(self) -> np.ndarray:
        """Stack of basis deltas, shape (dim, n, k)."""
        return np.stack([v.delta for v in self.vectors])


def constraint_residuals(u1, u2, v1, v2) -> tuple[float, float, complex]:
    """Feasibility defects of raw coordinate blocks, not necessarily small.

    Returns (phi1, phi2, phi3): the two norm defects and the complex
    cross-orthogonality <u1,u2> + <v1,v2> (conjugation on the first slot).
    """
    u1 = np.asarray(u1, dtype=complex)
    u2 = np.asarray(u2, dtype=complex)
    v1 = np.asarray(v1, dtype=complex)
    v2 = np.asarray(v2, dtype=complex)
    phi1 = float(np.vdot(u1, u1).real + np.vdot(v1, v1).real - 1.0)
    phi2 = float(np.vdot(u2, u2).real + np.vdot(v2, v2).real - 1.0)
    phi3 = complex(np.vdot(u1, u2) + np.vdot(v1, v2))
    return phi1, phi2, phi3


def kraus_to_point(k: KrausSet) -> KrausPoint:
    """Stack operator entries into frame coordinates, padding to four operators."""
    res = np.zeros((4, 4), dtype=complex)  # rows: u1, u2, v1, v2
    for idx, op in enumerate(k.operators):
        res[0, idx] = op[0, 0]
        res[1, idx] = op[0, 1]
        res[2, idx] = op[1, 0]
        res[3, idx] = op[1, 1]
    try:
        return KrausPoint(u1=res[0], u2=res[1], v1=res[2], v2=res[3])
    except ValueError:
        raise CompletenessError(
            _kraus_point_residual(res), k.tol
        ) from None


def _kraus_point_residual(res: np.ndarray) -> float:
    phi1, phi2, phi3 = constraint_residuals(res[0], res[1], res[2], res[3])
    return max(abs(phi1), abs(phi2), abs(phi3))


def point_to_kraus(p: KrausPoint) -> KrausSet:
    """Reassemble the four 2x2 operators from frame coordinates."""
    ops = []
    for idx in range(4):
        ops.append(
            np.array(
                [[p.u1[idx], p.u2[idx]], [p.v1[idx], p.v2[idx]]], dtype=complex
            )
        )
    return KrausSet(tuple(ops))


def _qf(w: np.ndarray) -> np.ndarray:
    """Q factor of the thin QR with the R diagonal rotated positive."""
    q, r = np.linalg.qr(w)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    mags = np.abs(d)
    if np.any(mags < 1e-12):
        raise RuntimeError("rank collapse during QR retraction")
    return q * (d / mags)[..., None, :]


def _polar(w: np.ndarray) -> np.ndarray:
    """Polar orthonormal factor via SVD."""
    u, s, vh = np.linalg.svd(w, full_matrices=False)
    if np.any(s < 1e-12):
        raise RuntimeError("rank collapse during polar retraction")
    return u @ vh


def project_tangent(x: StiefelPoint, ambient: np.ndarray) -> TangentVector:
    """Orthogonal projection of an ambient matrix onto the tangent space."""
    z = np.asarray(ambient, dtype=complex)
    if z.shape != (x.n, x.k):
        raise ValueError(f"ambient matrix must have shape {(x.n, x.k)}")
    return TangentVector(base=x, delta=_project_mat(x.frame, z))


def _project_mat(frame: np.ndarray, z: np.ndarray) -> np.ndarray:
    s = frame.conj().T @ z
    return z - frame @ (0.5 * (s + s.conj().T))


def retract(x: StiefelPoint, t: TangentVector, kind: str = "qr") -> StiefelPoint:
    """Map a tangent step back onto the manifold.

    ``kind`` selects the QR retraction (default) or the polar retraction.
    A zero step returns the base point unchanged.
    """
    if t.base is not x and not np.array_equal(t.base.frame, x.frame):
        raise ValueError("tangent vector is not based at the given point")
    if not t.delta.any():
        return x
    w = x.frame + t.delta
    if kind == "qr":
        new = _qf(w)
    elif kind == "polar":
        new = _polar(w)
    else:
        raise ValueError(f"unknown retraction kind {kind!r}")
    return StiefelPoint(x.n, x.k, new)


def _haar_frame(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    return _qf(g)


def random_point(n: int, k: int, seed: int) -> StiefelPoint:
    """Haar-distributed frame from an explicit seed."""
    rng = np.random.default_rng(seed)
    return StiefelPoint(n, k, _haar_frame(n, k, rng))


def random_kraus_point(seed: int) -> KrausPoint:
    """Haar-distributed feasible channel coordinates."""
    return KrausPoint.from_stiefel(random_point(8, 2, seed))


def orthonormal_tangent_basis(x: StiefelPoint) -> TangentBasis:
    """Deterministic orthonormal tangent basis at a frame.

    Combines the k^2 rotations W*A for an orthonormal anti-Hermitian basis
    A with the 2(n-k)k complement directions W_perp*E and i*W_perp*E, where
    W_perp spans the orthogonal complement of the frame.
    """
    n, k = x.n, x.k
    w = x.frame
    deltas = []
    # Anti-Hermitian block: diagonal phases then paired off-diagonals.
    for j in range(k):
        a = np.zeros((k, k), dtype=complex)
        a[j, j] = 1j
        deltas.append(w @ a)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for j in range(k):
        for l in range(j + 1, k):
            a = np.zeros((k, k), dtype=complex)
            a[j, l] = inv_sqrt2
            a[l, j] = -inv_sqrt2
            deltas.append(w @ a)
            a = np.zeros((k, k), dtype=complex)
            a[j, l] = 1j * inv_sqrt2
            a[l, j] = 1j * inv_sqrt2
            deltas.append(w @ a)
    # Complement block: real and imaginary unit injections.
    q = np.linalg.qr(w, mode="complete")[0]
    perp = q[:, k:]
    for c in range(n - k):
        col = perp[:, c]
        for j in range(k):
            d = np.zeros((n, k), dtype=complex)
            d[:, j] = col
            deltas.append(d)
            d = np.zeros((n, k), dtype=complex)
            d[:, j] = 1j * col
            deltas.append(d)
    vectors = tuple(TangentVector(base=x, delta=d) for d in deltas)
    return TangentBasis(base=x, vectors=vectors)
