"""Exact 2x2 operator algebra in the Pauli basis.

Operators are stored as coefficients ``(a0, ax, ay, az)`` of
``a0 I + ax s1 + ay s2 + az s3``. Dense matrices are only a view; all
products and exponentials are done on the coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quadrature import cumulative, integrate, integrate_nested

I2 = np.eye(2, dtype=complex)
SIGMA = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)
_BASIS = np.concatenate([I2[None], SIGMA])

UNITARY_TOL = 1e-12


@dataclass(frozen=True)
class PauliVector:
    """The operator ``a0 I + ax s1 + ay s2 + az s3``."""

    a0: complex = 0.0
    ax: complex = 0.0
    ay: complex = 0.0
    az: complex = 0.0

    @classmethod
    def from_array(cls, c) -> "PauliVector":
        c = np.asarray(c)
        return cls(*(complex(v) if np.iscomplexobj(c) else float(v) for v in c))

    @classmethod
    def from_matrix(cls, m) -> "PauliVector":
        m = np.asarray(m, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        # tr(sigma_i sigma_j) = 2 delta_ij
        c = np.einsum("kij,ji->k", _BASIS, m) / 2
        return cls(*(complex(v) for v in c))

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.a0, self.ax, self.ay, self.az], dtype=complex)

    @property
    def vector(self) -> np.ndarray:
        return self.coefficients[1:]

    def to_matrix(self) -> np.ndarray:
        return np.einsum("k,kij->ij", self.coefficients, _BASIS)

    def is_real(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.coefficients.imag) <= tol))

    def norm(self) -> float:
        return float(np.max(np.abs(self.coefficients)))

    def __add__(self, other: "PauliVector") -> "PauliVector":
        return PauliVector.from_array(self.coefficients + other.coefficients)

    def __sub__(self, other: "PauliVector") -> "PauliVector":
        return PauliVector.from_array(self.coefficients - other.coefficients)

    def __neg__(self) -> "PauliVector":
        return PauliVector.from_array(-self.coefficients)

    def __mul__(self, scalar) -> "PauliVector":
        return PauliVector.from_array(self.coefficients * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other: "PauliVector") -> "PauliVector":
        return PauliVector.from_array(multiply(self.coefficients, other.coefficients))


def multiply(a, b):
    """Product of coefficient arrays (broadcast over leading axes)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    a0, av = a[..., 0], a[..., 1:]
    b0, bv = b[..., 0], b[..., 1:]
    scalar = a0 * b0 + np.sum(av * bv, axis=-1)
    vec = a0[..., None] * bv + b0[..., None] * av + 1j * np.cross(av, bv)
    return np.concatenate([scalar[..., None], vec], axis=-1)


def commutator(a, b):
    """``[A, B] = 2i (a x b).sigma`` on coefficient arrays."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    vec = 2j * np.cross(a[..., 1:], b[..., 1:])
    a0, b0 = np.broadcast_arrays(a[..., 0], b[..., 0])
    return np.concatenate([np.zeros_like(a0 * b0)[..., None], vec], axis=-1)


@dataclass(frozen=True)
class Unitary2:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        dev = np.max(np.abs(m.conj().T @ m - I2))
        if dev > UNITARY_TOL:
            raise ValueError(f"matrix is not unitary (|U^dag U - I| = {dev:.2e})")
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other: "Unitary2") -> "Unitary2":
        return Unitary2(self.matrix @ other.matrix)

    @property
    def dagger(self) -> "Unitary2":
        return Unitary2(self.matrix.conj().T)

    def element(self, row: int, col: int) -> complex:
        """Matrix element with 1-based state labels, ``<row|U|col>``."""
        return complex(self.matrix[row - 1, col - 1])


def expm_coefficients(a):
    """``exp(a0 I + a.sigma)`` for complex coefficients, as a coefficient array."""
    a = np.asarray(a, dtype=complex)
    s = np.sqrt(np.sum(a[..., 1:] ** 2, axis=-1))
    small = np.abs(s) < 1e-4
    s_safe = np.where(small, 1.0, s)
    s2 = s * s
    # sinh(s)/s; series avoids 0/0 at s = 0
    sinhc = np.where(small, 1 + s2 / 6 + s2 * s2 / 120 + s2 ** 3 / 5040,
                     np.sinh(s_safe) / s_safe)
    scale = np.exp(a[..., 0])
    return np.concatenate([(scale * np.cosh(s))[..., None],
                           (scale * sinhc)[..., None] * a[..., 1:]], axis=-1)


def expm(op: PauliVector) -> Unitary2:
    """``exp(op)`` for an anti-Hermitian ``op`` (e.g. a sum of Magnus terms)."""
    return Unitary2(PauliVector.from_array(expm_coefficients(op.coefficients)).to_matrix())


def exp_pauli(n: PauliVector) -> Unitary2:
    """``exp(i (n0 I + n.sigma)) = e^{i n0} (I cos|n| + i sigma.n_hat sin|n|)``.

    ``n`` must have real coefficients (Hermitian generator).
    """
    if not n.is_real(tol=0.0):
        raise ValueError("exp_pauli needs a Hermitian generator (real coefficients)")
    c = n.coefficients.real
    vec = c[1:]
    ang = float(np.sqrt(vec @ vec))
    phase = np.exp(1j * c[0])
    if ang == 0.0:
        return Unitary2(phase * I2)
    nhat = vec / ang
    m = np.cos(ang) * I2 + 1j * np.sin(ang) * np.einsum("k,kij->ij", nhat, SIGMA)
    return Unitary2(phase * m)


def log_unitary(u: Unitary2) -> PauliVector:
    """Principal generator ``r`` with ``u = exp(i (r0 I + r.sigma))``, ``|r| in [0, pi]``."""
    m = u.matrix
    det = np.linalg.det(m)
    r0 = 0.5 * np.angle(det)
    su = m * np.exp(-1j * r0)
    c = 0.5 * np.trace(su).real
    v = np.array([np.trace(s @ su).imag / 2 for s in SIGMA])
    sv = float(np.linalg.norm(v))
    if sv < 1e-15 and c < 0:
        # -I: fold the sign into the global phase
        return PauliVector(r0 + np.pi, 0.0, 0.0, 0.0)
    ang = np.arctan2(sv, c)
    r = v * (ang / sv) if sv > 0 else np.zeros(3)
    return PauliVector(float(r0), *map(float, r))


def compose_rotations(n: PauliVector, m: PauliVector) -> PauliVector:
    """Generator of ``exp(i n.sigma) exp(i m.sigma)`` via the closed product rule."""
    if not (n.is_real() and m.is_real()):
        raise ValueError("compose_rotations needs real-coefficient generators")
    nv, mv = n.vector.real, m.vector.real
    na, ma = np.linalg.norm(nv), np.linalg.norm(mv)
    nh = nv / na if na > 0 else np.zeros(3)
    mh = mv / ma if ma > 0 else np.zeros(3)
    sn, cn, sm, cm = np.sin(na), np.cos(na), np.sin(ma), np.cos(ma)
    scalar = cn * cm - (nh @ mh) * sn * sm
    vec = nh * sn * cm + mh * cn * sm - np.cross(nh, mh) * sn * sm
    phase = np.exp(1j * (n.a0.real + m.a0.real))
    mat = phase * (scalar * I2 + 1j * np.einsum("k,kij->ij", vec, SIGMA))
    return log_unitary(Unitary2(mat))


def conjugate_sigma(theta: float, i: int, j: int) -> PauliVector:
    """``exp(i theta s_i) s_j exp(-i theta s_i) = s_j cos 2theta - eps_ijk s_k sin 2theta``."""
    if i == j:
        raise ValueError("conjugate_sigma needs distinct axes")
    if i not in (1, 2, 3) or j not in (1, 2, 3):
        raise ValueError("axes must be 1, 2 or 3")
    k = 6 - i - j
    eps = 1.0 if (i, j, k) in ((1, 2, 3), (2, 3, 1), (3, 1, 2)) else -1.0
    c = np.zeros(4)
    c[j] = np.cos(2 * theta)
    c[k] = -eps * np.sin(2 * theta)
    return PauliVector.from_array(c)


def magnus_terms(hamiltonian, edges, order: int = 2, rtol: float = 1e-11,
                 atol: float = 1e-13) -> list[PauliVector]:
    """First ``order`` Magnus terms of ``U = exp(M1 + M2 + M3)``.

    ``hamiltonian(t)`` returns the coefficient array (shape ``t.shape + (4,)``)
    of ``H(t)/hbar`` in rad/s; ``edges`` are the breakpoints where it may be
    non-smooth. Nested integrals use Gauss-Legendre panels doubled until
    successive results agree to ``rtol`` in coefficient max-norm.
    """
    if not 1 <= order <= 3:
        raise ValueError("magnus_terms supports order 1..3")
    h = hamiltonian
    terms = [PauliVector.from_array(-1j * integrate(h, edges, rtol=rtol, atol=atol))]
    if order >= 2:
        def f2(t1, t2):
            return commutator(h(t1), h(t2))
        m2 = -0.5 * integrate_nested(f2, edges, rtol=rtol, atol=atol)
        terms.append(PauliVector.from_array(m2))
    if order >= 3:
        def f3(t1, t2):
            t1, t2 = np.broadcast_arrays(t1, t2)
            h1, h2 = h(t1), h(t2)
            q2 = cumulative(h, edges, t2.ravel(), panels=4).reshape(h2.shape)
            return (commutator(h1, commutator(h2, q2))
                    + commutator(q2, commutator(h2, h1)))
        m3 = (1j / 6) * integrate_nested(f3, edges, rtol=max(rtol, 1e-9), atol=atol,
                                          max_level=3)
        terms.append(PauliVector.from_array(m3))
    return terms
