"""Small dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  The vectorization
convention is row-major (rows are stacked), so that the conjugation map
``X -> B X B^*`` is represented by ``np.kron(B, B.conj())``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-12
TRACE_TOL = 1e-12
KRAUS_TOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class InvalidDensityError(ValueError):
    """Raised when a matrix is not a valid density matrix."""


def as_matrix(m) -> np.ndarray:
    """Return ``m`` as a 2-d complex array (copy-free when possible)."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def vec(m) -> np.ndarray:
    """Stack the rows of ``m`` into a single column vector."""
    return as_matrix(m).reshape(-1)


def unvec(v, rows: int, cols: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`."""
    if cols is None:
        cols = rows
    v = np.asarray(v, dtype=complex).reshape(-1)
    if v.size != rows * cols:
        raise ValueError(f"vector of length {v.size} cannot be reshaped to ({rows}, {cols})")
    return v.reshape(rows, cols)


def conj_rep(b) -> np.ndarray:
    """Matrix representation ``B (x) conj(B)`` of the conjugation ``X -> B X B^*``."""
    b = as_matrix(b)
    if b.shape[0] != b.shape[1]:
        raise ValueError("conj_rep needs a square matrix")
    return np.kron(b, b.conj())


def channel_rep(kraus) -> np.ndarray:
    """Representation ``sum_i B_i (x) conj(B_i)`` of a channel in Kraus form."""
    mats = [as_matrix(k) for k in kraus]
    return sum(conj_rep(k) for k in mats)


def conjugate(b, x) -> np.ndarray:
    """Return ``b @ x @ b^*``."""
    b = as_matrix(b)
    x = as_matrix(x)
    if b.shape[1] != x.shape[0] or x.shape[0] != x.shape[1]:
        raise ValueError(f"shape mismatch: {b.shape} acting on {x.shape}")
    return b @ x @ b.conj().T


def check_kraus_normalization(mats, tol: float = KRAUS_TOL) -> tuple[bool, float]:
    """Check ``sum M^* M = I``.

    Returns ``(ok, residual)`` where the residual is the max-abs entry of
    ``sum M^* M - I``.
    """
    mats = [as_matrix(m) for m in mats]
    n = mats[0].shape[0]
    for m in mats:
        if m.shape != (n, n):
            raise ValueError("all Kraus matrices must be square of the same order")
    total = sum(m.conj().T @ m for m in mats)
    residual = float(np.max(np.abs(total - np.eye(n))))
    return residual <= tol, residual


def is_hermitian(m, tol: float = HERMITIAN_TOL) -> bool:
    m = as_matrix(m)
    return m.shape[0] == m.shape[1] and float(np.max(np.abs(m - m.conj().T), initial=0.0)) <= tol


def is_psd(m, tol: float = PSD_TOL) -> bool:
    m = as_matrix(m)
    if not is_hermitian(m, max(tol, HERMITIAN_TOL)):
        return False
    return float(np.linalg.eigvalsh((m + m.conj().T) / 2).min()) >= -tol


def allclose(a, b, atol: float = 1e-10) -> bool:
    """Absolute-tolerance matrix equality."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    return a.shape == b.shape and float(np.max(np.abs(a - b), initial=0.0)) <= atol


def hermitian_function(m, f) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its eigendecomposition."""
    m = as_matrix(m)
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return (v * f(w)) @ v.conj().T


def psd_sqrt(m) -> np.ndarray:
    """Principal square root of a positive semidefinite matrix."""
    return hermitian_function(m, lambda w: np.sqrt(np.clip(w, 0.0, None)))


def pd_inv_sqrt(m) -> np.ndarray:
    """``m^{-1/2}`` for a positive definite matrix."""
    w, v = np.linalg.eigh((as_matrix(m) + as_matrix(m).conj().T) / 2)
    if w.min() <= 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    return (v / np.sqrt(w)) @ v.conj().T


def commutator_norm(a, b) -> float:
    a = as_matrix(a)
    b = as_matrix(b)
    return float(np.max(np.abs(a @ b - b @ a), initial=0.0))


def is_normal(m, tol: float = 1e-10) -> bool:
    m = as_matrix(m)
    return commutator_norm(m, m.conj().T) <= tol


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix.

    Construction validates the matrix; use :meth:`from_bloch` for the order-2
    parametrization ``(I + x sx + y sy + z sz) / 2``.
    """

    mat: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.mat).copy()
        if m.shape[0] != m.shape[1]:
            raise InvalidDensityError(f"density must be square, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidDensityError("density has non-finite entries")
        if not is_hermitian(m, HERMITIAN_TOL):
            raise InvalidDensityError("density is not Hermitian")
        if abs(np.trace(m) - 1) > TRACE_TOL:
            raise InvalidDensityError(f"density trace is {np.trace(m).real}, not 1")
        lo = float(np.linalg.eigvalsh(m).min())
        if lo < -PSD_TOL:
            raise InvalidDensityError(f"density has negative eigenvalue {lo}")
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    @property
    def order(self) -> int:
        return self.mat.shape[0]

    @classmethod
    def from_bloch(cls, x: float, y: float, z: float) -> "DensityMatrix":
        if x * x + y * y + z * z > 1 + 1e-12:
            raise InvalidDensityError("Bloch vector outside the unit ball")
        return cls(bloch_matrix(x, y, z))

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def basis(cls, n: int, k: int) -> "DensityMatrix":
        """The projector ``E_kk`` (0-based ``k``) of order ``n``."""
        m = np.zeros((n, n), dtype=complex)
        m[k, k] = 1
        return cls(m)

    def bloch(self) -> tuple[float, float, float]:
        if self.order != 2:
            raise ValueError("Bloch coordinates exist only for order 2")
        m = self.mat
        return (2 * m[0, 1].real, -2 * m[0, 1].imag, (m[0, 0] - m[1, 1]).real)

    @property
    def re12(self) -> float:
        return float(self.mat[0, 1].real)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.mat, dtype=dtype)


def bloch_matrix(x: float, y: float, z: float) -> np.ndarray:
    return 0.5 * (np.eye(2) + x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z)


def density(rho) -> DensityMatrix:
    """Coerce ``rho`` (array or :class:`DensityMatrix`) to a validated density."""
    if isinstance(rho, DensityMatrix):
        return rho
    return DensityMatrix(np.asarray(rho, dtype=complex))


def matrix_to_json(m) -> dict:
    m = as_matrix(m)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "re": m.real.reshape(-1).tolist(),
        "im": m.imag.reshape(-1).tolist(),
    }


def matrix_from_json(obj) -> np.ndarray:
    """Parse ``{"rows","cols","re","im"}`` or a nested list of numbers."""
    if isinstance(obj, dict):
        extra = set(obj) - {"rows", "cols", "re", "im"}
        if extra:
            raise ValueError(f"unknown matrix keys: {sorted(extra)}")
        rows, cols = int(obj["rows"]), int(obj["cols"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros(rows * cols)), dtype=float)
        if re.size != rows * cols or im.size != rows * cols:
            raise ValueError("matrix entry count does not match rows*cols")
        return (re + 1j * im).reshape(rows, cols)
    return as_matrix(obj)
