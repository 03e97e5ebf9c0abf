"""Dense complex linear algebra helpers: Hermitian eigensystems, functional
calculus, Schatten norms and JSON matrix I/O."""

from dataclasses import dataclass

import numpy as np

from nclab.config import TOL


class ContractError(ValueError):
    """Raised when an input violates an operation's precondition."""


class ConvergenceError(RuntimeError):
    pass


def as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ContractError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ContractError("matrix has non-finite entries")
    return A


def hermitian(A, tol: float = TOL.hermitian) -> np.ndarray:
    """Validate near-Hermiticity and return the symmetrized matrix."""
    A = as_matrix(A)
    dev = np.max(np.abs(A - A.conj().T)) if A.size else 0.0
    if dev > tol * max(1.0, np.max(np.abs(A))):
        raise ContractError(f"matrix is not Hermitian (deviation {dev:.3e})")
    return 0.5 * (A + A.conj().T)


@dataclass(frozen=True)
class EigenSystem:
    values: np.ndarray   # ascending, real
    vectors: np.ndarray  # columns are eigenvectors

    def rotate_in(self, V):
        """Matrix of V in the eigenbasis, U* V U."""
        U = self.vectors
        return U.conj().T @ V @ U

    def rotate_out(self, M):
        U = self.vectors
        return U @ M @ U.conj().T


def eigh(A) -> EigenSystem:
    """Eigen-decomposition of a Hermitian matrix with a reconstruction check."""
    A = hermitian(A)
    lam, U = np.linalg.eigh(A)
    resid = np.linalg.norm(U @ np.diag(lam) @ U.conj().T - A)
    if resid > TOL.eig_residual * max(1.0, np.linalg.norm(A)):
        raise ConvergenceError(f"eigendecomposition residual {resid:.3e}")
    return EigenSystem(lam, U)


def _fvalues(f, lam):
    return f(lam) if callable(f) else f.deriv(0, lam)


def apply_function(A, f) -> np.ndarray:
    """U f(Lambda) U* for Hermitian A and a scalar function f."""
    es = eigh(A)
    vals = np.asarray(_fvalues(f, es.values), dtype=complex)
    return (es.vectors * vals) @ es.vectors.conj().T


def trace_f(A, f) -> complex:
    es = eigh(A)
    return complex(np.sum(_fvalues(f, es.values)))


def singular_values(A) -> np.ndarray:
    return np.linalg.svd(np.asarray(A, dtype=complex), compute_uv=False)


def trace_norm(A) -> float:
    return float(np.sum(singular_values(A)))


def schatten_norm(A, p: float) -> float:
    if p < 1:
        raise ContractError("Schatten index must be >= 1")
    s = singular_values(A)
    if np.isinf(p):
        return float(s.max(initial=0.0))
    return float(np.sum(s ** p) ** (1.0 / p))


def op_norm(A) -> float:
    return float(singular_values(A).max(initial=0.0))


def expm_i(H, t: float) -> np.ndarray:
    """exp(-i t H) through the eigendecomposition."""
    es = eigh(H)
    return (es.vectors * np.exp(-1j * t * es.values)) @ es.vectors.conj().T


def commutator(A, B):
    return A @ B - B @ A


def resolvent(H, z: complex = 1j):
    """(H - z)^{-1}."""
    H = as_matrix(H)
    return np.linalg.inv(H - z * np.eye(H.shape[0]))


# random inputs ---------------------------------------------------------------

def random_matrix(rng, n: int, scale: float = 1.0) -> np.ndarray:
    """Complex Gaussian matrix scaled to spectral norm `scale`."""
    M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * M / op_norm(M)


def random_hermitian(rng, n: int, scale: float = 1.0) -> np.ndarray:
    M = random_matrix(rng, n)
    H = 0.5 * (M + M.conj().T)
    return scale * H / op_norm(H)


def random_unitary(rng, n: int) -> np.ndarray:
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


# serialization ---------------------------------------------------------------

def matrix_to_json(A) -> list:
    A = np.asarray(A, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in A]


def matrix_from_json(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ContractError("expected rows of [re, im] pairs")
    return as_matrix(arr[..., 0] + 1j * arr[..., 1])
