"""
SpinLoop - Operator Algebra
===========================
Dense complex matrix foundation for everything else in SpinLoop.

Conventions:
- hbar = 1: Hamiltonians are in rad/s, times in seconds, phases in radians
- Spin basis: index 0 = |up>, index 1 = |down>, sigma_z = diag(+1, -1)
- Tensor products put the first factor's indices major (numpy.kron order)

All values are immutable after construction; every function is pure.
"""

from dataclasses import InitVar, dataclass
from functools import reduce
from typing import Iterable, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from .errors import DecompositionError, DimensionError, ValidationError

# Absolute max-norm tolerances for the Hermitian / unitary invariants
HERM_TOL = 1e-10
UNIT_TOL = 1e-10

# A ComplexMatrix is a 2-D complex numpy array with finite entries
ComplexMatrix = np.ndarray


def as_matrix(data, name: str = "matrix") -> ComplexMatrix:
    """Copy ``data`` into a read-only complex 2-D array, rejecting NaN/Inf"""
    if hasattr(data, "matrix"):
        data = data.matrix
    arr = np.array(data, dtype=complex, copy=True)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


def _array(x) -> np.ndarray:
    """Raw array behind an operator or array-like"""
    if hasattr(x, "matrix"):
        return x.matrix
    return np.asarray(x, dtype=complex)


def max_norm(a) -> float:
    """Largest absolute entry"""
    arr = _array(a)
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def is_unitary(a, tol: float = UNIT_TOL) -> bool:
    arr = _array(a)
    if arr.shape[0] != arr.shape[1]:
        return False
    return max_norm(arr.conj().T @ arr - np.eye(arr.shape[0])) <= tol


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """
    A validated N x N Hermitian matrix.
    Houses drift Hamiltonians, control / coupling operators and observables.
    """
    matrix: ComplexMatrix
    label: str = ""
    tol: InitVar[float] = HERM_TOL

    def __post_init__(self, tol: float):
        arr = as_matrix(self.matrix, self.label or "operator")
        if arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"Hermitian operator must be square, got {arr.shape}")
        if max_norm(arr - arr.conj().T) > tol:
            raise ValidationError(
                f"operator '{self.label}' is not Hermitian within {tol:g}"
            )
        object.__setattr__(self, "matrix", arr)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def traceless(self) -> ComplexMatrix:
        """A - tr(A)/N I"""
        return self.matrix - np.trace(self.matrix) / self.dim * np.eye(self.dim)

    def norm(self) -> float:
        """Hilbert-Schmidt (Frobenius) norm"""
        return hs_norm(self.matrix)

    def is_scalar(self, rel_tol: float = 1e-9) -> bool:
        """True when the operator is a multiple of the identity (or zero)"""
        total = self.norm()
        if total == 0.0:
            return True
        return hs_norm(self.traceless()) <= rel_tol * total

    def __repr__(self) -> str:
        return f"HermitianOperator(dim={self.dim}, label={self.label!r})"


@dataclass(frozen=True, eq=False)
class UnitaryOperator:
    """A validated N x N unitary matrix (any applied evolution or gate)"""
    matrix: ComplexMatrix
    label: str = ""
    tol: InitVar[float] = UNIT_TOL

    def __post_init__(self, tol: float):
        arr = as_matrix(self.matrix, self.label or "unitary")
        if arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"unitary must be square, got {arr.shape}")
        if not is_unitary(arr, tol):
            raise ValidationError(f"operator '{self.label}' is not unitary within {tol:g}")
        object.__setattr__(self, "matrix", arr)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __repr__(self) -> str:
        return f"UnitaryOperator(dim={self.dim}, label={self.label!r})"


@dataclass(frozen=True)
class TensorSpace:
    """Ordered factorization of a Hilbert space, e.g. system x controller"""
    factor_dims: Tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        if not dims:
            raise DimensionError("a tensor space needs at least one factor")
        if any(d < 2 for d in dims):
            raise DimensionError(f"every factor must have dimension >= 2, got {dims}")
        object.__setattr__(self, "factor_dims", dims)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.factor_dims))

    @property
    def n_factors(self) -> int:
        return len(self.factor_dims)

    def check_targets(self, targets: Iterable[int]) -> Tuple[int, ...]:
        """Validate a list of distinct factor indices and return it as a tuple"""
        targets = tuple(int(t) for t in targets)
        if not targets:
            raise DimensionError("target list is empty")
        if len(set(targets)) != len(targets):
            raise DimensionError(f"duplicate targets {targets}")
        for t in targets:
            if not 0 <= t < self.n_factors:
                raise DimensionError(f"factor index {t} out of range for {self.factor_dims}")
        return targets

    def targets_dim(self, targets: Iterable[int]) -> int:
        return int(np.prod([self.factor_dims[t] for t in self.check_targets(targets)]))

    def extended(self, dim: int) -> "TensorSpace":
        """This space with one more factor appended"""
        return TensorSpace(self.factor_dims + (int(dim),))

    def to_dict(self) -> dict:
        return {'dims': list(self.factor_dims)}


def identity(n: int) -> ComplexMatrix:
    return np.eye(n, dtype=complex)


_PAULI = {
    'x': np.array([[0, 1], [1, 0]], dtype=complex),
    'y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'z': np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(axis: str) -> HermitianOperator:
    """2x2 Pauli matrix for axis 'x', 'y' or 'z' (|up> = index 0)"""
    key = str(axis).lower()
    if key not in _PAULI:
        raise ValidationError(f"unknown Pauli axis '{axis}'")
    return HermitianOperator(_PAULI[key], f"sigma_{key}")


def kron(a, b) -> ComplexMatrix:
    """Kronecker product, a's indices major"""
    return np.kron(_array(a), _array(b))


def kron_all(*ops) -> ComplexMatrix:
    return reduce(kron, ops)


def embed_on(op, space: TensorSpace, targets: Sequence[int]) -> ComplexMatrix:
    """
    Lift ``op`` acting on the listed factors (in the listed order) to the
    full space, acting as the identity on every other factor.
    """
    arr = _array(op)
    targets = space.check_targets(targets)
    d_targets = space.targets_dim(targets)
    if arr.shape != (d_targets, d_targets):
        raise DimensionError(
            f"operator of shape {arr.shape} does not act on factors {targets} "
            f"(dimension {d_targets})"
        )
    n = space.n_factors
    rest = [i for i in range(n) if i not in targets]
    d_rest = int(np.prod([space.factor_dims[i] for i in rest])) if rest else 1
    full = np.kron(arr, np.eye(d_rest))

    # full acts on factors ordered (targets..., rest...); permute back to natural order
    order = list(targets) + rest
    if order == list(range(n)):
        return full
    shape = [space.factor_dims[i] for i in order] * 2
    inverse = list(np.argsort(order))
    tensor = full.reshape(shape).transpose(inverse + [n + i for i in inverse])
    return tensor.reshape(space.total_dim, space.total_dim)


def embed(op, space: TensorSpace, position: int) -> ComplexMatrix:
    """I x ... x op x ... x I with op on factor ``position``"""
    if not 0 <= int(position) < space.n_factors:
        raise DimensionError(f"position {position} out of range for {space.factor_dims}")
    return embed_on(op, space, [position])


def _square_pair(a, b, what: str) -> Tuple[np.ndarray, np.ndarray]:
    x, y = _array(a), _array(b)
    if x.shape != y.shape or x.shape[0] != x.shape[1]:
        raise DimensionError(f"{what} needs square matrices of equal size, got {x.shape} and {y.shape}")
    return x, y


def commutator(a, b) -> ComplexMatrix:
    """[a, b] = ab - ba"""
    x, y = _square_pair(a, b, "commutator")
    return x @ y - y @ x


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product tr(a^dagger b)"""
    x, y = _array(a), _array(b)
    if x.shape != y.shape:
        raise DimensionError(f"hs_inner needs equal shapes, got {x.shape} and {y.shape}")
    return complex(np.vdot(x, y))


def hs_norm(a) -> float:
    return float(np.linalg.norm(_array(a)))


def expm_hermitian(h: HermitianOperator, t: float) -> UnitaryOperator:
    """
    exp(-i h t) through the spectral decomposition of h.

    Raises:
        DecompositionError: if the eigensolver does not converge
    """
    if not isinstance(h, HermitianOperator):
        h = HermitianOperator(h)
    try:
        evals, evecs = scipy.linalg.eigh(h.matrix)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise DecompositionError(f"eigendecomposition of '{h.label}' failed: {e}") from e
    phases = np.exp(-1j * evals * float(t))
    u = (evecs * phases) @ evecs.conj().T
    return UnitaryOperator(u, f"exp(-i {h.label or 'H'} t)")


def partial_trace(rho, space: TensorSpace, keep: Iterable[int]) -> ComplexMatrix:
    """
    Reduced matrix on the kept factors (kept in ascending factor order).

    Raises:
        DimensionError: for an invalid keep set or a size mismatch
    """
    arr = _array(rho)
    if arr.shape != (space.total_dim, space.total_dim):
        raise DimensionError(
            f"matrix of shape {arr.shape} does not live on space {space.factor_dims}"
        )
    keep = sorted(space.check_targets(keep))
    n = space.n_factors
    dims = space.factor_dims
    tensor = arr.reshape(dims + dims)

    row = list(range(n))
    col = [n + i for i in range(n)]
    for i in range(n):
        if i not in keep:
            col[i] = row[i]    # contract traced factors
    out = [row[i] for i in keep] + [col[i] for i in keep]
    reduced = np.einsum(tensor, row + col, out)
    d_keep = int(np.prod([dims[i] for i in keep]))
    return reduced.reshape(d_keep, d_keep)
