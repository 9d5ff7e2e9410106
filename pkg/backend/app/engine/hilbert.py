"""
Spin-1/2 Hilbert spaces on L sites.

Basis convention: a basis state of V^L is an integer code in [0, 2^L). Bit j-1
of the code carries site j; a set bit means spin down. Site 1 is therefore the
least significant bit. Labels are read left to right as sites 1..L, using
either arrows ("↑↓↑") or ASCII ("udu").
"""
import hashlib
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

logger = logging.getLogger(__name__)

UP, DOWN = 0, 1
_LABEL_TO_BIT = {"↑": UP, "↓": DOWN, "u": UP, "d": DOWN, "U": UP, "D": DOWN}
_ARROWS = ("↑", "↓")
_ASCII = ("u", "d")


class HilbertError(ValueError):
    """Raised for malformed lengths, labels, scalars or dimension mismatches."""
    pass


def dimension(length: int) -> int:
    if length < 1:
        raise HilbertError(f"Chain length must be positive, got {length}")
    return 1 << length


def rng_for(seed: int, *keys: Union[int, str]) -> np.random.Generator:
    """Deterministic generator split by ``keys`` (strings are hashed stably)."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for key in keys:
        if isinstance(key, str):
            key = int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")
        entropy.append(int(key))
    return np.random.default_rng(np.random.SeedSequence(entropy))


# --- Basis tables ---

@lru_cache(maxsize=None)
def basis_codes(length: int) -> np.ndarray:
    codes = np.arange(dimension(length), dtype=np.int64)
    codes.setflags(write=False)
    return codes


@lru_cache(maxsize=None)
def down_counts(length: int) -> np.ndarray:
    codes = basis_codes(length)
    counts = np.zeros_like(codes)
    for j in range(length):
        counts += (codes >> j) & 1
    counts.setflags(write=False)
    return counts


@lru_cache(maxsize=None)
def _rotation(length: int, power: int) -> np.ndarray:
    # Code of S^power |c>.
    codes = basis_codes(length)
    k = power % length
    mask = (1 << length) - 1
    if k == 0:
        return codes
    rotated = ((codes << k) & mask) | (codes >> (length - k))
    rotated.setflags(write=False)
    return rotated


@lru_cache(maxsize=None)
def sigma_z_signs(length: int) -> np.ndarray:
    # Eigenvalues of σᶻ⊗…⊗σᶻ: (-1)^#down.
    signs = np.where(down_counts(length) % 2 == 0, 1.0, -1.0)
    signs.setflags(write=False)
    return signs


@lru_cache(maxsize=None)
def parity_signs(length: int) -> np.ndarray:
    signs = sigma_z_signs(length) * (-1.0) ** length
    signs.setflags(write=False)
    return signs


# --- Domain types ---

@dataclass(frozen=True)
class SpinState:
    length: int
    code: int

    def __post_init__(self):
        dim = dimension(self.length)
        if not 0 <= self.code < dim:
            raise HilbertError(f"Code {self.code} outside [0, {dim}) for L={self.length}")

    @classmethod
    def from_label(cls, label: str) -> "SpinState":
        if not label:
            raise HilbertError("Empty spin label")
        try:
            bits = [_LABEL_TO_BIT[ch] for ch in label]
        except KeyError as e:
            raise HilbertError(f"Unknown spin symbol {e.args[0]!r} in label {label!r}")
        code = sum(bit << j for j, bit in enumerate(bits))
        return cls(len(bits), code)

    def spin(self, site: int) -> int:
        if not 1 <= site <= self.length:
            raise HilbertError(f"Site {site} outside 1..{self.length}")
        return (self.code >> (site - 1)) & 1

    @property
    def n_down(self) -> int:
        return bin(self.code).count("1")

    def label(self, ascii: bool = False) -> str:
        symbols = _ASCII if ascii else _ARROWS
        return "".join(symbols[(self.code >> j) & 1] for j in range(self.length))

    def __str__(self) -> str:
        return f"|{self.label()}⟩"


@dataclass(frozen=True, eq=False)
class StateVector:
    length: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        dim = dimension(self.length)
        if amps.shape != (dim,):
            raise HilbertError(f"Amplitude shape {amps.shape} does not match 2^{self.length}={dim}")
        if not np.all(np.isfinite(amps)):
            raise HilbertError("State has non-finite amplitudes")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zeros(cls, length: int) -> "StateVector":
        return cls(length, np.zeros(dimension(length), dtype=np.complex128))

    @classmethod
    def basis(cls, state: Union[SpinState, str]) -> "StateVector":
        if isinstance(state, str):
            state = SpinState.from_label(state)
        amps = np.zeros(dimension(state.length), dtype=np.complex128)
        amps[state.code] = 1.0
        return cls(state.length, amps)

    @classmethod
    def all_up(cls, length: int) -> "StateVector":
        return cls.basis(SpinState(length, 0))

    @classmethod
    def random(cls, length: int, rng: np.random.Generator) -> "StateVector":
        dim = dimension(length)
        return cls(length, rng.standard_normal(dim) + 1j * rng.standard_normal(dim))

    def amplitude(self, state: Union[SpinState, str]) -> complex:
        if isinstance(state, str):
            state = SpinState.from_label(state)
        if state.length != self.length:
            raise HilbertError(f"Label length {state.length} does not match L={self.length}")
        return complex(self.amplitudes[state.code])

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other: "StateVector") -> complex:
        """<self|other>, antilinear in ``self``."""
        self._check_compatible(other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def normalized(self) -> "StateVector":
        norm = self.norm()
        if norm == 0.0:
            raise HilbertError("Cannot normalise the zero vector")
        return StateVector(self.length, self.amplitudes / norm)

    def _check_compatible(self, other: "StateVector") -> None:
        if not isinstance(other, StateVector) or other.length != self.length:
            raise HilbertError("States live on chains of different length")

    def __add__(self, other: "StateVector") -> "StateVector":
        self._check_compatible(other)
        return StateVector(self.length, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "StateVector") -> "StateVector":
        self._check_compatible(other)
        return StateVector(self.length, self.amplitudes - other.amplitudes)

    def __mul__(self, scalar: complex) -> "StateVector":
        return StateVector(self.length, self.amplitudes * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "StateVector":
        return StateVector(self.length, -self.amplitudes)


# --- Linear maps ---

class MapKind(str, Enum):
    DENSE = "dense"
    SPARSE = "sparse-triplet"
    MATRIX_FREE = "matrix-free"


ArrayMap = Callable[[np.ndarray], np.ndarray]
Matrix = Union[np.ndarray, sp.spmatrix]


@dataclass(frozen=True, eq=False)
class LinearMap:
    """
    Linear operator V^length_in -> V^length_out.

    Stored kinds keep their matrix; matrix-free maps carry ``matvec`` (and
    ``rmatvec`` for the adjoint). Applies accept a single state or a block of
    column vectors of shape (2^length_in, k).
    """
    length_in: int
    length_out: int
    kind: MapKind
    matrix: Optional[Matrix] = None
    matvec: Optional[ArrayMap] = None
    rmatvec: Optional[ArrayMap] = None
    label: str = ""

    def __post_init__(self):
        shape = (dimension(self.length_out), dimension(self.length_in))
        if self.kind is MapKind.MATRIX_FREE:
            if self.matvec is None:
                raise HilbertError("Matrix-free map requires matvec")
        else:
            if self.matrix is None:
                raise HilbertError(f"{self.kind.value} map requires a stored matrix")
            if self.matrix.shape != shape:
                raise HilbertError(f"Matrix shape {self.matrix.shape} does not match {shape}")

    # --- Constructors ---

    @classmethod
    def dense(cls, matrix: np.ndarray, length_in: int, length_out: int, label: str = "") -> "LinearMap":
        return cls(length_in, length_out, MapKind.DENSE, matrix=np.asarray(matrix, dtype=np.complex128), label=label)

    @classmethod
    def sparse(cls, rows, cols, values, length_in: int, length_out: int, label: str = "") -> "LinearMap":
        shape = (dimension(length_out), dimension(length_in))
        matrix = sp.coo_matrix((np.asarray(values, dtype=np.complex128), (rows, cols)), shape=shape).tocsr()
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        return cls(length_in, length_out, MapKind.SPARSE, matrix=matrix, label=label)

    @classmethod
    def matrix_free(cls, matvec: ArrayMap, length_in: int, length_out: int,
                    rmatvec: Optional[ArrayMap] = None, label: str = "") -> "LinearMap":
        return cls(length_in, length_out, MapKind.MATRIX_FREE, matvec=matvec, rmatvec=rmatvec, label=label)

    @classmethod
    def identity(cls, length: int) -> "LinearMap":
        return cls(length, length, MapKind.SPARSE, matrix=sp.identity(dimension(length), dtype=np.complex128, format="csr"), label="1")

    # --- Application ---

    @property
    def shape(self) -> Tuple[int, int]:
        return (dimension(self.length_out), dimension(self.length_in))

    def apply_array(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        if x.shape[0] != self.shape[1]:
            raise HilbertError(f"Input dimension {x.shape[0]} does not match {self.label or 'map'} domain {self.shape[1]}")
        if self.matrix is not None:
            return np.asarray(self.matrix @ x)
        return self.matvec(x)

    def __call__(self, psi: StateVector) -> StateVector:
        if psi.length != self.length_in:
            raise HilbertError(f"State of length {psi.length} fed to map on L={self.length_in}")
        return StateVector(self.length_out, self.apply_array(psi.amplitudes))

    apply = __call__

    def adjoint(self) -> "LinearMap":
        label = f"({self.label})†" if self.label else ""
        if self.kind is MapKind.DENSE:
            return LinearMap.dense(self.matrix.conj().T, self.length_out, self.length_in, label)
        if self.kind is MapKind.SPARSE:
            return LinearMap(self.length_out, self.length_in, MapKind.SPARSE,
                             matrix=self.matrix.conj().T.tocsr(), label=label)
        if self.rmatvec is None:
            raise HilbertError(f"Map {self.label or '<anonymous>'} has no adjoint action")
        return LinearMap.matrix_free(self.rmatvec, self.length_out, self.length_in, rmatvec=self.matvec, label=label)

    def to_dense(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix.toarray() if sp.issparse(self.matrix) else np.array(self.matrix)
        return self.apply_array(np.eye(self.shape[1], dtype=np.complex128))

    def as_linear_operator(self) -> LinearOperator:
        rmatvec = None
        if self.matrix is not None or self.rmatvec is not None:
            adjoint = self.adjoint()
            rmatvec = adjoint.apply_array
        return LinearOperator(self.shape, matvec=self.apply_array, rmatvec=rmatvec,
                              matmat=self.apply_array, dtype=np.complex128)

    # --- Algebra ---

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return self(other)
        if isinstance(other, np.ndarray):
            return self.apply_array(other)
        if not isinstance(other, LinearMap):
            return NotImplemented
        if other.length_out != self.length_in:
            raise HilbertError(f"Cannot compose L={self.length_in} map after L={other.length_out} map")
        label = f"{self.label}·{other.label}" if self.label and other.label else ""
        if self.matrix is not None and other.matrix is not None:
            if sp.issparse(self.matrix) and sp.issparse(other.matrix):
                return LinearMap(other.length_in, self.length_out, MapKind.SPARSE,
                                 matrix=(self.matrix @ other.matrix).tocsr(), label=label)
            return LinearMap.dense(_densify(self.matrix) @ _densify(other.matrix), other.length_in, self.length_out, label)
        rmatvec = None
        if (self.matrix is not None or self.rmatvec is not None) and (other.matrix is not None or other.rmatvec is not None):
            left_adj, right_adj = self.adjoint(), other.adjoint()
            rmatvec = lambda y: right_adj.apply_array(left_adj.apply_array(y))
        return LinearMap.matrix_free(lambda x: self.apply_array(other.apply_array(x)),
                                     other.length_in, self.length_out, rmatvec=rmatvec, label=label)

    def _combine(self, other: "LinearMap", sign: float) -> "LinearMap":
        if not isinstance(other, LinearMap):
            return NotImplemented
        if (other.length_in, other.length_out) != (self.length_in, self.length_out):
            raise HilbertError("Cannot add maps between different spaces")
        if self.matrix is not None and other.matrix is not None:
            if sp.issparse(self.matrix) and sp.issparse(other.matrix):
                return LinearMap(self.length_in, self.length_out, MapKind.SPARSE,
                                 matrix=(self.matrix + sign * other.matrix).tocsr())
            return LinearMap.dense(_densify(self.matrix) + sign * _densify(other.matrix), self.length_in, self.length_out)
        rmatvec = None
        if (self.matrix is not None or self.rmatvec is not None) and (other.matrix is not None or other.rmatvec is not None):
            left_adj, right_adj = self.adjoint(), other.adjoint()
            rmatvec = lambda y: left_adj.apply_array(y) + sign * right_adj.apply_array(y)
        return LinearMap.matrix_free(lambda x: self.apply_array(x) + sign * other.apply_array(x),
                                     self.length_in, self.length_out, rmatvec=rmatvec)

    def __add__(self, other: "LinearMap") -> "LinearMap":
        return self._combine(other, 1.0)

    def __sub__(self, other: "LinearMap") -> "LinearMap":
        return self._combine(other, -1.0)

    def __mul__(self, scalar: complex) -> "LinearMap":
        if not np.isscalar(scalar):
            return NotImplemented
        if self.matrix is not None:
            return LinearMap(self.length_in, self.length_out, self.kind, matrix=self.matrix * scalar, label=self.label)
        rmatvec = None
        if self.rmatvec is not None:
            rmatvec = lambda y: np.conj(scalar) * self.rmatvec(y)
        return LinearMap.matrix_free(lambda x: scalar * self.matvec(x), self.length_in, self.length_out,
                                     rmatvec=rmatvec, label=self.label)

    __rmul__ = __mul__

    def __neg__(self) -> "LinearMap":
        return self * -1.0


def _densify(matrix: Matrix) -> np.ndarray:
    return matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)


def _coerce(psi: Union[StateVector, np.ndarray], length: Optional[int] = None) -> Tuple[np.ndarray, int]:
    if isinstance(psi, StateVector):
        return psi.amplitudes, psi.length
    x = np.asarray(psi, dtype=np.complex128)
    if length is None:
        length = int(x.shape[0]).bit_length() - 1
    if x.shape[0] != dimension(length):
        raise HilbertError(f"Array of size {x.shape[0]} is not a state on L={length}")
    return x, length


# --- Symmetry operators on arrays (axis 0 carries the basis) ---

def translate_array(x: np.ndarray, length: int, power: int = 1) -> np.ndarray:
    out = np.empty_like(x)
    out[_rotation(length, power)] = x
    return out


def parity_array(x: np.ndarray, length: int) -> np.ndarray:
    signs = parity_signs(length)
    return x * (signs if x.ndim == 1 else signs[:, None])


def reversal_array(x: np.ndarray, length: int) -> np.ndarray:
    # complement of the code is the reversed index order
    return x[::-1].copy()


def m_lambda_diagonal(length: int, lam: complex) -> np.ndarray:
    if lam == 0:
        raise HilbertError("M(λ) requires λ ≠ 0")
    return np.asarray(lam, dtype=np.complex128) ** (length + down_counts(length))


# --- Operations on states ---

def translate(psi: StateVector, power: int = 1) -> StateVector:
    """S^power: |s1 ... sL> -> |sL s1 ... s(L-1)> for power 1."""
    return StateVector(psi.length, translate_array(psi.amplitudes, psi.length, power))


def parity_apply(psi: StateVector) -> StateVector:
    return StateVector(psi.length, parity_array(psi.amplitudes, psi.length))


def reversal_apply(psi: StateVector) -> StateVector:
    return StateVector(psi.length, reversal_array(psi.amplitudes, psi.length))


def m_lambda_apply(lam: complex, psi: StateVector) -> StateVector:
    """Scales a basis state with u up and k down spins by λ^(u+2k)."""
    return StateVector(psi.length, psi.amplitudes * m_lambda_diagonal(psi.length, lam))


# --- Operators as LinearMaps ---

def translation_map(length: int, power: int = 1) -> LinearMap:
    codes = basis_codes(length)
    return LinearMap.sparse(_rotation(length, power), codes, np.ones(codes.shape[0]), length, length, label="S")


def parity_map(length: int) -> LinearMap:
    codes = basis_codes(length)
    return LinearMap.sparse(codes, codes, parity_signs(length), length, length, label="P")


def reversal_map(length: int) -> LinearMap:
    codes = basis_codes(length)
    mask = (1 << length) - 1
    return LinearMap.sparse(codes ^ mask, codes, np.ones(codes.shape[0]), length, length, label="R")


def m_lambda_map(length: int, lam: complex) -> LinearMap:
    codes = basis_codes(length)
    return LinearMap.sparse(codes, codes, m_lambda_diagonal(length, lam), length, length, label=f"M({lam})")


def parity_projector(length: int, sign: int) -> LinearMap:
    if sign not in (1, -1):
        raise HilbertError(f"Parity sector must be +1 or -1, got {sign}")
    codes = basis_codes(length)
    keep = (parity_signs(length) == sign).astype(np.float64)
    return LinearMap.sparse(codes, codes, keep, length, length, label=f"P[{sign:+d}]")


def translation_projector(length: int, eigenvalue: complex) -> LinearMap:
    """Orthogonal projector (1/L) Σ_k t^(-k) S^k onto the S-eigenspace with eigenvalue t."""
    t = complex(eigenvalue)
    if abs(t ** length - 1.0) > 1e-12:
        raise HilbertError(f"{eigenvalue} is not an eigenvalue of S on L={length} (t^L ≠ 1)")
    dimension(length)
    phases = [t ** (-k) for k in range(length)]

    def project(x: np.ndarray) -> np.ndarray:
        acc = np.zeros_like(x, dtype=np.complex128)
        shifted = np.asarray(x, dtype=np.complex128)
        for k in range(length):
            acc += phases[k] * shifted
            shifted = translate_array(shifted, length, 1)
        return acc / length

    return LinearMap.matrix_free(project, length, length, rmatvec=project, label=f"P_S[{eigenvalue}]")


def alternate_cyclic_eigenvalue(length: int) -> int:
    return (-1) ** (length + 1)


def alternate_cyclic_projector(length: int) -> LinearMap:
    """Projector onto W^L, the S-eigenspace with eigenvalue (-1)^(L+1)."""
    proj = translation_projector(length, alternate_cyclic_eigenvalue(length))
    return LinearMap.matrix_free(proj.matvec, length, length, rmatvec=proj.matvec, label="P_W")


def supersymmetric_couplings(zeta: float) -> Tuple[float, float, float]:
    """(Jx, Jy, Jz) = (1+ζ, 1-ζ, (ζ²-1)/2)."""
    return 1.0 + zeta, 1.0 - zeta, (zeta * zeta - 1.0) / 2.0


def xyz_hamiltonian(length: int, jx: float, jy: float, jz: float) -> LinearMap:
    """
    H = -1/2 Σ_j (Jx σx_j σx_j+1 + Jy σy_j σy_j+1 + Jz σz_j σz_j+1), periodic.

    Stored as a sparse matrix: each bond flips a pair of neighbouring spins with
    amplitude -(Jx-Jy)/2 (aligned pair) or -(Jx+Jy)/2 (anti-aligned pair) and
    contributes -Jz/2 (aligned) or +Jz/2 (anti-aligned) on the diagonal.
    """
    if length < 2:
        raise HilbertError(f"XYZ Hamiltonian needs L ≥ 2, got {length}")
    codes = basis_codes(length)
    diagonal = np.zeros(codes.shape[0], dtype=np.float64)
    rows, cols, vals = [codes], [codes], []
    for j in range(length):
        k = (j + 1) % length
        aligned = ((codes >> j) & 1) == ((codes >> k) & 1)
        diagonal += np.where(aligned, -0.5 * jz, 0.5 * jz)
        flipped = codes ^ ((1 << j) | (1 << k))
        rows.append(flipped)
        cols.append(codes)
        vals.append(np.where(aligned, -0.5 * (jx - jy), -0.5 * (jx + jy)))
    vals.insert(0, diagonal)
    return LinearMap.sparse(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
                            length, length, label="H_XYZ")
