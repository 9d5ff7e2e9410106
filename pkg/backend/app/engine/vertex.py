"""
Eight-vertex model: weights, R-matrix, periodic transfer matrix and the
checks that tie it to the supersymmetric XYZ chain.

R acts on V_0 ⊗ V_j; in the basis |↑↑>,|↑↓>,|↓↑>,|↓↓> (auxiliary space first)
it has diagonal (a,b,b,a) and antidiagonal (d,c,c,d). The transfer matrix is
T = tr_0(R_0L ... R_01).
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from app.core.config import settings
from app.engine.hilbert import (
    LinearMap,
    StateVector,
    dimension,
    down_counts,
    parity_projector,
    parity_signs,
    supersymmetric_couplings,
    translate_array,
    xyz_hamiltonian,
)
from app.engine.spectral import (
    BudgetError,
    cluster,
    eig_dense_general,
    krylov_extremal,
    power_iteration,
)
from app.engine.susy import (
    ground_energy,
    representative_states,
    supercharge,
    zero_energy_states,
)

logger = logging.getLogger(__name__)


class WeightError(ValueError):
    """Raised for vertex weights that cannot serve the requested computation."""
    pass


@dataclass(frozen=True)
class VertexWeights:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise WeightError(f"Weight {name} is not finite: {value}")
            object.__setattr__(self, name, value)

    @classmethod
    def from_string(cls, text: str) -> "VertexWeights":
        """'a,b,c,d' as given, or 'a,b,c' with d solved from the constraint."""
        try:
            values = [float(part) for part in text.split(",")]
        except ValueError:
            raise WeightError(f"Weights must be comma-separated numbers, got {text!r}")
        if len(values) == 3:
            return solve_d(*values)
        if len(values) == 4:
            return cls(*values)
        raise WeightError(f"Expected 3 or 4 weights, got {len(values)}")

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    @property
    def zeta(self) -> float:
        if self.a == 0.0 or self.b == 0.0:
            raise WeightError("ζ = cd/ab is undefined for a = 0 or b = 0")
        return self.c * self.d / (self.a * self.b)

    @property
    def six_vertex(self) -> bool:
        return self.d == 0.0

    @property
    def scale(self) -> float:
        return abs(self.a) + abs(self.b) + abs(self.c) + abs(self.d)

    @property
    def constraint_residual(self) -> float:
        """|(a²+ab)(b²+ab) - (c²+ab)(d²+ab)| relative to the larger side."""
        ab = self.a * self.b
        lhs = (self.a ** 2 + ab) * (self.b ** 2 + ab)
        rhs = (self.c ** 2 + ab) * (self.d ** 2 + ab)
        return abs(lhs - rhs) / max(abs(lhs), abs(rhs), np.finfo(float).tiny)

    def check_nonzero(self) -> None:
        zero = [name for name, value in zip("abcd", self.as_tuple()) if value == 0.0]
        if zero:
            raise WeightError(f"Weights must be non-zero, got {', '.join(zero)} = 0")

    def require_susy(self) -> float:
        """ζ, rejecting the six-vertex point where the supercharges are undefined."""
        zeta = self.zeta
        if zeta == 0.0:
            raise WeightError("This computation needs ζ = cd/ab ≠ 0 (six-vertex point)")
        return zeta


def solve_d(a: float, b: float, c: float) -> VertexWeights:
    """Positive root d of (a²+ab)(b²+ab) = (c²+ab)(d²+ab)."""
    if a == 0 or b == 0 or c == 0:
        raise WeightError(f"a, b, c must be non-zero, got ({a}, {b}, {c})")
    ab = a * b
    denominator = c * c + ab
    if denominator == 0:
        raise WeightError("Division by zero: c² + ab = 0")
    radicand = (a * a + ab) * (b * b + ab) / denominator - ab
    if not radicand > 0:
        raise WeightError(f"No real positive d for (a, b, c) = ({a}, {b}, {c}): radicand {radicand:.6g} ≤ 0")
    return VertexWeights(a, b, c, math.sqrt(radicand))


def sample_unconstrained_weights(rng: np.random.Generator, count: int, min_violation: float = 1e-3) -> List[VertexWeights]:
    """Log-uniform quadruples in [0.25, 4] that violate the constraint by at least ``min_violation``."""
    found: List[VertexWeights] = []
    while len(found) < count:
        w = VertexWeights(*np.exp(rng.uniform(math.log(0.25), math.log(4.0), size=4)))
        if w.constraint_residual > min_violation:
            found.append(w)
    return found


# --- R-matrix and transfer matrix ---

def r_array(w: VertexWeights) -> np.ndarray:
    a, b, c, d = w.as_tuple()
    return np.array([
        [a, 0, 0, d],
        [0, b, c, 0],
        [0, c, b, 0],
        [d, 0, 0, a],
    ], dtype=np.float64)


def r_tensor(w: VertexWeights) -> np.ndarray:
    """R[out_aux, out_site, in_aux, in_site]."""
    return r_array(w).reshape(2, 2, 2, 2)


def r_matrix(w: VertexWeights) -> LinearMap:
    # R is invariant under exchanging its two factors, so the code order of a
    # two-site chain gives the same matrix as the display order.
    return LinearMap.dense(r_array(w), 2, 2, label="R")


def transfer_apply(w: VertexWeights, length: int, x: np.ndarray, reverse: bool = False) -> np.ndarray:
    """
    T x without forming T. The auxiliary index pair (current, initial) is kept
    as two leading axes; each site is absorbed by one 4×4 contraction and the
    trace closes the loop. ``reverse`` sweeps L..1, which yields Tᵗ.
    """
    x = np.asarray(x, dtype=np.complex128)
    dim = dimension(length)
    if x.shape[0] != dim:
        raise WeightError(f"Input of size {x.shape[0]} is not a state on L={length}")
    single = x.ndim == 1
    block = x.reshape(dim, -1)
    # C-order reshape: the first site axis carries the most significant bit (site L)
    sites = block.reshape((2,) * length + (block.shape[1],))
    work = np.zeros((2, 2) + sites.shape, dtype=np.complex128)
    work[0, 0] = sites
    work[1, 1] = sites

    r4 = r_array(w)
    order = range(length, 0, -1) if reverse else range(1, length + 1)
    for site in order:
        axis = 2 + (length - site)
        moved = np.moveaxis(work, axis, 1)
        shape = moved.shape
        moved = (r4 @ moved.reshape(4, -1)).reshape(shape)
        work = np.moveaxis(moved, 1, axis)

    out = (work[0, 0] + work[1, 1]).reshape(dim, -1)
    return out[:, 0] if single else out


def transfer_matrix_dense(w: VertexWeights, length: int) -> np.ndarray:
    """
    T as a dense array, built from the monodromy blocks
    G_j[α'', α0] = Σ_α' M_j[α'', α'] ⊗ G_(j-1)[α', α0]  with M[α', α][s', s] = R[α', s', α, s].
    """
    limit = max(settings.DENSE_LIMIT, settings.DENSE_GENERAL_LIMIT)
    if length > limit:
        raise BudgetError(f"Dense transfer matrix budget is L ≤ {limit}, got {length}")
    dimension(length)
    tensor = r_tensor(w)
    blocks = [[tensor[p, :, q, :] for q in range(2)] for p in range(2)]
    total = np.zeros((1 << length, 1 << length), dtype=np.float64)
    for start in range(2):
        column = [np.ones((1, 1)) if p == start else np.zeros((1, 1)) for p in range(2)]
        for site in range(1, length + 1):
            wanted = (start,) if site == length else (0, 1)
            updated = [None, None]
            for p in wanted:
                updated[p] = np.kron(blocks[p][0], column[0]) + np.kron(blocks[p][1], column[1])
            column = updated
        total += column[start]
    return total.astype(np.complex128)


def transfer_matrix(w: VertexWeights, length: int, kind: Optional[str] = None) -> LinearMap:
    """Dense for L within the dense budget unless ``kind`` says otherwise; matrix-free beyond."""
    if kind is None:
        kind = "dense" if length <= settings.DENSE_LIMIT else "matrix-free"
    if kind == "dense":
        return LinearMap.dense(transfer_matrix_dense(w, length), length, length, label="T")
    if kind != "matrix-free":
        raise WeightError(f"Unknown transfer matrix kind {kind!r}")

    def matvec(x: np.ndarray) -> np.ndarray:
        return transfer_apply(w, length, x)

    def rmatvec(y: np.ndarray) -> np.ndarray:
        return np.conj(transfer_apply(w, length, np.conj(y), reverse=True))

    return LinearMap.matrix_free(matvec, length, length, rmatvec=rmatvec, label="T")


# --- A-operator and the local identity ---

def a_operator(w: VertexWeights) -> LinearMap:
    """A|↑> = d(-(c/a)|↑↓> + |↓↑>),  A|↓> = c(|↑↑> - (d/b)|↓↓>); first output factor is V_0."""
    a, b, c, d = w.as_tuple()
    if a == 0 or b == 0:
        raise WeightError("A-operator needs a, b ≠ 0")
    # two-site codes: |↑↓> = 2, |↓↑> = 1
    return LinearMap.sparse([2, 1, 0, 3], [0, 0, 1, 1], [-d * c / a, d, c, -c * d / b], 1, 2, label="A")


def a_tensor(w: VertexWeights) -> np.ndarray:
    """A[out_aux, out_site, in_aux]."""
    dense = a_operator(w).to_dense().real
    # row code = out_aux + 2*out_site, so C-order reshape yields [out_site, out_aux, in]
    return dense.reshape(2, 2, 2).transpose(1, 0, 2)


def _q_tensor(zeta: float) -> np.ndarray:
    # q[out_site1, out_site2, in]
    q = np.zeros((2, 2, 2))
    q[0, 0, 1] = 1.0
    q[1, 1, 1] = -zeta
    return q


def local_identity_residual(w: VertexWeights) -> float:
    """
    max|R_02 R_01 q_1 + (a+b) q_1 R_01 - A_0^2 R_01 - R_02 A_0^1| relative to
    the largest entry among the four terms, on V_0 ⊗ V^1 -> V_0 ⊗ V^2.
    Output indices: x = aux, y = site 1, z = site 2; inputs: i = aux, j = site.
    """
    r = r_tensor(w)
    a_op = a_tensor(w)
    q = _q_tensor(w.zeta)
    t1 = np.einsum("xzaw,ayiv,vwj->xyzij", r, r, q)
    t2 = (w.a + w.b) * np.einsum("xmij,yzm->xyzij", r, q)
    t3 = np.einsum("xzc,cyij->xyzij", a_op, r)
    t4 = np.einsum("xzcj,cyi->xyzij", r, a_op)
    size = max(1.0, *(float(np.max(np.abs(t))) for t in (t1, t2, t3, t4)))
    return float(np.max(np.abs(t1 + t2 - t3 - t4)) / size)


@dataclass
class LocalIdentityReport:
    weights: VertexWeights
    residual: float
    converse_residual: float
    constraint_residual: float


def check_local_identity(w: VertexWeights) -> LocalIdentityReport:
    """Residual at ``w`` and at d perturbed by +1% (off the constraint surface)."""
    perturbed = VertexWeights(w.a, w.b, w.c, w.d * 1.01 if w.d else 0.01 * abs(w.c))
    return LocalIdentityReport(
        weights=w,
        residual=local_identity_residual(w),
        converse_residual=local_identity_residual(perturbed),
        constraint_residual=w.constraint_residual,
    )


def check_tq_anticommutation(w: VertexWeights, length: int, rng: np.random.Generator, samples: int = 3) -> float:
    """max ||(T_(L+1) Q + (a+b) Q T_L)ψ|| / (||ψ|| (1+|ζ|) scale^(L+1)) over random ψ ∈ V^L."""
    zeta = w.require_susy()
    q = supercharge(length, zeta)
    normaliser = (1.0 + abs(zeta)) * w.scale ** (length + 1)
    worst = 0.0
    for _ in range(samples):
        psi = StateVector.random(length, rng).amplitudes
        lhs = transfer_apply(w, length + 1, q.apply_array(psi))
        rhs = (w.a + w.b) * q.apply_array(transfer_apply(w, length, psi))
        worst = max(worst, float(np.linalg.norm(lhs + rhs) / (np.linalg.norm(psi) * normaliser)))
    return worst


def symmetry_residuals(w: VertexWeights, length: int, rng: np.random.Generator) -> Dict[str, float]:
    """[T,S], [T,P], [T,R] and [T,Tᵗ] on a random state, relative to scale^L ||ψ||."""
    psi = StateVector.random(length, rng).amplitudes
    norm = np.linalg.norm(psi) * w.scale ** length

    def t(x):
        return transfer_apply(w, length, x)

    signs = parity_signs(length)
    tp = transfer_apply(w, length, t(psi), reverse=True)
    pt = t(transfer_apply(w, length, psi, reverse=True))
    return {
        "[T,S]": float(np.linalg.norm(t(translate_array(psi, length)) - translate_array(t(psi), length)) / norm),
        "[T,P]": float(np.linalg.norm(t(signs * psi) - signs * t(psi)) / norm),
        "[T,R]": float(np.linalg.norm(t(psi[::-1]) - t(psi)[::-1]) / norm),
        "[T,Tt]": float(np.linalg.norm(tp - pt) / (norm * w.scale ** length)),
    }


# --- Stroganov eigenvalue ---

@dataclass
class StroganovReport:
    length: int
    theta: float
    method: str
    multiplicity: int
    distance: float
    separation: float
    eigen_residual: float
    translation_residual: float
    hamiltonian_residual: float
    cross_residuals: Dict[str, float] = field(default_factory=dict)
    susy_skipped: bool = False

    def summary(self) -> dict:
        return {
            "L": self.length,
            "theta": self.theta,
            "method": self.method,
            "multiplicity": self.multiplicity,
            "distance": self.distance,
            "separation": self.separation,
            "eigen_residual": self.eigen_residual,
            "translation_residual": self.translation_residual,
            "hamiltonian_residual": self.hamiltonian_residual,
            "cross_residuals": dict(self.cross_residuals),
            "susy_skipped": self.susy_skipped,
        }


def _sector_leading_pairs(w: VertexWeights, length: int) -> Tuple[np.ndarray, np.ndarray]:
    t = transfer_matrix(w, length, kind="matrix-free")
    values, vectors = [], []
    for sign in (1, -1):
        result = krylov_extremal(t, dimension(length), 2, symmetric=False, which="largest",
                                 project=parity_projector(length, sign))
        values.append(result.eigenvalues)
        vectors.append(result.eigenvectors)
    return np.concatenate(values), np.hstack(vectors)


def stroganov_check(w: VertexWeights, n: int, dense_limit: Optional[int] = None) -> StroganovReport:
    """
    Locates Θ = (a+b)^(2n+1) in the spectrum of T: cluster multiplicity, separation from
    the rest of the spectrum, translation invariance and the XYZ energy of the
    eigenspace, and (for ζ ≠ 0) agreement with the supersymmetric zero-energy pair.
    """
    if n < 1:
        raise WeightError(f"n must be ≥ 1, got {n}")
    dense_limit = settings.DENSE_GENERAL_LIMIT if dense_limit is None else dense_limit
    length = 2 * n + 1
    theta = (w.a + w.b) ** length
    if theta == 0:
        raise WeightError("Θ vanishes for a + b = 0; use the limit check")
    zeta = w.zeta

    if length <= dense_limit:
        spectrum = eig_dense_general(transfer_matrix_dense(w, length), dense_limit=dense_limit)
        values, vectors, method = spectrum.eigenvalues, spectrum.eigenvectors, spectrum.method.value
    else:
        if min(w.as_tuple()) <= 0:
            raise BudgetError(f"L={length} is beyond the dense budget; the sector Krylov path needs positive weights")
        values, vectors = _sector_leading_pairs(w, length)
        method = "krylov-extremal"

    radius = settings.CLUSTER_RTOL * abs(theta) + 1e-12 * float(np.max(np.abs(values)))
    groups = cluster(values, radius)
    target = min(groups, key=lambda c: abs(c.value - theta))
    others = np.delete(values, list(target.members))
    separation = float(np.min(np.abs(others - target.value)) / radius) if others.size else float("inf")

    basis = sla.orth(vectors[:, list(target.members)])
    t_basis = transfer_apply(w, length, basis)
    eigen_residual = float(np.max(np.linalg.norm(t_basis - theta * basis, axis=0)) / abs(theta))
    translation_residual = float(np.max(np.linalg.norm(translate_array(basis, length) - basis, axis=0)))
    e0 = ground_energy(length, zeta)
    xyz = xyz_hamiltonian(length, *supersymmetric_couplings(zeta))
    hamiltonian_residual = float(np.max(np.linalg.norm(xyz.apply_array(basis) - e0 * basis, axis=0)) / abs(e0))

    report = StroganovReport(
        length=length, theta=theta, method=method, multiplicity=target.multiplicity,
        distance=abs(target.value - theta) / abs(theta), separation=separation,
        eigen_residual=eigen_residual, translation_residual=translation_residual,
        hamiltonian_residual=hamiltonian_residual,
    )
    if zeta == 0.0:
        report.susy_skipped = True
        return report

    pair = zero_energy_states(length, zeta)
    for name, state in (("psi", pair.psi.amplitudes), ("psi_bar", pair.psi_bar.amplitudes)):
        report.cross_residuals[f"T {name}"] = float(
            np.linalg.norm(transfer_apply(w, length, state) - theta * state) / (abs(theta) * np.linalg.norm(state)))
        report.cross_residuals[f"{name} outside eigenspace"] = float(
            np.linalg.norm(state - basis @ (basis.conj().T @ state)) / np.linalg.norm(state))
    return report


@dataclass
class LimitReport:
    length: int
    eps: float
    weights: Dict[str, VertexWeights]
    distances: Dict[str, float]
    multiplicities: Dict[str, int]


def stroganov_limit_check(a: float, c: float, n: int, eps: float = 1e-3) -> LimitReport:
    """
    Near a + b = 0: with b = -a ± eps (d solved), the eigenvalue of T nearest
    (a+b)^L must track it. Distances are relative to the spectral radius.
    """
    length = 2 * n + 1
    weights, distances, multiplicities = {}, {}, {}
    for label, sign in (("+eps", 1.0), ("-eps", -1.0)):
        w = solve_d(a, -a + sign * eps, c)
        theta = (w.a + w.b) ** length
        values = eig_dense_general(transfer_matrix_dense(w, length), with_vectors=False).eigenvalues
        spread = float(np.max(np.abs(values)))
        nearest = float(np.min(np.abs(values - theta)))
        tol = settings.CLUSTER_RTOL * abs(theta) + 1e-12 * spread
        weights[label] = w
        distances[label] = nearest / spread
        multiplicities[label] = int(np.sum(np.abs(values - theta) <= max(tol, nearest)))
    return LimitReport(length=length, eps=eps, weights=weights, distances=distances, multiplicities=multiplicities)


@dataclass
class ThetaReport:
    n: int
    expected: float
    value: float
    rayleigh: Optional[float] = None

    @property
    def relative_error(self) -> float:
        return abs(self.value - self.expected) / abs(self.expected)


def theta_matrix_element(w: VertexWeights, n: int, with_rayleigh: bool = True,
                         dense_limit: Optional[int] = None) -> ThetaReport:
    """<Φ̄n(1/ζ)|T|↑…↑> and, optionally, the Rayleigh quotient of T on Ψ̄n."""
    if w.a + w.b == 0:
        raise WeightError("a + b = 0 is reachable only as a limit")
    zeta = w.require_susy()
    length = 2 * n + 1
    reps = representative_states(n, 1.0 / zeta)
    image = transfer_apply(w, length, StateVector.all_up(length).amplitudes)
    value = complex(np.vdot(reps.phi_bar.amplitudes, image))
    report = ThetaReport(n=n, expected=(w.a + w.b) ** length, value=value.real)

    dense_limit = settings.DENSE_LIMIT if dense_limit is None else dense_limit
    if with_rayleigh and length <= dense_limit:
        psi_bar = zero_energy_states(length, zeta).psi_bar.amplitudes
        quotient = np.vdot(psi_bar, transfer_apply(w, length, psi_bar)) / np.vdot(psi_bar, psi_bar)
        report.rayleigh = float(quotient.real)
    return report


# --- Word sum ---

@dataclass(frozen=True)
class WordWeight:
    word: str
    weight: float


@dataclass(frozen=True)
class WordDecomposition:
    form: str  # "alpha", "delta" or "constant"
    positions: Tuple[int, ...]


def enumerate_words(a: float, b: float, length: int) -> Iterator[WordWeight]:
    values = {"a": a, "b": b}
    for letters in itertools.product("ab", repeat=length):
        yield WordWeight("".join(letters), float(np.prod([values[x] for x in letters])))


def decompose_word(word: str) -> WordDecomposition:
    """
    Positions 1 ≤ x1 < … < x2m ≤ L where the letter changes, read cyclically
    (x1 = 1 when the first and last letters differ). The word is of alpha form
    when the run starting at x1 is made of a, of delta form otherwise.
    """
    if not word or set(word) - {"a", "b"}:
        raise WeightError(f"Words are non-empty strings over 'ab', got {word!r}")
    length = len(word)
    changes = [j for j in range(2, length + 1) if word[j - 1] != word[j - 2]]
    if word[0] != word[-1]:
        changes.insert(0, 1)
    if not changes:
        return WordDecomposition("constant", ())
    return WordDecomposition("alpha" if word[changes[0] - 1] == "a" else "delta", tuple(changes))


def position_weight(a: float, b: float, length: int, positions: Tuple[int, ...], form: str) -> float:
    """α(x1..x2m) = a^(x2-x1) b^(x3-x2) … a^(x2m-x2m-1) b^(L-(x2m-x1)); δ exchanges a and b."""
    first, second = (a, b) if form == "alpha" else (b, a)
    gaps = np.diff(positions)
    p = int(gaps[0::2].sum())
    q = int(gaps[1::2].sum()) + length - (positions[-1] - positions[0])
    return first ** p * second ** q


@dataclass
class WordSumReport:
    n: int
    a: float
    b: float
    literal: float
    brute_force: float
    expected: float

    @property
    def relative_error(self) -> float:
        scale = (abs(self.a) + abs(self.b)) ** (2 * self.n + 1)
        return max(abs(self.literal - self.expected), abs(self.brute_force - self.expected)) / scale


def word_sum(a: float, b: float, n: int) -> WordSumReport:
    """
    a^L + b^L + Σ_m Σ_{x1<…<x2m} (α + δ) over all position tuples, next to the
    plain sum of word weights, both against (a+b)^L.
    """
    if n < 1:
        raise WeightError(f"n must be ≥ 1, got {n}")
    length = 2 * n + 1
    total = a ** length + b ** length
    for m in range(1, n + 1):
        positions = np.array(list(itertools.combinations(range(1, length + 1), 2 * m)), dtype=np.int64)
        gaps = np.diff(positions, axis=1)
        p = gaps[:, 0::2].sum(axis=1)
        q = gaps[:, 1::2].sum(axis=1) + length - (positions[:, -1] - positions[:, 0])
        pf, qf = p.astype(np.float64), q.astype(np.float64)
        total += float(np.sum(np.power(a, pf) * np.power(b, qf) + np.power(b, pf) * np.power(a, qf)))

    # every word as a bit pattern: bit set = letter b
    count_b = down_counts(length).astype(np.float64)
    brute = float(np.sum(np.power(a, length - count_b) * np.power(b, count_b)))
    return WordSumReport(n=n, a=a, b=b, literal=total, brute_force=brute, expected=(a + b) ** length)


# --- Perron-Frobenius sectors ---

@dataclass
class SectorResult:
    sign: int
    value: float
    relative_error: float
    min_component: float
    iterations: int


@dataclass
class LargestEigenvalueReport:
    length: int
    theta: float
    sectors: List[SectorResult]
    free_energy_residual: float

    def summary(self) -> dict:
        return {
            "L": self.length,
            "theta": self.theta,
            "sectors": [vars(s) for s in self.sectors],
            "free_energy_residual": self.free_energy_residual,
        }


def largest_eigenvalue_check(w: VertexWeights, n: int, tol: Optional[float] = None,
                             max_iter: Optional[int] = None) -> LargestEigenvalueReport:
    """
    Power iteration of T inside each parity sector from the uniform state. For
    positive weights both sector-leading eigenvalues equal (a+b)^L and carry
    eigenvectors with positive components; the free energy per site follows.
    """
    if min(w.as_tuple()) <= 0:
        raise WeightError(f"Largest-eigenvalue check needs positive weights, got {w.as_tuple()}")
    tol = settings.DEFAULT_TOLERANCES["power_iteration"] if tol is None else tol
    length = 2 * n + 1
    theta = (w.a + w.b) ** length
    t = transfer_matrix(w, length, kind="matrix-free")
    uniform = np.ones(dimension(length), dtype=np.complex128)
    sectors = []
    for sign in (1, -1):
        result = power_iteration(t, uniform, max_iter=max_iter, tol=tol, project=parity_projector(length, sign))
        value = float(result.eigenvalues[0].real)
        support = parity_signs(length) == sign
        components = result.eigenvectors[support, 0]
        sectors.append(SectorResult(
            sign=sign, value=value, relative_error=abs(value - theta) / abs(theta),
            min_component=float(np.min(components.real) / np.max(np.abs(components))),
            iterations=result.iterations,
        ))
    leading = max(s.value for s in sectors)
    free_energy_residual = abs(math.log(leading) / length - math.log(w.a + w.b))
    logger.info("sector power iteration done", extra={"fields": {"L": length, "leading": leading}})
    return LargestEigenvalueReport(length=length, theta=theta, sectors=sectors, free_energy_residual=free_energy_residual)
