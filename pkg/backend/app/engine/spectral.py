"""
Eigen-solvers for the verification engine.

Dense Hermitian / general solvers serve small chains, a Lanczos iteration with
full reorthogonalisation and ARPACK's restarted Arnoldi serve matrix-free
operators, and power iteration covers Perron-Frobenius sectors. Degeneracies
are detected by single-linkage clustering of the computed eigenvalues.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Union

import networkx as nx
import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigs

from app.core.config import settings
from app.engine.hilbert import LinearMap, rng_for

logger = logging.getLogger(__name__)

Operator = Union[LinearMap, np.ndarray, Callable[[np.ndarray], np.ndarray]]


class SpectralError(ValueError):
    """Raised for malformed solver input (non-Hermitian, non-square, ...)."""
    pass


class BudgetError(SpectralError):
    """Raised when a dense solver is asked for a dimension over its budget."""
    pass


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver exhausts its iteration or restart cap."""

    def __init__(self, message: str, partial: Optional["SpectrumResult"] = None):
        super().__init__(message)
        self.partial = partial


class SpectrumMethod(str, Enum):
    DENSE_HERMITIAN = "dense-hermitian"
    DENSE_GENERAL = "dense-general"
    KRYLOV_EXTREMAL = "krylov-extremal"
    POWER_ITERATION = "power-iteration"


@dataclass(frozen=True)
class Cluster:
    value: complex
    multiplicity: int
    radius: float = 0.0
    members: tuple = ()


@dataclass(eq=False)
class SpectrumResult:
    eigenvalues: np.ndarray
    clusters: List[Cluster]
    method: SpectrumMethod
    residual_bound: float
    eigenvectors: Optional[np.ndarray] = None
    converged: bool = True
    breakdown: bool = False
    iterations: int = 0

    def nearest_cluster(self, value: complex) -> Optional[Cluster]:
        if not self.clusters:
            return None
        return min(self.clusters, key=lambda c: abs(c.value - value))

    def summary(self) -> dict:
        return {
            "method": self.method.value,
            "count": int(self.eigenvalues.size),
            "residual_bound": float(self.residual_bound),
            "clusters": [
                {"re": float(c.value.real), "im": float(c.value.imag), "multiplicity": c.multiplicity}
                for c in self.clusters
            ],
        }


# --- Helpers ---

def _as_dense(op: Operator) -> np.ndarray:
    if isinstance(op, LinearMap):
        return op.to_dense()
    matrix = np.asarray(op, dtype=np.complex128)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise SpectralError(f"Expected a square matrix, got shape {matrix.shape}")
    return matrix


def _as_apply(op: Operator) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(op, LinearMap):
        return op.apply_array
    if isinstance(op, np.ndarray):
        return lambda x: op @ x
    return op


def _real_ranks(reals: np.ndarray, tol: float) -> np.ndarray:
    # Rank of each value among runs of real parts, descending; gaps <= tol share a rank.
    order = np.argsort(-reals, kind="stable")
    ranks = np.zeros(reals.size, dtype=np.int64)
    rank = 0
    for prev, cur in zip(order[:-1], order[1:]):
        if reals[prev] - reals[cur] > tol:
            rank += 1
        ranks[cur] = rank
    return ranks


def _sort_desc(values: np.ndarray, tol: Optional[float] = None) -> np.ndarray:
    """Real part descending, then imaginary part descending among equal real parts."""
    values = np.asarray(values, dtype=np.complex128)
    if tol is None:
        tol = _default_cluster_tol(values)
    return np.lexsort((-values.real, -values.imag, _real_ranks(values.real, tol)))


def _check_budget(dim: int, limit_log2: int, solver: str) -> None:
    if dim > (1 << limit_log2):
        raise BudgetError(f"{solver} budget is 2^{limit_log2}, got dimension {dim}")


def cluster(values: Sequence[complex], tol: float) -> List[Cluster]:
    """
    Single-linkage clustering on the complex plane. Two values are linked when
    they lie within ``tol`` of each other and clusters are the connected
    components of that graph. Linking is transitive: a chain 1, 1+2e-8, 1+4e-8 at
    tol 3e-8 is one cluster of multiplicity 3 even though its ends are 4e-8
    apart, so a cluster radius may exceed ``tol``. Clusters are ordered by real
    part (centres within ``tol`` count as equal), then imaginary part, descending.
    """
    if tol <= 0:
        raise SpectralError(f"Cluster radius must be positive, got {tol}")
    vals = np.asarray(values, dtype=np.complex128).ravel()
    if vals.size == 0:
        return []

    graph = nx.Graph()
    graph.add_nodes_from(range(vals.size))
    by_real = np.argsort(vals.real, kind="stable")
    for pos, i in enumerate(by_real):
        for j in by_real[pos + 1:]:
            if vals[j].real - vals[i].real > tol:
                break
            if abs(vals[j] - vals[i]) <= tol:
                graph.add_edge(int(i), int(j))

    clusters = []
    for component in nx.connected_components(graph):
        members = tuple(sorted(component))
        centre = complex(vals[list(members)].mean())
        radius = float(np.max(np.abs(vals[list(members)] - centre)))
        clusters.append(Cluster(value=centre, multiplicity=len(members), radius=radius, members=members))
    centres = np.array([c.value for c in clusters], dtype=np.complex128)
    ranks = _real_ranks(centres.real, tol)
    order = sorted(range(len(clusters)), key=lambda k: (ranks[k], -centres[k].imag, clusters[k].members))
    return [clusters[k] for k in order]


def _default_cluster_tol(values: np.ndarray) -> float:
    scale = float(np.max(np.abs(values))) if values.size else 1.0
    return settings.CLUSTER_RTOL * max(1.0, scale)


def _residuals(apply: Callable[[np.ndarray], np.ndarray], vectors: np.ndarray, values: np.ndarray) -> np.ndarray:
    if vectors.size == 0:
        return np.zeros(0)
    image = apply(vectors)
    norms = np.linalg.norm(vectors, axis=0)
    return np.linalg.norm(image - vectors * values[None, :], axis=0) / np.where(norms > 0, norms, 1.0)


# --- Dense solvers ---

def eig_dense_hermitian(op: Operator, project: Optional[LinearMap] = None, tol: Optional[float] = None,
                        dense_limit: Optional[int] = None) -> SpectrumResult:
    """
    Full spectrum of a Hermitian operator. With ``project`` the operator is
    restricted to the range of that orthogonal projector first, and returned
    eigenvectors live in the full space.
    """
    tol = settings.DEFAULT_TOLERANCES["hermitian"] if tol is None else tol
    matrix = _as_dense(op)
    _check_budget(matrix.shape[0], settings.DENSE_LIMIT if dense_limit is None else dense_limit, "Dense Hermitian")

    scale = max(1.0, float(np.max(np.abs(matrix))) if matrix.size else 1.0)
    asymmetry = float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0
    if asymmetry > tol * scale:
        raise SpectralError(f"Operator is not Hermitian: max|A - A†| = {asymmetry:.3e}")

    basis = None
    reduced = matrix
    if project is not None:
        proj = _as_dense(project)
        weights, vectors = sla.eigh((proj + proj.conj().T) / 2)
        basis = vectors[:, weights > 0.5]
        reduced = basis.conj().T @ matrix @ basis
    reduced = (reduced + reduced.conj().T) / 2

    values, vectors = sla.eigh(reduced)
    if basis is not None:
        vectors = basis @ vectors
    order = np.argsort(-values, kind="stable")
    values, vectors = values[order].astype(np.complex128), vectors[:, order]

    residual = float(np.max(_residuals(lambda x: matrix @ x, vectors, values), initial=0.0))
    return SpectrumResult(
        eigenvalues=values,
        clusters=cluster(values, _default_cluster_tol(values)),
        method=SpectrumMethod.DENSE_HERMITIAN,
        residual_bound=residual,
        eigenvectors=vectors,
    )


def eig_dense_general(op: Operator, dense_limit: Optional[int] = None, with_vectors: bool = True) -> SpectrumResult:
    """Full complex spectrum via LAPACK (Hessenberg reduction + shifted QR)."""
    matrix = _as_dense(op)
    _check_budget(matrix.shape[0], settings.DENSE_GENERAL_LIMIT if dense_limit is None else dense_limit, "Dense general")
    try:
        if with_vectors:
            values, vectors = sla.eig(matrix)
        else:
            values, vectors = sla.eigvals(matrix), None
    except sla.LinAlgError as e:
        raise ConvergenceError(f"QR iteration did not converge: {e}")

    order = _sort_desc(values)
    values = values[order]
    residual = float("nan")
    if vectors is not None:
        vectors = vectors[:, order]
        residual = float(np.max(_residuals(lambda x: matrix @ x, vectors, values), initial=0.0))
    return SpectrumResult(
        eigenvalues=values,
        clusters=cluster(values, _default_cluster_tol(values)),
        method=SpectrumMethod.DENSE_GENERAL,
        residual_bound=residual,
        eigenvectors=vectors,
    )


# --- Krylov solvers ---

def _lanczos(apply, v0: np.ndarray, steps: int, anorm: float):
    dim = v0.shape[0]
    basis = np.zeros((dim, steps + 1), dtype=np.complex128)
    alpha = np.zeros(steps)
    beta = np.zeros(steps)
    basis[:, 0] = v0 / np.linalg.norm(v0)
    done, breakdown = steps, False
    for j in range(steps):
        w = apply(basis[:, j])
        alpha[j] = np.vdot(basis[:, j], w).real
        w = w - alpha[j] * basis[:, j]
        if j > 0:
            w = w - beta[j - 1] * basis[:, j - 1]
        # full reorthogonalisation, applied twice
        for _ in range(2):
            w = w - basis[:, :j + 1] @ (basis[:, :j + 1].conj().T @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] <= 1e-12 * max(anorm, abs(alpha[j]), np.finfo(float).tiny):
            done, breakdown = j + 1, True
            break
        basis[:, j + 1] = w / beta[j]

    theta, s = sla.eigh_tridiagonal(alpha[:done], beta[:done - 1])
    ritz_residuals = np.zeros(done) if breakdown else np.abs(beta[done - 1] * s[-1, :])
    return theta, basis[:, :done] @ s, ritz_residuals, breakdown, done


def krylov_extremal(apply: Operator, dim: int, k: int, symmetric: bool, which: str = "largest",
                    seed: Optional[int] = None, project: Optional[Operator] = None, tol: float = 1e-10,
                    subspace: Optional[int] = None, max_restarts: Optional[int] = None) -> SpectrumResult:
    """
    k extremal eigenpairs of a matrix-free operator.

    ``which`` is "largest" or "smallest" (by real part). Symmetric operators use
    Lanczos with full reorthogonalisation and explicit restarts; others use
    ARPACK's implicitly restarted Arnoldi. ``project`` confines the iteration
    to the range of a projector commuting with the operator.
    """
    if which not in ("largest", "smallest"):
        raise SpectralError(f"which must be 'largest' or 'smallest', got {which!r}")
    if not 1 <= k < dim:
        raise SpectralError(f"Need 1 ≤ k < dim, got k={k}, dim={dim}")

    base_apply = _as_apply(apply)
    if project is not None:
        proj_apply = _as_apply(project)
        op = lambda x: proj_apply(base_apply(proj_apply(x)))
    else:
        proj_apply = None
        op = base_apply

    rng = rng_for(settings.DEFAULT_SEED if seed is None else seed, "krylov", dim, k)
    v0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    if proj_apply is not None:
        v0 = proj_apply(v0)

    if symmetric:
        return _lanczos_extremal(op, v0, k, which, tol,
                                 subspace or settings.KRYLOV_SUBSPACE,
                                 max_restarts or settings.KRYLOV_RESTART_CAP)
    return _arnoldi_extremal(op, v0, dim, k, which, tol, max_restarts or settings.KRYLOV_RESTART_CAP)


def _lanczos_extremal(op, v0, k, which, tol, subspace, max_restarts) -> SpectrumResult:
    dim = v0.shape[0]
    steps = min(dim, max(subspace, 2 * k + 10))
    anorm = 0.0
    converged = False
    breakdown = False
    restarts = 0
    for restarts in range(1, max_restarts + 1):
        theta, ritz, ritz_res, breakdown, done = _lanczos(op, v0, steps, anorm)
        anorm = max(anorm, float(np.max(np.abs(theta))))
        order = np.argsort(theta)
        wanted = order[:k] if which == "smallest" else order[::-1][:k]
        if breakdown or np.all(ritz_res[wanted] <= tol * max(anorm, 1.0)):
            converged = True
            break
        v0 = ritz[:, wanted].sum(axis=1)
    values = theta[wanted].astype(np.complex128)
    vectors = ritz[:, wanted]
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    residual = float(np.max(_residuals(op, vectors, values), initial=0.0))
    order = _sort_desc(values)
    result = SpectrumResult(
        eigenvalues=values[order],
        clusters=cluster(values, _default_cluster_tol(values)),
        method=SpectrumMethod.KRYLOV_EXTREMAL,
        residual_bound=residual,
        eigenvectors=vectors[:, order],
        converged=converged,
        breakdown=breakdown and values.size < k,
        iterations=restarts,
    )
    if breakdown:
        logger.info("lanczos hit an invariant subspace", extra={"fields": {"dim": dim, "krylov_dim": int(done)}})
    if not converged:
        logger.warning("lanczos restart cap reached", extra={"fields": {"dim": dim, "residual": residual}})
        raise ConvergenceError(f"Lanczos did not converge after {max_restarts} restarts (residual {residual:.3e})", result)
    return result


def _arnoldi_extremal(op, v0, dim, k, which, tol, max_restarts) -> SpectrumResult:
    linear_op = LinearOperator((dim, dim), matvec=op, dtype=np.complex128)
    code = "LR" if which == "largest" else "SR"
    try:
        values, vectors = eigs(linear_op, k=k, which=code, v0=v0, tol=tol, maxiter=max_restarts * dim)
    except ArpackNoConvergence as e:
        partial = SpectrumResult(
            eigenvalues=np.asarray(e.eigenvalues, dtype=np.complex128),
            clusters=cluster(e.eigenvalues, _default_cluster_tol(np.asarray(e.eigenvalues))) if len(e.eigenvalues) else [],
            method=SpectrumMethod.KRYLOV_EXTREMAL,
            residual_bound=float("inf"),
            eigenvectors=e.eigenvectors,
            converged=False,
        )
        raise ConvergenceError(f"Arnoldi did not converge: {e}", partial)
    except ArpackError as e:
        raise ConvergenceError(f"Arnoldi failed: {e}")
    order = _sort_desc(values)
    values, vectors = values[order], vectors[:, order]
    residual = float(np.max(_residuals(op, vectors, values), initial=0.0))
    return SpectrumResult(
        eigenvalues=values,
        clusters=cluster(values, _default_cluster_tol(values)),
        method=SpectrumMethod.KRYLOV_EXTREMAL,
        residual_bound=residual,
        eigenvectors=vectors,
    )


def power_iteration(apply: Operator, v0: np.ndarray, max_iter: Optional[int] = None, tol: float = 1e-10,
                    project: Optional[Operator] = None) -> SpectrumResult:
    """
    Dominant eigenpair by repeated application. Stops once the residual
    ||Av - ρv|| falls below tol·|ρ| (ρ the Rayleigh quotient). The eigenvector
    is phase-fixed so its largest component is real positive.
    """
    max_iter = settings.POWER_ITERATION_CAP if max_iter is None else max_iter
    base_apply = _as_apply(apply)
    proj_apply = _as_apply(project) if project is not None else None

    v = np.asarray(v0, dtype=np.complex128)
    if proj_apply is not None:
        v = proj_apply(v)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise SpectralError("Start vector vanishes (after projection)")
    v = v / norm

    rho, residual, converged = 0.0 + 0.0j, float("inf"), False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        w = base_apply(v)
        if proj_apply is not None:
            w = proj_apply(w)
        rho = complex(np.vdot(v, w))
        residual = float(np.linalg.norm(w - rho * v))
        if residual <= tol * abs(rho):
            converged = True
            break
        norm = np.linalg.norm(w)
        if norm == 0.0:
            raise ConvergenceError("Iterate collapsed to zero")
        v = w / norm

    pivot = v[np.argmax(np.abs(v))]
    v = v * (abs(pivot) / pivot)
    values = np.array([rho])
    result = SpectrumResult(
        eigenvalues=values,
        clusters=cluster(values, _default_cluster_tol(values)),
        method=SpectrumMethod.POWER_ITERATION,
        residual_bound=residual,
        eigenvectors=v[:, None],
        converged=converged,
        iterations=iteration,
    )
    if not converged:
        logger.warning("power iteration did not converge", extra={"fields": {"iterations": iteration, "residual": residual}})
        raise ConvergenceError(f"Power iteration did not converge in {max_iter} steps (residual {residual:.3e})", result)
    return result
