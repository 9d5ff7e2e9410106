"""
Lattice supersymmetry of the XYZ chain along Jx = 1+ζ, Jy = 1-ζ, Jz = (ζ²-1)/2.

The local supercharge q maps one site to two:  q|↑> = 0,  q|↓> = |↑↑> - ζ|↓↓>.
q_j inserts it at site j of a chain of length L; q_0 = S q_L. The global
supercharge Q = sqrt(L/(L+1)) Σ_j (-1)^j q_j acts on the alternate-cyclic
sector W^L and vanishes on its complement.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
import scipy.linalg as sla

from app.core.config import settings
from app.engine.hilbert import (
    LinearMap,
    StateVector,
    alternate_cyclic_eigenvalue,
    alternate_cyclic_projector,
    basis_codes,
    dimension,
    down_counts,
    m_lambda_map,
    parity_array,
    parity_map,
    parity_projector,
    reversal_array,
    sigma_z_signs,
    supersymmetric_couplings,
    translate_array,
    translation_map,
    translation_projector,
    xyz_hamiltonian,
)
from app.engine.spectral import (
    cluster,
    eig_dense_hermitian,
    krylov_extremal,
)

logger = logging.getLogger(__name__)


class SusyError(ValueError):
    """Raised for invalid supersymmetry inputs (ζ = 0, short chains, ...)."""
    pass


class KernelDimensionError(RuntimeError):
    """The computed zero-energy space has the wrong dimension: an implementation fault."""

    def __init__(self, length: int, found: int, expected: int):
        super().__init__(f"dim ker H|W on L={length} is {found}, expected {expected}")
        self.length = length
        self.found = found
        self.expected = expected


def _check_zeta(zeta: float) -> float:
    zeta = float(zeta)
    if zeta == 0.0 or not math.isfinite(zeta):
        raise SusyError(f"ζ must be finite and non-zero (ζ = 0 is excluded), got {zeta}")
    return zeta


def ground_energy(length: int, zeta: float) -> float:
    """E0 = -L(3+ζ²)/4."""
    return -length * (3.0 + zeta * zeta) / 4.0


# --- Supercharges ---

def local_supercharge(zeta: float) -> LinearMap:
    zeta = _check_zeta(zeta)
    # columns: |↓> = code 1; rows: |↑↑> = 0, |↓↓> = 3
    return LinearMap.sparse([0, 3], [1, 1], [1.0, -zeta], 1, 2, label="q")


def insertion_operator(length: int, site: int, zeta: float) -> LinearMap:
    """q_site: V^L -> V^(L+1). Site L+1 of the image is the inserted neighbour of ``site``."""
    zeta = _check_zeta(zeta)
    if not 0 <= site <= length:
        raise SusyError(f"Insertion site must be in 0..{length}, got {site}")
    if site == 0:
        return translation_map(length + 1) @ insertion_operator(length, length, zeta)

    codes = basis_codes(length)
    c = codes[((codes >> (site - 1)) & 1) == 1]
    low = c & ((1 << (site - 1)) - 1)
    high = (c >> site) << (site + 1)
    base = low | high
    rows = np.concatenate([base, base | (3 << (site - 1))])
    cols = np.concatenate([c, c])
    vals = np.concatenate([np.ones(c.shape[0]), np.full(c.shape[0], -zeta)])
    return LinearMap.sparse(rows, cols, vals, length, length + 1, label=f"q_{site}")


def conjugated_first_insertion(length: int, zeta: float) -> LinearMap:
    """S^-1 q_1 S, which must coincide with q_0."""
    return translation_map(length + 1, power=-1) @ insertion_operator(length, 1, zeta) @ translation_map(length)


def alternating_sum(length: int, zeta: float) -> LinearMap:
    """sqrt(L/(L+1)) Σ_{j=0..L} (-1)^j q_j as a sparse map (no projector)."""
    total = insertion_operator(length, 0, zeta)
    for j in range(1, length + 1):
        term = insertion_operator(length, j, zeta)
        total = total - term if j % 2 else total + term
    return total * math.sqrt(length / (length + 1))


def supercharge(length: int, zeta: float) -> LinearMap:
    """Q(ζ): V^L -> V^(L+1), the alternating sum composed with P_W (applied lazily)."""
    if length < 1:
        raise SusyError(f"Supercharge needs L ≥ 1, got {length}")
    raw = alternating_sum(length, zeta)
    raw_adj = raw.adjoint()
    projector = alternate_cyclic_projector(length)

    def matvec(x: np.ndarray) -> np.ndarray:
        return raw.apply_array(projector.apply_array(x))

    def rmatvec(y: np.ndarray) -> np.ndarray:
        return projector.apply_array(raw_adj.apply_array(y))

    return LinearMap.matrix_free(matvec, length, length + 1, rmatvec=rmatvec, label=f"Q_{length}")


@dataclass(frozen=True, eq=False)
class SuperchargeSet:
    length: int
    zeta: float
    q_up: LinearMap
    q_down_adjoint: Optional[LinearMap]


def supercharge_set(length: int, zeta: float) -> SuperchargeSet:
    q_up = supercharge(length, zeta)
    q_down_adjoint = supercharge(length - 1, zeta).adjoint() if length >= 2 else None
    return SuperchargeSet(length=length, zeta=_check_zeta(zeta), q_up=q_up, q_down_adjoint=q_down_adjoint)


def susy_hamiltonian(length: int, zeta: float) -> LinearMap:
    """H = Q_L† Q_L + Q_(L-1) Q_(L-1)† on V^L."""
    if length < 2:
        raise SusyError(f"SUSY Hamiltonian needs L ≥ 2, got {length}")
    charges = supercharge_set(length, zeta)
    q_up, q_up_adj = charges.q_up, charges.q_up.adjoint()
    q_down_adj = charges.q_down_adjoint
    q_down = q_down_adj.adjoint()

    def matvec(x: np.ndarray) -> np.ndarray:
        return q_up_adj.apply_array(q_up.apply_array(x)) + q_down.apply_array(q_down_adj.apply_array(x))

    return LinearMap.matrix_free(matvec, length, length, rmatvec=matvec, label=f"H_{length}")


# --- Representative states ---

@dataclass(frozen=True, eq=False)
class RepresentativePair:
    n: int
    zeta: float
    phi: StateVector
    phi_bar: StateVector


def representative_states(n: int, zeta: float) -> RepresentativePair:
    """
    Φn(ζ) = Σ_{k odd} ζ^((k-1)/2) Σ|k down spins>,  Φ̄n(ζ) = Σ_{k even} ζ^(k/2) Σ|k down spins>
    on L = 2n+1 sites. Integer powers only, so any non-zero ζ is allowed.
    """
    if n < 1:
        raise SusyError(f"n must be ≥ 1, got {n}")
    zeta = _check_zeta(zeta)
    length = 2 * n + 1
    k = down_counts(length)
    odd = k % 2 == 1
    phi = np.where(odd, np.power(zeta, ((k - 1) // 2).astype(np.float64)), 0.0)
    phi_bar = np.where(~odd, np.power(zeta, (k // 2).astype(np.float64)), 0.0)
    return RepresentativePair(n=n, zeta=zeta, phi=StateVector(length, phi), phi_bar=StateVector(length, phi_bar))


def representative_states_literal(n: int, zeta: float) -> RepresentativePair:
    """ζ^-(n+1) M(√ζ) ½(1+P)Σ|s> and ζ^-(n+1/2) M(√ζ) ½(1-P)Σ|s>; needs ζ > 0."""
    if n < 1:
        raise SusyError(f"n must be ≥ 1, got {n}")
    zeta = _check_zeta(zeta)
    if zeta <= 0:
        raise SusyError(f"The √ζ construction needs ζ > 0, got {zeta}")
    length = 2 * n + 1
    uniform = np.ones(dimension(length), dtype=np.complex128)
    signed = parity_array(uniform, length)
    scale = m_lambda_map(length, math.sqrt(zeta))
    phi = scale.apply_array((uniform + signed) / 2) * zeta ** -(n + 1)
    phi_bar = scale.apply_array((uniform - signed) / 2) * zeta ** -(n + 0.5)
    return RepresentativePair(n=n, zeta=zeta, phi=StateVector(length, phi), phi_bar=StateVector(length, phi_bar))


@dataclass
class AnnihilationReport:
    n: int
    zeta: float
    residuals: Dict[str, float]

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())


def check_annihilation(n: int, zeta: float) -> AnnihilationReport:
    """Q(ζ) kills Φn(ζ), Φ̄n(ζ); Q†(ζ) kills Φn(1/ζ), Φ̄n(1/ζ). Residuals are relative to the state norms."""
    zeta = _check_zeta(zeta)
    length = 2 * n + 1
    reps, inverse = representative_states(n, zeta), representative_states(n, 1.0 / zeta)
    q_up = supercharge(length, zeta)
    q_down_adj = supercharge(length - 1, zeta).adjoint()

    def rel(op: LinearMap, state: StateVector) -> float:
        return op(state).norm() / state.norm()

    residuals = {
        "Q·Phi(zeta)": rel(q_up, reps.phi),
        "Q·PhiBar(zeta)": rel(q_up, reps.phi_bar),
        "Qdag·Phi(1/zeta)": rel(q_down_adj, inverse.phi),
        "Qdag·PhiBar(1/zeta)": rel(q_down_adj, inverse.phi_bar),
    }
    return AnnihilationReport(n=n, zeta=zeta, residuals=residuals)


# --- Zero-energy states ---

@dataclass(frozen=True)
class OverlapCoefficients:
    lam: complex
    lam_bar: complex
    mu: complex
    mu_bar: complex
    nu: complex


@dataclass(eq=False)
class KernelResult:
    length: int
    zeta: float
    dimension: int
    gap: float
    method: str
    lowest: np.ndarray
    vectors: Optional[np.ndarray] = None


@dataclass(eq=False)
class ZeroEnergyPair:
    n: int
    zeta: float
    psi: StateVector
    psi_bar: StateVector
    h_residual: float = 0.0
    coefficients: Optional[OverlapCoefficients] = None


def susy_kernel(length: int, zeta: float, dense_limit: Optional[int] = None,
                zero_tol: Optional[float] = None) -> KernelResult:
    """
    Kernel of H restricted to W^L. Dense diagonalisation of the projected
    operator up to the dense budget; beyond it, Lanczos runs in each parity
    sector of W^L looking for the bottom two eigenvalues.
    """
    zeta = _check_zeta(zeta)
    dense_limit = settings.DENSE_LIMIT if dense_limit is None else dense_limit
    zero_tol = settings.DEFAULT_TOLERANCES["kernel_zero"] if zero_tol is None else zero_tol
    hamiltonian = susy_hamiltonian(length, zeta)
    projector = alternate_cyclic_projector(length)

    if length <= dense_limit:
        spectrum = eig_dense_hermitian(hamiltonian, project=projector, dense_limit=dense_limit)
        values = spectrum.eigenvalues.real[::-1]
        vectors = spectrum.eigenvectors[:, ::-1]
        scale = max(1.0, float(np.max(np.abs(values)))) if values.size else 1.0
        zero = values < zero_tol * scale
        positive = values[~zero]
        return KernelResult(
            length=length, zeta=zeta, dimension=int(zero.sum()),
            gap=float(positive.min()) if positive.size else float("inf"),
            method=spectrum.method.value, lowest=values[:4], vectors=vectors[:, zero],
        )

    lowest, vectors = [], []
    for sign in (1, -1):
        sector = parity_projector(length, sign) @ projector
        result = krylov_extremal(hamiltonian, dimension(length), 2, symmetric=True, which="smallest",
                                 project=sector, tol=1e-12)
        lowest.extend(result.eigenvalues.real.tolist())
        vectors.append(result.eigenvectors)
    values = np.sort(np.asarray(lowest))
    scale = max(1.0, float(np.max(np.abs(values))))
    zero = values < zero_tol * scale
    stacked = np.hstack(vectors)
    order = np.argsort(np.asarray(lowest))
    return KernelResult(
        length=length, zeta=zeta, dimension=int(zero.sum()),
        gap=float(values[~zero].min()) if (~zero).any() else float("inf"),
        method="krylov-extremal", lowest=values, vectors=stacked[:, order][:, zero],
    )


def zero_energy_states(length: int, zeta: float, dense_limit: Optional[int] = None) -> Optional[ZeroEnergyPair]:
    """
    Zero-energy states of H in W^L: none for even L, a pair (ψ, ψ̄) for odd L.
    ψ has parity +1 and is phase-fixed so its largest component is real
    positive (all components are non-negative for ζ > 0); ψ̄ = Rψ.
    """
    kernel = susy_kernel(length, zeta, dense_limit=dense_limit)
    expected = 0 if length % 2 == 0 else 2
    if kernel.dimension != expected:
        raise KernelDimensionError(length, kernel.dimension, expected)
    if expected == 0:
        logger.info("no alternate-cyclic zero-energy states", extra={"fields": {"L": length, "gap": kernel.gap}})
        return None

    basis = kernel.vectors
    restricted = basis.conj().T @ parity_array(basis, length)
    signs, rotation = sla.eigh((restricted + restricted.conj().T) / 2)
    psi = basis @ rotation[:, np.argmax(signs)]
    pivot = psi[np.argmax(np.abs(psi))]
    psi = psi * (abs(pivot) / pivot)
    psi = psi / np.linalg.norm(psi)
    psi_bar = reversal_array(psi, length)

    hamiltonian = susy_hamiltonian(length, zeta)
    h_residual = max(np.linalg.norm(hamiltonian.apply_array(psi)), np.linalg.norm(hamiltonian.apply_array(psi_bar)))
    return ZeroEnergyPair(n=(length - 1) // 2, zeta=float(zeta), psi=StateVector(length, psi),
                          psi_bar=StateVector(length, psi_bar), h_residual=float(h_residual))


@dataclass
class OverlapReport:
    coefficients: OverlapCoefficients
    nu_ratio_residual: float
    vanishing: Dict[str, bool]
    decomposition_residuals: Dict[str, float]

    @property
    def falsified(self) -> bool:
        return any(self.vanishing.values())


def image_residual(matrix: np.ndarray, vector: np.ndarray) -> float:
    """||(1 - UU†)v|| with U an orthonormal basis of the range of ``matrix`` (SVD rank decision)."""
    basis = sla.orth(matrix, rcond=1e-10)
    remainder = vector - basis @ (basis.conj().T @ vector)
    return float(np.linalg.norm(remainder))


def overlap_coefficients(pair: ZeroEnergyPair, reps: RepresentativePair, reps_inverse: RepresentativePair,
                         floor: Optional[float] = None) -> OverlapReport:
    """
    λ = 4^-n <Φ(1/ζ)|Ψ>, λ̄ = 4^-n <Φ̄(1/ζ)|Ψ̄>, μ = 4^-n <Φ(ζ)|Ψ>, μ̄ = 4^-n <Φ̄(ζ)|Ψ̄>,
    ν = <Φ̄(1/ζ)|Ψ̄>, plus range tests of the decompositions
    Ψ - λΦ(ζ) ∈ im Q, Ψ̄ - λ̄Φ̄(ζ) ∈ im Q, Ψ - μΦ(1/ζ) ∈ im Q†, Ψ̄ - ν|↑…↑> ∈ im Q.
    """
    if not (pair.n == reps.n == reps_inverse.n):
        raise SusyError("Zero-energy pair and representatives belong to different n")
    if not math.isclose(reps.zeta * reps_inverse.zeta, 1.0, rel_tol=1e-12):
        raise SusyError("Representatives must be taken at ζ and 1/ζ")
    floor = settings.DEFAULT_TOLERANCES["coefficient_floor"] if floor is None else floor
    n, zeta, length = pair.n, pair.zeta, 2 * pair.n + 1
    weight = 4.0 ** -n

    coefficients = OverlapCoefficients(
        lam=weight * reps_inverse.phi.inner(pair.psi),
        lam_bar=weight * reps_inverse.phi_bar.inner(pair.psi_bar),
        mu=weight * reps.phi.inner(pair.psi),
        mu_bar=weight * reps.phi_bar.inner(pair.psi_bar),
        nu=reps_inverse.phi_bar.inner(pair.psi_bar),
    )
    threshold = floor * pair.psi.norm()
    vanishing = {name: abs(value) < threshold for name, value in vars(coefficients).items()}
    nu_ratio_residual = abs(coefficients.nu - 4.0 ** n * coefficients.lam_bar) / max(abs(coefficients.nu), np.finfo(float).tiny)

    q_in = supercharge(length - 1, zeta).to_dense()        # V^(2n) -> V^(2n+1)
    q_out_adj = supercharge(length, zeta).to_dense().conj().T  # V^(2n+2) -> V^(2n+1)
    all_up = StateVector.all_up(length).amplitudes
    psi, psi_bar = pair.psi.amplitudes, pair.psi_bar.amplitudes
    norm = pair.psi.norm()
    decomposition_residuals = {
        "psi-lam*phi in im Q": image_residual(q_in, psi - coefficients.lam * reps.phi.amplitudes) / norm,
        "psibar-lambar*phibar in im Q": image_residual(q_in, psi_bar - coefficients.lam_bar * reps.phi_bar.amplitudes) / norm,
        "psi-mu*phi(1/zeta) in im Qdag": image_residual(q_out_adj, psi - coefficients.mu * reps_inverse.phi.amplitudes) / norm,
        "psibar-nu*up in im Q": image_residual(q_in, psi_bar - coefficients.nu * all_up) / norm,
    }
    return OverlapReport(coefficients=coefficients, nu_ratio_residual=float(nu_ratio_residual),
                         vanishing=vanishing, decomposition_residuals=decomposition_residuals)


# --- Algebraic checks on random states ---

def _scale(zeta: float) -> float:
    return (1.0 + abs(zeta)) ** 2


def susy_algebra_residuals(length: int, zeta: float, rng: np.random.Generator, samples: int = 10) -> Dict[str, float]:
    """
    Worst relative residual over ``samples`` random states of: Q², ZQ+QZ with
    Z = σᶻ⊗…⊗σᶻ, P_(L+1)Q - QP_L with P = (-1)^L Z,
    H_(L+1)Q - QH_L, [H,S], [H,P], [H,R], H - H†, (H - (H_XYZ - E0))P_W,
    H on non-alternate-cyclic S-eigenspaces, q_0 vs S^-1 q_1 S.
    """
    zeta = _check_zeta(zeta)
    q = supercharge(length, zeta)
    q_next = supercharge(length + 1, zeta)
    h = susy_hamiltonian(length, zeta) if length >= 2 else None
    h_next = susy_hamiltonian(length + 1, zeta)
    parity, parity_next = parity_map(length), parity_map(length + 1)
    z, z_next = sigma_z_signs(length), sigma_z_signs(length + 1)
    projector = alternate_cyclic_projector(length)
    q0, q0_alt = insertion_operator(length, 0, zeta), conjugated_first_insertion(length, zeta)
    xyz = None
    if length >= 2:
        xyz = xyz_hamiltonian(length, *supersymmetric_couplings(zeta))
    e0 = ground_energy(length, zeta)
    off_sector = []
    if h is not None:
        target = alternate_cyclic_eigenvalue(length)
        for m in range(length):
            t = complex(np.exp(2j * np.pi * m / length))
            if abs(t - target) > 1e-9:
                off_sector.append(translation_projector(length, t))

    worst: Dict[str, float] = {}

    def record(name: str, value: float) -> None:
        worst[name] = max(worst.get(name, 0.0), float(value))

    scale = _scale(zeta)
    for _ in range(samples):
        x = rng.standard_normal(dimension(length)) + 1j * rng.standard_normal(dimension(length))
        nx_ = np.linalg.norm(x)
        qx = q.apply_array(x)
        record("Q^2", np.linalg.norm(q_next.apply_array(qx)) / (nx_ * scale))
        record("ZQ+QZ", np.linalg.norm(q.apply_array(z * x) + z_next * qx) / (nx_ * scale))
        record("PQ-QP", np.linalg.norm(parity_next.apply_array(qx) - q.apply_array(parity.apply_array(x))) / (nx_ * scale))
        record("q0 vs S^-1 q1 S", np.linalg.norm(q0.apply_array(x) - q0_alt.apply_array(x)) / (nx_ * (1 + abs(zeta))))
        if h is not None:
            hx = h.apply_array(x)
            record("HQ-QH", np.linalg.norm(h_next.apply_array(qx) - q.apply_array(hx)) / (nx_ * scale ** 2))
            record("[H,S]", np.linalg.norm(h.apply_array(translate_array(x, length)) - translate_array(hx, length)) / (nx_ * scale))
            record("[H,P]", np.linalg.norm(h.apply_array(parity.apply_array(x)) - parity.apply_array(hx)) / (nx_ * scale))
            record("[H,R]", np.linalg.norm(h.apply_array(reversal_array(x, length)) - reversal_array(hx, length)) / (nx_ * scale))
            y = rng.standard_normal(dimension(length)) + 1j * rng.standard_normal(dimension(length))
            record("H-Hdag", abs(np.vdot(y, hx) - np.vdot(h.apply_array(y), x)) / (nx_ * np.linalg.norm(y) * scale))
            px = projector.apply_array(x)
            record("H-(H_XYZ-E0) on W", np.linalg.norm(h.apply_array(px) - (xyz.apply_array(px) - e0 * px)) / (nx_ * scale))
            for sector in off_sector:
                record("H on other S-sectors", np.linalg.norm(h.apply_array(sector.apply_array(x))) / (nx_ * scale))
    return worst


def conjugation_residual(length: int, lam: complex, zeta: float, rng: np.random.Generator) -> float:
    """||M(λ)Q(λ^-2 ζ)ψ - Q(ζ)M(λ)ψ|| relative to ||Q(ζ)M(λ)ψ||."""
    zeta = _check_zeta(zeta)
    x = rng.standard_normal(dimension(length)) + 1j * rng.standard_normal(dimension(length))
    lhs = m_lambda_map(length + 1, lam).apply_array(supercharge(length, zeta / lam ** 2).apply_array(x))
    rhs = supercharge(length, zeta).apply_array(m_lambda_map(length, lam).apply_array(x))
    return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), np.finfo(float).tiny))


def m_i_relation_residual(length: int, zeta: float) -> float:
    """max|M(i) H_XYZ(ζ) M(i)† - H_XYZ(-ζ)| relative to max|H_XYZ(ζ)|."""
    m = m_lambda_map(length, 1j).to_dense()
    h = xyz_hamiltonian(length, *supersymmetric_couplings(zeta)).to_dense()
    h_flip = xyz_hamiltonian(length, *supersymmetric_couplings(-zeta)).to_dense()
    return float(np.max(np.abs(m @ h @ m.conj().T - h_flip)) / max(1.0, float(np.max(np.abs(h)))))


@dataclass
class GroundStateReport:
    length: int
    zeta: float
    expected: float
    minimum: float
    multiplicity: int
    relative_error: float
    method: str


def ground_state_check(length: int, zeta: float, dense_limit: Optional[int] = None) -> GroundStateReport:
    """
    Minimum of H_XYZ over the whole of V^L and its multiplicity. Dense up to the
    budget; beyond it, the bottom two eigenvalues of each parity sector from
    Lanczos (the two sectors hold one ground state each).
    """
    zeta = _check_zeta(zeta)
    dense_limit = settings.DENSE_LIMIT if dense_limit is None else dense_limit
    expected = ground_energy(length, zeta)
    hamiltonian = xyz_hamiltonian(length, *supersymmetric_couplings(zeta))
    if length <= dense_limit:
        values = sla.eigvalsh(hamiltonian.to_dense())
        method = "dense-hermitian"
    else:
        found = []
        for sign in (1, -1):
            result = krylov_extremal(hamiltonian, dimension(length), 2, symmetric=True, which="smallest",
                                     project=parity_projector(length, sign), tol=1e-12)
            found.extend(result.eigenvalues.real.tolist())
        values = np.sort(np.asarray(found))
        method = "krylov-extremal"
    groups = cluster(values, settings.CLUSTER_RTOL * max(1.0, abs(expected)))
    bottom = min(groups, key=lambda c: c.value.real)
    minimum = float(bottom.value.real)
    return GroundStateReport(length=length, zeta=zeta, expected=expected, minimum=minimum,
                             multiplicity=bottom.multiplicity,
                             relative_error=abs(minimum - expected) / abs(expected), method=method)
