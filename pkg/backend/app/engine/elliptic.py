"""
Jacobi theta functions and the elliptic parametrisation of the eight-vertex
weights.

``jacobi_theta`` takes the nome q directly. The weight map is written in terms
of a nome p and evaluates every theta function at q = p², so callers pass p.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from app.core.config import settings
from app.engine.hilbert import (
    StateVector,
    dimension,
    supersymmetric_couplings,
    translation_map,
    xyz_hamiltonian,
)
from app.engine.vertex import (
    VertexWeights,
    WeightError,
    r_array,
    solve_d,
    transfer_apply,
    transfer_matrix_dense,
)

logger = logging.getLogger(__name__)

SUSY_ETA = math.pi / 3
MAX_SERIES_TERMS = 100_000


class EllipticError(ValueError):
    """Raised for invalid elliptic parameters (nome outside [0, 1), a(0) = 0, ...)."""
    pass


def jacobi_theta(kind: int, u: float, q: float) -> float:
    """
    ϑ1(u,q) = 2 Σ_{n≥0} (-1)^n q^((n+½)²) sin((2n+1)u),  ϑ2 the same with cos and no sign,
    ϑ3(u,q) = 1 + 2 Σ_{n≥1} q^(n²) cos(2nu),  ϑ4 the same with (-1)^n.

    Summation stops once the term envelope q^((n+½)²) (resp. q^(n²)) drops below
    1e-16·(|partial sum| + 1); the envelope is used because sin/cos may vanish.
    """
    if kind not in (1, 2, 3, 4):
        raise EllipticError(f"Theta kind must be 1..4, got {kind}")
    if not 0.0 <= q < 1.0:
        raise EllipticError(f"Nome must lie in [0, 1), got {q}")
    u, q = float(u), float(q)

    if kind in (1, 2):
        total, n = 0.0, 0
        while True:
            envelope = q ** ((n + 0.5) ** 2)
            if n > 0 and envelope < 1e-16 * (abs(total) + 1.0):
                break
            if kind == 1:
                total += (-1) ** n * envelope * math.sin((2 * n + 1) * u)
            else:
                total += envelope * math.cos((2 * n + 1) * u)
            n += 1
            if n > MAX_SERIES_TERMS:
                raise EllipticError(f"Theta series did not settle for q={q}")
        return 2.0 * total

    total, n = 0.0, 1
    sign = -1.0 if kind == 4 else 1.0
    while True:
        envelope = q ** (n * n)
        if envelope < 1e-16 * (abs(total) + 1.0):
            break
        total += sign ** n * envelope * math.cos(2 * n * u)
        n += 1
        if n > MAX_SERIES_TERMS:
            raise EllipticError(f"Theta series did not settle for q={q}")
    return 1.0 + 2.0 * total


@dataclass(frozen=True)
class EllipticParams:
    eta: float
    nome: float
    u: float
    rho: float = 1.0

    def __post_init__(self):
        for name in ("eta", "nome", "u", "rho"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise EllipticError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if not 0.0 <= self.nome < 1.0:
            raise EllipticError(f"Nome must lie in [0, 1), got {self.nome}")

    def at(self, u: float) -> "EllipticParams":
        return EllipticParams(eta=self.eta, nome=self.nome, u=u, rho=self.rho)


def weights_from_elliptic(params: EllipticParams, strict: bool = True,
                          allow_trigonometric: bool = False) -> VertexWeights:
    """
    a = ρ ϑ4(2η) ϑ1(u+2η) ϑ4(u),  b = ρ ϑ4(2η) ϑ4(u+2η) ϑ1(u),
    c = ρ ϑ1(2η) ϑ4(u+2η) ϑ4(u),  d = ρ ϑ1(2η) ϑ1(u+2η) ϑ1(u),  all at nome p².

    Nome 0 is the six-vertex limit; with ``allow_trigonometric`` it returns
    ρ(sin(u+2η), sin u, sin 2η, 0). ``strict`` rejects vanishing weights.
    """
    eta, u, rho = params.eta, params.u, params.rho
    if params.nome == 0.0:
        if not allow_trigonometric:
            raise EllipticError("Nome 0 collapses the elliptic weights; request the trigonometric limit explicitly")
        weights = VertexWeights(rho * math.sin(u + 2 * eta), rho * math.sin(u), rho * math.sin(2 * eta), 0.0)
        values = weights.as_tuple()[:3]
    else:
        q = params.nome ** 2
        t1_eta, t4_eta = jacobi_theta(1, 2 * eta, q), jacobi_theta(4, 2 * eta, q)
        t1_sum, t4_sum = jacobi_theta(1, u + 2 * eta, q), jacobi_theta(4, u + 2 * eta, q)
        t1_u, t4_u = jacobi_theta(1, u, q), jacobi_theta(4, u, q)
        weights = VertexWeights(
            rho * t4_eta * t1_sum * t4_u,
            rho * t4_eta * t4_sum * t1_u,
            rho * t1_eta * t4_sum * t4_u,
            rho * t1_eta * t1_sum * t1_u,
        )
        values = weights.as_tuple()

    if strict:
        largest = max(abs(v) for v in values)
        for name, value in zip("abcd", values):
            if abs(value) <= 1e-14 * max(largest, np.finfo(float).tiny):
                raise WeightError(f"Weight {name} vanishes at u={u} (lattice zero)")
    return weights


# --- Derivatives at u = 0 ---

def _central(f, h: float):
    return (f(h) - f(-h)) / (2 * h)


def richardson_derivative(f, h: float = 1e-4):
    """One Richardson step on central differences with steps h and h/2."""
    coarse = _central(f, h)
    fine = _central(f, h / 2)
    return (4 * fine - coarse) / 3


def weight_derivatives(eta: float, nome: float, rho: float = 1.0, h: float = 1e-4) -> np.ndarray:
    """(a'(0), b'(0), c'(0), d'(0)) by finite differences."""
    base = EllipticParams(eta=eta, nome=nome, u=0.0, rho=rho)

    def weights_at(u: float) -> np.ndarray:
        return np.array(weights_from_elliptic(base.at(u), strict=False, allow_trigonometric=True).as_tuple())

    return richardson_derivative(weights_at, h)


def couplings_from_derivatives(derivatives: np.ndarray) -> Tuple[float, float, float]:
    """Jx = 1 + d'/b',  Jy = 1 - d'/b',  Jz = (a' - c')/b'."""
    da, db, dc, dd = (float(x) for x in derivatives)
    if db == 0:
        raise EllipticError("b'(0) vanishes; couplings undefined")
    return 1.0 + dd / db, 1.0 - dd / db, (da - dc) / db


def zeta_theta(eta: float, nome: float) -> float:
    """(ϑ1(2η, p²) / ϑ4(2η, p²))²."""
    q = nome ** 2
    return (jacobi_theta(1, 2 * eta, q) / jacobi_theta(4, 2 * eta, q)) ** 2


def jz_theta(eta: float, nome: float) -> float:
    """ϑ2(2η)ϑ3(2η)ϑ4(0)² / (ϑ2(0)ϑ3(0)ϑ4(2η)²) at nome p²; cos 2η at p = 0."""
    if nome == 0.0:
        return math.cos(2 * eta)
    q = nome ** 2
    num = jacobi_theta(2, 2 * eta, q) * jacobi_theta(3, 2 * eta, q) * jacobi_theta(4, 0.0, q) ** 2
    den = jacobi_theta(2, 0.0, q) * jacobi_theta(3, 0.0, q) * jacobi_theta(4, 2 * eta, q) ** 2
    return num / den


@dataclass
class ConsistencyReport:
    params: EllipticParams
    weights: VertexWeights
    zeta: float
    jz: float
    zeta_residual: float
    jz_residual: float
    susy_jz_residual: float
    constraint_residual: float
    zeta_vanishes: bool

    def summary(self) -> dict:
        return {
            "weights": list(self.weights.as_tuple()),
            "zeta": self.zeta,
            "jz": self.jz,
            "zeta_residual": self.zeta_residual,
            "jz_residual": self.jz_residual,
            "susy_jz_residual": self.susy_jz_residual,
            "constraint_residual": self.constraint_residual,
            "zeta_vanishes": self.zeta_vanishes,
        }


def zeta_and_jz_consistency(params: EllipticParams) -> ConsistencyReport:
    """
    Theta expressions for ζ and Jz against cd/ab and (a²+b²-c²-d²)/2ab, plus
    the distance of Jz from (ζ²-1)/2, which vanishes on the η = π/3 manifold.
    """
    weights = weights_from_elliptic(params, strict=params.nome > 0, allow_trigonometric=True)
    a, b, c, d = weights.as_tuple()
    zeta = zeta_theta(params.eta, params.nome)
    jz = jz_theta(params.eta, params.nome)
    zeta_w = c * d / (a * b)
    jz_w = (a * a + b * b - c * c - d * d) / (2 * a * b)
    return ConsistencyReport(
        params=params,
        weights=weights,
        zeta=zeta,
        jz=jz,
        zeta_residual=abs(zeta - zeta_w) / max(abs(zeta), np.finfo(float).tiny) if zeta else abs(zeta_w),
        jz_residual=abs(jz - jz_w) / max(1.0, abs(jz)),
        susy_jz_residual=abs(jz_w - (zeta_w * zeta_w - 1.0) / 2.0),
        constraint_residual=weights.constraint_residual,
        zeta_vanishes=zeta == 0.0,
    )


# --- Yang-Baxter and the commuting family ---

def yang_baxter_residual(eta: float, nome: float, u: float, v: float, rho: float = 1.0) -> float:
    """
    ||R12(u-v) R13(u) R23(v) - R23(v) R13(u) R12(u-v)||_2 over the product of the
    three R norms, on the three-site space (site 1 leftmost).
    """
    base = EllipticParams(eta=eta, nome=nome, u=u, rho=rho)

    def r_at(x: float) -> np.ndarray:
        return r_array(weights_from_elliptic(base.at(x), strict=False, allow_trigonometric=True))

    eye = np.eye(2)
    swap = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.float64)
    p23 = np.kron(eye, swap)
    r_uv, r_u, r_v = r_at(u - v), r_at(u), r_at(v)
    r12 = np.kron(r_uv, eye)
    r13 = p23 @ np.kron(r_u, eye) @ p23
    r23 = np.kron(eye, r_v)
    lhs = r12 @ r13 @ r23
    rhs = r23 @ r13 @ r12
    scale = np.linalg.norm(r_uv, 2) * np.linalg.norm(r_u, 2) * np.linalg.norm(r_v, 2)
    return float(np.linalg.norm(lhs - rhs, 2) / max(scale, np.finfo(float).tiny))


def commuting_transfer_residual(eta: float, nome: float, u: float, v: float, length: int,
                                rng: np.random.Generator, rho: float = 1.0) -> float:
    """||[T(u), T(v)]ψ|| relative to ||ψ|| scale(u)^L scale(v)^L, for a random ψ."""
    base = EllipticParams(eta=eta, nome=nome, u=u, rho=rho)
    wu = weights_from_elliptic(base, allow_trigonometric=True)
    wv = weights_from_elliptic(base.at(v), allow_trigonometric=True)
    psi = StateVector.random(length, rng).amplitudes
    uv = transfer_apply(wu, length, transfer_apply(wv, length, psi))
    vu = transfer_apply(wv, length, transfer_apply(wu, length, psi))
    normaliser = np.linalg.norm(psi) * (wu.scale * wv.scale) ** length
    return float(np.linalg.norm(uv - vu) / normaliser)


# --- T(u) near u = 0 ---

@dataclass
class TuZeroReport:
    length: int
    a0: float
    shift_residual: float
    log_derivative_residual: float
    couplings: Tuple[float, float, float]
    susy_coupling_residual: float

    def summary(self) -> dict:
        return {
            "L": self.length,
            "a0": self.a0,
            "shift_residual": self.shift_residual,
            "log_derivative_residual": self.log_derivative_residual,
            "couplings": list(self.couplings),
            "susy_coupling_residual": self.susy_coupling_residual,
        }


def tu_zero_checks(eta: float, nome: float, length: int, rho: float = 1.0, h: float = 1e-4) -> TuZeroReport:
    """
    T(0) = a(0)^L S and T(0)⁻¹T'(0) = L(a'(0)+c'(0))/(2a(0)) - (b'(0)/a(0)) H_XYZ,
    with H_XYZ built from the couplings read off the weight derivatives. T'(0)
    is a Richardson-extrapolated central difference of dense transfer matrices.
    """
    base = EllipticParams(eta=eta, nome=nome, u=0.0, rho=rho)
    w0 = weights_from_elliptic(base, strict=False, allow_trigonometric=True)
    a0 = w0.a
    if a0 == 0.0:
        raise EllipticError(f"a(0) vanishes for η={eta}, p={nome}")
    shift = translation_map(length).to_dense()
    t0 = transfer_matrix_dense(w0, length)
    shift_residual = float(np.max(np.abs(t0 - a0 ** length * shift)) / abs(a0) ** length)

    def t_at(u: float) -> np.ndarray:
        return transfer_matrix_dense(weights_from_elliptic(base.at(u), strict=False, allow_trigonometric=True), length)

    t_prime = richardson_derivative(t_at, h)
    derivatives = weight_derivatives(eta, nome, rho, h)
    da, db, dc, _ = derivatives
    couplings = couplings_from_derivatives(derivatives)
    lhs = shift.conj().T @ t_prime / a0 ** length
    rhs = (length * (da + dc) / (2 * a0)) * np.eye(dimension(length)) - (db / a0) * xyz_hamiltonian(length, *couplings).to_dense()
    log_residual = float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), np.finfo(float).tiny))

    zeta = zeta_theta(eta, nome)
    susy_residual = float(np.max(np.abs(np.array(couplings) - np.array(supersymmetric_couplings(zeta)))))
    return TuZeroReport(length=length, a0=a0, shift_residual=shift_residual, log_derivative_residual=log_residual,
                        couplings=couplings, susy_coupling_residual=susy_residual)


# --- Weight samplers ---

def sample_constrained_weights(rng: np.random.Generator, count: int) -> List[VertexWeights]:
    """
    Alternates two independent sources: log-uniform (a, b, c) in [0.25, 4] with
    d solved (draws without a positive root are discarded), and the elliptic map
    at η = π/3 with p in [0.05, 0.6] and u in (0.1, π/3 - 0.1).
    """
    found: List[VertexWeights] = []
    while len(found) < count:
        if len(found) % 2 == 0:
            a, b, c = np.exp(rng.uniform(math.log(0.25), math.log(4.0), size=3))
            try:
                found.append(solve_d(a, b, c))
            except WeightError:
                continue
        else:
            params = EllipticParams(eta=SUSY_ETA, nome=rng.uniform(0.05, 0.6), u=rng.uniform(0.1, SUSY_ETA - 0.1))
            found.append(weights_from_elliptic(params))
    return found


def elliptic_weight_grid(eta: float, rng: np.random.Generator, count: int) -> List[Dict[str, float]]:
    """Random (p, u) pairs at fixed η, as parameter records."""
    return [{"eta": eta, "nome": float(rng.uniform(0.05, 0.6)), "u": float(rng.uniform(0.1, 0.9))}
            for _ in range(count)]
