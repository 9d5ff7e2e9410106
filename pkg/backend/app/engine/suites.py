"""
Suite evaluators. Each evaluator turns a Workload into named check tasks;
the report layer runs them and turns their outcomes into CheckRecords.
"""
import hashlib
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Protocol

import numpy as np

from app.core.canonicalize import canonicalize_json
from app.core.config import settings
from app.engine.builder import Workload
from app.engine.elliptic import (
    SUSY_ETA,
    EllipticParams,
    commuting_transfer_residual,
    elliptic_weight_grid,
    jacobi_theta,
    tu_zero_checks,
    weights_from_elliptic,
    yang_baxter_residual,
    zeta_and_jz_consistency,
    zeta_theta,
)
from app.engine.hilbert import StateVector, rng_for
from app.engine.susy import (
    check_annihilation,
    conjugation_residual,
    ground_state_check,
    m_i_relation_residual,
    overlap_coefficients,
    representative_states,
    representative_states_literal,
    susy_algebra_residuals,
    susy_kernel,
    zero_energy_states,
)
from app.engine.vertex import (
    StroganovReport,
    VertexWeights,
    check_local_identity,
    check_tq_anticommutation,
    decompose_word,
    enumerate_words,
    largest_eigenvalue_check,
    local_identity_residual,
    position_weight,
    sample_unconstrained_weights,
    stroganov_check,
    stroganov_limit_check,
    symmetry_residuals,
    theta_matrix_element,
    transfer_apply,
    transfer_matrix_dense,
    word_sum,
)

logger = logging.getLogger(__name__)

# Size caps for the suites whose cost grows fastest
NILPOTENCY_MAX_L = 10
TU_ZERO_MAX_L = 9
COMMUTING_MAX_L = 7
LIMIT_MAX_L = 7
AGREEMENT_MAX_L = 10
DECOMPOSITION_MAX_N = 3
MANIFOLD_SAMPLES = 100
YANG_BAXTER_SAMPLES = 50
WORD_SUM_SAMPLES = 20
CONJUGATION_LAMBDA = 1.3


@dataclass
class Outcome:
    residual: Optional[float]
    summary: Dict[str, Any] = field(default_factory=dict)
    # None: verdict is residual <= tolerance
    passed: Optional[bool] = None


@dataclass
class CheckTask:
    name: str
    suite: str
    inputs: Dict[str, Any]
    tolerance: Optional[float]
    compute: Callable[[], Outcome]

    @property
    def check_id(self) -> str:
        payload = {"name": self.name, "suite": self.suite, "inputs": self.inputs}
        return hashlib.sha256(canonicalize_json(payload).encode()).hexdigest()


class SuiteEvaluator(Protocol):
    suite_id: str

    def evaluate(self, workload: Workload) -> List[CheckTask]:
        ...


def weight_inputs(w: VertexWeights) -> Dict[str, Any]:
    return {"weights": list(w.as_tuple()), "zeta": w.zeta}


def _odd_lengths(workload: Workload) -> List[int]:
    return [length for length in workload.lengths if length % 2 == 1 and length >= 3]


def _all_below(values: Dict[str, float], tol: float) -> bool:
    return all(v <= tol for v in values.values())


def stroganov_passed(report: StroganovReport, tolerances: Dict[str, float]) -> bool:
    """Doubly degenerate, isolated, translation invariant, at the XYZ ground energy."""
    return (
        report.multiplicity == 2
        and report.distance <= tolerances["eigenvalue"]
        and report.separation > settings.SEPARATION_FACTOR
        and max(report.eigen_residual, report.translation_residual, report.hamiltonian_residual) <= tolerances["eigenvalue"]
        and _all_below(report.cross_residuals, tolerances["cross_residual"])
    )


class ConstraintEvaluator:
    suite_id = "constraint"

    def evaluate(self, workload: Workload) -> List[CheckTask]:
        tol = workload.tolerances["constraint"]
        tasks = []
        for i, w in enumerate(workload.weights):
            def compute(w=w) -> Outcome:
                return Outcome(residual=w.constraint_residual, summary={"zeta": w.zeta, "six_vertex": w.six_vertex})
            tasks.append(CheckTask(f"constraint/w{i:02d}", self.suite_id, weight_inputs(w), tol, compute))
        return tasks


class LocalIdentityEvaluator:
    suite_id = "local-identity"

    def evaluate(self, workload: Workload) -> List[CheckTask]:
        tol = workload.tolerances["local_identity"]
        converse_tol = workload.tolerances["local_identity_converse"]
        tasks = []
        for i, w in enumerate(workload.weights):
            def compute(w=w) -> Outcome:
                report = check_local_identity(w)
                return Outcome(
                    residual=report.residual,
                    summary={"converse_residual": report.converse_residual,
                             "converse_tolerance": converse_tol,
                             "constraint_residual": report.constraint_residual},
                    passed=report.residual <= tol and report.converse_residual > converse_tol,
                )
            tasks.append(CheckTask(f"local-identity/w{i:02d}", self.suite_id, weight_inputs(w), tol, compute))

        # Off the constraint surface the identity must break
        if not workload.weights_explicit:
            floor = workload.tolerances["local_identity_unconstrained"]
            name = "local-identity/unconstrained"

            def compute_off(name=name) -> Outcome:
                samples = sample_unconstrained_weights(rng_for(workload.seed, name), workload.samples)
                residuals = [local_identity_residual(w) for w in samples]
                return Outcome(residual=min(residuals),
                               summary={"samples": len(samples), "floor": floor},
                               passed=min(residuals) > floor)
            tasks.append(CheckTask(name, self.suite_id, {"samples": workload.samples, "seed": workload.seed},
                                   floor, compute_off))
        return tasks


class NilpotencyEvaluator:
    suite_id = "nilpotency"

    def evaluate(self, workload: Workload) -> List[CheckTask]:
        tol = workload.tolerances["nilpotency"]
        literal_tol = workload.tolerances["identity"]
        tasks = []
        for length in workload.lengths:
            if length > NILPOTENCY_MAX_L:
                continue
            for zeta in workload.zetas:
                base = f"nilpotency/L={length:02d}/zeta={zeta:g}"
                inputs = {"L": length, "zeta": zeta}

                def algebra(name=base, length=length, zeta=zeta) -> Outcome:
                    residuals = susy_algebra_residuals(length, zeta, rng_for(workload.seed, name))
                    return Outcome(residual=max(residuals.values()), summary={"residuals": residuals})
                tasks.append(CheckTask(base, self.suite_id, inputs, tol, algebra))

                def conjugation(name=f"{base}/conjugation", length=length, zeta=zeta) -> Outcome:
                    value = conjugation_residual(length, CONJUGATION_LAMBDA, zeta, rng_for(workload.seed, name))
                    return Outcome(residual=value, summary={"lambda": CONJUGATION_LAMBDA})
                tasks.append(CheckTask(f"{base}/conjugation", self.suite_id, inputs, tol, conjugation))

                if length >= 2:
                    def m_i(length=length, zeta=zeta) -> Outcome:
                        return Outcome(residual=m_i_relation_residual(length, zeta))
                    tasks.append(CheckTask(f"{base}/m-i", self.suite_id, inputs, literal_tol, m_i))

                if length % 2 == 1 and length >= 3:
                    n = (length - 1) // 2

                    def annihilation(n=n, zeta=zeta) -> Outcome:
                        report = check_annihilation(n, zeta)
                        return Outcome(residual=report.max_residual, summary={"residuals": report.residuals})
                    tasks.append(CheckTask(f"{base}/annihilation", self.suite_id, inputs, tol, annihilation))

                    if zeta > 0:
                        def literal(n=n, zeta=zeta) -> Outcome:
                            closed, built = representative_states(n, zeta), representative_states_literal(n, zeta)
                            residual = max(
                                (closed.phi - built.phi).norm() / closed.phi.norm(),
                                (closed.phi_bar - built.phi_bar).norm() / closed.phi_bar.norm(),
                            )
                            return Outcome(residual=residual)
                        tasks.append(CheckTask(f"{base}/representatives", self.suite_id, inputs, literal_tol, literal))
        return tasks


class TqAnticommutationEvaluator:
    suite_id = "tq-anticommutation"

    def evaluate(self, workload: Workload) -> List[CheckTask]:
        tol = workload.tolerances["tq"]
        tasks = []
        for i, w in enumerate(workload.weights):
            if w.six_vertex:
                continue
            for length in workload.lengths:
                if length < 2:
                    continue
                name = f"tq-anticommutation/L={length:02d}/w{i:02d}"

                def compute(name=name, w=w, length=length) -> Outcome:
                    return Outcome(residual=check_tq_anticommutation(w, length, rng_for(workload.seed, name)))
                tasks.append(CheckTask(name, self.suite_id, {"L": length, **weight_inputs(w)}, tol, compute))
        return tasks


class StroganovEvaluator:
    suite_id = "stroganov"

    def evaluate(self, workload: Workload) -> List[CheckTask]:
        t = workload.tolerances
        tasks = []
        for i, w in enumerate(workload.weights):
            for length in _odd_lengths(workload):
                n = (length - 1) // 2
                base = f"stroganov/L={length:02d}/w{i:02d}"
                inputs = {"L": length, **weight_inputs(w)}

                def eigenvalue(w=w, n=n) -> Outcome:
                    report = stroganov_check(w, n)
                    return Outcome(residual=report.distance, summary=report.summary(),
                                   passed=stroganov_passed(report, t))
                tasks.append(CheckTask(base, self.suite_id, inputs, t["eigenvalue"], eigenvalue))

                if not w.six_vertex and w.a + w.b != 0:
                    def matrix_element(w=w, n=n) -> Outcome:
                        report = theta_matrix_element(w, n, dense_limit=workload.dense_limit)
                        residual = report.relative_error
                        if report.rayleigh is not None:
                            residual = max(residual, abs(report.rayleigh - report.expected) / abs(report.expected))
                        return Outcome(residual=residual, summary={
                            "expected": report.expected, "value": report.value, "rayleigh": report.rayleigh})
                    tasks.append(CheckTask(f"{base}/matrix-element", self.suite_id, inputs, t["matrix_element"], matrix_element))

                def symmetries(name=f"{base}/symmetries", w=w, length=length) -> Outcome:
                    residuals = symmetry_residuals(w, length, rng_for(workload.seed, name))
                    return Outcome(residual=max(residuals.values()), summary={"residuals": residuals})
                tasks.append(CheckTask(f"{base}/symmetries", self.suite_id, inputs, t["symmetry"], symmetries))

                if length <= AGREEMENT_MAX_L:
                    def agreement(name=f"{base}/agreement", w=w, length=length) -> Outcome:
                        psi = StateVector.random(length, rng_for(workload.seed, name)).amplitudes
                        diff = transfer_matrix_dense(w, length) @ psi - transfer_apply(w, length, psi)
                        return Outcome(residual=float(np.linalg.norm(diff) / (np.linalg.norm(psi) * w.scale ** length)))
                    tasks.append(CheckTask(f"{base}/agreement", self.suite_id, inputs, t["identity"], agreement))

        # Continuity through a + b = 0
        for length in _odd_lengths(workload):
            if length > LIMIT_MAX_L:
                continue
            n = (length - 1) // 2

            def limit(n=n) -> Outcome:
                report = stroganov_limit_check(1.0, 2.0, n)
                return Outcome(residual=max(report.distances.values()), summary={
                    "eps": report.eps, "distances": report.distances, "multiplicities": report.multiplicities,
                    "weights": {k: list(v.as_tuple()) for k, v in report.weights.items()},
                })
            tasks.append(CheckTask(f"stroganov/L={length:02d}/limit", self.suite_id,
                                   {"L": length, "a": 1.0, "c": 2.0}, t["eigenvalue"], limit))
        return tasks


class GroundStateEvaluator:
    suite_id = "ground-state"

    def evaluate(self, workload: Workload) -> List[CheckTask]:
        tol = workload.tolerances["ground_state"]
        tasks = []
        for length in _odd_lengths(workload):
            for zeta in workload.zetas:
                name = f"ground-state/L={length:02d}/zeta={zeta:g}"

                def compute(length=length, zeta=zeta) -> Outcome:
                    report = ground_state_check(length, zeta, dense_limit=workload.dense_limit)
                    summary = {"expected": report.expected, "minimum": report.minimum,
                               "multiplicity": report.multiplicity, "method": report.method}
                    if zeta < 0:
                        summary["m_i_residual"] = m_i_relation_residual(length, zeta)
                    return Outcome(residual=report.relative_error, summary=summary,
                                   passed=report.relative_error <= tol and report.multiplicity == 2)
                tasks.append(CheckTask(name, self.suite_id, {"L": length, "zeta": zeta}, tol, compute))
        return tasks


class KernelLawEvaluator:
    suite_id = "kernel-law"

    def evaluate(self, workload: Workload) -> List[CheckTask]:
        zero_tol = workload.tolerances["kernel_zero"]
        image_tol = workload.tolerances["image_residual"]
        tasks = []
        for length in workload.lengths:
            if length < 2:
                continue
            expected = 0 if length % 2 == 0 else 2
            for zeta in workload.zetas:
                name = f"kernel-law/L={length:02d}/zeta={zeta:g}"
                inputs = {"L": length, "zeta": zeta}

                def compute(length=length, zeta=zeta, expected=expected) -> Outcome:
                    kernel = susy_kernel(length, zeta, dense_limit=workload.dense_limit, zero_tol=zero_tol)
                    return Outcome(residual=None, summary={
                        "dimension": kernel.dimension, "expected": expected, "gap": kernel.gap,
                        "lowest": kernel.lowest, "method": kernel.method,
                    }, passed=kernel.dimension == expected)
                tasks.append(CheckTask(name, self.suite_id, inputs, None, compute))

                if expected == 2 and length <= workload.dense_limit:
                    def overlaps(length=length, zeta=zeta) -> Outcome:
                        n = (length - 1) // 2
                        pair = zero_energy_states(length, zeta, dense_limit=workload.dense_limit)
                        report = overlap_coefficients(pair, representative_states(n, zeta),
                                                      representative_states(n, 1.0 / zeta))
                        residual = max(report.nu_ratio_residual, *report.decomposition_residuals.values())
                        return Outcome(residual=residual, summary={
                            "coefficients": vars(report.coefficients),
                            "vanishing": report.vanishing,
                            "decomposition_residuals": report.decomposition_residuals,
                            "h_residual": pair.h_residual,
                        }, passed=residual <= image_tol and not report.falsified)
                    tasks.append(CheckTask(f"{name}/overlaps", self.suite_id, inputs, image_tol, overlaps))
        return tasks


class EllipticEvaluator:
    suite_id = "elliptic"

    def evaluate(self, workload: Workload) -> List[CheckTask]:
        t = workload.tolerances
        params = workload.elliptic
        on_manifold = math.isclose(params.eta, SUSY_ETA, rel_tol=0.0, abs_tol=1e-12)
        point = {"eta": params.eta, "nome": params.nome, "u": params.u, "rho": params.rho}
        tasks = []

        def consistency() -> Outcome:
            report = zeta_and_jz_consistency(params)
            passed = report.zeta_residual <= t["theta_identity"] and report.jz_residual <= t["theta_identity"]
            if on_manifold:
                passed = passed and report.susy_jz_residual <= t["theta_identity"] \
                    and report.constraint_residual <= t["constraint"]
            return Outcome(residual=max(report.zeta_residual, report.jz_residual), summary=report.summary(), passed=passed)
        tasks.append(CheckTask("elliptic/consistency", self.suite_id, point, t["theta_identity"], consistency))

        for length in workload.lengths:
            if not 2 <= length <= TU_ZERO_MAX_L:
                continue

            def tu_zero(length=length) -> Outcome:
                report = tu_zero_checks(params.eta, params.nome, length, params.rho)
                passed = report.shift_residual <= t["tu_shift"] and report.log_derivative_residual <= t["tu_log_derivative"]
                if on_manifold:
                    passed = passed and report.susy_coupling_residual <= t["coupling"]
                return Outcome(residual=report.log_derivative_residual, summary=report.summary(), passed=passed)
            tasks.append(CheckTask(f"elliptic/L={length:02d}/tu-zero", self.suite_id, {"L": length, **point},
                                   t["tu_log_derivative"], tu_zero))

        for length in workload.lengths:
            if not 2 <= length <= COMMUTING_MAX_L:
                continue
            name = f"elliptic/L={length:02d}/commuting"

            def commuting(name=name, length=length) -> Outcome:
                value = commuting_transfer_residual(params.eta, params.nome, params.u, workload.v, length,
                                                    rng_for(workload.seed, name), params.rho)
                return Outcome(residual=value, summary={"v": workload.v})
            tasks.append(CheckTask(name, self.suite_id, {"L": length, "v": workload.v, **point}, t["commuting"], commuting))

        def manifold(name="elliptic/manifold") -> Outcome:
            grid = elliptic_weight_grid(SUSY_ETA, rng_for(workload.seed, name), MANIFOLD_SAMPLES)
            residuals = [weights_from_elliptic(EllipticParams(**g)).constraint_residual for g in grid]
            return Outcome(residual=max(residuals), summary={"samples": len(grid)})
        tasks.append(CheckTask("elliptic/manifold", self.suite_id, {"eta": SUSY_ETA, "samples": MANIFOLD_SAMPLES},
                               t["constraint"], manifold))

        # Away from η = π/3 the weights leave the constraint surface
        floor = 1e3 * t["constraint"]
        for eta in (math.pi / 4, 0.9):
            def off_manifold(name=f"elliptic/off-manifold/eta={eta:.4f}", eta=eta) -> Outcome:
                grid = elliptic_weight_grid(eta, rng_for(workload.seed, name), WORD_SUM_SAMPLES)
                residuals = [weights_from_elliptic(EllipticParams(**g)).constraint_residual for g in grid]
                return Outcome(residual=min(residuals), summary={"floor": floor}, passed=min(residuals) > floor)
            tasks.append(CheckTask(f"elliptic/off-manifold/eta={eta:.4f}", self.suite_id, {"eta": eta}, floor, off_manifold))

        def u_independence() -> Outcome:
            if params.nome == 0.0:
                return Outcome(residual=0.0, summary={"zeta": 0.0})
            expected = zeta_theta(params.eta, params.nome)
            residuals = []
            for u in (0.2, 0.45, 0.7):
                w = weights_from_elliptic(params.at(u), strict=False)
                residuals.append(abs(w.c * w.d / (w.a * w.b) - expected) / max(abs(expected), 1.0))
            return Outcome(residual=max(residuals), summary={"zeta": expected})
        tasks.append(CheckTask("elliptic/zeta-u-independence", self.suite_id, point, t["theta_identity"], u_independence))

        def theta_symmetries() -> Outcome:
            q = params.nome ** 2
            residuals = []
            for u in (0.3, 1.1, 2.4):
                residuals.append(abs(jacobi_theta(1, u + math.pi, q) + jacobi_theta(1, u, q)))
                residuals.append(abs(jacobi_theta(4, u + math.pi, q) - jacobi_theta(4, u, q)))
                residuals.append(abs(jacobi_theta(1, -u, q) + jacobi_theta(1, u, q)))
                residuals.append(abs(jacobi_theta(4, -u, q) - jacobi_theta(4, u, q)))
            return Outcome(residual=max(residuals))
        tasks.append(CheckTask("elliptic/theta-symmetries", self.suite_id, {"nome": params.nome},
                               t["theta_identity"], theta_symmetries))
        return tasks


class YangBaxterEvaluator:
    suite_id = "yang-baxter"

    def evaluate(self, workload: Workload) -> List[CheckTask]:
        tol = workload.tolerances["yang_baxter"]
        params = workload.elliptic
        inputs = {"eta": params.eta, "nome": params.nome, "u": params.u, "v": workload.v, "rho": params.rho}

        def configured() -> Outcome:
            return Outcome(residual=yang_baxter_residual(params.eta, params.nome, params.u, workload.v, params.rho))

        def sampled(name="yang-baxter/random") -> Outcome:
            rng = rng_for(workload.seed, name)
            residuals = []
            for _ in range(YANG_BAXTER_SAMPLES):
                eta, nome = rng.uniform(0.2, 1.3), rng.uniform(0.05, 0.6)
                u, v = rng.uniform(0.1, 0.9, size=2)
                residuals.append(yang_baxter_residual(eta, nome, u, v))
            return Outcome(residual=max(residuals), summary={"samples": YANG_BAXTER_SAMPLES})

        return [
            CheckTask("yang-baxter/configured", self.suite_id, inputs, tol, configured),
            CheckTask("yang-baxter/random", self.suite_id, {"samples": YANG_BAXTER_SAMPLES}, tol, sampled),
        ]


class WordSumEvaluator:
    suite_id = "word-sum"

    def evaluate(self, workload: Workload) -> List[CheckTask]:
        tol = workload.tolerances["word_sum"]
        n_max = workload.config.n_max
        count = max(workload.samples, WORD_SUM_SAMPLES)
        tasks = []
        for n in range(1, n_max + 1):
            name = f"word-sum/n={n:02d}/random"

            def random_pairs(name=name, n=n) -> Outcome:
                rng = rng_for(workload.seed, name)
                pairs = rng.uniform(-2.0, 2.0, size=(count, 2))
                errors = [word_sum(float(a), float(b), n).relative_error for a, b in pairs]
                return Outcome(residual=max(errors), summary={"pairs": count})
            tasks.append(CheckTask(name, self.suite_id, {"n": n, "pairs": count}, tol, random_pairs))

            if workload.weights_explicit:
                for i, w in enumerate(workload.weights):
                    def from_weights(w=w, n=n) -> Outcome:
                        report = word_sum(w.a, w.b, n)
                        return Outcome(residual=report.relative_error, summary={
                            "literal": report.literal, "brute_force": report.brute_force, "expected": report.expected})
                    tasks.append(CheckTask(f"word-sum/n={n:02d}/w{i:02d}", self.suite_id,
                                           {"n": n, "a": w.a, "b": w.b}, tol, from_weights))

        for n in range(1, min(n_max, DECOMPOSITION_MAX_N) + 1):
            name = f"word-sum/n={n:02d}/decomposition"

            def decomposition(name=name, n=n) -> Outcome:
                a, b = rng_for(workload.seed, name).uniform(0.5, 2.0, size=2)
                length = 2 * n + 1
                worst = 0.0
                for item in enumerate_words(a, b, length):
                    parts = decompose_word(item.word)
                    if parts.form == "constant":
                        value = (a if item.word[0] == "a" else b) ** length
                    else:
                        value = position_weight(a, b, length, parts.positions, parts.form)
                    worst = max(worst, abs(value - item.weight) / (abs(a) + abs(b)) ** length)
                return Outcome(residual=worst, summary={"words": 2 ** length})
            tasks.append(CheckTask(name, self.suite_id, {"n": n}, tol, decomposition))
        return tasks


class LargestEigenvalueEvaluator:
    suite_id = "largest-eigenvalue"

    def evaluate(self, workload: Workload) -> List[CheckTask]:
        t = workload.tolerances
        tasks = []
        for i, w in enumerate(workload.weights):
            if min(w.as_tuple()) <= 0:
                continue
            for length in _odd_lengths(workload):
                n = (length - 1) // 2

                def compute(w=w, n=n) -> Outcome:
                    report = largest_eigenvalue_check(w, n, tol=t["power_iteration"])
                    worst = max(s.relative_error for s in report.sectors)
                    passed = (
                        worst <= t["power_iteration"]
                        and all(s.min_component > 0 for s in report.sectors)
                        and report.free_energy_residual <= t["free_energy"]
                    )
                    return Outcome(residual=worst, summary=report.summary(), passed=passed)
                tasks.append(CheckTask(f"largest-eigenvalue/L={length:02d}/w{i:02d}", self.suite_id,
                                       {"L": length, **weight_inputs(w)}, t["power_iteration"], compute))
        return tasks


ACTIVE_SUITES: Dict[str, SuiteEvaluator] = {
    evaluator.suite_id: evaluator
    for evaluator in (
        ConstraintEvaluator(),
        LocalIdentityEvaluator(),
        NilpotencyEvaluator(),
        TqAnticommutationEvaluator(),
        StroganovEvaluator(),
        GroundStateEvaluator(),
        KernelLawEvaluator(),
        EllipticEvaluator(),
        YangBaxterEvaluator(),
        WordSumEvaluator(),
        LargestEigenvalueEvaluator(),
    )
}


def collect_tasks(workload: Workload) -> List[CheckTask]:
    tasks = list(itertools.chain.from_iterable(ACTIVE_SUITES[s].evaluate(workload) for s in workload.suites))
    names = [task.name for task in tasks]
    if len(set(names)) != len(names):
        raise RuntimeError("Duplicate check names in workload")
    return tasks
