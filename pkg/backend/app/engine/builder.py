import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from app.core.config import settings
from app.db.schemas import SUITE_ORDER, SuiteConfig
from app.engine.elliptic import EllipticError, EllipticParams, sample_constrained_weights, weights_from_elliptic
from app.engine.hilbert import rng_for
from app.engine.vertex import VertexWeights, WeightError, solve_d

logger = logging.getLogger(__name__)

# Desk-scale boundary for any suite
MAX_LENGTH = 15
DEFAULT_ZETAS = (0.3, 1.0, 2.5, -1.2)
DEFAULT_ELLIPTIC = {"eta": math.pi / 3, "nome": 0.2, "u": 0.4, "v": 0.3}


class BuildError(Exception):
    """Raised when a configuration cannot be resolved into a workload"""
    pass


@dataclass
class Workload:
    config: SuiteConfig
    suites: List[str]
    lengths: List[int]
    weights: List[VertexWeights]
    weights_explicit: bool
    zetas: List[float]
    elliptic: EllipticParams
    v: float
    tolerances: Dict[str, float]
    dense_limit: int
    seed: int
    samples: int
    notes: List[str] = field(default_factory=list)


class Builder:
    def build(self, config: SuiteConfig) -> Workload:
        """
        Resolves a SuiteConfig into concrete weights, lengths and tolerances.
        Rejects bad lengths, zero or unconstrained weights and invalid nomes
        before anything is computed.
        """
        # 1. Tolerances
        unknown = set(config.tolerance_overrides) - set(settings.DEFAULT_TOLERANCES)
        if unknown:
            raise BuildError(f"Unknown tolerance keys: {sorted(unknown)}. Allowed: {sorted(settings.DEFAULT_TOLERANCES)}")
        bad = {k: v for k, v in config.tolerance_overrides.items() if not v > 0}
        if bad:
            raise BuildError(f"Tolerances must be positive: {bad}")
        tolerances = {**settings.DEFAULT_TOLERANCES, **config.tolerance_overrides}

        # 2. Lengths
        too_long = [length for length in config.L_list if length > MAX_LENGTH]
        if too_long:
            raise BuildError(f"Chain lengths {too_long} exceed the supported maximum L={MAX_LENGTH}")
        dense_limit = config.dense_limit or settings.DENSE_LIMIT

        # 3. Elliptic parameters (always resolved: yang-baxter and elliptic suites use them)
        try:
            elliptic = EllipticParams(
                eta=config.eta,
                nome=DEFAULT_ELLIPTIC["nome"] if config.nome is None else config.nome,
                u=DEFAULT_ELLIPTIC["u"] if config.u is None else config.u,
                rho=config.rho,
            )
        except EllipticError as e:
            raise BuildError(f"Invalid elliptic parameters: {e}")

        # 4. Weights
        weights = self._resolve_weights(config, elliptic, tolerances)
        explicit = weights is not None
        if weights is None:
            weights = sample_constrained_weights(rng_for(config.seed, "weights"), config.samples)

        # 5. Anisotropies for the spin-chain suites
        if config.zeta is not None:
            if config.zeta == 0.0:
                raise BuildError("ζ = 0 is excluded")
            zetas = [config.zeta]
        elif explicit and weights[0].d != 0.0:
            zetas = [weights[0].zeta]
        else:
            zetas = list(DEFAULT_ZETAS)

        suites = list(SUITE_ORDER) if config.suite == "all" else [config.suite]
        workload = Workload(
            config=config,
            suites=suites,
            lengths=list(config.L_list),
            weights=weights,
            weights_explicit=explicit,
            zetas=zetas,
            elliptic=elliptic,
            v=DEFAULT_ELLIPTIC["v"] if config.v is None else config.v,
            tolerances=tolerances,
            dense_limit=dense_limit,
            seed=config.seed,
            samples=config.samples,
        )
        logger.info("workload resolved", extra={"fields": {
            "suites": suites, "lengths": workload.lengths, "weights": len(weights), "explicit": explicit,
        }})
        return workload

    def _resolve_weights(self, config: SuiteConfig, elliptic: EllipticParams,
                         tolerances: Dict[str, float]) -> Optional[List[VertexWeights]]:
        source = config.weight_source
        try:
            if source == "elliptic":
                if config.nome is None or config.u is None:
                    raise BuildError("weight_source 'elliptic' needs nome and u")
                return [weights_from_elliptic(elliptic)]
            if config.weights is None:
                return None
            if source == "solve-d":
                if len(config.weights) != 3:
                    raise BuildError(f"weight_source 'solve-d' takes a,b,c; got {len(config.weights)} values")
                return [solve_d(*config.weights)]
            if len(config.weights) == 3:
                return [solve_d(*config.weights)]
            if len(config.weights) != 4:
                raise BuildError(f"Expected 3 or 4 weights, got {len(config.weights)}")
            w = VertexWeights(*config.weights)
        except (WeightError, EllipticError) as e:
            raise BuildError(f"Invalid weights: {e}")

        # d = 0 is the six-vertex limit; the other weights must not vanish
        zero = [name for name, value in zip("abc", w.as_tuple()) if value == 0.0]
        if zero:
            raise BuildError(f"Weights must be non-zero, got {', '.join(zero)} = 0")
        residual = w.constraint_residual
        if residual > tolerances["constraint"] and not config.allow_unconstrained:
            raise BuildError(
                f"Weights {w.as_tuple()} violate (a²+ab)(b²+ab) = (c²+ab)(d²+ab) "
                f"(relative residual {residual:.3e}); pass allow_unconstrained to run them anyway"
            )
        return [w]
