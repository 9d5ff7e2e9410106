import math
from datetime import datetime, timezone
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator

from app.core.config import settings

SuiteName = Literal[
    "constraint", "local-identity", "nilpotency", "tq-anticommutation", "stroganov",
    "ground-state", "kernel-law", "elliptic", "yang-baxter", "word-sum", "largest-eigenvalue", "all",
]
WeightSource = Literal["explicit", "solve-d", "elliptic"]

# Suites in the order ``all`` expands to.
SUITE_ORDER: List[str] = [
    "constraint", "local-identity", "nilpotency", "tq-anticommutation", "stroganov",
    "ground-state", "kernel-law", "elliptic", "yang-baxter", "word-sum", "largest-eigenvalue",
]

# --- Configuration ---

class SuiteConfig(BaseModel):
    suite: SuiteName = "all"
    L_list: List[int] = Field(default_factory=lambda: [3, 5])
    weight_source: WeightSource = "explicit"
    weights: Optional[List[float]] = Field(None, description="a,b,c,d (explicit) or a,b,c (solve-d)")
    eta: float = math.pi / 3
    nome: Optional[float] = None
    u: Optional[float] = None
    v: Optional[float] = None
    rho: float = 1.0
    zeta: Optional[float] = None
    n_max: int = Field(8, ge=1, description="Largest n of the word-sum sweep")
    samples: int = Field(1, ge=1)
    seed: int = settings.DEFAULT_SEED
    tolerance_overrides: Dict[str, float] = Field(default_factory=dict)
    dense_limit: Optional[int] = Field(None, ge=1)
    allow_unconstrained: bool = False
    workers: int = Field(1, ge=1)

    model_config = {
        "extra": "forbid"
    }

    @field_validator("L_list")
    @classmethod
    def lengths_positive(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("L_list must not be empty")
        if any(length < 1 for length in v):
            raise ValueError(f"Chain lengths must be positive, got {v}")
        return sorted(set(v))

    @field_validator("seed")
    @classmethod
    def seed_is_64_bit(cls, v: int) -> int:
        if not 0 <= v < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        return v

# --- Report Models ---

class CheckRecord(BaseModel):
    name: str
    suite: str
    check_id: str
    inputs: Dict[str, Any] = Field(default_factory=dict)
    residual: Optional[float] = None
    summary: Dict[str, Any] = Field(default_factory=dict)
    tolerance: Optional[float] = None
    verdict: Literal["pass", "fail"]
    error: Optional[str] = None


class Environment(BaseModel):
    version: str = settings.VERSION
    engine_version: str
    precision: str = "float64/complex128"
    timestamp: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))


class VerificationReport(BaseModel):
    schema_version: str = settings.REPORT_SCHEMA_VERSION
    config: SuiteConfig
    config_hash: str
    checks: List[CheckRecord]
    environment: Environment
    passed: bool


class ComputationReport(BaseModel):
    """Result of a direct CLI computation (spectrum, word-sum, elliptic, ...)."""
    schema_version: str = settings.REPORT_SCHEMA_VERSION
    command: str
    inputs: Dict[str, Any] = Field(default_factory=dict)
    result: Dict[str, Any] = Field(default_factory=dict)
    passed: bool = True
    environment: Environment
