from typing import Dict, Union
from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Named tolerances used by the verification suites.
BASE_TOLERANCES: Dict[str, float] = {
    "identity": 1e-10,
    "hermitian": 1e-10,
    "constraint": 1e-10,
    "local_identity": 1e-12,
    "local_identity_converse": 1e-4,
    "local_identity_unconstrained": 1e-6,
    "nilpotency": 1e-11,
    "tq": 1e-10,
    "eigenvalue": 1e-8,
    "cross_residual": 1e-10,
    "ground_state": 1e-10,
    "word_sum": 1e-12,
    "matrix_element": 1e-10,
    "theta_identity": 1e-11,
    "tu_shift": 1e-10,
    "tu_log_derivative": 1e-7,
    "coupling": 1e-9,
    "yang_baxter": 1e-10,
    "commuting": 1e-10,
    "symmetry": 1e-11,
    "power_iteration": 1e-8,
    "free_energy": 1e-8,
    "image_residual": 1e-9,
    "kernel_zero": 1e-9,
    "coefficient_floor": 1e-8,
}


class Settings(BaseSettings):
    PROJECT_NAME: str = "SUSY Eight-Vertex Verifier"
    VERSION: str = "1.0.0"
    REPORT_SCHEMA_VERSION: str = "1.0"

    # Solver budgets (log2 of the Hilbert-space dimension)
    DENSE_LIMIT: int = 12
    DENSE_GENERAL_LIMIT: int = 11

    # Reproducibility
    DEFAULT_SEED: int = 20170314

    # Iterative solvers
    POWER_ITERATION_CAP: int = 20000
    KRYLOV_RESTART_CAP: int = 60
    KRYLOV_SUBSPACE: int = 80

    # Degeneracy detection
    CLUSTER_RTOL: float = 1e-8
    SEPARATION_FACTOR: float = 10.0

    LOG_LEVEL: str = "WARNING"

    DEFAULT_TOLERANCES: Dict[str, float] = dict(BASE_TOLERANCES)

    @field_validator("DEFAULT_TOLERANCES", mode="before")
    @classmethod
    def assemble_tolerances(cls, v: Union[str, Dict[str, float]]) -> Dict[str, float]:
        # "identity=1e-9,tq=1e-8" from the environment
        if isinstance(v, str) and not v.startswith("{"):
            pairs = [item.split("=", 1) for item in v.split(",") if item.strip()]
            v = {key.strip(): float(value) for key, value in pairs}
        if isinstance(v, dict):
            unknown = set(v) - set(BASE_TOLERANCES)
            if unknown:
                raise ValueError(f"Unknown tolerance keys: {sorted(unknown)}")
            return {**BASE_TOLERANCES, **v}
        raise ValueError(v)

    model_config = SettingsConfigDict(case_sensitive=True, env_file=".env", env_prefix="SUSY8V_")


settings = Settings()
