"""
Configuration

Solver defaults read from the environment (prefix ``MPPI_``) and ``.env``.
"""
from typing import Literal, Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Tolerances
    eps_g: float = Field(1e-12, gt=0, description="global residual threshold")
    eps_eta: float = Field(1e-10, gt=0, description="slope comparisons")
    eps_v: float = Field(1e-10, gt=0, description="bias comparisons")

    # Iteration caps
    max_outer: int = Field(200, gt=0)
    max_inner: int = Field(1000, gt=0)

    # Linear algebra backend
    solver: Literal["lu", "sor"] = "lu"
    sor_omega: float = Field(1.2, gt=0, lt=2)
    sor_tol: float = Field(1e-13, gt=0)
    sor_max_sweeps_factor: int = Field(100, gt=0)  # max sweeps = factor * n
    final_method: Literal["auto", "A", "B"] = "auto"
    sor_class_threshold: int = Field(64, ge=1)  # auto: SOR only above this class size

    # Driver behaviour
    warm_start: bool = True
    single_scc_shortcut: bool = True
    check_invariants: bool = False

    # bench worker pool size, env MPPI_THREADS
    threads: int = Field(1, ge=1)

    # Oracle enumeration cap
    brute_force_cap: int = Field(10**6, ge=1)

    # Logging
    log_level: str = "INFO"
    log_file: Optional[str] = None

    model_config = SettingsConfigDict(
        env_prefix="MPPI_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v):
        v = v.strip().upper()
        if v not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level: {v}")
        return v


settings = Settings()
