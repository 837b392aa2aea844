from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # backend registered in heatuc.solver.BACKENDS
    SOLVER_BACKEND: str = "appsi_highs"

    FEASIBILITY_TOL: float = 1e-7
    DUALITY_TOL: float = 1e-6
    VALIDITY_TOL: float = 1e-6
    CONSISTENCY_TOL: float = 1e-4
    SOLVER_FEASIBILITY_TOL: float = 1e-9

    MIP_GAP: float = 1e-4
    MIP_ABS_GAP: float = 1e-6
    TIME_LIMIT: float = 600.0

    GAMMA: float = 0.99
    TIE_BREAK_EPS: float = 1e-9
    DUAL_BOUND_FACTOR: float = 10.0

    # auto | monolithic | period
    AWARE_METHOD: str = "auto"
    # largest number of per-period aware models the decomposition may build
    AWARE_PERIOD_MODELS: int = 512

    ORACLE_BUDGET: int = 100_000
    ORACLE_WORKERS: int = 1

    LOG_CONFIG: str = "logging.ini"
    LOG_LEVEL: str = "INFO"

    class Config:
        env_file = ".env"


settings = Settings()
