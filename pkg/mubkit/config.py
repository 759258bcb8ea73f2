from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache


class Settings(BaseSettings):
    APP_NAME: str = "mubkit"
    VERSION: str = "0.1.0"
    DEBUG: bool = False
    LOG_LEVEL: str = "WARNING"

    # Dimension guard (d x d complex matrices downstream)
    MAX_DIM: int = 4096

    # Numerical tolerances
    ATOL: float = 1e-9
    HERMITIAN_TOL: float = 1e-10
    POSITIVITY_TOL: float = 1e-9
    WMUB_DET_TOL: float = 1e-9
    RANK_TOL: float = 1e-8
    MARGINAL_TOL: float = 1e-6
    PROB_CLIP_TOL: float = 1e-12

    # Characteristic-2 phase correction; off reproduces the printed phase
    PHASE_PATCH: bool = True

    # Tomography
    REPAIR_METHOD: str = "positive_part"

    # Files
    FORMAT_VERSION: str = "1.0"

    model_config = SettingsConfigDict(env_prefix="MUBKIT_", env_file=".env", env_file_encoding="utf-8")


@lru_cache
def get_settings():
    return Settings()
