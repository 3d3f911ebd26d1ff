from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    PROJECT_NAME: str = "Multi-IRS ISAC Optimizer"
    API_V1_STR: str = "/api/v1"

    LOG_LEVEL: str = "INFO"
    OUTPUT_DIR: str = "results"
    SHOW_PROGRESS: bool = True

    # Sweep execution
    MAX_WORKERS: int = 4
    DEFAULT_SEED: int = 2024

    # Alternating optimization
    SCA_MAX_ITER: int = 200
    SCA_TOL: float = 1e-6

    model_config = SettingsConfigDict(env_file=".env", env_prefix="ISAC_", extra="ignore")

settings = Settings()
