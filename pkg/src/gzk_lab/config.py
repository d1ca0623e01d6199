"""Process-level settings for the GZK lab."""

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Settings loaded from environment variables (GZK_*) or .env file."""

    # Logging
    log_level: str = "INFO"
    log_dir: str = "logs"
    log_to_file: bool = True

    # Execution
    sweep_workers: int = 2
    default_output_dir: str = "runs"

    # Assert Hermitian symmetry after every spectral operation
    debug_checks: bool = False

    # Largest space-time lattice (entries) a probe may allocate
    max_probe_lattice: int = 2_000_000

    model_config = SettingsConfigDict(
        env_prefix="GZK_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


# Global settings instance
settings = Settings()
