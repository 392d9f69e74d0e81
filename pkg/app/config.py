"""Configuration management for the sensor network detection simulator"""
from typing import Optional
from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache


class Settings(BaseSettings):
    """Process-level settings"""

    # Monte Carlo execution
    workers: Optional[int] = None  # None -> os.cpu_count(); 1 runs in-process
    trial_batch_size: int = 2000  # trials simulated per vectorized batch

    # Full protocol: 10000 tests x 300 channel realizations
    default_trials_per_channel: int = 10000
    default_channel_realizations: int = 300

    # Logging
    log_level: str = "INFO"

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="SENSORNET_",
        # Case insensitive env vars
        case_sensitive=False,
    )


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()
