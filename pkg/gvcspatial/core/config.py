"""
Core configuration module for gvc-spatial.

Runtime settings are read through Pydantic Settings. Only logging behaviour
is taken from the environment (``GVCSPATIAL_*`` variables or a ``.env``
file); numerical options travel in typed models next to the code that
uses them.
"""

from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Main configuration class for gvc-spatial."""

    model_config = SettingsConfigDict(
        env_prefix="GVCSPATIAL_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    app_name: str = Field(default="gvc-spatial", description="Application name")
    app_version: str = Field(default="0.1.0", description="Application version")
    log_level: str = Field(default="WARNING", description="Logging level")
    debug: bool = Field(default=False, description="Human-readable console log rendering")
    verbose_logging: bool = Field(default=False, description="Route logs through rich")
    log_file: Optional[str] = Field(default=None, description="Optional log file path")

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        level = value.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown log level: {value}")
        return level


# Global settings instance
settings = Settings()


def get_settings() -> Settings:
    """Get the global settings instance."""
    return settings
