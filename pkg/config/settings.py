"""
Project settings and configuration management
"""
from typing import List

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-level settings for the benchmark"""

    model_config = SettingsConfigDict(
        env_prefix="AAEC_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Logging
    log_level: str = Field(default="INFO")

    # Output
    output_dir: str = Field(default="./results")
    csv_version: str = Field(default="v1")

    # Experiment defaults (one simulated minute at 20 fps)
    default_frames: int = Field(default=1200)
    default_seeds: str = Field(default="1,2,3")
    default_scenarios: str = Field(default="normal,lowlight,adversarial")
    default_controllers: str = Field(default="aaec,aec,gec,default")

    # Parallel runs
    jobs: int = Field(default=1)

    @property
    def seed_list(self) -> List[int]:
        """Get list of default seeds"""
        return [int(s.strip()) for s in self.default_seeds.split(",") if s.strip()]

    @property
    def scenario_list(self) -> List[str]:
        """Get list of default scenarios"""
        return [s.strip() for s in self.default_scenarios.split(",") if s.strip()]

    @property
    def controller_list(self) -> List[str]:
        """Get list of default controllers"""
        return [c.strip() for c in self.default_controllers.split(",") if c.strip()]


# Global settings instance
settings = Settings()


def get_settings() -> Settings:
    """Get application settings"""
    return settings
