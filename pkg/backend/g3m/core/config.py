from fractions import Fraction
from typing import Any, Literal

from pydantic import Field
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)


def parse_real(v: Any) -> Any:
    """Accept exact fractions such as ``"1/3"`` wherever a real number is expected."""
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"not a real number: {v!r}")
    return v


def parse_reals(v: Any) -> Any:
    if isinstance(v, list | tuple):
        return [parse_reals(item) for item in v]
    return parse_real(v)


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        # Optional project-level overrides in the working directory
        toml_file="g3m.toml",
        extra="ignore",
    )
    PROJECT_NAME: str = "g3m"
    LOG_LEVEL: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"

    # relative tolerance on V for trade feasibility
    FEASIBILITY_TOL: float = Field(default=1e-9, gt=0)
    WEIGHT_SUM_TOL: float = Field(default=1e-12, gt=0)
    WEIGHT_RANGE_TOL: float = Field(default=1e-12, ge=0)

    ELASTICITY_REL_STEP: float = Field(default=1e-6, gt=0, lt=1e-2)
    # one-sided slopes further apart than this (relative) are treated as a kink
    KINK_TOL: float = Field(default=1e-3, gt=0)
    # relative tracking errors divide by at least this fraction of the claim's initial value
    REL_ERROR_FLOOR: float = Field(default=1e-2, gt=0, le=1)

    MC_WORKERS: int = Field(default=1, ge=1)
    MC_CHUNK_SIZE: int = Field(default=10_000, ge=1)
    MC_MIN_PATHS: int = Field(default=100, ge=2)

    # None keeps the shortest round-trip representation
    CSV_FLOAT_FORMAT: str | None = None

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,  # noqa: ARG003
        dotenv_settings: PydanticBaseSettingsSource,  # noqa: ARG003
        file_secret_settings: PydanticBaseSettingsSource,  # noqa: ARG003
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        # No environment variables: runs are reproducible from files and flags alone
        return (init_settings, TomlConfigSettingsSource(settings_cls))


settings = Settings()
