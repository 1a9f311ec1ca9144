"""Environment-driven settings for popmatch"""

import logging
import os
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field

from popmatch.errors import ConfigError

logger = logging.getLogger(__name__)

# Load environment variables
load_dotenv()

DEFAULT_BUDGET_MATCHINGS = 1_000_000
DEFAULT_BUDGET_PROFILES = 10_000


class Settings(BaseModel):
    """Runtime settings; CLI flags override the environment"""

    model_config = ConfigDict(frozen=True)

    log_level: str = "INFO"
    budget_matchings: int = Field(default=DEFAULT_BUDGET_MATCHINGS, gt=0)
    budget_profiles: int = Field(default=DEFAULT_BUDGET_PROFILES, gt=0)


def _int_from_env(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}")


def load_settings(
    log_level: Optional[str] = None,
    budget_matchings: Optional[int] = None,
    budget_profiles: Optional[int] = None,
) -> Settings:
    """
    Build settings from POPMATCH_* environment variables

    Args:
        log_level: Overrides POPMATCH_LOG_LEVEL when given
        budget_matchings: Overrides POPMATCH_BUDGET_MATCHINGS when given
        budget_profiles: Overrides POPMATCH_BUDGET_PROFILES when given

    Returns:
        Validated Settings
    """
    level = log_level or os.environ.get("POPMATCH_LOG_LEVEL", "INFO")
    matchings = budget_matchings or _int_from_env("POPMATCH_BUDGET_MATCHINGS", DEFAULT_BUDGET_MATCHINGS)
    profiles = budget_profiles or _int_from_env("POPMATCH_BUDGET_PROFILES", DEFAULT_BUDGET_PROFILES)
    if matchings <= 0 or profiles <= 0:
        raise ConfigError("Enumeration budgets must be positive")
    if not isinstance(logging.getLevelName(level.upper()), int):
        logger.warning(f"Unknown log level {level!r}, falling back to INFO")
        level = "INFO"
    return Settings(log_level=level.upper(), budget_matchings=matchings, budget_profiles=profiles)
