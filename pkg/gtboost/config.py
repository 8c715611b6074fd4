# ============================================================
# Imports
# ============================================================

from functools import lru_cache
from pathlib import Path
from typing import Any, Dict

from dotenv import dotenv_values, load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

from gtboost.errors import ConfigError

# ============================================================
# Process Settings (environment / .env)
# ============================================================

load_dotenv()


class Settings(BaseSettings):
    """
    Process-wide settings read from GTBOOST_* environment variables.
    Only `output_dir` is allowed to override a run's resolved config.
    """

    model_config = SettingsConfigDict(env_prefix="GTBOOST_", env_file=".env", extra="ignore")

    output_dir: Path = Path("outputs")
    log_level: str = "INFO"
    progress: bool = False


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()


# ============================================================
# Config Files (key = value, '#' comments)
# ============================================================

def _normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def load_config_file(path: str | Path) -> Dict[str, str]:
    """
    Read a `key = value` config file.

    Keys may use the flag spelling (`mu-group`) or the field spelling (`mu_group`).
    Values are returned as strings; the caller's pydantic model does the coercion.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    raw = dotenv_values(path)
    resolved: Dict[str, str] = {}
    for key, value in raw.items():
        if value is None:
            raise ConfigError(f"Config file {path}: key '{key}' has no value")
        resolved[_normalize_key(key)] = value.strip()
    return resolved


def merge_params(defaults: Dict[str, Any], from_file: Dict[str, Any], flags: Dict[str, Any]) -> Dict[str, Any]:
    """Flags override file values; file values override defaults. `None` flags are unset."""
    merged = dict(defaults)
    merged.update({k: v for k, v in from_file.items() if k in defaults})
    unknown = sorted(set(from_file) - set(defaults))
    if unknown:
        raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged
