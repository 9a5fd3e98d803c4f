"""Configuration: environment settings for the HTTP service and the
flag > file > default merge used by the command line."""

import json
import numbers
import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from src.errors import ConfigError

REPORT_SCHEMA_VERSION = 1


def load_app_settings() -> Dict[str, Any]:
    """Settings for ``create_app``, read after loading a ``.env`` file."""
    load_dotenv()
    default_db = f"sqlite:///{os.path.join(os.path.dirname(__file__), 'database', 'runs.db')}"
    return {
        'SQLALCHEMY_DATABASE_URI': os.getenv('DATABASE_URL', default_db),
        'SQLALCHEMY_TRACK_MODIFICATIONS': False,
        'CORS_ORIGINS': os.getenv('CORS_ORIGINS', '*'),
        'LOG_LEVEL': os.getenv('LOG_LEVEL', 'INFO'),
        'PORT': int(os.getenv('PORT', 5002))
    }


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            data = json.load(handle)
    except FileNotFoundError:
        raise ConfigError(f'config file not found: {path}') from None
    except json.JSONDecodeError as e:
        raise ConfigError(f'config file {path} is not valid JSON: {e.msg}') from None
    if not isinstance(data, dict):
        raise ConfigError(f'config file {path} must hold a JSON object')
    return data


def merge_config(defaults: Dict[str, Any], file_values: Dict[str, Any],
                 flag_values: Dict[str, Any]) -> Dict[str, Any]:
    """Flags override file values override defaults; ``None`` flags are unset."""
    merged = dict(defaults)
    merged.update({key: value for key, value in file_values.items() if value is not None})
    merged.update({key: value for key, value in flag_values.items() if value is not None})
    return merged


def integer_setting(value: Any, name: str) -> int:
    """An integral config value; booleans and fractional numbers are rejected."""
    if isinstance(value, bool):
        raise ConfigError(f'{name} must be an integer, got {value!r}')
    if isinstance(value, numbers.Integral):
        return int(value)
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise ConfigError(f'{name} must be an integer, got {value!r}')
