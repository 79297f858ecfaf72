import os
from pathlib import Path
from typing import Dict

from dotenv import load_dotenv, find_dotenv, dotenv_values
load_dotenv(find_dotenv(usecwd=True), override=False)

def get(key: str, default=None):
    return os.getenv(key, default)

def get_float(key: str, default: float) -> float:
    v = os.getenv(key)
    return float(v) if v not in (None, "") else float(default)

def get_int(key: str, default: int) -> int:
    v = os.getenv(key)
    return int(v) if v not in (None, "") else int(default)

def load_config_file(path: str | Path | None) -> Dict[str, str]:
    """Flat `key = value` file (dotenv syntax). Missing path -> empty dict."""
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Config file not found: {p}")
    return {k: v for k, v in dotenv_values(p).items() if v is not None}
