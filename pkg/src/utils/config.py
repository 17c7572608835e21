import os
from dataclasses import dataclass
from functools import lru_cache

from dotenv import load_dotenv


@dataclass(frozen=True)
class Settings:
    log_level: str = "INFO"
    group_bound: int = 10000
    involution_max_rank: int = 4
    enumeration_cap: int = 4096
    report_dir: str = "data/reports"


def _int_env(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}")


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    load_dotenv()
    return Settings(
        log_level=os.environ.get("MCONV_LOG_LEVEL", "INFO").upper(),
        group_bound=_int_env("MCONV_GROUP_BOUND", 10000),
        involution_max_rank=_int_env("MCONV_INVOLUTION_MAX_RANK", 4),
        enumeration_cap=_int_env("MCONV_ENUMERATION_CAP", 4096),
        report_dir=os.environ.get("MCONV_REPORT_DIR", "data/reports"),
    )
