"""
Настройки процесса (переменные окружения TCDPP_*)
"""
import logging
from pathlib import Path
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="TCDPP_", env_file=".env", extra="ignore")

    output_dir: Path = Path("results")
    max_laws: int = Field(default=200_000, ge=1)
    workers: int = Field(default=1, ge=1)


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Получить настройки (загружаются один раз)"""
    global _settings
    if _settings is None:
        _settings = Settings()
        logger.debug(f"Settings loaded: {_settings.model_dump()}")
    return _settings


def reset_settings() -> None:
    """Сбросить кэш настроек (для тестов)"""
    global _settings
    _settings = None
