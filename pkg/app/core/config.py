from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv
import logging
import sys

load_dotenv()

class Settings(BaseSettings):
    PROJECT_NAME: str = "EDCI Load Component Identifier"
    VERSION: str = "1.0.0"
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"
    WORKERS: int = 1
    TOL_FEAS: float = 1e-8
    TOL_BIND: float = 1e-7
    TOL_RANK: float = 1e-10
    RESULTS_FLOAT_FORMAT: str = "%.17g"

    model_config = SettingsConfigDict(env_prefix="EDCI_", case_sensitive=True)

settings = Settings()

def configure_logging(level: str | None = None) -> None:
    """Send every log record to stderr so stdout carries only command output."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(settings.LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel((level or settings.LOG_LEVEL).upper())
