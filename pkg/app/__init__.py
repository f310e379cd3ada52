from app.core.config import settings

__version__ = settings.VERSION