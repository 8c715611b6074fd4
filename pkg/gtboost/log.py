# ============================================================
# Imports
# ============================================================

import logging

from rich.console import Console
from rich.logging import RichHandler

from gtboost.config import get_settings

# ============================================================
# Logger Factory
# ============================================================

_CONFIGURED = False


def _configure_root() -> None:
    global _CONFIGURED
    if _CONFIGURED:
        return
    settings = get_settings()
    handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True, markup=False)
    handler.setFormatter(logging.Formatter("%(message)s"))
    root = logging.getLogger("gtboost")
    root.addHandler(handler)
    root.setLevel(settings.log_level.upper())
    root.propagate = False
    _CONFIGURED = True


def get_logger(name: str) -> logging.Logger:
    """
    Return a logger under the `gtboost` namespace.
    Messages follow the "[Tag] message" convention.
    """
    _configure_root()
    if not name.startswith("gtboost"):
        name = f"gtboost.{name}"
    return logging.getLogger(name)
