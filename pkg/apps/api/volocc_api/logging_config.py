import logging
import platform
import sys
from pathlib import Path
from typing import Optional, Union

_CONFIGURED = False


def configure_logging(log_dir: Optional[Union[str, Path]] = "./logs", level: str = "INFO") -> Optional[Path]:
    """Set up console + file logging and the dedicated activity loggers.

    Returns the log directory in use, or None when file logging is disabled
    (log_dir=None).
    """
    global _CONFIGURED
    if _CONFIGURED:
        return None

    handlers = [logging.StreamHandler()]
    init_msg = "File logging disabled"
    resolved: Optional[Path] = None

    if log_dir is not None:
        resolved = Path(log_dir)
        try:
            resolved.mkdir(parents=True, exist_ok=True)
            # Test write permissions
            probe = resolved / ".test_permissions"
            probe.touch()
            probe.unlink()
            init_msg = f"Log directory initialized: {resolved.absolute()}"
        except Exception as e:
            # Fall back to the user directory if the working directory is not writable
            resolved = Path.home() / "VolOcc" / "logs"
            resolved.mkdir(parents=True, exist_ok=True)
            init_msg = f"Log directory created with fallback: {resolved.absolute()} (reason: {e})"
        handlers.append(logging.FileHandler(resolved / "volocc.log", encoding="utf-8"))

    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
    )

    if resolved is not None:
        for name, filename, tag, lvl in (
            ("simulation", "simulation_activity.log", "SIMULATION", logging.DEBUG),
            ("montecarlo", "montecarlo_runs.log", "MONTECARLO", logging.DEBUG),
            ("api", "api_requests.log", "API", logging.INFO),
        ):
            activity = logging.getLogger(name)
            handler = logging.FileHandler(resolved / filename, encoding="utf-8")
            handler.setFormatter(logging.Formatter(f"%(asctime)s - {tag} - %(levelname)s - %(message)s"))
            activity.addHandler(handler)
            activity.setLevel(lvl)
            # Prevent duplicate console output
            activity.propagate = False

    logger = logging.getLogger(__name__)
    logger.info(init_msg)
    logger.info(f"Platform: {platform.system()}")
    logger.info(f"Python version: {sys.version.split()[0]}")
    _CONFIGURED = True
    return resolved
