import logging
from typing import Any, Dict, Optional

from fastapi import HTTPException
from pydantic import ValidationError

from ..models.schemas import ErrorCode, ErrorDetail
from .errors import ConfigurationError, EstimationError, InputDataError, VolOccError

logger = logging.getLogger("api")


def to_http_exception(exc: Exception, context: Optional[Dict[str, Any]] = None) -> HTTPException:
    """Map toolkit errors to HTTP: configuration/input 400, estimation 422, anything else 500."""
    details = dict(context or {})
    if isinstance(exc, VolOccError):
        details.update(exc.details)
        code, message = exc.code, exc.message
        if isinstance(exc, (ConfigurationError, InputDataError)):
            status = 400
        elif isinstance(exc, EstimationError):
            status = 422
        else:
            status = 500
    elif isinstance(exc, ValidationError):
        code, message, status = ErrorCode.CONFIG_ERROR, exc.errors()[0]["msg"], 400
    else:
        code, message, status = ErrorCode.UNKNOWN_ERROR, f"{type(exc).__name__}: {exc}", 500
    logger.error(f"{status} {code.value}: {message}")
    return HTTPException(status_code=status, detail=ErrorDetail(code=code, message=message, details=details).model_dump(mode="json"))
