from fastapi import APIRouter

from .. import __version__
from ..models.schemas import HealthResponse
from .report import reports_storage

router = APIRouter()


@router.get("/health", response_model=HealthResponse)
async def health_check():
    """Health check endpoint; reports how many runs the in-memory store holds."""
    return HealthResponse(status="ok", message=f"VolOcc API {__version__} is healthy ({len(reports_storage)} runs stored)")
