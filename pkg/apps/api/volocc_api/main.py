import logging
import os
from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from . import __version__
from .logging_config import configure_logging
from .routers import estimation, experiments, health, report

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application lifespan management."""
    configure_logging(os.environ.get("VOLOCC_LOG_DIR", "./logs"), os.environ.get("VOLOCC_LOG_LEVEL", "INFO"))
    logger.info("Starting VolOcc API...")
    yield
    logger.info("Shutting down VolOcc API...")


app = FastAPI(
    title="VolOcc API",
    description="Volatility occupation times: simulation, spot variance, occupation curves, densities and Monte Carlo runs",
    version=__version__,
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=False,
    allow_methods=["GET", "POST", "DELETE", "OPTIONS"],
    allow_headers=["*"],
)

app.include_router(health.router, tags=["health"])
app.include_router(estimation.router, tags=["estimation"])
app.include_router(experiments.router, tags=["experiments"])
app.include_router(report.router, prefix="/report", tags=["reporting"])


@app.get("/")
async def root():
    """Root endpoint."""
    return {"message": "VolOcc API is running", "version": __version__, "status": "operational"}
