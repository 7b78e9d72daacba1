import logging

from fastapi import FastAPI

from app import config
from app.api.endpoints import router as api_router

logger = logging.getLogger(__name__)

app = FastAPI(title="Causal Explanation Engine")

app.include_router(api_router, prefix="/api")


@app.get("/health")
async def health():
    return {"status": "ok"}


@app.on_event("startup")
async def startup_event():
    config.configure_logging()
    logger.info(f"✅ Query service ready (scale guard {config.max_contexts()} contexts, "
                f"timeout {config.query_timeout()}s)")
