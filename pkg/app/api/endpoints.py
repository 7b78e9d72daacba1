import asyncio
import logging
import os
from typing import List, Optional

from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from app import config
from app.dsl.parser import parse_model
from app.engine.errors import CausalEngineError
from app.services import corpus_loader
from app.services.query_runner import (
    error_json,
    resolve_variant,
    results_json,
    run_check_cause,
    run_explain,
)

router = APIRouter()
logger = logging.getLogger(__name__)


class CheckCauseRequest(BaseModel):
    model: str = Field(..., description="Model source text in the .cm format")
    context: str
    cause: str
    phi: str
    mode: str = "actual"


class ExplainRequest(BaseModel):
    model: str = Field(..., description="Model source text in the .cm format")
    phi: str
    k: Optional[str] = None
    definition: str = "halpern"
    alpha: Optional[str] = None
    beta: Optional[str] = None
    max_size: Optional[int] = Field(None, ge=1)
    candidate: Optional[str] = None


async def _run(label: str, fn, *args):
    """Run a blocking query in a worker thread under the configured timeout."""
    timeout = config.query_timeout()
    try:
        return await asyncio.wait_for(asyncio.to_thread(fn, *args), timeout=timeout)
    except asyncio.TimeoutError:
        logger.warning(f"⚠️ {label} exceeded {timeout}s")
        raise HTTPException(status_code=504, detail=f"{label} timed out after {timeout}s")
    except CausalEngineError as e:
        logger.info(f"❌ {label} rejected: {e.code}: {e.message}")
        raise HTTPException(status_code=422, detail=error_json(e))
    except Exception as e:
        logger.exception(f"❌ {label} failed")
        raise HTTPException(status_code=500, detail=f"{label} error: {e}")


def _check_cause(req: CheckCauseRequest):
    bundle = parse_model(req.model)
    return run_check_cause(bundle, req.context, req.cause, req.phi, req.mode).to_json_dict()


def _explain(req: ExplainRequest):
    bundle = parse_model(req.model)
    variant = resolve_variant(req.definition)
    return results_json(run_explain(bundle, req.phi, req.k, variant, req.alpha, req.beta,
                                    req.max_size, req.candidate))


@router.post("/check-cause")
async def check_cause(req: CheckCauseRequest):
    return await _run("check-cause", _check_cause, req)


@router.post("/explain")
async def explain(req: ExplainRequest) -> List[dict]:
    return await _run("explain", _explain, req)


@router.get("/health/capabilities")
async def health_check():
    """Returns runtime limits and corpus availability."""
    data_dir = config.data_dir()
    return {
        "limits": {
            "max_contexts": config.max_contexts(),
            "query_timeout_s": config.query_timeout(),
        },
        "corpus": {
            "data_dir": data_dir,
            "present": os.path.isdir(data_dir),
            "models": corpus_loader.list_models(),
        },
    }
