# app.py
import logging
from typing import List, Optional

import uvicorn
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

import config as settings
from analyze.sizes import ARCHITECTURE_PRESETS, ArchitectureSpec, estimate, group_sizes, in_billions
from blueprints.compose import compose_bnn_with_ledger
from bnn.refbnn import Mode
from db.results_db import ResultsDB
from engine.lockstep import lockstep

logging.basicConfig(level=settings.log_level())
logger = logging.getLogger(__name__)

MAX_COMPARE_EPOCHS = 5

app = FastAPI(title="PetriBNN API", description="Petri-net models of binarized neural network training")

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

results_db = ResultsDB()


class ArchitectureRequest(BaseModel):
    name: str = "custom"
    input_features: int
    layer_sizes: List[int]


class AnalyzeRequest(BaseModel):
    architectures: Optional[List[ArchitectureRequest]] = None


class CompareRequest(BaseModel):
    spec: settings.SpecConfig = Field(default_factory=settings.SpecConfig)
    epochs: int = Field(1, ge=1, le=MAX_COMPARE_EPOCHS)
    seeds: List[int] = Field(default_factory=lambda: [0])
    mode: Mode = Mode.PN_EXACT


@app.get("/")
async def root():
    return {"message": "PetriBNN API", "endpoints": ["/analyze", "/generate", "/compare", "/runs"]}


@app.post("/analyze")
async def analyze(request: AnalyzeRequest):
    try:
        if request.architectures:
            archs = [ArchitectureSpec(a.name, a.input_features, tuple(a.layer_sizes)) for a in request.architectures]
        else:
            archs = list(ARCHITECTURE_PRESETS)
        return [{"architecture": arch.label, "units": arch.unit_count, **in_billions(estimate(arch))}
                for arch in archs]
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/generate")
async def generate(spec: settings.SpecConfig):
    try:
        network = settings.Config(spec=spec).network_spec()
        net, ledger = compose_bnn_with_ledger(network)
        places, transitions, arcs = net.size()
        return {
            "places": places,
            "transitions": transitions,
            "arcs": arcs,
            "groups": [row.to_dict() for row in group_sizes(ledger)],
        }
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/compare")
async def compare(request: CompareRequest):
    try:
        network = settings.Config(spec=request.spec).network_spec()
        report = lockstep(network, request.epochs, request.seeds, request.mode)
        summary = report.summary()
        results_db.store_run("compare", request.model_dump(mode="json"), 0 if report.ok else 1, summary)
        return summary
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Lockstep comparison failed: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))


@app.get("/runs")
async def runs(command: Optional[str] = None, limit: int = 50):
    return results_db.list_runs(command, limit)


if __name__ == "__main__":
    uvicorn.run("app:app", host="0.0.0.0", port=8000, reload=True)
