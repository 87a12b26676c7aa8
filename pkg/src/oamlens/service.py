"""HTTP wrapper around the experiment runner.

A thin FastAPI app exposing the same entry point the CLI uses: validated
configs go in, a run executes under the service's output root, and the run
report comes back as JSON. Output files stay on the server host; the
report's manifest says what was written where (paths relative to the run
directory).
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from importlib import resources
from pathlib import Path
from typing import List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from .core import ConfigurationError, DomainError, NumericalError
from .experiments import (PACKAGE_VERSION, ExperimentConfig, RunReport,
                          config_json_schema, run)

__all__ = ["create_app", "app", "RunRequest", "list_recipes", "recipe_text"]

_RUN_ID = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]{0,63}$")


class RunRequest(BaseModel):
    """Body of POST /run: the experiment config plus an optional run id
    naming the output subdirectory (defaults to a digest of the config)."""

    model_config = ConfigDict(extra="forbid")
    config: ExperimentConfig
    run_id: Optional[str] = Field(default=None, pattern=_RUN_ID.pattern)
    threads: int = Field(default=1, ge=1, le=32)


class HealthResponse(BaseModel):
    status: str
    version: str


class RecipeList(BaseModel):
    recipes: List[str]


def list_recipes() -> List[str]:
    root = resources.files("oamlens") / "recipes"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def recipe_text(name: str) -> str:
    if "/" in name or "\\" in name or not name.endswith(".json"):
        raise KeyError(name)
    root = resources.files("oamlens") / "recipes"
    entry = root / name
    if not entry.is_file():
        raise KeyError(name)
    return entry.read_text()


def create_app(output_root: Optional[str] = None) -> FastAPI:
    """Build the service app.

    ``output_root`` is where run directories are created; it defaults to
    the OAMLENS_OUTPUT_ROOT environment variable, then ./oamlens_runs.
    """
    root = Path(output_root or os.environ.get("OAMLENS_OUTPUT_ROOT",
                                              "oamlens_runs"))
    app = FastAPI(title="oamlens", version=PACKAGE_VERSION,
                  description="OAM-dependent magnetic lensing simulations")

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=PACKAGE_VERSION)

    @app.get("/config/schema")
    def schema() -> dict:
        return config_json_schema()

    @app.get("/recipes", response_model=RecipeList)
    def recipes() -> RecipeList:
        return RecipeList(recipes=list_recipes())

    @app.get("/recipes/{name}")
    def recipe(name: str) -> dict:
        try:
            return json.loads(recipe_text(name))
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no recipe {name!r}")

    @app.post("/run", response_model=RunReport)
    def run_experiment(request: RunRequest) -> RunReport:
        run_id = request.run_id
        if run_id is None:
            digest = hashlib.sha256(json.dumps(
                request.config.model_dump(mode="json"),
                sort_keys=True).encode()).hexdigest()
            run_id = digest[:16]
        out_dir = root / run_id
        try:
            return run(request.config, out_dir, threads=request.threads)
        except (ConfigurationError, DomainError) as exc:
            detail = {"error": "configuration", "message": str(exc)}
            if isinstance(exc, ConfigurationError) and exc.field_path:
                detail["field_path"] = exc.field_path
            raise HTTPException(status_code=422, detail=detail)
        except NumericalError as exc:
            raise HTTPException(status_code=500, detail={
                "error": "numerical", "message": str(exc)})

    return app


app = create_app()
