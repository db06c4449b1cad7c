from typing import Any, Dict, List, Optional
from datetime import datetime, timezone
import json
import logging

from fastapi import FastAPI, HTTPException
from fastapi.concurrency import run_in_threadpool
from pydantic import BaseModel, Field

from welfare.audit import AuditReport, ApproximationReport, approximation_audit, monotonicity_sweep
from welfare.checks import CheckResult, run_all_checks
from welfare.config import Config
from welfare.exceptions import FixtureError, InstanceFormatError, WelfareError
from welfare.fixtures import FIXTURES, fixture_names, load_fixture
from welfare.instances import parse_instance
from welfare.mechanisms import MECHANISM_IDS, MechanismOutcome, get_mechanism
from welfare.model import WelfareModel
from welfare.repro import REPRO_CASES, ReproReport, reproduce
from welfare.types import RationalField

logger = logging.getLogger(__name__)


class InstanceSource(BaseModel):
    """Either a bundled fixture (with its parameters) or an inline instance document."""
    fixture: Optional[str] = None
    instance: Optional[Dict[str, Any]] = None
    epsilon: Optional[str] = None
    N: Optional[str] = None


class RunRequest(InstanceSource):
    """Request model for one mechanism run."""
    bids: List[int]
    mechanism: str = "two-player"
    seed: int = 0


class RunResponse(BaseModel):
    outcome: MechanismOutcome
    expected_utilities: List[RationalField]
    execution_time_ms: float
    timestamp: datetime


class AuditRequest(InstanceSource):
    """Request model for a monotonicity sweep, optionally with the approximation audit."""
    mechanism: str = "two-player"
    budget_cap: int = Field(default=Config.DEFAULT_BUDGET_CAP, ge=0)
    approximation: bool = False
    disjoint: Optional[bool] = None


class AuditResponse(BaseModel):
    monotonicity: AuditReport
    approximation: Optional[ApproximationReport] = None
    verdict: str


class FixtureSummary(BaseModel):
    name: str
    parameters: List[str]
    description: str


class FixturesListResponse(BaseModel):
    fixtures: List[FixtureSummary]
    repro_cases: List[str]
    mechanisms: List[str]


class ChecksResponse(BaseModel):
    model: str
    checks: List[CheckResult]


class AuditServer:
    """
    FastAPI server exposing the mechanisms, audits and counterexample reproductions.

    Every computation is exact and synchronous; handlers hand it to a worker
    thread so the event loop stays responsive.

    Example:
        app = AuditServer().get_app()

        if __name__ == "__main__":
            import uvicorn
            uvicorn.run("main:app", host="0.0.0.0", port=8000)
    """

    def __init__(self, budget_cap_limit: int = Config.DEFAULT_BUDGET_CAP) -> None:
        """
        Initialize the server.

        Args:
            budget_cap_limit: Largest budget cap an audit request may ask for

        Raises:
            ValueError: If the limit is negative
        """
        if budget_cap_limit < 0:
            raise ValueError(f"budget_cap_limit must be non-negative, got {budget_cap_limit}")
        self.budget_cap_limit = budget_cap_limit

    def _model(self, source: InstanceSource) -> WelfareModel:
        if (source.fixture is None) == (source.instance is None):
            raise HTTPException(status_code=400, detail={"error": "give exactly one of fixture or instance"})
        try:
            if source.fixture is not None:
                return load_fixture(source.fixture, source.epsilon, source.N)
            return parse_instance(json.dumps(source.instance), "request")
        except FixtureError as exc:
            raise HTTPException(status_code=404, detail={"error": str(exc)})
        except InstanceFormatError as exc:
            raise HTTPException(
                status_code=400,
                detail={"error": "instance", "diagnostics": [list(d) for d in exc.diagnostics]},
            )
        except (WelfareError, ValueError) as exc:
            raise HTTPException(status_code=400, detail={"error": str(exc)})

    def _mechanism(self, mechanism_id: str):
        if mechanism_id not in MECHANISM_IDS:
            raise HTTPException(status_code=404, detail={"error": f"unknown mechanism {mechanism_id!r}"})
        return get_mechanism(mechanism_id)

    def get_app(self) -> FastAPI:
        """
        Create and configure the FastAPI application.

        Returns:
            Configured FastAPI application instance
        """
        app = FastAPI(
            title="Welfare Mechanisms API",
            description="Strategyproof allocation mechanisms, audits and counterexamples",
            version="0.1.0"
        )

        from fastapi.middleware.cors import CORSMiddleware
        app.add_middleware(
            CORSMiddleware,
            allow_origins=["*"],
            allow_credentials=True,
            allow_methods=["*"],
            allow_headers=["*"],
        )

        @app.get("/health")
        async def health_check():
            """Health check endpoint."""
            return {
                "status": "healthy",
                "fixtures_count": len(FIXTURES),
                "mechanisms_count": len(MECHANISM_IDS),
                "timestamp": datetime.now(timezone.utc).isoformat()
            }

        @app.get("/fixtures", response_model=FixturesListResponse)
        async def list_fixtures():
            """List bundled fixtures, reproducible cases and mechanism ids."""
            return FixturesListResponse(
                fixtures=[
                    FixtureSummary(name=name, parameters=list(FIXTURES[name][1]), description=FIXTURES[name][2])
                    for name in fixture_names()
                ],
                repro_cases=sorted(REPRO_CASES),
                mechanisms=list(MECHANISM_IDS),
            )

        @app.get("/fixtures/{name}/check", response_model=ChecksResponse)
        async def check_fixture(name: str, epsilon: Optional[str] = None, N: Optional[str] = None):
            """Run every structural checker on a bundled fixture."""
            model = self._model(InstanceSource(fixture=name, epsilon=epsilon, N=N))
            try:
                results = await run_in_threadpool(run_all_checks, model)
            except WelfareError as exc:
                raise HTTPException(status_code=400, detail={"error": str(exc), "fixture": name})
            return ChecksResponse(model=model.name, checks=results)

        @app.post("/run", response_model=RunResponse)
        async def run_mechanism(request: RunRequest):
            """Draw one allocation and report the exact expected utilities."""
            model = self._model(request)
            mechanism = self._mechanism(request.mechanism)
            start_time = datetime.now(timezone.utc)
            try:
                outcome = await run_in_threadpool(mechanism.run, model, request.bids, request.seed)
                expected = await run_in_threadpool(mechanism.expected_utilities, model, request.bids)
            except (WelfareError, ValueError) as exc:
                raise HTTPException(
                    status_code=400,
                    detail={"error": str(exc), "mechanism": request.mechanism, "bids": request.bids},
                )
            end_time = datetime.now(timezone.utc)
            return RunResponse(
                outcome=outcome,
                expected_utilities=list(expected),
                execution_time_ms=round((end_time - start_time).total_seconds() * 1000, 4),
                timestamp=end_time,
            )

        @app.post("/audit", response_model=AuditResponse)
        async def audit_mechanism(request: AuditRequest):
            """Monotonicity sweep, and the approximation audit when asked for."""
            if request.budget_cap > self.budget_cap_limit:
                raise HTTPException(
                    status_code=400,
                    detail={"error": f"budget_cap {request.budget_cap} exceeds the limit {self.budget_cap_limit}"},
                )
            model = self._model(request)
            mechanism = self._mechanism(request.mechanism)
            try:
                report = await run_in_threadpool(monotonicity_sweep, mechanism, model, request.budget_cap)
                approximation = None
                if request.approximation:
                    approximation = await run_in_threadpool(
                        approximation_audit, mechanism, model, request.budget_cap, request.disjoint
                    )
            except (WelfareError, ValueError) as exc:
                raise HTTPException(status_code=400, detail={"error": str(exc), "mechanism": request.mechanism})
            passed = report.passed and (approximation is None or approximation.passed)
            return AuditResponse(monotonicity=report, approximation=approximation, verdict="PASS" if passed else "FAIL")

        @app.get("/repro/{case}", response_model=ReproReport)
        async def reproduce_case(case: str, epsilon: Optional[str] = None, N: Optional[str] = None):
            """Reproduce one counterexample."""
            if case not in REPRO_CASES:
                raise HTTPException(status_code=404, detail={"error": f"unknown case {case!r}"})
            try:
                return await run_in_threadpool(reproduce, case, epsilon, N)
            except (WelfareError, ValueError) as exc:
                raise HTTPException(status_code=400, detail={"error": str(exc), "case": case})

        logger.debug(f"audit server ready with {len(FIXTURES)} fixtures")
        return app
