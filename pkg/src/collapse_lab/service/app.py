"""FastAPI application wrapping the core library."""

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import CollapseLabError
from . import handlers
from .schemas import (
    BetelRequest,
    BetelResponse,
    CollapseRequest,
    CollapseResponse,
    CurvatureRequest,
    CurvatureResponse,
    GeeRequest,
    GeeResponse,
    GmmRequest,
    GmmResponse,
    ProjectRequest,
    ProjectionResponse,
    SweepRequest,
    SweepResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="collapse-lab", version=__version__)

    @app.exception_handler(CollapseLabError)
    async def domain_error(request: Request, exc: CollapseLabError):
        return JSONResponse(
            status_code=422,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/project", response_model=ProjectionResponse)
    def project_route(req: ProjectRequest):
        return handlers.handle_project(req)

    @app.post("/curvature", response_model=CurvatureResponse)
    def curvature_route(req: CurvatureRequest):
        return handlers.handle_curvature(req)

    @app.post("/collapse", response_model=CollapseResponse)
    def collapse_route(req: CollapseRequest):
        return handlers.handle_collapse(req)

    @app.post("/betel", response_model=BetelResponse)
    def betel_route(req: BetelRequest):
        return handlers.handle_betel(req)

    @app.post("/gmm", response_model=GmmResponse)
    def gmm_route(req: GmmRequest):
        return handlers.handle_gmm(req)

    @app.post("/gee", response_model=GeeResponse)
    def gee_route(req: GeeRequest):
        return handlers.handle_gee(req)

    @app.post("/sweep", response_model=SweepResponse)
    def sweep_route(req: SweepRequest):
        return handlers.handle_sweep(req)

    return app


app = create_app()
