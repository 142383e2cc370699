"""FastAPI service wrapping the core package.

Handlers are plain functions over the pydantic schemas so the CLI can call
them in-process; the FastAPI app routes to the same functions. Training and
evaluation run synchronously (desk-scale workloads).
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import RunConfig
from ..datakit import SyntheticSceneConfig
from ..errors import TubegroundError
from ..metrics import EvalReport
from ..runner import decode_run, evaluate_run, generate_run, stats_run, train_run
from .schemas import (
    DecodeRequest,
    DecodeResponse,
    EvalReportModel,
    EvalRequest,
    EvalResponse,
    GenerateRequest,
    GenerateResponse,
    HealthResponse,
    StatsModel,
    StatsRequest,
    StatsResponse,
    TrainRequest,
    TrainResponse,
    TubeModel,
)


def _report_model(report: EvalReport) -> EvalReportModel:
    return EvalReportModel(
        sample_count=report.sample_count,
        m_tiou=report.m_tiou,
        m_viou=report.m_viou,
        viou_at_03=report.viou_at_03,
        viou_at_05=report.viou_at_05,
        by_query_type={k: _report_model(v) for k, v in report.by_query_type.items()},
    )


def handle_health() -> HealthResponse:
    return HealthResponse(version=__version__)


def handle_generate(req: GenerateRequest) -> GenerateResponse:
    scene = SyntheticSceneConfig(
        num_samples=req.num_samples,
        num_objects=req.num_objects,
        num_regions=req.num_regions,
        num_frames=req.num_frames,
        feature_dim=req.feature_dim,
        frame_feature_dim=req.frame_feature_dim,
        relation_fraction_range=(req.relation_fraction_min, req.relation_fraction_max),
        interrogative_fraction=req.interrogative_fraction,
    )
    result = generate_run(scene, req.seed, req.out_dir)
    return GenerateResponse(
        annotations_path=str(result.annotations_path),
        manifest_path=str(result.manifest_path),
        num_records=result.num_records,
        stats=StatsModel(**result.stats.to_dict()),
    )


def handle_train(req: TrainRequest) -> TrainResponse:
    result = train_run(req.config, req.annotations, req.features, req.out_dir)
    last = result.history[-1] if result.history else {}
    return TrainResponse(
        checkpoint_path=str(result.checkpoint_path),
        metrics_path=str(result.metrics_path),
        epochs_run=result.epochs_run,
        stopped_early=result.stopped_early,
        checkpoint_hash=result.final_hash,
        final_losses={k: v for k, v in last.items() if k.startswith("loss_")},
    )


def handle_eval(req: EvalRequest) -> EvalResponse:
    report = evaluate_run(
        req.checkpoint, req.annotations, req.features,
        decode=req.decode, split_by_query_type=req.split_by_query_type,
    )
    return EvalResponse(report=_report_model(report))


def handle_decode(req: DecodeRequest) -> DecodeResponse:
    predictions = decode_run(
        req.checkpoint, req.annotations, req.features, decode=req.decode, out_path=req.out_path
    )
    records_meta = [
        TubeModel(
            video_id=vid,
            t_start=p.t_start,
            t_end=p.t_end,
            region_indices=p.region_indices,
            boxes=p.boxes,
            energy=p.energy,
        )
        for vid, p in _with_video_ids(req, predictions)
    ]
    return DecodeResponse(predictions=records_meta, out_path=req.out_path)


def _with_video_ids(req: DecodeRequest, predictions):
    from ..datakit import load_annotations

    records = load_annotations(req.annotations)
    return [(r.video_id, p) for r, p in zip(records, predictions)]


def handle_stats(req: StatsRequest) -> StatsResponse:
    return StatsResponse(stats=StatsModel(**stats_run(req.annotations).to_dict()))


def create_app() -> FastAPI:
    app = FastAPI(title="tubeground", version=__version__)

    @app.exception_handler(TubegroundError)
    async def _domain_error(_: Request, exc: TubegroundError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(FileNotFoundError)
    async def _missing_file(_: Request, exc: FileNotFoundError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return handle_health()

    @app.post("/generate", response_model=GenerateResponse)
    def generate(req: GenerateRequest) -> GenerateResponse:
        return handle_generate(req)

    @app.post("/train", response_model=TrainResponse)
    def train(req: TrainRequest) -> TrainResponse:
        return handle_train(req)

    @app.post("/eval", response_model=EvalResponse)
    def evaluate(req: EvalRequest) -> EvalResponse:
        return handle_eval(req)

    @app.post("/decode", response_model=DecodeResponse)
    def decode(req: DecodeRequest) -> DecodeResponse:
        return handle_decode(req)

    @app.post("/stats", response_model=StatsResponse)
    def stats(req: StatsRequest) -> StatsResponse:
        return handle_stats(req)

    return app


app = create_app()
