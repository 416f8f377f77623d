"""FastAPI application wrapping the encode/decode/benchmark core."""

from __future__ import annotations

import math

from fastapi import FastAPI, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..bench import (
    render_nme_csv,
    render_nme_text,
    render_sweep_csv,
    render_sweep_text,
    render_timing_csv,
    render_timing_text,
    run_bench,
    run_sweep,
)
from ..core import Coordinate, EncodingConfig, EncodingMode, LandmarkSet, Space, encode
from ..decode import DecodeConfig, Decoder, decode, to_image_space
from ..errors import HeatpointError, InvalidConfigError, InvalidInputError
from ..hmap_io import (
    AnnotationRecord,
    hmap_from_bytes,
    hmap_to_bytes,
    parse_records,
    records_to_obj,
)
from ..metrics import evaluate_records
from .schemas import (
    BenchCellOut,
    BenchRequest,
    BenchResponse,
    DecodeResponse,
    EncodeRequest,
    EvalRequest,
    EvalResponse,
    SweepCellOut,
    SweepRequest,
    SweepResponse,
)


def _decode_config(
    decoder: str,
    kernel_size: int,
    anchor_count: int,
    sigma: float,
    smoothing: bool,
    value_floor: float,
    toward_second: bool,
) -> DecodeConfig:
    try:
        scheme = Decoder(decoder)
    except ValueError:
        raise InvalidConfigError(
            f"unknown decoder {decoder!r}; expected one of {[d.value for d in Decoder]}"
        ) from None
    return DecodeConfig(
        decoder=scheme,
        kernel_size=kernel_size,
        anchor_count=anchor_count,
        sigma=sigma,
        smoothing=smoothing,
        value_floor=value_floor,
        two_hot_toward_second=toward_second,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="heatpoint", version=__version__)

    @app.exception_handler(HeatpointError)
    async def on_heatpoint_error(request: Request, exc: HeatpointError):
        status = 500 if exc.exit_code == 3 else 400
        return JSONResponse(
            status_code=status,
            content={
                "kind": exc.name,
                "exit_code": exc.exit_code,
                "detail": str(exc),
                "offset": getattr(exc, "offset", None),
            },
        )

    @app.exception_handler(RequestValidationError)
    async def on_request_validation(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={
                "kind": "request-validation",
                "exit_code": 1,
                "detail": "; ".join(
                    f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors()
                ),
                "offset": None,
            },
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/bench", response_model=BenchResponse)
    def bench(req: BenchRequest) -> BenchResponse:
        result = run_bench(req.to_config())
        return BenchResponse(
            nme_text=render_nme_text(result),
            nme_csv=render_nme_csv(result),
            timing_text=render_timing_text(result),
            timing_csv=render_timing_csv(result),
            cells=[
                BenchCellOut(
                    decoder=c.decoder.value,
                    resolution=c.resolution,
                    nme=c.report.nme_mean,
                    failures=c.report.failures,
                    samples=c.report.n_samples,
                    mean_decode_us=c.mean_decode_us,
                )
                for c in result.cells
            ],
            wall_time=result.wall_time,
        )

    @app.post("/sweep-anchors", response_model=SweepResponse)
    def sweep_anchors(req: SweepRequest) -> SweepResponse:
        result = run_sweep(req.to_config())
        return SweepResponse(
            text=render_sweep_text(result),
            csv=render_sweep_csv(result),
            cells=[
                SweepCellOut(kernel=k, resolution=r, nme=result.value(k, r))
                for k in result.kernels
                for r in result.resolutions
            ],
            wall_time=result.wall_time,
        )

    @app.post("/encode")
    def encode_records(req: EncodeRequest) -> Response:
        records = parse_records(req.records)
        if len(records) > 1:
            raise InvalidInputError(
                f"one heatmap container carries one record's landmarks; got {len(records)} records"
            )
        config = EncodingConfig(
            downsample=req.downsample,
            sigma=req.sigma,
            mode=EncodingMode(req.mode),
            amplitude=req.amplitude,
        )
        maps = []
        if records:
            maps = [
                encode(point, config, req.width, req.height, landmark_index=i)
                for i, point in enumerate(records[0].landmarks.landmarks)
            ]
        return Response(content=hmap_to_bytes(maps), media_type="application/octet-stream")

    @app.post("/decode", response_model=DecodeResponse)
    async def decode_container(
        request: Request,
        decoder: str = Query(default=Decoder.MULTILATERATION.value),
        downsample: float | None = Query(default=None),
        sigma: float = Query(default=1.5),
        kernel_size: int = Query(default=2),
        anchor_count: int = Query(default=4),
        smoothing: bool = Query(default=False),
        value_floor: float = Query(default=1e-9),
        toward_second: bool = Query(default=True),
        image_side: float = Query(default=256.0),
        record_id: str = Query(default="decoded"),
    ) -> DecodeResponse:
        config = _decode_config(
            decoder, kernel_size, anchor_count, sigma, smoothing, value_floor, toward_second
        )
        maps = hmap_from_bytes(await request.body())
        if maps and downsample is None:
            downsample = image_side / maps[0].width
        points: list[Coordinate] = []
        flags: list[str | None] = []
        for h in maps:
            try:
                result = decode(h, config)
            except HeatpointError as exc:
                if exc.exit_code != 3:
                    raise
                points.append(Coordinate(0.0, 0.0, Space.IMAGE))
                flags.append("failed")
                continue
            points.append(to_image_space(result, downsample))
            flags.append(result.fallback)
        record = AnnotationRecord(
            id=record_id,
            landmarks=LandmarkSet(tuple(points)),
            flags=tuple(flags) if any(f is not None for f in flags) else None,
        )
        return DecodeResponse(records=records_to_obj([record]))

    @app.post("/eval", response_model=EvalResponse)
    def evaluate(req: EvalRequest) -> EvalResponse:
        report = evaluate_records(
            parse_records(req.gt),
            parse_records(req.predictions),
            req.normalization.to_config(),
            image_size=req.image_size,
            heatmap_width=req.heatmap_width,
        )
        return EvalResponse(
            nme_mean=report.nme_mean,
            nme_per_landmark=[
                None if math.isnan(v) else v for v in report.nme_per_landmark
            ],
            failures=report.failures,
            n_samples=report.n_samples,
            wall_time=report.wall_time,
        )

    return app


app = create_app()
