"""Local HTTP service exposing the engine to the interactive UI.

Privacy posture: the service binds to loopback by default, initiates no
outbound network connections, holds no per-user state, and writes no
trajectory data to disk. The model and vocabulary are loaded once at startup
and shared read-only across requests; every request carries everything needed
to answer it, so identical requests produce byte-identical responses.

Endpoints:
    GET  /health        liveness plus model/vocabulary facts
    GET  /vocab         token list, optional ?filter= substring match
    POST /generate      {events, params, n_samples} -> sampled trajectories
    POST /risk          {events, targets, horizon_age_years, params, n_samples}
    POST /distribution  {events, top_k} -> next-event probabilities

Status codes: 400 invalid request, 404 unknown route, 413 body too large,
422 unknown vocabulary code, 500 internal.
"""

from __future__ import annotations

import logging
import secrets
import threading
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
from starlette.exceptions import HTTPException as StarletteHTTPException

from .generation import (
    GenerationError,
    GenerationParams,
    encode_for_model,
    generate_samples,
    risk_from_samples,
    trajectory_from_doc,
    trajectory_to_doc,
)
from .model import WeightsArchive, get_logits, load_weights
from .sampling import derive_seed, next_event_distribution
from .vocabulary import UnknownCodeError, Vocabulary, load_vocabulary

log = logging.getLogger("trajgen.service")

LOOPBACK_HOSTS = {"127.0.0.1", "::1", "localhost"}


@dataclass
class ServiceConfig:
    model_path: str
    vocab_path: str
    host: str = "127.0.0.1"
    port: int = 8080
    max_samples_per_request: int = 1000
    max_body_bytes: int = 1_000_000
    mc_workers: int = 4


class EventIn(BaseModel):
    code: str
    age_years: float


class ParamsIn(BaseModel):
    seed: Optional[int] = None
    max_age_years: float = 85.0
    max_steps: int = Field(default=256, ge=1)


class GenerateIn(BaseModel):
    events: list[EventIn]
    params: ParamsIn = ParamsIn()
    n_samples: int = Field(default=100, ge=1)


class RiskIn(BaseModel):
    events: list[EventIn]
    targets: list[str]
    horizon_age_years: float
    params: ParamsIn = ParamsIn()
    n_samples: int = Field(default=200, ge=1)


class DistributionIn(BaseModel):
    events: list[EventIn]
    top_k: int = Field(default=10, ge=1)


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(
    archive: WeightsArchive,
    vocab: Vocabulary,
    max_samples_per_request: int = 1000,
    max_body_bytes: int = 1_000_000,
    mc_workers: int = 4,
) -> FastAPI:
    """Build the service around an already-loaded engine."""
    app = FastAPI(title="trajgen", docs_url=None, redoc_url=None, openapi_url=None)
    # the UI is served as static files from another local origin; the service
    # itself holds no user state, so a permissive CORS policy is safe here
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["content-type"],
    )
    # bounded pool: caps concurrent Monte Carlo work across requests
    mc_gate = threading.Semaphore(max(1, mc_workers))

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return _error(400, f"invalid request: {exc.errors()[0]['msg']}")

    @app.exception_handler(StarletteHTTPException)
    async def on_http_error(request: Request, exc: StarletteHTTPException):
        return _error(exc.status_code, str(exc.detail))

    @app.exception_handler(Exception)
    async def on_internal_error(request: Request, exc: Exception):
        log.error("internal error on %s: %s", request.url.path, exc)
        return _error(500, "internal error")

    @app.middleware("http")
    async def limit_body_and_log(request: Request, call_next):
        declared = request.headers.get("content-length")
        if declared is not None and declared.isdigit():
            if int(declared) > max_body_bytes:
                return _error(413, f"request body exceeds {max_body_bytes} bytes")
        start = time.perf_counter()
        response = await call_next(request)
        log.info(
            "%s %s -> %d in %.1fms",
            request.method,
            request.url.path,
            response.status_code,
            (time.perf_counter() - start) * 1e3,
        )
        return response

    def parse_events(events: list[EventIn]):
        doc = [{"code": e.code, "age_years": e.age_years} for e in events]
        return trajectory_from_doc(doc, vocab)

    def resolve_seed(p: ParamsIn) -> int:
        # client seeds are echoed; otherwise one is generated and echoed so
        # any response can be reproduced. Generated seeds stay within the
        # 53-bit JSON-safe integer range so browser clients echo them exactly.
        return p.seed if p.seed is not None else secrets.randbits(53)

    @app.get("/health")
    def health():
        cfg = archive.config
        return {
            "status": "ok",
            "model": {
                "n_layer": cfg.n_layer,
                "n_head": cfg.n_head,
                "n_embd": cfg.n_embd,
                "max_seq": cfg.max_seq,
                "age_scale": cfg.age_scale,
            },
            "vocab_size": len(vocab),
        }

    @app.get("/vocab")
    def vocab_listing(filter: Optional[str] = None):
        tokens = list(vocab)
        if filter:
            needle = filter.upper()
            tokens = [
                t
                for t in tokens
                if needle in t.code.upper() or needle in t.label.upper()
            ]
        return {
            "vocab_size": len(vocab),
            "tokens": [
                {"id": t.id, "code": t.code, "label": t.label, "kind": t.kind.value}
                for t in tokens
            ],
        }

    @app.post("/generate")
    def generate(body: GenerateIn):
        if body.n_samples > max_samples_per_request:
            return _error(
                400,
                f"n_samples {body.n_samples} exceeds limit {max_samples_per_request}",
            )
        try:
            traj = parse_events(body.events)
            seed = resolve_seed(body.params)
            params = GenerationParams(
                seed=seed,
                max_age_years=body.params.max_age_years,
                max_steps=body.params.max_steps,
            )
            with mc_gate:
                samples = generate_samples(traj, params, body.n_samples, archive, vocab)
        except UnknownCodeError as exc:
            return _error(422, str(exc))
        except GenerationError as exc:
            return _error(400, str(exc))
        return {
            "seed": seed,
            "n_samples": body.n_samples,
            "samples": [
                trajectory_to_doc(
                    s, vocab, n_input_events=len(traj), seed=derive_seed(seed, k)
                )
                for k, s in enumerate(samples)
            ],
        }

    @app.post("/risk")
    def risk(body: RiskIn):
        if body.n_samples > max_samples_per_request:
            return _error(
                400,
                f"n_samples {body.n_samples} exceeds limit {max_samples_per_request}",
            )
        try:
            traj = parse_events(body.events)
            if not body.targets:
                return _error(400, "targets must be non-empty")
            target_ids = {vocab.encode(c) for c in body.targets}
            if body.horizon_age_years <= traj.last_age():
                return _error(400, "horizon_age_years must exceed the last input age")
            seed = resolve_seed(body.params)
            params = GenerationParams(
                seed=seed,
                max_age_years=body.params.max_age_years,
                max_steps=body.params.max_steps,
            )
            with mc_gate:
                samples = generate_samples(traj, params, body.n_samples, archive, vocab)
            estimates = risk_from_samples(samples, target_ids, body.horizon_age_years)
        except UnknownCodeError as exc:
            return _error(422, str(exc))
        except GenerationError as exc:
            return _error(400, str(exc))
        return {
            "seed": seed,
            "horizon_age_years": body.horizon_age_years,
            "n_samples": body.n_samples,
            "estimates": [
                {
                    "code": vocab.decode(e.target).code,
                    "label": vocab.decode(e.target).label,
                    "probability": e.probability,
                    "std_error": e.std_error,
                }
                for e in estimates
            ],
        }

    @app.post("/distribution")
    def distribution(body: DistributionIn):
        try:
            traj = parse_events(body.events)
            seq, _ = encode_for_model(traj, vocab, archive.config.max_seq)
            logits = get_logits(seq, archive).astype(np.float64)
            probs = next_event_distribution(logits, mask=vocab.padding_ids)
        except UnknownCodeError as exc:
            return _error(422, str(exc))
        except GenerationError as exc:
            return _error(400, str(exc))
        order = [
            int(i)
            for i in np.argsort(-probs, kind="stable")
            if int(i) not in vocab.padding_ids
        ][: body.top_k]
        return {
            "entries": [
                {
                    "code": vocab.decode(i).code,
                    "label": vocab.decode(i).label,
                    "probability": float(probs[i]),
                }
                for i in order
            ],
        }

    return app


def load_engine(config: ServiceConfig) -> tuple[WeightsArchive, Vocabulary]:
    archive = load_weights(config.model_path)
    with open(config.vocab_path, "rb") as fh:
        vocab = load_vocabulary(fh)
    if archive.config.vocab_size != len(vocab):
        raise GenerationError(
            f"model vocab_size {archive.config.vocab_size} does not match "
            f"vocabulary size {len(vocab)}"
        )
    return archive, vocab


def serve(config: ServiceConfig, allow_remote: bool = False) -> None:
    """Load the engine and run the service until interrupted."""
    import uvicorn

    if config.host not in LOOPBACK_HOSTS and not allow_remote:
        raise ValueError(
            f"refusing to bind non-loopback address {config.host!r}; "
            "pass --allow-remote to override"
        )
    archive, vocab = load_engine(config)
    app = create_app(
        archive,
        vocab,
        max_samples_per_request=config.max_samples_per_request,
        max_body_bytes=config.max_body_bytes,
        mc_workers=config.mc_workers,
    )
    log.info("serving on %s:%d", config.host, config.port)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
