"""FastAPI application implementing the remote scoring protocol.

Routes: POST /score with {"prefix": [int...], "candidates": [[int...]...]}
returning {"logprobs": [float...]} (natural log); GET /info with the model
metadata; GET /tokenizer with the vocab/merges payload the scorer was
built from, so clients provably share the same tokenizer.

Errors: 400 for a malformed request, 422 for token ids out of range, 503
when no scorer is loaded. Model execution is serialized; the HTTP layer
queues concurrent requests.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel


class ScoreRequest(BaseModel):
    prefix: list[int]
    candidates: list[list[int]]


def create_app(scorer=None, tokenizer_payload=None) -> FastAPI:
    app = FastAPI(title="tokmarg score bridge")
    app.state.scorer = scorer
    app.state.tokenizer_payload = tokenizer_payload
    app.state.lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": "malformed request", "detail": exc.errors()},
        )

    def require_scorer():
        if app.state.scorer is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return app.state.scorer

    @app.get("/info")
    def info():
        scorer = require_scorer()
        return {
            "vocab_size": scorer.vocab_size,
            "context_limit": scorer.context_limit,
            "model_name": scorer.model_name,
            "bos_token_id": scorer.bos_token_id,
        }

    @app.get("/tokenizer")
    def tokenizer():
        require_scorer()
        if app.state.tokenizer_payload is None:
            raise HTTPException(status_code=404, detail="no tokenizer configured")
        return app.state.tokenizer_payload

    @app.post("/score")
    def score(request: ScoreRequest):
        scorer = require_scorer()
        if not request.candidates or any(
            len(c) == 0 for c in request.candidates
        ):
            raise HTTPException(
                status_code=400, detail="candidates must be non-empty"
            )
        try:
            with app.state.lock:
                logprobs = scorer.score(request.prefix, request.candidates)
        except IndexError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"logprobs": logprobs}

    return app
