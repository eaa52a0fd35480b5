"""HTTP/JSON endpoints over an annotation service.

Thin adapter: every route delegates to the service core and renders
failures as ``{"code": ..., "reason": ...}`` with a status code keyed by
the failure kind.  The service owns all state and persistence.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .service import AnnotationService, ExportSelector, SessionError

_STATUS_BY_CODE = {
    "unknown_session": 404,
    "malformed": 400,
}
_DEFAULT_STATUS = 409


def _error_response(error: SessionError) -> JSONResponse:
    status = _STATUS_BY_CODE.get(error.code, _DEFAULT_STATUS)
    return JSONResponse(
        status_code=status, content={"code": error.code, "reason": error.reason}
    )


def _csv_param(value: str | None) -> tuple[str, ...] | None:
    if value is None or value == "":
        return None
    return tuple(part for part in value.split(",") if part)


def create_app(service: AnnotationService) -> FastAPI:
    app = FastAPI(title="annotation-service", docs_url=None, redoc_url=None)

    @app.exception_handler(SessionError)
    async def on_session_error(request: Request, error: SessionError):
        return _error_response(error)

    @app.get("/session/{annotator_id}/next")
    def next_item(annotator_id: str):
        item = service.next_item(annotator_id)
        if item is None:
            return {"done": True}
        return item

    @app.post("/session/{annotator_id}/submit")
    async def submit(annotator_id: str, request: Request):
        payload = await request.json()
        if not isinstance(payload, dict):
            raise SessionError("malformed", "submission body must be a JSON object")
        return service.submit(annotator_id, payload)

    @app.post("/session/{annotator_id}/pause")
    def pause(annotator_id: str):
        state = service.pause(annotator_id)
        return {"paused": state.paused, "completed": state.completed, "total": state.total}

    @app.post("/session/{annotator_id}/resume")
    def resume(annotator_id: str):
        state = service.resume(annotator_id)
        return {"paused": state.paused, "completed": state.completed, "total": state.total}

    @app.get("/session/{annotator_id}/progress")
    def progress(annotator_id: str):
        state = service.state(annotator_id)
        return {
            "annotator_id": state.annotator_id,
            "completed": state.completed,
            "total": state.total,
            "paused": state.paused,
            "done": state.done,
        }

    @app.post("/session/{annotator_id}/survey")
    async def survey(annotator_id: str, request: Request):
        answers = await request.json()
        if not isinstance(answers, dict):
            raise SessionError("malformed", "survey body must be a JSON object")
        return service.submit_survey(annotator_id, answers)

    @app.get("/export")
    def export(
        mode: str | None = None,
        pass_label: str | None = None,
        annotator: str | None = None,
    ):
        selector = ExportSelector(
            modes=_csv_param(mode),
            passes=_csv_param(pass_label),
            annotators=_csv_param(annotator),
        )
        dataset, effort_csv = service.export(selector)
        return {"annotations_jsonl": dataset, "effort_csv": effort_csv}

    return app
