"""REST service exposing the pipeline and library.

Routes:
    POST /api/jobs                       multipart upload -> 202 {job_id}
    GET  /api/jobs/{id}                  job status + story-so-far
    POST /api/stories/{id}/regenerate    {target: chapter|illustration, chapter: n}
    POST /api/stories                    {job_id} -> save to library
    GET  /api/stories/{id}               saved story document
    GET  /api/library                    entries, newest first
    GET  /api/genres                     genre catalog for the UI dropdown
    GET  /media/...                      input frames and illustrations

Jobs run asynchronously; clients poll. Errors use one shape:
{"error": {"code", "message", "detail"?}}.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Form, Request, UploadFile
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .agents import make_suite
from .domain import (
    InputFrame,
    NarrativeKind,
    NarrativeRequest,
    Story,
    genre_catalog,
    sniff_media_type,
    story_to_document,
    validate_request,
)
from .pipeline import GenerationJob, PlotManager, UnknownChapter
from .store import LibraryStore, NotFound

MAX_UPLOAD_BYTES = 20 * 1024 * 1024


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, detail=None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail

    def response(self) -> JSONResponse:
        body = {"error": {"code": self.code, "message": self.message}}
        if self.detail is not None:
            body["error"]["detail"] = self.detail
        return JSONResponse(status_code=self.status, content=body)


class ServiceState:
    def __init__(self, data_dir: Path, manager: PlotManager):
        self.manager = manager
        self.store = LibraryStore(data_dir / "library")
        self.jobs_dir = data_dir / "jobs"
        self.jobs_dir.mkdir(parents=True, exist_ok=True)
        self.jobs: dict[str, GenerationJob] = {}
        self.jobs_lock = threading.Lock()
        self.regen_locks: dict[str, threading.Lock] = {}
        self.regen_guard = threading.Lock()

    def regen_lock(self, key: str) -> threading.Lock:
        with self.regen_guard:
            return self.regen_locks.setdefault(key, threading.Lock())


def create_app(
    data_dir: Path | str | None = None,
    manager: PlotManager | None = None,
    run_jobs_inline: bool = False,
    api_token: str | None = None,
    static_dir: Path | str | None = None,
) -> FastAPI:
    """Build the application.

    ``run_jobs_inline`` executes jobs synchronously inside the request,
    which keeps tests deterministic; the real server runs them in threads.
    """
    data_dir = Path(data_dir or os.environ.get("IMAGETELLER_DATA", "./data"))
    data_dir.mkdir(parents=True, exist_ok=True)
    manager = manager or PlotManager(make_suite())
    api_token = api_token or os.environ.get("IMAGETELLER_API_TOKEN")
    state = ServiceState(data_dir, manager)

    app = FastAPI(title="imageteller")
    app.state.service = state

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return exc.response()

    @app.exception_handler(Exception)
    async def handle_unexpected(request: Request, exc: Exception):
        return ApiError(500, "Internal", "internal error").response()

    @app.middleware("http")
    async def check_token(request: Request, call_next):
        if api_token and request.url.path.startswith("/api/"):
            header = request.headers.get("authorization", "")
            if header != f"Bearer {api_token}":
                return ApiError(401, "Unauthorized", "missing or bad token").response()
        return await call_next(request)

    # -- helpers ----------------------------------------------------------

    def job_or_404(job_id: str) -> GenerationJob:
        job = state.jobs.get(job_id)
        if job is None:
            raise ApiError(404, "NotFound", f"no job {job_id}")
        return job

    def job_media_dir(job_id: str) -> Path:
        d = state.jobs_dir / job_id
        d.mkdir(parents=True, exist_ok=True)
        return d

    def job_story_doc(job: GenerationJob) -> dict:
        media = job_media_dir(job.id)
        doc = story_to_document(
            job.story, write_image=lambda ref, data: (media / ref).write_bytes(data)
        )
        return _with_media_urls(doc, f"/media/jobs/{job.id}")

    def saved_story_doc(story_id: int, story: Story) -> dict:
        doc = story_to_document(story)
        return _with_media_urls(doc, f"/media/stories/{story_id}")

    def _with_media_urls(doc: dict, base: str) -> dict:
        doc = json.loads(json.dumps(doc))  # deep copy
        for c in doc["chapters"]:
            ill = c.get("illustration")
            if ill and ill.get("image_ref"):
                ill["image_ref"] = f"{base}/{ill['image_ref']}"
        if doc.get("request"):
            for f in doc["request"]["frames"]:
                if f.get("image_ref"):
                    f["image_ref"] = f"{base}/{f['image_ref']}"
        return doc

    # -- pipeline endpoints ----------------------------------------------

    @app.post("/api/jobs", status_code=202)
    async def create_job(
        frames: list[UploadFile],
        kind: str = Form("story"),
        genre: Optional[str] = Form(None),
        captions: Optional[str] = Form(None),
    ):
        caption_list: list[Optional[str]] = []
        if captions:
            try:
                caption_list = json.loads(captions)
            except ValueError:
                raise ApiError(400, "ValidationFailed", "captions must be JSON")
            if not isinstance(caption_list, list):
                raise ApiError(400, "ValidationFailed", "captions must be a JSON array")

        input_frames = []
        total = 0
        for i, upload in enumerate(frames):
            data = await upload.read()
            total += len(data)
            if total > MAX_UPLOAD_BYTES:
                raise ApiError(413, "PayloadTooLarge", "upload exceeds 20 MB")
            caption = caption_list[i] if i < len(caption_list) else None
            media_type = sniff_media_type(data) or "png"
            input_frames.append(
                InputFrame(
                    index=i + 1,
                    image_data=data,
                    media_type=media_type,
                    caption=caption or None,
                )
            )

        narrative_kind = _parse_kind(kind, genre)
        request_obj = NarrativeRequest(frames=tuple(input_frames), kind=narrative_kind)
        result = validate_request(request_obj)
        if not result.ok:
            raise ApiError(
                400,
                "ValidationFailed",
                "invalid request",
                detail=[
                    {
                        "code": i.code,
                        "message": i.message,
                        "frame_index": i.frame_index,
                    }
                    for i in result.issues
                ],
            )

        job = GenerationJob(id=os.urandom(8).hex(), request=request_obj)
        with state.jobs_lock:
            state.jobs[job.id] = job
        if run_jobs_inline:
            state.manager.run_job(job)
        else:
            threading.Thread(
                target=state.manager.run_job, args=(job,), daemon=True
            ).start()
        return {"job_id": job.id}

    def _parse_kind(kind: str, genre: Optional[str]) -> NarrativeKind:
        catalog = genre_catalog()
        if genre:
            for entry in catalog.entries:
                if entry.name == genre:
                    if entry.data_driven:
                        return NarrativeKind.data_driven()
                    return NarrativeKind.story_with_genre(catalog.genre(genre))
            raise ApiError(
                400,
                "ValidationFailed",
                f"unknown genre {genre!r}",
                detail={"valid_genres": [e.name for e in catalog.entries]},
            )
        if kind in ("data", "data_driven"):
            return NarrativeKind.data_driven()
        return NarrativeKind.story_free()

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        job = job_or_404(job_id)
        body = job.snapshot()
        if job.story is not None and job.state in ("Illustrating", "Done"):
            body["story"] = job_story_doc(job)
        return body

    @app.post("/api/stories/{story_id}/regenerate")
    def regenerate(story_id: str, payload: dict):
        target = payload.get("target")
        if target not in ("chapter", "illustration"):
            raise ApiError(400, "ValidationFailed", "target must be chapter or illustration")
        try:
            chapter = int(payload.get("chapter"))
        except (TypeError, ValueError):
            raise ApiError(400, "ValidationFailed", "chapter must be an integer")

        job = state.jobs.get(story_id)
        saved_id: Optional[int] = None
        if job is None:
            try:
                saved_id = int(story_id)
            except ValueError:
                raise ApiError(404, "NotFound", f"no story {story_id}")

        lock = state.regen_lock(story_id)
        if not lock.acquire(blocking=False):
            raise ApiError(409, "RegenerationInProgress", "a regeneration for this story is already running")
        try:
            if job is not None:
                if job.story is None:
                    raise ApiError(409, "NotReady", "job has no story yet")
                job.story = _regenerate(job.story, target, chapter)
                return {"story": job_story_doc(job)}
            try:
                story = state.store.load_story(saved_id)
            except NotFound:
                raise ApiError(404, "NotFound", f"no story {story_id}")
            story = _regenerate(story, target, chapter)
            state.store.replace_story(saved_id, story)
            return {"story": saved_story_doc(saved_id, story)}
        finally:
            lock.release()

    def _regenerate(story: Story, target: str, chapter: int) -> Story:
        try:
            if target == "chapter":
                return state.manager.regenerate_chapter(story, chapter)
            return state.manager.regenerate_illustration(story, chapter)
        except UnknownChapter:
            raise ApiError(404, "NotFound", f"no chapter {chapter}")

    # -- library endpoints -------------------------------------------------

    @app.post("/api/stories", status_code=201)
    def save_story(payload: dict):
        job_id = payload.get("job_id")
        if not job_id:
            raise ApiError(400, "ValidationFailed", "job_id is required")
        job = job_or_404(job_id)
        if job.story is None:
            raise ApiError(409, "NotReady", "job has no story to save")
        story_id = state.store.save_story(job.story)
        return {"id": story_id}

    @app.get("/api/stories/{story_id}")
    def get_story(story_id: int):
        try:
            story = state.store.load_story(story_id)
        except NotFound:
            raise ApiError(404, "NotFound", f"no story {story_id}")
        return {"story": saved_story_doc(story_id, story)}

    @app.delete("/api/stories/{story_id}")
    def delete_story(story_id: int):
        try:
            state.store.delete_story(story_id)
        except NotFound:
            raise ApiError(404, "NotFound", f"no story {story_id}")
        return {"deleted": story_id}

    @app.get("/api/library")
    def list_library():
        return {
            "entries": [
                {
                    "id": e.id,
                    "title": e.title,
                    "created_at": e.created_at,
                    "chapter_count": e.chapter_count,
                    "thumbnail_ref": (
                        f"/media/stories/{e.id}/{e.thumbnail_ref}"
                        if e.thumbnail_ref
                        else None
                    ),
                }
                for e in state.store.list_stories()
            ]
        }

    @app.get("/api/genres")
    def list_genres():
        return {
            "genres": [
                {
                    "name": e.name,
                    "description": e.description,
                    "data_driven": e.data_driven,
                }
                for e in genre_catalog().entries
            ]
        }

    # -- media -------------------------------------------------------------

    @app.get("/media/jobs/{job_id}/{ref}")
    def job_media(job_id: str, ref: str):
        path = (state.jobs_dir / job_id / ref).resolve()
        if state.jobs_dir.resolve() not in path.parents or not path.is_file():
            raise ApiError(404, "NotFound", "no such media file")
        return FileResponse(path)

    @app.get("/media/stories/{story_id}/{ref}")
    def story_media(story_id: int, ref: str):
        try:
            path = state.store.image_path(story_id, ref)
        except NotFound:
            raise ApiError(404, "NotFound", "no such media file")
        if not path.is_file():
            raise ApiError(404, "NotFound", "no such media file")
        return FileResponse(path)

    static_dir = static_dir or os.environ.get("IMAGETELLER_STATIC")
    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def main() -> None:  # pragma: no cover - thin launcher
    import uvicorn

    uvicorn.run(create_app(), host="127.0.0.1", port=8000)


if __name__ == "__main__":  # pragma: no cover
    main()
