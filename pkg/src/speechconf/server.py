"""HTTP backend for the annotation UI.

Append-only JSONL label store behind a lock; reads resolve duplicates
latest-timestamp-wins. The service never mutates the manifest or audio.
"""

from __future__ import annotations

import threading
import time
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from speechconf.annotation import (
    VALUE_CODES,
    AnnotationRecord,
    append_annotation_jsonl,
    build_rater_matrix,
    matrix_csv_text,
    read_annotations_jsonl,
)
from speechconf.config import DatasetManifest


def create_app(manifest: DatasetManifest, annotations_path: str | Path,
               static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="speechconf annotation API")
    annotations_path = Path(annotations_path)
    annotations_path.parent.mkdir(parents=True, exist_ok=True)
    if not annotations_path.exists():
        annotations_path.touch()
    clips = {c.id: c for c in manifest.clips if c.split_role == "labelled"}
    write_lock = threading.Lock()

    def load_records() -> list[AnnotationRecord]:
        with write_lock:
            return read_annotations_jsonl(annotations_path)

    @app.get("/api/clips")
    def list_clips():
        records = load_records()
        done: dict[str, set[str]] = {cid: set() for cid in clips}
        for rec in records:
            if rec.clip_id in done:
                done[rec.clip_id].add(rec.rater_id)
        return {
            "clips": [
                {"id": cid, "rated_by": sorted(done[cid])} for cid in sorted(clips)
            ]
        }

    @app.get("/api/clips/{clip_id}/audio")
    def clip_audio(clip_id: str):
        clip = clips.get(clip_id)
        if clip is None:
            return JSONResponse({"error": f"unknown clip {clip_id!r}"}, status_code=404)
        try:
            data = Path(clip.path).read_bytes()
        except OSError:
            return JSONResponse({"error": f"audio for {clip_id!r} unavailable"}, status_code=404)
        return Response(content=data, media_type="audio/wav")

    @app.get("/api/next")
    def next_clip(rater: str = ""):
        if not rater:
            return JSONResponse({"error": "missing rater parameter"}, status_code=400)
        records = load_records()
        counts: dict[str, int] = {cid: 0 for cid in clips}
        rated_by_me: set[str] = set()
        for rec in records:
            if rec.clip_id in counts:
                counts[rec.clip_id] += 1
                if rec.rater_id == rater:
                    rated_by_me.add(rec.clip_id)
        candidates = [cid for cid in clips if cid not in rated_by_me]
        if not candidates:
            return {"clip_id": None, "done": True}
        # least-annotated first, ties resolved by id
        best = min(candidates, key=lambda cid: (counts[cid], cid))
        return {"clip_id": best, "done": False}

    @app.post("/api/labels")
    async def post_label(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "malformed JSON body"}, status_code=409)
        if not isinstance(body, dict) or not {"clip_id", "rater_id", "value"} <= set(body):
            return JSONResponse(
                {"error": "body must carry clip_id, rater_id, value"}, status_code=409
            )
        clip_id, rater_id, value = body["clip_id"], body["rater_id"], body["value"]
        if value not in VALUE_CODES:
            return JSONResponse(
                {"error": f"invalid value {value!r}; use low|medium|high|not_clear"},
                status_code=400,
            )
        if clip_id not in clips:
            return JSONResponse({"error": f"unknown clip {clip_id!r}"}, status_code=404)
        with write_lock:
            rec = AnnotationRecord(clip_id, str(rater_id), value, time.time())
            append_annotation_jsonl(annotations_path, rec)
        return JSONResponse({"status": "recorded"}, status_code=201)

    @app.get("/api/progress")
    def progress():
        records = load_records()
        latest: dict[tuple[str, str], AnnotationRecord] = {}
        for rec in records:
            if rec.clip_id in clips:
                latest[(rec.clip_id, rec.rater_id)] = rec
        counts: dict[str, int] = {}
        for (_, rater), _rec in latest.items():
            counts[rater] = counts.get(rater, 0) + 1
        return {"total_clips": len(clips), "per_rater": counts}

    @app.get("/api/export")
    def export_matrix():
        records = [r for r in load_records() if r.clip_id in clips]
        return Response(content=matrix_csv_text(build_rater_matrix(records)),
                        media_type="text/csv")

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def serve(manifest: DatasetManifest, annotations_path: str | Path,
          host: str = "127.0.0.1", port: int = 8765,
          static_dir: str | Path | None = None) -> None:
    import uvicorn

    app = create_app(manifest, annotations_path, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
