"""Persistent personal library of saved stories.

Layout under the store root:

    next_id            counter file, monotonically increasing, never reused
    stories/<id>/      one directory per story
        story.json     canonical manifest (see domain.story_to_document)
        frame_<k>.*    input images
        chapter_<n>.png illustrations

Writes go to a temp directory first and are committed with a single atomic
rename, so a crash mid-save never leaves a listed-but-unreadable entry.
"""

from __future__ import annotations

import os
import shutil
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional

from .domain import (
    Story,
    document_from_json,
    document_to_json,
    story_from_document,
    story_to_document,
)


class StoreError(Exception):
    pass


class NotFound(StoreError):
    def __init__(self, story_id: int):
        super().__init__(f"no story with id {story_id}")
        self.story_id = story_id


@dataclass(frozen=True)
class LibraryEntry:
    id: int
    title: str
    created_at: str  # ISO-8601 UTC
    chapter_count: int
    thumbnail_ref: Optional[str] = None


class LibraryStore:
    """Single-user, file-backed story library."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.stories_dir = self.root / "stories"
        self.stories_dir.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()
        # Test seam: called between building the temp directory and the
        # commit rename. Crash-injection tests raise from here.
        self._pre_commit_hook: Callable[[], None] = lambda: None

    # -- id allocation ----------------------------------------------------

    def _next_id(self) -> int:
        counter = self.root / "next_id"
        current = int(counter.read_text()) if counter.exists() else 1
        tmp = self.root / "next_id.tmp"
        tmp.write_text(str(current + 1))
        os.replace(tmp, counter)
        return current

    # -- operations -------------------------------------------------------

    def save_story(self, story: Story) -> int:
        with self._write_lock:
            story_id = self._next_id()
            self._write_story_dir(story_id, story)
            return story_id

    def replace_story(self, story_id: int, story: Story) -> None:
        """Overwrite an existing entry in place, keeping its id."""
        with self._write_lock:
            if not self._story_dir(story_id).exists():
                raise NotFound(story_id)
            self._write_story_dir(story_id, story, replacing=True)

    def _write_story_dir(
        self, story_id: int, story: Story, replacing: bool = False
    ) -> None:
        final_dir = self._story_dir(story_id)
        tmp_dir = self.stories_dir / f".tmp-{story_id}"
        if tmp_dir.exists():
            shutil.rmtree(tmp_dir)
        tmp_dir.mkdir(parents=True)
        try:
            from dataclasses import replace as dc_replace

            doc = story_to_document(
                dc_replace(story, id=story_id),
                write_image=lambda ref, data: (tmp_dir / ref).write_bytes(data),
            )
            (tmp_dir / "story.json").write_text(
                document_to_json(doc), encoding="utf-8"
            )
            (tmp_dir / "created_at").write_text(
                datetime.now(timezone.utc).isoformat()
            )
            self._pre_commit_hook()
            if replacing:
                old = self.stories_dir / f".old-{story_id}"
                os.replace(final_dir, old)
                os.replace(tmp_dir, final_dir)
                shutil.rmtree(old)
            else:
                os.replace(tmp_dir, final_dir)
        except BaseException:
            if tmp_dir.exists():
                shutil.rmtree(tmp_dir, ignore_errors=True)
            raise

    def load_story(self, story_id: int) -> Story:
        story_dir = self._story_dir(story_id)
        manifest = story_dir / "story.json"
        if not manifest.exists():
            raise NotFound(story_id)
        doc = document_from_json(manifest.read_text(encoding="utf-8"))
        return story_from_document(
            doc,
            read_image=lambda ref: (
                (story_dir / ref).read_bytes()
                if (story_dir / ref).exists()
                else None
            ),
        )

    def list_stories(self) -> list[LibraryEntry]:
        entries = []
        for story_dir in self.stories_dir.iterdir():
            if not story_dir.is_dir() or story_dir.name.startswith("."):
                continue
            manifest = story_dir / "story.json"
            if not manifest.exists():
                continue
            doc = document_from_json(manifest.read_text(encoding="utf-8"))
            created = (story_dir / "created_at").read_text().strip()
            thumbnail = None
            for c in doc["chapters"]:
                ill = c.get("illustration")
                if ill and ill.get("image_ref"):
                    thumbnail = ill["image_ref"]
                    break
            entries.append(
                LibraryEntry(
                    id=int(story_dir.name),
                    title=doc["title"],
                    created_at=created,
                    chapter_count=len(doc["chapters"]),
                    thumbnail_ref=thumbnail,
                )
            )
        entries.sort(key=lambda e: (e.created_at, e.id), reverse=True)
        return entries

    def delete_story(self, story_id: int) -> None:
        with self._write_lock:
            story_dir = self._story_dir(story_id)
            if not story_dir.exists():
                raise NotFound(story_id)
            shutil.rmtree(story_dir)

    def image_path(self, story_id: int, ref: str) -> Path:
        path = (self._story_dir(story_id) / ref).resolve()
        if self._story_dir(story_id).resolve() not in path.parents:
            raise NotFound(story_id)
        return path

    def _story_dir(self, story_id: int) -> Path:
        return self.stories_dir / str(story_id)
