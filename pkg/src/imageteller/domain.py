"""Core data model shared by every subsystem.

All values are frozen dataclasses: once constructed they are immutable and
safe to share between threads. The canonical on-disk story document format
(JSON manifest + sidecar image files) also lives here, so the library store,
the CLI manifest and the REST API all speak the same schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

MAX_FRAMES_DEFAULT = 10
MAX_CAPTION_CHARS = 500

# Magic-number signatures for the accepted image formats.
_SIGNATURES = {
    "png": (b"\x89PNG\r\n\x1a\n",),
    "jpeg": (b"\xff\xd8\xff",),
    "webp": (b"RIFF",),  # plus "WEBP" at offset 8, checked below
}

MEDIA_EXTENSIONS = {"png": "png", "jpeg": "jpg", "webp": "webp"}


class DomainError(Exception):
    """Base class for domain-level failures."""


@dataclass(frozen=True)
class InputFrame:
    """One ordered input image plus its optional user caption."""

    index: int
    image_data: bytes
    media_type: str
    caption: Optional[str] = None

    def __post_init__(self) -> None:
        if self.index < 1:
            raise DomainError(f"frame index must be >= 1, got {self.index}")
        if self.media_type not in _SIGNATURES:
            raise DomainError(f"unsupported media type: {self.media_type!r}")


def matches_signature(data: bytes, media_type: str) -> bool:
    """Check that raw bytes carry the magic number of the declared format."""
    sigs = _SIGNATURES.get(media_type)
    if not sigs or not data:
        return False
    if not any(data.startswith(s) for s in sigs):
        return False
    if media_type == "webp":
        return len(data) >= 12 and data[8:12] == b"WEBP"
    return True


def sniff_media_type(data: bytes) -> Optional[str]:
    """Return the media type implied by the byte signature, if any."""
    for media_type in _SIGNATURES:
        if matches_signature(data, media_type):
            return media_type
    return None


@dataclass(frozen=True)
class Genre:
    name: str
    description: str

    def __post_init__(self) -> None:
        if not self.name or not self.description:
            raise DomainError("genre name and description must be non-empty")


#: The UI-facing pseudo-genre that routes to data-driven composition. It sits
#: in the catalog for the genre dropdown but is a narrative kind, not a Genre.
DATA_STORYTELLING_NAME = "Data Storytelling"

_FUNDAMENTAL_GENRES = (
    Genre(
        "Comedy",
        "The world is just and strict but finally becomes more free and "
        "desirable. The protagonist is initially hilariously vain, "
        "self-important and aspiring, but at the end conforms to the "
        "world's norms.",
    ),
    Genre(
        "Romance",
        "The world is just but momentarily disturbed by the occurrence of a "
        "villainy. The protagonist performs a heroic adventurous quest.",
    ),
    Genre(
        "Tragedy",
        "The world is just but governed by fate and unforgiving. The "
        "protagonist misbehaves and finally succumbs and dies.",
    ),
    Genre(
        "Satire",
        "The world is not just, it is dystopian, grotesque and absurd. The "
        "protagonist is helpless.",
    ),
    Genre(
        "Mystery",
        "The world is just but has unknown or unexplained or fantastic "
        "elements. The protagonist makes a discovery.",
    ),
)


@dataclass(frozen=True)
class CatalogEntry:
    """One row of the genre dropdown: a real genre or the data pseudo-genre."""

    name: str
    description: str
    data_driven: bool = False


@dataclass(frozen=True)
class GenreCatalog:
    entries: tuple[CatalogEntry, ...]

    def genre(self, name: str) -> Genre:
        """Look up one of the five fundamental genres by name."""
        for g in _FUNDAMENTAL_GENRES:
            if g.name == name:
                return g
        raise KeyError(name)

    def genre_names(self) -> list[str]:
        return [g.name for g in _FUNDAMENTAL_GENRES]


_CATALOG = GenreCatalog(
    entries=tuple(
        [CatalogEntry(g.name, g.description) for g in _FUNDAMENTAL_GENRES]
        + [
            CatalogEntry(
                DATA_STORYTELLING_NAME,
                "A narrative built around the insights carried by charts, "
                "graphs and other data visualizations.",
                data_driven=True,
            )
        ]
    )
)


def genre_catalog() -> GenreCatalog:
    """The canonical catalog: five fundamental genres plus Data Storytelling."""
    return _CATALOG


@dataclass(frozen=True)
class NarrativeKind:
    """Which of the three composition paths a request follows."""

    variant: str  # "story_genre" | "story_free" | "data_driven"
    genre: Optional[Genre] = None

    def __post_init__(self) -> None:
        if self.variant not in ("story_genre", "story_free", "data_driven"):
            raise DomainError(f"unknown narrative kind: {self.variant!r}")
        if self.variant == "story_genre":
            if self.genre is None:
                raise DomainError("story_genre requires a genre")
            if self.genre.name not in (g.name for g in _FUNDAMENTAL_GENRES):
                raise DomainError(
                    f"{self.genre.name!r} is not a fundamental genre"
                )
        elif self.genre is not None:
            raise DomainError(f"{self.variant} must not carry a genre")

    @staticmethod
    def story_with_genre(genre: Genre) -> "NarrativeKind":
        return NarrativeKind("story_genre", genre)

    @staticmethod
    def story_free() -> "NarrativeKind":
        return NarrativeKind("story_free")

    @staticmethod
    def data_driven() -> "NarrativeKind":
        return NarrativeKind("data_driven")


@dataclass(frozen=True)
class NarrativeRequest:
    frames: tuple[InputFrame, ...]
    kind: NarrativeKind
    max_frames: int = MAX_FRAMES_DEFAULT


@dataclass(frozen=True)
class ValidationIssue:
    code: str  # EmptySequence | TooManyFrames | BadImageFormat | CaptionTooLong | DuplicateIndex
    message: str
    frame_index: Optional[int] = None


@dataclass(frozen=True)
class ValidationResult:
    issues: tuple[ValidationIssue, ...]

    @property
    def ok(self) -> bool:
        return not self.issues


def validate_request(request: NarrativeRequest) -> ValidationResult:
    """Validate a request, reporting every violation rather than the first."""
    issues: list[ValidationIssue] = []
    if not request.frames:
        issues.append(ValidationIssue("EmptySequence", "no input frames"))
    if len(request.frames) > request.max_frames:
        issues.append(
            ValidationIssue(
                "TooManyFrames",
                f"{len(request.frames)} frames exceed the limit of "
                f"{request.max_frames}",
            )
        )
    seen: set[int] = set()
    for frame in request.frames:
        if frame.index in seen:
            issues.append(
                ValidationIssue(
                    "DuplicateIndex",
                    f"frame index {frame.index} appears more than once",
                    frame.index,
                )
            )
        seen.add(frame.index)
        if not matches_signature(frame.image_data, frame.media_type):
            issues.append(
                ValidationIssue(
                    "BadImageFormat",
                    f"frame {frame.index} bytes do not look like "
                    f"{frame.media_type}",
                    frame.index,
                )
            )
        if frame.caption is not None and len(frame.caption) > MAX_CAPTION_CHARS:
            issues.append(
                ValidationIssue(
                    "CaptionTooLong",
                    f"frame {frame.index} caption exceeds "
                    f"{MAX_CAPTION_CHARS} characters",
                    frame.index,
                )
            )
    return ValidationResult(tuple(issues))


@dataclass(frozen=True)
class ImageDescription:
    frame_index: int
    text: str

    def __post_init__(self) -> None:
        if not self.text:
            raise DomainError("image description must be non-empty")


@dataclass(frozen=True)
class IllustrationSpec:
    positive: str
    negative: str


@dataclass(frozen=True)
class IllustrationRecord:
    event_description: str
    spec: IllustrationSpec
    seed: int
    image_data: Optional[bytes] = None


@dataclass(frozen=True)
class Chapter:
    number: int
    title: str
    body: str
    illustration: Optional[IllustrationRecord] = None

    def __post_init__(self) -> None:
        if self.number < 1:
            raise DomainError("chapter number must be >= 1")
        if not self.body:
            raise DomainError("chapter body must be non-empty")


@dataclass(frozen=True)
class Story:
    title: str
    chapters: tuple[Chapter, ...]
    request_snapshot: Optional[NarrativeRequest] = None
    descriptions: tuple[ImageDescription, ...] = ()
    final_prompt: str = ""
    preamble: Optional[str] = None
    id: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.chapters:
            raise DomainError("a story needs at least one chapter")
        numbers = [c.number for c in self.chapters]
        if any(b <= a for a, b in zip(numbers, numbers[1:])):
            raise DomainError("chapter numbers must strictly increase")

    def chapter(self, number: int) -> Chapter:
        for c in self.chapters:
            if c.number == number:
                return c
        raise KeyError(number)

    def with_chapter(self, chapter: Chapter) -> "Story":
        """Return a copy with the same-numbered chapter replaced."""
        if all(c.number != chapter.number for c in self.chapters):
            raise KeyError(chapter.number)
        new = tuple(
            chapter if c.number == chapter.number else c for c in self.chapters
        )
        return replace(self, chapters=new)


# ---------------------------------------------------------------------------
# Canonical story document (JSON manifest + sidecar image files)
# ---------------------------------------------------------------------------

ImageWriter = Callable[[str, bytes], None]
ImageReader = Callable[[str], Optional[bytes]]


def frame_ref(frame: InputFrame) -> str:
    return f"frame_{frame.index}.{MEDIA_EXTENSIONS[frame.media_type]}"


def chapter_ref(number: int) -> str:
    return f"chapter_{number}.png"


def story_to_document(story: Story, write_image: Optional[ImageWriter] = None) -> dict:
    """Serialize a story to the canonical manifest dict.

    Image bytes are not inlined: each is handed to ``write_image`` under its
    stable reference name and the manifest records only the reference.
    """
    chapters = []
    for c in story.chapters:
        illustration = None
        if c.illustration is not None:
            ill = c.illustration
            image_ref = None
            if ill.image_data is not None:
                image_ref = chapter_ref(c.number)
                if write_image is not None:
                    write_image(image_ref, ill.image_data)
            illustration = {
                "event_description": ill.event_description,
                "positive": ill.spec.positive,
                "negative": ill.spec.negative,
                "seed": ill.seed,
                "image_ref": image_ref,
            }
        chapters.append(
            {
                "number": c.number,
                "title": c.title,
                "body": c.body,
                "illustration": illustration,
            }
        )

    request = None
    if story.request_snapshot is not None:
        req = story.request_snapshot
        frames = []
        for f in req.frames:
            ref = frame_ref(f)
            if write_image is not None:
                write_image(ref, f.image_data)
            frames.append(
                {
                    "index": f.index,
                    "caption": f.caption,
                    "media_type": f.media_type,
                    "image_ref": ref,
                }
            )
        request = {
            "kind": req.kind.variant,
            "genre": req.kind.genre.name if req.kind.genre else None,
            "max_frames": req.max_frames,
            "frames": frames,
        }

    return {
        "id": story.id,
        "title": story.title,
        "preamble": story.preamble,
        "chapters": chapters,
        "descriptions": [
            {"frame_index": d.frame_index, "text": d.text}
            for d in story.descriptions
        ],
        "final_prompt": story.final_prompt,
        "request": request,
    }


def story_from_document(doc: dict, read_image: Optional[ImageReader] = None) -> Story:
    """Rebuild a story from its manifest dict, resolving image references."""

    def _read(ref: Optional[str]) -> Optional[bytes]:
        if ref is None or read_image is None:
            return None
        return read_image(ref)

    chapters = []
    for c in doc["chapters"]:
        illustration = None
        if c.get("illustration") is not None:
            ill = c["illustration"]
            illustration = IllustrationRecord(
                event_description=ill["event_description"],
                spec=IllustrationSpec(ill["positive"], ill["negative"]),
                seed=ill["seed"],
                image_data=_read(ill.get("image_ref")),
            )
        chapters.append(
            Chapter(c["number"], c["title"], c["body"], illustration)
        )

    request = None
    if doc.get("request") is not None:
        req = doc["request"]
        if req["kind"] == "story_genre":
            kind = NarrativeKind.story_with_genre(_CATALOG.genre(req["genre"]))
        else:
            kind = NarrativeKind(req["kind"])
        frames = tuple(
            InputFrame(
                index=f["index"],
                image_data=_read(f["image_ref"]) or b"",
                media_type=f["media_type"],
                caption=f.get("caption"),
            )
            for f in req["frames"]
        )
        request = NarrativeRequest(
            frames=frames, kind=kind, max_frames=req.get("max_frames", MAX_FRAMES_DEFAULT)
        )

    return Story(
        id=doc.get("id"),
        title=doc["title"],
        preamble=doc.get("preamble"),
        chapters=tuple(chapters),
        request_snapshot=request,
        descriptions=tuple(
            ImageDescription(d["frame_index"], d["text"])
            for d in doc.get("descriptions", [])
        ),
        final_prompt=doc.get("final_prompt", ""),
    )


def document_to_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False)


def document_from_json(text: str) -> dict:
    return json.loads(text)
