"""Deterministic construction of every prompt the system sends.

Covers the image-analysis prompt (with optional caption clause), the
five-component narrative prompt system and its three compositions, the
significant-event summarization prompt, and the optimized illustration
prompt (parenthesis emphasis + style suffix + fixed negative prompt).

All constant texts live as versioned files in ``prompt_texts/`` so tests,
docs and code share one source of truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence

from .domain import Genre, ImageDescription, IllustrationSpec, NarrativeKind


class PromptError(Exception):
    pass


class MissingGenre(PromptError):
    pass


class MissingDescriptions(PromptError):
    pass


class EmptyChapter(PromptError):
    pass


class InvalidSpan(PromptError):
    pass


def _load(name: str) -> str:
    text = (
        resources.files("imageteller.prompt_texts")
        .joinpath(name)
        .read_text(encoding="utf-8")
    )
    return text.rstrip("\n")


ANALYSIS_PROMPT = _load("image_analysis.txt")
CAPTION_CLAUSE_TEMPLATE = _load("caption_clause.txt")
GENERAL_TEXT = _load("general.txt")
STORY_DRIVEN_TEXT = _load("story_driven.txt")
DATA_DRIVEN_TEXT = _load("data_driven.txt")
GENRE_TEMPLATE = _load("genre.txt")
IMAGE_HEADER = _load("image_header.txt")
EVENT_PROMPT_TEMPLATE = _load("event_summary.txt")
STYLE_SUFFIX = _load("style_suffix.txt")
NEGATIVE_PROMPT = _load("negative_prompt.txt")

EVENT_WORD_LIMIT = 60


@dataclass(frozen=True)
class PromptComponent:
    kind: str  # General | StoryDriven | DataDriven | Genre | Image
    text: str


def build_analysis_prompt(caption: Optional[str] = None) -> str:
    """The per-image analysis prompt, with the caption clause when given.

    An empty or whitespace-only caption is treated as absent.
    """
    if caption is None or not caption.strip():
        return ANALYSIS_PROMPT
    clause = CAPTION_CLAUSE_TEMPLATE.format(caption=caption.strip())
    return f"{ANALYSIS_PROMPT} {clause}"


def render_component(
    kind: str,
    genre: Optional[Genre] = None,
    descriptions: Optional[Sequence[ImageDescription]] = None,
) -> PromptComponent:
    """Render one of the five narrative prompt components."""
    if kind == "General":
        return PromptComponent(kind, GENERAL_TEXT)
    if kind == "StoryDriven":
        return PromptComponent(kind, STORY_DRIVEN_TEXT)
    if kind == "DataDriven":
        return PromptComponent(kind, DATA_DRIVEN_TEXT)
    if kind == "Genre":
        if genre is None:
            raise MissingGenre("Genre component requires a genre")
        return PromptComponent(
            kind,
            GENRE_TEMPLATE.format(name=genre.name, description=genre.description),
        )
    if kind == "Image":
        if not descriptions:
            raise MissingDescriptions("Image component requires descriptions")
        lines = [IMAGE_HEADER]
        for n, d in enumerate(descriptions, start=1):
            lines.append(f"{n}. {d.text}")
        return PromptComponent(kind, "\n".join(lines))
    raise PromptError(f"unknown component kind: {kind!r}")


def compose_final_prompt(
    kind: NarrativeKind, descriptions: Sequence[ImageDescription]
) -> str:
    """Combine the prompt components for the requested narrative kind.

    Sentence-style components are joined with a single space; the image
    block is set off by a blank line.
    """
    if not descriptions:
        raise MissingDescriptions("at least one image description is required")

    parts = [render_component("General").text]
    if kind.variant == "data_driven":
        parts.append(render_component("DataDriven").text)
    else:
        parts.append(render_component("StoryDriven").text)
        if kind.variant == "story_genre":
            parts.append(render_component("Genre", genre=kind.genre).text)
    head = " ".join(parts)
    image_block = render_component("Image", descriptions=descriptions).text
    return f"{head}\n\n{image_block}"


def build_event_prompt(chapter_body: str) -> str:
    """The prompt asking for a chapter's single significant event."""
    if not chapter_body:
        raise EmptyChapter("chapter body must be non-empty")
    return EVENT_PROMPT_TEMPLATE.format(chapter=chapter_body)


def check_event_description(text: str) -> tuple[int, bool]:
    """Word count of an event description and whether it fits the limit."""
    count = len(text.split())
    return count, count <= EVENT_WORD_LIMIT


# ---------------------------------------------------------------------------
# Parenthesis emphasis for image-model prompts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmphasisPlan:
    """Non-overlapping (start, end, level) spans over an event description."""

    spans: tuple[tuple[int, int, int], ...] = ()


def _is_word_char(ch: str) -> bool:
    return ch.isalnum() or ch in "'-"


def validate_plan(text: str, plan: EmphasisPlan) -> None:
    """Raise InvalidSpan unless every span is usable on this text."""
    prev_end = 0
    for start, end, level in sorted(plan.spans):
        if level not in (2, 3):
            raise InvalidSpan(f"emphasis level must be 2 or 3, got {level}")
        if start < 0 or end > len(text) or start >= end:
            raise InvalidSpan(f"span ({start}, {end}) out of bounds")
        if start < prev_end:
            raise InvalidSpan(f"span ({start}, {end}) overlaps a previous span")
        # A span must not cut through a word.
        if start > 0 and _is_word_char(text[start - 1]) and _is_word_char(text[start]):
            raise InvalidSpan(f"span ({start}, {end}) splits a word at its start")
        if end < len(text) and _is_word_char(text[end - 1]) and _is_word_char(text[end]):
            raise InvalidSpan(f"span ({start}, {end}) splits a word at its end")
        prev_end = end


def apply_emphasis(text: str, plan: EmphasisPlan) -> str:
    """Wrap each planned span in its level's number of parentheses."""
    validate_plan(text, plan)
    result = text
    for start, end, level in sorted(plan.spans, reverse=True):
        wrapped = "(" * level + result[start:end] + ")" * level
        result = result[:start] + wrapped + result[end:]
    return result


def strip_emphasis(text: str) -> str:
    """Remove all parentheses; the inverse of apply_emphasis, idempotent."""
    return text.replace("(", "").replace(")", "")


# Fixed lexicons for the deterministic emphasis heuristic. Colors paired
# with a garment noun get the strongest emphasis; proper nouns and scene
# nouns get moderate emphasis.
COLOR_WORDS = frozenset(
    "red blue gold golden green white black silver crimson purple grey gray "
    "brown yellow scarlet azure".split()
)
GARMENT_WORDS = frozenset(
    "dress robe gown cloak tunic shirt armor armour veil cape coat "
    "headdress".split()
)
SCENE_WORDS = frozenset(
    "chamber castle hall tower forest tapestry throne courtyard garden "
    "battlefield abbey snow face eyes".split()
)
# Sentence-leading capitals are ambiguous; these common openers are never
# treated as proper nouns.
_STOP_CAPITALS = frozenset(
    "The A An In On At And But Or Of To With When While As It Its His Her "
    "They He She We I".split()
)


class AnnotatorFailure(Exception):
    pass


class HeuristicAnnotator:
    """Deterministic lexicon-based emphasis selection, the offline default."""

    def propose(self, text: str) -> list[tuple[int, int, int]]:
        tokens = _tokenize(text)
        spans: list[tuple[int, int, int]] = []
        taken_until = -1
        for i, (word, start, end) in enumerate(tokens):
            if start <= taken_until:
                continue
            lower = word.lower()
            nxt = tokens[i + 1] if i + 1 < len(tokens) else None
            if lower in COLOR_WORDS and nxt and nxt[0].lower() in GARMENT_WORDS:
                spans.append((start, nxt[2], 3))
                taken_until = nxt[2]
                continue
            is_proper = word[0].isupper() and word not in _STOP_CAPITALS
            if is_proper or lower in SCENE_WORDS:
                spans.append((start, end, 2))
                taken_until = end
        return spans


def _tokenize(text: str) -> list[tuple[str, int, int]]:
    tokens = []
    i = 0
    while i < len(text):
        if _is_word_char(text[i]):
            j = i
            while j < len(text) and _is_word_char(text[j]):
                j += 1
            tokens.append((text[i:j], i, j))
            i = j
        else:
            i += 1
    return tokens


def plan_emphasis(event_description: str, annotator=None) -> EmphasisPlan:
    """Build a validated emphasis plan for an event description.

    ``annotator`` is anything with ``propose(text) -> [(start, end, level)]``;
    invalid proposals are dropped, and an annotator that raises falls back to
    the deterministic heuristic.
    """
    if not event_description:
        raise ValueError("event description must be non-empty")
    if annotator is None:
        annotator = HeuristicAnnotator()
    try:
        proposed = annotator.propose(event_description)
    except Exception:
        proposed = HeuristicAnnotator().propose(event_description)

    accepted: list[tuple[int, int, int]] = []
    for span in sorted(proposed):
        candidate = EmphasisPlan(tuple(accepted + [span]))
        try:
            validate_plan(event_description, candidate)
        except InvalidSpan:
            continue
        accepted.append(span)
    return EmphasisPlan(tuple(accepted))


def build_illustration_spec(
    event_description: str, plan: EmphasisPlan
) -> IllustrationSpec:
    """Emphasized event description + style suffix, plus the fixed negative."""
    if not event_description:
        raise ValueError("event description must be non-empty")
    positive = f"{apply_emphasis(event_description, plan)} {STYLE_SUFFIX}"
    return IllustrationSpec(positive=positive, negative=NEGATIVE_PROMPT)
