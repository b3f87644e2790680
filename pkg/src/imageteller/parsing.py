"""Parse raw model markdown into a Story, and render a Story back out.

The narrative contract is simple: one level-1 header for the title, one
level-2 header per chapter. Everything else (including deeper headers) is
opaque chapter body text. Parsing is total: any input yields either a Story
or a structured ParseError, never a crash.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .domain import Chapter, Story

logger = logging.getLogger(__name__)

_H1 = re.compile(r"^#\s+(.*\S)\s*$")
_H2 = re.compile(r"^##\s+(.*\S)\s*$")
_CHAPTER_HEADER = re.compile(r"^Chapter\s+(\d+)\s*[:.\-]\s*(.+)$", re.IGNORECASE)


class ParseError(Exception):
    pass


class NoTitle(ParseError):
    pass


class NoChapters(ParseError):
    pass


class EmptyBody(ParseError):
    def __init__(self, chapter_number: int):
        super().__init__(f"chapter {chapter_number} has an empty body")
        self.chapter_number = chapter_number


@dataclass(frozen=True)
class RawNarrative:
    text: str


def parse_story(raw: RawNarrative | str) -> Story:
    """Parse model output into a Story (without illustrations)."""
    text = raw.text if isinstance(raw, RawNarrative) else raw
    lines = text.replace("\r\n", "\n").split("\n")

    title: str | None = None
    preamble_lines: list[str] = []
    # (number_hint, title, body_lines) per level-2 header, in order
    sections: list[tuple[int | None, str, list[str]]] = []

    for line in lines:
        h1 = _H1.match(line)
        h2 = _H2.match(line)
        if h2:
            header = h2.group(1).strip()
            m = _CHAPTER_HEADER.match(header)
            if m:
                sections.append((int(m.group(1)), m.group(2).strip(), []))
            else:
                sections.append((None, header, []))
        elif h1:
            if title is None:
                title = h1.group(1).strip()
            else:
                logger.warning("extra level-1 header treated as body text: %r", line)
                if sections:
                    sections[-1][2].append(line)
                else:
                    preamble_lines.append(line)
        elif sections:
            sections[-1][2].append(line)
        elif title is not None:
            preamble_lines.append(line)
        else:
            if line.strip():
                logger.warning("text before the title header is skipped: %r", line)

    if title is None:
        raise NoTitle("no level-1 header found")
    if not sections:
        raise NoChapters("no level-2 header found")

    chapters: list[Chapter] = []
    hints = [hint for hint, _, _ in sections]
    numbers_usable = (
        all(h is not None for h in hints)
        and hints[0] >= 1  # type: ignore[operator]
        and all(b > a for a, b in zip(hints, hints[1:]))  # type: ignore[operator]
    )
    for i, (hint, chapter_title, body_lines) in enumerate(sections):
        number = hint if numbers_usable else i + 1
        body = "\n".join(body_lines).strip("\n").strip()
        if not body:
            raise EmptyBody(number)
        chapters.append(Chapter(number=number, title=chapter_title, body=body))

    preamble = "\n".join(preamble_lines).strip() or None
    return Story(title=title, preamble=preamble, chapters=tuple(chapters))


def render_story(story: Story) -> str:
    """Render a Story back to markdown; re-parsing yields an equal Story."""
    parts = [f"# {story.title}"]
    if story.preamble:
        parts.append(story.preamble)
    for c in story.chapters:
        parts.append(f"## Chapter {c.number}: {c.title}")
        parts.append(c.body)
    return "\n\n".join(parts) + "\n"
