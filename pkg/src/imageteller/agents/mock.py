"""Deterministic mock backends for every agent role.

The mocks let the whole pipeline, service and CLI run offline with exact,
repeatable outputs keyed only on their inputs (and explicit seeds for the
illustrator). Tests rely on these contracts:

- analyzer: "Frame <index>: <caption or 'an unlabeled scene'> — deterministic
  description <hash8(image bytes)>."
- storywriter: a valid markdown story titled "Mock Story <hash8(prompt)>"
  with max(2, number of descriptions in the prompt) chapters; a rewrite
  prompt yields a single-chapter reply.
- summarizer: the first 40 words of the chapter body embedded in the prompt.
- illustrator: a PNG of the requested size, solid color from the positive
  prompt hash, seed drawn into the pixels.
"""

from __future__ import annotations

import hashlib
import io
import re
import time

from PIL import Image, ImageDraw

from ..domain import IllustrationSpec, ImageDescription, InputFrame
from . import AgentBadResponse, AgentSuite, ImageJobParams

_NUMBERED_LINE = re.compile(r"^\d+\. ", re.MULTILINE)
# Marker the plot manager embeds in chapter-rewrite prompts.
REWRITE_MARKER = re.compile(r"Rewrite only chapter (\d+)")
_CHAPTER_MARKER = re.compile(r"Here is the story chapter: (.*)", re.DOTALL)


def hash8(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()[:8]


class MockAnalyzer:
    def __init__(self, delay: float = 0.0):
        self.delay = delay
        self.calls = 0

    def analyze_image(self, frame: InputFrame, prompt: str) -> ImageDescription:
        self.calls += 1
        if self.delay:
            time.sleep(self.delay)
        subject = frame.caption or "an unlabeled scene"
        text = (
            f"Frame {frame.index}: {subject} — deterministic description "
            f"{hash8(frame.image_data)}."
        )
        return ImageDescription(frame_index=frame.index, text=text)


class MockStorywriter:
    def __init__(self):
        self.calls = 0

    def generate_narrative(self, final_prompt: str) -> str:
        self.calls += 1
        digest = hash8(final_prompt)
        rewrite = REWRITE_MARKER.search(final_prompt)
        if rewrite:
            n = int(rewrite.group(1))
            return (
                f"## Chapter {n}: Rewritten Passage {digest}\n\n"
                f"A fresh turn of events, rewritten as take {digest}, carries "
                f"chapter {n} toward the same horizon by a different road."
            )
        frame_count = len(_NUMBERED_LINE.findall(final_prompt))
        chapter_count = max(2, frame_count)
        lines = [f"# Mock Story {digest}", ""]
        for n in range(1, chapter_count + 1):
            lines.append(f"## Chapter {n}: Scene {n} of {digest}")
            lines.append("")
            lines.append(
                f"In scene {n}, the figures from the descriptions press on. "
                f"Their path is fixed by the telling {digest}, and nothing in "
                f"chapter {n} happens by chance."
            )
            lines.append("")
        return "\n".join(lines)


class MockSummarizer:
    def __init__(self):
        self.calls = 0

    def summarize_event(self, prompt: str) -> str:
        self.calls += 1
        m = _CHAPTER_MARKER.search(prompt)
        if not m:
            raise AgentBadResponse("prompt carries no chapter text")
        words = m.group(1).split()
        return " ".join(words[:40])


class MockIllustrator:
    def __init__(self):
        self.calls = 0

    def generate_image(self, spec: IllustrationSpec, params: ImageJobParams) -> bytes:
        self.calls += 1
        digest = hashlib.sha256(spec.positive.encode("utf-8")).digest()
        color = (digest[0], digest[1], digest[2])
        img = Image.new("RGB", (params.width, params.height), color)
        draw = ImageDraw.Draw(img)
        draw.text((8, 8), f"seed {params.seed}", fill=(255, 255, 255))
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()


def make_mock_suite() -> AgentSuite:
    return AgentSuite(
        analyzer=MockAnalyzer(),
        storywriter=MockStorywriter(),
        summarizer=MockSummarizer(),
        illustrator=MockIllustrator(),
    )
