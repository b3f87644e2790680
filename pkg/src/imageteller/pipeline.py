"""End-to-end generation pipeline and the interactive regeneration loop.

A job moves through Pending -> Analyzing -> Writing -> Illustrating -> Done
(or to Failed from any non-terminal state). Frame analyses run concurrently,
but the image-description block of the final prompt is ordered by frame
index, never by completion order. Illustration failures degrade to a
text-only chapter; story text is primary.
"""

from __future__ import annotations

import concurrent.futures
import logging
import random
import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from . import parsing, prompts
from .agents import AgentError, AgentSuite, ImageJobParams
from .domain import (
    Chapter,
    IllustrationRecord,
    ImageDescription,
    NarrativeRequest,
    Story,
    validate_request,
)
from .parsing import ParseError, RawNarrative

logger = logging.getLogger(__name__)

PARSE_RETRIES = 2  # extra attempts after the first failed parse
ANALYSIS_WORKERS = 4


class PipelineError(Exception):
    pass


class ValidationFailed(PipelineError):
    def __init__(self, result):
        super().__init__("; ".join(i.message for i in result.issues))
        self.result = result


class AnalysisFailed(PipelineError):
    def __init__(self, frame_index: int, cause: Exception):
        super().__init__(f"analysis of frame {frame_index} failed: {cause}")
        self.frame_index = frame_index


class NarrativeFailed(PipelineError):
    pass


class ParseFailedAfterRetries(PipelineError):
    pass


class ParseFailed(PipelineError):
    """A chapter-rewrite reply that breaks the single-header contract."""


class IllustrationFailed(PipelineError):
    def __init__(self, chapter_number: int, cause: Exception):
        super().__init__(f"illustration of chapter {chapter_number} failed: {cause}")
        self.chapter_number = chapter_number


class UnknownChapter(PipelineError):
    def __init__(self, chapter_number: int):
        super().__init__(f"no chapter numbered {chapter_number}")
        self.chapter_number = chapter_number


@dataclass(frozen=True)
class ProgressEvent:
    timestamp: float
    stage: str
    detail: str


@dataclass
class GenerationJob:
    id: str
    request: NarrativeRequest
    state: str = "Pending"  # Pending|Analyzing|Writing|Illustrating|Done|Failed
    illustrating_chapter: Optional[int] = None
    story: Optional[Story] = None
    error: Optional[str] = None
    progress_log: list[ProgressEvent] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def _log(self, stage: str, detail: str) -> None:
        with self._lock:
            self.progress_log.append(ProgressEvent(time.time(), stage, detail))

    def _set_state(self, state: str, chapter: Optional[int] = None) -> None:
        with self._lock:
            self.state = state
            self.illustrating_chapter = chapter

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "id": self.id,
                "state": self.state,
                "illustrating_chapter": self.illustrating_chapter,
                "error": self.error,
                "progress_log": [
                    {"timestamp": e.timestamp, "stage": e.stage, "detail": e.detail}
                    for e in self.progress_log
                ],
            }


SeedSource = Callable[[], int]


def _default_seed_source() -> int:
    return random.SystemRandom().getrandbits(63)


class PlotManager:
    """Coordinates the agent suite through the generation stages."""

    def __init__(
        self,
        agents: AgentSuite,
        image_params: ImageJobParams = ImageJobParams(),
        seed_source: SeedSource = _default_seed_source,
        analysis_workers: int = ANALYSIS_WORKERS,
    ):
        self.agents = agents
        self.image_params = image_params
        self.seed_source = seed_source
        self.analysis_workers = analysis_workers

    # -- full pipeline ----------------------------------------------------

    def run_generation(self, request: NarrativeRequest) -> GenerationJob:
        job = GenerationJob(id=uuid.uuid4().hex, request=request)
        self.run_job(job)
        return job

    def restart(self, request: NarrativeRequest) -> GenerationJob:
        """Same input, fresh job; any prior job stays untouched."""
        return self.run_generation(request)

    def run_job(self, job: GenerationJob) -> None:
        try:
            self._run_stages(job)
        except PipelineError as exc:
            job.error = str(exc)
            job._log("Failed", str(exc))
            job._set_state("Failed")

    def _run_stages(self, job: GenerationJob) -> None:
        result = validate_request(job.request)
        if not result.ok:
            raise ValidationFailed(result)

        job._set_state("Analyzing")
        job._log("Analyzing", f"{len(job.request.frames)} frames")
        descriptions = self._analyze_frames(job.request)

        job._set_state("Writing")
        final_prompt = prompts.compose_final_prompt(job.request.kind, descriptions)
        job._log("Writing", "narrative generation")
        story = self._write_story(final_prompt)
        story = replace(
            story,
            request_snapshot=job.request,
            descriptions=tuple(descriptions),
            final_prompt=final_prompt,
        )
        job.story = story

        for chapter in story.chapters:
            job._set_state("Illustrating", chapter.number)
            job._log("Illustrating", f"chapter {chapter.number}")
            try:
                illustrated = self._illustrate_chapter(chapter)
            except IllustrationFailed as exc:
                logger.warning("%s; keeping the chapter text-only", exc)
                job._log("Illustrating", f"chapter {chapter.number} failed: {exc}")
                continue
            story = story.with_chapter(illustrated)
            job.story = story

        job._set_state("Done")
        job._log("Done", story.title)

    def _analyze_frames(self, request: NarrativeRequest) -> list[ImageDescription]:
        frames = sorted(request.frames, key=lambda f: f.index)

        def analyze(frame):
            prompt = prompts.build_analysis_prompt(frame.caption)
            try:
                return self.agents.analyzer.analyze_image(frame, prompt)
            except AgentError as exc:
                raise AnalysisFailed(frame.index, exc) from exc

        with concurrent.futures.ThreadPoolExecutor(
            max_workers=self.analysis_workers
        ) as pool:
            results = list(pool.map(analyze, frames))
        # map() preserves submission order, so descriptions follow frame index.
        return results

    def _write_story(self, final_prompt: str) -> Story:
        last_parse_error: Optional[ParseError] = None
        for attempt in range(1 + PARSE_RETRIES):
            try:
                raw = self.agents.storywriter.generate_narrative(final_prompt)
            except AgentError as exc:
                raise NarrativeFailed(str(exc)) from exc
            try:
                return parsing.parse_story(RawNarrative(raw))
            except ParseError as exc:
                last_parse_error = exc
                logger.warning(
                    "narrative parse failed (attempt %d): %s", attempt + 1, exc
                )
        raise ParseFailedAfterRetries(str(last_parse_error))

    def _illustrate_chapter(self, chapter: Chapter, seed: Optional[int] = None) -> Chapter:
        try:
            event_prompt = prompts.build_event_prompt(chapter.body)
            event = self.agents.summarizer.summarize_event(event_prompt)
            count, compliant = prompts.check_event_description(event)
            if not compliant:
                logger.warning(
                    "event description for chapter %d runs %d words; passing through",
                    chapter.number,
                    count,
                )
            plan = prompts.plan_emphasis(event)
            spec = prompts.build_illustration_spec(event, plan)
            seed = self.seed_source() if seed is None else seed
            params = replace(self.image_params, seed=seed)
            image = self.agents.illustrator.generate_image(spec, params)
        except (AgentError, prompts.PromptError) as exc:
            raise IllustrationFailed(chapter.number, exc) from exc
        record = IllustrationRecord(
            event_description=event, spec=spec, seed=seed, image_data=image
        )
        return replace(chapter, illustration=record)

    # -- interactive regeneration ----------------------------------------

    def regenerate_chapter(self, story: Story, chapter_number: int) -> Story:
        """Rewrite one chapter (text + illustration), freezing all others."""
        try:
            chapter = story.chapter(chapter_number)
        except KeyError:
            raise UnknownChapter(chapter_number) from None

        rewrite_prompt = self._rewrite_prompt(story, chapter)
        try:
            raw = self.agents.storywriter.generate_narrative(rewrite_prompt)
        except AgentError as exc:
            raise NarrativeFailed(str(exc)) from exc
        title, body = self._parse_single_chapter_reply(raw)
        new_chapter = Chapter(number=chapter_number, title=title, body=body)
        new_chapter = self._illustrate_or_keep_plain(new_chapter)
        return story.with_chapter(new_chapter)

    def regenerate_illustration(self, story: Story, chapter_number: int) -> Story:
        """Re-run only the illustration stage for one chapter, new seed."""
        try:
            chapter = story.chapter(chapter_number)
        except KeyError:
            raise UnknownChapter(chapter_number) from None
        illustrated = self._illustrate_chapter(chapter)
        return story.with_chapter(illustrated)

    def _rewrite_prompt(self, story: Story, chapter: Chapter) -> str:
        return (
            f"{story.final_prompt}\n\n"
            f"Here is the story generated so far:\n\n"
            f"{parsing.render_story(story)}\n"
            f"Rewrite only chapter {chapter.number} "
            f'("{chapter.title}"), keeping continuity with the rest of the '
            f"story and leaving every other chapter unchanged. Reply with "
            f"just the rewritten chapter, starting with its markdown level-2 "
            f"header."
        )

    def _parse_single_chapter_reply(self, raw: str) -> tuple[str, str]:
        lines = raw.replace("\r\n", "\n").split("\n")
        headers = [i for i, line in enumerate(lines) if line.startswith("## ")]
        if len(headers) != 1:
            raise ParseFailed(
                f"rewrite reply must contain exactly one level-2 header, "
                f"found {len(headers)}"
            )
        header = lines[headers[0]][3:].strip()
        m = parsing._CHAPTER_HEADER.match(header)
        title = m.group(2).strip() if m else header
        body = "\n".join(lines[headers[0] + 1 :]).strip()
        if not body:
            raise ParseFailed("rewrite reply has an empty body")
        return title, body

    def _illustrate_or_keep_plain(self, chapter: Chapter) -> Chapter:
        try:
            return self._illustrate_chapter(chapter)
        except IllustrationFailed as exc:
            logger.warning("%s; keeping the chapter text-only", exc)
            return chapter
