"""Pluggable model-backed roles: visual analyzer, storywriter, event
summarizer and illustrator.

Each role is a small protocol with interchangeable backends: live HTTP
backends (chat-completions for the text/vision roles, text-to-image for the
illustrator) and deterministic mock backends for offline testing. Backend
selection and shared plumbing (config, errors, retry with backoff, a
per-backend concurrency cap) live here.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Protocol

from ..domain import IllustrationSpec, ImageDescription, InputFrame

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 120.0
DEFAULT_MAX_RETRIES = 2
DEFAULT_CONCURRENCY = 4


class AgentError(Exception):
    pass


class AgentTimeout(AgentError):
    pass


class AgentHTTPError(AgentError):
    def __init__(self, status: int, message: str = ""):
        super().__init__(f"HTTP {status}: {message}")
        self.status = status


class AgentBadResponse(AgentError):
    pass


@dataclass(frozen=True)
class AgentConfig:
    backend: str = "mock"  # "live" | "mock"
    endpoint: Optional[str] = None
    credentials: Optional[str] = None
    model_name: str = ""
    timeout: float = DEFAULT_TIMEOUT
    max_retries: int = DEFAULT_MAX_RETRIES
    temperature: Optional[float] = None
    concurrency: int = DEFAULT_CONCURRENCY

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.backend == "live" and not (self.endpoint and self.credentials):
            raise ValueError("live backend requires endpoint and credentials")


@dataclass(frozen=True)
class ImageJobParams:
    width: int = 1024
    height: int = 1024
    steps: int = 30
    guidance: float = 7.0
    seed: int = 0

    def __post_init__(self) -> None:
        for side, name in ((self.width, "width"), (self.height, "height")):
            if not (256 <= side <= 2048) or side % 8:
                raise ValueError(f"{name} must be in [256, 2048] and a multiple of 8")
        if not (1 <= self.steps <= 150):
            raise ValueError("steps must be in [1, 150]")
        if not (0 < self.guidance <= 30):
            raise ValueError("guidance must be in (0, 30]")


class VisualAnalyzer(Protocol):
    def analyze_image(self, frame: InputFrame, prompt: str) -> ImageDescription: ...


class Storywriter(Protocol):
    def generate_narrative(self, final_prompt: str) -> str: ...


class EventSummarizer(Protocol):
    def summarize_event(self, prompt: str) -> str: ...


class Illustrator(Protocol):
    def generate_image(self, spec: IllustrationSpec, params: ImageJobParams) -> bytes: ...


class _Gate:
    """Per-backend concurrent-request cap."""

    def __init__(self, limit: int):
        self._sem = threading.BoundedSemaphore(limit)

    def __enter__(self):
        self._sem.acquire()
        return self

    def __exit__(self, *exc):
        self._sem.release()
        return False


def with_retries(config: AgentConfig, call, *, sleep=time.sleep):
    """Run ``call`` with up to config.max_retries retries and exponential
    backoff (1 s, 2 s, ...). Only agent errors are retried."""
    attempts = config.max_retries + 1
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            return call()
        except AgentError as exc:
            last = exc
            if attempt < attempts - 1:
                delay = 2**attempt
                logger.warning(
                    "agent call failed (%s), retrying in %ds", exc, delay
                )
                sleep(delay)
    assert last is not None
    raise last


@dataclass
class AgentSuite:
    """The four roles wired to concrete backends."""

    analyzer: VisualAnalyzer
    storywriter: Storywriter
    summarizer: EventSummarizer
    illustrator: Illustrator


def make_suite(backend: Optional[str] = None) -> AgentSuite:
    """Build an AgentSuite from the environment.

    Backend defaults to $IMAGETELLER_BACKEND, falling back to mock.
    """
    from . import live, mock

    backend = backend or os.environ.get("IMAGETELLER_BACKEND", "mock")
    if backend == "mock":
        return mock.make_mock_suite()
    if backend == "live":
        return live.make_live_suite()
    raise ValueError(f"unknown backend: {backend!r}")
