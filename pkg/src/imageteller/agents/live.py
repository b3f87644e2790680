"""Live HTTP backends.

The vision/text roles share one chat-completions wire protocol (POST
{model, messages[...]} with bearer auth, images inlined as base64 data
URLs). The illustrator speaks a text-to-image protocol (POST {prompt,
negative_prompt, width, height, steps, cfg_scale, seed} -> base64 payload).

Endpoints and keys come from the environment:
VISION_API_URL / VISION_API_KEY for the chat roles,
SD_API_URL / SD_API_KEY for the illustrator.
"""

from __future__ import annotations

import base64
import binascii
import os

import httpx

from ..domain import IllustrationSpec, ImageDescription, InputFrame
from . import (
    AgentBadResponse,
    AgentConfig,
    AgentHTTPError,
    AgentSuite,
    AgentTimeout,
    ImageJobParams,
    _Gate,
    with_retries,
)

_MIME = {"png": "image/png", "jpeg": "image/jpeg", "webp": "image/webp"}


class ChatCompletionsClient:
    """Shared client for the vision, storywriter and summarizer roles."""

    def __init__(self, config: AgentConfig):
        self.config = config
        self._gate = _Gate(config.concurrency)

    def _post(self, messages: list[dict]) -> str:
        payload: dict = {"model": self.config.model_name, "messages": messages}
        if self.config.temperature is not None:
            payload["temperature"] = self.config.temperature

        def call() -> str:
            with self._gate:
                try:
                    response = httpx.post(
                        self.config.endpoint,
                        json=payload,
                        headers={
                            "Authorization": f"Bearer {self.config.credentials}"
                        },
                        timeout=self.config.timeout,
                    )
                except httpx.TimeoutException as exc:
                    raise AgentTimeout(str(exc)) from exc
                except httpx.HTTPError as exc:
                    raise AgentHTTPError(0, str(exc)) from exc
            if response.status_code != 200:
                raise AgentHTTPError(response.status_code, response.text[:500])
            try:
                content = response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise AgentBadResponse(f"malformed reply: {exc}") from exc
            if not content or not content.strip():
                raise AgentBadResponse("empty model reply")
            return content

        return with_retries(self.config, call)

    def complete_text(self, prompt: str) -> str:
        return self._post([{"role": "user", "content": prompt}])

    def complete_with_image(self, prompt: str, frame: InputFrame) -> str:
        encoded = base64.b64encode(frame.image_data).decode("ascii")
        url = f"data:{_MIME[frame.media_type]};base64,{encoded}"
        return self._post(
            [
                {
                    "role": "user",
                    "content": [
                        {"type": "text", "text": prompt},
                        {"type": "image_url", "image_url": {"url": url}},
                    ],
                }
            ]
        )


class LiveAnalyzer:
    def __init__(self, client: ChatCompletionsClient):
        self._client = client

    def analyze_image(self, frame: InputFrame, prompt: str) -> ImageDescription:
        text = self._client.complete_with_image(prompt, frame)
        return ImageDescription(frame_index=frame.index, text=text.strip())


class LiveStorywriter:
    def __init__(self, client: ChatCompletionsClient):
        self._client = client

    def generate_narrative(self, final_prompt: str) -> str:
        return self._client.complete_text(final_prompt)


class LiveSummarizer:
    def __init__(self, client: ChatCompletionsClient):
        self._client = client

    def summarize_event(self, prompt: str) -> str:
        return self._client.complete_text(prompt).strip()


class TextToImageClient:
    def __init__(self, config: AgentConfig):
        self.config = config
        self._gate = _Gate(config.concurrency)

    def generate_image(self, spec: IllustrationSpec, params: ImageJobParams) -> bytes:
        payload = {
            "prompt": spec.positive,
            "negative_prompt": spec.negative,
            "width": params.width,
            "height": params.height,
            "steps": params.steps,
            "cfg_scale": params.guidance,
            "seed": params.seed,
        }

        def call() -> bytes:
            with self._gate:
                try:
                    response = httpx.post(
                        self.config.endpoint,
                        json=payload,
                        headers={
                            "Authorization": f"Bearer {self.config.credentials}"
                        },
                        timeout=self.config.timeout,
                    )
                except httpx.TimeoutException as exc:
                    raise AgentTimeout(str(exc)) from exc
                except httpx.HTTPError as exc:
                    raise AgentHTTPError(0, str(exc)) from exc
            if response.status_code != 200:
                raise AgentHTTPError(response.status_code, response.text[:500])
            try:
                encoded = response.json()["image"]
                data = base64.b64decode(encoded, validate=True)
            except (KeyError, ValueError, binascii.Error) as exc:
                raise AgentBadResponse(f"non-image payload: {exc}") from exc
            if not data:
                raise AgentBadResponse("empty image payload")
            return data

        return with_retries(self.config, call)


def make_live_suite() -> AgentSuite:
    vision = AgentConfig(
        backend="live",
        endpoint=os.environ.get("VISION_API_URL"),
        credentials=os.environ.get("VISION_API_KEY"),
        model_name=os.environ.get("VISION_MODEL", "gpt-4o"),
    )
    sd = AgentConfig(
        backend="live",
        endpoint=os.environ.get("SD_API_URL"),
        credentials=os.environ.get("SD_API_KEY"),
        model_name=os.environ.get("SD_MODEL", "juggernaut-xl"),
    )
    chat = ChatCompletionsClient(vision)
    return AgentSuite(
        analyzer=LiveAnalyzer(chat),
        storywriter=LiveStorywriter(chat),
        summarizer=LiveSummarizer(chat),
        illustrator=TextToImageClient(sd),
    )
