from __future__ import annotations

import io
from pathlib import Path

import pytest
from PIL import Image

from imageteller.domain import InputFrame, NarrativeKind, NarrativeRequest, genre_catalog
from imageteller.prompts import EmphasisPlan

FIXTURES = Path(__file__).parent / "fixtures"


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(id): marks a test as one acceptance criterion"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and report.when == "call":
        verdict = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        print(f"\nACCEPTANCE {marker.args[0]}: {verdict}")


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8").rstrip("\n")


@pytest.fixture
def tryst_description() -> str:
    return fixture_text("tryst_description.txt")


@pytest.fixture
def tragedy_final_prompt() -> str:
    return fixture_text("tragedy_final_prompt.txt")


@pytest.fixture
def tryst_event() -> str:
    return fixture_text("tryst_event.txt")


@pytest.fixture
def illustration_positive() -> str:
    return fixture_text("illustration_positive.txt")


@pytest.fixture
def illustration_negative() -> str:
    return fixture_text("illustration_negative.txt")


@pytest.fixture
def camelot_story() -> str:
    return (FIXTURES / "camelot_story.md").read_text(encoding="utf-8")


def make_png(color=(120, 30, 60), size=(16, 16)) -> bytes:
    img = Image.new("RGB", size, color)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def make_frames(count: int, captions: dict[int, str] | None = None) -> tuple[InputFrame, ...]:
    captions = captions or {}
    return tuple(
        InputFrame(
            index=i,
            image_data=make_png(color=(i * 20 % 256, 80, 160)),
            media_type="png",
            caption=captions.get(i),
        )
        for i in range(1, count + 1)
    )


def make_request(count: int = 2, kind: str = "story_free", genre_name: str | None = None,
                 captions: dict[int, str] | None = None) -> NarrativeRequest:
    if kind == "story_genre":
        k = NarrativeKind.story_with_genre(genre_catalog().genre(genre_name or "Tragedy"))
    elif kind == "data_driven":
        k = NarrativeKind.data_driven()
    else:
        k = NarrativeKind.story_free()
    return NarrativeRequest(frames=make_frames(count, captions), kind=k)


def plan_from_emphasized(emphasized: str) -> tuple[str, EmphasisPlan]:
    """Oracle: recover (plain text, plan) from a parenthesis-emphasized string.

    Walks the string, treating runs of 2 or 3 parentheses as emphasis
    markers; anything else is plain text.
    """
    plain: list[str] = []
    spans: list[tuple[int, int, int]] = []
    i = 0
    open_stack: list[tuple[int, int]] = []  # (plain offset, level)
    while i < len(emphasized):
        ch = emphasized[i]
        if ch == "(":
            j = i
            while j < len(emphasized) and emphasized[j] == "(":
                j += 1
            open_stack.append((len(plain), j - i))
            i = j
        elif ch == ")":
            j = i
            while j < len(emphasized) and emphasized[j] == ")":
                j += 1
            start, level = open_stack.pop()
            assert level == j - i, "unbalanced emphasis markers"
            spans.append((start, len(plain), level))
            i = j
        else:
            plain.append(ch)
            i += 1
    assert not open_stack
    return "".join(plain), EmphasisPlan(tuple(sorted(spans)))
