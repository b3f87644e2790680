from __future__ import annotations

import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from imageteller.agents import AgentSuite
from imageteller.agents.mock import (
    MockAnalyzer,
    MockIllustrator,
    MockStorywriter,
    MockSummarizer,
    make_mock_suite,
)
from imageteller.pipeline import PlotManager
from imageteller.service import create_app

from conftest import make_png


@pytest.fixture
def client(tmp_path):
    app = create_app(
        data_dir=tmp_path, manager=PlotManager(make_mock_suite()), run_jobs_inline=True
    )
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


def upload(client, count=2, captions=None, kind="story", genre=None):
    files = [
        ("frames", (f"f{i}.png", make_png(color=(i * 30, 0, 0)), "image/png"))
        for i in range(1, count + 1)
    ]
    data = {"kind": kind}
    if captions is not None:
        data["captions"] = json.dumps(captions)
    if genre is not None:
        data["genre"] = genre
    return client.post("/api/jobs", files=files, data=data)


class TestCreateJob:
    def test_dalek_shape(self, client):
        response = upload(client, 2, captions=["Dalek imprisoned", None])
        assert response.status_code == 202
        job_id = response.json()["job_id"]
        body = client.get(f"/api/jobs/{job_id}").json()
        assert body["state"] == "Done"
        story = body["story"]
        assert len(story["chapters"]) >= 2
        assert "Dalek imprisoned" in story["descriptions"][0]["text"]

    def test_no_frames_rejected(self, client):
        response = client.post("/api/jobs", data={"kind": "story"})
        assert response.status_code == 422 or response.status_code == 400

    def test_bad_bytes_rejected(self, client):
        files = [("frames", ("f.png", b"not an image", "image/png"))]
        response = client.post("/api/jobs", files=files, data={"kind": "story"})
        assert response.status_code == 400
        error = response.json()["error"]
        assert error["code"] == "ValidationFailed"
        assert error["detail"][0]["code"] == "BadImageFormat"

    def test_genre_reaches_final_prompt(self, client):
        job_id = upload(client, 1, genre="Tragedy").json()["job_id"]
        story = client.get(f"/api/jobs/{job_id}").json()["story"]
        assert (
            "The world is just but governed by fate and unforgiving."
            in story["final_prompt"]
        )

    def test_unknown_genre_lists_valid_ones(self, client):
        response = upload(client, 1, genre="Tragicomedy")
        assert response.status_code == 400
        assert "Tragedy" in response.json()["error"]["detail"]["valid_genres"]

    def test_data_storytelling_genre_routes_to_data_prompt(self, client):
        job_id = upload(client, 1, genre="Data Storytelling").json()["job_id"]
        story = client.get(f"/api/jobs/{job_id}").json()["story"]
        assert "Highlight key insights" in story["final_prompt"]


class TestGetJob:
    def test_unknown_job(self, client):
        response = client.get("/api/jobs/nope")
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "NotFound"

    def test_idempotent_reads(self, client):
        job_id = upload(client).json()["job_id"]
        a = client.get(f"/api/jobs/{job_id}").json()
        b = client.get(f"/api/jobs/{job_id}").json()
        assert a == b

    def test_media_served(self, client):
        job_id = upload(client).json()["job_id"]
        story = client.get(f"/api/jobs/{job_id}").json()["story"]
        ref = story["chapters"][0]["illustration"]["image_ref"]
        assert ref.startswith("/media/jobs/")
        media = client.get(ref)
        assert media.status_code == 200
        assert media.content.startswith(b"\x89PNG")


class TestRegenerate:
    def test_illustration_regeneration_preserves_text(self, client):
        job_id = upload(client).json()["job_id"]
        before = client.get(f"/api/jobs/{job_id}").json()["story"]
        response = client.post(
            f"/api/stories/{job_id}/regenerate",
            json={"target": "illustration", "chapter": 1},
        )
        assert response.status_code == 200
        after = response.json()["story"]
        assert after["chapters"][0]["body"] == before["chapters"][0]["body"]
        assert (
            after["chapters"][0]["illustration"]["seed"]
            != before["chapters"][0]["illustration"]["seed"]
        )

    def test_chapter_regeneration_locality(self, client):
        job_id = upload(client, 2).json()["job_id"]
        before = client.get(f"/api/jobs/{job_id}").json()["story"]
        after = client.post(
            f"/api/stories/{job_id}/regenerate",
            json={"target": "chapter", "chapter": 2},
        ).json()["story"]
        assert after["chapters"][0]["body"] == before["chapters"][0]["body"]
        assert after["chapters"][1]["body"] != before["chapters"][1]["body"]

    def test_unknown_chapter(self, client):
        job_id = upload(client).json()["job_id"]
        response = client.post(
            f"/api/stories/{job_id}/regenerate",
            json={"target": "chapter", "chapter": 99},
        )
        assert response.status_code == 404

    def test_unknown_story(self, client):
        response = client.post(
            "/api/stories/does-not-exist/regenerate",
            json={"target": "chapter", "chapter": 1},
        )
        assert response.status_code == 404

    def test_concurrent_regeneration_conflicts(self, tmp_path):
        class SlowIllustrator(MockIllustrator):
            def generate_image(self, spec, params):
                time.sleep(0.4)
                return super().generate_image(spec, params)

        suite = AgentSuite(
            analyzer=MockAnalyzer(),
            storywriter=MockStorywriter(),
            summarizer=MockSummarizer(),
            illustrator=SlowIllustrator(),
        )
        app = create_app(
            data_dir=tmp_path, manager=PlotManager(suite), run_jobs_inline=True
        )
        with TestClient(app) as client:
            job_id = upload(client, 1).json()["job_id"]
            statuses = []

            def regen():
                response = client.post(
                    f"/api/stories/{job_id}/regenerate",
                    json={"target": "illustration", "chapter": 1},
                )
                statuses.append(response.status_code)

            threads = [threading.Thread(target=regen) for _ in range(2)]
            for t in threads:
                t.start()
                time.sleep(0.05)
            for t in threads:
                t.join()
            assert sorted(statuses) == [200, 409]


class TestLibraryEndpoints:
    def test_save_get_list_flow(self, client):
        job_id = upload(client).json()["job_id"]
        saved = client.post("/api/stories", json={"job_id": job_id})
        assert saved.status_code == 201
        story_id = saved.json()["id"]

        fetched = client.get(f"/api/stories/{story_id}")
        assert fetched.status_code == 200
        story = fetched.json()["story"]
        assert story["id"] == story_id
        ref = story["chapters"][0]["illustration"]["image_ref"]
        assert ref.startswith(f"/media/stories/{story_id}/")
        assert client.get(ref).status_code == 200

        library = client.get("/api/library").json()["entries"]
        assert [e["id"] for e in library] == [story_id]

    def test_library_newest_first(self, client):
        ids = []
        for _ in range(3):
            job_id = upload(client).json()["job_id"]
            ids.append(client.post("/api/stories", json={"job_id": job_id}).json()["id"])
        library = client.get("/api/library").json()["entries"]
        assert [e["id"] for e in library] == sorted(ids, reverse=True)

    def test_delete_story(self, client):
        job_id = upload(client).json()["job_id"]
        story_id = client.post("/api/stories", json={"job_id": job_id}).json()["id"]
        assert client.delete(f"/api/stories/{story_id}").status_code == 200
        assert client.get(f"/api/stories/{story_id}").status_code == 404
        assert client.delete(f"/api/stories/{story_id}").status_code == 404

    def test_get_story_zero(self, client):
        assert client.get("/api/stories/0").status_code == 404

    def test_save_unknown_job(self, client):
        assert client.post("/api/stories", json={"job_id": "nope"}).status_code == 404

    def test_regenerate_saved_story(self, client):
        job_id = upload(client).json()["job_id"]
        story_id = client.post("/api/stories", json={"job_id": job_id}).json()["id"]
        response = client.post(
            f"/api/stories/{story_id}/regenerate",
            json={"target": "illustration", "chapter": 1},
        )
        assert response.status_code == 200
        assert response.json()["story"]["id"] == story_id


class TestGenresEndpoint:
    def test_catalog_served(self, client):
        genres = client.get("/api/genres").json()["genres"]
        assert [g["name"] for g in genres] == [
            "Comedy", "Romance", "Tragedy", "Satire", "Mystery", "Data Storytelling",
        ]
        assert genres[5]["data_driven"] is True


class TestErrorShape:
    def test_errors_use_documented_shape(self, client):
        for response in (
            client.get("/api/jobs/nope"),
            client.get("/api/stories/0"),
            upload(client, 1, genre="Nope"),
        ):
            body = response.json()
            assert set(body) == {"error"}
            assert {"code", "message"} <= set(body["error"])


class TestAuth:
    def test_token_enforced(self, tmp_path):
        app = create_app(
            data_dir=tmp_path,
            manager=PlotManager(make_mock_suite()),
            run_jobs_inline=True,
            api_token="sekrit",
        )
        with TestClient(app) as client:
            assert client.get("/api/library").status_code == 401
            ok = client.get(
                "/api/library", headers={"Authorization": "Bearer sekrit"}
            )
            assert ok.status_code == 200
