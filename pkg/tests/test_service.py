"""HTTP service contracts: endpoints, error envelopes, and status codes."""

from __future__ import annotations

import numpy as np
import pytest
from fastapi.testclient import TestClient

from heatpoint import Coordinate, EncodingConfig, Heatmap, encode, hmap_to_bytes
from heatpoint.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


RECORD = {
    "id": "sample-0",
    "landmarks": [[100.5, 120.25], [40.0, 60.0], [200.0, 30.0]],
}


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert "version" in body


def test_encode_decode_round_trip(client):
    resp = client.post(
        "/encode",
        json={"records": [RECORD], "width": 64, "height": 64, "downsample": 4.0},
    )
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "application/octet-stream"
    blob = resp.content
    assert len(blob) == 24 + 3 * 64 * 64 * 4

    decoded = client.post("/decode", content=blob)
    assert decoded.status_code == 200
    rec = decoded.json()["records"][0]
    assert rec["id"] == "decoded"
    assert "flags" not in rec
    for got, want in zip(rec["landmarks"], RECORD["landmarks"]):
        assert got[0] == pytest.approx(want[0], abs=1e-3)
        assert got[1] == pytest.approx(want[1], abs=1e-3)


def test_decode_honors_explicit_downsample(client):
    blob = client.post(
        "/encode", json={"records": [RECORD], "width": 64, "height": 64}
    ).content
    halved = client.post("/decode", params={"downsample": 2.0}, content=blob)
    rec = halved.json()["records"][0]
    assert rec["landmarks"][0][0] == pytest.approx(100.5 / 2.0, abs=1e-3)


def test_encode_rejects_multiple_records(client):
    two = [RECORD, {**RECORD, "id": "sample-1"}]
    resp = client.post("/encode", json={"records": two, "width": 64, "height": 64})
    assert resp.status_code == 400
    body = resp.json()
    assert body["kind"] == "invalid-input"
    assert body["exit_code"] == 1


def test_encode_schema_errors_use_the_format_bucket(client):
    resp = client.post(
        "/encode", json={"records": [{"id": "a"}], "width": 64, "height": 64}
    )
    assert resp.status_code == 400
    body = resp.json()
    assert body["kind"] == "annotation-schema"
    assert body["exit_code"] == 2


def test_encode_empty_records_round_trips(client):
    resp = client.post("/encode", json={"records": [], "width": 64, "height": 64})
    assert resp.status_code == 200
    assert len(resp.content) == 24
    decoded = client.post("/decode", content=resp.content)
    assert decoded.json()["records"][0]["landmarks"] == []


def test_decode_rejects_garbage_bytes(client):
    resp = client.post("/decode", content=b"not a container at all, padded past the header")
    assert resp.status_code == 400
    body = resp.json()
    assert body["kind"] == "bad-magic"
    assert body["exit_code"] == 2
    assert body["offset"] == 0


def test_decode_flags_failed_maps_but_keeps_going(client):
    flat = Heatmap(np.zeros((16, 16)))
    good = encode(Coordinate(30.0, 22.0), EncodingConfig(downsample=16.0), 16, 16)
    blob = hmap_to_bytes([flat, good])
    resp = client.post("/decode", content=blob)
    assert resp.status_code == 200
    rec = resp.json()["records"][0]
    assert rec["flags"] == ["failed", None]
    assert rec["landmarks"][0] == [0.0, 0.0]
    assert rec["landmarks"][1][0] == pytest.approx(30.0, abs=1e-3)
    assert rec["landmarks"][1][1] == pytest.approx(22.0, abs=1e-3)


def test_decode_unknown_decoder_name(client):
    blob = hmap_to_bytes([Heatmap(np.eye(4))])
    resp = client.post("/decode", params={"decoder": "argmax"}, content=blob)
    assert resp.status_code == 400
    body = resp.json()
    assert body["kind"] == "invalid-config"
    assert body["exit_code"] == 1


def test_bench_endpoint_small_run(client):
    resp = client.post(
        "/bench",
        json={"resolutions": [8], "decoders": ["one-hot"], "samples": 5, "workers": 2},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["cells"]) == 1
    assert body["cells"][0]["decoder"] == "one-hot"
    assert body["cells"][0]["samples"] == 5
    assert body["nme_text"].startswith("NME (")
    assert body["timing_csv"].startswith("# decode-time-us")


def test_sweep_endpoint_marks_missing_cells(client):
    resp = client.post(
        "/sweep-anchors", json={"resolutions": [8, 4], "kernels": [2, 5], "samples": 5}
    )
    assert resp.status_code == 200
    cells = {(c["kernel"], c["resolution"]): c["nme"] for c in resp.json()["cells"]}
    assert cells[(5, 4)] is None
    assert cells[(2, 4)] is not None


def test_eval_endpoint(client):
    resp = client.post("/eval", json={"gt": [RECORD], "predictions": [RECORD]})
    assert resp.status_code == 200
    body = resp.json()
    assert body["nme_mean"] == 0.0
    assert body["failures"] == 0
    assert body["n_samples"] == 1


def test_eval_failed_landmarks_become_null_columns(client):
    gt = {"id": "a", "landmarks": [[1.0, 2.0]]}
    pred = {"id": "a", "landmarks": [[9.0, 9.0]], "flags": ["failed"]}
    body = client.post("/eval", json={"gt": [gt], "predictions": [pred]}).json()
    assert body["nme_per_landmark"] == [None]
    assert body["failures"] == 1
    assert body["nme_mean"] == 0.0


def test_eval_count_mismatch_is_a_schema_error(client):
    gt = {"id": "a", "landmarks": [[1.0, 2.0]]}
    pred = {"id": "a", "landmarks": [[1.0, 2.0], [3.0, 4.0]]}
    resp = client.post("/eval", json={"gt": [gt], "predictions": [pred]})
    assert resp.status_code == 400
    assert resp.json()["kind"] == "annotation-schema"
    assert resp.json()["exit_code"] == 2


def test_eval_id_mismatch_is_invalid_input(client):
    gt = {"id": "a", "landmarks": [[1.0, 2.0]]}
    pred = {"id": "b", "landmarks": [[1.0, 2.0]]}
    resp = client.post("/eval", json={"gt": [gt], "predictions": [pred]})
    assert resp.status_code == 400
    assert resp.json()["kind"] == "invalid-input"


def test_request_validation_envelope(client):
    resp = client.post("/bench", json={"samples": "lots"})
    assert resp.status_code == 422
    body = resp.json()
    assert body["kind"] == "request-validation"
    assert body["exit_code"] == 1
    assert "samples" in body["detail"]
