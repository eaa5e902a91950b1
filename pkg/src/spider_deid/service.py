"""HTTP service: submit runs, poll status, fetch sealed outputs, explore the
privacy-utility tradeoff, and drive the attestation demo.

Run state lives in memory; each run executes on its own thread with an
independent RNG, so status reads are safe while a run is executing.
"""

from __future__ import annotations

import base64
import threading
import uuid

from fastapi import FastAPI, HTTPException, Request, Response

from . import attestation
from .demo import build_demo_session
from .envelope import KeyPair, generate_keypair, open_envelope
from .errors import SpiderError
from .pipeline import parse_pipeline_config, run_pipeline, tradeoff_from_json
from .tabular import load_dataset, schema_from_json


class RunState:
    def __init__(self, run_id: str):
        self.run_id = run_id
        self.status = "queued"
        self.report: dict | None = None
        self.output: bytes | None = None
        self.error: dict | None = None

    def to_json(self) -> dict:
        out = {"run_id": self.run_id, "status": self.status}
        if self.report is not None:
            out["report"] = self.report
        if self.error is not None:
            out["error"] = self.error
        return out


def _b64_field(body: dict, key: str) -> bytes:
    try:
        return base64.b64decode(body[key])
    except (KeyError, TypeError, ValueError):
        raise HTTPException(422, detail=f"missing or malformed base64 field {key!r}")


def _encryption_keys(config_obj: dict, app_keys: KeyPair) -> tuple[KeyPair, bytes]:
    encryption = config_obj.get("encryption") or {}
    if "provider_public_key" not in encryption:
        raise HTTPException(422, detail="config.encryption.provider_public_key is required")
    provider_public = base64.b64decode(encryption["provider_public_key"])
    if encryption.get("enclave_private_key"):
        from .envelope import keypair_from_private

        enclave = keypair_from_private(base64.b64decode(encryption["enclave_private_key"]))
    else:
        enclave = app_keys
    return enclave, provider_public


def create_app(enclave_keys: KeyPair | None = None, api_token: str | None = None) -> FastAPI:
    app = FastAPI(title="spider-deid")
    app.state.enclave_keys = enclave_keys or generate_keypair()
    app.state.api_token = api_token
    app.state.runs: dict[str, RunState] = {}
    app.state.lock = threading.Lock()

    def check_auth(request: Request) -> None:
        if app.state.api_token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {app.state.api_token}":
            raise HTTPException(401, detail="missing or invalid bearer token")

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/enclave-key")
    def enclave_key():
        keys: KeyPair = app.state.enclave_keys
        return {
            "public_key": base64.b64encode(keys.public_key).decode(),
            "fingerprint": keys.fingerprint.hex(),
        }

    @app.post("/runs", status_code=202)
    async def post_runs(request: Request):
        check_auth(request)
        body = await request.json()
        if "config" not in body:
            raise HTTPException(422, detail="body requires 'config'")
        try:
            config = parse_pipeline_config(body["config"])
        except SpiderError as exc:
            raise HTTPException(400, detail=exc.to_json())
        envelope_bytes = _b64_field(body, "input_b64")
        enclave, provider_public = _encryption_keys(body["config"], app.state.enclave_keys)

        state = RunState(uuid.uuid4().hex)
        with app.state.lock:
            app.state.runs[state.run_id] = state

        def execute():
            state.status = "running"
            try:
                output, report = run_pipeline(config, envelope_bytes, enclave, provider_public)
            except SpiderError as exc:
                state.error = exc.to_json()
                state.status = "failed"
                return
            state.output = output.to_bytes()
            state.report = report.to_json()
            state.status = "done"

        threading.Thread(target=execute, daemon=True).start()
        return {"run_id": state.run_id}

    def _get_run(run_id: str) -> RunState:
        with app.state.lock:
            state = app.state.runs.get(run_id)
        if state is None:
            raise HTTPException(404, detail=f"unknown run {run_id!r}")
        return state

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        return _get_run(run_id).to_json()

    @app.get("/runs/{run_id}/output")
    def get_run_output(run_id: str):
        state = _get_run(run_id)
        if state.status != "done" or state.output is None:
            raise HTTPException(409, detail=f"run {run_id!r} is {state.status}, not done")
        return Response(content=state.output, media_type="application/octet-stream")

    @app.post("/tradeoff")
    async def post_tradeoff(request: Request):
        body = await request.json()
        for key in ("schema", "query", "epsilons"):
            if key not in body:
                raise HTTPException(422, detail=f"body requires {key!r}")
        try:
            schema = schema_from_json(body["schema"])
            if "csv_b64" in body:
                csv_bytes = _b64_field(body, "csv_b64")
            else:
                envelope = _b64_field(body, "input_b64")
                csv_bytes = open_envelope(envelope, app.state.enclave_keys.private_key)
            dataset = load_dataset(csv_bytes, schema)
            points = tradeoff_from_json(dataset, body)
        except SpiderError as exc:
            raise HTTPException(400, detail=exc.to_json())
        return {"points": points}

    @app.post("/attest/session")
    async def post_attest_session(request: Request):
        body = await request.json() if await request.body() else {}
        tamper = body.get("tamper")
        try:
            config = build_demo_session(tamper=tamper)
        except ValueError:
            raise HTTPException(422, detail=f"unknown tamper case {tamper!r}")
        transcript = attestation.run_session(config)
        return transcript.to_json()

    return app
