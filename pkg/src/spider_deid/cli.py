"""Command-line interface: key management, envelope seal/open, pipeline runs,
tradeoff curves, the attestation demo, and the HTTP service."""

from __future__ import annotations

import base64
import functools
import json
import os
import sys
from pathlib import Path

import click

from .attestation import LoopbackTransport, MessageBus, Tamper, run_session
from .demo import build_demo_session
from .envelope import generate_keypair, keypair_from_private, open_envelope, seal
from .errors import SpiderError
from .pipeline import parse_pipeline_config, run_pipeline, tradeoff_from_json
from .tabular import load_dataset, schema_from_json

DEFAULT_LISTEN = "127.0.0.1:8000"


def _fail(error: SpiderError) -> None:
    click.echo(json.dumps(error.to_json()), err=True)
    sys.exit(1)


def spider_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SpiderError as exc:
            _fail(exc)

    return wrapper


def _read_key_material(value: str, base_dir: Path | None = None) -> bytes:
    """Key bytes from '@path', a filesystem path, or inline base64."""
    if value.startswith("@"):
        path = Path(value[1:])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return base64.b64decode(path.read_text().strip())
    path = Path(value)
    if path.exists():
        return base64.b64decode(path.read_text().strip())
    return base64.b64decode(value)


@click.group()
def main():
    """End-to-end encrypted data de-identification pipeline."""


@main.command()
@click.option("-o", "--out-dir", type=click.Path(path_type=Path), required=True)
@click.option("--name", default="key", show_default=True, help="Basename for the key files.")
def keygen(out_dir: Path, name: str):
    """Generate an envelope keypair; writes NAME.key and NAME.pub."""
    out_dir.mkdir(parents=True, exist_ok=True)
    keys = generate_keypair()
    (out_dir / f"{name}.key").write_text(base64.b64encode(keys.private_key).decode() + "\n")
    (out_dir / f"{name}.pub").write_text(base64.b64encode(keys.public_key).decode() + "\n")
    click.echo(f"fingerprint: {keys.fingerprint.hex()}")


@main.command("seal")
@click.option("--recipient-pub", required=True, help="Recipient public key (path, @path or base64).")
@click.option("-i", "--input", "input_path", type=click.Path(path_type=Path), required=True)
@click.option("-o", "--output", "output_path", type=click.Path(path_type=Path), required=True)
@spider_errors
def seal_cmd(recipient_pub: str, input_path: Path, output_path: Path):
    """Seal a file to a recipient public key."""
    envelope = seal(input_path.read_bytes(), _read_key_material(recipient_pub))
    output_path.write_bytes(envelope.to_bytes())
    click.echo(f"sealed {input_path} -> {output_path} ({envelope.payload_length} payload bytes)")


@main.command("open")
@click.option("--key", required=True, help="Recipient private key (path, @path or base64).")
@click.option("-i", "--input", "input_path", type=click.Path(path_type=Path), required=True)
@click.option("-o", "--output", "output_path", type=click.Path(path_type=Path), required=True)
@spider_errors
def open_cmd(key: str, input_path: Path, output_path: Path):
    """Open a sealed envelope."""
    plaintext = open_envelope(input_path.read_bytes(), _read_key_material(key))
    output_path.write_bytes(plaintext)
    click.echo(f"opened {input_path} -> {output_path} ({len(plaintext)} bytes)")


@main.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path), required=True)
@click.option("--input", "input_path", type=click.Path(path_type=Path), required=True)
@click.option("--output", "output_path", type=click.Path(path_type=Path), required=True)
@click.option("--report", "report_path", type=click.Path(path_type=Path), default=None)
@spider_errors
def run(config_path: Path, input_path: Path, output_path: Path, report_path: Path | None):
    """Run the de-identification pipeline on a sealed input."""
    config_obj = json.loads(config_path.read_text())
    config = parse_pipeline_config(config_obj)
    encryption = config_obj.get("encryption") or {}
    if "provider_public_key" not in encryption or "enclave_private_key" not in encryption:
        raise click.UsageError(
            "config.encryption must provide provider_public_key and enclave_private_key"
        )
    base_dir = config_path.parent
    provider_public = _read_key_material(encryption["provider_public_key"], base_dir)
    enclave = keypair_from_private(_read_key_material(encryption["enclave_private_key"], base_dir))

    output, report = run_pipeline(config, input_path.read_bytes(), enclave, provider_public)
    output_path.write_bytes(output.to_bytes())
    report_json = json.dumps(report.to_json(), indent=2)
    if report_path is not None:
        report_path.write_text(report_json + "\n")
    click.echo(report_json)


@main.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path), required=True,
              help="JSON with schema and query (and optionally epsilons/trials/seed).")
@click.option("--input", "input_path", type=click.Path(path_type=Path), required=True,
              help="Plaintext CSV (tradeoff tuning runs on the provider's own data).")
@click.option("--eps", default=None, help="Comma-separated epsilon grid, overrides the config.")
@click.option("--trials", type=int, default=None)
@click.option("--seed", type=int, default=None)
@spider_errors
def tradeoff(config_path: Path, input_path: Path, eps: str | None, trials: int | None,
             seed: int | None):
    """Print the MAE-versus-epsilon curve for a query."""
    obj = json.loads(config_path.read_text())
    if eps is not None:
        obj["epsilons"] = [float(e) for e in eps.split(",") if e.strip()]
    if trials is not None:
        obj["trials"] = trials
    if seed is not None:
        obj["seed"] = seed
    dataset = load_dataset(input_path.read_bytes(), schema_from_json(obj["schema"]))
    click.echo(json.dumps(tradeoff_from_json(dataset, obj), indent=2))


@main.command("attest-demo")
@click.option("--tamper", type=click.Choice([t.value for t in Tamper]), default=None)
@click.option("--socket-transport", is_flag=True,
              help="Route messages through a framed loopback socket.")
def attest_demo(tamper: str | None, socket_transport: bool):
    """Run the five-party attestation demo session; exit 1 on rejection."""
    config = build_demo_session(tamper=tamper)
    transport = LoopbackTransport() if socket_transport else None
    try:
        transcript = run_session(config, bus=MessageBus(transport))
    finally:
        if transport is not None:
            transport.close()
    click.echo(json.dumps(transcript.to_json(), indent=2))
    if not transcript.success:
        sys.exit(1)


@main.command()
@click.option("--bind", default=None, help=f"host:port (default $SPIDER_LISTEN or {DEFAULT_LISTEN})")
@click.option("--api-token", default=None, help="Require this bearer token on POST /runs.")
def serve(bind: str | None, api_token: str | None):
    """Serve the HTTP API."""
    import uvicorn

    from .service import create_app

    bind = bind or os.environ.get("SPIDER_LISTEN", DEFAULT_LISTEN)
    host, _, port = bind.rpartition(":")
    app = create_app(api_token=api_token)
    keys = app.state.enclave_keys
    click.echo(f"enclave public key: {base64.b64encode(keys.public_key).decode()}")
    click.echo(f"enclave fingerprint: {keys.fingerprint.hex()}")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))


if __name__ == "__main__":
    main()
