"""Command-line client for the service.

By default the CLI talks to an in-process instance of the FastAPI app, so no
server needs to be running; --server points it at a remote instance instead.

Exit codes: 0 success, 1 analysis failure (e.g. --expect-key not recovered),
2 usage or configuration error.
"""

from __future__ import annotations

import json
import sys

import click
import httpx
import uvicorn


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _post(ctx, path: str, payload: dict) -> dict:
    with _client(ctx.obj.get("server")) as client:
        resp = client.post(path, json=payload)
    try:
        body = resp.json()
    except Exception:
        body = {"error_class": "HTTPError", "message": resp.text}
    if resp.status_code != 200:
        click.echo(f"error [{body.get('error_class', resp.status_code)}]: "
                   f"{body.get('message', body)}", err=True)
        sys.exit(2)
    return body


def _finish(body: dict) -> None:
    click.echo(json.dumps(body, indent=2))
    if body.get("success") is False:
        sys.exit(1)


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Remote service URL; defaults to an in-process service.")
@click.pass_context
def main(ctx, server):
    """Impedance side-channel toolkit: simulate devices, mount attacks, report."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Run the service as a standalone HTTP daemon."""
    from .service import app
    uvicorn.run(app, host=host, port=port)


@main.command("tl-model")
@click.option("--start-hz", type=float, required=True)
@click.option("--stop-hz", type=float, required=True)
@click.option("--points", type=int, required=True)
@click.option("--eps-r", "relative_permittivity", type=float, required=True)
@click.option("--length-m", type=float, required=True)
@click.option("--printed-exponent", is_flag=True,
              help="Use the alternate exponent-sign closed form (see docs).")
@click.option("--out", "out_csv", required=True, type=click.Path())
@click.pass_context
def tl_model(ctx, **kw):
    """Sweep the ideal transmission-line S11 model to CSV."""
    _finish(_post(ctx, "/tl-model", kw))


@main.command("simulate")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def simulate(ctx, **kw):
    """Run a campaign config and write a trace archive."""
    _finish(_post(ctx, "/simulate", kw))


@main.command("dima")
@click.option("--traces", "traces_path", required=True, type=click.Path(exists=True))
@click.option("--bit", "bit_index", type=int, default=None,
              help="Target intermediate bit; omit for multi-bit analysis.")
@click.option("--score", type=click.Choice(["mean", "max"]), default="mean")
@click.option("--key-space-bits", type=int, default=8)
@click.option("--band-report", "band_report_csv", type=click.Path(), default=None)
@click.option("--expect-key", default=None)
@click.pass_context
def dima(ctx, **kw):
    """Differential impedance analysis over a trace archive."""
    _finish(_post(ctx, "/dima", kw))


@main.command("cima")
@click.option("--traces", "traces_path", required=True, type=click.Path(exists=True))
@click.option("--key-space-bits", type=int, default=8)
@click.option("--band-report", "band_report_csv", type=click.Path(), default=None)
@click.option("--top-keys", "top_keys_csv", type=click.Path(), default=None)
@click.option("--expect-key", default=None)
@click.pass_context
def cima(ctx, **kw):
    """Correlation impedance analysis (Hamming-weight model)."""
    _finish(_post(ctx, "/cima", kw))


@main.command("tima-profile")
@click.option("--traces", "traces_path", required=True, type=click.Path(exists=True))
@click.option("--bits", type=int, default=None, help="Target bit count (ids derived).")
@click.option("--bit-ids", default=None, help="Comma-separated explicit bit ids.")
@click.option("--pois", type=int, default=5)
@click.option("--alpha", type=float, default=0.01)
@click.option("--ridge", type=float, default=1e-6)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def tima_profile(ctx, bit_ids, **kw):
    """Build per-bit Gaussian templates from a labeled archive."""
    kw["bit_ids"] = bit_ids.split(",") if bit_ids else None
    _finish(_post(ctx, "/tima/profile", kw))


@main.command("tima-attack")
@click.option("--templates", "templates_path", required=True, type=click.Path(exists=True))
@click.option("--traces", "traces_path", required=True, type=click.Path(exists=True))
@click.option("--accumulate", type=click.Choice(["log", "prob"]), default="log")
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.option("--expect-key", default=None)
@click.pass_context
def tima_attack(ctx, **kw):
    """Classify attack traces against templates and recover shares/key."""
    _finish(_post(ctx, "/tima/attack", kw))


@main.command("report")
@click.option("--which", required=True)
@click.option("--traces", "traces_path", required=True, type=click.Path(exists=True))
@click.option("--label", default=None)
@click.option("--labels", default=None, help="Comma-separated bit labels.")
@click.option("--out", "out_csv", required=True, type=click.Path())
@click.pass_context
def report(ctx, labels, **kw):
    """Emit figure data (DM curves etc.) from an archive."""
    kw["labels"] = labels.split(",") if labels else None
    _finish(_post(ctx, "/report", kw))


@main.command("ingest")
@click.option("--touchstone", "touchstone_path", type=click.Path(exists=True), default=None)
@click.option("--csv", "csv_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def ingest(ctx, **kw):
    """Convert a one-port Touchstone or CSV sweep into a trace archive."""
    _finish(_post(ctx, "/ingest", kw))


if __name__ == "__main__":
    main()
