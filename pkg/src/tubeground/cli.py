"""Thin command-line client for the grounding service.

Every subcommand builds a service request model and either calls the
in-process handler (default) or POSTs it to a running server given with
``--server http://host:port``. Heavy lifting lives in the core package; this
module only parses flags and prints JSON.
"""

from __future__ import annotations

import json
from typing import Any

import click

from .config import load_run_config
from .service import schemas
from .service.app import (
    handle_decode,
    handle_eval,
    handle_generate,
    handle_stats,
    handle_train,
)

_ENDPOINTS = {
    schemas.GenerateRequest: ("/generate", handle_generate),
    schemas.TrainRequest: ("/train", handle_train),
    schemas.EvalRequest: ("/eval", handle_eval),
    schemas.DecodeRequest: ("/decode", handle_decode),
    schemas.StatsRequest: ("/stats", handle_stats),
}


def _dispatch(ctx: click.Context, request: Any) -> dict:
    path, handler = _ENDPOINTS[type(request)]
    server = ctx.obj.get("server")
    if server:
        import httpx

        response = httpx.post(server.rstrip("/") + path, json=request.model_dump(), timeout=None)
        if response.status_code >= 400:
            raise click.ClickException(f"server returned {response.status_code}: {response.text}")
        return response.json()
    return handler(request).model_dump()


def _emit(payload: dict) -> None:
    click.echo(json.dumps(payload, indent=1, sort_keys=True))


@click.group()
@click.option("--server", default=None, help="Base URL of a running service; default runs in-process.")
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Spatio-temporal sentence grounding toolkit."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--seed", default=0, show_default=True)
@click.option("--samples", default=20, show_default=True)
@click.option("--objects", default=2, show_default=True)
@click.option("--regions", default=4, show_default=True)
@click.option("--frames", default=24, show_default=True)
@click.option("--feature-dim", default=16, show_default=True)
@click.option("--frame-feature-dim", default=8, show_default=True)
@click.option("--interrogative-fraction", default=0.5, show_default=True)
@click.pass_context
def generate(ctx, out_dir, seed, samples, objects, regions, frames, feature_dim, frame_feature_dim, interrogative_fraction):
    """Write a synthetic dataset (annotations + feature store)."""
    req = schemas.GenerateRequest(
        out_dir=out_dir,
        seed=seed,
        num_samples=samples,
        num_objects=objects,
        num_regions=regions,
        num_frames=frames,
        feature_dim=feature_dim,
        frame_feature_dim=frame_feature_dim,
        interrogative_fraction=interrogative_fraction,
    )
    _emit(_dispatch(ctx, req))


def _run_config_options(fn):
    opts = [
        click.option("--config", "config_file", type=click.Path(exists=True), default=None,
                     help="key = value config file; flags override it."),
        click.option("--seed", type=int, default=None),
        click.option("--epochs", type=int, default=None),
        click.option("--batch-size", type=int, default=None),
        click.option("--lr", "learning_rate", type=float, default=None),
        click.option("--layers", type=int, default=None, help="Reasoning layer count."),
        click.option("--model-dim", type=int, default=None),
        click.option("--lang-hidden", type=int, default=None),
        click.option("--frame-hidden", type=int, default=None),
        click.option("--word-dim", type=int, default=None),
        click.option("--window", type=int, default=None, help="Temporal link window."),
        click.option("--widths", default=None, help="Comma-separated candidate widths."),
        click.option("--query-mode", type=click.Choice(["entity_attention", "last_hidden"]), default=None),
        click.option("--relation-mode", type=click.Choice(["annotated", "geometric_stub"]), default=None),
        click.option("--decode", "decode_mode", type=click.Choice(["greedy", "dynamic"]), default=None),
        click.option("--disable-implicit", is_flag=True, default=False),
        click.option("--disable-explicit", is_flag=True, default=False),
        click.option("--disable-temporal", is_flag=True, default=False),
        click.option("--eval-every", type=int, default=None),
        click.option("--stop-m-tiou", type=float, default=None),
        click.option("--stop-m-viou", type=float, default=None),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _build_run_config(config_file, **flags):
    overrides = {
        "seed": flags.get("seed"),
        "epochs": flags.get("epochs"),
        "batch_size": flags.get("batch_size"),
        "learning_rate": flags.get("learning_rate"),
        "layers": flags.get("layers"),
        "model_dim": flags.get("model_dim"),
        "lang_hidden": flags.get("lang_hidden"),
        "frame_hidden": flags.get("frame_hidden"),
        "word_dim": flags.get("word_dim"),
        "window": flags.get("window"),
        "query_mode": flags.get("query_mode"),
        "relation_mode": flags.get("relation_mode"),
        "decode": flags.get("decode_mode"),
        "eval_every": flags.get("eval_every"),
        "stop_m_tiou": flags.get("stop_m_tiou"),
        "stop_m_viou": flags.get("stop_m_viou"),
    }
    if flags.get("widths"):
        overrides["widths"] = [int(w) for w in flags["widths"].split(",") if w.strip()]
    if flags.get("disable_implicit"):
        overrides["use_implicit"] = False
    if flags.get("disable_explicit"):
        overrides["use_explicit"] = False
    if flags.get("disable_temporal"):
        overrides["use_temporal"] = False
    return load_run_config(config_file, overrides)


@main.command()
@click.option("--annotations", required=True, type=click.Path())
@click.option("--features", required=True, type=click.Path(), help="Feature manifest path.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@_run_config_options
@click.pass_context
def train(ctx, annotations, features, out_dir, config_file, **flags):
    """Train a model and write checkpoint.pt + metrics.jsonl."""
    run = _build_run_config(config_file, **flags)
    req = schemas.TrainRequest(annotations=annotations, features=features, out_dir=out_dir, config=run)
    _emit(_dispatch(ctx, req))


@main.command("eval")
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--annotations", required=True, type=click.Path())
@click.option("--features", required=True, type=click.Path())
@click.option("--decode", "decode_mode", type=click.Choice(["greedy", "dynamic"]), default=None)
@click.option("--split-by-type/--no-split-by-type", default=True, show_default=True)
@click.pass_context
def eval_cmd(ctx, checkpoint, annotations, features, decode_mode, split_by_type):
    """Evaluate a checkpoint: m_tIoU, m_vIoU, vIoU@0.3, vIoU@0.5."""
    req = schemas.EvalRequest(
        checkpoint=checkpoint,
        annotations=annotations,
        features=features,
        decode=decode_mode,
        split_by_query_type=split_by_type,
    )
    _emit(_dispatch(ctx, req))


@main.command()
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--annotations", required=True, type=click.Path())
@click.option("--features", required=True, type=click.Path())
@click.option("--decode", "decode_mode", type=click.Choice(["greedy", "dynamic"]), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Write predictions JSON here.")
@click.pass_context
def decode(ctx, checkpoint, annotations, features, decode_mode, out_path):
    """Decode tubes for every record."""
    req = schemas.DecodeRequest(
        checkpoint=checkpoint,
        annotations=annotations,
        features=features,
        decode=decode_mode,
        out_path=out_path,
    )
    _emit(_dispatch(ctx, req))


@main.command()
@click.option("--annotations", required=True, type=click.Path())
@click.pass_context
def stats(ctx, annotations):
    """Dataset statistics for one annotation file."""
    _emit(_dispatch(ctx, schemas.StatsRequest(annotations=annotations)))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("tubeground.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
