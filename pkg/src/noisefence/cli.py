"""Command-line client for the noisefence service.

All computation happens behind the HTTP API; by default the client mounts
the service in-process, and --server points it at a remote instance instead.
Exit codes: 0 ok, 1 verification/grid failure, 2 usage or config error.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import httpx

from .expconfig import ConfigError, experiment_config, load_ini, parse_floats, parse_seeds
from .svgplot import line_plot_svg

ANALYZE_COLUMNS = ["sigma", "sigma_z_sq", "snr_exact", "snr_db", "qc_ratio", "repeat_n"]
STATS_COLUMNS = ["acc", "mean_ft", "mean_dft", "median_dft", "std_dft", "beta"]
GRID_COLUMNS = ["attack", "noise", "asr", "mean_qc_success", "mean_l2_success", "n_seeds"]


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # in-process default: mount the ASGI app behind a synchronous client
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service.app import app

    return TestClient(app, raise_server_exceptions=False)


def _post(server: str | None, path: str, payload: dict) -> dict:
    with _client(server) as client:
        resp = client.post(path, json=payload)
    if resp.status_code != 200:
        raise ConfigError(f"service rejected request ({resp.status_code}): {resp.text}")
    return resp.json()


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in columns})


def _out_dir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


@click.group()
def main() -> None:
    """Noise-perturbation defense lab: analysis curves, desk-scale attack
    grids, and Monte Carlo theory verification."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="INI config with an [analyze] section.")
@click.option("--out", default="out", show_default=True, help="Output directory.")
@click.option("--server", default=None, help="Remote service URL (default: in-process).")
@click.option("--svg/--no-svg", default=False, show_default=True, help="Also emit a log-log SVG plot.")
def analyze(config_path, out, server, svg):
    """Emit per-sigma noise/SNR/QC-ratio/repeat-N curves as CSV.

    Columns: sigma, sigma_z_sq, snr_exact, snr_db, qc_ratio, repeat_n.
    """
    try:
        parser = load_ini(config_path)
        if "analyze" not in parser:
            raise ConfigError("missing [analyze] section")
        section = parser["analyze"]
        payload = {
            "sigmas": parse_floats(section.get("sigmas", "1e-4,1e-3,1e-2,1e-1")),
            "beta": section.getfloat("beta", 1e-3),
            "mean_dft": section.getfloat("mean_dft"),
            "mean_ft": section.getfloat("mean_ft"),
            "eta": section.getfloat("eta", 0.01),
            "epsilon": section.getfloat("epsilon", 0.01),
            "a": section.getfloat("a", 0.1),
            "lam": section.getfloat("lambda", 2.0),
            "v0": section.getfloat("v0", 1.0),
            "repeat_a": section.getfloat("repeat_a", 1.0),
            "repeat_epsilon": section.getfloat("repeat_epsilon", 0.3),
        }
        if payload["mean_dft"] is None or payload["mean_ft"] is None:
            raise ConfigError("[analyze] needs mean_dft and mean_ft")
        rows = _post(server, "/analyze", payload)["rows"]
    except (ConfigError, ValueError, httpx.HTTPError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    out_dir = _out_dir(out)
    _write_csv(out_dir / "curves.csv", ANALYZE_COLUMNS, rows)
    if svg:
        pos = [r for r in rows if r["sigma"] > 0]
        series = {"qc_ratio": [(r["sigma"], r["qc_ratio"]) for r in pos]}
        (out_dir / "curves.svg").write_text(
            line_plot_svg(series, "sigma", "QC ratio R", log_x=True, log_y=True)
        )
    click.echo(f"wrote {out_dir / 'curves.csv'}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="INI config with a [model] section.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default="out", show_default=True)
@click.option("--server", default=None)
@click.option("--stats-beta", default=1e-3, show_default=True, help="Probe radius for output statistics.")
def train(config_path, seed, out, server, stats_beta):
    """Train the desk model; save model JSON and its output-statistics CSV.

    Stats columns: acc, mean_ft, mean_dft, median_dft, std_dft, beta.
    """
    try:
        parser = load_ini(config_path)
        if "model" not in parser:
            raise ConfigError("missing [model] section")
        section = parser["model"]
        payload = {
            "model_spec": {
                "kind": section.get("kind", "mlp"),
                "dim": section.getint("d", 32),
                "n_classes": section.getint("classes", 10),
                "hidden": section.getint("hidden", 64),
                "n_per_class": section.getint("n_per_class", 40),
                "spread": section.getfloat("spread", 0.15),
                "train_lr": section.getfloat("train_lr", 0.5),
                "train_epochs": section.getint("train_epochs", 300),
            },
            "seed": seed,
            "stats_beta": stats_beta,
        }
        result = _post(server, "/train", payload)
    except (ConfigError, ValueError, httpx.HTTPError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    out_dir = _out_dir(out)
    model_doc = result["model_doc"]
    with open(out_dir / "model.json", "w") as fh:
        json.dump(model_doc, fh)
    _write_csv(out_dir / "stats.csv", STATS_COLUMNS, [result["stats"]])
    click.echo(
        f"trained: acc={result['acc_train']:.3f} holdout={result['acc_holdout']:.3f}; "
        f"wrote {out_dir / 'model.json'}"
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="INI experiment grid config.")
@click.option("--seed", default=0, show_default=True, help="Master seed for the whole grid.")
@click.option("--out", default="out", show_default=True)
@click.option("--server", default=None)
def grid(config_path, seed, out, server):
    """Run the (attack x noise x seed) grid; write outcomes JSONL and the
    aggregated CSV.

    CSV columns: attack, noise, asr, mean_qc_success, mean_l2_success, n_seeds.
    """
    try:
        config = experiment_config(config_path)
        payload = {
            "model_spec": config.model.to_dict(),
            "attacks": [{"name": name, **cfg.to_dict()} for name, cfg in config.attacks],
            "noises": [{"name": name, **spec.to_dict()} for name, spec in config.noises],
            "seeds": config.seeds,
            "parallelism": config.parallelism,
            "master_seed": seed,
        }
        result = _post(server, "/grid", payload)
    except (ConfigError, ValueError, httpx.HTTPError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    out_dir = _out_dir(out)
    with open(out_dir / "outcomes.jsonl", "w") as fh:
        for rec in result["records"]:
            fh.write(json.dumps(rec) + "\n")
    _write_csv(out_dir / "grid.csv", GRID_COLUMNS, result["rows"])
    for row in result["rows"]:
        click.echo(
            f"{row['attack']} / {row['noise']}: ASR={row['asr']:.2f} "
            f"QC={row['mean_qc_success']:.0f}"
        )
    if result["errors"]:
        for err in result["errors"]:
            click.echo(f"failed cell: {err}", err=True)
        sys.exit(1)


@main.command()
@click.option("--suite", default="all", show_default=True, help="theorem1|lemma1|theorem3|lemma34|theorem4|convergence|all")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default="out", show_default=True)
@click.option("--server", default=None)
def verify(suite, seed, out, server):
    """Run the Monte Carlo verification suite; nonzero exit on any failure."""
    known = {"all", "theorem1", "lemma1", "theorem3", "lemma34", "theorem4", "convergence"}
    if suite not in known:
        click.echo(f"error: unknown suite {suite!r}", err=True)
        sys.exit(2)
    try:
        result = _post(server, "/verify", {"suites": [suite], "seed": seed})
    except (ConfigError, httpx.HTTPError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    out_dir = _out_dir(out)
    with open(out_dir / "verify.json", "w") as fh:
        json.dump(result["reports"], fh, indent=2)
    for report in result["reports"]:
        status = "PASS" if report["passed"] else "FAIL"
        click.echo(f"{status} {report['name']}")
    if not result["all_passed"]:
        sys.exit(1)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
