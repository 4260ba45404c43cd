"""Command-line entry point: ``i2iaug <subcommand> --config pipeline.toml``.

Every subcommand writes its artifacts into the configured output directory
together with a ``manifest-<subcommand>.json`` recording the config hash and
the SHA-256 of every input and output file. Manifests carry no timestamps or
absolute output paths, so identical runs produce identical manifests.

Exit status: 0 success, 1 configuration or missing-file error, 2 usage error,
3 data error, 4 remote endpoint error, 5 corrupt index.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import __version__
from .augmentation import augment, merge, read_candidates, write_candidates
from .backends import build_neighbors, read_neighbors, write_neighbors
from .config import DataConfig, PipelineConfig, load_config, parse_override
from .data import chronological_split, ingest, label_long_tail, write_interactions
from .discriminator import DiscriminatorModel, RemoteDiscriminator, train_discriminator
from .evaluation import evaluate, format_table, write_reports_csv
from .exceptions import (ConfigError, EmptyDatasetError, EndpointError, IndexFormatError,
                         ParseError, UnknownEntityError)
from .generator import GeneratorModel, RemoteGenerator, train_generator
from .index import InvertedIndex, build_index
from .llm import ChatClient, EndpointConfig
from .pipeline import (PRESETS, LocalModels, RemoteModels, grid_rows, preset_cells,
                       run_experiment_grid, with_seeds)

log = logging.getLogger("i2iaug")

EXIT_CONFIG, EXIT_USAGE, EXIT_DATA, EXIT_ENDPOINT, EXIT_INDEX = 1, 2, 3, 4, 5


class MissingArtifact(ConfigError):
    def __init__(self, path, hint):
        super().__init__("artifact", f"{path} not found; {hint}")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """One subcommand invocation: config, output directory and manifest bookkeeping."""

    def __init__(self, name: str, config: PipelineConfig):
        self.name = name
        self.config = config
        self.out = Path(config.data.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs: dict[str, dict] = {}
        self.outputs: list[str] = []

    def path(self, filename) -> Path:
        return self.out / filename

    def need(self, filename, hint) -> Path:
        p = self.path(filename)
        if not p.exists():
            raise MissingArtifact(p, hint)
        self.record_input(filename, p)
        return p

    def record_input(self, label, path):
        self.inputs[label] = {"path": str(path) if not str(path).startswith(str(self.out))
                              else Path(path).name, "sha256": sha256_file(path)}

    def wrote(self, filename):
        self.outputs.append(filename)

    def manifest(self, suffix="") -> Path:
        name = f"manifest-{self.name}{suffix}.json"
        doc = {
            "subcommand": self.name,
            "version": __version__,
            "config_hash": self.config.hash(),
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": {f: sha256_file(self.path(f)) for f in sorted(self.outputs)},
        }
        p = self.path(name)
        p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return p


def load_data(run: Run):
    """Dataset (long-tail labeled) and leave-one-out split from the configured log."""
    d: DataConfig = run.config.data
    if not d.interactions:
        raise ConfigError("data.interactions", "required")
    for key in ("interactions", "items"):
        p = getattr(d, key)
        if p and not Path(p).exists():
            raise ConfigError(f"data.{key}", f"file not found: {p}")
    run.record_input("interactions", d.interactions)
    if d.items:
        run.record_input("items", d.items)
    ds = ingest(d.interactions, d.format or None, d.items or None)
    ds = label_long_tail(ds, run.config.long_tail_fraction)
    return ds, chronological_split(ds)


def _client(config: PipelineConfig) -> ChatClient:
    c = config.llm
    return ChatClient(EndpointConfig(c.base_url, c.model, c.credential_env, c.timeout,
                                     c.max_in_flight, c.request_logprobs))


def _local_only(config, what):
    if config.llm.mode != "local":
        raise ConfigError("llm.mode", f"{what} trains a local model; set llm.mode = \"local\"")


# subcommands

def cmd_ingest(run: Run, args):
    ds, split = load_data(run)
    write_interactions(ds.interactions(), run.path("dataset.tsv"))
    with open(run.path("items.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
        for i in ds.item_ids:
            fh.write(json.dumps(asdict(ds.items[i]), sort_keys=True) + "\n")
    summary = {**ds.summary(), "duplicates_dropped": ds.duplicates_dropped,
               "split": split.summary()}
    run.path("ingest.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for f in ("dataset.tsv", "items.jsonl", "ingest.json"):
        run.wrote(f)
    print(json.dumps(summary, sort_keys=True))


def cmd_train_gen(run: Run, args):
    _local_only(run.config, "train-gen")
    ds, split = load_data(run)
    model = train_generator(ds, split, run.config.generator)
    model.save(run.path("generator.json"))
    run.wrote("generator.json")
    print(f"generator trained: loss {model.loss_history[0]:.4f} -> {model.loss_history[-1]:.4f}")


def cmd_train_disc(run: Run, args):
    _local_only(run.config, "train-disc")
    ds, split = load_data(run)
    model = train_discriminator(ds, split, run.config.discriminator)
    model.save(run.path("discriminator.json"))
    run.wrote("discriminator.json")
    print(f"discriminator trained: loss {model.loss_history[0]:.4f} -> "
          f"{model.loss_history[-1]:.4f}")


def _ports(run: Run, ds):
    if run.config.llm.mode == "remote":
        client = _client(run.config)
        return RemoteGenerator(client, ds), RemoteDiscriminator(client, ds)
    gen = GeneratorModel.load(run.need("generator.json", "run train-gen first"))
    disc = DiscriminatorModel.load(run.need("discriminator.json", "run train-disc first"))
    return gen, disc


def cmd_augment(run: Run, args):
    ds, split = load_data(run)
    train = split.train_dataset(ds)
    gen, disc = _ports(run, ds)
    aug = augment(train, gen, disc, run.config.augmentation)
    write_candidates(aug.accepted, run.path("candidates.jsonl"))
    run.path("augmentation.json").write_text(
        json.dumps(aug.report.to_dict(), indent=2, sort_keys=True) + "\n")
    run.wrote("candidates.jsonl")
    run.wrote("augmentation.json")
    print(json.dumps(aug.report.to_dict(), sort_keys=True))


def cmd_build_backend(run: Run, args):
    ds, split = load_data(run)
    train = split.train_dataset(ds)
    if args.augmented:
        accepted = read_candidates(run.need("candidates.jsonl", "run augment first"))
        stream = merge(train, accepted)
    else:
        stream = list(train.interactions())
    lists = build_neighbors(stream, run.config.backend)
    name = f"neighbors-{args.tag}.jsonl"
    write_neighbors(lists, run.path(name))
    run.wrote(name)
    print(f"{run.config.backend.name}: neighbor lists for {len(lists)} items -> {name}")


def cmd_build_index(run: Run, args):
    src = run.need(f"neighbors-{args.tag}.jsonl", "run build-backend first")
    index = build_index(read_neighbors(src), run.config.index.k)
    name = f"index-{args.tag}.i2idx"
    index.write(run.path(name))
    run.wrote(name)
    print(f"index: {index.item_count} keys, K={index.k} -> {name}")


def cmd_eval(run: Run, args):
    ds, split = load_data(run)
    index = InvertedIndex.read(run.need(f"index-{args.tag}.i2idx", "run build-index first"))
    ev = run.config.eval
    report = evaluate(index, split, ds, ev.m, ev.n, ev.ks, index.k,
                      run.config.index.aggregation, args.tag,
                      {"variant": run.config.variant, "config_hash": run.config.hash()})
    run.path(f"report-{args.tag}.json").write_text(report.to_json() + "\n")
    run.path(f"report-{args.tag}.txt").write_text(report.to_table() + "\n")
    run.wrote(f"report-{args.tag}.json")
    run.wrote(f"report-{args.tag}.txt")
    print(report.to_table())


def cmd_grid(run: Run, args):
    ds, split = load_data(run)
    cells = preset_cells(args.preset)
    if args.seeds:
        cells = with_seeds(cells, args.seeds)
    if run.config.llm.mode == "remote":
        client = _client(run.config)
        models = RemoteModels(RemoteGenerator(client, ds), RemoteDiscriminator(client, ds))
    else:
        models = LocalModels(ds, split)
    results = run_experiment_grid(ds, split, run.config, cells, models)
    stem = f"grid-{args.preset}"
    write_reports_csv(grid_rows(results), run.path(f"{stem}.csv"))
    doc = [{"cell": r.cell.name, "overrides": r.cell.as_dict(), "error": r.error,
            "augmentation": r.augmentation, "report": r.report.to_dict() if r.report else None}
           for r in results]
    run.path(f"{stem}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    table = format_table([r.report for r in results if r.report])
    run.path(f"{stem}.txt").write_text(table + "\n")
    for f in (f"{stem}.csv", f"{stem}.json", f"{stem}.txt"):
        run.wrote(f)
    print(table)
    failed = [r for r in results if not r.ok]
    for r in failed:
        print(f"cell {r.cell.name} failed: {r.error}", file=sys.stderr)


def cmd_serve(run: Run, args):
    from .server import serve
    path = Path(args.index) if args.index else run.path("index-baseline.i2idx")
    if not path.exists():
        raise MissingArtifact(path, "pass --index or run build-index first")
    run.record_input("index", path)
    run.manifest()
    m = args.m if args.m is not None else run.config.eval.m
    aggregation = args.aggregation or run.config.index.aggregation
    print(f"serving {path} on {args.bind} (m={m}, aggregation={aggregation})", flush=True)
    serve(path, args.bind, m, aggregation)


COMMANDS = {
    "ingest": (cmd_ingest, "load and validate the interaction log, label long-tail items"),
    "train-gen": (cmd_train_gen, "train the local candidate generator"),
    "train-disc": (cmd_train_disc, "train the local discriminator"),
    "augment": (cmd_augment, "generate, judge and filter synthetic interactions"),
    "build-backend": (cmd_build_backend, "compute item-item neighbor lists"),
    "build-index": (cmd_build_index, "pack neighbor lists into the binary index"),
    "eval": (cmd_eval, "Recall@K / NDCG@K through the serving lookup path"),
    "grid": (cmd_grid, "run a named experiment grid"),
    "serve": (cmd_serve, "serve an index over HTTP"),
}


def _seeds(text):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("seeds look like 0,1,2") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="i2iaug", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", metavar="subcommand")
    sub.required = True
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.add_argument("--config", required=name != "serve", help="pipeline TOML file")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override one config value")
        sp.add_argument("--out", help="output directory (overrides data.out_dir)")
        if name in ("build-backend", "build-index", "eval"):
            sp.add_argument("--tag", default=None,
                            help="artifact name suffix (default: baseline, or augmented "
                                 "for build-backend --augmented)")
        if name == "build-backend":
            sp.add_argument("--augmented", action="store_true",
                            help="merge the accepted candidates from augment")
        if name == "grid":
            sp.add_argument("--preset", required=True, choices=PRESETS)
            sp.add_argument("--seeds", type=_seeds, default=None,
                            help="comma-separated seeds; every cell runs once per seed")
        if name == "serve":
            sp.add_argument("--index", help="index file (default: <out>/index-baseline.i2idx)")
            sp.add_argument("--bind", default="127.0.0.1:8080", help="host:port")
            sp.add_argument("--aggregation", choices=("sum", "max"), default=None)
            sp.add_argument("--m", type=int, default=None, help="recent items per request")
    return p


def _config(args) -> PipelineConfig:
    overrides = dict(parse_override(s) for s in args.overrides)
    if args.config:
        cfg = load_config(args.config, overrides)
    else:
        cfg = PipelineConfig().with_overrides(overrides) if overrides else PipelineConfig()
    if args.out:
        cfg = replace(cfg, data=replace(cfg.data, out_dir=str(Path(args.out).resolve())))
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "tag", "unset") is None:
        args.tag = "augmented" if getattr(args, "augmented", False) else "baseline"
    try:
        cfg = _config(args)
        run = Run(args.command, cfg)
        COMMANDS[args.command][0](run, args)
        if args.command != "serve":
            suffix = f"-{args.tag}" if hasattr(args, "tag") else \
                f"-{args.preset}" if args.command == "grid" else ""
            run.manifest(suffix)
    except ConfigError as exc:
        print(f"error [config] {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, EmptyDatasetError, UnknownEntityError) as exc:
        print(f"error [data] {exc}", file=sys.stderr)
        return EXIT_DATA
    except EndpointError as exc:
        print(f"error [endpoint] {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except IndexFormatError as exc:
        print(f"error [index] {exc}", file=sys.stderr)
        return EXIT_INDEX
    return 0


if __name__ == "__main__":
    sys.exit(main())
