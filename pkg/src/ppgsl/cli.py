"""Command-line entry point: ``ppgsl {gen,protect,attack,eval,sweep,report,replay}``.

Every command resolves its settings as flags > ``--config`` file > defaults,
runs from that resolved dictionary alone, and writes a JSON manifest next
to its main output. ``ppgsl replay MANIFEST`` re-runs a command from the
manifest without looking at the original command line or config file.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import baselines as bl
from . import surrogate_attack as sa
from .attacks import SUITE, run_attack_suite, suite_report
from .graph_core import (generate_erdos_renyi, generate_sbm, load_graph, load_graph_with_sidecars,
                         load_splits, prepare_experiment, save_graph, save_splits, sidecar_paths)
from .sitp_trainer import TrainConfig, convergence_report, run_sitp
from .utility_eval import distortion_report, evaluate_utility, linkpred_eval, nodeclass_eval

log = logging.getLogger("ppgsl")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

SWEEP_HEADER = ["method", "knob", "seed", "auc_cn", "auc_aa", "auc_ra", "auc_embed_cos",
                "auc_embed_ip", "auc_embed_mlp", "linkpred_auc", "f1_micro", "f1_macro",
                "distortion", "deleted", "added", "seconds"]
METRIC_COLS = SWEEP_HEADER[3:]
PROTECT_METHODS = ("ppgsl",) + bl.METHODS


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- settings

_TC = TrainConfig()
_AC = sa.AttackTrainConfig()

DEFAULTS = {
    "gen": dict(kind=None, n=1000, avg_degree=10.0, blocks="100,100", p_in=0.1, p_out=0.01,
                block_features=False, edges=None, features=None, labels=None, id_map=None,
                mask=0.1, test_fraction=0.1, train_fraction=0.3, seed=0, out=None),
    "protect": dict(graph=None, splits=None, method="ppgsl", alpha=_TC.alpha, k=_TC.k,
                    mu=_TC.mu, n1=_TC.n1, n2=_TC.n2, eta1=_TC.eta1, eta2=_TC.eta2,
                    head=_TC.head, mode=_TC.mode, protocol=_TC.protocol, eval_every=None,
                    edits=None, epsilon=None, epsilon1=None, epsilon2=None,
                    max_nodes=bl.DEFAULT_MAX_NODES, seed=0, out=None),
    "attack": dict(graph=None, splits=None, methods=",".join(SUITE), epochs=_AC.epochs,
                   lr=_AC.lr, seed=0, out=None),
    "eval": dict(graph=None, splits=None, original=None, epochs=_AC.epochs, lr=_AC.lr,
                 seed=0, out=None),
    "sweep": dict(graph=None, splits=None, alphas="", random_edits="", dice_edits="",
                  edgerand_eps="", lapgraph_eps="", seeds="0", k=_TC.k, mu=_TC.mu, n1=_TC.n1,
                  n2=_TC.n2, eta1=_TC.eta1, eta2=_TC.eta2, head=_TC.head, mode=_TC.mode,
                  attack_epochs=_AC.epochs, max_nodes=bl.DEFAULT_MAX_NODES, jobs=1, out=None),
    "report": dict(inputs=None, out=None),
}
REQUIRED = {
    "gen": ("kind", "out"),
    "protect": ("graph", "splits", "out"),
    "attack": ("graph", "splits", "out"),
    "eval": ("graph", "splits", "out"),
    "sweep": ("graph", "splits", "out"),
    "report": ("inputs",),
}
# keys holding input / output file paths (hashed or recorded in the manifest)
INPUT_KEYS = ("graph", "splits", "original", "edges", "features", "labels", "id_map")


def read_config_file(path) -> dict:
    """Flat ``key = value`` text; ``#`` starts a comment. Dashes and underscores are equivalent."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _coerce(value, default):
    """Parse a config-file string to the type of its default."""
    if not isinstance(value, str) or isinstance(default, str):
        return value
    if isinstance(default, bool):
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"not a boolean: {value!r}")
    if value.lower() in ("none", ""):
        return None
    try:
        if isinstance(default, int):
            return int(value)
        return float(value) if isinstance(default, float) or default is None and \
            _looks_numeric(value) else value
    except ValueError as exc:
        raise UsageError(f"bad value {value!r}: {exc}") from exc


def _looks_numeric(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def resolve(command: str, flags: dict, config_path=None) -> dict:
    defaults = DEFAULTS[command]
    file_cfg = read_config_file(config_path) if config_path else {}
    unknown = set(file_cfg) - set(defaults)
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
    cfg = {}
    for key, default in defaults.items():
        if flags.get(key) is not None:
            cfg[key] = flags[key]
        elif key in file_cfg:
            cfg[key] = _coerce(file_cfg[key], default)
        else:
            cfg[key] = default
    missing = [k for k in REQUIRED[command] if cfg.get(k) in (None, "")]
    if missing:
        raise UsageError(f"{command}: missing required setting(s): "
                         + ", ".join("--" + m.replace("_", "-") for m in missing))
    return cfg


# ---------------------------------------------------------------- manifests


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _input_files(cfg) -> list:
    files = []
    for key in INPUT_KEYS:
        p = cfg.get(key)
        if not p:
            continue
        files.append(str(p))
        if key in ("graph", "original"):
            files.extend(str(s) for s in sidecar_paths(p) if Path(s).exists())
    for p in (cfg.get("inputs") or "").split(",") if cfg.get("inputs") else []:
        files.append(p)
    return files


def run_id(command, cfg, inputs) -> str:
    # the output location does not change what is computed
    cfg = {k: v for k, v in cfg.items() if k != "out"}
    blob = json.dumps({"command": command, "config": cfg, "inputs": inputs,
                       "version": __version__}, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def manifest_path(out) -> Path:
    return Path(str(out) + ".manifest.json")


def write_manifest(command, cfg, inputs, outputs, wall_time, argv) -> Path:
    doc = {
        "command": command,
        "argv": list(argv) if argv is not None else None,
        "config": cfg,
        "inputs": inputs,
        "seed": cfg.get("seed"),
        "outputs": {name: {"path": str(p), "sha256": file_hash(p)} for name, p in outputs.items()},
        "run_id": run_id(command, cfg, inputs),
        "version": __version__,
        "wall_time": wall_time,
    }
    path = manifest_path(cfg["out"])
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------- helpers


def _parse_list(text, kind=float, name="list"):
    if text is None or str(text).strip() == "":
        return []
    try:
        return [kind(t) for t in str(text).split(",") if t.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"bad {name} {text!r}: {exc}") from exc


def _load(cfg, key="graph"):
    return load_graph_with_sidecars(cfg[key])


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- commands


def cmd_gen(cfg):
    seed = cfg["seed"]
    kind = cfg["kind"]
    if kind == "er":
        g = generate_erdos_renyi(int(cfg["n"]), float(cfg["avg_degree"]), seed)
    elif kind == "sbm":
        blocks = _parse_list(cfg["blocks"], int, "blocks")
        if not blocks:
            raise UsageError("--blocks must list at least one block size")
        g = generate_sbm(blocks, cfg["p_in"], cfg["p_out"], seed,
                         with_features=bool(cfg["block_features"]))
    elif kind == "file":
        if not cfg["edges"]:
            raise UsageError("--kind file needs --edges")
        g = load_graph(cfg["edges"], cfg["features"], cfg["labels"], cfg["id_map"])
    else:
        raise UsageError(f"--kind must be er, sbm or file, got {kind!r}")
    visible, splits = prepare_experiment(g, seed, cfg["mask"], cfg["test_fraction"],
                                         cfg["train_fraction"])
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    save_graph(visible, out)
    spl = Path(str(out) + ".splits")
    save_splits(splits, spl)
    outputs = {"graph": out, "splits": spl}
    for s in sidecar_paths(out):
        if Path(s).exists():
            outputs[Path(s).name[len(out.name) + 1:]] = Path(s)
    return outputs


def _train_config(cfg, alpha, seed) -> TrainConfig:
    return TrainConfig(alpha=alpha, k=cfg["k"], mu=int(cfg["mu"]), n1=int(cfg["n1"]),
                       n2=int(cfg["n2"]), eta1=cfg["eta1"], eta2=cfg["eta2"], head=cfg["head"],
                       mode=cfg["mode"], seed=seed,
                       eval_every=None if cfg.get("eval_every") is None else int(cfg["eval_every"]),
                       protocol=cfg.get("protocol", "sitp"))


def _protect(g, splits, method, knob, seed, cfg):
    """One defense run; returns ``(PublishedGraph, trace or None)``."""
    if method == "ppgsl":
        if knob is None or knob < 0:
            raise ValueError("alpha must be >= 0")
        return run_sitp(g, splits, _train_config(cfg, knob, seed))
    if knob is None:
        raise ValueError(f"{method} needs a budget")
    max_nodes = cfg.get("max_nodes", bl.DEFAULT_MAX_NODES)
    if method == "random":
        return bl.random_perturb(g, _int_budget(knob), seed, splits), None
    if method == "dice":
        return bl.dice_perturb(g, splits, _int_budget(knob), seed), None
    if method == "edgerand":
        return bl.edgerand_perturb(g, knob, seed, splits, max_nodes), None
    if method == "lapgraph":
        e1 = cfg.get("epsilon1")
        e2 = cfg.get("epsilon2")
        if e1 is None or e2 is None:
            e1 = bl.LAPGRAPH_DENSITY_SHARE * knob
            e2 = knob - e1
        return bl.lapgraph_perturb(g, e1, e2, seed, splits, max_nodes), None
    raise UsageError(f"unknown method {method!r}")


def _int_budget(knob):
    if knob != int(knob) or knob < 0:
        raise ValueError(f"edit count must be a non-negative integer, got {knob}")
    return int(knob)


def cmd_protect(cfg):
    method = cfg["method"]
    if method not in PROTECT_METHODS:
        raise UsageError(f"--method must be one of {PROTECT_METHODS}")
    if method == "ppgsl":
        if cfg["alpha"] < 0:
            raise UsageError("--alpha must be >= 0")
        knob = cfg["alpha"]
    elif method in ("random", "dice"):
        if cfg["edits"] is None:
            raise UsageError(f"--method {method} needs --edits")
        knob = cfg["edits"]
    else:
        eps = cfg["epsilon"]
        if eps is None and method == "lapgraph" and cfg["epsilon1"] and cfg["epsilon2"]:
            eps = cfg["epsilon1"] + cfg["epsilon2"]
        if eps is None or eps <= 0:
            raise UsageError(f"--method {method} needs --epsilon > 0")
        knob = eps
    g = _load(cfg)
    splits = load_splits(cfg["splits"], g.n)
    pub, trace = _protect(g, splits, method, knob, cfg["seed"], cfg)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    pub.provenance["manifest"] = manifest_path(out).name
    pub.save(out)
    outputs = {"graph": out, "provenance": Path(str(out) + ".provenance.json")}
    for s in sidecar_paths(out):
        if Path(s).exists():
            outputs[Path(s).name[len(out.name) + 1:]] = Path(s)
    if trace is not None:
        tpath = Path(str(out) + ".trace.csv")
        trace.to_csv(tpath)
        outputs["trace"] = tpath
        rep = convergence_report(trace)
        log.info("learner loss: first decile %.4f, last decile %.4f (%s)",
                 rep.first_decile_mean, rep.last_decile_mean,
                 "converged" if rep.converged else "not converged")
    return outputs


def cmd_attack(cfg, rid=None):
    methods = [m for m in str(cfg["methods"]).split(",") if m]
    bad = [m for m in methods if m not in SUITE]
    if bad or not methods:
        raise UsageError(f"--methods must be a comma list from {SUITE}")
    g = _load(cfg)
    splits = load_splits(cfg["splits"], g.n)
    acfg = sa.AttackTrainConfig(epochs=int(cfg["epochs"]), lr=cfg["lr"], seed=cfg["seed"])
    results = run_attack_suite(g, splits, acfg, methods)
    for r in results:
        log.info("%-10s AUC %.4f", r.method, r.auc)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(suite_report(results, cfg["seed"], rid), encoding="utf-8")
    return {"report": out}


def cmd_eval(cfg, rid=None):
    g = _load(cfg)
    splits = load_splits(cfg["splits"], g.n)
    acfg = sa.AttackTrainConfig(epochs=int(cfg["epochs"]), lr=cfg["lr"], seed=cfg["seed"])
    doc = {"seed": cfg["seed"], "run_id": rid}
    if len(splits.util_test_pos):
        doc["linkpred_auc"] = linkpred_eval(g, splits, acfg)
    else:
        log.warning("no link-prediction test pairs in the splits: link prediction omitted")
    if g.labels is not None and len(splits.train_nodes):
        doc["f1_micro"], doc["f1_macro"] = nodeclass_eval(g, splits, seed=cfg["seed"])
    else:
        log.warning("graph has no labels: node classification omitted")
    if cfg["original"]:
        d = distortion_report(_load(cfg, "original"), g)
        doc.update(distortion=d.distortion, deleted=d.deleted, added=d.added)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    _dump_json(doc, out)
    return {"report": out}


# ---------------------------------------------------------------- sweep


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _fmt_knob(method, knob):
    if method in ("random", "dice") and float(knob).is_integer():
        return str(int(knob))
    return repr(float(knob))


def _sweep_cells(cfg):
    seeds = _parse_list(cfg["seeds"], int, "seeds")
    grids = [("ppgsl", _parse_list(cfg["alphas"], float, "alphas")),
             ("random", _parse_list(cfg["random_edits"], float, "random edits")),
             ("dice", _parse_list(cfg["dice_edits"], float, "dice edits")),
             ("edgerand", _parse_list(cfg["edgerand_eps"], float, "edgerand eps")),
             ("lapgraph", _parse_list(cfg["lapgraph_eps"], float, "lapgraph eps"))]
    if not seeds:
        raise UsageError("--seeds must list at least one seed")
    cells = [(m, knob, s) for m, knobs in grids for knob in knobs for s in seeds]
    if not cells:
        raise UsageError("empty sweep grid: give at least one of --alphas, --random-edits, "
                         "--dice-edits, --edgerand-eps, --lapgraph-eps")
    return cells


def run_cell(args):
    """Evaluate one (method, knob, seed) cell; never raises."""
    cfg, method, knob, seed = args
    t0 = time.perf_counter()
    row = {"method": method, "knob": knob, "seed": seed}
    try:
        g = _load(cfg)
        splits = load_splits(cfg["splits"], g.n)
        pub, _ = _protect(g, splits, method, knob, seed, cfg)
        acfg = sa.AttackTrainConfig(epochs=int(cfg["attack_epochs"]), seed=seed)
        for r in run_attack_suite(pub, splits, acfg):
            row["auc_" + r.method] = r.auc
        rep = evaluate_utility(pub, g, splits, acfg, seed)
        row.update(linkpred_auc=rep.linkpred_auc, f1_micro=rep.nodeclass_f1_micro,
                   f1_macro=rep.nodeclass_f1_macro, distortion=rep.distortion,
                   deleted=rep.deleted, added=rep.added)
        row["seconds"] = time.perf_counter() - t0
    except Exception as exc:  # a failed cell becomes an error row
        log.warning("sweep cell %s/%s/seed %s failed: %s", method, knob, seed, exc)
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _median_row(method, knob, rows):
    out = {"method": method, "knob": knob, "seed": "median"}
    ok = [r for r in rows if "error" not in r]
    for c in METRIC_COLS:
        vals = [r[c] for r in ok if r.get(c) is not None]
        out[c] = float(np.median(vals)) if vals else None
    if not ok:
        out["error"] = "all seeds failed"
    return out


def format_sweep(rows) -> str:
    """Per-seed rows plus a median row per (method, knob), sorted by (method, knob).

    Error rows keep the header: metric cells stay empty and the note goes in
    the ``seconds`` cell.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    groups = {}
    for r in rows:
        groups.setdefault((r["method"], r["knob"]), []).append(r)
    for (method, knob) in sorted(groups):
        members = sorted(groups[(method, knob)], key=lambda r: r["seed"])
        for r in members + [_median_row(method, knob, members)]:
            cells = [r["method"], _fmt_knob(r["method"], r["knob"]), str(r["seed"])]
            if "error" in r:
                cells += [""] * (len(METRIC_COLS) - 1) + ["error: " + r["error"]]
            else:
                cells += [_fmt(r.get(c)) for c in METRIC_COLS]
            w.writerow(cells)
    return buf.getvalue()


def cmd_sweep(cfg):
    cells = _sweep_cells(cfg)
    jobs = int(cfg["jobs"])
    work = [(cfg, m, k, s) for m, k, s in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_cell, work))
    else:
        rows = [run_cell(w) for w in work]
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(format_sweep(rows), encoding="utf-8")
    failed = sum("error" in r for r in rows)
    if failed:
        log.warning("%d of %d sweep cells failed", failed, len(rows))
    return {"sweep": out}


def read_sweep(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if rows and list(rows[0].keys()) != SWEEP_HEADER:
        raise ValueError(f"{path}: unexpected header")
    return rows


def check_sweep_medians(rows, tol=0.0) -> list:
    """Recompute every median row from its per-seed rows; returns mismatch descriptions."""
    bad = []
    groups = {}
    for r in rows:
        groups.setdefault((r["method"], r["knob"]), []).append(r)
    for key, members in groups.items():
        med = [r for r in members if r["seed"] == "median"]
        seeds = [r for r in members if r["seed"] != "median" and
                 not r["seconds"].startswith("error")]
        if len(med) != 1:
            bad.append(f"{key}: expected one median row, found {len(med)}")
            continue
        if med[0]["seconds"].startswith("error"):
            if seeds:
                bad.append(f"{key}: median marked failed but some seeds succeeded")
            continue
        for c in METRIC_COLS:
            vals = [float(r[c]) for r in seeds if r[c] != ""]
            want = med[0][c]
            if not vals:
                if want != "":
                    bad.append(f"{key} {c}: median without data")
                continue
            got = float(np.median(vals))
            if want == "" or abs(float(want) - got) > tol:
                bad.append(f"{key} {c}: median {want!r} != recomputed {got!r}")
    return bad


def cmd_report(cfg):
    """Median trade-off table from one or more sweep CSVs, after a consistency check."""
    paths = [p for p in str(cfg["inputs"]).split(",") if p]
    table = []
    for p in paths:
        rows = read_sweep(p)
        bad = check_sweep_medians(rows)
        if bad:
            raise ValueError(f"{p}: inconsistent medians: {bad[:3]}")
        for r in rows:
            if r["seed"] == "median":
                table.append({k: (None if r[k] == "" else
                                  (r[k] if k in ("method",) else _num(r[k]))) for k in SWEEP_HEADER
                              if k != "seed"})
    table.sort(key=lambda r: (r["method"], r["knob"]))
    text = json.dumps({"tradeoff": table}, sort_keys=True, indent=2) + "\n"
    outputs = {}
    if cfg["out"]:
        out = Path(cfg["out"])
        out.write_text(text, encoding="utf-8")
        outputs["report"] = out
    else:
        sys.stdout.write(text)
    return outputs


def _num(s):
    if s.startswith("error"):
        return s
    v = float(s)
    return int(v) if v.is_integer() and "." not in s and "e" not in s else v


COMMANDS = {"gen": cmd_gen, "protect": cmd_protect, "attack": cmd_attack, "eval": cmd_eval,
            "sweep": cmd_sweep, "report": cmd_report}


def execute(command, cfg, argv=None) -> dict:
    """Run a resolved command and write its manifest; returns output paths."""
    t0 = time.perf_counter()
    inputs = {p: file_hash(p) for p in _input_files(cfg) if Path(p).exists()}
    missing = [p for p in _input_files(cfg) if not Path(p).exists()]
    if missing:
        raise FileNotFoundError(f"input file(s) not found: {missing}")
    rid = run_id(command, cfg, inputs)
    fn = COMMANDS[command]
    outputs = fn(cfg, rid) if command in ("attack", "eval") else fn(cfg)
    if command != "report" or cfg.get("out"):
        write_manifest(command, cfg, inputs, outputs, time.perf_counter() - t0, argv)
    return outputs


def replay(manifest, out=None, check_inputs=True) -> dict:
    doc = json.loads(Path(manifest).read_text(encoding="utf-8"))
    cfg = dict(doc["config"])
    if check_inputs:
        for p, h in doc["inputs"].items():
            if not Path(p).exists() or file_hash(p) != h:
                raise ValueError(f"input {p} is missing or changed since the manifest was written")
    if out is not None:
        cfg["out"] = str(out)
    return execute(doc["command"], cfg, argv=["replay", str(manifest)])


# ---------------------------------------------------------------- argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add(p, name, typ=str, help=None, choices=None):
    p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None,
                   help=help, choices=choices)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ppgsl", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"ppgsl {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    def command(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", default=None, help="flat key = value settings file")
        return p

    p = command("gen", "generate or load a graph and write it with its data splits")
    _add(p, "kind", choices=("er", "sbm", "file"))
    _add(p, "n", int)
    _add(p, "avg_degree", float)
    _add(p, "blocks", help="comma-separated block sizes")
    _add(p, "p_in", float)
    _add(p, "p_out", float)
    p.add_argument("--block-features", dest="block_features", action="store_const", const=True,
                   default=None, help="attach one-hot block membership as node features")
    _add(p, "edges", help="edge file for --kind file")
    _add(p, "features")
    _add(p, "labels")
    _add(p, "id_map")
    _add(p, "mask", float, "fraction of edges hidden as sensitive")
    _add(p, "test_fraction", float)
    _add(p, "train_fraction", float)
    _add(p, "seed", int)
    _add(p, "out", help="output graph path (splits go to OUT.splits)")

    p = command("protect", "publish a protected graph (learned or baseline)")
    for name in ("graph", "splits", "out"):
        _add(p, name)
    _add(p, "method", choices=PROTECT_METHODS)
    for name in ("alpha", "k", "eta1", "eta2", "edits", "epsilon", "epsilon1", "epsilon2"):
        _add(p, name, float)
    for name in ("mu", "n1", "n2", "eval_every", "max_nodes", "seed"):
        _add(p, name, int)
    _add(p, "head", choices=sa.HEADS)
    _add(p, "mode", choices=("sparse", "fgp"))
    _add(p, "protocol", choices=("sitp", "adv"))

    p = command("attack", "run the inference-attack suite on a published graph")
    for name in ("graph", "splits", "out", "methods"):
        _add(p, name)
    _add(p, "epochs", int)
    _add(p, "lr", float)
    _add(p, "seed", int)

    p = command("eval", "utility of a published graph")
    for name in ("graph", "splits", "original", "out"):
        _add(p, name)
    _add(p, "epochs", int)
    _add(p, "lr", float)
    _add(p, "seed", int)

    p = command("sweep", "privacy-utility trade-off grid")
    for name in ("graph", "splits", "out", "alphas", "random_edits", "dice_edits",
                 "edgerand_eps", "lapgraph_eps", "seeds"):
        _add(p, name)
    for name in ("k", "eta1", "eta2"):
        _add(p, name, float)
    for name in ("mu", "n1", "n2", "attack_epochs", "max_nodes", "jobs"):
        _add(p, name, int)
    _add(p, "head", choices=sa.HEADS)
    _add(p, "mode", choices=("sparse", "fgp"))

    p = command("report", "median trade-off table from sweep CSVs")
    _add(p, "inputs", help="comma-separated sweep CSV paths")
    _add(p, "out")

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="write outputs here instead")
    return ap


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # --help or a parse error
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.command:
        ap.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "replay":
            replay(args.manifest, args.out)
            return EXIT_OK
        flags = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config", "verbose")}
        cfg = resolve(args.command, flags, args.config)
        execute(args.command, cfg, argv)
    except UsageError as exc:
        print(f"ppgsl {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"ppgsl {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
