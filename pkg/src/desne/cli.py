"""Command-line front end.

Subcommands
-----------
sample            full pipeline; writes a coreset manifest and the embedding
embed             bandwidths and t-SNE only; writes the embedding
bench-optimizers  per-row perplexity error of bs, de and sa on one dataset
energy            DDR transfer-energy ratios against near-memory sampling
export-scatter    CSV and SVG scatter of an embedding with its selection

Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEFAULTS, UsageError, load_config_file, resolve
from .dataio import (DataError, dump_json, load_dataset, normalize, read_selection,
                     selection_to_dict)
from .de import DEConfig
from .distance import InvariantError, pairwise_sq_dist
from .embedding import EmbeddingError, TsneConfig
from .energy import EnergyCoefficients, PRESET_PASSES, compare, report_csv
from .grid import GridSpec, SamplingError, grid_partition
from .kernels import BACKENDS, get_backend
from .perplexity import OPTIMIZERS, solve_sigmas
from .pipeline import embed_matrix, reference_error, select, select_per_class
from . import plotting

log = logging.getLogger("desne")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4

FORMATS = ("cifar-binary", "raw-f32", "csv")
NORMALIZE = ("unit-range", "per-feature-standardize", "none")
LABEL_MODES = ("auto", "last", "none")


# ------------------------------------------------------------------ parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_pipeline_flags(p, with_optimizer=True):
    g = p.add_argument_group("data and bandwidth search")
    g.add_argument("--input", help="dataset file")
    g.add_argument("--format", choices=FORMATS)
    g.add_argument("--label-column", choices=LABEL_MODES,
                   help="csv only: treat the last column as labels (auto guesses)")
    g.add_argument("--normalize", choices=NORMALIZE)
    g.add_argument("--n-cap", type=int, help="refuse datasets with more rows (default 20000)")
    g.add_argument("--perplexity", type=float, help="target perplexity (default 15)")
    if with_optimizer:
        g.add_argument("--optimizer", choices=OPTIMIZERS)
    g.add_argument("--de-pop", type=int, help="DE population size (default 30)")
    g.add_argument("--de-iters", type=int, help="DE generation limit (default 10000)")
    g.add_argument("--de-f", type=float, help="DE differential weight (default 0.5)")
    g.add_argument("--de-cr", type=float, help="DE crossover rate (default 0.7)")
    g.add_argument("--de-stall", type=int,
                   help="stop DE after this many generations without improvement; 0 disables")
    g.add_argument("--bs-iters", type=int, help="bisection steps (default 64)")
    g.add_argument("--math-backend", choices=BACKENDS)
    g.add_argument("--seed", type=int)


def _add_tsne_flags(p):
    g = p.add_argument_group("embedding")
    g.add_argument("--tsne-iters", type=int)
    g.add_argument("--learning-rate", type=float)
    g.add_argument("--exaggeration", type=float)
    g.add_argument("--exaggeration-iters", type=int)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: available cores)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="desne", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"desne {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample", parents=[common], help="select a coreset")
    _add_pipeline_flags(p)
    _add_tsne_flags(p)
    p.add_argument("--keep", type=float, help="keeping ratio in (0, 1] (default 0.1)")
    p.add_argument("--grid", type=int, help="cells per axis (default 32)")
    p.add_argument("--per-class", action="store_true", default=None,
                   help="embed and sample each label class separately")

    p = sub.add_parser("embed", parents=[common], help="compute a 2-D embedding")
    _add_pipeline_flags(p)
    _add_tsne_flags(p)

    p = sub.add_parser("bench-optimizers", parents=[common],
                       help="compare bs, de and sa perplexity error")
    _add_pipeline_flags(p, with_optimizer=False)

    p = sub.add_parser("energy", parents=[common], help="DDR energy ratios")
    p.add_argument("--methods", help="comma-separated subset of dq,nessa,nms")
    p.add_argument("--keep-list", help="comma-separated keeping ratios")
    p.add_argument("--bits-per-image", type=int)
    p.add_argument("--n-images", type=int)
    p.add_argument("--e-pcb", type=float, help="pJ/bit over the PCB link (default 10)")
    p.add_argument("--e-nm", type=float, help="pJ/bit near memory (default 0.5)")
    p.add_argument("--passes-override", action="append", metavar="METHOD=PASSES",
                   help="replace a method's full-dataset PCB pass count; repeatable")

    p = sub.add_parser("export-scatter", parents=[common], help="scatter export")
    p.add_argument("--embedding", help="embedding.csv written by sample or embed")
    p.add_argument("--selection", help="selection manifest written by sample")
    return parser


def _coerce(key, value):
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise TypeError
            return int(float(value))
        if isinstance(default, float):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if isinstance(value, (list, tuple)):
            return ",".join(str(v) for v in value)
        return str(value)
    except (TypeError, ValueError):
        raise UsageError(f"bad value for {key}: {value!r}") from None


def make_config(command, ns):
    flags = {k: v for k, v in vars(ns).items() if k in DEFAULTS}
    if flags.get("passes_override") is not None:
        flags["passes_override"] = ",".join(flags["passes_override"])
    file_values = load_config_file(ns.config) if ns.config else {}
    cfg = resolve(command, flags, file_values)
    for k in list(cfg):
        if cfg[k] is not None:
            cfg[k] = _coerce(k, cfg[k])
    _validate(cfg)
    return cfg


def _validate(cfg):
    def need(cond, msg):
        if not cond:
            raise UsageError(msg)

    cmd = cfg.command
    if cmd in ("sample", "embed", "bench-optimizers"):
        need(cfg["input"], "--input is required")
        need(cfg["format"] in FORMATS, f"--format must be one of {FORMATS}")
        need(cfg["label_column"] in LABEL_MODES, f"label_column must be one of {LABEL_MODES}")
        need(cfg["normalize"] in NORMALIZE, f"--normalize must be one of {NORMALIZE}")
        need(cfg["math_backend"] in BACKENDS, f"--math-backend must be one of {BACKENDS}")
        need(cfg["perplexity"] > 1.0, "--perplexity must exceed 1")
        need(cfg["n_cap"] >= 2, "--n-cap must be >= 2")
        need(cfg["bs_iters"] >= 1, "--bs-iters must be >= 1")
        need(cfg["de_stall"] >= 0, "--de-stall must be >= 0")
        need(cfg["seed"] >= 0, "--seed must be >= 0")
        if "optimizer" in cfg:
            need(cfg["optimizer"] in OPTIMIZERS, f"--optimizer must be one of {OPTIMIZERS}")
        try:
            de_config(cfg)
            if "tsne_iters" in cfg:
                tsne_config(cfg)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if cmd == "sample":
        need(0.0 < cfg["keep"] <= 1.0, "--keep must lie in (0, 1]")
        need(cfg["grid"] >= 1, "--grid must be >= 1")
    if cmd == "export-scatter":
        need(cfg["embedding"], "--embedding is required")
        need(cfg["selection"], "--selection is required")


def de_config(cfg):
    return DEConfig(
        f_weight=cfg["de_f"], cr=cfg["de_cr"], pop_size=cfg["de_pop"],
        max_iter=cfg["de_iters"], seed=cfg["seed"],
        stall_generations=cfg["de_stall"] or None,
    )


def tsne_config(cfg):
    return TsneConfig(
        iterations=cfg["tsne_iters"], learning_rate=cfg["learning_rate"],
        early_exaggeration_factor=cfg["exaggeration"],
        early_exaggeration_iters=cfg["exaggeration_iters"], seed=cfg["seed"],
    )


# ------------------------------------------------------------------ outputs


class Outputs:
    """Tracks files written by one run so a failure can remove them."""

    def __init__(self, root):
        self.root = Path(root)
        self.created_root = False
        self.files = []

    def open(self):
        if self.root.exists() and not self.root.is_dir():
            raise UsageError(f"--out {self.root} is not a directory")
        if not self.root.exists():
            self.root.mkdir(parents=True)
            self.created_root = True

    def path(self, name):
        p = self.root / name
        self.files.append(p)
        return p

    def text(self, name, content):
        p = self.path(name)
        p.write_text(content, encoding="utf-8", newline="")
        return p

    def json(self, name, obj):
        p = self.path(name)
        dump_json(obj, p)
        return p

    def discard(self):
        for p in self.files:
            p.unlink(missing_ok=True)
        if self.created_root:
            try:
                self.root.rmdir()
            except OSError:
                pass


def _num(v):
    return repr(float(v))


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _record_inputs(cfg, keys):
    cfg["input_sha256"] = {
        os.path.basename(cfg[k]): _sha256(cfg[k]) for k in keys if os.path.isfile(cfg[k])
    }


def _meta(cfg):
    return {"config": cfg.canonical(), "config_hash": cfg.config_hash}


# ---------------------------------------------------------------- commands


def _load(cfg):
    mode = {"auto": None, "last": True, "none": False}[cfg["label_column"]]
    m = load_dataset(cfg["input"], cfg["format"], mode)
    return normalize(m, cfg["normalize"])


def _check_size(n, cfg, hint=True):
    if n > cfg["n_cap"]:
        more = " Try --per-class to embed each label class on its own." if hint else ""
        raise DataError(f"N={n} exceeds the cap of {cfg['n_cap']} rows "
                        f"(distance matrix would need {8 * n * n / 2**30:.1f} GiB).{more}")
    if not cfg["perplexity"] <= n - 1:
        raise DataError(f"perplexity {cfg['perplexity']} needs at least "
                        f"{int(np.ceil(cfg['perplexity'])) + 1} rows, got N={n}")


def _embed(cfg, x, threads):
    res, d2 = embed_matrix(
        x, cfg["perplexity"], cfg["optimizer"], de_config(cfg), tsne_config(cfg),
        cfg["math_backend"], cfg["bs_iters"], threads,
    )
    ref = reference_error(d2, res.sigmas.sigma, cfg["perplexity"])
    return res, ref


def _embedding_rows(y, labels):
    return [[i, int(labels[i]), _num(y[i, 0]), _num(y[i, 1])] for i in range(len(y))]


def _embedding_doc(cfg, stats):
    return {**_meta(cfg), "summary": stats}


def cmd_embed(cfg, out, threads):
    m = _load(cfg)
    _check_size(m.n, cfg, hint=False)
    res, ref = _embed(cfg, m.data, threads)
    y = res.embedding.y
    stats = {
        "n": m.n,
        "mean_perplexity_error": float(np.mean(res.sigmas.per_row_error)),
        "mean_perplexity_error_reference": float(np.mean(ref)),
        "final_kl": res.trace.final_kl,
        "post_exaggeration_kl": res.trace.post_exaggeration_kl,
    }
    out.text("embedding.csv", _csv_text(("index", "label", "y0", "y1"),
                                        _embedding_rows(y, m.label_vector())))
    out.text("loss.csv", _csv_text(("iteration", "kl"),
                                   [[i, _num(v)] for i, v in enumerate(res.trace.kl_per_iteration)]))
    out.json("embedding.json", _embedding_doc(cfg, stats))
    plotting.embedding_png(y, out.path("embedding.png"), cfg.config_hash)
    return stats


def cmd_sample(cfg, out, threads):
    m = _load(cfg)
    labels = m.label_vector()
    if cfg["per_class"]:
        if m.labels is None or np.any(labels < 0):
            raise DataError("--per-class needs a label for every row")
        classes = np.unique(labels)
        members = [np.flatnonzero(labels == c) for c in classes]
        for rows in members:
            _check_size(rows.size, cfg, hint=False)
        parts = [_embed(cfg, m.data[rows], threads) for rows in members]
        ys = [res.embedding.y for res, _ in parts]
        sel = select_per_class(ys, members, cfg["keep"], cfg["seed"], m.n, cfg["grid"],
                               m.source_id, labels)
        y = np.empty((m.n, 2))
        for rows, yc in zip(members, ys):
            y[rows] = yc
        err = np.concatenate([res.sigmas.per_row_error for res, _ in parts])
        ref = np.concatenate([r for _, r in parts])
        kls = [res.trace.final_kl for res, _ in parts]
        kl_stats = {"final_kl": float(np.mean(kls)), "final_kl_per_class": kls}
        covered = len({(int(labels[i]), c) for i, c in sel.cell_of.items()})
        nonempty = _per_class_nonempty(ys, cfg["grid"])
    else:
        _check_size(m.n, cfg)
        res, ref = _embed(cfg, m.data, threads)
        y = res.embedding.y
        sel, assign = select(y, cfg["keep"], cfg["seed"], cfg["grid"], m.source_id, labels)
        err = res.sigmas.per_row_error
        kl_stats = {"final_kl": res.trace.final_kl,
                    "post_exaggeration_kl": res.trace.post_exaggeration_kl}
        nonempty = int(np.unique(assign.cell_of).size)
        covered = len(set(sel.cell_of.values()))

    stats = {
        "n": m.n,
        "keeping_ratio": cfg["keep"],
        "selected": int(sel.indices.size),
        "mean_perplexity_error": float(np.mean(err)),
        "mean_perplexity_error_reference": float(np.mean(ref)),
        **kl_stats,
        "cells_nonempty": nonempty,
        "cells_covered": covered,
        "cell_coverage": covered / nonempty,
    }
    meta = _meta(cfg)
    doc = selection_to_dict(sel)
    doc.update(meta)
    doc["summary"] = stats
    out.json("selection.json", doc)
    out.text("embedding.csv", _csv_text(("index", "label", "y0", "y1"), _embedding_rows(y, labels)))
    out.json("embedding.json", _embedding_doc(cfg, stats))
    plotting.embedding_png(y, out.path("embedding.png"), cfg.config_hash, sel.indices,
                           title=f"selected {sel.indices.size} of {m.n}")
    return stats


def _per_class_nonempty(ys, cells):
    return int(sum(np.unique(grid_partition(y, GridSpec(cells)).cell_of).size for y in ys))


def cmd_bench(cfg, out, threads):
    m = _load(cfg)
    _check_size(m.n, cfg, hint=False)
    d2 = pairwise_sq_dist(m.data)
    be = get_backend(cfg["math_backend"])
    rows, summary = [], {}
    for opt in ("bs", "de", "sa"):
        sv = solve_sigmas(d2, cfg["perplexity"], opt, de_cfg=de_config(cfg),
                          bs_iters=cfg["bs_iters"], seed=cfg["seed"], threads=threads,
                          backend=be)
        for i in range(m.n):
            rows.append([i, opt, _num(sv.sigma[i]), _num(sv.per_row_error[i]), int(sv.evals[i])])
        mean = sv.mean_error
        summary[opt] = {
            "mean_abs_error": mean,
            "log10_mean_abs_error": plotting.log10_or_none(mean),
            "max_abs_error": float(np.max(sv.per_row_error)),
            "total_evals": int(np.sum(sv.evals)),
        }
    out.text("bench.csv", _csv_text(("row_index", "optimizer", "sigma", "abs_error", "evals"), rows))
    out.json("bench.json", {**_meta(cfg), "summary": summary})
    plotting.optimizer_error_png(summary, out.path("bench.png"), cfg.config_hash)
    return {f"{k}_log10_mean_abs_error": v["log10_mean_abs_error"] for k, v in summary.items()}


def _split(text):
    return [t.strip() for t in str(text).split(",") if t.strip()]


def cmd_energy(cfg, out, threads):
    methods = _split(cfg["methods"])
    for mth in methods:
        if mth not in PRESET_PASSES:
            raise UsageError(f"unknown method {mth!r}; expected one of {sorted(PRESET_PASSES)}")
    try:
        krs = [float(v) for v in _split(cfg["keep_list"])]
        overrides = {}
        for item in _split(cfg["passes_override"]):
            key, _, val = item.partition("=")
            if key.strip() not in PRESET_PASSES:
                raise UsageError(f"--passes-override: unknown method {key!r}")
            overrides[key.strip()] = float(val)
        coeffs = EnergyCoefficients(cfg["e_pcb"], cfg["e_nm"])
        if cfg["bits_per_image"] <= 0 or cfg["n_images"] <= 0:
            raise ValueError("--bits-per-image and --n-images must be positive")
        rows = compare(methods, krs, cfg["bits_per_image"] * cfg["n_images"], coeffs, overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out.text("energy.csv", report_csv(rows))
    doc = {**_meta(cfg), "rows": rows}
    if overrides:
        doc["note"] = ("pass counts overridden for " + ", ".join(sorted(overrides))
                       + "; ratios for those methods are model extrapolations")
    out.json("energy.json", doc)
    plotting.energy_ratio_png(rows, out.path("energy.png"), cfg.config_hash)
    return {f"{r['method']}@{r['keeping_ratio']:g}": round(r["ratio"], 4) for r in rows}


def _read_embedding_csv(path):
    if not os.path.isfile(path):
        raise DataError(f"no such embedding file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:4] != ["index", "label", "y0", "y1"]:
            raise DataError(f"{path}: expected header index,label,y0,y1")
        try:
            rows = [(int(r[0]), int(r[1]), float(r[2]), float(r[3])) for r in reader if r]
        except (ValueError, IndexError):
            raise DataError(f"{path}: malformed row") from None
    if not rows:
        raise DataError(f"{path}: no rows")
    if [r[0] for r in rows] != list(range(len(rows))):
        raise DataError(f"{path}: indices must run 0..N-1 in order")
    labels = np.array([r[1] for r in rows])
    y = np.array([(r[2], r[3]) for r in rows])
    return y, labels


def cmd_export_scatter(cfg, out, threads):
    y, labels = _read_embedding_csv(cfg["embedding"])
    if not os.path.isfile(cfg["selection"]):
        raise DataError(f"no such selection manifest: {cfg['selection']}")
    sel = read_selection(cfg["selection"])
    if sel.indices.size == 0:
        raise DataError(f"{cfg['selection']}: selection is empty")
    if sel.n is not None and sel.n != len(y):
        raise DataError(f"selection was made over N={sel.n} rows, embedding has {len(y)}")
    if sel.indices[-1] >= len(y):
        raise DataError("selection index beyond the embedding")
    mask = np.zeros(len(y), dtype=bool)
    mask[sel.indices] = True
    rows = [[i, int(labels[i]), _num(y[i, 0]), _num(y[i, 1]), int(mask[i])] for i in range(len(y))]
    out.text("scatter.csv", _csv_text(("index", "label", "y0", "y1", "selected"), rows))
    plotting.scatter_svg(y, mask, out.path("scatter.svg"), cfg.config_hash)
    out.json("scatter.json", {**_meta(cfg), "n": len(y), "selected": int(mask.sum())})
    return {"n": len(y), "selected": int(mask.sum())}


COMMANDS = {
    "sample": (cmd_sample, ("input",)),
    "embed": (cmd_embed, ("input",)),
    "bench-optimizers": (cmd_bench, ("input",)),
    "energy": (cmd_energy, ()),
    "export-scatter": (cmd_export_scatter, ("embedding", "selection")),
}


def _summary_line(command, stats):
    parts = []
    for k, v in stats.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        elif isinstance(v, list):
            continue
        parts.append(f"{k}={v}")
    return f"{command}: " + " ".join(parts)


def main(argv=None):
    out = None
    try:
        ns = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.WARNING - 10 * min(ns.verbose, 2),
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        threads = ns.threads if ns.threads is not None else (os.cpu_count() or 1)
        if threads < 1:
            raise UsageError("--threads must be >= 1")
        cfg = make_config(ns.command, ns)
        fn, input_keys = COMMANDS[ns.command]
        _record_inputs(cfg, input_keys)
        out = Outputs(ns.out)
        out.open()
        stats = fn(cfg, out, threads)
    except UsageError as exc:
        return _fail(out, EXIT_USAGE, f"usage error: {exc}")
    except DataError as exc:
        return _fail(out, EXIT_DATA, f"data error: {exc}")
    except (InvariantError, EmbeddingError, SamplingError) as exc:
        return _fail(out, EXIT_INTERNAL, f"internal invariant violated: {exc}")
    except SystemExit as exc:  # --help / --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except Exception as exc:  # noqa: BLE001 - report, clean up, exit 4
        log.debug("unhandled", exc_info=True)
        return _fail(out, EXIT_INTERNAL, f"internal error: {type(exc).__name__}: {exc}")
    print(_summary_line(ns.command, stats))
    print(f"config_hash={cfg.config_hash} out={out.root}")
    return EXIT_OK


def _fail(out, code, message):
    if out is not None:
        out.discard()
    print(f"desne: {message}", file=sys.stderr)
    return code
