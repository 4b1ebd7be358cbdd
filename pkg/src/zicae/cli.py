"""Command-line front end: train models, run BER sweeps, export constellations.

Configs are flat ``key=value`` text files ('#' starts a comment).  Every run
derives all randomness from one 64-bit seed, writes a JSON manifest recording
config digest, seed and content hashes of files consumed/produced, and tags
CSV outputs with a deterministic run id so identical invocations produce
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import datetime
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import bersim, modelio
from .autoencoder import (
    ABLATION_EXPERIMENTS,
    AblationFlags,
    TrainConfig,
    encode_constellation,
    train,
)
from .bersim import BerResult, EvalConfig
from .modem import constellation_rows

log = logging.getLogger("zicae")

_BOOL = {"1": True, "0": False, "true": True, "false": False,
         "yes": True, "no": False}

_FLAG_KEYS = ("use_shortcuts", "alpha_to_subnet1", "alpha_to_subnet2",
              "alpha_to_rx", "use_subnet2")


class ConfigError(ValueError):
    pass


def parse_config_file(path) -> dict[str, str]:
    """Flat key=value lines; '#' comments; later keys override earlier ones."""
    out: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _get(cfg: dict, key: str, cast, default):
    if key not in cfg:
        return default
    try:
        return cast(cfg[key])
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad value for {key!r}: {cfg[key]!r}") from exc


def _bool(s: str) -> bool:
    return _BOOL[s.lower()]


def _float_list(s: str) -> tuple:
    return tuple(float(v) for v in s.split(",") if v.strip())


def train_config_from(cfg: dict, seed_override: int | None = None) -> TrainConfig:
    defaults = TrainConfig()
    flags = AblationFlags(**{k: _get(cfg, k, _bool, getattr(AblationFlags(), k))
                             for k in _FLAG_KEYS})
    mu_h = complex(_get(cfg, "mu_h_re", float, defaults.mu_h.real),
                   _get(cfg, "mu_h_im", float, defaults.mu_h.imag))
    seed = seed_override if seed_override is not None else _get(cfg, "seed", int, defaults.seed)
    try:
        return TrainConfig(
            n_bits=_get(cfg, "n_bits", int, defaults.n_bits),
            alpha_min=_get(cfg, "alpha_min", float, defaults.alpha_min),
            alpha_max=_get(cfg, "alpha_max", float, defaults.alpha_max),
            total_power=_get(cfg, "total_power", float, defaults.total_power),
            train_snr_db=_get(cfg, "train_snr_db", float, defaults.train_snr_db),
            n_channels=_get(cfg, "n_channels", int, defaults.n_channels),
            epochs_per_channel=_get(cfg, "epochs_per_channel", int, defaults.epochs_per_channel),
            batch=_get(cfg, "batch", int, defaults.batch),
            lr=_get(cfg, "lr", float, defaults.lr),
            decay=_get(cfg, "decay", float, defaults.decay),
            decay_every=_get(cfg, "decay_every", int, defaults.decay_every),
            seed=seed,
            csi_mode=_get(cfg, "csi_mode", str, defaults.csi_mode),
            sigma_e2=_get(cfg, "sigma_e2", float, defaults.sigma_e2),
            threshold_t=_get(cfg, "threshold_t", float, defaults.threshold_t),
            n_q=_get(cfg, "n_q", int, defaults.n_q),
            mu_h=mu_h,
            sigma_h2=_get(cfg, "sigma_h2", float, defaults.sigma_h2),
            hidden_width=_get(cfg, "hidden_width", int, defaults.hidden_width),
            n_res_blocks=_get(cfg, "n_res_blocks", int, defaults.n_res_blocks),
            subnet2_width=_get(cfg, "subnet2_width", int, defaults.subnet2_width),
            flags=flags,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def eval_config_from(cfg: dict, seed_override: int | None = None) -> EvalConfig:
    defaults = EvalConfig()
    seed = seed_override if seed_override is not None else _get(cfg, "seed", int, defaults.seed)
    n_sym = _get(cfg, "n_symbols_per_point", int, 0)
    mu_h = complex(_get(cfg, "mu_h_re", float, defaults.mu_h.real),
                   _get(cfg, "mu_h_im", float, defaults.mu_h.imag))
    try:
        return EvalConfig(
            snr_grid_db=_get(cfg, "snr_grid_db", _float_list, defaults.snr_grid_db),
            alpha_grid=_get(cfg, "alpha_grid", _float_list, defaults.alpha_grid),
            n_channel_draws=_get(cfg, "n_channel_draws", int, defaults.n_channel_draws),
            n_symbols_per_point=n_sym or None,
            min_errors=_get(cfg, "min_errors", int, defaults.min_errors),
            max_bits=_get(cfg, "max_bits", int, defaults.max_bits),
            seed=seed,
            csi_mode=_get(cfg, "csi_mode", str, defaults.csi_mode),
            sigma_e2=_get(cfg, "sigma_e2", float, defaults.sigma_e2),
            threshold_t=_get(cfg, "threshold_t", float, defaults.threshold_t),
            n_q=_get(cfg, "n_q", int, defaults.n_q),
            mu_h=mu_h,
            sigma_h2=_get(cfg, "sigma_h2", float, defaults.sigma_h2),
            n_bits=_get(cfg, "n_bits", int, defaults.n_bits),
            total_power=_get(cfg, "total_power", float, defaults.total_power),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def eval_config_text(cfg: EvalConfig) -> str:
    """Canonical rendering used for run ids and manifests."""
    rows = [f"{k}={v!r}" for k, v in sorted(vars(cfg).items())]
    return "\n".join(rows) + "\n"


def _run_id(*parts: str) -> str:
    return hashlib.sha256("\n".join(parts).encode()).hexdigest()[:16]


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def write_manifest(path, command: str, run_id: str, config_digest: str, seed: int,
                   inputs: dict, outputs: dict, started: str) -> None:
    manifest = {
        "command": command,
        "run_id": run_id,
        "config_digest": config_digest,
        "seed": seed,
        "inputs": {str(k): v for k, v in inputs.items()},
        "outputs": {str(k): v for k, v in outputs.items()},
        "started": started,
        "finished": _now(),
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# -- commands ----------------------------------------------------------------


def cmd_train(args) -> int:
    started = _now()
    raw = parse_config_file(args.config)
    cfg = train_config_from(raw, args.seed)
    log.info("training: %d channels x %d epochs, batch %d, alpha [%g, %g], %s CSI",
             cfg.n_channels, cfg.epochs_per_channel, cfg.batch,
             cfg.alpha_min, cfg.alpha_max, cfg.csi_mode)
    model, history = train(cfg)

    out = Path(args.out)
    modelio.save_model(out, model, cfg)
    log_rows = ["channel,alpha,loss,lr"]
    log_rows += [f"{r['channel']},{r['alpha']!r},{r['loss']!r},{r['lr']!r}"
                 for r in history]
    log_path = Path(f"{out}.train.csv")
    _write_text(log_path, "\n".join(log_rows) + "\n")

    config_text = modelio.config_text(cfg)
    digest = hashlib.sha256(config_text.encode()).hexdigest()
    run_id = _run_id("train", config_text)
    write_manifest(Path(f"{out}.manifest.json"), "train", run_id,
                   digest, cfg.seed, inputs={args.config: _file_digest(args.config)},
                   outputs={out: modelio.file_sha256(out),
                            log_path: modelio.file_sha256(log_path)},
                   started=started)
    log.info("model written to %s", out)
    return 0


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_models(args) -> tuple[list, list[Path]]:
    if args.model:
        paths = [Path(p) for p in args.model]
    elif args.model_dir:
        paths = sorted(Path(args.model_dir).glob("*.zicmodel"))
        if not paths:
            raise ConfigError(f"no *.zicmodel files in {args.model_dir}")
    else:
        raise ConfigError("scheme=dae needs --model or --model-dir")
    return [modelio.load_model(p) for p in paths], paths


def _build_scheme(args, cfg: EvalConfig):
    if args.scheme == "baseline1":
        return bersim.Baseline1(cfg.n_bits, cfg.total_power), []
    if args.scheme == "baseline2":
        return bersim.Baseline2(cfg.n_bits, cfg.total_power), []
    models, paths = _load_models(args)
    for model, path in zip(models, paths):
        if model.csi_mode != cfg.csi_mode:
            raise ConfigError(f"{path}: model was trained for {model.csi_mode} CSI "
                              f"but the evaluation requests {cfg.csi_mode}")
    scheme = bersim.DaeScheme(models)
    for alpha in cfg.alpha_grid:
        scheme.route(alpha)  # fail fast, naming the uncovered interval
    return scheme, paths


def cmd_eval(args) -> int:
    started = _now()
    raw = parse_config_file(args.config)
    cfg = eval_config_from(raw, args.seed)
    scheme, model_paths = _build_scheme(args, cfg)

    points = [(snr, alpha) for snr in cfg.snr_grid_db for alpha in cfg.alpha_grid]
    log.info("evaluating %s on %d grid points, %d channel draws each",
             args.scheme, len(points), cfg.n_channel_draws)

    def one(i_point):
        snr, alpha = points[i_point]
        return bersim.evaluate_point(cfg, scheme, alpha, snr, i_point)

    if args.threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.threads) as pool:
            evaluated = list(pool.map(one, range(len(points))))
    else:
        evaluated = [one(i) for i in range(len(points))]
    result = BerResult(points=evaluated)

    model_hashes = {p: modelio.file_sha256(p) for p in model_paths}
    run_id = _run_id("eval", args.scheme, eval_config_text(cfg),
                     *sorted(model_hashes.values()))
    _write_text(args.out, bersim.result_to_csv(result, run_id))
    digest = hashlib.sha256(eval_config_text(cfg).encode()).hexdigest()
    inputs = {args.config: _file_digest(args.config), **model_hashes}
    write_manifest(Path(f"{args.out}.manifest.json"),
                   "eval", run_id, digest, cfg.seed, inputs,
                   {args.out: _file_digest(args.out)}, started)
    return 0


def cmd_export_constellation(args) -> int:
    started = _now()
    model = modelio.load_model(args.model)
    if not model.covers(args.alpha):
        print(f"error: alpha={args.alpha:g} outside the trained interval "
              f"[{model.alpha_min:g}, {model.alpha_max:g}]", file=sys.stderr)
        return 1
    c1, c2 = encode_constellation(model, math.sqrt(args.alpha))
    lines = ["user,bits,re,im"]
    for user, c in ((1, c1), (2, c2)):
        for pattern, re, im in constellation_rows(c):
            lines.append(f"{user},{pattern},{re!r},{im!r}")
    _write_text(args.out, "\n".join(lines) + "\n")
    run_id = _run_id("export", modelio.file_sha256(args.model), repr(args.alpha))
    write_manifest(Path(f"{args.out}.manifest.json"),
                   "export-constellation", run_id, "-", 0,
                   {args.model: modelio.file_sha256(args.model)},
                   {args.out: _file_digest(args.out)}, started)
    return 0


ABLATION_ALPHAS = (0.5, 1.0, 1.5)


def cmd_ablation(args) -> int:
    started = _now()
    raw = parse_config_file(args.config)
    base = train_config_from(raw, args.seed)
    if base.alpha_min > min(ABLATION_ALPHAS) or base.alpha_max < max(ABLATION_ALPHAS):
        raise ConfigError(
            f"ablation config must cover alpha in {list(ABLATION_ALPHAS)}; "
            f"got [{base.alpha_min:g}, {base.alpha_max:g}]")

    eval_cfg = EvalConfig(
        snr_grid_db=(10.0,), alpha_grid=ABLATION_ALPHAS,
        n_channel_draws=_get(raw, "n_channel_draws", int, 10),
        n_symbols_per_point=_get(raw, "n_symbols_per_point", int, 0) or None,
        min_errors=_get(raw, "min_errors", int, 100),
        max_bits=_get(raw, "max_bits", int, 2_000_000),
        seed=base.seed, n_bits=base.n_bits, total_power=base.total_power)

    table: dict[str, BerResult] = {}
    for name, flags in ABLATION_EXPERIMENTS.items():
        log.info("ablation: training %s", name)
        model, _ = train(replace(base, flags=flags))
        table[name] = bersim.sweep(eval_cfg, bersim.DaeScheme([model]))

    names = list(ABLATION_EXPERIMENTS)
    lines = ["alpha," + ",".join(names)]
    for i, alpha in enumerate(ABLATION_ALPHAS):
        cells = [repr(table[name].points[i].ber_worst) for name in names]
        lines.append(f"{alpha!r}," + ",".join(cells))
    _write_text(args.out, "\n".join(lines) + "\n")

    run_id = _run_id("ablation", modelio.config_text(base))
    write_manifest(Path(f"{args.out}.manifest.json"),
                   "ablation", run_id,
                   hashlib.sha256(modelio.config_text(base).encode()).hexdigest(),
                   base.seed, {args.config: _file_digest(args.config)},
                   {args.out: _file_digest(args.out)}, started)
    return 0


def cmd_selftest(args) -> int:
    from . import selftest
    return selftest.run_all()


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="override the config seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zicae",
        description="Z-interference channel link simulator: learned and QAM transceivers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one autoencoder model")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="model file to write")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="run a BER sweep and write CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--scheme", required=True, choices=["baseline1", "baseline2", "dae"])
    p.add_argument("--model", action="append", help="model file (repeatable)")
    p.add_argument("--model-dir", help="directory of *.zicmodel files")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-constellation", help="dump learned constellations as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_constellation)

    p = sub.add_parser("ablation", help="train and compare architecture variants")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=cmd_ablation)

    p = sub.add_parser("selftest", help="run the built-in property suites")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("ZIC_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, LookupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
