"""
onlinest command line: gen | run | sweep | score | serve.

Every subcommand accepts --config file.json; explicit flags override the file,
which overrides ONLINEST_* environment variables (a .env file is honored).
"""
import argparse
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv

from onlinest.config import GRANULARITIES, OnlineConfig, PolicyConfig
from onlinest.errors import OnlineSTError, UtteranceError
from onlinest.harness.report import best_per_regime, format_regimes, format_results_table
from onlinest.harness.sweep import SweepGrid
from onlinest.metrics.latency import ALVariant
from onlinest.model.toy import ModelDims
from onlinest.runner import OnlineRunner
from onlinest.tokenization import CharDelay

logger = logging.getLogger("OnlineSTCLI")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="JSON config file (keys of OnlineConfig).")
    p.add_argument("--log-level", default=None, help="Logging level (default: INFO or ONLINEST_LOG_LEVEL).")
    p.add_argument("--max-length-ratio", type=float, default=None, help="Output length cap relative to ceil(|X|/4).")


def _add_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", dest="model_path", default=None, help="SSTM weight file of a toy model.")
    p.add_argument("--bridge-url", default=None, help="Use a remote model served at this WebSocket URL.")
    p.add_argument("--bridge-timeout", dest="bridge_timeout_s", type=float, default=None)


def _add_scoring(p: argparse.ArgumentParser) -> None:
    p.add_argument("--al-variant", choices=[v.value for v in ALVariant], default=None)
    p.add_argument("--char-delay", choices=[v.value for v in CharDelay], default=None)
    p.add_argument("--workers", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onlinest", description="Online (k, s, N) decoding and latency evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Generate a synthetic corpus and toy model.")
    _add_common(gen)
    gen.add_argument("--out", required=True, help="Output directory.")
    gen.add_argument("--seed", type=int, default=1)
    gen.add_argument("--n", dest="n_utts", type=int, default=20, help="Number of utterances.")
    gen.add_argument("--len-range", type=int, nargs=2, default=[40, 80], metavar=("MIN", "MAX"))
    gen.add_argument("--input-dim", type=int, default=None, help="Feature dimension D of the toy model.")
    gen.add_argument("--frame-ms", type=float, default=None)
    gen.add_argument("--granularity", choices=list(GRANULARITIES), default=None, help="Target units of the toy model.")
    gen.add_argument("--merges", dest="merges_path", default=None, help="BPE merge file (with --granularity bpe).")

    run = sub.add_parser("run", help="Decode a corpus under one policy.")
    _add_common(run)
    _add_model(run)
    _add_scoring(run)
    run.add_argument("--manifest", required=True)
    run.add_argument("--k", type=int, default=None)
    run.add_argument("--s", type=int, default=None)
    run.add_argument("--N", type=int, default=None)
    run.add_argument("--offline", action="store_true", help="Offline greedy decoding instead of a policy.")
    run.add_argument("--out", default=None)

    sweep = sub.add_parser("sweep", help="Decode and score a (k, s, N) grid.")
    _add_common(sweep)
    _add_model(sweep)
    _add_scoring(sweep)
    sweep.add_argument("--manifest", required=True)
    sweep.add_argument("--k", dest="sweep_k", type=int, nargs="+", default=None)
    sweep.add_argument("--s", dest="sweep_s", type=int, nargs="+", default=None)
    sweep.add_argument("--N", dest="sweep_n", type=int, nargs="+", default=None)
    sweep.add_argument("--granularity", choices=list(GRANULARITIES), default=None, help="Expected target units of the model.")
    sweep.add_argument("--no-offline", action="store_true", help="Skip the offline row.")
    sweep.add_argument("--label", default="model", help="Model label used for plot data (e.g. char, bpe400).")
    sweep.add_argument("--out", default=None)

    score = sub.add_parser("score", help="Re-score stored trace files.")
    _add_common(score)
    _add_model(score)
    _add_scoring(score)
    score.add_argument("--manifest", required=True)
    score.add_argument("traces", nargs="+", help="Trace JSONL files.")
    score.add_argument("--label", default="model")
    score.add_argument("--out", default=None)

    serve = sub.add_parser("serve", help="Serve a toy model over the bridge protocol.")
    _add_common(serve)
    serve.add_argument("--model", dest="model_path", default=None)
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)

    return parser


def load_config(args: argparse.Namespace) -> OnlineConfig:
    cfg = OnlineConfig.from_file(args.config) if args.config else OnlineConfig()
    overrides = {
        name: getattr(args, name, None)
        for name in (
            "log_level",
            "max_length_ratio",
            "model_path",
            "bridge_url",
            "bridge_timeout_s",
            "al_variant",
            "char_delay",
            "granularity",
            "merges_path",
            "workers",
            "sweep_k",
            "sweep_s",
            "sweep_n",
            "host",
            "port",
            "frame_ms",
        )
    }
    if getattr(args, "bridge_url", None):
        overrides["use_bridge"] = True
    if getattr(args, "no_offline", False):
        overrides["include_offline"] = False
    return cfg.with_overrides(**overrides)


def _cmd_gen(args: argparse.Namespace, cfg: OnlineConfig) -> int:
    dims = ModelDims(input_dim=args.input_dim) if args.input_dim else None
    corpus = OnlineRunner(cfg).generate(args.out, args.seed, args.n_utts, tuple(args.len_range), dims)
    print(f"manifest: {corpus.manifest_path}")
    print(f"model:    {corpus.model_path}")
    return 0


def _cmd_run(args: argparse.Namespace, cfg: OnlineConfig) -> int:
    if args.offline:
        policy = None
    elif None in (args.k, args.s, args.N):
        print("run: pass --k, --s and --N, or --offline", file=sys.stderr)
        return 2
    else:
        policy = PolicyConfig(args.k, args.s, args.N)
    runner = OnlineRunner(cfg)
    try:
        row = runner.run(args.manifest, policy, args.out)
    finally:
        runner.close()
    print(format_results_table([row]), end="")
    return 0


def _cmd_sweep(args: argparse.Namespace, cfg: OnlineConfig) -> int:
    runner = OnlineRunner(cfg)
    try:
        result = runner.sweep(args.manifest, SweepGrid.from_config(cfg), label=args.label, out_dir=args.out)
    finally:
        runner.close()
    print(format_results_table(result.rows), end="")
    print(format_regimes(best_per_regime(result.rows)))
    return 0


def _cmd_score(args: argparse.Namespace, cfg: OnlineConfig) -> int:
    runner = OnlineRunner(cfg)
    try:
        rows = runner.score(args.traces, args.manifest, label=args.label, out_dir=args.out)
    finally:
        runner.close()
    print(format_results_table(rows), end="")
    return 0


def _cmd_serve(args: argparse.Namespace, cfg: OnlineConfig) -> int:
    import uvicorn

    from onlinest.model.toy import ToyModel
    from onlinest_server.app import create_app

    if not cfg.model_path:
        print("serve: pass --model or set ONLINEST_MODEL_PATH", file=sys.stderr)
        return 2
    app = create_app(ToyModel.load(cfg.model_path), cfg)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level=cfg.log_level.lower())
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "score": _cmd_score,
    "serve": _cmd_serve,
}


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
    except OnlineSTError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    logging.basicConfig(level=cfg.log_level.upper(), stream=sys.stderr)
    try:
        return _COMMANDS[args.command](args, cfg)
    except UtteranceError as e:
        logger.error(f"Utterance {e.utt_id} failed: {e}")
        return 1
    except OnlineSTError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
