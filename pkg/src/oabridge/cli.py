"""Command-line surface: synth, gen, train, predict, process, eval, wer.

Exit status is 0 on success, 1 on usage errors and 2 on runtime errors.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .adapters import parse_adapter, run_se
from .audio_io import read_wav, require_pipeline_rate, write_wav
from .bridge import build_training_set, extract_features, load_model, predict, predict_files, save_model, train
from .dataset_synth import gen_noise, gen_pseudo_speech, read_manifest, synth_dataset
from .errors import OABridgeError
from .harness import CONDITIONS, DEFAULT_CONDITIONS, evaluate
from .oa_mixer import oa_mix
from .oab_config import OABConfig
from .schemas import STATISTIC_NAMES, FeatureConfig, TrainConfig, UtteranceRecord
from .scoring import corpus_wer, normalize_text, wer

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; this toolkit reserves 2 for runtime errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f'{self.prog}: error: {message}\n')


def _csv_floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated numbers, got {text!r}')


def _csv_conditions(text: str) -> List[str]:
    values = [v.strip() for v in text.split(',') if v.strip()]
    bad = [v for v in values if v not in CONDITIONS]
    if bad:
        raise argparse.ArgumentTypeError(f'unknown conditions {bad}; choose from {",".join(CONDITIONS)}')
    return values


def _csv_statistics(text: str) -> List[str]:
    values = [v.strip() for v in text.split(',') if v.strip()]
    bad = [v for v in values if v not in STATISTIC_NAMES]
    if bad or not values or len(set(values)) != len(values):
        raise argparse.ArgumentTypeError(f'expected distinct statistics from {",".join(STATISTIC_NAMES)}, got {text!r}')
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='oabridge', description='Bridge SE front ends and ASR back ends by observation adding.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging on standard error')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True
    adapter_help = 'builtin:identity | builtin:oracle | builtin:specsub | cmd:<template with {in} {out}>'

    p = sub.add_parser('synth', help='mix clean files with noise at fixed SNRs and write a manifest')
    p.add_argument('--clean-dir', required=True, help='directory of clean 16 kHz mono WAV files')
    p.add_argument('--noise-dir', required=True, help='directory of noise 16 kHz mono WAV files')
    p.add_argument('--snrs', required=True, type=_csv_floats, help='comma-separated SNRs in dB, e.g. -12,-6,0,6,12')
    p.add_argument('--seed', type=int, default=0, help='noise selection seed (default 0)')
    p.add_argument('--out-dir', required=True, help='output directory for noisy audio and manifest.jsonl')

    p = sub.add_parser('gen', help='generate a pseudo-speech or noise WAV file')
    p.add_argument('--kind', required=True, choices=['speech', 'white', 'pink'], help='signal kind')
    p.add_argument('--duration', required=True, type=float, help='duration in seconds')
    p.add_argument('--seed', type=int, default=0, help='generator seed (default 0)')
    p.add_argument('--out', required=True, help='output WAV path')

    p = sub.add_parser('train', help='train the bridge module on pure speech and pure noise')
    p.add_argument('--manifest', required=True, help='manifest whose clean/noise files form the training set')
    p.add_argument('--se', required=True, help=adapter_help)
    p.add_argument('--out', required=True, help='model file to write')
    p.add_argument('--lr', type=float, default=0.0001, help='learning rate (default 0.0001)')
    p.add_argument('--momentum', type=float, default=0.9, help='SGD momentum (default 0.9)')
    p.add_argument('--batch', type=int, default=32, help='batch size (default 32)')
    p.add_argument('--epochs', type=int, default=200, help='epochs (default 200)')
    p.add_argument('--seed', type=int, default=0, help='shuffle and crop seed (default 0)')
    p.add_argument('--crop-len', type=int, default=32000, help='crop length in samples (default 32000)')
    p.add_argument('--features', type=_csv_statistics, default=list(STATISTIC_NAMES),
                   help='pooled similarity statistics, in order (default mean,std,min,max)')
    p.add_argument('--no-standardize', action='store_true', help='run SGD on raw rather than standardized features')
    p.add_argument('--clip-floor', type=float, default=0.6, help='OA coefficient floor stored in the model (default 0.6)')
    p.add_argument('--workdir', help='directory for enhanced training audio')
    p.add_argument('--timeout', type=float, help='external SE timeout in seconds')

    p = sub.add_parser('predict', help='print S and S_prime for a noisy/enhanced pair')
    p.add_argument('--model', required=True, help='model file')
    p.add_argument('--noisy', required=True, help='noisy WAV')
    p.add_argument('--enhanced', required=True, help='enhanced WAV')

    p = sub.add_parser('process', help='enhance, predict and mix one file')
    p.add_argument('--model', required=True, help='model file')
    p.add_argument('--se', required=True, help=adapter_help)
    p.add_argument('--in', dest='input', required=True, help='noisy input WAV')
    p.add_argument('--out', required=True, help='mixed output WAV')
    p.add_argument('--clean', help='clean reference, required by builtin:oracle')
    p.add_argument('--workdir', help='directory for the intermediate enhanced file')
    p.add_argument('--timeout', type=float, help='external SE timeout in seconds')

    p = sub.add_parser('eval', help='evaluate a manifest and write a per-SNR report')
    p.add_argument('--model', required=True, help='model file')
    p.add_argument('--manifest', required=True, help='manifest to evaluate')
    p.add_argument('--se', required=True, help=adapter_help)
    p.add_argument('--asr', help='cmd:<template with {in}> or http://URL; hypothesis read from stdout or response')
    p.add_argument('--report', required=True, help='report file to write')
    p.add_argument('--jobs', type=int, help='worker count (default 1)')
    p.add_argument('--workdir', help='directory for enhanced and mixed audio')
    p.add_argument('--dump', help='per-record JSON-lines dump')
    p.add_argument('--conditions', type=_csv_conditions, default=list(DEFAULT_CONDITIONS),
                   help=f'ASR conditions to score, subset of {",".join(CONDITIONS)} (default noisy,enhanced,bridge)')
    p.add_argument('--timeout', type=float, help='external adapter timeout in seconds')

    p = sub.add_parser('wer', help='score hypotheses against references (id<TAB>text per line)')
    p.add_argument('--ref', required=True, help='reference file')
    p.add_argument('--hyp', required=True, help='hypothesis file')
    p.add_argument('--details', action='store_true', help='also print S D I N counts')
    return parser


def _read_id_text(path) -> dict:
    rows = {}
    for lineno, line in enumerate(Path(path).read_text(encoding='utf-8').splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, text = line.partition('\t')
        if not sep:
            raise UsageError(f'{path}:{lineno}: expected id<TAB>text')
        rows[key] = text
    return rows


def _cmd_synth(args, cfg: OABConfig) -> int:
    print(synth_dataset(args.clean_dir, args.noise_dir, args.snrs, args.seed, args.out_dir))
    return EXIT_OK


def _cmd_gen(args, cfg: OABConfig) -> int:
    if args.kind == 'speech':
        w = gen_pseudo_speech(args.duration, args.seed)
    else:
        w = gen_noise(args.duration, 'white' if args.kind == 'white' else 'pink-approx', args.seed)
    write_wav(w, args.out, cfg.oab_encoding)
    return EXIT_OK


def _cmd_train(args, cfg: OABConfig) -> int:
    train_cfg = TrainConfig(
        learning_rate=args.lr,
        momentum=args.momentum,
        batch_size=args.batch,
        epochs=args.epochs,
        seed=args.seed,
        crop_len_samples=args.crop_len,
        standardize=not args.no_standardize,
    )
    se = parse_adapter(args.se, 'se')
    dataset = build_training_set(read_manifest(args.manifest), se, Path(cfg.oab_workdir) / 'train',
                                 cfg.oab_adapter_timeout_s)
    model = train(dataset, train_cfg, feature_cfg=FeatureConfig(statistics=args.features), clip_floor=args.clip_floor)
    save_model(model, args.out)
    return EXIT_OK


def _cmd_predict(args, cfg: OABConfig) -> int:
    s, s_prime = predict_files(load_model(args.model), args.noisy, args.enhanced)
    print(f'{s!r}\t{s_prime!r}')
    return EXIT_OK


def _cmd_process(args, cfg: OABConfig) -> int:
    model = load_model(args.model)
    se = parse_adapter(args.se, 'se')
    record = UtteranceRecord(id=Path(args.input).stem, noisy_path=args.input, clean_path=args.clean)
    enhanced_path = run_se(se, record, Path(cfg.oab_workdir) / 'process', cfg.oab_adapter_timeout_s, cfg.oab_encoding)
    noisy = require_pipeline_rate(read_wav(args.input))
    enhanced = require_pipeline_rate(read_wav(enhanced_path))
    features = extract_features(noisy, enhanced, model.feature_config, model.stft_config)
    s, s_prime = predict(model, features.values)
    logger.info(f'{args.input}: S={s:.4f} S_prime={s_prime:.4f}')
    write_wav(oa_mix(noisy, enhanced, s_prime), args.out, cfg.oab_encoding)
    return EXIT_OK


def _cmd_eval(args, cfg: OABConfig) -> int:
    se = parse_adapter(args.se, 'se')
    asr = parse_adapter(args.asr, 'asr') if args.asr else None
    report = evaluate(args.manifest, load_model(args.model), se, asr, args.report, cfg,
                      dump_path=args.dump, conditions=args.conditions)
    return EXIT_RUNTIME if report.record_count and report.failed_count == report.record_count else EXIT_OK


def _cmd_wer(args, cfg: OABConfig) -> int:
    refs = _read_id_text(args.ref)
    hyps = _read_id_text(args.hyp)
    missing = sorted(set(refs) - set(hyps))
    if missing:
        logger.warning(f'{len(missing)} reference ids have no hypothesis; scoring them as empty')
    summary = corpus_wer(wer(normalize_text(refs[k]), normalize_text(hyps.get(k, ''))) for k in sorted(refs))
    print(summary.wer)
    if args.details:
        print(f'S={summary.substitutions} D={summary.deletions} I={summary.insertions} N={summary.ref_words}')
    return EXIT_OK


_COMMANDS = {
    'synth': _cmd_synth,
    'gen': _cmd_gen,
    'train': _cmd_train,
    'predict': _cmd_predict,
    'process': _cmd_process,
    'eval': _cmd_eval,
    'wer': _cmd_wer,
}


def _join_negative_values(argv: List[str]) -> List[str]:
    """--snrs -6,6 would otherwise be read as an unknown flag."""
    out = []
    i = 0
    while i < len(argv):
        if argv[i] == '--snrs' and i + 1 < len(argv):
            out.append(f'--snrs={argv[i + 1]}')
            i += 2
            continue
        out.append(argv[i])
        i += 1
    return out


def dispatch(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_join_negative_values(argv))
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )

    try:
        cfg = OABConfig(
            workdir=getattr(args, 'workdir', None),
            adapter_timeout_s=getattr(args, 'timeout', None),
            jobs=getattr(args, 'jobs', None),
        )
        return _COMMANDS[args.command](args, cfg)
    except UsageError as e:
        print(f'oabridge {args.command}: error: {e}', file=sys.stderr)
        return EXIT_USAGE
    except (OABridgeError, OSError, ValueError) as e:
        print(f'oabridge {args.command}: {type(e).__name__}: {e}', file=sys.stderr)
        return EXIT_RUNTIME


def main():
    sys.exit(dispatch())
