"""Manifest-driven evaluation of the SE -> bridge -> OA -> ASR pipeline.

For every record: enhance, extract similarity features, predict (S, S'),
mix, optionally transcribe each condition and score it, then aggregate the
prediction statistics per SNR bin and the WER per condition.
"""

import json
import logging
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import spearmanr

from .adapters import parse_adapter, run_asr, run_se
from .audio_io import Waveform, read_wav, require_pipeline_rate, write_wav
from .bridge import extract_features, predict, with_clip_floor
from .dataset_synth import read_manifest
from .errors import OABridgeError
from .oa_mixer import oa_mix
from .oab_config import OABConfig
from .schemas import (
    AdapterSpec,
    BridgeModel,
    EvalReport,
    RecordFailure,
    RecordResult,
    SnrBinStats,
    UtteranceRecord,
    WerSummary,
)
from .scoring import corpus_wer, normalize_text, score_text, wer

__all__ = [
    'evaluate',
    'normalize_text',
    'parse_adapter',
    'run_asr',
    'run_se',
    'wer',
]

logger = logging.getLogger(__name__)

CONDITIONS = ('noisy', 'enhanced', 'bridge', 'snr_level', 'clean')
DEFAULT_CONDITIONS = ('noisy', 'enhanced', 'bridge')
UNBINNED = 'unbinned'


class _Outcome:
    """Everything one record contributes to the report."""

    def __init__(self, record: UtteranceRecord):
        self.record = record
        self.s: Optional[float] = None
        self.s_prime: Optional[float] = None
        self.wer: Dict[str, WerSummary] = {}
        self.warnings: List[str] = []
        self.error: Optional[str] = None


def snr_key(snr_db: Optional[float]) -> str:
    return UNBINNED if snr_db is None else f'{snr_db:g}'


def _bin_order(key: str) -> Tuple[int, float]:
    return (1, 0.0) if key == UNBINNED else (0, float(key))


def _write_mix(w: Waveform, workdir: Path, subdir: str, record_id: str, encoding: str) -> Path:
    out_dir = workdir / subdir
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f'{record_id}.wav'
    write_wav(w, path, encoding)
    return path


def _process_record(record: UtteranceRecord, model: BridgeModel, se: AdapterSpec,
                    asr: Optional[AdapterSpec], conditions: Sequence[str],
                    workdir: Path, cfg: OABConfig) -> _Outcome:
    outcome = _Outcome(record)
    try:
        enhanced_path = run_se(se, record, workdir, cfg.oab_adapter_timeout_s, cfg.oab_encoding)
        noisy = require_pipeline_rate(read_wav(record.noisy_path))
        enhanced = require_pipeline_rate(read_wav(enhanced_path))

        features = extract_features(noisy, enhanced, model.feature_config, model.stft_config)
        if features.silent:
            outcome.warnings.append(f'{record.id}: no valid similarity frames (silent input)')
        outcome.s, outcome.s_prime = predict(model, features.values)
        mixed = oa_mix(noisy, enhanced, outcome.s_prime)
        mixed_path = _write_mix(mixed, workdir, 'mixed', record.id, cfg.oab_encoding)

        if asr is None:
            return outcome
        if not record.transcript:
            outcome.warnings.append(f'{record.id}: no transcript, WER not scored')
            return outcome
        if not normalize_text(record.transcript):
            outcome.warnings.append(f'{record.id}: transcript has no words, WER not scored')
            return outcome

        audio = {'noisy': Path(record.noisy_path), 'enhanced': enhanced_path, 'bridge': mixed_path}
        if 'snr_level' in conditions:
            _, floor_free = predict(with_clip_floor(model, 0.0), features.values)
            audio['snr_level'] = _write_mix(oa_mix(noisy, enhanced, floor_free), workdir,
                                            'snr_level', record.id, cfg.oab_encoding)
        if 'clean' in conditions and record.clean_path:
            audio['clean'] = Path(record.clean_path)

        for condition in conditions:
            if condition not in audio:
                continue
            hypothesis = run_asr(asr, audio[condition], cfg.oab_adapter_timeout_s, cfg)
            if not hypothesis:
                outcome.warnings.append(f'{record.id}: empty ASR hypothesis for {condition}')
            outcome.wer[condition] = score_text(record.transcript, hypothesis)
    except (OABridgeError, OSError) as e:
        logger.error(f'Record {record.id} failed: {e}')
        outcome.error = f'{type(e).__name__}: {e}'
    return outcome


def _bin_stats(values_s: List[float], values_sp: List[float]) -> SnrBinStats:
    s = np.array(values_s)
    sp = np.array(values_sp)
    return SnrBinStats(
        count=len(s),
        mean_S=float(np.mean(s)),
        std_S=float(np.std(s)),
        mean_S_prime=float(np.mean(sp)),
        std_S_prime=float(np.std(sp)),
    )


def _spearman(pairs: List[Tuple[float, float]]) -> Optional[float]:
    if len(pairs) < 2:
        return None
    snrs, scores = zip(*pairs)
    if len(set(snrs)) < 2 or len(set(scores)) < 2:
        return None
    rho, _ = spearmanr(snrs, scores)
    return None if math.isnan(rho) else float(rho)


def build_report(outcomes: List[_Outcome], asr_enabled: bool) -> EvalReport:
    """Aggregates per-record outcomes, visiting them in id order."""
    outcomes = sorted(outcomes, key=lambda o: o.record.id)
    by_bin = defaultdict(lambda: ([], []))
    wer_by_condition = defaultdict(list)
    wer_by_bin = defaultdict(lambda: defaultdict(list))
    failures = []
    warnings = []
    correlation_pairs = []

    for o in outcomes:
        warnings.extend(o.warnings)
        if o.error is not None:
            failures.append(RecordFailure(id=o.record.id, error=o.error))
            continue
        key = snr_key(o.record.snr_db)
        by_bin[key][0].append(o.s)
        by_bin[key][1].append(o.s_prime)
        if o.record.snr_db is not None:
            correlation_pairs.append((o.record.snr_db, o.s))
        for condition, summary in o.wer.items():
            wer_by_condition[condition].append(summary)
            wer_by_bin[key][condition].append(summary)

    report = EvalReport(
        per_snr={key: _bin_stats(*by_bin[key]) for key in sorted(by_bin, key=_bin_order)},
        spearman_S_vs_snr=_spearman(correlation_pairs),
        record_count=len(outcomes),
        failed_count=len(failures),
        failures=failures,
        warnings=warnings,
    )
    if asr_enabled and wer_by_condition:
        report.wer = {c: corpus_wer(wer_by_condition[c]) for c in CONDITIONS if c in wer_by_condition}
        report.per_snr_wer = {
            key: {c: corpus_wer(wer_by_bin[key][c]) for c in CONDITIONS if c in wer_by_bin[key]}
            for key in sorted(wer_by_bin, key=_bin_order)
        }
    return report


def _dump_records(outcomes: List[_Outcome], path: Path):
    lines = []
    for o in sorted(outcomes, key=lambda o: o.record.id):
        if o.error is not None:
            continue
        row = RecordResult(
            id=o.record.id,
            snr_db=o.record.snr_db,
            S=o.s,
            S_prime=o.s_prime,
            wer={c: s.wer for c, s in o.wer.items()} or None,
        )
        lines.append(json.dumps(row.model_dump(exclude_none=True)))
    path.write_text(''.join(line + '\n' for line in lines), encoding='utf-8')


def write_report(report: EvalReport, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.model_dump(mode='json'), indent=2) + '\n', encoding='utf-8')
    return path


def evaluate(manifest, model: BridgeModel, se: AdapterSpec, asr: Optional[AdapterSpec] = None,
             out_report=None, cfg: OABConfig = None, dump_path=None,
             conditions: Sequence[str] = DEFAULT_CONDITIONS) -> EvalReport:
    """Runs the full pipeline over a manifest and writes the report.

    ``manifest`` is a manifest path or a list of records. Records that fail
    are tallied in the report and do not stop the run. Input audio is never
    modified; derived audio goes under the configured work directory.
    """
    cfg = cfg or OABConfig()
    unknown = set(conditions) - set(CONDITIONS)
    if unknown:
        raise ValueError(f'unknown conditions {sorted(unknown)}, expected a subset of {CONDITIONS}')
    if 'bridge' not in conditions:
        conditions = tuple(conditions) + ('bridge',)
    records = read_manifest(manifest) if isinstance(manifest, (str, Path)) else list(manifest)
    workdir = Path(cfg.oab_workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    logger.info(f'Evaluating {len(records)} records with {cfg.oab_jobs} worker(s) in {workdir}')

    def work(record: UtteranceRecord) -> _Outcome:
        return _process_record(record, model, se, asr, conditions, workdir, cfg)

    if cfg.oab_jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.oab_jobs) as pool:
            outcomes = list(pool.map(work, records))
    else:
        outcomes = [work(record) for record in records]

    report = build_report(outcomes, asr is not None)
    if report.failed_count:
        logger.warning(f'{report.failed_count} of {report.record_count} records failed')
    if out_report is not None:
        write_report(report, out_report)
    if dump_path is not None:
        _dump_records(outcomes, Path(dump_path))
    return report
