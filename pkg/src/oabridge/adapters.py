"""SE and ASR adapters: built-in enhancers, external commands and HTTP recognizers.

Adapter strings:

    builtin:identity | builtin:oracle | builtin:specsub   (SE only)
    cmd:<argv template>   SE needs {in} and {out}, ASR needs {in}
    http:<url>            ASR only; the WAV is posted as multipart field "file"
"""

import logging
import shlex
import subprocess
from pathlib import Path
from typing import List

import httpx
from httpx_retries import Retry, RetryTransport

from . import baseline_se
from .audio_io import read_wav, require_pipeline_rate, write_wav
from .errors import (
    AdapterError,
    AdapterOutputError,
    AdapterSpecError,
    AdapterTimeoutError,
    OABridgeError,
)
from .oab_config import OABConfig
from .schemas import AdapterSpec, UtteranceRecord

logger = logging.getLogger(__name__)

BUILTIN_SE = ('identity', 'oracle', 'specsub')
DEFAULT_TIMEOUT_S = 300.0


def _check_placeholders(template: str, role: str):
    if '{in}' not in template:
        raise AdapterSpecError(f'{role} command template lacks the {{in}} placeholder: {template}')
    if role == 'se' and '{out}' not in template:
        raise AdapterSpecError(f'SE command template lacks the {{out}} placeholder: {template}')


def parse_adapter(text: str, role: str = 'se') -> AdapterSpec:
    """Parses an adapter string for role 'se' or 'asr'."""
    if role not in ('se', 'asr'):
        raise ValueError(f'role must be se or asr, got {role}')
    prefix, sep, rest = text.partition(':')
    if not sep or not rest:
        raise AdapterSpecError(f'adapter must look like builtin:NAME, cmd:TEMPLATE or http:URL, got {text!r}')

    if prefix == 'builtin':
        if role != 'se' or rest not in BUILTIN_SE:
            raise AdapterSpecError(f'unknown built-in {role} adapter {rest!r}; SE built-ins are {BUILTIN_SE}')
        return AdapterSpec(kind='builtin', target=rest)
    if prefix == 'cmd':
        _check_placeholders(rest, role)
        return AdapterSpec(kind='command', target=rest)
    if prefix in ('http', 'https'):
        if role != 'asr':
            raise AdapterSpecError('HTTP adapters are only supported for ASR')
        return AdapterSpec(kind='http', target=text)
    raise AdapterSpecError(f'unknown adapter kind {prefix!r} in {text!r}')


def render_argv(template: str, **values: str) -> List[str]:
    """Splits a template shell-free and substitutes {name} placeholders per token."""
    argv = []
    for token in shlex.split(template):
        for name, value in values.items():
            token = token.replace('{' + name + '}', value)
        argv.append(token)
    return argv


def run_command(argv: List[str], timeout: float) -> subprocess.CompletedProcess:
    logger.debug(f'Executing: {argv}, timeout: {timeout}s')
    try:
        result = subprocess.run(
            argv,
            stdin=subprocess.DEVNULL,
            capture_output=True,
            text=True,
            timeout=timeout,
        )
    except FileNotFoundError as e:
        logger.error(f'Command not found: {argv[0]}')
        raise AdapterError(f'command not found: {argv[0]}') from e
    except subprocess.TimeoutExpired as e:
        logger.error(f'Command timed out after {timeout}s: {argv}')
        diagnostics = e.stderr if isinstance(e.stderr, str) else ''
        raise AdapterTimeoutError(f'{argv[0]} timed out after {timeout}s', diagnostics) from e

    if result.returncode != 0:
        logger.error(f'Command exited with {result.returncode}: {argv}')
        raise AdapterError(
            f'{argv[0]} exited with status {result.returncode}',
            (result.stderr or '') + (result.stdout or ''),
        )
    return result


def run_se(adapter: AdapterSpec, record: UtteranceRecord, workdir,
           timeout: float = DEFAULT_TIMEOUT_S, encoding: str = 'pcm16') -> Path:
    """Enhances a record's noisy file into <workdir>/enhanced/<id>.wav.

    :returns:
        Path of the enhanced file.
    """
    out_dir = Path(workdir) / 'enhanced'
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f'{record.id}.wav'

    if adapter.kind == 'builtin':
        noisy = require_pipeline_rate(read_wav(record.noisy_path))
        if adapter.target == 'identity':
            enhanced = baseline_se.se_identity(noisy)
        elif adapter.target == 'oracle':
            clean = read_wav(record.clean_path) if record.clean_path else None
            enhanced = baseline_se.se_oracle(noisy, clean)
        elif adapter.target == 'specsub':
            enhanced = baseline_se.se_spectral_subtraction(noisy)
        else:
            raise AdapterSpecError(f'unknown built-in SE adapter {adapter.target!r}')
        write_wav(enhanced, out_path, encoding)
        return out_path

    if adapter.kind == 'command':
        _check_placeholders(adapter.target, 'se')
        argv = render_argv(adapter.target, **{'in': str(record.noisy_path), 'out': str(out_path)})
        # the command's own output only, never a file left by an earlier run
        out_path.unlink(missing_ok=True)
        result = run_command(argv, timeout)
        if not out_path.exists():
            raise AdapterOutputError(f'SE command wrote no output for {record.id}', result.stderr or '')
        try:
            require_pipeline_rate(read_wav(out_path))
        except OABridgeError as e:
            raise AdapterOutputError(f'SE command output for {record.id} is not a valid WAV', str(e)) from e
        return out_path

    raise AdapterSpecError(f'{adapter.kind} adapters cannot enhance speech')


class AsrHttpClient:
    """Posts WAV files to an HTTP recognizer and returns its transcript.

    The response is either JSON with a "text" field or a plain-text body.

    Typical usage example:

        client = AsrHttpClient('http://localhost:9000/asr', OABConfig())
        text = client.transcribe('utt.wav')
    """

    def __init__(self, url: str, cfg: OABConfig = None):
        cfg = cfg or OABConfig()
        self.url = url
        self.timeout = cfg.oab_adapter_timeout_s
        self.backoff = cfg.oab_asr_backoff
        self.backoff_max_time = cfg.oab_asr_backoff_max_time
        logger.debug(f'ASR client for {url} with configuration: {cfg}')

        if self.backoff:
            exp_retry = Retry(
                allowed_methods=['POST'],
                max_backoff_wait=self.backoff_max_time,
                retry_on_exceptions=[httpx.RequestError, httpx.HTTPStatusError],
            )
            transport = RetryTransport(retry=exp_retry)
            self.http_client = httpx.Client(transport=transport, timeout=self.timeout)
        else:
            self.http_client = httpx.Client(timeout=self.timeout)

    def transcribe(self, wav_path) -> str:
        try:
            audio = Path(wav_path).read_bytes()
            response = self.http_client.post(
                self.url, files={'file': (Path(wav_path).name, audio, 'audio/wav')}
            )
            response.raise_for_status()
        except httpx.HTTPStatusError as e:
            logger.error(f'HTTP status error occurred: {e.response.status_code} {e.response.text}')
            raise AdapterError(f'ASR server returned {e.response.status_code}', e.response.text) from e
        except httpx.RequestError as e:
            logger.error(f'Request error occurred: {str(e)}')
            raise AdapterError(f'ASR request to {self.url} failed', str(e)) from e

        if response.headers.get('content-type', '').startswith('application/json'):
            payload = response.json()
            if not isinstance(payload, dict) or 'text' not in payload:
                raise AdapterOutputError('ASR JSON response has no "text" field', response.text)
            return str(payload['text'])
        return response.text

    def close(self):
        self.http_client.close()


def run_asr(adapter: AdapterSpec, wav_path, timeout: float = DEFAULT_TIMEOUT_S,
            cfg: OABConfig = None) -> str:
    """Transcribes a WAV file; the hypothesis has trailing whitespace stripped.

    An empty hypothesis is valid and only logged as a warning.
    """
    if adapter.kind == 'command':
        _check_placeholders(adapter.target, 'asr')
        result = run_command(render_argv(adapter.target, **{'in': str(wav_path)}), timeout)
        text = result.stdout
    elif adapter.kind == 'http':
        client = AsrHttpClient(adapter.target, cfg)
        try:
            text = client.transcribe(wav_path)
        finally:
            client.close()
    else:
        raise AdapterSpecError(f'{adapter.kind} adapters cannot transcribe speech')

    text = text.rstrip()
    if not text:
        logger.warning(f'ASR produced an empty hypothesis for {wav_path}')
    return text
