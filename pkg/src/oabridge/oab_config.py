import logging
import os

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

ENCODINGS = ('pcm16', 'float32')


class OABConfig:
    """Configuration class containing arguments for the pipeline runners.

    Contains the work directory for derived audio, external adapter limits,
    the evaluation worker count and the HTTP ASR retry policy.
    """

    oab_workdir: str
    oab_adapter_timeout_s: float
    oab_jobs: int
    oab_asr_backoff: bool
    oab_asr_backoff_max_time: int
    oab_encoding: str

    def __init__(self, workdir: str = None, adapter_timeout_s: float = None, jobs: int = None,
                 asr_backoff: bool = True, asr_backoff_max_time: int = None, encoding: str = None):
        """Constructor for configuration class.

        Explicit arguments win over environment variables, which win over defaults.

        Args:
        workdir (optional):
            Directory receiving enhanced and mixed audio. Falls back to OAB_WORKDIR, then ./oab_work.
        adapter_timeout_s (optional):
            Seconds an external SE or ASR command may run. Falls back to OAB_ADAPTER_TIMEOUT, then 300.
        jobs (optional):
            Worker count for evaluation. Falls back to OAB_JOBS, then 1.
        asr_backoff:
            Whether HTTP ASR adapters retry failed requests.
        asr_backoff_max_time (optional):
            Max seconds between HTTP retries. Falls back to OAB_ASR_BACKOFF_MAX_TIME, then 30.
        encoding (optional):
            Encoding of derived WAV files, pcm16 or float32. Falls back to OAB_ENCODING, then pcm16.
        """

        self.oab_workdir = workdir or os.getenv('OAB_WORKDIR') or './oab_work'
        self.oab_adapter_timeout_s = float(
            adapter_timeout_s if adapter_timeout_s is not None else os.getenv('OAB_ADAPTER_TIMEOUT', 300)
        )
        self.oab_jobs = int(jobs if jobs is not None else os.getenv('OAB_JOBS', 1))
        self.oab_asr_backoff = asr_backoff
        self.oab_asr_backoff_max_time = int(
            asr_backoff_max_time if asr_backoff_max_time is not None
            else os.getenv('OAB_ASR_BACKOFF_MAX_TIME', 30)
        )
        self.oab_encoding = (encoding or os.getenv('OAB_ENCODING') or 'pcm16').lower()

        if self.oab_adapter_timeout_s <= 0:
            raise ValueError('Adapter timeout must be positive. Check OAB_ADAPTER_TIMEOUT.')
        if self.oab_jobs < 1:
            raise ValueError('Jobs must be at least 1. Check OAB_JOBS.')
        if self.oab_encoding not in ENCODINGS:
            raise ValueError(f'Encoding must be one of {ENCODINGS}, got {self.oab_encoding}.')

        logger.debug(f'OABConfig: {self}')

    def __str__(self):
        """Stringify function to return contents of config object for logging"""
        return (f'{self.oab_workdir} {self.oab_adapter_timeout_s} {self.oab_jobs} '
                f'{self.oab_asr_backoff} {self.oab_asr_backoff_max_time} {self.oab_encoding}')
