__version__ = '0.1.0'

from .audio_io import Waveform, read_wav, write_wav
from .bridge import extract_features, load_model, predict, save_model, train
from .harness import evaluate
from .oa_mixer import oa_mix
from .oab_config import OABConfig
