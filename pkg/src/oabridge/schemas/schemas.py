from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

STATISTIC_NAMES = ('mean', 'std', 'min', 'max')


class StftConfig(BaseModel):
    model_config = ConfigDict(frozen=True)
    window_len: int = Field(default=400, gt=0)
    hop_len: int = Field(default=100, gt=0)
    window: Literal['hann'] = 'hann'

    @model_validator(mode='after')
    def _hop_within_window(self):
        if self.hop_len > self.window_len:
            raise ValueError(f'hop_len {self.hop_len} exceeds window_len {self.window_len}')
        return self

    @property
    def n_bins(self) -> int:
        return self.window_len // 2 + 1


class FeatureConfig(BaseModel):
    model_config = ConfigDict(frozen=True)
    statistics: List[Literal['mean', 'std', 'min', 'max']] = Field(
        default_factory=lambda: list(STATISTIC_NAMES)
    )

    @field_validator('statistics')
    @classmethod
    def _nonempty_unique(cls, value):
        if not value:
            raise ValueError('at least one statistic is required')
        if len(set(value)) != len(value):
            raise ValueError(f'duplicate statistics in {value}')
        return value

    @property
    def dimension(self) -> int:
        return len(self.statistics)


class BridgeModel(BaseModel):
    """Linear SNR-level predictor plus the clip that turns it into the OA coefficient."""
    weights: List[float]
    bias: float
    clip_floor: float = 0.6
    clip_ceil: float = 1.0
    feature_config: FeatureConfig = Field(default_factory=FeatureConfig)
    stft_config: StftConfig = Field(default_factory=StftConfig)

    @model_validator(mode='after')
    def _check_invariants(self):
        if not 0.0 <= self.clip_floor < self.clip_ceil <= 1.0:
            raise ValueError(
                f'clip range must satisfy 0 <= floor < ceil <= 1, got [{self.clip_floor}, {self.clip_ceil}]'
            )
        if len(self.weights) != self.feature_config.dimension:
            raise ValueError(
                f'{len(self.weights)} weights for {self.feature_config.dimension} features'
            )
        return self


class ModelFile(BaseModel):
    """On-disk layout of a saved BridgeModel."""
    model_config = ConfigDict(extra='forbid')
    format_version: Literal[1]
    stft: StftConfig
    features: List[str]
    weights: List[float]
    bias: float
    clip_floor: float
    clip_ceil: float


class TrainConfig(BaseModel):
    learning_rate: float = Field(default=0.0001, ge=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    batch_size: int = Field(default=32, gt=0)
    epochs: int = Field(default=200, gt=0)
    seed: int = 0
    crop_len_samples: int = Field(default=32000, gt=0)
    standardize: bool = True


class UtteranceRecord(BaseModel):
    id: str
    clean_path: Optional[str] = None
    noise_path: Optional[str] = None
    noisy_path: str
    enhanced_path: Optional[str] = None
    snr_db: Optional[float] = None
    transcript: Optional[str] = None


class AdapterSpec(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal['builtin', 'command', 'http']
    target: str


class WerSummary(BaseModel):
    wer: float
    substitutions: int
    deletions: int
    insertions: int
    ref_words: int


class SnrBinStats(BaseModel):
    count: int
    mean_S: float
    std_S: float
    mean_S_prime: float
    std_S_prime: float


class RecordFailure(BaseModel):
    id: str
    error: str


class EvalReport(BaseModel):
    per_snr: Dict[str, SnrBinStats] = {}
    wer: Optional[Dict[str, WerSummary]] = None
    per_snr_wer: Optional[Dict[str, Dict[str, WerSummary]]] = None
    spearman_S_vs_snr: Optional[float] = None
    record_count: int = 0
    failed_count: int = 0
    failures: List[RecordFailure] = []
    warnings: List[str] = []


class RecordResult(BaseModel):
    """Per-record values of one evaluation, as dumped to JSON lines."""
    id: str
    snr_db: Optional[float] = None
    S: float
    S_prime: float
    wer: Optional[Dict[str, float]] = None
