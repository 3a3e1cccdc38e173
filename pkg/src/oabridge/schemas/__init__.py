from .schemas import (
    STATISTIC_NAMES,
    AdapterSpec,
    BridgeModel,
    EvalReport,
    FeatureConfig,
    ModelFile,
    RecordFailure,
    RecordResult,
    SnrBinStats,
    StftConfig,
    TrainConfig,
    UtteranceRecord,
    WerSummary,
)
