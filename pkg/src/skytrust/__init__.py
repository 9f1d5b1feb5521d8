"""SkyTrust: dynamic trust, energy-aware consensus, and federated trust models
for UAV mesh networks, with a deterministic desk-scale evaluation harness."""

from .config import ConfigError, ScenarioConfig, config_from_dict, load_config, preset
from .fl import (
    AggregationMode,
    DegenerateWeights,
    FeatureVector,
    FLRoundState,
    LocalDataset,
    ModelParams,
    RoundSkipped,
    TrainConfig,
    fedavg_aggregate,
    has_converged,
    predict,
    run_fl_round,
    train_local,
    trust_weighted_aggregate,
)
from .ledger import (
    Block,
    ChainStatus,
    EmptyBlockRejected,
    Ledger,
    NoCandidates,
    Transaction,
    TxKind,
    ValidatorLottery,
    append_block,
    energy_charge,
    from_ndjson,
    select_validator,
    to_ndjson,
    validation_probabilities,
    verify_chain,
)
from .metrics import (
    MetricsReport,
    UndefinedMetric,
    accuracy,
    comm_overhead_mb_per_uav,
    detection_rate,
    energy_per_transaction,
)
from .netsim import (
    AuditOracle,
    InvalidHub,
    Mesh,
    Star,
    UavKind,
    UavProfile,
    WorldState,
    build_topology,
    deplete_energy,
    generate_interactions,
    ground_truth_labels,
    step_mobility,
)
from .trust import (
    BehaviorWeights,
    Classification,
    DomainError,
    EnergyState,
    InteractionRecord,
    InvalidCapacity,
    NoObservations,
    TrustState,
    TrustWeights,
    behavior_score,
    classify,
    energy_score,
    update_trust,
)

__version__ = "0.1.0"
