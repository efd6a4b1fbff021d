"""Adaptive constraint-driven traffic classification.

A pool of header-bit classifiers with different feature requirements, an
offline profiler of decision time and memory across batch sizes, and a
scheduler that picks the combination with the best performance-to-time
ratio under the current traffic rate and memory budget; plus a
deterministic replay simulator for studying the adaptation behavior.
"""

from .boosting import BoostedTernaryClassifier
from .encoding import (
    FeatureSubset,
    TernaryHeaderEncoder,
    bits_to_uint,
    encode_flow,
    encode_flows,
    encode_staged,
    stage_batch,
    subset_bits,
    subset_layout,
)
from .errors import AcdcError, ConfigError, EncodeError, PcapFormatError, PcapParseError
from .explore import (
    ClassifierPool,
    PoolConfig,
    PoolMember,
    build_pool,
    k_best_subsets,
    load_pool,
    rank_features,
    RankedFeature,
    read_manifest,
    save_pool,
)
from .fields import FieldRegistry, FieldSpec, field_registry
from .flows import (
    FlowKey,
    FlowRecord,
    FlowSet,
    PacketSnapshot,
    load_flowset,
    save_flowset,
    split_train_test,
)
from .flowstats import FlowStatsClassifier, extract_flow_stats
from .importance import ImportanceReport, permutation_importance
from .metrics import weighted_f1
from .pcap import parse_pcap
from .profiling import (
    CostModel,
    MEASURED,
    MODELED,
    ProfileEntry,
    calibrate_cost_model,
    concurrent_instances,
    handled_throughput,
    measure_profile,
    model_profile,
    read_profile_csv,
    throughput,
    total_memory,
    write_profile_csv,
)
from .scheduler import SchedulerDecision, SchedulerInput, feasible, select
from .simulate import (
    Scenario,
    SimulationTrace,
    TrendVerdict,
    run_simulation,
    throughput_report,
    trend_check,
)
from .synthetic import (
    GeneratorConfig,
    default_generator_config,
    generate_synthetic,
    load_generator_config,
)

__version__ = "0.1.0"
