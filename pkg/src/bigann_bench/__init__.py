"""Desk-scale benchmarking toolkit for large-scale approximate nearest
neighbor search: dataset formats, an exact oracle, baseline indexes,
accuracy metrics, a timing harness with a REST protocol, and leaderboard
scoring."""

from .dataset import (
    KnnGroundTruth,
    Metric,
    QueryMode,
    RangeGroundTruth,
    ScalarKind,
    SyntheticSpec,
    VectorDataset,
    compute_distance,
    generate_synthetic,
    read_knn_gt,
    read_range_gt,
    read_vectors,
    slice_prefix,
    write_knn_gt,
    write_range_gt,
    write_vectors,
)
from .errors import (
    BenchError,
    FormatError,
    ProtocolError,
    UnknownParameterError,
    ValidationError,
)
from .harness import (
    Clock,
    FakeClock,
    MonotonicClock,
    QueryConfig,
    RunRecord,
    load_runs,
    persist_runs,
    run_experiment,
)
from .indexes import (
    AnnIndex,
    FlatIndex,
    IvfFlatIndex,
    IvfPqIndex,
    Neighbor,
    Params,
    ResultSet,
    VamanaIndex,
    available_algorithms,
    create_index,
    load_index,
    save_index,
)
from .metrics import AccuracyKind, AccuracyReport, range_ap, recall_at_k
from .oracle import brute_force_knn, brute_force_range
from .quantization import (
    KMeansModel,
    PqCodebook,
    Sq8Model,
    adc_lookup,
    adc_lookup_many,
    kmeans_train,
    pq_adc_table,
    pq_decode,
    pq_encode,
    pq_train,
    sq8_decode,
    sq8_encode,
    sq8_train,
)
from .rest import AlgorithmServer, RemoteIndex, remote_index, serve_algorithm
from .scoring import (
    CostModelInput,
    Leaderboard,
    LeaderboardEntry,
    LeaderboardMode,
    ParetoCurve,
    TradeoffPoint,
    accuracy_at_qps,
    capacity_cost,
    curves_from_runs,
    emit_tradeoff_plot,
    gated_joules_per_query,
    integrate_power_trace,
    joules_per_query,
    leaderboard,
    machines_required,
    pareto_frontier,
    points_from_runs,
    qps_at_accuracy,
    read_tradeoff_csv,
)

__version__ = "0.1.0"
