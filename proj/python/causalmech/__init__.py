from ._core import (
    DataError,
    Error,
    NumericalError,
    UsageError,
    aggregate,
    anisotropy,
    d_separated,
    decompose,
    direction_score,
    discover,
    ecdf,
    fabric_tensor,
    gradient_check,
    gram_gaussian,
    graph_metrics,
    graph_to_dot,
    interval,
    kci_test,
    median_bandwidth,
    principal_stress_diffs,
    random_dag,
    run_stage,
    scaled_mse,
    simulate,
    structural_hamming_distance,
)

__version__ = "0.1.0"
