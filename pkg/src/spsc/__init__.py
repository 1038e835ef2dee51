"""Self-paced sparse coding with hypergraph regularization.

Library surface: data preparation (`data`), k-NN hypergraph Laplacians
(`hypergraph`), self-paced weighting (`selfpace`), the convex sub-solvers
(`solvers`), the alternating driver (`engine`), and clustering evaluation
(`cluster`). The `spsc` console script exposes the experiment pipeline.
"""

from .cluster import ClusterResult, clustering_accuracy, evaluate_repeated, kmeans, nmi
from .data import (
    DataMatrix,
    NoiseSpec,
    add_gaussian_noise,
    load_matrix_csv,
    normalize_columns_unit_l2,
    save_matrix_csv,
    synth_blobs,
)
from .engine import FitResult, FitTrace, SPSCConfig, fit_csc_init, fit_spsc
from .hypergraph import (
    Hypergraph,
    build_knn_graph,
    build_knn_hypergraph,
    compute_weight_and_laplacian,
    knn_hypergraph_laplacian,
)
from .selfpace import (
    LossField,
    Variant,
    WeightState,
    advance_pace,
    compute_losses,
    effective_weight_matrix,
    hard_weight_update,
    init_lambda,
    soft_weight_update,
    spl_penalty,
)
from .solvers import (
    RegularizationConfig,
    b_step_lagrange_dual,
    b_step_projected_gradient,
    objective_value,
    project_columns_unit_ball,
    q_step,
    s_step_column,
    s_step_sweep,
)

__version__ = "0.1.0"
