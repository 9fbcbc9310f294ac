"""PL isometric embeddings of indefinite metric graphs into Minkowski space."""

from .complex import (
    CarrierMap,
    ComplexError,
    ShellDecomposition,
    SimplicialComplex,
    build_complex,
    closed_star,
    schedule_value,
    shell_decomposition,
    subdivide_edges,
    subdivide_params,
)
from .engine1d import (
    EngineRequest,
    EngineResult,
    NotShortError,
    fold_edge_1d,
    negative_engine,
    positive_engine,
    sawtooth_edge,
    tooth_count,
)
from .forms import (
    EdgeMetric,
    MinkowskiSignature,
    PLMap,
    QuadraticForm,
    gram_matrix,
    induced_edge_energies,
    induced_form,
    is_short,
    minkowski_energy,
    signature,
    signed_length,
    signed_square,
    split_map,
)
from .pipeline import (
    EmbeddingGuard,
    PipelineError,
    PipelineReport,
    PipelineRequest,
    VerificationError,
    approximate,
    compute_guard,
    construct_H,
    isometric_embed,
    perturb_general_position,
    pl_isometry,
    split_coordinates,
)
from .verify import VerificationReport, verify_all, verify_embedding, verify_closeness, verify_isometry

__version__ = "0.1.0"

__all__ = [
    "CarrierMap",
    "ComplexError",
    "EdgeMetric",
    "EmbeddingGuard",
    "EngineRequest",
    "EngineResult",
    "MinkowskiSignature",
    "NotShortError",
    "PLMap",
    "PipelineError",
    "PipelineReport",
    "PipelineRequest",
    "QuadraticForm",
    "ShellDecomposition",
    "SimplicialComplex",
    "VerificationError",
    "VerificationReport",
    "approximate",
    "build_complex",
    "closed_star",
    "compute_guard",
    "construct_H",
    "fold_edge_1d",
    "gram_matrix",
    "induced_edge_energies",
    "induced_form",
    "is_short",
    "isometric_embed",
    "minkowski_energy",
    "negative_engine",
    "perturb_general_position",
    "pl_isometry",
    "positive_engine",
    "sawtooth_edge",
    "schedule_value",
    "shell_decomposition",
    "signature",
    "signed_length",
    "signed_square",
    "split_coordinates",
    "split_map",
    "subdivide_edges",
    "subdivide_params",
    "tooth_count",
    "verify_all",
    "verify_closeness",
    "verify_embedding",
    "verify_isometry",
]
