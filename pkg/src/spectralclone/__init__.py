"""Program clone search by spectral similarity of call graphs and CFG sizes."""
from .errors import (
    CloneSearchError,
    ConvergenceFailure,
    DanglingReference,
    DegenerateGroups,
    DuplicateId,
    EmptyRepository,
    InvalidParameter,
    MalformedJson,
    MissingProgram,
    ModeMismatch,
    SchemaViolation,
    UnknownMetric,
)
from .evaluation import EvalReport, TestField, k_sweep, load_test_field, rank_biserial, run_test_field, synthetic_test_field
from .features import (
    CallGraphSpec,
    FunctionSpec,
    Node,
    ProgramFeatures,
    generate_synthetic_program,
    load_feature_file,
    parse_feature_file,
    perturb_program,
    serialize_features,
)
from .graph import UndirectedGraph, cfg_edge_vector, laplacian, undirected_call_graph
from .metrics import METRIC_IDS, BaselineFeatures, SpectralSignature, pss, sim_cfg, sim_cg
from .repository import RankedResult, Repository, RepositoryRecord, decide, preprocess, query
from .spectral import Spectrum, full_spectrum, normalize, top_k_spectrum

__version__ = "0.1.0"
