"""topopath: mine candidate disease pathways from patient-condition data.

The pipeline enumerates symptom patterns over a binary association matrix,
scores them with cumulant-based shuffle tests, measures cluster similarity
with Jaccard distance, and extracts persistent-homology barcodes and
representative cycles that surface redescriptions: distinct symptom
combinations sharing the same patient group.
"""

__version__ = "0.1.0"

from .ingest import (
    AssociationMatrix,
    ConditionCode,
    IngestError,
    PatientRecord,
    build_matrix,
    load_code_table,
    load_lexicon,
    load_records,
    tag_lexicon,
)
from .patterns import (
    Cluster,
    ClusterSummary,
    Pattern,
    RedescriptionPair,
    enumerate_clusters,
    find_redescriptions,
)
from .significance import (
    SignificanceScore,
    cumulant,
    empirical_moment,
    filter_significant,
    matrix_cumulant,
    shuffle_null,
)
from .metric import DistanceMatrix, distance_matrix, jaccard
from .filtration import Filtration, FiltrationError, Simplex, build_vr
from .persistence import (
    Barcode,
    BoundaryMatrix,
    PersistencePair,
    barcode,
    betti_at,
    reduce,
)
from .cycles import AnnotatedLoop, RepresentativeCycle, annotate, representative
from .report import BarcodePlotSpec, render_barcode, render_cycle

__all__ = [
    "AnnotatedLoop",
    "AssociationMatrix",
    "Barcode",
    "BarcodePlotSpec",
    "BoundaryMatrix",
    "Cluster",
    "ClusterSummary",
    "ConditionCode",
    "DistanceMatrix",
    "Filtration",
    "FiltrationError",
    "IngestError",
    "PatientRecord",
    "Pattern",
    "PersistencePair",
    "RedescriptionPair",
    "RepresentativeCycle",
    "SignificanceScore",
    "Simplex",
    "annotate",
    "barcode",
    "betti_at",
    "build_matrix",
    "build_vr",
    "cumulant",
    "distance_matrix",
    "empirical_moment",
    "enumerate_clusters",
    "filter_significant",
    "find_redescriptions",
    "jaccard",
    "load_code_table",
    "load_lexicon",
    "load_records",
    "matrix_cumulant",
    "reduce",
    "render_barcode",
    "render_cycle",
    "representative",
    "shuffle_null",
    "tag_lexicon",
]
