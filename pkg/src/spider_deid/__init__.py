"""spider-deid: end-to-end encrypted data de-identification pipeline."""

from . import attestation, classical, dp, envelope, errors, kanon, pipeline, tabular
from .classical import (
    AggregateSpec,
    GeneralizationHierarchy,
    Statistic,
    aggregate,
    generalize,
    hierarchy_from_csv,
    pseudonymize,
    suppress,
)
from .dp import (
    DpQuery,
    DpResult,
    PrivacyUnit,
    PrivacyUnitKind,
    QueryKind,
    Sensitivity,
    laplace_sample,
    run_dp_query,
    sensitivity,
    tradeoff_curve,
)
from .envelope import Envelope, KeyPair, generate_keypair, open_envelope, seal
from .kanon import (
    KAnonConfig,
    KAnonymityReport,
    anonymize_k,
    check_k_anonymity,
    loss_metric,
    search_lattice,
)
from .pipeline import PipelineConfig, RunReport, parse_pipeline_config, run_pipeline
from .tabular import (
    AttributeRole,
    AttributeSchema,
    Column,
    ColumnKind,
    Dataset,
    DatasetBatch,
    load_dataset,
    partition_batches,
    schema_from_json,
    serialize_dataset,
)

__version__ = "0.1.0"
