"""Zero-shot relation, entity and event extraction through multi-turn chat."""

from .chat import (
    BackendConfig,
    Conversation,
    FakeClock,
    GoldOracleBackend,
    LiveBackend,
    RateLimiter,
    RecordingBackend,
    ReplayBackend,
    TranscriptStore,
    forbid_network,
    make_backend,
    transcript_key,
)
from .datasets import load_dataset, subsample
from .errors import *  # noqa: F401,F403
from .metrics import (
    MetricReport,
    evaluate,
    micro_f1,
    score_ee_entity,
    score_ee_wordlevel,
    score_ner,
    score_re,
)
from .model import Entity, EventRecord, GoldAnnotation, Sample, Triple
from .parse import (
    EntityList,
    NoneAnswer,
    PairTable,
    RoleTable,
    TypeList,
    parse_entity_list,
    parse_event_types,
    parse_pair_table,
    parse_role_table,
    parse_type_list,
)
from .pipeline import BatchReport, ExtractionResult, extract, run_batch
from .schema import TaskSchema, builtin_schema, load_schema, serialize_schema
from .templates import PromptTemplate, TemplateRegistry, default_registry

__version__ = "0.1.0"
