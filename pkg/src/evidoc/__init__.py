"""Evidence-first multi-agent question answering over long visual documents."""

from .clues import EvidenceRecord, PageClueReport, discover, discover_all
from .config import PipelineConfig, build_gateway, load_config
from .context import EvidenceContext, PromptMode, build, select_prompt_mode
from .decision import AnswerBundle, EvidenceReference, decide
from .difficulty import DifficultyDecision, assess, route
from .gateway import ChatRequest, ChatResponse, Gateway, HTTPBackend, MockBackend, ModelClass
from .index import MultiVectorIndex, PageEmbedding, QueryEmbedding, read_index, retrieve_top_k, score_page, write_index
from .jsonrepair import extract_json_object
from .pipeline import Pipeline, PipelineRun, run_pipeline
from .prompts import SENTINEL
from .screening import RetainedSet, ScreeningVerdict, build_retained_set, screen

__version__ = "0.1.0"
