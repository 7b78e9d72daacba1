# app/services/corpus_loader.py
"""
Locating and loading the shipped corpus: `.cm` model files under <data>/models and
image corpora under <data>/corpora.

A reference is either a path to an existing file or a bare name ("voting",
"voting.cm") looked up in the corpus directory.
"""
import logging
import os
from typing import List, Tuple

from app import config
from app.dsl.parser import ModelBundle, parse_model
from app.engine.errors import DslError, ModelNotFound
from app.services.classifier_bridge import GridSpec, ImageDistribution, parse_image_corpus

logger = logging.getLogger(__name__)

MODEL_SUFFIX = ".cm"
CORPUS_SUFFIX = ".txt"


def models_dir() -> str:
    return os.path.join(config.data_dir(), "models")


def corpora_dir() -> str:
    return os.path.join(config.data_dir(), "corpora")


def _resolve(reference: str, directory: str, suffix: str) -> str:
    if os.path.isfile(reference):
        return reference
    name = reference if reference.endswith(suffix) else reference + suffix
    candidate = os.path.join(directory, name)
    if os.path.isfile(candidate):
        return candidate
    raise ModelNotFound(f"no such file: {reference!r} (also looked in {directory})", {"reference": reference})


def resolve_model_path(reference: str) -> str:
    return _resolve(reference, models_dir(), MODEL_SUFFIX)


def read_text(path: str) -> str:
    # newline="" keeps CRLF visible to the lexer, which accepts both
    with open(path, "r", encoding="utf-8", newline="") as f:
        return f.read()


def read_model(reference: str) -> Tuple[str, str]:
    """Returns (path, source text)."""
    path = resolve_model_path(reference)
    return path, read_text(path)


def load_model(reference: str) -> ModelBundle:
    path, text = read_model(reference)
    try:
        bundle = parse_model(text)
    except DslError as e:
        logger.error(f"❌ {path}:{e.location()}: {e.message}")
        raise
    logger.info(f"✅ Loaded model {bundle.name} from {path} "
                f"({len(bundle.model.signature.endogenous)} endogenous variables, {len(bundle.contexts)} named contexts)")
    return bundle


def load_image_corpus(reference: str, grid: GridSpec) -> ImageDistribution:
    path = _resolve(reference, corpora_dir(), CORPUS_SUFFIX)
    distribution = parse_image_corpus(read_text(path), grid)
    logger.info(f"✅ Loaded {len(distribution.entries)} images from {path}")
    return distribution


def list_models() -> List[str]:
    directory = models_dir()
    if not os.path.isdir(directory):
        logger.warning(f"⚠️ Corpus directory {directory} does not exist")
        return []
    return sorted(name[:-len(MODEL_SUFFIX)] for name in os.listdir(directory) if name.endswith(MODEL_SUFFIX))


def write_text(path: str, content: str) -> str:
    """Write with LF line endings, creating parent directories."""
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(content)
    logger.info(f"✅ Wrote {path}")
    return path
