"""Export annotated event-detection corpora to EMB1 embedding files using
token features from a pretrained language model."""

from .corpus import AnnotatedSentence, CorpusError, load_corpus
from .encoder import WordEncoder
from .export import export

__version__ = "0.1.0"
