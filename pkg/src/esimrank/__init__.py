"""Next-utterance selection with ESIM and its knowledge (K-ESIM) and
retrieval-augmented (T-ESIM) extensions, on a small numpy autodiff engine."""

from .corpus import Candidate, Example, Utterance, Vocabulary, build_vocabulary, load_dataset
from .esim import ESIM, ModelConfig
from .kesim import KESIM

__all__ = [
    "Candidate", "Example", "Utterance", "Vocabulary", "build_vocabulary", "load_dataset",
    "ESIM", "KESIM", "ModelConfig",
]
__version__ = "0.1.0"
