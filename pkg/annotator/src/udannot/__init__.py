"""udannot: annotation sidecar for UD parallel corpora.

Enriches parsed CoNLL-U with per-token language-model surprisal (Srp/SrpSub),
forced-decoding translation surprisal and argmax predictions
(MtSrp/MtSrpSub/Pred), and word-alignment links with scores, then hands the
files off to downstream analytics.  Ships deterministic toy models so the
whole pipeline runs offline; the model protocols in `udannot.models` are the
seam for real ones.
"""

__version__ = "0.1.0"

from udannot.annotate import annotate_alignment, annotate_mt, annotate_surprisal
from udannot.job import AnnotationJob, load_job, run_job

__all__ = [
    "AnnotationJob",
    "annotate_alignment",
    "annotate_mt",
    "annotate_surprisal",
    "load_job",
    "run_job",
    "__version__",
]
