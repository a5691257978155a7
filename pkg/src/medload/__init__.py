"""Corpus analytics for translated text: translatedness scoring and
translation-difficulty indicators over UD-annotated parallel corpora."""

__version__ = "0.1.0"
