"""
Инференс: реконструкция облаков и оценка метрик.
"""

from .engine import InferenceEngine, EvaluationReport

__all__ = ['InferenceEngine', 'EvaluationReport']
