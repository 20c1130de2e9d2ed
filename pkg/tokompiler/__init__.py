"""Anonymizing code tokenizer for C, C++ and Fortran."""

from tokompiler.pipeline import TokompilerPipeline

__all__ = ["TokompilerPipeline"]
