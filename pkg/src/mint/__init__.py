"""mint: multi-view math word problem toolkit.

Transforms solutions between annotation views (chain-of-thought,
equation, prefix tree traversal), builds instruction-postfixed training
sequences with answer-span loss masks, and grades model predictions per
view.
"""

from .cot import (
    CalcAnnotation,
    ExtractionConfig,
    compose_equation,
    extract_annotations,
    final_answer,
)
from .dataset import (
    DEFAULT_INSTRUCTIONS,
    InstructionSet,
    ProblemRecord,
    TrainingSequence,
    build_sequences,
    char_span_to_token_span,
    expand_views,
    masked_loss,
)
from .expr import (
    BinOp,
    Equation,
    Expr,
    Neg,
    Number,
    Rational,
    evaluate,
    numeric_equal,
    parse_infix,
    parse_prefix,
    render_equation,
    render_infix,
    to_prefix,
)
from .grader import GradeReport, Prediction, Verdict, aggregate, grade_prediction
from .views import COT_CLEAN, EQN, TREE, View, cot_noisy

__version__ = "0.1.0"

__all__ = [
    "BinOp",
    "CalcAnnotation",
    "COT_CLEAN",
    "DEFAULT_INSTRUCTIONS",
    "EQN",
    "Equation",
    "Expr",
    "ExtractionConfig",
    "GradeReport",
    "InstructionSet",
    "Neg",
    "Number",
    "Prediction",
    "ProblemRecord",
    "Rational",
    "TREE",
    "TrainingSequence",
    "Verdict",
    "View",
    "aggregate",
    "build_sequences",
    "char_span_to_token_span",
    "compose_equation",
    "cot_noisy",
    "evaluate",
    "expand_views",
    "extract_annotations",
    "final_answer",
    "grade_prediction",
    "masked_loss",
    "numeric_equal",
    "parse_infix",
    "parse_prefix",
    "render_equation",
    "render_infix",
    "to_prefix",
]
